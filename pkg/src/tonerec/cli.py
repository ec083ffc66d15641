"""Command-line interface: synth, featurize, train, eval, decode, inspect."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import kernels
from .checkpoint import infer_model_config, load_checkpoint, save_checkpoint
from .config import dump_config, load_config
from .ctc import DEFAULT_BEAM_WIDTH, decode
from .dataio import generate_corpus, load_wav
from .dsp import featurize, write_pgm
from .nn.model import ModelConfig, ToneRecognizer
from .pipeline import evaluate_model, features_for, load_dataset
from .train import TrainingDiverged, fit

log = logging.getLogger("tonerec")


def _configs(args):
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides += [f"train.seed={args.seed}", f"synth.seed={args.seed}"]
    cfgs = load_config(args.config, overrides)
    # the network's input height follows the front-end's feature dimension
    model = cfgs["model"]
    if model.input_bins != cfgs["frontend"].num_bins:
        fields = dict(vars(model), input_bins=cfgs["frontend"].num_bins)
        cfgs["model"] = ModelConfig(**fields)
    return cfgs


def _load_model(path, cfgs):
    params = load_checkpoint(path)
    cfg = infer_model_config(params, cfgs["model"])
    return ToneRecognizer(cfg, params)


def cmd_synth(args):
    cfgs = _configs(args)
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise NotADirectoryError(f"{out} exists and is not a directory")
    manifest = generate_corpus(args.n, (args.min_len, args.max_len), cfgs["synth"], out,
                               split=args.split)
    print(f"wrote {len(manifest)} utterances to {out / 'manifest.tsv'}")


def cmd_featurize(args):
    cfgs = _configs(args)
    frontend = cfgs["frontend"]
    if args.mode:
        frontend = type(frontend)(**dict(vars(frontend), mode=args.mode))
    cep = featurize(load_wav(args.wav), frontend)
    write_pgm(cep, args.out)
    print(f"{args.out}: {cep.num_frames} frames x {cep.data.shape[1]} bins")


def cmd_train(args):
    cfgs = _configs(args)
    train_cfg = cfgs["train"]
    if args.epochs is not None:
        train_cfg = type(train_cfg)(**dict(vars(train_cfg), epochs=args.epochs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfgs), encoding="utf-8")
    frontend, model_cfg = cfgs["frontend"], cfgs["model"]
    train_set = load_dataset(args.train, frontend, model_cfg.dtype)
    dev_set = load_dataset(args.dev, frontend, model_cfg.dtype)
    model = ToneRecognizer(model_cfg, seed=train_cfg.seed)
    log_path, order_path = out / "train.log", out / "batch_order.log"
    log_path.write_text("")
    order_path.write_text("")

    def on_epoch_end(record, params, order):
        save_checkpoint(out / f"epoch{record.epoch:02d}.ckpt", params)
        with open(log_path, "a") as fh:
            fh.write(record.line() + "\n")
        with open(order_path, "a") as fh:
            fh.write(f"epoch={record.epoch} order={','.join(map(str, order))}\n")
        print(record.line(), flush=True)

    try:
        result = fit(model, train_set, dev_set, train_cfg, on_epoch_end=on_epoch_end)
    except TrainingDiverged as exc:
        raise RuntimeError(f"training diverged: {exc}") from None
    (out / "best").write_text(f"epoch{result.best_epoch:02d}.ckpt\n")
    print(f"best epoch {result.best_epoch} (dev loss {result.log[result.best_epoch - 1].dev_loss:.6f})")


def cmd_eval(args):
    cfgs = _configs(args)
    model = _load_model(args.checkpoint, cfgs)
    dataset = load_dataset(args.manifest, cfgs["frontend"], model.cfg.dtype)
    report, _ = evaluate_model(model, dataset, args.decoder, args.beam_width)
    sys.stdout.write(report.render())


def cmd_decode(args):
    cfgs = _configs(args)
    model = _load_model(args.checkpoint, cfgs)
    feats = features_for(load_wav(args.wav), cfgs["frontend"], model.cfg.dtype)
    tones = decode(model.logits(feats), args.decoder, args.beam_width)
    print(" ".join(map(str, tones)))


def cmd_inspect(args):
    params = load_checkpoint(args.checkpoint)
    total = 0
    for name, value in params.items():
        total += value.size
        print(f"{name}\t{'x'.join(map(str, value.shape))}")
    print(f"total parameters: {total}")


def build_parser():
    parser = argparse.ArgumentParser(prog="tonerec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat section.key=value config file")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    common.add_argument("--seed", type=int, help="sets train.seed and synth.seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=6)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", parents=[common], help="write a cepstrogram as PGM")
    p.add_argument("wav")
    p.add_argument("out")
    p.add_argument("--mode", choices=["cepstrogram", "spectrogram", "high_time"])
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[common], help="train a recognizer")
    p.add_argument("--train", required=True, help="training manifest")
    p.add_argument("--dev", required=True, help="dev manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "score a checkpoint on a manifest"),
                                 ("decode", cmd_decode, "decode one WAV file")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--checkpoint", required=True)
        if name == "eval":
            p.add_argument("--manifest", required=True)
        else:
            p.add_argument("wav")
        p.add_argument("--decoder", choices=["greedy", "beam"], default="greedy")
        p.add_argument("--beam-width", type=int, default=DEFAULT_BEAM_WIDTH)
        p.set_defaults(func=func)

    p = sub.add_parser("inspect", help="list checkpoint tensors")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", kernels.BACKEND)
    try:
        args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
