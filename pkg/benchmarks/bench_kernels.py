"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each row reports the best of N runs per backend and the speedup. The last
row is one full training step of the default model on a batch of 16
utterances, with the backend swapped under the whole network.
"""

import argparse
import time

import numpy as np

from tonerec import kernels
from tonerec.ctc import expand_labels, log_softmax
from tonerec.nn.model import ModelConfig, ToneRecognizer
from tonerec.train import batch_loss_and_grads


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    a = (rng.normal(size=(16, 16, 6000)) + 1j * rng.normal(size=(16, 16, 6000))).astype(np.complex64)
    b = (rng.normal(size=(16, 16, 6000)) + 1j * rng.normal(size=(16, 16, 6000))).astype(np.complex64)
    x = rng.normal(size=(16, 236, 300)).astype(np.float32)
    logp = log_softmax(rng.normal(size=(60, 6)))
    ext = expand_labels([1, 2, 3, 4, 0, 1])
    hyp, ref = rng.integers(0, 5, 200), rng.integers(0, 5, 200)

    model = ToneRecognizer(ModelConfig(), seed=0)
    batch = [(rng.normal(size=(256, int(n))).astype(np.float32), [1, 3, 0])
             for n in rng.integers(150, 400, 16)]

    def train_step():
        batch_loss_and_grads(model, batch, True, np.random.default_rng(0))

    return [
        ("cmac 16x16x6000 c64", lambda k: k.cmac(a, b, False)),
        ("maxpool 16x236x300", lambda k: k.maxpool_forward(x, 4, 2)),
        ("ctc alpha/beta T=60", lambda k: k.ctc_alpha_beta(logp, ext, 0)),
        ("edit table 200x200", lambda k: k.edit_table(hyp, ref)),
        ("train step, batch 16", lambda k: train_step()),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy fallback is available")
    names = list(backends)
    print(f"{'kernel':<24}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    saved = kernels._impl
    try:
        for label, run in cases(np.random.default_rng(0)):
            row = {}
            for name, mod in backends.items():
                kernels._impl = mod
                # the wrapper module is passed so the train step dispatches the same way
                target = kernels if label.startswith("train") else mod
                run(target)  # warm-up
                row[name] = best_of(lambda: run(target), args.repeat)
            line = f"{label:<24}" + "".join(f"{row[n] * 1e3:>10.2f}ms" for n in names)
            if len(names) > 1:
                line += f"{row['python'] / row['cython']:>11.1f}x"
            print(line)
    finally:
        kernels._impl = saved


if __name__ == "__main__":
    main()
