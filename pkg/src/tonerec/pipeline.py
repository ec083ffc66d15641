"""Glue between manifests, the front-end, the model and the decoders."""

from __future__ import annotations

import numpy as np

from .ctc import DEFAULT_BEAM_WIDTH, decode
from .dataio import load_manifest, load_wav
from .dsp import FrontendConfig, featurize
from .metrics import evaluate_pairs


def features_for(signal, frontend: FrontendConfig, dtype="float32"):
    """Model input for one signal: ``(bins, frames)``."""
    return np.ascontiguousarray(featurize(signal, frontend).data.T, dtype=dtype)


def load_dataset(manifest, frontend: FrontendConfig, dtype="float32"):
    """``[(features, tones), ...]`` for every manifest entry (path or Manifest)."""
    if not hasattr(manifest, "entries"):
        manifest = load_manifest(manifest)
    data = []
    for entry in manifest:
        signal = load_wav(manifest.resolve(entry))
        data.append((features_for(signal, frontend, dtype), list(entry.tones)))
    return data


def decode_dataset(model, dataset, decoder="greedy", beam_width=DEFAULT_BEAM_WIDTH,
                   batch_size=16):
    hyps = []
    for start in range(0, len(dataset), batch_size):
        chunk = dataset[start:start + batch_size]
        logits, _ = model.forward([f for f, _ in chunk])
        hyps.extend(decode(out, decoder, beam_width) for out in logits)
    return hyps


def evaluate_model(model, dataset, decoder="greedy", beam_width=DEFAULT_BEAM_WIDTH):
    hyps = decode_dataset(model, dataset, decoder, beam_width)
    return evaluate_pairs(zip(hyps, [t for _, t in dataset])), hyps
