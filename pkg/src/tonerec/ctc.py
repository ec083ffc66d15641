"""CTC loss with analytic gradients, greedy decoding and prefix beam search.

Output index 0 is the blank; tone ``k`` (0..4) is output index ``k + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

BLANK = 0
NEG_INF = -np.inf
DEFAULT_BEAM_WIDTH = 64


@dataclass
class CtcLoss:
    loss: float
    logit_grads: np.ndarray


def log_softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    m = logits.max(axis=-1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))


def _check_labels(labels, num_outputs):
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size and (labels.min() < 0 or labels.max() > num_outputs - 2):
        raise ValueError(f"labels must lie in 0..{num_outputs - 2}")
    return labels


def expand_labels(labels):
    """Blank-interleaved output indices ``[blank, l1, blank, ..., lU, blank]``."""
    labels = np.asarray(labels, dtype=np.int64)
    ext = np.zeros(2 * labels.size + 1, dtype=np.int64)
    ext[1::2] = labels + 1
    return ext


def min_input_length(labels) -> int:
    """Fewest steps able to emit ``labels``: one per label plus one per adjacent repeat."""
    labels = list(labels)
    return len(labels) + sum(a == b for a, b in zip(labels, labels[1:]))


def ctc_loss(logits, labels) -> CtcLoss:
    """``-log p(labels | logits)`` and its gradient w.r.t. the ``(T, K)`` logits."""
    logits = np.asarray(logits, dtype=np.float64)
    T, K = logits.shape
    labels = _check_labels(labels, K)
    if T < min_input_length(labels.tolist()):
        raise ValueError("label longer than input")
    logp = log_softmax(logits)
    ext = expand_labels(labels)
    alpha, beta = kernels.ctc_alpha_beta(logp, ext, BLANK)
    loglik = np.logaddexp(alpha[-1, -1], alpha[-1, -2]) if ext.size > 1 else alpha[-1, -1]
    occupancy = np.exp(alpha + beta - loglik)            # (T, S) state posteriors
    onehot = np.zeros((ext.size, K))
    onehot[np.arange(ext.size), ext] = 1.0
    grad = np.exp(logp) - occupancy @ onehot
    return CtcLoss(loss=float(-loglik), logit_grads=grad)


def collapse(path):
    """Merge repeats then drop blanks; returns tone labels (output index - 1)."""
    out, prev = [], None
    for k in path:
        k = int(k)
        if k != prev and k != BLANK:
            out.append(k - 1)
        prev = k
    return out


def greedy_decode(logits):
    """Best-path decoding; ``argmax`` ties go to the lowest output index."""
    return collapse(np.argmax(np.asarray(logits), axis=-1))


def beam_decode(logits, beam_width: int = DEFAULT_BEAM_WIDTH):
    """Prefix beam search without a language model.

    Each prefix carries the summed probability of paths ending in blank and
    non-blank, plus the best single-path score of each kind. Pruning keeps the
    ``beam_width`` prefixes with the highest best-path score (ties to the
    lexicographically smaller prefix), so width 1 follows the greedy path; the
    returned prefix is the survivor with the highest summed probability.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    logp = log_softmax(logits)
    T, K = logp.shape
    beams = {(): (0.0, NEG_INF, 0.0, NEG_INF)}   # prefix -> (pb, pnb, vb, vnb)
    for t in range(T):
        row = logp[t]
        nxt = {}

        def add(prefix, pb, pnb, vb, vnb):
            old = nxt.get(prefix)
            if old is None:
                nxt[prefix] = (pb, pnb, vb, vnb)
            else:
                nxt[prefix] = (np.logaddexp(old[0], pb), np.logaddexp(old[1], pnb),
                               max(old[2], vb), max(old[3], vnb))

        for prefix, (pb, pnb, vb, vnb) in beams.items():
            total = np.logaddexp(pb, pnb)
            vbest = max(vb, vnb)
            add(prefix, total + row[BLANK], NEG_INF, vbest + row[BLANK], NEG_INF)
            last = prefix[-1] if prefix else None
            for k in range(1, K):
                if k == last:
                    add(prefix, NEG_INF, pnb + row[k], NEG_INF, vnb + row[k])
                    add(prefix + (k,), NEG_INF, pb + row[k], NEG_INF, vb + row[k])
                else:
                    add(prefix + (k,), NEG_INF, total + row[k], NEG_INF, vbest + row[k])
        if len(nxt) > beam_width:
            ranked = sorted(nxt.items(), key=lambda kv: (-max(kv[1][2], kv[1][3]), kv[0]))
            nxt = dict(ranked[:beam_width])
        beams = nxt
    best = min(beams.items(), key=lambda kv: (-np.logaddexp(kv[1][0], kv[1][1]), kv[0]))
    return [k - 1 for k in best[0]]


def decode(logits, decoder: str = "greedy", beam_width: int = DEFAULT_BEAM_WIDTH):
    if decoder == "greedy":
        return greedy_decode(logits)
    if decoder == "beam":
        return beam_decode(logits, beam_width)
    raise ValueError(f"unknown decoder {decoder!r}")
