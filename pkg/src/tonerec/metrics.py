"""Levenshtein alignment, tone error rate and the evaluation report."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import NUM_TONES, kernels

MATCH, SUB, INS, DEL = "match", "substitution", "insertion", "deletion"


@dataclass(frozen=True)
class EditBreakdown:
    insertions: int = 0
    deletions: int = 0
    substitutions: int = 0
    ref_len: int = 0

    @property
    def errors(self) -> int:
        return self.insertions + self.deletions + self.substitutions

    @property
    def distance_rate(self) -> float:
        """Errors over reference length for this single pair."""
        if self.ref_len == 0:
            raise ValueError("empty reference")
        return self.errors / self.ref_len

    def __add__(self, other):
        return EditBreakdown(self.insertions + other.insertions,
                             self.deletions + other.deletions,
                             self.substitutions + other.substitutions,
                             self.ref_len + other.ref_len)


@dataclass(frozen=True)
class AlignmentOp:
    kind: str
    ref_index: Optional[int] = None
    hyp_index: Optional[int] = None


def edit_distance(a, b) -> int:
    return int(kernels.edit_table(list(a), list(b))[-1, -1])


def align(hyp, ref):
    """Unit-cost edit alignment of ``hyp`` against ``ref``.

    When several backtrace moves are optimal, match beats substitution beats
    deletion beats insertion. Returns ``(EditBreakdown, ops)`` with ops in
    left-to-right order.
    """
    hyp, ref = list(hyp), list(ref)
    d = kernels.edit_table(hyp, ref)
    i, j = len(ref), len(hyp)
    ops = []
    n_ins = n_del = n_sub = 0
    while i > 0 or j > 0:
        cur = d[i, j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and cur == d[i - 1, j - 1]:
            ops.append(AlignmentOp(MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and cur == d[i - 1, j - 1] + 1:
            ops.append(AlignmentOp(SUB, i - 1, j - 1))
            n_sub += 1
            i, j = i - 1, j - 1
        elif i > 0 and cur == d[i - 1, j] + 1:
            ops.append(AlignmentOp(DEL, ref_index=i - 1))
            n_del += 1
            i -= 1
        else:
            ops.append(AlignmentOp(INS, hyp_index=j - 1))
            n_ins += 1
            j -= 1
    ops.reverse()
    return EditBreakdown(n_ins, n_del, n_sub, len(ref)), ops


def apply_ops(hyp, ref, ops):
    """Replay an alignment on ``hyp``; yields the reference when the ops are consistent."""
    out = []
    for op in ops:
        if op.kind == MATCH:
            out.append(hyp[op.hyp_index])
        elif op.kind in (SUB, DEL):
            out.append(ref[op.ref_index])
    return out


def corpus_breakdown(pairs) -> EditBreakdown:
    total = EditBreakdown()
    for hyp, ref in pairs:
        total = total + align(hyp, ref)[0]
    return total


def corpus_ter(pairs) -> float:
    """Micro-averaged tone error rate: total edits over total reference tones."""
    total = corpus_breakdown(pairs)
    if total.ref_len == 0:
        raise ValueError("all references are empty")
    return total.errors / total.ref_len


def per_tone_counts(alignments, num_tones=NUM_TONES):
    """``(correct, total)`` per reference tone from ``(ref, ops)`` pairs."""
    correct = np.zeros(num_tones, dtype=np.int64)
    total = np.zeros(num_tones, dtype=np.int64)
    for ref, ops in alignments:
        for tone in ref:
            total[tone] += 1
        for op in ops:
            if op.kind == MATCH:
                correct[ref[op.ref_index]] += 1
    return correct, total


def per_tone_accuracy(alignments, num_tones=NUM_TONES):
    """Fraction of each reference tone recovered as a match; None where the tone never occurs."""
    correct, total = per_tone_counts(alignments, num_tones)
    return [float(c / n) if n else None for c, n in zip(correct, total)]


@dataclass
class EvalReport:
    ter: float
    breakdown: EditBreakdown
    tone_accuracy: list
    num_utterances: int

    def table(self) -> str:
        b = self.breakdown
        lines = [
            f"utterances: {self.num_utterances}",
            f"TER: {100 * self.ter:.2f}%  ({b.errors} errors / {b.ref_len} tones)",
            "",
            f"{'':12s}{'Insertions':>12s}{'Deletions':>12s}{'Substitutions':>15s}",
            f"{'counts':12s}{b.insertions:>12d}{b.deletions:>12d}{b.substitutions:>15d}",
            "",
            f"{'tone':<8s}{'accuracy':>10s}",
        ]
        for tone, acc in enumerate(self.tone_accuracy):
            shown = "n/a" if acc is None else f"{100 * acc:.1f}%"
            lines.append(f"{'Tone ' + str(tone):<8s}{shown:>10s}")
        return "\n".join(lines)

    def key_values(self) -> str:
        b = self.breakdown
        rows = [f"ter={self.ter:.6f}", f"insertions={b.insertions}",
                f"deletions={b.deletions}", f"substitutions={b.substitutions}",
                f"ref_tones={b.ref_len}", f"utterances={self.num_utterances}"]
        for tone, acc in enumerate(self.tone_accuracy):
            rows.append(f"tone{tone}_accuracy={'nan' if acc is None else f'{acc:.6f}'}")
        return "\n".join(rows)

    def render(self) -> str:
        return self.table() + "\n\n" + self.key_values() + "\n"


def evaluate_pairs(pairs) -> EvalReport:
    pairs = [(list(h), list(r)) for h, r in pairs]
    total = EditBreakdown()
    alignments = []
    for hyp, ref in pairs:
        bd, ops = align(hyp, ref)
        total = total + bd
        alignments.append((ref, ops))
    if total.ref_len == 0:
        raise ValueError("all references are empty")
    return EvalReport(ter=total.errors / total.ref_len, breakdown=total,
                      tone_accuracy=per_tone_accuracy(alignments),
                      num_utterances=len(pairs))
