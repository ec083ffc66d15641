"""WAV and manifest I/O, plus a synthetic tonal-speech generator.

The generator is a source-filter toy: a glottal impulse train following a
per-tone F0 contour, shaped by two formant resonators and an amplitude
envelope. It exists so the whole pipeline can be trained and checked on a
desk-sized corpus.
"""

from __future__ import annotations

import os
import struct
import wave
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import NUM_TONES
from .dsp import AudioSignal


# ------------------------------------------------------------------ WAV I/O

class WavError(ValueError):
    """Raised for WAV files this toolkit cannot read; ``code`` names the failure."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def load_wav(path, expected_rate: int | None = 16000) -> AudioSignal:
    """Read 16-bit PCM mono RIFF/WAVE; samples are scaled by 1/32768."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavError("malformed", "malformed header: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    pcm = None
    while pos + 8 <= len(data):
        cid, size = data[pos:pos + 4], struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body = data[pos + 8: pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavError("malformed", "malformed header: short fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            pcm = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None or pcm is None:
        raise WavError("malformed", "malformed header: missing fmt or data chunk")
    fmt_code, channels, rate, _, _, bits = fmt
    if fmt_code != 1:
        raise WavError("unsupported_format", f"unsupported format code {fmt_code}")
    if channels != 1:
        raise WavError("unsupported_channels", "unsupported channel count")
    if bits != 16:
        raise WavError("unsupported_bit_depth", f"unsupported bit depth {bits}")
    if expected_rate is not None and rate != expected_rate:
        raise WavError("rate_mismatch", f"sample rate {rate} != expected {expected_rate}")
    samples = np.frombuffer(pcm[: len(pcm) // 2 * 2], dtype="<i2")
    return AudioSignal(samples.astype(np.float64) / 32768.0, rate)


def to_pcm16(samples) -> np.ndarray:
    return np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")


def write_wav(path, signal: AudioSignal | np.ndarray, sample_rate: int | None = None):
    """Write 16-bit mono PCM. Accepts an AudioSignal or raw int16 samples."""
    if isinstance(signal, AudioSignal):
        pcm, rate = to_pcm16(signal.samples), signal.sample_rate
    else:
        pcm, rate = np.asarray(signal, dtype="<i2"), sample_rate
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(rate))
        w.writeframes(pcm.tobytes())


# ----------------------------------------------------------------- manifest

class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    audio_path: str
    tones: tuple


@dataclass
class Manifest:
    entries: list = field(default_factory=list)
    root: Path = Path(".")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.audio_path


def parse_tones(text: str):
    tones = []
    for tok in text.split():
        if len(tok) != 1 or tok not in "01234":
            raise ValueError(f"bad tone digit {tok!r}")
        tones.append(int(tok))
    return tuple(tones)


def load_manifest(path) -> Manifest:
    """Parse ``id<TAB>wav path<TAB>tone digits`` lines; paths resolve against the file's directory."""
    path = Path(path)
    entries, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ManifestError(f"{path}:{lineno}: expected 3 tab-separated fields, "
                                    f"got {len(fields)}")
            uid, wav, tones = fields
            if not uid or not wav:
                raise ManifestError(f"{path}:{lineno}: missing utterance id or path")
            if uid in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate utterance id {uid!r}")
            try:
                parsed = parse_tones(tones)
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
            seen.add(uid)
            entries.append(ManifestEntry(uid, wav, parsed))
    return Manifest(entries, path.parent)


def write_manifest(manifest: Manifest, path):
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(f"{e.utterance_id}\t{e.audio_path}\t{' '.join(map(str, e.tones))}\n")


# ---------------------------------------------------------------- synthesis

DEFAULT_CONTOURS = {
    # F0 multipliers of the base F0 at evenly spaced points of syllable time
    0: (0.9, 0.9),
    1: (1.0, 1.0),
    2: (0.8, 1.1),
    3: (0.9, 0.7, 0.9),
    4: (1.2, 0.8),
}
DEFAULT_GAINS = {0: 0.45, 1: 1.0, 2: 0.8, 3: 0.6, 4: 1.0}
DEFAULT_TILTS = {0: 0.0, 1: 0.0, 2: 0.0, 3: 0.6, 4: -0.6}


@dataclass
class SynthConfig:
    sample_rate: int = 16000
    contours: dict = field(default_factory=lambda: dict(DEFAULT_CONTOURS))
    neutral_duration_scale: float = 0.6      # tone 0 syllables are shortened
    base_f0_range: tuple = (110.0, 220.0)    # drawn once per utterance
    syllable_f0_jitter: float = 0.03         # relative per-syllable base variation
    syllable_dur_range: tuple = (0.18, 0.28)
    gap_range: tuple = (0.02, 0.06)
    edge_range: tuple = (0.10, 0.20)
    # pad to at least base + per_tone * U seconds so the conv stack yields >= 2U+1 steps
    min_duration_base_s: float = 1.0
    min_duration_per_tone_s: float = 0.16
    # F2 kept well above the harmonics so it does not masquerade as a pitch peak
    formants: tuple = ((650.0, 130.0), (3000.0, 300.0))
    # non-pitch cues: syllable loudness and within-syllable loudness slope per tone
    tone_gains: dict = field(default_factory=lambda: dict(DEFAULT_GAINS))
    tone_tilts: dict = field(default_factory=lambda: dict(DEFAULT_TILTS))
    noise_level: float = 0.002
    peak_level: float = 0.8
    seed: int = 0

    def __post_init__(self):
        self.contours = {int(k): tuple(v) for k, v in self.contours.items()}
        if set(self.contours) != set(range(NUM_TONES)):
            raise ValueError("contours must define tones 0..4")
        lo, hi = self.base_f0_range
        mults = [m for c in self.contours.values() for m in c]
        j = 1 + self.syllable_f0_jitter
        if lo * min(mults) / j < 60 or hi * max(mults) * j > 400:
            raise ValueError("contours would leave the 60..400 Hz F0 range")
        frame_s = 0.025
        if self.syllable_dur_range[0] * self.neutral_duration_scale <= 2 * frame_s:
            raise ValueError("syllables must last more than two frames")


def f0_contour(tone: int, n: int, base_f0: float, cfg: SynthConfig) -> np.ndarray:
    points = np.asarray(cfg.contours[tone], dtype=np.float64)
    knots = np.linspace(0.0, 1.0, len(points))
    return base_f0 * np.interp(np.linspace(0.0, 1.0, n), knots, points)


def impulse_train(f0: np.ndarray, sample_rate: int, phase: float = 0.0):
    """Unit impulses whenever the accumulated phase crosses an integer."""
    cycles = phase + np.cumsum(f0) / sample_rate
    pulses = np.zeros_like(f0)
    pulses[1:][np.floor(cycles[1:]) > np.floor(cycles[:-1])] = 1.0
    if np.floor(cycles[0]) > np.floor(phase):
        pulses[0] = 1.0
    return pulses, cycles[-1] % 1.0


def resonator(x, freq, bw, sample_rate):
    r = np.exp(-np.pi * bw / sample_rate)
    theta = 2 * np.pi * freq / sample_rate
    a = [1.0, -2 * r * np.cos(theta), r * r]
    return lfilter([1.0 - r], a, x)


def syllable_envelope(n: int, sample_rate: int, tilt: float) -> np.ndarray:
    ramp = min(n // 4, int(0.02 * sample_rate))
    env = np.ones(n)
    if ramp > 0:
        edge = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, ramp))
        env[:ramp] = edge
        env[n - ramp:] = edge[::-1]
    # loudness slope across the syllable: +tilt rising, -tilt falling
    return env * (1.0 + tilt * np.linspace(-0.5, 0.5, n))


def synth_utterance(tones, cfg: SynthConfig | None = None, rng=None):
    """Render ``tones`` to audio; returns ``(AudioSignal, tones)``."""
    cfg = cfg or SynthConfig()
    tones = tuple(int(t) for t in tones)
    if not tones:
        raise ValueError("need at least one tone")
    if any(t not in cfg.contours for t in tones):
        raise ValueError("tones must be in 0..4")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    sr = cfg.sample_rate
    base = rng.uniform(*cfg.base_f0_range)
    pieces = [np.zeros(int(rng.uniform(*cfg.edge_range) * sr))]
    phase = 0.0
    for i, tone in enumerate(tones):
        dur = rng.uniform(*cfg.syllable_dur_range)
        if tone == 0:
            dur *= cfg.neutral_duration_scale
        n = int(dur * sr)
        syl_base = base * (1 + rng.uniform(-1, 1) * cfg.syllable_f0_jitter)
        pulses, phase = impulse_train(f0_contour(tone, n, syl_base, cfg), sr, phase)
        env = syllable_envelope(n, sr, cfg.tone_tilts.get(tone, 0.0))
        pieces.append(pulses * env * cfg.tone_gains.get(tone, 1.0))
        if i + 1 < len(tones):
            pieces.append(np.zeros(int(rng.uniform(*cfg.gap_range) * sr)))
    pieces.append(np.zeros(int(rng.uniform(*cfg.edge_range) * sr)))
    source = np.concatenate(pieces)
    min_len = int((cfg.min_duration_base_s + cfg.min_duration_per_tone_s * len(tones)) * sr)
    if len(source) < min_len:
        extra = min_len - len(source)
        source = np.concatenate([np.zeros(extra // 2), source, np.zeros(extra - extra // 2)])
    voiced = source
    for freq, bw in cfg.formants:
        voiced = resonator(voiced, freq, bw, sr)
    peak = np.max(np.abs(voiced))
    if peak > 0:
        voiced = voiced * (cfg.peak_level / peak)
    audio = voiced + cfg.noise_level * rng.standard_normal(len(voiced))
    peak = np.max(np.abs(audio))
    if peak > 0.99:
        audio *= 0.99 / peak
    return AudioSignal(audio, sr), tones


def split_seed(seed: int, split: str) -> int:
    return zlib.crc32(f"{seed}:{split}".encode()) & 0x7FFFFFFF


def draw_tone_sequences(n: int, len_range, rng):
    lo, hi = len_range
    if not 1 <= lo <= hi:
        raise ValueError("need 1 <= min length <= max length")
    lengths = rng.integers(lo, hi + 1, size=n)
    return [tuple(int(t) for t in rng.integers(0, NUM_TONES, size=k)) for k in lengths]


def generate_corpus(n_utts: int, len_range, cfg: SynthConfig | None, out_dir,
                    split: str = "train", seed: int | None = None) -> Manifest:
    """Write ``n_utts`` synthetic WAVs plus ``manifest.tsv`` under ``out_dir``.

    Each split draws from its own seed stream, so train/dev/test never share
    utterances even with the same base seed.
    """
    if n_utts < 1:
        raise ValueError("n_utts must be >= 1")
    cfg = cfg or SynthConfig()
    seed = cfg.seed if seed is None else seed
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    os.makedirs(wav_dir, exist_ok=True)
    root_seed = split_seed(seed, split)
    sequences = draw_tone_sequences(n_utts, len_range, np.random.default_rng(root_seed))
    entries = []
    width = max(4, len(str(n_utts)))
    for i, tones in enumerate(sequences):
        uid = f"{split}_{i:0{width}d}"
        signal, _ = synth_utterance(tones, cfg, np.random.default_rng([root_seed, i]))
        write_wav(wav_dir / f"{uid}.wav", signal)
        entries.append(ManifestEntry(uid, f"wav/{uid}.wav", tones))
    manifest = Manifest(entries, out_dir)
    write_manifest(manifest, out_dir / "manifest.tsv")
    return manifest
