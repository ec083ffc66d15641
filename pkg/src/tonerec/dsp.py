"""Cepstrogram front-end: framing, Hamming window, log-magnitude DFT, real cepstrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

MODES = ("cepstrogram", "spectrogram", "high_time_cepstrogram")
STD_FLOOR = 1e-5


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("audio must be mono (1-D samples)")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FrontendConfig:
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    fft_len: int = 512
    mode: str = "cepstrogram"
    lifter_cut: int = 25
    quefrency_bins: int = 256
    log_floor: float = 1e-10
    normalize: bool = True

    def __post_init__(self):
        if self.mode == "high_time":
            self.mode = "high_time_cepstrogram"
        if self.mode not in MODES:
            raise ValueError(f"unknown frontend mode {self.mode!r}; expected one of {MODES}")
        if self.fft_len <= 0 or self.fft_len & (self.fft_len - 1):
            raise ValueError("fft_len must be a power of two")
        if not 0 < self.lifter_cut < self.quefrency_bins <= self.fft_len // 2:
            raise ValueError("need 0 < lifter_cut < quefrency_bins <= fft_len/2")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")
        if self.frame_len_ms <= 0 or self.hop_ms <= 0:
            raise ValueError("frame and hop lengths must be positive")

    def frame_samples(self, sample_rate: int) -> int:
        return int(round(self.frame_len_ms * sample_rate / 1000))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop_ms * sample_rate / 1000))

    @property
    def num_bins(self) -> int:
        """Feature dimension produced per frame in the configured mode."""
        if self.mode == "spectrogram":
            return self.fft_len // 2 + 1
        return self.quefrency_bins


@dataclass(frozen=True)
class Cepstrogram:
    """Feature map of shape ``(num_frames, bins)``; row i is frame i."""

    data: np.ndarray
    frame_hop_s: float

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]


def num_frames(n_samples: int, frame: int, hop: int) -> int:
    if n_samples < frame:
        return 0
    return (n_samples - frame) // hop + 1


def frame_signal(signal: AudioSignal, cfg: FrontendConfig) -> np.ndarray:
    """Split into overlapping frames, shape ``(n, frame_samples)``.

    Frame i starts at ``i * hop``; a trailing partial frame is dropped.
    """
    frame = cfg.frame_samples(signal.sample_rate)
    hop = cfg.hop_samples(signal.sample_rate)
    if frame > cfg.fft_len:
        raise ValueError(f"frame of {frame} samples exceeds fft_len={cfg.fft_len}")
    if len(signal.samples) < frame:
        raise ValueError("signal too short")
    return sliding_window_view(signal.samples, frame)[::hop].copy()


def hamming(n: int) -> np.ndarray:
    # symmetric form, 0.54 - 0.46 cos(2 pi k / (n - 1))
    return np.hamming(n)


def apply_window(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] == 0:
        raise ValueError("empty frame")
    return frame * hamming(frame.shape[-1])


def log_spectrum(windowed: np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    """``log(max(|DFT|, floor))`` for bins ``0..fft_len/2``; works on stacked frames."""
    mag = np.abs(np.fft.rfft(windowed, n=cfg.fft_len, axis=-1))
    return np.log(np.maximum(mag, cfg.log_floor))


def cepstrum(windowed: np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    """Real cepstrum truncated to ``quefrency_bins`` coefficients.

    The inverse transform runs over the full, even-symmetric log spectrum, so
    the result is real; ``irfft`` rebuilds the upper half implicitly.
    """
    full = np.fft.irfft(log_spectrum(windowed, cfg), n=cfg.fft_len, axis=-1)
    return full[..., : cfg.quefrency_bins]


def high_time_lifter(features: np.ndarray, cut: int) -> np.ndarray:
    out = np.array(features, copy=True)
    out[..., :cut] = 0.0
    return out


def normalize_features(data: np.ndarray) -> np.ndarray:
    """Per-bin zero mean / unit variance over the frames of one utterance."""
    mean = data.mean(axis=0)
    std = np.maximum(data.std(axis=0), STD_FLOOR)
    return (data - mean) / std


def featurize(signal: AudioSignal, cfg: FrontendConfig | None = None) -> Cepstrogram:
    cfg = cfg or FrontendConfig()
    frames = apply_window(frame_signal(signal, cfg))
    if cfg.mode == "spectrogram":
        data = log_spectrum(frames, cfg)
    else:
        data = cepstrum(frames, cfg)
        if cfg.mode == "high_time_cepstrogram":
            data = high_time_lifter(data, cfg.lifter_cut)
    if cfg.normalize:
        data = normalize_features(data)
    hop_s = cfg.hop_samples(signal.sample_rate) / signal.sample_rate
    return Cepstrogram(data=data, frame_hop_s=hop_s)


def peak_quefrency(cepstra: np.ndarray, lo: int = 32, hi: int | None = None) -> np.ndarray:
    """Index of the largest cepstral coefficient in ``[lo, hi)`` for each row."""
    cepstra = np.atleast_2d(cepstra)
    hi = cepstra.shape[-1] if hi is None else hi
    return lo + np.argmax(cepstra[..., lo:hi], axis=-1)


def write_pgm(cep: Cepstrogram, path) -> None:
    """Binary P5 image: columns are frames, rows are bins with bin 0 on top."""
    img = np.asarray(cep.data, dtype=np.float64).T
    lo, hi = img.min(), img.max()
    if hi > lo:
        scaled = np.round((img - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(img)
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(scaled.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 image written by :func:`write_pgm` as ``(height, width)`` uint8."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    width, height = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(raw[pos + 1: pos + 1 + width * height], dtype=np.uint8)
    return pixels.reshape(height, width)
