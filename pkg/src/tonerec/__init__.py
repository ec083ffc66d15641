"""Tone recognition from cepstrograms with a CNN + BiGRU + CTC network."""

__version__ = "0.1.0"

NUM_TONES = 5
BLANK = 0
