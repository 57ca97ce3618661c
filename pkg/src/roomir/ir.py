"""Impulse-response container and float-PCM WAV round-trip helpers."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile

ORIGINS = ("ga", "fdtd", "hybrid", "measured")


@dataclass
class ImpulseResponse:
    """Uniformly sampled pressure signal tagged by the engine that produced it.

    ``onset_index`` marks the sample of the direct arrival (0 when the signal
    is aligned so the source fires at sample 0).
    """

    samples: np.ndarray
    sample_rate: float
    origin: str = "hybrid"
    onset_index: int = 0

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("impulse response must be a 1-D signal")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}, expected one of {ORIGINS}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("impulse response contains non-finite samples")
        if self.samples.size and not 0 <= self.onset_index < self.samples.size:
            raise ValueError("onset_index outside signal")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def energy(self) -> float:
        return float(np.sum(self.samples**2))

    def scaled(self, gain: float) -> "ImpulseResponse":
        return replace(self, samples=self.samples * gain)


def write_wav(ir: ImpulseResponse, path: str | Path) -> None:
    """Write a mono 32-bit float PCM WAV; round-trips bit-exactly via read_wav."""
    if ir.samples.size == 0:
        raise ValueError("refusing to write empty impulse response")
    rate = int(round(ir.sample_rate))
    if abs(rate - ir.sample_rate) > 1e-6:
        raise ValueError(f"WAV output needs an integer sample rate, got {ir.sample_rate}")
    wavfile.write(str(path), rate, ir.samples.astype(np.float32))


def read_wav(path: str | Path, origin: str = "measured") -> ImpulseResponse:
    """Read a mono WAV (float32/float64 or PCM16, integers scaled to [-1, 1))."""
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono WAV, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported WAV sample format {data.dtype}")
    return ImpulseResponse(samples=samples, sample_rate=float(rate), origin=origin)
