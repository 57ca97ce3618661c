"""Crossover fusion of the calibrated wave IR with the ray-traced IR.

The wave branch is DC-stripped, scaled by the combined calibration gain, and
low-passed through a Linkwitz-Riley filter; the ray branch takes the matching
high-pass.  Both branches are causal forward IIR so no energy leaks ahead of
the direct arrival.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfilt

from .ir import ImpulseResponse


class HybridError(ValueError):
    pass


@dataclass
class CrossoverSpec:
    crossover_freq: float = 1400.0
    lr_order: int = 4
    dc_cutoff: float = 10.0

    def __post_init__(self) -> None:
        if self.lr_order < 2 or self.lr_order % 2 != 0:
            raise HybridError("lr_order must be even and >= 2")
        if not 0 < self.dc_cutoff < self.crossover_freq:
            raise HybridError("need 0 < dc_cutoff < crossover_freq")


def butterworth(kind: str, order: int, cutoff: float, fs: float) -> np.ndarray:
    """Digital Butterworth (bilinear transform, prewarped) as SOS."""
    if kind not in ("low", "high"):
        raise HybridError(f"kind must be 'low' or 'high', got {kind!r}")
    if order < 1:
        raise HybridError("order must be >= 1")
    if not 0 < cutoff < fs / 2:
        raise HybridError(f"cutoff {cutoff} outside (0, fs/2={fs / 2})")
    return butter(order, cutoff, btype=kind, fs=fs, output="sos")


def lr_crossover(signal: np.ndarray, spec: CrossoverSpec, branch: str, fs: float) -> np.ndarray:
    """One Linkwitz-Riley branch: the half-order Butterworth applied twice."""
    if spec.crossover_freq >= fs / 2:
        raise HybridError(
            f"crossover {spec.crossover_freq} Hz does not fit below fs/2={fs / 2}"
        )
    sos = butterworth(branch, spec.lr_order // 2, spec.crossover_freq, fs)
    return sosfilt(sos, sosfilt(sos, np.asarray(signal, dtype=np.float64)))


def dc_remove(signal: np.ndarray, cutoff: float = 10.0, fs: float = 48_000.0) -> np.ndarray:
    """Second-order Butterworth high-pass stripping DC/subsonic drift."""
    sos = butterworth("high", 2, cutoff, fs)
    return sosfilt(sos, np.asarray(signal, dtype=np.float64))


def combine(
    ir_fdtd: ImpulseResponse,
    ir_ga: ImpulseResponse,
    eta_combined: float,
    spec: CrossoverSpec,
) -> ImpulseResponse:
    """out = LR_low(dc_remove(eta * wave)) + LR_high(ray), zero-padded to the
    longer input.  Inputs must share a sample rate and a t=0 source onset."""
    if abs(ir_fdtd.sample_rate - ir_ga.sample_rate) > 1e-9:
        raise HybridError(
            f"sample-rate mismatch: {ir_fdtd.sample_rate} vs {ir_ga.sample_rate}"
        )
    if eta_combined <= 0:
        raise HybridError(f"calibration gain must be positive, got {eta_combined}")
    fs = ir_fdtd.sample_rate
    n = max(ir_fdtd.samples.size, ir_ga.samples.size)
    low_in = np.zeros(n)
    low_in[: ir_fdtd.samples.size] = eta_combined * ir_fdtd.samples
    high_in = np.zeros(n)
    high_in[: ir_ga.samples.size] = ir_ga.samples

    low = lr_crossover(dc_remove(low_in, spec.dc_cutoff, fs), spec, "low", fs)
    high = lr_crossover(high_in, spec, "high", fs)
    onset = min(ir_fdtd.onset_index, ir_ga.onset_index)
    return ImpulseResponse(
        samples=low + high, sample_rate=fs, origin="hybrid", onset_index=onset
    )
