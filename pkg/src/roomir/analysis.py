"""Acoustic metrics, IR comparison reports, dataset statistics, and Eq.-style
reverberant speech synthesis (clean speech convolved with an IR plus noise).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .ir import ImpulseResponse


class AnalysisError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Energy decay / reverberation time
# ---------------------------------------------------------------------------


@dataclass
class DecayCurve:
    edc_db: np.ndarray
    rt60: float
    fit_range_db: tuple[float, float] = (-5.0, -25.0)
    fit_failed: bool = False


def schroeder_edc(
    ir: ImpulseResponse, fit_range_db: tuple[float, float] = (-5.0, -25.0)
) -> DecayCurve:
    """Backward-integrated energy decay curve and the T20-based RT60.

    RT60 is 3x the time the least-squares line over the fit range takes to
    fall 20 dB.  When the curve never reaches the lower fit bound the result
    carries ``fit_failed`` instead of an estimate.
    """
    h = ir.samples
    if h.size == 0 or not np.any(h != 0):
        raise AnalysisError("cannot analyze an all-zero impulse response")
    energy = h.astype(np.float64) ** 2
    edc = np.cumsum(energy[::-1])[::-1]
    edc_db = 10.0 * np.log10(np.maximum(edc / edc[0], 1e-300))

    hi, lo = fit_range_db
    above = np.nonzero(edc_db <= hi)[0]
    below = np.nonzero(edc_db <= lo)[0]
    if len(above) == 0 or len(below) == 0 or below[0] <= above[0]:
        return DecayCurve(
            edc_db=edc_db, rt60=float("nan"), fit_range_db=fit_range_db, fit_failed=True
        )
    i0, i1 = above[0], below[0]
    t = np.arange(i0, i1 + 1) / ir.sample_rate
    y = edc_db[i0 : i1 + 1]
    slope, _ = np.polyfit(t, y, 1)
    if slope >= 0:
        return DecayCurve(
            edc_db=edc_db, rt60=float("nan"), fit_range_db=fit_range_db, fit_failed=True
        )
    rt60 = 3.0 * (20.0 / -slope)
    return DecayCurve(edc_db=edc_db, rt60=rt60, fit_range_db=fit_range_db)


# ---------------------------------------------------------------------------
# Band levels / comparison
# ---------------------------------------------------------------------------


def third_octave_centers(lo: float = 50.0, hi: float = 10_000.0) -> np.ndarray:
    """Base-2 third-octave centers anchored at 1 kHz, spanning [lo, hi]."""
    k = np.arange(-40, 41)
    centers = 1000.0 * 2.0 ** (k / 3.0)
    return centers[(centers >= lo) & (centers <= hi)]


@dataclass
class BandLevels:
    centers: np.ndarray
    energies: np.ndarray
    levels_db: np.ndarray


def band_response(
    ir: ImpulseResponse, bands, *, edge_factor: float = 2.0 ** (1.0 / 6.0)
) -> BandLevels:
    """Integrated FFT energy per band; levels are energy densities in dB so a
    unit impulse reads flat.  Band edges default to third-octave.
    """
    h = ir.samples
    if h.size == 0:
        raise AnalysisError("empty impulse response")
    centers = np.asarray(bands, dtype=np.float64)
    edges = np.stack([centers / edge_factor, centers * edge_factor], axis=1)
    return _band_levels_from_edges(h, ir.sample_rate, centers, edges)


def _band_levels_from_edges(h, fs, centers, edges) -> BandLevels:
    n = h.size
    spectrum = np.fft.rfft(h)
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    # one-sided Parseval weights: sum(w_k |H_k|^2) / n == sum(h^2)
    weights = np.full(freqs.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    density = weights * np.abs(spectrum) ** 2 / n

    energies = np.empty(len(centers))
    levels = np.empty(len(centers))
    for i, (lo, hi) in enumerate(edges):
        mask = (freqs >= lo) & (freqs < hi)
        e = float(density[mask].sum())
        energies[i] = e
        width = hi - lo
        levels[i] = 10.0 * math.log10(e / width) if e > 0 else -np.inf
    return BandLevels(centers=centers, energies=energies, levels_db=levels)


def band_energies_tiled(ir: ImpulseResponse, edges: np.ndarray) -> np.ndarray:
    """Band energies for explicit contiguous edges [f0, f1, ..., fN]; when the
    edges tile [0, fs/2] the energies sum to the total signal energy."""
    edges = np.asarray(edges, dtype=np.float64)
    pairs = np.stack([edges[:-1], edges[1:]], axis=1)
    # include the Nyquist bin in the last band
    pairs[-1, 1] = pairs[-1, 1] + 1.0
    result = _band_levels_from_edges(
        ir.samples, ir.sample_rate, pairs.mean(axis=1), pairs
    )
    return result.energies


@dataclass
class ComparisonReport:
    labels: list[str]
    centers: np.ndarray
    levels_db: np.ndarray  # (n_irs, n_bands)
    pairwise_mean_abs_db: dict[tuple[str, str], float]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["band_hz", *self.labels])
            for j, c in enumerate(self.centers):
                writer.writerow([f"{c:.1f}", *[f"{v:.4f}" for v in self.levels_db[:, j]]])
            writer.writerow([])
            writer.writerow(["pair", "mean_abs_diff_db"])
            for (a, b), v in sorted(self.pairwise_mean_abs_db.items()):
                writer.writerow([f"{a}|{b}", f"{v:.4f}"])


def compare_report(
    irs: dict[str, ImpulseResponse],
    bands=None,
    band_range: tuple[float, float] | None = None,
) -> ComparisonReport:
    """Per-band level table plus pairwise mean absolute level differences.

    ``band_range`` restricts which bands enter the pairwise aggregate.
    """
    if len(irs) < 2:
        raise AnalysisError("comparison needs at least two impulse responses")
    centers = (
        np.asarray(bands, dtype=np.float64)
        if bands is not None
        else third_octave_centers()
    )
    labels = list(irs.keys())
    levels = np.stack(
        [band_response(irs[label], centers).levels_db for label in labels]
    )
    if band_range is None:
        in_range = np.ones(len(centers), dtype=bool)
    else:
        in_range = (centers >= band_range[0]) & (centers <= band_range[1])
    pairwise: dict[tuple[str, str], float] = {}
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            diff = levels[i, in_range] - levels[j, in_range]
            finite = np.isfinite(diff)
            value = float(np.mean(np.abs(diff[finite]))) if np.any(finite) else float("inf")
            pairwise[(labels[i], labels[j])] = value
            pairwise[(labels[j], labels[i])] = value
    return ComparisonReport(
        labels=labels, centers=centers, levels_db=levels, pairwise_mean_abs_db=pairwise
    )


# ---------------------------------------------------------------------------
# Reverberant speech synthesis
# ---------------------------------------------------------------------------


def augment_speech(
    clean: np.ndarray,
    ir: np.ndarray,
    noise: np.ndarray | None = None,
    offset: int | None = None,
    snr_db: float = 20.0,
    rng_seed: int = 0,
) -> np.ndarray:
    """Reverberant copy: clean convolved with the IR plus offset noise at the
    requested SNR (relative to the reverberant signal).

    The noise segment starts at ``offset`` (drawn uniformly when omitted) and
    wraps cyclically when too short.
    """
    clean = np.asarray(clean, dtype=np.float64)
    ir = np.asarray(ir, dtype=np.float64)
    if clean.size == 0 or ir.size == 0:
        raise AnalysisError("clean signal and impulse response must be nonempty")
    reverberant = fftconvolve(clean, ir, mode="full")
    if noise is None:
        return reverberant
    noise = np.asarray(noise, dtype=np.float64)
    if noise.size == 0 or not np.any(noise != 0):
        return reverberant

    n = reverberant.size
    if offset is None:
        offset = int(np.random.default_rng(rng_seed).integers(0, noise.size))
    idx = (offset + np.arange(n)) % noise.size
    segment = noise[idx]
    rms_rev = np.sqrt(np.mean(reverberant**2))
    rms_noise = np.sqrt(np.mean(segment**2))
    gain = rms_rev / (rms_noise * 10.0 ** (snr_db / 20.0))
    return reverberant + gain * segment


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------


@dataclass
class DatasetStats:
    distances: np.ndarray
    distance_hist: np.ndarray
    distance_edges: np.ndarray
    volumes: np.ndarray
    rt60s: np.ndarray

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["distance_bin_lo", "distance_bin_hi", "count"])
            for lo, hi, c in zip(
                self.distance_edges[:-1], self.distance_edges[1:], self.distance_hist
            ):
                writer.writerow([f"{lo:.3f}", f"{hi:.3f}", int(c)])
            writer.writerow([])
            writer.writerow(["volume_m3", "rt60_s"])
            for v, t in zip(self.volumes, self.rt60s):
                writer.writerow([f"{v:.3f}", f"{t:.4f}"])


def dataset_stats(entries, n_bins: int = 20) -> DatasetStats:
    """Distance histogram and volume-vs-RT60 table from manifest entries.

    Each entry needs ``source``, ``receiver``, ``scene_volume`` and ``rt60``
    attributes (or dict keys).
    """
    if not entries:
        raise AnalysisError("empty manifest")

    def get(e, key):
        return e[key] if isinstance(e, dict) else getattr(e, key)

    src = np.asarray([get(e, "source") for e in entries], dtype=np.float64)
    rcv = np.asarray([get(e, "receiver") for e in entries], dtype=np.float64)
    distances = np.linalg.norm(src - rcv, axis=1)
    hist, edges = np.histogram(distances, bins=n_bins)
    volumes = np.asarray([get(e, "scene_volume") for e in entries], dtype=np.float64)
    rt60s = np.asarray([get(e, "rt60") for e in entries], dtype=np.float64)
    return DatasetStats(
        distances=distances,
        distance_hist=hist,
        distance_edges=edges,
        volumes=volumes,
        rt60s=rt60s,
    )
