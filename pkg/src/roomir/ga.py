"""Stochastic geometric-acoustics tracer and pressure-IR synthesis.

Rays leave the source isotropically, lose energy per octave band at every
surface hit, and branch specular/diffuse by a per-hit Bernoulli draw on the
1 kHz scattering coefficient.  A transparent spherical receiver collects
crossing rays with detection-probability compensation, so deposits estimate
the local intensity and match the deterministic 1/(4 pi d^2) direct term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, sosfilt

from .ir import ImpulseResponse
from .materials import N_BANDS, OCTAVE_BANDS
from .scene import TriangleMesh, segment_occluded

SCATTER_BAND_1KHZ = OCTAVE_BANDS.index(1000.0)
_EPS = 1e-6


class GaError(ValueError):
    pass


@dataclass
class GaConfig:
    ray_count: int = 20_000
    max_depth: int = 200
    energy_floor: float = 1e-6
    bands: tuple[float, ...] = OCTAVE_BANDS
    sample_rate: float = 48_000.0
    duration: float = 1.5
    c: float = 343.0
    rng_seed: int = 0
    receiver_radius: float = 0.1
    bin_width: float = 1e-3

    def __post_init__(self) -> None:
        if self.ray_count < 1:
            raise GaError("ray_count must be >= 1")
        if self.max_depth < 1:
            raise GaError("max_depth must be >= 1")
        if len(self.bands) != N_BANDS:
            raise GaError(f"expected {N_BANDS} octave bands, got {len(self.bands)}")
        if not 0 < self.energy_floor < 1:
            raise GaError("energy_floor must be in (0, 1)")
        if self.duration <= 0:
            raise GaError("duration must be positive")
        if self.receiver_radius <= 0:
            raise GaError("receiver_radius must be positive")
        if self.bin_width <= 0:
            raise GaError("bin_width must be positive")

    @property
    def n_bins(self) -> int:
        return int(np.ceil(self.duration / self.bin_width))


@dataclass
class EnergyHistogram:
    """Time x band energy arrivals, with the deterministic direct term kept
    separate so synthesis can inject it as a pulse instead of noise."""

    bins: np.ndarray
    bin_width: float
    direct_energy: np.ndarray = field(
        default_factory=lambda: np.zeros(N_BANDS)
    )
    direct_time: float | None = None
    emitted: np.ndarray = field(default_factory=lambda: np.ones(N_BANDS))
    absorbed: np.ndarray = field(default_factory=lambda: np.zeros(N_BANDS))
    escaped: np.ndarray = field(default_factory=lambda: np.zeros(N_BANDS))
    residual: np.ndarray = field(default_factory=lambda: np.zeros(N_BANDS))

    def __post_init__(self) -> None:
        self.bins = np.asarray(self.bins, dtype=np.float64)
        if self.bins.ndim != 2 or self.bins.shape[1] != N_BANDS:
            raise GaError(f"histogram must be (bins, {N_BANDS}), got {self.bins.shape}")
        if np.any(self.bins < 0):
            raise GaError("histogram energies must be >= 0")
        if self.bin_width <= 0:
            raise GaError("bin_width must be positive")

    @property
    def duration(self) -> float:
        return self.bins.shape[0] * self.bin_width

    def total_energy(self) -> np.ndarray:
        return self.bins.sum(axis=0) + self.direct_energy


def _surface_spectra(mesh: TriangleMesh, values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full((len(mesh.triangles), N_BANDS), float(arr))
    elif arr.ndim == 1 and arr.shape == (N_BANDS,):
        arr = np.broadcast_to(arr, (len(mesh.triangles), N_BANDS)).copy()
    elif arr.shape != (len(mesh.triangles), N_BANDS):
        raise GaError(
            f"{name} must be scalar, ({N_BANDS},) or (n_triangles, {N_BANDS})"
        )
    if np.any((arr < 0) | (arr > 1)):
        raise GaError(f"{name} coefficients outside [0, 1]")
    return arr


def trace(
    mesh: TriangleMesh,
    absorption,
    scattering,
    source,
    receiver,
    cfg: GaConfig,
    rng_seed: int | None = None,
) -> EnergyHistogram:
    """Trace cfg.ray_count rays and histogram receiver-crossing energy.

    ``absorption``/``scattering`` broadcast to per-triangle octave spectra.
    The direct source-receiver term is deterministic; ray deposits start at
    the first reflection, so nothing is counted twice.
    """
    source = np.asarray(source, dtype=np.float64)
    receiver = np.asarray(receiver, dtype=np.float64)
    alpha = _surface_spectra(mesh, absorption, "absorption")
    scatter = _surface_spectra(mesh, scattering, "scattering")
    seed = cfg.rng_seed if rng_seed is None else rng_seed
    rng = np.random.default_rng(seed)

    from .scene import points_inside_mesh

    inside = points_inside_mesh(np.stack([source, receiver]), mesh)
    if not inside[0]:
        raise GaError(f"source {source} lies outside the enclosed air region")
    if not inside[1]:
        raise GaError(f"receiver {receiver} lies outside the enclosed air region")

    v0, v1, v2 = mesh.triangle_vertices()
    normals = np.cross(v1 - v0, v2 - v0)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    n = cfg.ray_count
    hist = np.zeros((cfg.n_bins, N_BANDS))
    audit_absorbed = np.zeros(N_BANDS)
    audit_escaped = np.zeros(N_BANDS)
    audit_residual = np.zeros(N_BANDS)

    direct_energy = np.zeros(N_BANDS)
    direct_time = None
    d = np.linalg.norm(receiver - source)
    if d > _EPS and not segment_occluded(source, receiver, mesh):
        direct_energy[:] = 1.0 / (4.0 * np.pi * d * d)
        direct_time = d / cfg.c

    # per-ray state (compacted to live rays each bounce)
    pos = np.broadcast_to(source, (n, 3)).copy()
    dirs = _uniform_sphere(rng, n)
    energy = np.full((n, N_BANDS), 1.0 / n)
    path_len = np.zeros(n)
    floor = cfg.energy_floor * (N_BANDS / n)
    detect_gain = 1.0 / (np.pi * cfg.receiver_radius**2)
    max_time = cfg.n_bins * cfg.bin_width

    for depth in range(cfg.max_depth):
        if len(pos) == 0:
            break
        t_hit, tri_idx = _nearest_hit(pos, dirs, v0, v1, v2)

        if depth > 0:
            _deposit_crossings(
                hist,
                pos,
                dirs,
                t_hit,
                energy,
                path_len,
                receiver,
                cfg,
                detect_gain,
                max_time,
            )

        hit = np.isfinite(t_hit)
        audit_escaped += energy[~hit].sum(axis=0)
        pos = pos[hit] + dirs[hit] * t_hit[hit, None]
        dirs = dirs[hit]
        energy = energy[hit]
        path_len = path_len[hit] + t_hit[hit]
        tri = tri_idx[hit]
        if len(pos) == 0:
            break

        a = alpha[tri]
        audit_absorbed += (energy * a).sum(axis=0)
        energy = energy * (1.0 - a)

        live = energy.sum(axis=1) >= floor
        beyond = path_len / cfg.c >= max_time
        live &= ~beyond
        audit_residual += energy[~live].sum(axis=0)
        pos, dirs, energy, path_len, tri = (
            pos[live],
            dirs[live],
            energy[live],
            path_len[live],
            tri[live],
        )
        if len(pos) == 0:
            break

        nrm = normals[tri]
        facing = np.einsum("ij,ij->i", nrm, dirs) > 0
        nrm = np.where(facing[:, None], -nrm, nrm)

        u = rng.random((len(pos), 3))
        diffuse = u[:, 0] < scatter[tri, SCATTER_BAND_1KHZ]
        out = _reflect(dirs, nrm)
        if np.any(diffuse):
            out[diffuse] = _cosine_hemisphere(nrm[diffuse], u[diffuse, 1], u[diffuse, 2])
        dirs = out
        pos = pos + nrm * _EPS

    audit_residual += energy.sum(axis=0)

    return EnergyHistogram(
        bins=hist,
        bin_width=cfg.bin_width,
        direct_energy=direct_energy,
        direct_time=direct_time,
        emitted=np.ones(N_BANDS),
        absorbed=audit_absorbed,
        escaped=audit_escaped,
        residual=audit_residual,
    )


def _uniform_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    z = 1.0 - 2.0 * rng.random(n)
    phi = 2.0 * np.pi * rng.random(n)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _cosine_hemisphere(normals: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    r = np.sqrt(u1)
    theta = 2.0 * np.pi * u2
    x = r * np.cos(theta)
    y = r * np.sin(theta)
    z = np.sqrt(np.maximum(0.0, 1.0 - u1))
    t, b = _orthonormal_basis(normals)
    return t * x[:, None] + b * y[:, None] + normals * z[:, None]


def _orthonormal_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.where(
        (np.abs(n[:, 0]) < 0.5)[:, None], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]
    )
    t = np.cross(n, helper)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    b = np.cross(n, t)
    return t, b


def _reflect(d: np.ndarray, n: np.ndarray) -> np.ndarray:
    return d - 2.0 * np.einsum("ij,ij->i", d, n)[:, None] * n


def _nearest_hit(pos, dirs, v0, v1, v2) -> tuple[np.ndarray, np.ndarray]:
    """Nearest triangle along each ray; inf where the ray escapes."""
    n = len(pos)
    best_t = np.full(n, np.inf)
    best_tri = np.full(n, -1, dtype=np.int64)
    for t in range(len(v0)):
        e1 = v1[t] - v0[t]
        e2 = v2[t] - v0[t]
        h = np.cross(dirs, e2)
        det = h @ e1
        valid = np.abs(det) > 1e-12
        if not np.any(valid):
            continue
        inv = np.zeros(n)
        inv[valid] = 1.0 / det[valid]
        s = pos - v0[t]
        u = np.einsum("ij,ij->i", s, h) * inv
        q = np.cross(s, e1)
        v = np.einsum("ij,ij->i", q, dirs) * inv
        tt = (q @ e2) * inv
        ok = valid & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (tt > _EPS)
        closer = ok & (tt < best_t)
        best_t[closer] = tt[closer]
        best_tri[closer] = t
    return best_t, best_tri


def _deposit_crossings(
    hist, pos, dirs, t_hit, energy, path_len, receiver, cfg, detect_gain, max_time
) -> None:
    """Deposit compensated energy for segments passing through the receiver."""
    to_c = receiver - pos
    proj = np.einsum("ij,ij->i", to_c, dirs)
    seg_len = np.where(np.isfinite(t_hit), t_hit, np.inf)
    t_c = np.clip(proj, 0.0, seg_len)
    closest = pos + dirs * t_c[:, None]
    dist2 = np.einsum("ij,ij->i", closest - receiver, closest - receiver)
    crossing = (dist2 < cfg.receiver_radius**2) & (proj > _EPS)
    if not np.any(crossing):
        return
    times = (path_len[crossing] + t_c[crossing]) / cfg.c
    bins = np.floor(times / cfg.bin_width).astype(np.int64)
    keep = (bins >= 0) & (bins < hist.shape[0])
    np.add.at(hist, bins[keep], energy[crossing][keep] * detect_gain)


# ---------------------------------------------------------------------------
# Pressure synthesis from the energy histogram
# ---------------------------------------------------------------------------


def octave_band_sos(center: float, fs: float, order: int = 4) -> np.ndarray:
    """Fourth-order Butterworth band-pass over [center/sqrt2, center*sqrt2]."""
    lo = center / np.sqrt(2.0)
    hi = min(center * np.sqrt(2.0), 0.499 * fs)
    if lo >= hi:
        raise GaError(f"octave band at {center} Hz does not fit below fs/2={fs / 2}")
    return butter(order, [lo, hi], btype="bandpass", fs=fs, output="sos")


def synthesize_ir(
    hist: EnergyHistogram, cfg: GaConfig, rng_seed: int | None = None
) -> ImpulseResponse:
    """Shape octave-band noise by the per-bin energy envelope and add the
    direct term as a band-limited pulse."""
    seed = cfg.rng_seed if rng_seed is None else rng_seed
    rng = np.random.default_rng(seed)
    fs = cfg.sample_rate
    n_samples = int(round(cfg.duration * fs))
    out = np.zeros(n_samples)

    sample_bins = np.minimum(
        (np.arange(n_samples) / fs / hist.bin_width).astype(np.int64),
        hist.bins.shape[0] - 1,
    )
    counts = np.bincount(sample_bins, minlength=hist.bins.shape[0]).astype(np.float64)
    counts[counts == 0] = 1.0

    for b, center in enumerate(cfg.bands):
        band_bins = hist.bins[:, b]
        if not np.any(band_bins > 0):
            continue
        noise = rng.standard_normal(n_samples)
        sos = octave_band_sos(center, fs)
        shaped = sosfilt(sos, noise) * (band_bins[sample_bins] > 0)
        # band-limited noise is correlated over a bin, so pin each bin to its
        # exact histogram energy instead of trusting the realized variance
        realized = np.bincount(
            sample_bins, weights=shaped**2, minlength=hist.bins.shape[0]
        )
        gain = np.sqrt(
            np.divide(
                band_bins,
                realized,
                out=np.zeros_like(band_bins),
                where=realized > 0,
            )
        )
        out += shaped * gain[sample_bins]

    onset = 0
    if hist.direct_time is not None and np.any(hist.direct_energy > 0):
        onset = int(round(hist.direct_time * fs))
        pulse = _direct_pulse(hist.direct_energy, cfg, n_samples - onset)
        if onset < n_samples:
            out[onset : onset + len(pulse)] += pulse

    return ImpulseResponse(
        samples=out,
        sample_rate=fs,
        origin="ga",
        onset_index=min(onset, max(n_samples - 1, 0)),
    )


def _direct_pulse(band_energy: np.ndarray, cfg: GaConfig, max_len: int) -> np.ndarray:
    """Band-limited direct pulse carrying exactly the given per-band energy.

    Adjacent octave filters overlap at the edges, so the raw band pulses are
    correlated; orthogonalizing them keeps the summed energy equal to the sum
    of band energies."""
    fs = cfg.sample_rate
    length = min(max_len, int(round(0.05 * fs)) | 1)
    if length <= 0:
        return np.zeros(0)
    impulse = np.zeros(length)
    impulse[0] = 1.0
    basis: list[np.ndarray] = []
    pulse = np.zeros(length)
    for b, center in enumerate(cfg.bands):
        shaped = sosfilt(octave_band_sos(center, fs), impulse)
        for q in basis:
            shaped = shaped - (shaped @ q) * q
        norm = np.sqrt(np.sum(shaped**2))
        if norm <= 0:
            continue
        q = shaped / norm
        basis.append(q)
        if band_energy[b] > 0:
            pulse += q * np.sqrt(band_energy[b])
    return pulse


# ---------------------------------------------------------------------------
# Analytic reverberation-time estimates (test oracles)
# ---------------------------------------------------------------------------


def sabine_rt60(mesh: TriangleMesh, absorption, band: int) -> float:
    """Sabine estimate 0.161 V / sum(S_j alpha_j) for one octave band."""
    if not mesh.is_closed():
        raise GaError("Sabine estimate needs a closed mesh")
    alpha = _surface_spectra(mesh, absorption, "absorption")[:, band]
    areas = mesh.triangle_areas()
    total = float(np.sum(areas * alpha))
    if total <= 0:
        raise GaError("total absorption is zero; reverberation time diverges")
    return 0.161 * mesh.volume() / total


def eyring_rt60(mesh: TriangleMesh, absorption, band: int) -> float:
    """Eyring estimate 0.161 V / (-S ln(1 - mean_alpha))."""
    if not mesh.is_closed():
        raise GaError("Eyring estimate needs a closed mesh")
    alpha = _surface_spectra(mesh, absorption, "absorption")[:, band]
    areas = mesh.triangle_areas()
    surface = float(areas.sum())
    mean_alpha = float(np.sum(areas * alpha) / surface)
    if mean_alpha >= 1.0:
        return 0.0
    if mean_alpha <= 0.0:
        raise GaError("mean absorption is zero; reverberation time diverges")
    return 0.161 * mesh.volume() / (-surface * np.log(1.0 - mean_alpha))
