"""3-D finite-difference time-domain solver with admittance boundaries.

Standard second-order leapfrog on the 7-point stencil.  Air cells adjacent to
solid cells use a locally reacting boundary update obtained by ghost-point
elimination, with the admittance stored on the voxel grid.  Valid up to the
configured maximum frequency; the internal rate follows from the Courant
condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import firwin, resample_poly

from .ir import ImpulseResponse
from .scene import CELL_AIR, CELL_SOLID, VoxelGrid


class FdtdError(ValueError):
    pass


@dataclass
class FdtdConfig:
    f_max: float = 1400.0
    ppw: float = 10.5
    duration: float = 1.5
    c: float = 343.0
    courant_fraction: float = 0.99

    def __post_init__(self) -> None:
        if self.f_max <= 0:
            raise FdtdError("f_max must be positive")
        if self.ppw < 4:
            raise FdtdError("points per wavelength must be >= 4")
        if self.duration <= 0:
            raise FdtdError("duration must be positive")
        if not 0 < self.courant_fraction <= 1:
            raise FdtdError("courant_fraction must be in (0, 1]")

    @property
    def dx(self) -> float:
        return self.c / (self.f_max * self.ppw)

    @property
    def dt(self) -> float:
        return self.courant_fraction * self.dx / (self.c * math.sqrt(3.0))

    @property
    def fs_internal(self) -> float:
        return 1.0 / self.dt


@dataclass
class GridParams:
    dx: float
    dt: float
    fs_internal: float


def derive_grid_params(cfg: FdtdConfig) -> GridParams:
    return GridParams(dx=cfg.dx, dt=cfg.dt, fs_internal=cfg.fs_internal)


def band_limited_impulse(cutoff: float, fs: float) -> np.ndarray:
    """Calibration source: windowed-sinc low-pass coefficients (Blackman),
    odd length 4 fs / cutoff, unit DC gain."""
    if not 0 < cutoff < fs / 2:
        raise FdtdError(f"cutoff {cutoff} must lie in (0, fs/2={fs / 2})")
    taps = int(round(4.0 * fs / cutoff))
    if taps % 2 == 0:
        taps += 1
    return firwin(taps, cutoff, window="blackman", fs=fs)


def free_field_grid(half_width: float, cfg: FdtdConfig, admittance: float = 1.0) -> VoxelGrid:
    """All-air cube with a one-cell solid shell; shell-adjacent air cells
    carry the given admittance (1.0 = characteristic-impedance match)."""
    dx = cfg.dx
    interior = 2 * int(round(half_width / dx)) + 1
    dims = (interior + 2,) * 3
    state = np.zeros(dims, dtype=np.uint8)
    state[0, :, :] = state[-1, :, :] = CELL_SOLID
    state[:, 0, :] = state[:, -1, :] = CELL_SOLID
    state[:, :, 0] = state[:, :, -1] = CELL_SOLID
    beta = np.zeros(dims)
    beta[1, 1:-1, 1:-1] = beta[-2, 1:-1, 1:-1] = admittance
    beta[1:-1, 1, 1:-1] = beta[1:-1, -2, 1:-1] = admittance
    beta[1:-1, 1:-1, 1] = beta[1:-1, 1:-1, -2] = admittance
    origin = -0.5 * dx * np.asarray(dims, dtype=np.float64)
    return VoxelGrid(
        origin=origin,
        dx=dx,
        cell_state=state,
        admittance=beta,
        cell_material=np.full(dims, -1, dtype=np.int64),
    )


class _StencilWorkspace:
    """Precomputed masks and boundary coefficients for one grid.

    The locally reacting boundary sits on the air|solid cell face: ghost-cell
    elimination replaces each solid neighbor by the cell itself plus an
    admittance loss term, giving the update

        p+ = [2 p + lam^2 (S_air + K p - 6 p) - (1 - lam K b / 2) p-]
             / (1 + lam K b / 2)

    with K solid neighbors and admittance b per boundary cell.
    """

    def __init__(self, grid: VoxelGrid, lam: float):
        air = grid.cell_state == CELL_AIR
        solid = ~air
        self.air = air
        self.lam2 = lam * lam

        k = np.zeros(grid.cell_state.shape, dtype=np.float64)
        offsets = [
            (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
        ]
        for off in offsets:
            k += _shift_bool(solid, off, fill=True)
        k[solid] = 0.0
        self.k_solid = k
        lam_b = 0.5 * lam * grid.admittance * k
        self.denom = 1.0 + lam_b
        self.prev_coeff = 1.0 - lam_b
        self.solid = solid


def _shift_bool(arr: np.ndarray, off, fill: bool) -> np.ndarray:
    out = np.full_like(arr, fill)
    src = [slice(None)] * 3
    dst = [slice(None)] * 3
    for axis, o in enumerate(off):
        if o > 0:
            src[axis] = slice(0, arr.shape[axis] - o)
            dst[axis] = slice(o, arr.shape[axis])
        elif o < 0:
            src[axis] = slice(-o, arr.shape[axis])
            dst[axis] = slice(0, arr.shape[axis] + o)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def _neighbor_sum(p: np.ndarray, out: np.ndarray) -> None:
    """Sum of the 6 face neighbors into ``out`` (edges get zero padding;
    the outermost cells are shell solid and never updated)."""
    out.fill(0.0)
    out[1:, :, :] += p[:-1, :, :]
    out[:-1, :, :] += p[1:, :, :]
    out[:, 1:, :] += p[:, :-1, :]
    out[:, :-1, :] += p[:, 1:, :]
    out[:, :, 1:] += p[:, :, :-1]
    out[:, :, :-1] += p[:, :, 1:]


def run(
    grid: VoxelGrid,
    source,
    receivers,
    source_signal,
    cfg: FdtdConfig,
    output_rate: float | None = None,
) -> list[ImpulseResponse]:
    """Leapfrog update p_next = 2p - p_prev + lam^2 Lap7(p) with admittance
    boundaries; soft (additive) source, pressure receivers.

    Recordings come back at the internal rate, or polyphase-resampled to
    ``output_rate`` when given.
    """
    params = derive_grid_params(cfg)
    if abs(grid.dx - params.dx) > 1e-9 * params.dx:
        raise FdtdError(
            f"grid spacing {grid.dx} does not match derived dx {params.dx}"
        )
    lam = cfg.c * params.dt / params.dx
    if lam * math.sqrt(3.0) > 1.0 + 1e-12:
        raise FdtdError(f"stability violated: lambda*sqrt(3) = {lam * math.sqrt(3.0)}")

    src_cell = grid.point_to_cell(np.asarray(source, dtype=np.float64))
    if not grid.is_air(src_cell):
        raise FdtdError(f"source {source} maps to a solid cell {src_cell}")
    rec_cells = []
    for r in receivers:
        cell = grid.point_to_cell(np.asarray(r, dtype=np.float64))
        if not grid.is_air(cell):
            raise FdtdError(f"receiver {r} maps to a solid cell {cell}")
        rec_cells.append(cell)

    signal = np.asarray(source_signal, dtype=np.float64)
    steps = int(math.ceil(cfg.duration / params.dt))
    ws = _StencilWorkspace(grid, lam)

    p_prev = np.zeros(grid.cell_state.shape)
    p = np.zeros(grid.cell_state.shape)
    scratch = np.zeros(grid.cell_state.shape)
    recordings = np.zeros((len(rec_cells), steps))

    for n in range(steps):
        _neighbor_sum(p, scratch)
        scratch += ws.k_solid * p
        p_next = (
            2.0 * p + ws.lam2 * (scratch - 6.0 * p) - ws.prev_coeff * p_prev
        ) / ws.denom
        p_next[ws.solid] = 0.0
        if n < len(signal):
            p_next[src_cell] += signal[n]
        if n % 200 == 0 and not np.isfinite(p_next[src_cell]):
            raise FdtdError(f"field blew up (non-finite pressure) at step {n}")
        for k, cell in enumerate(rec_cells):
            recordings[k, n] = p_next[cell]
        p_prev, p = p, p_next

    if not np.all(np.isfinite(recordings)):
        bad = int(np.argwhere(~np.isfinite(recordings))[0][1])
        raise FdtdError(f"non-finite pressure recorded at step {bad}")

    out: list[ImpulseResponse] = []
    for k in range(len(rec_cells)):
        samples = recordings[k]
        rate = params.fs_internal
        if output_rate is not None:
            samples, rate = _resample(samples, params.fs_internal, output_rate)
        out.append(ImpulseResponse(samples=samples, sample_rate=rate, origin="fdtd"))
    return out


def _resample(x: np.ndarray, fs_in: float, fs_out: float) -> tuple[np.ndarray, float]:
    ratio = Fraction(fs_out / fs_in).limit_denominator(1000)
    y = resample_poly(x, ratio.numerator, ratio.denominator)
    return y, fs_out


def field_energy(
    p: np.ndarray, p_prev: np.ndarray, lam: float, air: np.ndarray
) -> float:
    """Discrete energy conserved by the rigid-boundary leapfrog scheme
    (kinetic + potential cross term over air-air faces)."""
    kinetic = np.sum((p - p_prev) ** 2)
    potential = 0.0
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        pair_air = air[tuple(lo)] & air[tuple(hi)]
        d_now = (p[tuple(hi)] - p[tuple(lo)])[pair_air]
        d_prev = (p_prev[tuple(hi)] - p_prev[tuple(lo)])[pair_air]
        potential += np.sum(d_now * d_prev)
    return float(kinetic + lam * lam * potential)


def run_energy_trace(
    grid: VoxelGrid, source, source_signal, cfg: FdtdConfig, steps: int
) -> tuple[np.ndarray, np.ndarray]:
    """Step the solver and return per-step (discrete field energy, max |p|)
    (diagnostic for conservation/dissipation/stability tests)."""
    params = derive_grid_params(cfg)
    lam = cfg.c * params.dt / params.dx
    src_cell = grid.point_to_cell(np.asarray(source, dtype=np.float64))
    if not grid.is_air(src_cell):
        raise FdtdError(f"source {source} maps to a solid cell {src_cell}")
    signal = np.asarray(source_signal, dtype=np.float64)
    ws = _StencilWorkspace(grid, lam)
    p_prev = np.zeros(grid.cell_state.shape)
    p = np.zeros(grid.cell_state.shape)
    scratch = np.zeros(grid.cell_state.shape)
    energy = np.zeros(steps)
    peak = np.zeros(steps)
    for n in range(steps):
        _neighbor_sum(p, scratch)
        scratch += ws.k_solid * p
        p_next = (
            2.0 * p + ws.lam2 * (scratch - 6.0 * p) - ws.prev_coeff * p_prev
        ) / ws.denom
        p_next[ws.solid] = 0.0
        if n < len(signal):
            p_next[src_cell] += signal[n]
        p_prev, p = p, p_next
        energy[n] = field_energy(p, p_prev, lam, ws.air)
        peak[n] = np.max(np.abs(p))
    return energy, peak
