"""Free-field energy calibration of the wave and ray engines.

Both engines run the same band-limited source in a reflection-free setup; the
wave gain is the mean over arc receivers of sqrt(E_source / E_receiver), the
ray gain comes from the explicit 1/r direct term, and only their quotient is
applied when fusing IRs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fdtd as fdtd_mod
from . import ga as ga_mod
from .scene import TriangleMesh


class CalibrationError(ValueError):
    pass


@dataclass
class CalibrationSetup:
    distance: float = 1.0
    receiver_count: int = 90
    arc_degrees: float = 90.0
    cutoff: float = 255.0
    truncation_factor: float = 2.0

    def __post_init__(self) -> None:
        if self.distance <= 0:
            raise CalibrationError("distance must be positive")
        if self.receiver_count < 1:
            raise CalibrationError("receiver_count must be >= 1")
        if not 0 < self.arc_degrees <= 180:
            raise CalibrationError("arc must be in (0, 180] degrees")
        if self.truncation_factor <= 0:
            raise CalibrationError("truncation_factor must be positive")


@dataclass
class CalibrationResult:
    eta_w: float
    eta_g: float
    eta_combined: float
    per_receiver_error_db: list[float]
    mean_error_db: float
    max_error_db: float
    e_source: float
    e_receiver: list[float]

    def __post_init__(self) -> None:
        if self.eta_w <= 0 or self.eta_g <= 0:
            raise CalibrationError("calibration gains must be positive")
        if len(self.per_receiver_error_db) != len(self.e_receiver):
            raise CalibrationError("error list and receiver energies disagree")
        if self.mean_error_db > self.max_error_db + 1e-12:
            raise CalibrationError("mean error exceeds max error")

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.__dict__, indent=2))

    @classmethod
    def from_json(cls, path: str | Path) -> "CalibrationResult":
        return cls(**json.loads(Path(path).read_text()))


@dataclass
class FdtdCalibration:
    eta_w: float
    per_receiver_error_db: list[float]
    mean_error_db: float
    max_error_db: float
    e_source: float
    e_receiver: list[float]
    recordings: list[np.ndarray]
    receiver_distances: list[float]
    sample_rate: float


def eta_from_energies(e_source: float, e_receivers) -> tuple[float, np.ndarray]:
    """Mean-of-sqrt gain and the signed per-receiver dB deviations.

    error_i = 20 log10(eta_w sqrt(E_r,i) / sqrt(E_s)); zero when each
    calibrated receiver energy matches the source energy exactly.
    """
    e_receivers = np.asarray(e_receivers, dtype=np.float64)
    if e_source <= 0:
        raise CalibrationError("source energy must be positive")
    if np.any(e_receivers <= 0):
        raise CalibrationError("receiver energy must be positive (truncation window empty?)")
    per_receiver_eta = np.sqrt(e_source / e_receivers)
    eta_w = float(np.mean(per_receiver_eta))
    errors_db = 20.0 * np.log10(eta_w * np.sqrt(e_receivers) / math.sqrt(e_source))
    return eta_w, errors_db


def arc_receiver_positions(setup: CalibrationSetup, center: np.ndarray) -> np.ndarray:
    """Receivers on an arc of the configured span in the xy-plane."""
    angles = np.linspace(0.0, math.radians(setup.arc_degrees), setup.receiver_count)
    offsets = setup.distance * np.stack(
        [np.cos(angles), np.sin(angles), np.zeros_like(angles)], axis=1
    )
    return center[None, :] + offsets


def calibrate_fdtd(
    setup: CalibrationSetup,
    cfg: fdtd_mod.FdtdConfig,
    output_gain: float = 1.0,
    domain_margin: float = 1.15,
) -> FdtdCalibration:
    """Run the wave solver in an absorbing free field and fit the energy gain.

    Each recording is truncated once the direct pulse has fully passed:
    window length = pulse duration + truncation_factor * (snapped r / c).
    The domain is sized so wall residuals arrive after every window.
    ``output_gain`` models a solver output-scale convention: it multiplies the
    raw recordings and is exactly undone by the fitted gain.
    """
    params = fdtd_mod.derive_grid_params(cfg)
    pulse = fdtd_mod.band_limited_impulse(setup.cutoff, params.fs_internal)
    t_pulse = len(pulse) / params.fs_internal

    r_max = setup.distance + params.dx
    t_cut_max = t_pulse + setup.truncation_factor * (r_max / cfg.c)
    half_width = domain_margin * (cfg.c * t_cut_max + r_max) / 2.0
    grid = fdtd_mod.free_field_grid(half_width, cfg, admittance=1.0)

    center_cell = grid.point_to_cell(np.zeros(3))
    source = grid.cell_center(center_cell)
    receivers = arc_receiver_positions(setup, source)

    run_cfg = fdtd_mod.FdtdConfig(
        f_max=cfg.f_max,
        ppw=cfg.ppw,
        duration=t_cut_max + 5 * params.dt,
        c=cfg.c,
        courant_fraction=cfg.courant_fraction,
    )
    irs = fdtd_mod.run(grid, source, receivers, pulse, run_cfg)

    snapped = [grid.cell_center(grid.point_to_cell(r)) for r in receivers]
    distances = [float(np.linalg.norm(s - source)) for s in snapped]
    e_source = float(np.sum(pulse**2))
    e_receivers = []
    recordings = []
    for ir, r_i in zip(irs, distances):
        t_cut = t_pulse + setup.truncation_factor * (r_i / cfg.c)
        n_cut = int(round(t_cut * params.fs_internal))
        if n_cut <= 0 or n_cut > ir.samples.size:
            raise CalibrationError(f"truncation window empty or past recording ({n_cut})")
        window = output_gain * ir.samples[:n_cut]
        recordings.append(window)
        e_receivers.append(float(np.sum(window**2)))

    eta_w, errors_db = eta_from_energies(e_source, e_receivers)
    abs_err = np.abs(errors_db)
    return FdtdCalibration(
        eta_w=eta_w,
        per_receiver_error_db=[float(e) for e in errors_db],
        mean_error_db=float(abs_err.mean()),
        max_error_db=float(abs_err.max()),
        e_source=e_source,
        e_receiver=e_receivers,
        recordings=recordings,
        receiver_distances=distances,
        sample_rate=params.fs_internal,
    )


def _free_field_mesh(extent: float) -> TriangleMesh:
    """Closed cube centered at the origin (surfaces made fully absorptive by
    the caller) standing in for open space."""
    h = extent / 2.0
    corners = np.array(
        [
            [-h, -h, -h], [h, -h, -h], [h, h, -h], [-h, h, -h],
            [-h, -h, h], [h, -h, h], [h, h, h], [-h, h, h],
        ]
    )
    quads = [
        (0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
        (2, 3, 7, 6), (1, 2, 6, 5), (3, 0, 4, 7),
    ]
    tris = []
    for q in quads:
        tris.append((q[0], q[1], q[2]))
        tris.append((q[0], q[2], q[3]))
    return TriangleMesh(vertices=corners, triangles=np.asarray(tris))


def calibrate_ga(setup: CalibrationSetup, cfg: ga_mod.GaConfig) -> float:
    """Ray-engine gain from the deterministic direct term.

    In free field the direct deposit is 1/(4 pi r^2), i.e. pressure amplitude
    k/r; the per-receiver gain is r_i / k and the result is their mean.
    """
    mesh = _free_field_mesh(extent=2.0 * (setup.distance + 1.5))
    source = np.zeros(3)
    receivers = arc_receiver_positions(setup, source)
    probe_cfg = ga_mod.GaConfig(
        ray_count=8,
        max_depth=1,
        energy_floor=cfg.energy_floor,
        bands=cfg.bands,
        sample_rate=cfg.sample_rate,
        duration=min(cfg.duration, 0.2),
        c=cfg.c,
        rng_seed=cfg.rng_seed,
        receiver_radius=cfg.receiver_radius,
        bin_width=cfg.bin_width,
    )
    etas = []
    for r in receivers:
        hist = ga_mod.trace(mesh, 1.0, 0.0, source, r, probe_cfg)
        e_direct = float(hist.direct_energy[0])
        if e_direct <= 0:
            raise CalibrationError("no direct path in free field: internal error")
        etas.append(1.0 / math.sqrt(e_direct))
    return float(np.mean(etas))


def combined_eta(eta_w: float, eta_g: float) -> float:
    """The only gain the fusion applies to the wave branch."""
    if eta_w <= 0 or eta_g <= 0:
        raise CalibrationError(f"gains must be positive, got ({eta_w}, {eta_g})")
    return eta_w / eta_g


def calibrate_both(
    setup: CalibrationSetup,
    fdtd_cfg: fdtd_mod.FdtdConfig,
    ga_cfg: ga_mod.GaConfig,
) -> CalibrationResult:
    wave = calibrate_fdtd(setup, fdtd_cfg)
    eta_g = calibrate_ga(setup, ga_cfg)
    return CalibrationResult(
        eta_w=wave.eta_w,
        eta_g=eta_g,
        eta_combined=combined_eta(wave.eta_w, eta_g),
        per_receiver_error_db=wave.per_receiver_error_db,
        mean_error_db=wave.mean_error_db,
        max_error_db=wave.max_error_db,
        e_source=wave.e_source,
        e_receiver=wave.e_receiver,
    )
