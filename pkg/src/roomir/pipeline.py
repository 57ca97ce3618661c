"""End-to-end dataset generation: materials, placements, dual simulation,
calibration caching, fusion, WAV output, and manifest writing.

Per-pair jobs are independent and deterministic given (config, seed): every
random draw uses a seed derived in the parent from the root seed and the
(scene, pair) coordinates, so worker count never changes the output.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import calibrate as calibrate_mod
from . import fdtd as fdtd_mod
from . import ga as ga_mod
from .analysis import schroeder_edc
from .hybrid import CrossoverSpec, combine
from .ir import ImpulseResponse, read_wav, write_wav  # re-exported API
from .materials import (
    EmbeddingTable,
    MaterialRecord,
    ScatteringPrior,
    assignment_distribution,
    load_embedding_table,
    load_material_db,
    sample_assignment,
    sample_scattering,
)
from .scene import TriangleMesh, load_mesh, sample_placements, voxelize

GA_TOP_EDGE = 8000.0 * math.sqrt(2.0)


class PipelineError(ValueError):
    pass


@dataclass
class PipelineConfig:
    scenes: list[str]
    material_db: str
    output_dir: str
    embeddings: str | None = None
    sample_rate: float = 48_000.0
    rng_seed: int = 0
    max_jobs: int = 1
    pair_cap: int = 16
    grid_spacing: float = 1.0
    clearance: float = 0.2
    ga: ga_mod.GaConfig = field(default_factory=ga_mod.GaConfig)
    fdtd: fdtd_mod.FdtdConfig = field(default_factory=fdtd_mod.FdtdConfig)
    crossover: CrossoverSpec = field(default_factory=CrossoverSpec)
    calibration: calibrate_mod.CalibrationSetup = field(
        default_factory=calibrate_mod.CalibrationSetup
    )
    scattering_prior: ScatteringPrior = field(default_factory=ScatteringPrior.default)

    def __post_init__(self) -> None:
        if not self.scenes:
            raise PipelineError("config lists no scenes")
        if self.pair_cap < 1:
            raise PipelineError("pair_cap must be >= 1")
        if self.max_jobs < 1:
            raise PipelineError("max_jobs must be >= 1")
        if self.sample_rate < 2.0 * GA_TOP_EDGE:
            raise PipelineError(
                f"sample_rate {self.sample_rate} below Nyquist for the top octave "
                f"band edge ({GA_TOP_EDGE:.0f} Hz)"
            )
        if self.ga.sample_rate != self.sample_rate:
            # the ray-traced IR is synthesized directly at the output rate
            from dataclasses import replace

            self.ga = replace(self.ga, sample_rate=self.sample_rate)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text())
        return cls.from_dict(raw, base=Path(path).parent)

    @classmethod
    def from_dict(cls, raw: dict, base: Path | None = None) -> "PipelineConfig":
        def resolve(p):
            if base is None:
                return str(p)
            q = Path(p)
            return str(q if q.is_absolute() else base / q)

        kwargs = dict(raw)
        kwargs["scenes"] = [resolve(s) for s in raw["scenes"]]
        kwargs["material_db"] = resolve(raw["material_db"])
        kwargs["output_dir"] = resolve(raw["output_dir"])
        if raw.get("embeddings"):
            kwargs["embeddings"] = resolve(raw["embeddings"])
        if "ga" in raw:
            kwargs["ga"] = ga_mod.GaConfig(**raw["ga"])
        if "fdtd" in raw:
            kwargs["fdtd"] = fdtd_mod.FdtdConfig(**raw["fdtd"])
        if "crossover" in raw:
            kwargs["crossover"] = CrossoverSpec(**raw["crossover"])
        if "calibration" in raw:
            kwargs["calibration"] = calibrate_mod.CalibrationSetup(**raw["calibration"])
        if "scattering_prior" in raw:
            kwargs["scattering_prior"] = ScatteringPrior(**raw["scattering_prior"])
        return cls(**kwargs)


@dataclass
class ManifestEntry:
    scene: str
    pair_index: int
    source: list[float]
    receiver: list[float]
    distance: float
    wav_ga: str | None = None
    wav_fdtd: str | None = None
    wav_hybrid: str | None = None
    materials: dict[str, str] = field(default_factory=dict)
    material_seed: int = 0
    rt60: float | None = None
    eta_w: float | None = None
    eta_g: float | None = None
    eta_combined: float | None = None
    norm_gain: float | None = None
    scene_volume: float | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        d = float(
            np.linalg.norm(np.asarray(self.source) - np.asarray(self.receiver))
        )
        if abs(d - self.distance) > 1e-9:
            raise PipelineError(
                f"manifest distance {self.distance} != recomputed {d}"
            )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


# ---------------------------------------------------------------------------
# Material assignment for a whole scene
# ---------------------------------------------------------------------------


def _derived_seed(root: int, *key: int) -> int:
    ss = np.random.SeedSequence([root & 0xFFFFFFFF, *key])
    return int(ss.generate_state(1)[0])


def assign_scene_materials(
    mesh: TriangleMesh,
    db: list[MaterialRecord],
    embeddings: EmbeddingTable | None,
    prior: ScatteringPrior,
    root_seed: int,
    scene_index: int = 0,
) -> tuple[np.ndarray, np.ndarray, dict[str, str]]:
    """Sample one material per labeled group; returns per-triangle absorption
    and scattering spectra plus the label -> material-name record."""
    n_tri = len(mesh.triangles)
    absorption = np.zeros((n_tri, 8))
    scattering = np.zeros((n_tri, 8))
    chosen: dict[str, str] = {}
    material_ids = np.zeros(n_tri, dtype=np.int64)
    for g, label in enumerate(mesh.object_labels):
        tri_mask = mesh.triangle_group == g
        if not np.any(tri_mask):
            continue
        dist = assignment_distribution(label, db, embeddings)
        idx = sample_assignment(dist, _derived_seed(root_seed, scene_index, g, 0))
        record = db[idx]
        chosen[label] = record.name
        material_ids[tri_mask] = idx
        absorption[tri_mask] = record.absorption
        if record.scattering is not None:
            scattering[tri_mask] = record.scattering
        else:
            scattering[tri_mask] = sample_scattering(
                prior, _derived_seed(root_seed, scene_index, g, 1)
            )
    mesh.triangle_material = material_ids
    return absorption, scattering, chosen


# ---------------------------------------------------------------------------
# Calibration cache
# ---------------------------------------------------------------------------


def _calibration_cache_key(cfg: PipelineConfig) -> str:
    payload = json.dumps(
        {
            "setup": asdict(cfg.calibration),
            "fdtd": asdict(cfg.fdtd),
            "ga": {
                "c": cfg.ga.c,
                "receiver_radius": cfg.ga.receiver_radius,
                "bands": list(cfg.ga.bands),
            },
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def cached_calibration(cfg: PipelineConfig) -> calibrate_mod.CalibrationResult:
    """Calibration runs once per (engine-config) pair, cached under a content
    hash next to the manifest."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = out / f"calibration_{_calibration_cache_key(cfg)}.json"
    if cache.exists():
        return calibrate_mod.CalibrationResult.from_json(cache)
    result = calibrate_mod.calibrate_both(cfg.calibration, cfg.fdtd, cfg.ga)
    result.to_json(cache)
    return result


# ---------------------------------------------------------------------------
# Per-pair job
# ---------------------------------------------------------------------------

# Scene bundles are staged here before the worker pool forks, so jobs carry
# only indices instead of meshes and voxel grids.
_BUNDLES: dict[str, dict] = {}


def _stage_bundle(scene_id: str, bundle: dict) -> None:
    _BUNDLES[scene_id] = bundle


def _pair_worker(job: dict) -> dict:
    bundle = _BUNDLES[job["scene_id"]]
    cfg: PipelineConfig = bundle["cfg"]
    mesh: TriangleMesh = bundle["mesh"]
    grid = bundle["grid"]
    source = np.asarray(job["source"])
    receiver = np.asarray(job["receiver"])

    irs_fdtd = fdtd_mod.run(
        grid, source, [receiver], np.array([1.0]), cfg.fdtd, output_rate=cfg.sample_rate
    )
    ir_fdtd = ImpulseResponse(irs_fdtd[0].samples, cfg.sample_rate, "fdtd")

    hist = ga_mod.trace(
        mesh,
        bundle["absorption"],
        bundle["scattering"],
        source,
        receiver,
        cfg.ga,
        rng_seed=job["trace_seed"],
    )
    ir_ga = ga_mod.synthesize_ir(hist, cfg.ga, rng_seed=job["synth_seed"])

    eta = job["eta_combined"]
    ir_hybrid = combine(ir_fdtd, ir_ga, eta, cfg.crossover)
    # the wave-only variant is the calibrated low branch (zero ray input)
    zero_ga = ImpulseResponse(np.zeros(1), cfg.sample_rate, "ga")
    ir_fdtd_band = combine(ir_fdtd, zero_ga, eta, cfg.crossover)
    ir_fdtd_band = ImpulseResponse(ir_fdtd_band.samples, cfg.sample_rate, "fdtd")

    out = Path(cfg.output_dir)
    stem = f"{job['scene_id']}_{job['pair_index']:04d}"
    paths = {}
    for tag, ir in (
        ("ga", ir_ga),
        ("fdtd", ir_fdtd_band),
        ("hybrid", ir_hybrid),
    ):
        p = out / f"{stem}_{tag}.wav"
        write_wav(ir, p)
        paths[tag] = p.name

    decay = schroeder_edc(ir_hybrid)
    peak = float(np.max(np.abs(ir_hybrid.samples)))
    return {
        "rt60": None if decay.fit_failed else float(decay.rt60),
        "norm_gain": None if peak == 0 else 1.0 / peak,
        "paths": paths,
    }


def schedule(jobs: list[tuple], max_parallel: int) -> list[tuple[bool, object]]:
    """Run (callable, arg) jobs with bounded parallelism; each outcome is
    (ok, result-or-error-string).  Sequential when max_parallel == 1."""
    if max_parallel < 1:
        raise PipelineError("max_parallel must be >= 1")
    results: list[tuple[bool, object]] = []
    if max_parallel == 1:
        for fn, arg in jobs:
            try:
                results.append((True, fn(arg)))
            except Exception as exc:  # noqa: BLE001 - fail-soft per job
                results.append((False, f"{type(exc).__name__}: {exc}"))
        return results
    with ProcessPoolExecutor(max_workers=max_parallel) as pool:
        futures = [pool.submit(fn, arg) for fn, arg in jobs]
        for fut in futures:
            try:
                results.append((True, fut.result()))
            except Exception as exc:  # noqa: BLE001
                results.append((False, f"{type(exc).__name__}: {exc}"))
    return results


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def run_pipeline(cfg: PipelineConfig, dry_run: bool = False) -> list[ManifestEntry]:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    db = load_material_db(cfg.material_db)
    embeddings = load_embedding_table(cfg.embeddings) if cfg.embeddings else None

    calibration = None if dry_run else cached_calibration(cfg)

    entries: list[ManifestEntry] = []
    jobs: list[tuple] = []
    job_meta: list[ManifestEntry] = []
    for scene_index, scene_path in enumerate(cfg.scenes):
        scene_id = Path(scene_path).stem
        mesh = load_mesh(scene_path)
        absorption, scattering, chosen = assign_scene_materials(
            mesh, db, embeddings, cfg.scattering_prior, cfg.rng_seed, scene_index
        )
        placements = sample_placements(mesh, cfg.grid_spacing, cfg.clearance)
        order = np.random.default_rng(
            _derived_seed(cfg.rng_seed, scene_index, 0, 2)
        ).permutation(len(placements.pairs))
        pair_ids = [int(i) for i in order[: cfg.pair_cap]]

        if dry_run:
            for pair_index in pair_ids:
                s, r = placements.pairs[pair_index]
                src = placements.sources[s]
                rcv = placements.receivers[r]
                entries.append(
                    ManifestEntry(
                        scene=scene_id,
                        pair_index=pair_index,
                        source=[float(x) for x in src],
                        receiver=[float(x) for x in rcv],
                        distance=float(np.linalg.norm(src - rcv)),
                        materials=chosen,
                        material_seed=cfg.rng_seed,
                        scene_volume=mesh.volume() if mesh.is_closed() else None,
                    )
                )
            continue

        grid = voxelize(mesh, cfg.fdtd.dx, db)
        _stage_bundle(
            scene_id,
            {
                "cfg": cfg,
                "mesh": mesh,
                "grid": grid,
                "absorption": absorption,
                "scattering": scattering,
            },
        )
        volume = mesh.volume() if mesh.is_closed() else None
        for pair_index in pair_ids:
            s, r = placements.pairs[pair_index]
            src = placements.sources[s]
            rcv = placements.receivers[r]
            job = {
                "scene_id": scene_id,
                "pair_index": pair_index,
                "source": [float(x) for x in src],
                "receiver": [float(x) for x in rcv],
                "trace_seed": _derived_seed(cfg.rng_seed, scene_index, pair_index, 3),
                "synth_seed": _derived_seed(cfg.rng_seed, scene_index, pair_index, 4),
                "eta_combined": calibration.eta_combined,
            }
            jobs.append((_pair_worker, job))
            job_meta.append(
                ManifestEntry(
                    scene=scene_id,
                    pair_index=pair_index,
                    source=job["source"],
                    receiver=job["receiver"],
                    distance=float(np.linalg.norm(src - rcv)),
                    materials=chosen,
                    material_seed=cfg.rng_seed,
                    eta_w=calibration.eta_w,
                    eta_g=calibration.eta_g,
                    eta_combined=calibration.eta_combined,
                    scene_volume=volume,
                )
            )

    if dry_run:
        return entries

    outcomes = schedule(jobs, cfg.max_jobs)
    for entry, (ok, payload) in zip(job_meta, outcomes):
        if ok:
            entry.rt60 = payload["rt60"]
            entry.norm_gain = payload["norm_gain"]
            entry.wav_ga = payload["paths"]["ga"]
            entry.wav_fdtd = payload["paths"]["fdtd"]
            entry.wav_hybrid = payload["paths"]["hybrid"]
        else:
            entry.error = str(payload)
        entries.append(entry)

    entries.sort(key=lambda e: (e.scene, e.pair_index))
    write_manifest(entries, out / "manifest.jsonl")
    return entries


def write_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for entry in entries:
            fh.write(entry.to_json() + "\n")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    entries = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            entries.append(ManifestEntry(**json.loads(line)))
    return entries
