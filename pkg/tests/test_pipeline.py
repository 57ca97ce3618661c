import json
import os
import time

import numpy as np
import pytest

from roomir.ir import ImpulseResponse, read_wav, write_wav
from roomir.materials import ScatteringPrior, load_material_db
from roomir.pipeline import (
    ManifestEntry,
    PipelineConfig,
    PipelineError,
    assign_scene_materials,
    read_manifest,
    run_pipeline,
    schedule,
    write_manifest,
)
from roomir.scene import load_mesh

from conftest import MATERIAL_CSV, write_box_obj


def tiny_config(tmp_path, out_name="out", jobs=1, seed=7):
    scene = write_box_obj(tmp_path / "room.obj", 2.6, 2.6, 2.4)
    db = tmp_path / "materials.csv"
    if not db.exists():
        db.write_text(MATERIAL_CSV)
    raw = {
        "scenes": [str(scene)],
        "material_db": str(db),
        "output_dir": str(tmp_path / out_name),
        "rng_seed": seed,
        "max_jobs": jobs,
        "pair_cap": 2,
        "grid_spacing": 1.0,
        "clearance": 0.2,
        "ga": {"ray_count": 2500, "max_depth": 60, "duration": 0.25, "rng_seed": 0},
        "fdtd": {"f_max": 350.0, "duration": 0.25},
        "crossover": {"crossover_freq": 350.0, "lr_order": 4, "dc_cutoff": 10.0},
        "calibration": {"receiver_count": 8},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


class TestWav:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        samples = rng.standard_normal(4800).astype(np.float32).astype(np.float64)
        ir = ImpulseResponse(samples, 48_000.0, "hybrid")
        path = tmp_path / "ir.wav"
        write_wav(ir, path)
        back = read_wav(path, origin="hybrid")
        np.testing.assert_array_equal(back.samples, samples)
        assert back.sample_rate == 48_000.0

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_wav(ImpulseResponse(np.zeros(0), 48_000.0, "ga"), tmp_path / "x.wav")

    def test_file_size(self, tmp_path):
        ir = ImpulseResponse(np.zeros(48_000) + 0.5, 48_000.0, "ga")
        path = tmp_path / "one_second.wav"
        write_wav(ir, path)
        # canonical header is 44 bytes; allow a small extension chunk
        assert abs(path.stat().st_size - (44 + 4 * 48_000)) <= 36

    def test_pcm16_ingestion(self, tmp_path):
        from scipy.io import wavfile

        data = (np.sin(np.linspace(0, 20, 1000)) * 20_000).astype(np.int16)
        path = tmp_path / "pcm.wav"
        wavfile.write(path, 16_000, data)
        ir = read_wav(path)
        assert ir.origin == "measured"
        assert np.max(np.abs(ir.samples)) <= 1.0


class TestConfig:
    def test_from_json_defaults(self, tmp_path):
        cfg = PipelineConfig.from_json(tiny_config(tmp_path))
        assert cfg.sample_rate == 48_000.0
        assert cfg.fdtd.f_max == 350.0
        assert cfg.pair_cap == 2
        assert cfg.ga.sample_rate == 48_000.0

    def test_rejects_low_sample_rate(self, tmp_path):
        path = tiny_config(tmp_path)
        raw = json.loads(path.read_text())
        raw["sample_rate"] = 16_000
        path.write_text(json.dumps(raw))
        with pytest.raises(PipelineError, match="sample_rate"):
            PipelineConfig.from_json(path)

    def test_pair_cap_validated(self, tmp_path):
        path = tiny_config(tmp_path)
        raw = json.loads(path.read_text())
        raw["pair_cap"] = 0
        path.write_text(json.dumps(raw))
        with pytest.raises(PipelineError, match="pair_cap"):
            PipelineConfig.from_json(path)


class TestMaterialAssignment:
    def test_deterministic_and_complete(self, tmp_path, material_csv):
        scene = write_box_obj(tmp_path / "room.obj", 3.0, 3.0, 3.0)
        mesh = load_mesh(scene)
        db = load_material_db(material_csv)
        prior = ScatteringPrior.default()
        a1, s1, chosen1 = assign_scene_materials(mesh, db, None, prior, 42)
        a2, s2, chosen2 = assign_scene_materials(mesh, db, None, prior, 42)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(s1, s2)
        assert chosen1 == chosen2
        used_labels = {
            label
            for g, label in enumerate(mesh.object_labels)
            if np.any(mesh.triangle_group == g)
        }
        assert set(chosen1) == used_labels
        assert a1.shape == (len(mesh.triangles), 8)
        assert np.all((s1 >= 0) & (s1 <= 1))

    def test_embedding_table_drives_choice(self, tmp_path, material_csv):
        # a table putting one label exactly on one material name forces the pick
        import numpy as np

        from roomir.materials import EmbeddingTable, load_material_db

        scene = write_box_obj(
            tmp_path / "room.obj", 3.0, 3.0, 3.0, face_labels=["window glass"] * 6
        )
        mesh = load_mesh(scene)
        db = load_material_db(material_csv)
        dim = 8
        entries = {"window glass": np.eye(dim)[0]}
        for i, record in enumerate(db):
            entries[record.name] = np.eye(dim)[0 if record.name == "window glass pane" else i + 1]
        table = EmbeddingTable(entries=entries, dimension=dim)
        for seed in range(10):
            _, _, chosen = assign_scene_materials(
                mesh, db, table, ScatteringPrior.default(), seed
            )
            assert chosen["window glass"] == "window glass pane"

    def test_semantic_pull(self, tmp_path, material_csv):
        # a label that nearly matches a DB name should pick it most of the time
        scene = write_box_obj(
            tmp_path / "room.obj", 3.0, 3.0, 3.0,
            face_labels=["wood floor on joists"] * 6,
        )
        mesh = load_mesh(scene)
        db = load_material_db(material_csv)
        hits = 0
        for seed in range(40):
            _, _, chosen = assign_scene_materials(
                mesh, db, None, ScatteringPrior.default(), seed
            )
            hits += chosen["wood floor on joists"] == "wood floor on joists"
        assert hits >= 30


class TestSchedule:
    def test_parallel_matches_sequential(self):
        jobs = [(_square, i) for i in range(10)]
        seq = schedule(jobs, 1)
        par = schedule(jobs, 4)
        assert seq == par

    def test_poisoned_job_fail_soft(self):
        jobs = [(_square, i) for i in range(9)] + [(_boom, 0)]
        results = schedule(jobs, 2)
        assert sum(ok for ok, _ in results) == 9
        ok, err = results[-1]
        assert not ok and "boom" in str(err)

    @pytest.mark.skipif(os.cpu_count() < 4, reason="needs >= 4 CPUs for speedup")
    def test_parallel_speedup(self):
        jobs = [(_spin, 0.4) for _ in range(8)]
        t0 = time.perf_counter()
        schedule(jobs, 1)
        sequential = time.perf_counter() - t0
        t0 = time.perf_counter()
        schedule(jobs, 4)
        parallel = time.perf_counter() - t0
        assert sequential / parallel > 1.5


def _square(x):
    return x * x


def _boom(_):
    raise RuntimeError("boom")


def _spin(seconds):
    end = time.perf_counter() + seconds
    n = 0
    while time.perf_counter() < end:
        n += 1
    return n


class TestRunPipeline:
    def test_dry_run_counts(self, tmp_path):
        cfg = PipelineConfig.from_json(tiny_config(tmp_path))
        entries = run_pipeline(cfg, dry_run=True)
        assert len(entries) == 2
        assert all(e.error is None for e in entries)
        assert all(e.wav_hybrid is None for e in entries)

    def test_end_to_end_two_pairs(self, tmp_path):
        cfg = PipelineConfig.from_json(tiny_config(tmp_path))
        entries = run_pipeline(cfg)
        assert len(entries) == 2
        out = tmp_path / "out"
        wavs = sorted(p.name for p in out.glob("*.wav"))
        assert len(wavs) == 6
        manifest = read_manifest(out / "manifest.jsonl")
        assert len(manifest) == 2
        for e in manifest:
            assert e.error is None
            assert e.rt60 is None or e.rt60 > 0
            assert e.eta_combined is not None
            d = np.linalg.norm(np.asarray(e.source) - np.asarray(e.receiver))
            assert e.distance == pytest.approx(d, abs=1e-9)
            for tag in (e.wav_ga, e.wav_fdtd, e.wav_hybrid):
                assert (out / tag).exists()
        # calibration cache file sits next to the manifest
        assert list(out.glob("calibration_*.json"))

    def test_manifest_roundtrip(self, tmp_path):
        entry = ManifestEntry(
            scene="room",
            pair_index=3,
            source=[1.0, 1.0, 1.0],
            receiver=[2.0, 1.0, 1.0],
            distance=1.0,
            materials={"wall": "brick"},
        )
        path = tmp_path / "manifest.jsonl"
        write_manifest([entry], path)
        back = read_manifest(path)
        assert back == [entry]

    def test_distance_validation(self):
        with pytest.raises(PipelineError, match="distance"):
            ManifestEntry(
                scene="room",
                pair_index=0,
                source=[0.0, 0.0, 0.0],
                receiver=[1.0, 0.0, 0.0],
                distance=2.0,
            )
