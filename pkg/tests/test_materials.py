import collections
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roomir.materials import (
    EMBED_DIM,
    EmbeddingTable,
    MaterialError,
    MaterialRecord,
    ScatteringPrior,
    assignment_distribution,
    fallback_embed,
    load_embedding_table,
    load_material_db,
    sample_assignment,
    sample_scattering,
    save_embedding_table,
)


def make_materials(names):
    return [MaterialRecord(name=n, absorption=np.full(8, 0.1)) for n in names]


class TestMaterialDb:
    def test_load_valid(self, material_csv):
        records = load_material_db(material_csv)
        assert len(records) == 5
        assert records[0].name == "painted brick wall"
        assert records[1].absorption[4] == pytest.approx(0.6)

    def test_out_of_range_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "name,a63,a125,a250,a500,a1000,a2000,a4000,a8000\n"
            "ok,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1\n"
            "broken,0.1,0.1,0.1,1.2,0.1,0.1,0.1,0.1\n"
        )
        with pytest.raises(MaterialError, match=r"row 3.*a500"):
            load_material_db(path)

    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("name,a63,a125,a250,a500,a1000,a2000,a4000,a8000\n")
        with pytest.raises(MaterialError, match="no material rows"):
            load_material_db(path)

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("name,a63,a125\nx,0.1,0.1\n")
        with pytest.raises(MaterialError, match="header"):
            load_material_db(path)

    def test_scattering_columns(self, tmp_path):
        path = tmp_path / "scat.csv"
        path.write_text(
            "name,a63,a125,a250,a500,a1000,a2000,a4000,a8000,"
            "s63,s125,s250,s500,s1000,s2000,s4000,s8000\n"
            "diffusive,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,"
            "0.02,0.02,0.05,0.3,0.4,0.5,0.5,0.5\n"
        )
        records = load_material_db(path)
        assert records[0].scattering is not None
        assert records[0].scattering[5] == pytest.approx(0.5)


class TestFallbackEmbed:
    def test_deterministic(self):
        a = fallback_embed("wood")
        b = fallback_embed("wood")
        np.testing.assert_array_equal(a, b)
        assert np.linalg.norm(a) == pytest.approx(1.0)

    def test_empty_and_whitespace(self):
        np.testing.assert_array_equal(fallback_embed(""), np.zeros(EMBED_DIM))
        np.testing.assert_array_equal(fallback_embed("   "), np.zeros(EMBED_DIM))

    def test_semantic_ordering_vs_trigram_oracle(self):
        # independent oracle: exact trigram-count cosine without hashing
        def trigram_cosine(x, y):
            def grams(s):
                s = s.lower()
                return collections.Counter(s[i : i + 3] for i in range(len(s) - 2))

            gx, gy = grams(x), grams(y)
            dot = sum(gx[g] * gy[g] for g in gx)
            nx = math.sqrt(sum(v * v for v in gx.values()))
            ny = math.sqrt(sum(v * v for v in gy.values()))
            return dot / (nx * ny)

        oracle_close = trigram_cosine("wooden floor", "wood floor")
        oracle_far = trigram_cosine("wooden floor", "steel pipe")
        assert oracle_close > oracle_far

        e = fallback_embed("wooden floor")
        close = float(e @ fallback_embed("wood floor"))
        far = float(e @ fallback_embed("steel pipe"))
        assert close > far

    def test_case_insensitive(self):
        np.testing.assert_array_equal(
            fallback_embed("Heavy Carpet"), fallback_embed("heavy carpet")
        )

    @given(text=st.text(max_size=60))
    @settings(max_examples=80, deadline=None)
    def test_norm_is_zero_or_one(self, text):
        vec = fallback_embed(text)
        norm = np.linalg.norm(vec)
        assert norm == pytest.approx(1.0, abs=1e-12) or norm == 0.0
        np.testing.assert_array_equal(vec, fallback_embed(text))


class TestAssignmentDistribution:
    def test_single_material(self):
        dist = assignment_distribution("anything", make_materials(["only"]))
        np.testing.assert_allclose(dist.probabilities, [1.0])

    def test_orthogonal_label_uniform_fallback(self):
        dim = 8
        mats = make_materials(["a", "b", "c"])
        entries = {
            "label": np.eye(dim)[0],
            "a": np.eye(dim)[1],
            "b": np.eye(dim)[2],
            "c": np.eye(dim)[3],
        }
        table = EmbeddingTable(entries=entries, dimension=dim)
        dist = assignment_distribution("label", mats, table)
        np.testing.assert_allclose(dist.probabilities, np.full(3, 1 / 3))

    def test_hand_built_cosines(self):
        # cosines to the label: 0.9, 0.3, -0.5 -> weights (0.9, 0.3, 0)
        # -> probabilities (0.75, 0.25, 0)
        dim = 4
        label = np.array([1.0, 0.0, 0.0, 0.0])
        vecs = {
            "label": label,
            "m1": np.array([0.9, math.sqrt(1 - 0.81), 0.0, 0.0]),
            "m2": np.array([0.3, math.sqrt(1 - 0.09), 0.0, 0.0]),
            "m3": np.array([-0.5, math.sqrt(1 - 0.25), 0.0, 0.0]),
        }
        table = EmbeddingTable(entries=vecs, dimension=dim)
        dist = assignment_distribution("label", make_materials(["m1", "m2", "m3"]), table)
        np.testing.assert_allclose(dist.weights, [0.9, 0.3, 0.0], atol=1e-12)
        np.testing.assert_allclose(dist.probabilities, [0.75, 0.25, 0.0], atol=1e-12)

    def test_probabilities_sum_to_one(self):
        mats = make_materials(["carpet", "brick", "glass", "wood panel"])
        dist = assignment_distribution("wooden floor", mats)
        assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-12)

    def test_scaling_invariance(self):
        dim = 4
        base = {
            "label": np.array([1.0, 0.2, 0.0, 0.0]),
            "m1": np.array([0.8, 0.1, 0.0, 0.0]),
            "m2": np.array([0.1, 0.9, 0.3, 0.0]),
        }
        scaled = {k: 7.3 * v for k, v in base.items()}
        mats = make_materials(["m1", "m2"])
        p1 = assignment_distribution(
            "label", mats, EmbeddingTable(entries=base, dimension=dim)
        ).probabilities
        p2 = assignment_distribution(
            "label", mats, EmbeddingTable(entries=scaled, dimension=dim)
        ).probabilities
        np.testing.assert_allclose(p1, p2, atol=1e-12)

    def test_empty_material_list(self):
        with pytest.raises(MaterialError, match="empty"):
            assignment_distribution("label", [])

    @given(
        w=st.lists(
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
            min_size=2,
            max_size=6,
        ).filter(lambda ws: sum(ws[1:]) > 0.01)
    )
    @settings(max_examples=50, deadline=None)
    def test_monotonicity_property(self, w):
        # raising one weight (while another stays positive) strictly raises
        # its probability
        w = np.asarray(w)
        p_before = w / w.sum()
        bumped = w.copy()
        bumped[0] = bumped[0] + 0.5
        p_after = bumped / bumped.sum()
        assert p_after[0] > p_before[0]


class TestSampleAssignment:
    def test_certain_outcome(self):
        dist = assignment_distribution("x", make_materials(["only"]))
        for seed in (0, 1, 99):
            assert sample_assignment(dist, seed) == 0

    def test_reproducible(self):
        mats = make_materials(["a", "b", "c"])
        dist = assignment_distribution("abc", mats)
        assert sample_assignment(dist, 1234) == sample_assignment(dist, 1234)

    def test_empirical_frequencies(self):
        # P = (0.75, 0.25, 0): over 100k seeded draws the index-0 frequency
        # lands within +/-0.01 of 0.75 (Monte Carlo vs exact P)
        dim = 4
        vecs = {
            "label": np.array([1.0, 0.0, 0.0, 0.0]),
            "m1": np.array([0.9, math.sqrt(1 - 0.81), 0.0, 0.0]),
            "m2": np.array([0.3, math.sqrt(1 - 0.09), 0.0, 0.0]),
            "m3": np.array([-0.5, math.sqrt(1 - 0.25), 0.0, 0.0]),
        }
        table = EmbeddingTable(entries=vecs, dimension=dim)
        dist = assignment_distribution("label", make_materials(["m1", "m2", "m3"]), table)
        n = 100_000
        rng = np.random.default_rng(0)
        cdf = np.cumsum(dist.probabilities)
        draws = np.searchsorted(cdf, rng.random(n), side="right")
        counts = np.bincount(draws, minlength=3)
        assert counts[0] / n == pytest.approx(0.75, abs=0.01)
        assert counts[2] == 0
        # spot-check that sample_assignment agrees with the vector CDF draw
        assert sample_assignment(dist, 42) in (0, 1)

    def test_never_zero_probability(self):
        dim = 4
        vecs = {
            "label": np.array([1.0, 0.0, 0.0, 0.0]),
            "m1": np.array([1.0, 0.0, 0.0, 0.0]),
            "m2": np.array([0.0, 1.0, 0.0, 0.0]),
        }
        table = EmbeddingTable(entries=vecs, dimension=dim)
        dist = assignment_distribution("label", make_materials(["m1", "m2"]), table)
        for seed in range(200):
            idx = sample_assignment(dist, seed)
            assert dist.probabilities[idx] > 0


class TestScattering:
    def test_zero_std_returns_mean(self):
        prior = ScatteringPrior(mean=np.full(8, 0.4), std=np.zeros(8))
        s = sample_scattering(prior, 0)
        np.testing.assert_allclose(s[3:], 0.4)
        np.testing.assert_allclose(s[:3], 0.05)  # low-band cap

    def test_huge_std_clamped(self):
        prior = ScatteringPrior(mean=np.full(8, 0.5), std=np.full(8, 10.0))
        for seed in range(20):
            s = sample_scattering(prior, seed)
            assert np.all(s >= 0) and np.all(s <= 1)

    def test_low_band_cap(self):
        prior = ScatteringPrior(mean=np.full(8, 0.2), std=np.full(8, 0.05))
        for seed in range(50):
            s = sample_scattering(prior, seed)
            assert np.all(s[:3] <= 0.05)

    def test_reproducible(self):
        prior = ScatteringPrior.default()
        np.testing.assert_array_equal(
            sample_scattering(prior, 7), sample_scattering(prior, 7)
        )


class TestEmbeddingTable:
    def test_json_roundtrip(self, tmp_path):
        table = EmbeddingTable(
            entries={"wood": np.arange(4.0), "glass": np.ones(4)}, dimension=4
        )
        path = tmp_path / "emb.json"
        save_embedding_table(table, path)
        loaded = load_embedding_table(path)
        assert loaded.dimension == 4
        np.testing.assert_allclose(loaded.entries["wood"], np.arange(4.0))

    def test_dimension_mismatch(self):
        with pytest.raises(MaterialError, match="dimension"):
            EmbeddingTable(entries={"x": np.ones(3)}, dimension=4)

    def test_non_finite_rejected(self):
        with pytest.raises(MaterialError, match="non-finite"):
            EmbeddingTable(entries={"x": np.array([1.0, np.nan])}, dimension=2)
