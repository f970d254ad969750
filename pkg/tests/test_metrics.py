import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convmix.metrics import (
    compare_datasets,
    dataset_stats,
    duration_samples,
    emd_1d,
    format_report,
    overlap_ratio,
    silence_ratio,
    similarity_from_emd,
    similarity_score,
)
from convmix.simulator import simulate_plan
from convmix.timeline import Annotation, TimedSegment, annotation_from_plan, callhome1_params

from oracles import emd_by_assignment, random_grid_annotation, rasterized_ratios


def ann(*segs, extent=None):
    return Annotation.from_segments("r", [TimedSegment(a, b - a, s) for s, a, b in segs], extent)


class TestRatios:
    def test_silence_gap(self):
        assert silence_ratio(ann(("A", 0, 2), ("B", 3, 5))) == pytest.approx(0.2)

    def test_silence_full(self):
        assert silence_ratio(ann(("A", 0, 5))) == 0.0

    def test_overlap(self):
        assert overlap_ratio(ann(("A", 0, 4), ("B", 2, 6))) == pytest.approx(1 / 3)

    def test_disjoint(self):
        assert overlap_ratio(ann(("A", 0, 2), ("B", 3, 5))) == 0.0

    def test_errors(self):
        with pytest.raises(ValueError, match="zero extent"):
            silence_ratio(Annotation("r", (), 0.0))
        with pytest.raises(ValueError, match="no speech"):
            overlap_ratio(Annotation("r", (), 5.0))

    def test_against_rasterization(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = random_grid_annotation(rng)
            sil, ovl = rasterized_ratios(a)
            assert silence_ratio(a) == pytest.approx(sil, abs=1e-9)
            assert overlap_ratio(a) == pytest.approx(ovl, abs=1e-9)


class TestDurationSamples:
    def test_silence(self):
        assert duration_samples(ann(("A", 0, 2), ("B", 3, 5))) == ([1.0], [])

    def test_overlap(self):
        assert duration_samples(ann(("A", 0, 4), ("B", 2, 6))) == ([], [2.0])

    def test_edges_excluded(self):
        assert duration_samples(ann(("A", 1, 2), ("A", 3, 4), extent=9)) == ([1.0], [])

    def test_adjacent_overlap_regions_merge(self):
        # 2 speakers then 3 then 2 is one overlap region
        s, o = duration_samples(ann(("A", 0, 6), ("B", 1, 5), ("C", 2, 3)))
        assert s == [] and o == [pytest.approx(4.0)]


class TestEmd:
    def test_identical(self):
        assert emd_1d([1, 2, 3], [3, 2, 1]) == 0.0

    def test_single_point(self):
        assert emd_1d([0], [1]) == 1.0

    def test_empty(self):
        with pytest.raises(ValueError, match="no samples"):
            emd_1d([], [1.0])

    def test_20_vs_30(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            u, v = rng.exponential(1.0, 20), rng.exponential(1.5, 30)
            assert emd_1d(u, v) == pytest.approx(emd_by_assignment(u, v), abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12),
           st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12),
           st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12))
    def test_metric_properties(self, u, v, w):
        d_uv = emd_1d(u, v)
        assert d_uv >= 0
        assert d_uv == pytest.approx(emd_1d(v, u), abs=1e-9)
        assert d_uv <= emd_1d(u, w) + emd_1d(w, v) + 1e-9

    def test_shift(self):
        u = np.array([0.1, 0.5, 2.0])
        assert emd_1d(u, u + 0.25) == pytest.approx(0.25)


class TestSimilarity:
    def test_zero(self):
        assert similarity_from_emd(0.0) == 1.0

    def test_one_over_e(self):
        assert similarity_from_emd(1000.0, 0.001) == pytest.approx(math.exp(-1))
        assert similarity_from_emd(1000.0, 0.001) == pytest.approx(0.3679, abs=5e-5)

    def test_in_milliseconds(self):
        assert similarity_score([0.0], [1.0]) == pytest.approx(math.exp(-1))

    def test_self(self):
        u = np.random.default_rng(2).exponential(1.0, 100)
        assert similarity_score(u, u) == 1.0


def _dataset(pool, seed0, n=60):
    params = callhome1_params()
    return dataset_stats(annotation_from_plan(simulate_plan(pool, params, seed0 + i))
                         for i in range(n))


class TestCompare:
    def test_self(self, pool):
        a = _dataset(pool, 0)
        r = compare_datasets(a, a)
        assert r["silence_similarity"] == 1.0 and r["overlap_similarity"] == 1.0
        assert f"{r['silence_similarity']:.3f}" == "1.000"
        assert r["silence_ratio_delta"] == 0.0

    def test_two_seeds(self, pool):
        r = compare_datasets(_dataset(pool, 0), _dataset(pool, 10_000))
        assert r["silence_similarity"] >= 0.95
        assert r["overlap_similarity"] >= 0.95

    def test_empty_side_undefined(self, pool):
        a = _dataset(pool, 0, 5)
        b = dataset_stats([ann(("A", 0, 2), ("A", 3, 5))])  # no overlaps at all
        r = compare_datasets(a, b)
        assert r["overlap_similarity"] is None
        assert r["silence_similarity"] is not None
        assert "n/a" in format_report(r)

    def test_pooled_ratios(self):
        s = dataset_stats([ann(("A", 0, 2), ("B", 3, 5)), ann(("A", 0, 4), ("B", 2, 6))])
        assert s.silence_ratio == pytest.approx(1 / 11)
        assert s.overlap_ratio == pytest.approx(2 / 10)
        assert s.n_recordings == 2
