import numpy as np
import pytest

from fvcoding.bench import CSV_HEADER, BenchRow, bench_resolution, rows_to_csv
from fvcoding.errors import ArgumentError


def _tiny_rows(seed=0):
    return bench_resolution(
        dims=[12], gmm_sizes=[4], dict_sizes=[4],
        n_train=300, n_test=60, true_m=8, true_sparsity=2,
        em_iters=6, dict_iters=3, dict_k=4, mp_k=4, seed=seed,
    )


class TestBenchResolution:
    def test_row_layout(self):
        rows = _tiny_rows()
        assert [r.model for r in rows] == ["gmm", "sc"]
        assert all(r.feature_dim == 12 and r.size == 4 for r in rows)
        assert all(np.isfinite(r.mean_distance) and r.mean_distance >= 0 for r in rows)

    def test_grouped_by_dimension_gmm_first(self):
        rows = bench_resolution(
            dims=[6, 10], gmm_sizes=[2, 3], dict_sizes=[2],
            n_train=150, n_test=40, true_m=5, true_sparsity=2,
            em_iters=4, dict_iters=2, dict_k=3, mp_k=3,
        )
        assert [(r.feature_dim, r.model) for r in rows] == [
            (6, "gmm"), (6, "gmm"), (6, "sc"),
            (10, "gmm"), (10, "gmm"), (10, "sc"),
        ]
        assert [r.size for r in rows[:2]] == [2, 3]

    def test_deterministic_for_fixed_seed(self):
        a = _tiny_rows(3)
        b = _tiny_rows(3)
        assert a == b

    def test_sparse_dictionary_resolves_better_than_same_size_mixture(self):
        # the gap criterion on real budgets lives in the acceptance suite;
        # this is a fast sanity check on a small instance
        rows = bench_resolution(
            dims=[40], gmm_sizes=[16], dict_sizes=[16],
            n_train=1500, n_test=150, true_m=24, true_sparsity=3,
            em_iters=8, dict_iters=5, dict_k=6, mp_k=6, seed=1,
        )
        by_model = {r.model: r.mean_distance for r in rows}
        assert by_model["sc"] < by_model["gmm"]

    def test_rejects_bad_sizes(self):
        with pytest.raises(ArgumentError):
            bench_resolution(dims=[4], gmm_sizes=[0], dict_sizes=[2])


class TestCsv:
    def test_header_and_full_precision(self):
        rows = [BenchRow(model="gmm", size=3, feature_dim=7, mean_distance=0.1)]
        text = rows_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == CSV_HEADER
        assert lines[1] == f"gmm,3,7,{format(0.1, '.17g')}"
        assert text.endswith("\n")
