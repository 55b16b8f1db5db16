import numpy as np
import pytest

from wavefuse import _pykernels, kernels

from conftest import _ckernels


def brute_min_sq(points, centers):
    out = np.full(len(points), np.inf)
    for i, p in enumerate(points):
        for c in centers:
            out[i] = min(out[i], float(np.sum((p - c) ** 2)))
    return out


def test_backend_reported():
    assert kernels.BACKEND in ("python", "cython")


def test_min_sq_dists_matches_brute_force(backend, rng):
    pts = rng.normal(size=(40, 5))
    ctr = rng.normal(size=(7, 5))
    np.testing.assert_allclose(backend.min_sq_dists(pts, ctr), brute_min_sq(pts, ctr), rtol=1e-13)


def test_min_sq_dists_no_centers_is_inf(backend):
    pts = np.zeros((3, 2))
    assert np.all(np.isinf(backend.min_sq_dists(pts, np.empty((0, 2)))))


def test_update_lowers_in_place(backend, rng):
    pts = rng.normal(size=(20, 3))
    mind = np.full(20, np.inf)
    backend.update_min_sq_dists(pts, 4, mind)
    assert mind[4] == 0.0
    np.testing.assert_allclose(mind, brute_min_sq(pts, pts[[4]]), rtol=1e-13)


def test_farthest_first_first_pick_without_centers(backend, rng):
    pts = rng.normal(size=(10, 2))
    picks = backend.farthest_first(pts, np.full(10, np.inf), 3)
    assert picks[0] == 0
    assert len(set(picks.tolist())) == 3


def test_farthest_first_never_repeats_on_duplicates(backend):
    pts = np.zeros((5, 2))
    picks = backend.farthest_first(pts, np.zeros(5), 5)
    assert sorted(picks.tolist()) == [0, 1, 2, 3, 4]


@pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")
def test_backends_agree_bitwise(rng):
    pts = rng.normal(size=(300, 16))
    ctr = rng.normal(size=(25, 16))
    a = _pykernels.min_sq_dists(pts, ctr)
    b = _ckernels.min_sq_dists(pts, ctr)
    np.testing.assert_array_equal(a, b)
    ma, mb = a.copy(), b.copy()
    pa = _pykernels.farthest_first(pts, ma, 40)
    pb = _ckernels.farthest_first(pts, mb, 40)
    np.testing.assert_array_equal(pa, pb)
    np.testing.assert_array_equal(ma, mb)


def test_benchmark_script_runs(capsys):
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    bench.main(["--n", "50", "--d", "3", "--centers", "4", "--b", "5", "--repeat", "1"])
    out = capsys.readouterr().out
    assert "farthest_first" in out and "False" not in out
