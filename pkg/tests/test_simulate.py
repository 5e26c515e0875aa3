import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from holdergp.covariance import CovarianceModel, fractional_kernel, gram_matrix
from holdergp.errors import CapabilityError, NotPositiveDefiniteError, ParameterError
from holdergp.simulate import (
    JitterPolicy,
    SamplePath,
    SimulationPlan,
    circulant_eigenvalues,
    circulant_embed_sample,
    cholesky_factor,
    fgn_autocovariance,
    read_paths_csv,
    sample_paths,
    sample_values,
    standard_normals,
    stream,
    write_paths_csv,
)


def cov_z(values, target):
    """Entrywise z-scores of the empirical second moments against ``target``."""
    N = values.shape[0]
    emp = values.T @ values / N
    d = np.sqrt(np.diag(target))
    se = np.sqrt((np.outer(d, d) ** 2 + target**2) / N)
    return np.abs(emp - target) / se


# ---------------------------------------------------------------------------
# factorization
# ---------------------------------------------------------------------------


def test_cholesky_examples():
    L, d = cholesky_factor(np.eye(3))
    np.testing.assert_array_equal(L, np.eye(3))
    assert d == 0.0
    L, d = cholesky_factor([[4.0, 2.0], [2.0, 5.0]])
    np.testing.assert_allclose(L, [[2, 0], [1, 2]], atol=1e-15)
    assert d == 0.0
    L, d = cholesky_factor([[1.0, 1.0], [1.0, 1.0]])
    assert d > 0
    np.testing.assert_allclose(L @ L.T, np.ones((2, 2)) + d * np.eye(2), atol=1e-15)


def test_cholesky_failure_and_validation():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_factor([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ParameterError):
        cholesky_factor([[1.0, 0.5], [0.0, 1.0]])
    assert list(JitterPolicy().ladder()) == pytest.approx([0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6])


@pytest.mark.parametrize("model", [CovarianceModel.fbm(0.7), CovarianceModel.fbm(0.2), CovarianceModel.ou(1.0, 2.0)], ids=str)
def test_reconstruction_at_512(model):
    grid = np.linspace(1 / 512, 1.0, 512)
    G = gram_matrix(model, grid)
    L, d = cholesky_factor(G)
    err = np.max(np.abs(L @ L.T - (G + d * np.eye(512))))
    assert err <= 1e-10 * np.max(np.abs(G))


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def test_standard_normals_examples():
    assert standard_normals(7, 0).size == 0
    z = standard_normals(123, 10**6)
    assert abs(z.mean()) < 0.005
    assert abs(z.var() - 1) < 0.01
    np.testing.assert_array_equal(standard_normals(5, 100), standard_normals(5, 100))
    assert not np.array_equal(standard_normals(5, 100, 0), standard_normals(5, 100, 1))
    with pytest.raises(ParameterError):
        standard_normals(1, -1)


@given(seed=st.integers(0, 2**64 - 1), index=st.integers(0, 10**6))
def test_streams_are_deterministic(seed, index):
    a = stream(seed, index).standard_normal(4)
    b = stream(seed, index).standard_normal(4)
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------------------
# plans and paths
# ---------------------------------------------------------------------------


def test_plan_validation():
    m = CovarianceModel.bm()
    with pytest.raises(ParameterError):
        SimulationPlan(m, [0.5, 1.0], n_paths=0)
    with pytest.raises(ParameterError):
        SimulationPlan(m, [0.5, 0.2])
    with pytest.raises(ParameterError):
        SimulationPlan(m, [0.5], method="fancy")
    with pytest.raises(ParameterError):
        SamplePath([0.0, 1.0], [0.0])


def test_bm_single_point_variance():
    vals, _ = sample_values(SimulationPlan(CovarianceModel.bm(), [1.0], n_paths=10**5, seed=3))
    assert vals.shape == (10**5, 1)
    assert abs(vals.var() - 1.0) < 0.02


@pytest.mark.parametrize("method", ["cholesky", "circulant"])
def test_fbm_half_matches_brownian_covariance(method):
    grid = np.linspace(1 / 16, 1.0, 16)
    vals, _ = sample_values(SimulationPlan(CovarianceModel.fbm(0.5), grid, 10**4, 11, method))
    target = np.minimum.outer(grid, grid)
    assert cov_z(vals, target).max() < 5


def test_circulant_endpoint_variance():
    grid = np.linspace(0, 1, 2**12 + 1)
    vals, _ = sample_values(SimulationPlan(CovarianceModel.fbm(0.7), grid, 10**4, 4, "circulant"))
    x1 = vals[:, -1]
    se = np.sqrt(2.0 / x1.size)
    assert abs(np.mean(x1**2) - 1.0) < 3 * se


def test_circulant_and_cholesky_agree_in_distribution():
    grid = np.linspace(0, 1, 33)
    a, _ = sample_values(SimulationPlan(CovarianceModel.fbm(0.5), grid, 5000, 1, "circulant"))
    b, _ = sample_values(SimulationPlan(CovarianceModel.bm(), grid[1:], 5000, 2, "cholesky"))
    assert stats.ks_2samp(a[:, -1], b[:, -1]).pvalue > 0.01


def test_circulant_eigenvalues():
    lam, clipped = circulant_eigenvalues(0.5, 16, 1 / 16)
    np.testing.assert_allclose(lam, 1 / 16, rtol=1e-12)
    assert clipped == 0.0
    for H in (0.1, 0.4, 0.9):
        lam, _ = circulant_eigenvalues(H, 1024, 1 / 1024)
        assert lam.min() >= 0
    np.testing.assert_allclose(fgn_autocovariance(0.5, 3, 1.0), [1, 0, 0, 0], atol=1e-15)


def test_circulant_capabilities():
    with pytest.raises(CapabilityError):
        circulant_embed_sample(CovarianceModel.fbm(0.5), [0.0, 0.1, 0.3], 1, 0)
    with pytest.raises(CapabilityError):
        circulant_embed_sample(CovarianceModel.ou(1.0, 1.0), [0.0, 0.5, 1.0], 1, 0)
    paths = circulant_embed_sample(CovarianceModel.fbm(0.3), np.linspace(0.25, 1.0, 4), 2, 0)
    assert len(paths) == 2 and paths[0].values.size == 4


def test_modulated_paths_are_f_times_fbm():
    m = CovarianceModel.modulated_fbm(0.5)
    grid = np.linspace(0, m.horizon, 9)
    X, _ = sample_values(SimulationPlan(m, grid, 3, 8, "circulant"))
    B, _ = sample_values(SimulationPlan(CovarianceModel.fbm(0.5, horizon=m.horizon), grid, 3, 8, "circulant"))
    np.testing.assert_allclose(X, B * m.modulation(grid), rtol=0, atol=0)


def test_volterra_model_sampling():
    m = CovarianceModel.volterra(fractional_kernel(0.3))
    grid = np.linspace(0.1, 1.0, 10)
    vals, info = sample_values(SimulationPlan(m, grid, 4000, 9))
    assert cov_z(vals, gram_matrix(m, grid)).max() < 5
    assert info["jitter"] >= 0


def test_thread_invariance_and_meta():
    plan = SimulationPlan(CovarianceModel.fbm(0.7), np.linspace(0, 1, 65), 600, 21, "circulant")
    a = sample_paths(plan, threads=1)
    b = sample_paths(plan, threads=4)
    for p, q in zip(a, b):
        np.testing.assert_array_equal(p.values, q.values)
    assert a[5].meta["path_index"] == 5
    assert a[0].meta["seed"] == 21 and a[0].meta["method"] == "circulant"
    # path i does not depend on how many paths are drawn
    c = sample_paths(SimulationPlan(plan.model, plan.grid, 6, 21, "circulant"))
    np.testing.assert_array_equal(c[5].values, a[5].values)


def test_scaled_path():
    p = SamplePath([0.0, 1.0], [0.0, 2.0], {"seed": 1})
    q = p.scaled(3.0)
    np.testing.assert_array_equal(q.values, [0.0, 6.0])


def test_csv_round_trip(tmp_path):
    paths = sample_paths(SimulationPlan(CovarianceModel.fbm(0.4), np.linspace(0.1, 1, 7), 3, 5))
    dest = tmp_path / "paths.csv"
    write_paths_csv(paths, dest)
    assert dest.read_text().splitlines()[0] == "t,p0,p1,p2"
    back = read_paths_csv(dest)
    for p, q in zip(paths, back):
        np.testing.assert_array_equal(p.values, q.values)
        np.testing.assert_array_equal(p.grid, q.grid)
