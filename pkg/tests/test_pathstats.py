import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holdergp.covariance import CovarianceModel
from holdergp.errors import CapabilityError, InsufficientDataError, NumericalConsistencyError, ParameterError
from holdergp.pathstats import (
    MAX_FULL_PAIRS,
    exp_moment_estimate,
    exp_moment_series,
    gaussian_abs_moment,
    grr_constant_estimate,
    grr_xi,
    holder_constants,
    lemma1_bound,
    lemma1_check,
    moment_bound_constant,
    path_holder_constant,
    path_holder_exponent,
    write_constants_csv,
)
from holdergp.simulate import SamplePath, SimulationPlan, sample_paths, sample_values

# frozen oracles (mpmath, 40 digits)
GRR_LINEAR = 0.63894310424627247586  # (1/6)^(1/4)
SERIES_A01_K15 = 1.0959228802999305901  # 200-term partial sum, a=0.1, c=1, kappa=1.5
SERIES_A05_K2 = 1.7341744237254844751  # 200-term partial sum, a=0.5, c=1, kappa=2
GAUSS_MOMENTS = {0.5: 0.82217895866245855234, 3: 1.5957691216057307118, 7.5: 62.890424073105491024}

GRID = np.linspace(0.0, 1.0, 257)
values = st.lists(st.floats(-10, 10, allow_nan=False), min_size=8, max_size=8)


def linear(n=257):
    g = np.linspace(0, 1, n)
    return SamplePath(g, g.copy())


# ---------------------------------------------------------------------------
# path_holder_constant
# ---------------------------------------------------------------------------


def test_holder_constant_linear():
    assert path_holder_constant(linear(), 1.0).constant == pytest.approx(1.0, rel=1e-12)
    h = path_holder_constant(linear(), 0.5)
    assert h.constant == pytest.approx(1.0, rel=1e-12)
    assert abs(h.argmax_pair[0] - h.argmax_pair[1]) == pytest.approx(1.0)


def test_holder_constant_of_constant_path():
    h = path_holder_constant(SamplePath(GRID, np.full(GRID.size, 3.0)), 0.4)
    assert h.constant == 0.0 and h.argmax_pair is None


def test_holder_constant_preconditions():
    with pytest.raises(ParameterError):
        path_holder_constant(linear(), 0.0)
    with pytest.raises(ParameterError):
        path_holder_constant(linear(), 1.5)
    with pytest.raises(ParameterError):
        path_holder_constant(SamplePath([0.0], [1.0]), 0.5)


def test_holder_constant_restricted_above_cutoff():
    n = MAX_FULL_PAIRS + 1
    g = np.linspace(0, 1, n)
    p = SamplePath(g, np.sin(7 * g))
    h = path_holder_constant(p, 0.5)
    assert h.restricted
    full = path_holder_constant(p, 0.5, max_full=n)
    assert not full.restricted
    assert h.constant <= full.constant


@given(vals=values, lam=st.floats(0.01, 100.0), a=st.floats(0.05, 1.0))
def test_holder_constant_homogeneous(vals, lam, a):
    g = np.linspace(0, 1, 8)
    p = SamplePath(g, vals)
    c = path_holder_constant(p, a).constant
    assert path_holder_constant(p.scaled(lam), a).constant == pytest.approx(lam * c, rel=1e-12, abs=1e-300)
    assert c >= 0
    assert (c == 0) == bool(np.all(np.asarray(vals) == vals[0]))


@given(vals=values, a=st.floats(0.05, 0.9), b=st.floats(0.05, 0.9))
def test_holder_constant_monotone_in_order(vals, a, b):
    g = np.linspace(0, 1, 8)
    p = SamplePath(g, vals)
    lo, hi = sorted((a, b))
    assert path_holder_constant(p, lo).constant <= path_holder_constant(p, hi).constant * (1 + 1e-12)


def test_batched_constants_match_single():
    X, _ = sample_values(SimulationPlan(CovarianceModel.fbm(0.5), GRID, 5, 1, "circulant"))
    C, _, _ = holder_constants(GRID, X, 0.3)
    for i in range(5):
        assert C[i] == path_holder_constant(SamplePath(GRID, X[i]), 0.3).constant


# ---------------------------------------------------------------------------
# path_holder_exponent
# ---------------------------------------------------------------------------


def test_exponent_linear_and_sqrt():
    assert path_holder_exponent(linear()).exponent == pytest.approx(1.0, abs=1e-12)
    g = np.linspace(0, 1, 4097)
    assert path_holder_exponent(SamplePath(g, np.sqrt(g))).exponent == pytest.approx(0.5, abs=1e-12)
    lags = g[1] * np.array([1, 4, 16, 64, 256])
    assert path_holder_exponent(SamplePath(g, np.sqrt(g)), lags).exponent == pytest.approx(0.5, abs=1e-12)


def test_exponent_errors():
    with pytest.raises(InsufficientDataError):
        path_holder_exponent(SamplePath(GRID, np.ones(GRID.size)))
    with pytest.raises(CapabilityError):
        path_holder_exponent(SamplePath([0.0, 0.1, 0.5, 0.6, 1.0], [0, 1, 2, 3, 4]))
    with pytest.raises(ParameterError):
        path_holder_exponent(linear(), [0.0013])  # not a grid multiple


def test_exponent_fbm_monte_carlo():
    g = np.linspace(0, 1, 4096)
    paths = sample_paths(SimulationPlan(CovarianceModel.fbm(0.5), g, 64, 42, "circulant"))
    mean = np.mean([path_holder_exponent(p).exponent for p in paths])
    assert abs(mean - 0.5) < 0.05


# ---------------------------------------------------------------------------
# GRR functional
# ---------------------------------------------------------------------------


def test_grr_linear_closed_form():
    assert grr_xi(linear(1024), 0.5, 0.5) == pytest.approx(GRR_LINEAR, rel=0.02)


def test_grr_refinement_converges():
    errs = [abs(grr_xi(linear(n), 0.5, 0.5) - GRR_LINEAR) for n in (64, 256, 1024)]
    assert errs[0] > errs[1] > errs[2]


def test_grr_constant_and_homogeneity():
    assert grr_xi(SamplePath(GRID, np.full(GRID.size, 2.0)), 0.5, 0.5) == 0.0
    p = SamplePath(GRID, np.sin(5 * GRID))
    assert grr_xi(p.scaled(3.5), 0.5, 0.4) == pytest.approx(3.5 * grr_xi(p, 0.5, 0.4), rel=1e-10)


def test_grr_large_power_does_not_overflow():
    p = SamplePath(GRID, 50 * np.sin(5 * GRID))
    xi = grr_xi(p, 0.5, 0.02)  # power 2/eps = 100
    assert math.isfinite(xi) and xi > 0


def test_grr_preconditions():
    with pytest.raises(ParameterError):
        grr_xi(linear(), 0.5, 1.0)
    with pytest.raises(CapabilityError):
        grr_xi(SamplePath([0.0, 0.1, 0.5, 1.0], [0, 1, 2, 3]), 0.5, 0.5)


def test_grr_ratio_linear_pair():
    lin = linear(257)
    est = grr_constant_estimate([lin, lin], 0.5, 0.25)
    xi = grr_xi(lin, 0.5, 0.25)
    # C of order 1/4 is 1 for the identity on [0, 1]
    assert est.value == pytest.approx(1.0 / xi, rel=1e-12)
    assert est.details["rho"][0] == est.details["rho"][1]
    assert est.half_width == 0.0


def test_grr_ratio_batches_agree():
    paths = sample_paths(SimulationPlan(CovarianceModel.fbm(0.5), GRID, 100, 7, "circulant"))
    half = grr_constant_estimate(paths[:50], 0.5, 0.25)
    full = grr_constant_estimate(paths, 0.5, 0.25)
    assert np.isfinite(full.value)
    assert abs(full.value - half.value) / full.value < 0.30
    assert full.half_width >= 0 and full.n_samples == 100


def test_grr_pathwise_inequality_holds_by_construction():
    T = 1.0
    for eps in (0.2, 0.4):
        paths = sample_paths(SimulationPlan(CovarianceModel.fbm(0.5), GRID, 20, 3, "circulant"))
        rho = grr_constant_estimate(paths, 0.5, eps).value
        for p in paths:
            xi = grr_xi(p, 0.5, eps)
            i, j = np.triu_indices(GRID.size, 1)
            lhs = np.abs(p.values[j] - p.values[i])
            rhs = rho * T ** (0.5 - eps) * (GRID[j] - GRID[i]) ** (0.5 - eps) * xi
            assert np.all(lhs <= rhs * (1 + 1e-12))


def test_grr_estimate_preconditions(monkeypatch):
    with pytest.raises(ParameterError):
        grr_constant_estimate([linear()], 0.5, 0.25)
    with pytest.raises(ParameterError):
        grr_constant_estimate([linear(), SamplePath(np.linspace(0, 1, 257), np.zeros(257))], 0.5, 0.25)
    import holdergp.pathstats as ps

    monkeypatch.setattr(ps, "grr_xi_batch", lambda grid, values, H, eps: np.zeros(len(values)))
    with pytest.raises(NumericalConsistencyError):
        grr_constant_estimate([linear(), linear()], 0.5, 0.25)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def test_gaussian_moment_examples():
    assert gaussian_abs_moment(1, 2) == pytest.approx(1.0, rel=1e-14)
    assert gaussian_abs_moment(1, 1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)
    assert gaussian_abs_moment(1, 4) == pytest.approx(3.0, rel=1e-14)
    assert gaussian_abs_moment(0, 3) == 0.0
    for q, v in GAUSS_MOMENTS.items():
        assert gaussian_abs_moment(1, q) == pytest.approx(v, rel=1e-13)
    assert gaussian_abs_moment(2.0, 3) == pytest.approx(8 * GAUSS_MOMENTS[3], rel=1e-13)
    with pytest.raises(ParameterError):
        gaussian_abs_moment(1, 0)


@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_gaussian_moment_monte_carlo(q):
    from holdergp.simulate import standard_normals

    z = np.abs(standard_normals(2024, 10**5))
    x = z**q
    assert abs(x.mean() - gaussian_abs_moment(1, q)) < 3 * x.std(ddof=1) / math.sqrt(x.size)


def test_exp_moment_trivial():
    rng = np.random.default_rng(0)
    est = exp_moment_estimate(rng.uniform(0, 2, 200), 0.0, 1.5)
    assert est.value == 1.0 and est.half_width == 0.0
    est = exp_moment_estimate(np.zeros(150), 0.7, 2.0)
    assert est.value == 1.0 and est.half_width == 0.0


def test_exp_moment_preconditions_and_overflow():
    with pytest.raises(ParameterError):
        exp_moment_estimate(np.ones(99), 0.1, 1.0)
    with pytest.raises(ParameterError):
        exp_moment_estimate(np.ones(100), 0.1, 2.5)
    big = np.full(100, 30.0)
    est = exp_moment_estimate(big, 1.0, 2.0)
    assert est.details["overflow_count"] == 100 and est.details["unstable"]
    assert math.isinf(est.value)


def test_exp_moment_kappa_two_refusal():
    C = np.linspace(0, 1, 200)
    with pytest.raises(ParameterError):
        exp_moment_estimate(C, 0.3, 2.0, c_fit=2.0)  # a_max = 0.25
    assert exp_moment_estimate(C, 0.2, 2.0, c_fit=2.0).value > 1


def test_exp_moment_stable_for_fbm_constants():
    X, _ = sample_values(SimulationPlan(CovarianceModel.fbm(0.5), GRID, 4000, 42, "circulant"))
    C, _, _ = holder_constants(GRID, X, 0.3)
    est = exp_moment_estimate(C, 0.1, 1.5)
    assert math.isfinite(est.value) and est.stability < 0.05
    assert est.half_width >= 0 and est.n_samples == 4000
    # series-estimate coherence with the fitted moment constant
    c_fit = moment_bound_constant(C)
    assert exp_moment_series(0.1, c_fit, 1.5).verdict == "converged"


def test_series_examples():
    r = exp_moment_series(0.0, 3.0, 1.5)
    assert r.verdict == "converged" and np.all(r.partial_sums == 1.0)
    r = exp_moment_series(0.1, 1.0, 1.5, J=200)
    assert r.verdict == "converged"
    assert r.partial_sums[-1] == pytest.approx(SERIES_A01_K15, rel=1e-13)
    assert exp_moment_series(10.0, 1.0, 2.0, J=200).verdict == "diverged"


def test_series_kappa_two_threshold():
    # terms behave like (a c^2)^j j^(-1/2): converges below a c^2 = 1
    r = exp_moment_series(0.5, 1.0, 2.0)
    assert r.verdict == "converged"
    assert r.partial_sums[-1] == pytest.approx(SERIES_A05_K2, rel=1e-12)
    assert exp_moment_series(1.2, 1.0, 2.0).verdict == "diverged"
    assert exp_moment_series(0.3, 2.0, 2.0).verdict == "diverged"


def test_series_no_overflow():
    r = exp_moment_series(5.0, 2.0, 2.0, J=2000)
    assert np.all(np.isfinite(r.log_terms))
    with pytest.raises(ParameterError):
        exp_moment_series(0.1, 1.0, 1.5, J=1)


def test_moment_bound_constant():
    # constant samples: smallest c with 2^p <= c^p Gamma((p+1)/2) for p = 1..8
    expected = max(2.0 / math.gamma((p + 1) / 2) ** (1 / p) for p in range(1, 9))
    assert moment_bound_constant(np.full(10, 2.0)) == pytest.approx(expected, rel=1e-12)
    C = np.random.default_rng(1).uniform(0, 3, 500)
    c = moment_bound_constant(C)
    for p in range(1, 9):
        assert np.mean(C**p) <= c**p * math.gamma((p + 1) / 2) * (1 + 1e-12)


# ---------------------------------------------------------------------------
# variance bound
# ---------------------------------------------------------------------------


def test_lemma1_bound_examples():
    assert lemma1_bound(1, 1) == pytest.approx(2 / math.pi, rel=1e-15)
    assert lemma1_bound(2, 1) == pytest.approx(8 / math.pi, rel=1e-15)
    assert lemma1_bound(1, 0.5) == pytest.approx(8 / math.pi, rel=1e-15)
    with pytest.raises(ParameterError):
        lemma1_bound(1, 0)
    with pytest.raises(ParameterError):
        lemma1_bound(0, 0.5)


def test_lemma1_check_small():
    g = np.linspace(0, 1, 16)
    X, _ = sample_values(SimulationPlan(CovarianceModel.fbm(0.5), g, 2000, 5, "circulant"))
    rows = lemma1_check(g, X, 0.5, 0.1)
    assert [r.x for r in rows] == [1.0, 2.0, 4.0]
    assert all(r.holds for r in rows)


def test_constants_csv(tmp_path):
    dest = tmp_path / "constants.csv"
    write_constants_csv([1.5, 2.25], dest)
    assert dest.read_text().splitlines() == ["path_index,C", "0,1.5", "1,2.25"]
