import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sgldscale import functionals as fn
from sgldscale.functionals import PathFunctional, evaluate, g1, g2
from sgldscale.ou import OuGenerator, OuParams
from sgldscale.sgld import PathEnsemble, make_ensemble

paths = arrays(np.float64, st.integers(2, 30), elements=st.floats(-100, 100))


def ens(values, label="x"):
    values = np.atleast_2d(values)
    return PathEnsemble(values, values.shape[1] - 1, 1.0, label, 0)


def var_avg_oracle(B, A):
    """Closed form of Var(int_0^1 Z_t dt) for OU started at 0."""
    if B < 1e-6:  # the closed form cancels; the correction is O(B)
        return A / 3
    e = math.exp(-B)
    return A / (2 * B) * (2 * (B - 1 + e) / B**2 - ((1 - e) / B) ** 2)


def test_evaluate_examples():
    assert evaluate(g1(), np.zeros(5)) == 0.0 and evaluate(g2(), np.zeros(5)) == 0.0
    assert evaluate(g1(), np.full(9, 1.5)) == 1.5
    assert evaluate(g2(), np.full(9, 1.5)) == 2.25
    a, b = 0.4, -1.8
    assert evaluate(g1(), [0.0, a, b]) == pytest.approx((a + b) / 2, rel=1e-15)


def test_norm_bounds_and_certification():
    assert g1().m_norm_bound == 1.53 and g2().m_norm_bound == 3.53
    assert g1().scaled(2).m_norm_bound == 3.06
    assert PathFunctional("clipped_sup", c=1).bw_certified
    assert not PathFunctional("clipped_sup", c=2).bw_certified
    assert PathFunctional("clipped_sup", c=2, scale=0.5).bw_certified
    assert not g1().bw_certified
    with pytest.raises(ValueError):
        PathFunctional("eval_clip", t=1.5)


@given(paths, st.floats(-5, 5), st.floats(-5, 5))
def test_g1_linear_and_g2_square(x, a, b):
    y = np.roll(x, 1)
    lhs = evaluate(g1(), a * x + b * y)
    rhs = a * evaluate(g1(), x) + b * evaluate(g1(), y)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)
    assert evaluate(g2(), x) == evaluate(g1(), x) ** 2


@given(paths, st.floats(0.1, 5), st.floats(0, 1))
def test_clipped_functionals_bounded_and_lipschitz(x, c, t):
    y = x + np.linspace(-1, 1, x.size)
    for g in (PathFunctional("clipped_sup", c), PathFunctional("eval_clip", c, t), PathFunctional("clipped_average", c)):
        assert abs(evaluate(g, x)) <= c
        assert abs(evaluate(g, x) - evaluate(g, y)) <= np.max(np.abs(x - y)) + 1e-12


def test_eval_clip_reads_step_value():
    path = np.array([0.0, 0.2, 0.9, -3.0])
    assert evaluate(PathFunctional("eval_clip", 1.0, 0.5), path) == 0.2
    assert evaluate(PathFunctional("eval_clip", 1.0, 2 / 3), path) == 0.9
    assert evaluate(PathFunctional("eval_clip", 1.0, 1.0), path) == -1.0


def test_functional_gap_properties():
    g = np.random.default_rng(0)
    a = ens(g.normal(size=(10_000, 9)))
    assert fn.functional_gap(a, a, g2()).value == 0.0
    b = ens(g.normal(size=(10_000, 9)))
    est = fn.functional_gap(a, b, g1())
    assert est.value <= 4 * est.stderr
    assert fn.functional_gap(a, b, g2()).value == fn.functional_gap(a, b, g2().scaled(2.0)).value
    with pytest.raises(fn.GridMismatchError):
        fn.functional_gap(a, ens(np.zeros((3, 5))), g1())


def test_ou_average_variance_oracle():
    for B, A in [(1.0, 2.0), (0.2, 0.7), (5.0, 1.0), (0.0, 3.0), (1e-10, 3.0)]:
        p = OuParams(B, A)
        lo, hi = fn.ou_average_variance(p, 2**9), fn.ou_average_variance(p, 2**10)
        assert abs(lo - hi) <= 1e-8 * hi
        assert hi == pytest.approx(var_avg_oracle(B, A), rel=1e-8)
    assert fn.ou_average_variance(OuParams(1.0, 0.0)) == 0.0


def test_variance_gap_report():
    p = OuParams(1.0, 2.0)
    ensZ = make_ensemble(OuGenerator(p, 64, 3), 20_000)
    vg = fn.variance_gap(ensZ, p, eps=0.1)
    t = np.arange(1, 65) / 64
    discrete = fn.ou_covariance(p, t[:, None], t[None, :]).sum() / 64**2
    assert abs(vg.var_y - discrete) <= 4 * vg.var_y_stderr
    assert vg.rhs_bound == pytest.approx((1.53 * abs(vg.mean_y) + 3.53) * 0.1)
    with pytest.raises(ValueError):
        fn.variance_gap(ens(np.zeros((1, 3))), p)


def test_lp_surrogate_identical_and_shifted():
    g = np.random.default_rng(1)
    grid = np.round(np.arange(1, 51) * 0.01, 10)
    a = ens(1e-3 * g.normal(size=(300, 6)))
    assert fn.levy_prokhorov_estimate(a, a, grid).value == grid[0]
    c = 0.3
    est = fn.levy_prokhorov_estimate(a, ens(a.values + c), grid)
    assert abs(est.value - c) <= est.resolution + 1e-12 and not est.censored
    far = fn.levy_prokhorov_estimate(a, ens(a.values + 5.0), grid)
    assert far.censored and far.value == grid[-1]
    with pytest.raises(ValueError):
        fn.levy_prokhorov_estimate(a, a, [0.2, 0.1])


@given(st.integers(0, 2**32), st.floats(-3, 3))
def test_bw_lower_bound_properties(seed, shift):
    g = np.random.default_rng(seed)
    a = ens(g.normal(size=(50, 5)))
    b = ens(g.normal(size=(50, 5)) + shift)
    d = fn.parse_dictionary("clipsup:1, evalclip:0.5:1, clipavg:1")
    assert fn.bounded_wasserstein_lower(a, a, d).value == 0.0
    assert 0.0 <= fn.bounded_wasserstein_lower(a, b, d).value <= 2.0


def test_bw_rejects_uncertified():
    a = ens(np.zeros((3, 4)))
    with pytest.raises(fn.UncertifiedFunctionalError):
        fn.bounded_wasserstein_lower(a, a, [g1()])
    with pytest.raises(ValueError):
        fn.parse_dictionary("clipsup")


def brownian(mu, R, alpha, seed):
    g = np.random.default_rng(seed)
    inc = g.normal(scale=math.sqrt(1 / alpha), size=(R, alpha)) + mu / alpha
    return ens(np.hstack([np.zeros((R, 1)), np.cumsum(inc, axis=1)]))


def test_bw_separates_drifted_brownian_motion_monotonically():
    d = fn.parse_dictionary("evalclip:1:1, clipavg:1")
    base = brownian(0.0, 20_000, 32, 0)
    ests = [fn.bounded_wasserstein_lower(base, brownian(mu, 20_000, 32, 1 + i), d) for i, mu in enumerate((0.5, 1, 2))]
    for lo, hi in zip(ests, ests[1:]):
        assert hi.value - lo.value > 2 * math.hypot(lo.stderr, hi.stderr)


def test_distance_csv_row():
    est = fn.DistanceEstimate(0.5, None, 10, "lp_surrogate", 0.01, False)
    assert est.csv_row("A", "B") == ["lp_surrogate", 0.5, 0.01, 10, "A", "B"]
