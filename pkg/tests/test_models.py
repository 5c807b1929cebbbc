import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.optimize import brentq
from scipy.special import expit

from sgldscale import models
from sgldscale.models import Family, GlmModel, ModelConstants, model_constants

reals = st.floats(-3, 3, allow_nan=False)


def test_gradient_examples():
    lin = GlmModel("linear", np.array([1.0]), np.array([2.0]))
    assert models.gradient(lin, 0, 0.5) == pytest.approx(1.5, abs=1e-15)
    log = GlmModel("logistic", np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    for th in (-3.0, 0.0, 7.0):
        assert models.gradient(log, 0, th) == 0.0
    poi = GlmModel("poisson", np.array([1.0]), np.array([1.0]), theta_domain=(-1, 1))
    assert models.gradient(poi, 0, 0.0) == 0.0


def test_vectorized_gradients_match_scalar(logistic_small):
    model, _ = logistic_small
    idx = np.array([[0, 3], [4, 4]])
    th = np.array([0.3, -1.2])[:, None]
    got = models.gradients(model, idx, th)
    for r in range(2):
        for c in range(2):
            assert got[r, c] == pytest.approx(models.gradient(model, idx[r, c], th[r, 0]), rel=1e-14)


def test_linearized_gradient_examples(logistic_small):
    model, const = logistic_small
    for i in range(model.n):
        assert models.linearized_gradient(const, i, const.theta_hat) == const.psi[i]
    c = ModelConstants.from_arrays(psi=[1.0], sigma=[2.0], theta_hat=0.0)
    assert models.linearized_gradient(c, 0, 0.25) == 0.5


def test_fit_examples():
    assert models.fit_critical_point(GlmModel("linear", np.ones(2), np.array([1.0, 3.0]))) == pytest.approx(2.0)
    c = 1.7
    m = GlmModel("linear", np.array([1.0, -1.0]), np.array([c, -c]))
    assert models.fit_critical_point(m) == pytest.approx(c, abs=1e-12)
    log = GlmModel("logistic", np.ones(4), np.array([0, 1, 0, 1.0]))
    assert abs(models.fit_critical_point(log)) <= 1e-12


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=12), st.integers(0, 2**32 - 1))
def test_fit_matches_bisection_oracle(xs, seed):
    x = np.array(xs)
    x[np.abs(x) < 0.1] = 0.0  # near-zero covariates make the root arbitrarily ill-conditioned
    assume(np.sum(x != 0) >= 2)
    y = np.random.default_rng(seed).integers(0, 2, x.size).astype(float)
    model = GlmModel("logistic", x, y, 0.1)

    def S(t):
        return float(np.sum((y - expit(t * x + 0.1)) * x))

    # existence oracle: a finite root needs both responses among x > 0 and among x < 0
    pos, neg = x > 0, x < 0
    separated_up = np.all(y[pos] == 1) and np.all(y[neg] == 0)
    separated_down = np.all(y[pos] == 0) and np.all(y[neg] == 1)
    s0 = S(0.0)
    if (s0 > 0 and separated_up) or (s0 < 0 and separated_down):
        with pytest.raises(models.NoCriticalPointError):
            models.fit_critical_point(model)
        return
    lo, hi = -1.0, 1.0
    while not (S(lo) > 0 > S(hi)) and hi < 2**20:
        lo, hi = 2 * lo, 2 * hi
    oracle = brentq(S, lo, hi, xtol=1e-14)
    assert models.fit_critical_point(model) == pytest.approx(oracle, abs=1e-8)


def test_separated_logistic_has_no_critical_point():
    model = GlmModel("logistic", np.array([3.0, -1.0]), np.array([1.0, 0.0]))
    with pytest.raises(models.NoCriticalPointError):
        models.fit_critical_point(model)


def test_model_constant_examples():
    lin = GlmModel("linear", np.array([1.0, 2.0, -0.5]), np.array([0.3, -1.0, 2.0]))
    assert model_constants(lin).C_R == 0.0
    log = GlmModel("logistic", np.array([3.0, -1.0]), np.array([1.0, 1.0]))
    assert model_constants(log).C_R == pytest.approx(1 / 3, rel=1e-15)
    perfect = GlmModel("linear", np.array([1.0, 2.0, -3.0]), np.array([2.0, 4.0, -6.0]))
    c = model_constants(perfect)
    assert c.Omega == pytest.approx(0.0, abs=1e-28)
    assert c.theta_hat == pytest.approx(2.0)


def test_validation():
    with pytest.raises(models.ModelError):
        GlmModel("logistic", np.ones(2), np.array([0.0, 2.0]))
    with pytest.raises(models.ModelError):
        GlmModel("poisson", np.ones(2), np.array([0.0, 2.0]))  # no domain
    with pytest.raises(models.ModelError):
        GlmModel("poisson", np.ones(2), np.array([0.0, 1.5]), theta_domain=(0, 1))
    with pytest.raises(models.ModelError):
        GlmModel("linear", np.ones(2), np.ones(3))
    with pytest.raises(ValueError):
        GlmModel("probit", np.ones(2), np.ones(2))


@st.composite
def glm_models(draw, max_abs_x=2.0):
    fam = draw(st.sampled_from(list(Family)))
    n = draw(st.integers(2, 20))
    seed = draw(st.integers(0, 2**32 - 1))
    g = np.random.default_rng(seed)
    x = g.uniform(-max_abs_x, max_abs_x, n)
    b0 = draw(st.floats(-0.5, 0.5))
    if fam is Family.LINEAR:
        y = x * 0.7 + g.normal(size=n)
        return GlmModel(fam, x, y, b0)
    if fam is Family.LOGISTIC:
        y = (g.uniform(size=n) < expit(x + b0)).astype(float)
        y[:2] = (0.0, 1.0)
        x[:2] = (0.8, 0.9)  # overlapping responses keep the MLE finite
        return GlmModel(fam, x, y, b0)
    y = g.poisson(np.exp(0.5 * x + b0)).astype(float)
    y[0], x[0] = 1.0, 0.5
    y[1], x[1] = 1.0, -0.5
    return GlmModel(fam, x, y, b0, theta_domain=(-2.0, 2.0))


@given(glm_models())
def test_constant_invariants(model):
    try:
        c = model_constants(model)
    except models.NoCriticalPointError:
        assume(False)
    tol = 1e-9 * (1 + np.mean(np.abs(model.x * model.y)))
    assert abs(np.mean(c.psi)) <= tol
    assert np.all(c.sigma >= 0)
    assert c.L >= 1 and c.C_R >= 0 and c.Omega >= 0 and c.SigmaInfo >= 0
    assert c.psi_moments[2] == c.Omega
    assert c.psi_moments[4] >= c.Omega**2 * (1 - 1e-12)


@given(glm_models(), reals)
def test_linear_family_linearization_is_exact(model, theta):
    assume(model.family is Family.LINEAR)
    c = model_constants(model)
    for i in range(model.n):
        assert models.linearized_gradient(c, i, theta) == pytest.approx(models.gradient(model, i, theta),
                                                                        rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("family", ["logistic", "poisson"])
def test_remainder_bounded_by_C_R(family):
    # The C_R expressions carry x^2 while the Taylor remainder grows like |x|^3, so the
    # invariant is checked for bounded covariates (|x| <= 0.75); see the ledger.
    g = np.random.default_rng(7)
    n = 40
    x = g.uniform(-0.75, 0.75, n)
    if family == "logistic":
        y = (g.uniform(size=n) < expit(x)).astype(float)
        model = GlmModel(family, x, y, 0.2)
        lo, hi = -6.0, 6.0
    else:
        y = g.poisson(np.exp(0.4 * x)).astype(float)
        model = GlmModel(family, x, y, 0.1, theta_domain=(-2.0, 2.0))
        lo, hi = -2.0, 2.0
    c = model_constants(model)
    idx = g.integers(0, n, 10_000)
    th = g.uniform(lo, hi, 10_000)
    grad = models.gradients(model, idx, th)
    lin = c.psi[idx] - c.sigma[idx] * (th - c.theta_hat)
    assert np.all(np.abs(grad - lin) <= c.C_R * (th - c.theta_hat) ** 2 + 1e-14)
