import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sgldscale import bounds as bd
from sgldscale.bounds import BoundInputs
from sgldscale.data import SynthSpec, synth_data
from sgldscale.models import model_constants
from sgldscale.sgld import AlgoConfig


def base(**kw):
    d = dict(L=1.2, C_R=0.3, Omega=0.5, Sigma=0.4, psi4=0.6, psi6=0.9, h=0.01, b=2, beta_inv=0.01, alpha=100,
             w=10.0)
    d.update(kw)
    return BoundInputs(**d)


@st.composite
def bound_inputs(draw):
    u = st.floats(0, 1)
    Om = draw(st.floats(0, 3))
    L = draw(st.floats(1, 3))
    h = draw(st.floats(1e-4, 0.999)) / (2 * L)  # step-size assumption h < 1/(2L)
    return BoundInputs(
        L=L, C_R=draw(st.floats(0, 2)), Omega=Om, Sigma=draw(st.floats(0, 3)),
        psi4=Om**2 * (1 + draw(u)), psi6=Om**3 * (1 + draw(u)), h=h, b=draw(st.integers(1, 16)),
        beta_inv=draw(u), alpha=draw(st.integers(1, 4000)), w=draw(st.floats(0.1, 50)),
        K1=draw(st.floats(0, 3)), K3=draw(st.floats(0, 3)),
    )


def test_e1_examples():
    assert bd.e1_constant(base(Omega=0.0, psi4=0.0)) == 0.0
    # alpha = 0 switches off the alpha h^2/b and alpha h/beta groups
    got = bd.e1_constant(base(L=1.0, Omega=1.0, psi4=1.0, alpha=0))
    assert got == pytest.approx(4 + 2 * 2**0.75, rel=1e-15)
    assert bd.e1_constant(base(Omega=1.0)) > bd.e1_constant(base(Omega=0.5))


def test_d_constant_examples():
    z = base(Omega=0.0, Sigma=0.0, psi4=0.0, psi6=0.0, beta_inv=0.0)
    d1, d2 = bd.d_constants(z)
    assert d1 == pytest.approx(1.0) and d2 == pytest.approx(1.0)
    lo, hi = bd.d_constants(base(w=5.0)), bd.d_constants(base(w=10.0))
    assert hi[0] > lo[0] and hi[1] > lo[1]


def test_component_term_audits():
    br = bd.eps_components(base(C_R=0.0))
    assert br.eps_R == 0.0
    assert bd.eps_components(base(Omega=0, Sigma=0, psi4=0, psi6=0, beta_inv=0)).eps_Z == 0.0
    flagged = bd.eps_components(base(Sigma=0.0))
    assert "sigma_zero_limit" in flagged.flags


def test_sigma_zero_limit_is_continuous():
    a = bd.eps_components(base(Sigma=0.0)).total
    b = bd.eps_components(base(Sigma=1e-12)).total
    assert a == pytest.approx(b, rel=1e-9)


@given(bound_inputs())
def test_components_nonnegative(p):
    br = bd.eps_components(p)
    for name in bd.BoundBreakdown.COLUMNS:
        assert getattr(br, name) >= 0.0
    assert br.D1 >= 1.0 and br.D2 >= 1.0
    for terms in br.terms.values():
        assert all(t.value >= 0 for t in terms)


@given(bound_inputs())
def test_beta_infinity_is_the_limit(p):
    p0 = replace(p, beta_inv=0.0)
    p1 = replace(p, beta_inv=1e-40)
    a, b = bd.eps_components(p0), bd.eps_components(p1)
    for name in bd.BoundBreakdown.COLUMNS:
        assert abs(getattr(a, name) - getattr(b, name)) <= 1e-12 * max(1.0, abs(getattr(a, name)))
    assert bd.general_simplified_bound(p0) == pytest.approx(bd.general_simplified_bound(p1), rel=1e-12)


def test_total_decreases_along_numerical_preset():
    model = synth_data(SynthSpec("logistic", 200, scale=2.0), 1)
    const = model_constants(model)
    totals = []
    for k in range(3, 11):
        h = 2.0**-k
        totals.append(bd.eps_components(BoundInputs.from_model(const, AlgoConfig.numerical(h, 1, h))).total)
    assert all(a > b for a, b in zip(totals, totals[1:]))


def test_simplified_rate_examples():
    e = math.e
    assert bd.simplified_rate("numerical", 0.0, 1.0, h=1 / e, beta_inv=0.0) == pytest.approx(e**-0.5)
    n = 1000
    assert bd.simplified_rate("statistical", 0.0, 1.0, n=n, m=1, b=1) == pytest.approx(math.sqrt((math.log(n) + 1) / n))
    rates = [bd.simplified_rate("statistical", 0.4, 1.3, n=5000, m=2, b=b) for b in range(1, 33)]
    assert int(np.argmin(rates)) == 0
    with pytest.raises(bd.BoundInputError):
        bd.simplified_rate("statistical", 0.0, 1.0, n=10, m=1, b=10)
    with pytest.raises(bd.BoundInputError):
        bd.simplified_rate("numerical", 0.0, 1.0, h=2.0)


def test_general_simplified_examples():
    p = base(Omega=0, Sigma=0, psi4=0, psi6=0, beta_inv=0, C_bar=1.0, alpha=100, h=0.01)
    assert bd.c_max(p) == 1.0
    assert bd.general_simplified_bound(p) > 0
    with pytest.raises(bd.BoundInputError):
        bd.general_simplified_bound(base(alpha=200, h=0.01, C_bar=1.0))


def test_general_simplified_agrees_with_components():
    # the two agree up to absorbed constants when C_max is moderate (normalized moments); see the ledger
    g = np.random.default_rng(2024)
    for _ in range(20):
        h, b, bi = g.uniform(1e-3, 0.1), int(g.integers(1, 5)), g.uniform(0, 0.1)
        Om = g.uniform(0, 1)
        p = BoundInputs(L=g.uniform(1, 1.25), C_R=g.uniform(0, 1), Omega=Om, Sigma=g.uniform(0.05, 1),
                        psi4=Om**2 * g.uniform(1, 3), psi6=min(1.0, Om**3 * g.uniform(1, 5)), h=h, b=b,
                        beta_inv=bi, alpha=round(1 / h), w=min(math.sqrt(b / h), math.sqrt(1 / max(bi, 1e-12))))
        ratio = bd.general_simplified_bound(p) / bd.eps_components(p).total
        assert 1 / 50 <= ratio <= 50


def test_ou_bound_examples():
    assert bd.ou_to_ou_bound(2.0, 2.0, 1.0, 1.0) == 0.0
    assert bd.ou_constant_C(1.0, 1.0, 1.0) == 38.5
    a = bd.ou_to_ou_bound(2.0, 1.5, 1.0, 1.2) / bd.ou_kappa(2.0, 1.5, 1.0, 1.2)
    b = bd.ou_to_ou_bound(1.5, 2.0, 1.2, 1.0) / bd.ou_kappa(1.5, 2.0, 1.2, 1.0)
    assert a == pytest.approx(b, rel=1e-14)
    assert bd.ou_kappa(1.0, 1.0, 1.0, 1.0, Cp={1: 2.0, 3: 2.0}) > bd.ou_kappa(1.0, 1.0, 1.0, 1.0)


def test_metric_rate_exponents():
    r = bd.metric_rate_exponents(2)
    assert r.lp_exponent == Fraction(1, 20) - Fraction(9, 380)
    assert r.bw_exponent == Fraction(1, 14) - Fraction(2, 77)
    big = bd.metric_rate_exponents(1e12)
    assert big.lp_exponent == pytest.approx(1 / 20) and big.bw_exponent == pytest.approx(1 / 14)
    # the displayed exponent stays positive for every r > 1; at r = 1.01 it is barely so (see the ledger)
    near = bd.metric_rate_exponents(Fraction(101, 100))
    assert near.lp_exponent == Fraction(1, 20) - Fraction(9, 182) and not near.lp_vacuous
    with pytest.raises(ValueError):
        bd.metric_rate_exponents(1)


def test_iterate_average_bound_examples():
    p = base()
    assert bd.iterate_average_bound(0.0, 2.0, p)["variance_rhs"] == 0.0
    assert bd.iterate_average_bound(0.2, 0.0, p)["variance_rhs"] == pytest.approx(3.53 * 0.2)
    assert bd.iterate_average_bound(0.2, 1.0, base(C_R=0.0))["mean_rhs"] == 0.0


def test_input_validation():
    for bad in (dict(L=0.5), dict(h=0.0), dict(beta_inv=2.0), dict(Omega=-1.0), dict(w=math.nan)):
        with pytest.raises(bd.BoundInputError):
            base(**bad)


def test_explain_lists_every_component():
    text = bd.explain(base())
    for name in ("eps_R", "eps_Z", "eps_rem", "eps_exch", "eps_cov", "E1", "D1^2", "D2^2", "total"):
        assert name in text
