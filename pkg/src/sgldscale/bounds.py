"""Closed-form error-bound evaluators.

Every component is assembled from a list of named terms so that ``explain``
can print the individual summands. ``beta_inv`` replaces 1/beta throughout;
beta_inv = 0 is plain SGD and every temperature term vanishes continuously.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from fractions import Fraction

from .models import ModelConstants
from .sgld import AlgoConfig

G1_NORM = 1.53
G2_NORM = 3.53


class BoundInputError(ValueError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    L: float
    C_R: float
    Omega: float
    Sigma: float
    psi4: float
    psi6: float
    h: float
    b: float
    beta_inv: float
    alpha: float
    w: float
    K1: float = 1.0
    K3: float = 1.0
    c_num: float = 1.0
    C_bar: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not math.isfinite(v):
                raise BoundInputError(f"{f.name} must be finite, got {v}")
        for name in ("C_R", "Omega", "Sigma", "psi4", "psi6", "beta_inv", "alpha", "K1", "K3"):
            if getattr(self, name) < 0:
                raise BoundInputError(f"{name} must be nonnegative")
        if self.L < 1:
            raise BoundInputError(f"L must be >= 1, got {self.L}")
        if not 0 < self.h <= 1:
            raise BoundInputError(f"need 0 < h <= 1, got {self.h}")
        if self.beta_inv > 1:
            raise BoundInputError(f"need beta >= 1 (beta_inv <= 1), got beta_inv = {self.beta_inv}")
        if self.b < 1:
            raise BoundInputError("b must be >= 1")
        if self.w <= 0 or self.c_num <= 0:
            raise BoundInputError("w and c_num must be positive")

    @property
    def psi2(self) -> float:
        return self.Omega

    @property
    def C_bar_eff(self) -> float:
        return self.alpha * self.h if self.C_bar is None else self.C_bar

    @classmethod
    def from_model(cls, constants: ModelConstants, config: AlgoConfig, K1=1.0, K3=1.0, c_num=1.0, C_bar=None):
        return cls(
            L=constants.L, C_R=constants.C_R, Omega=constants.Omega, Sigma=constants.SigmaInfo,
            psi4=constants.psi_moments[4], psi6=constants.psi_moments[6],
            h=config.h, b=config.b, beta_inv=config.beta_inv, alpha=config.alpha, w=config.w,
            K1=K1, K3=K3, c_num=c_num, C_bar=C_bar,
        )


@dataclass(frozen=True)
class Term:
    label: str
    value: float


@dataclass(frozen=True)
class BoundBreakdown:
    eps_R: float
    eps_Z: float
    eps_rem: float
    eps_exch: float
    eps_cov: float
    D1: float
    D2: float
    E1: float
    C_max: float
    total: float
    flags: tuple = ()
    terms: dict = field(default_factory=dict, compare=False, repr=False)

    COLUMNS = ("eps_R", "eps_Z", "eps_rem", "eps_exch", "eps_cov", "D1", "D2", "E1", "C_max", "total")


def _sum(terms):
    return math.fsum(t.value for t in terms)


def _log_term(p: BoundInputs):
    """(w^2 h Omega/b + w^2/beta)^2 log^2(1 + alpha h Sigma) / Sigma^2 with its Sigma -> 0 limit."""
    w2, ah = p.w**2, p.alpha * p.h
    coef = (w2 * p.h * p.Omega / p.b + w2 * p.beta_inv) ** 2
    x = ah * p.Sigma
    if p.Sigma == 0.0:
        return coef * ah**2, True
    return coef * (math.log1p(x) / p.Sigma) ** 2, False


# ---------------------------------------------------------------- constants


def e1_constant(p: BoundInputs) -> float:
    return _sum(_e1_terms(p))


def _e1_terms(p: BoundInputs):
    L, Om, P4 = p.L, p.Omega, p.psi4
    a, h, b = p.alpha, p.h, p.b
    return [
        Term("E psi^4", P4),
        Term("Omega^2", Om**2),
        Term("sqrt(Omega)(1+L^3)[(E psi^4+Omega^2)^(3/4)+1]", math.sqrt(Om) * (1 + L**3) * ((P4 + Om**2) ** 0.75 + 1)),
        Term("Omega L(1+L^4)[Omega alpha h^2/b + alpha h/beta]", Om * L * (1 + L**4) * (Om * a * h**2 / b + a * h * p.beta_inv)),
    ]


def _s4_terms(p: BoundInputs, E1: float):
    """Braced expression shared by eps_R (power 3/4) and D1^2 (times w^4)."""
    L, Om, P4, bi = p.L, p.Omega, p.psi4, p.beta_inv
    a, h, b = p.alpha, p.h, p.b
    return [
        Term("(alpha^2 h^4/b^2)[alpha h^2 L^2 E1/b + alpha^2 h^4 L^4 E1 + E psi^4/b + Omega^2 + Omega]",
             a**2 * h**4 / b**2 * (a * h**2 * L**2 * E1 / b + a**2 * h**4 * L**4 * E1 + P4 / b + Om**2 + Om)),
        Term("(alpha^2 h^2/beta^2)[1 + alpha h^2 L^2/b + alpha^2 h^4 L^4]",
             a**2 * h**2 * bi**2 * (1 + a * h**2 * L**2 / b + a**2 * h**4 * L**4)),
        Term("(1/b + alpha h^2 L^2) sqrt(Omega)(1+L^3) alpha^3 h^(11/2) L^2/beta^(3/2)",
             (1 / b + a * h**2 * L**2) * math.sqrt(Om) * (1 + L**3) * a**3 * h**5.5 * L**2 * bi**1.5),
    ]


def _d1_terms(p: BoundInputs, E1: float):
    w4 = p.w**4
    log_val, _ = _log_term(p)
    out = [Term("1", 1.0)]
    out += [Term("w^4 " + t.label, w4 * t.value) for t in _s4_terms(p, E1)]
    out.append(Term("(w^2 h Omega/b + w^2/beta)^2 log^2(1+alpha h Sigma)/Sigma^2", log_val))
    return out


def _d2_terms(p: BoundInputs, E1: float):
    L, Om, bi, w2 = p.L, p.Omega, p.beta_inv, p.w**2
    a, h, b = p.alpha, p.h, p.b
    log_val, _ = _log_term(p)
    if L * h >= 1:
        raise BoundInputError(f"D2 needs L h < 1, got L h = {L * h}")
    return [
        Term("1", 1.0),
        Term("w^2 (alpha h^2/b)[sqrt(Omega) L(1+L^3) alpha^(1/2) h^(3/4)/beta^(3/4) + L^2 Omega alpha h^2 + Omega]",
             w2 * a * h**2 / b * (math.sqrt(Om) * L * (1 + L**3) * a**0.5 * h**0.75 * bi**0.75 + L**2 * Om * a * h**2 + Om)),
        Term("w^2 (alpha h/beta)[alpha^(1/2) h L/b^(1/2) + 1 + L^2 alpha h^2]",
             w2 * a * h * bi * (a**0.5 * h * L / b**0.5 + 1 + L**2 * a * h**2)),
        Term("w^2 alpha^(3/2) h^3 L sqrt(E1)/b^(3/2)", w2 * a**1.5 * h**3 * L * math.sqrt(E1) / b**1.5),
        Term("w^2 (Omega h^2/b + h/beta)(1 + alpha^2 h^2 L^2/(1-L h)^2)",
             w2 * (Om * h**2 / b + h * bi) * (1 + a**2 * h**2 * L**2 / (1 - L * h) ** 2)),
        Term("(w^2 h Omega/b + w^2/beta)^2 log^2(1+alpha h Sigma)/Sigma^2", log_val),
    ]


def d_constants(p: BoundInputs) -> tuple[float, float]:
    E1 = e1_constant(p)
    return math.sqrt(_sum(_d1_terms(p, E1))), math.sqrt(_sum(_d2_terms(p, E1)))


# ---------------------------------------------------------------- components


def _psi_mix(p: BoundInputs) -> float:
    return p.Omega**3 + p.psi4**1.5 + p.psi4 * p.Omega + p.psi6


def _eps_r_terms(p: BoundInputs, E1: float):
    w, a, h, b, bi = p.w, p.alpha, p.h, p.b, p.beta_inv
    mix = _psi_mix(p)
    s4 = _sum(_s4_terms(p, E1))
    return [
        Term("w alpha K1 C_R (h^2 Omega/b + h/beta)", w * a * p.K1 * p.C_R * (h**2 * p.Omega / b + h * bi)),
        Term("w^3 alpha^3 C_R^3 K3^3 ((h^6/b^3) M + h^3/beta^3)",
             w**3 * a**3 * p.C_R**3 * p.K3**3 * (h**6 / b**3 * mix + h**3 * bi**3)),
        Term("w^3 {S4}^(3/4) w alpha h C_R K3 [(h/b) M^(1/3) + 1/beta]",
             w**3 * s4**0.75 * w * a * h * p.C_R * p.K3 * (h / b * mix ** (1 / 3) + bi)),
    ]


def _eps_z_terms(p: BoundInputs):
    w, a, h, b, bi = p.w, p.alpha, p.h, p.b, p.beta_inv
    Om, S = p.Omega, p.Sigma
    if a < 0.5:
        raise BoundInputError("eps_Z needs alpha >= 1/2 (log(2 alpha) >= 0)")
    lg = math.log(2 * a)
    return [
        Term("w alpha^(1/2) h^2 Omega^(1/2) Sigma/b^(1/2)", w * a**0.5 * h**2 * Om**0.5 * S / b**0.5),
        Term("w alpha^(1/2) h^(3/2) Sigma/beta^(1/2)", w * a**0.5 * h**1.5 * S * bi**0.5),
        Term("w h Omega^(1/2) sqrt(log(2 alpha))/b^(1/2)", w * h * Om**0.5 * lg**0.5 / b**0.5),
        Term("w h^(1/2) sqrt(log(2 alpha))/beta^(1/2)", w * h**0.5 * lg**0.5 * bi**0.5),
        Term("w alpha^(3/2) h^6 Omega^(3/2) Sigma^3/b^(3/2)", w * a**1.5 * h**6 * Om**1.5 * S**3 / b**1.5),
        Term("w^3 alpha^(3/2) h^(9/2) Sigma^3/beta^(3/2)", w**3 * a**1.5 * h**4.5 * S**3 * bi**1.5),
        Term("w^3 h^3 Omega^(3/2) log^(3/2)(2 alpha)/b^(3/2)", w**3 * h**3 * Om**1.5 * lg**1.5 / b**1.5),
        Term("w^3 h^(3/2) log^(3/2)(2 alpha)/beta^(3/2)", w**3 * h**1.5 * lg**1.5 * bi**1.5),
        Term("w^4 alpha^2 h^5 Omega^2 Sigma/b^2", w**4 * a**2 * h**5 * Om**2 * S / b**2),
        Term("w^4 alpha^(3/2) h^4 Omega^2 sqrt(log(2 alpha))/b^2", w**4 * a**1.5 * h**4 * Om**2 * lg**0.5 / b**2),
        Term("w^4 alpha^2 h^3 Sigma/beta^2", w**4 * a**2 * h**3 * S * bi**2),
        Term("w^4 alpha^(3/2) h^2 sqrt(log(2 alpha))/beta^2", w**4 * a**1.5 * h**2 * lg**0.5 * bi**2),
    ]


def _eps_rem_terms(p: BoundInputs, D1: float):
    w, a, h, b, bi, L = p.w, p.alpha, p.h, p.b, p.beta_inv, p.L
    return [
        Term("D1 alpha w h L/b^(1/2) sqrt((1 + alpha^2 h^2 L^2)(h^2 Omega/b + h/beta))",
             D1 * a * w * h * L / b**0.5 * math.sqrt((1 + a**2 * h**2 * L**2) * (h**2 * p.Omega / b + h * bi))),
    ]


def _eps_exch_terms(p: BoundInputs, E1: float):
    w3, a, h, b, bi, L, Om = p.w**3, p.alpha, p.h, p.b, p.beta_inv, p.L, p.Omega
    return [
        Term("w^3 L^3 alpha^(5/2) h^6 E1^(3/4)/b^(3/2)", w3 * L**3 * a**2.5 * h**6 * E1**0.75 / b**1.5),
        Term("w^3 L^3 alpha^(5/2) h^(9/2)/beta^(3/2)", w3 * L**3 * a**2.5 * h**4.5 * bi**1.5),
        Term("w^3 sqrt(Omega) L^3 (1+L^(9/4)) alpha^(5/2) h^(45/8)/beta^(9/8)",
             w3 * math.sqrt(Om) * L**3 * (1 + L**2.25) * a**2.5 * h**5.625 * bi**1.125),
        Term("w^3 alpha h^3 (E psi^4 + Omega^2)^(3/4)/b^(3/2)", w3 * a * h**3 * (p.psi4 + Om**2) ** 0.75 / b**1.5),
        Term("w^3 alpha h^(3/2)/beta^(3/2)", w3 * a * h**1.5 * bi**1.5),
    ]


def _eps_cov_terms(p: BoundInputs, D2: float):
    w, a, h, b, bi, L = p.w, p.alpha, p.h, p.b, p.beta_inv, p.L
    Om, S, P4 = p.Omega, p.Sigma, p.psi4
    pre = D2 * a * w**2 * h**2
    raw = [
        ("alpha h^2 L^2/b [E psi^4 + Omega^2 + sqrt(Omega) L^3 ((E psi^4+Omega^2)^(3/4) + 1)]^(1/2)",
         a * h**2 * L**2 / b * (P4 + Om**2 + math.sqrt(Om) * L**3 * ((P4 + Om**2) ** 0.75 + 1)) ** 0.5),
        ("L^(9/2) alpha^(3/2) h^3 Omega/b^(3/2)", L**4.5 * a**1.5 * h**3 * Om / b**1.5),
        ("L^(9/2) alpha^(3/2) h^(5/2) Omega^(1/2)/(b beta^(1/2))", L**4.5 * a**1.5 * h**2.5 * Om**0.5 / b * bi**0.5),
        ("alpha h L^2/beta", a * h * L**2 * bi),
        ("L^(7/2) Omega^(1/4) alpha h^(7/4)/beta^(3/4)", L**3.5 * Om**0.25 * a * h**1.75 * bi**0.75),
        ("alpha^(1/2) h Omega L/b", a**0.5 * h * Om * L / b),
        ("alpha^(1/2) h^(1/2) sqrt(Omega) L/(b^(1/2) beta^(1/2))", a**0.5 * h**0.5 * math.sqrt(Om) * L / b**0.5 * bi**0.5),
        ("w h/b^(3/2) ((E psi^4)^(3/4) + Omega^(3/2))", w * h / b**1.5 * (P4**0.75 + Om**1.5)),
        ("L w h^2 alpha Omega^(3/2)/b^(3/2)", L * w * h**2 * a * Om**1.5 / b**1.5),
        ("L w h^(3/2) alpha Omega/(b beta^(1/2))", L * w * h**1.5 * a * Om / b * bi**0.5),
        ("L alpha^(1/2) h/b^(3/2)", L * a**0.5 * h / b**1.5),
        ("L^2 alpha h^2/b^(3/2)", L**2 * a * h**2 / b**1.5),
        ("h Omega Sigma/b", h * Om * S / b),
        ("alpha h^2 Omega Sigma^2/b", a * h**2 * Om * S**2 / b),
        ("L alpha^(1/2) h^(1/2) Omega^(1/2)/(b beta^(1/2))", L * a**0.5 * h**0.5 * Om**0.5 / b * bi**0.5),
        ("L alpha^(1/2)/(b^(1/2) beta)", L * a**0.5 / b**0.5 * bi),
        ("w h^(1/2) Omega/(b beta^(1/2))", w * h**0.5 * Om / b * bi**0.5),
        ("w Omega^(1/2)/(b^(1/2) beta)", w * Om**0.5 / b**0.5 * bi),
        ("L w alpha h^(3/2) Omega/(b beta^(1/2))", L * w * a * h**1.5 * Om / b * bi**0.5),
        ("L w alpha h Omega^(1/2)/(b^(1/2) beta)", L * w * a * h * Om**0.5 / b**0.5 * bi),
        ("w/(h^(1/2) beta^(3/2))", w / h**0.5 * bi**1.5),
        ("L alpha^(1/2)/(b^(1/2) beta) [repeated]", L * a**0.5 / b**0.5 * bi),
        ("L^2 alpha h/(b^(1/2) beta)", L**2 * a * h / b**0.5 * bi),
        ("alpha h Sigma^2/beta", a * h * S**2 * bi),
        ("Sigma/beta", S * bi),
    ]
    return [Term("D2 alpha w^2 h^2 * " + lab, pre * v) for lab, v in raw]


def component_terms(p: BoundInputs) -> dict[str, list[Term]]:
    """Every summand of every component, keyed by component name."""
    E1_terms = _e1_terms(p)
    E1 = _sum(E1_terms)
    d1_terms, d2_terms = _d1_terms(p, E1), _d2_terms(p, E1)
    D1, D2 = math.sqrt(_sum(d1_terms)), math.sqrt(_sum(d2_terms))
    return {
        "E1": E1_terms,
        "D1^2": d1_terms,
        "D2^2": d2_terms,
        "eps_R": _eps_r_terms(p, E1),
        "eps_Z": _eps_z_terms(p),
        "eps_rem": _eps_rem_terms(p, D1),
        "eps_exch": _eps_exch_terms(p, E1),
        "eps_cov": _eps_cov_terms(p, D2),
    }


def c_max(p: BoundInputs) -> float:
    return max(1.0, p.Omega**3, p.Sigma**3, p.psi6, p.C_bar_eff**4.75)


def eps_components(p: BoundInputs) -> BoundBreakdown:
    terms = component_terms(p)
    vals = {k: _sum(v) for k, v in terms.items()}
    flags = ("sigma_zero_limit",) if _log_term(p)[1] else ()
    parts = [vals[k] for k in ("eps_R", "eps_Z", "eps_rem", "eps_exch", "eps_cov")]
    return BoundBreakdown(
        eps_R=vals["eps_R"], eps_Z=vals["eps_Z"], eps_rem=vals["eps_rem"], eps_exch=vals["eps_exch"],
        eps_cov=vals["eps_cov"], D1=math.sqrt(vals["D1^2"]), D2=math.sqrt(vals["D2^2"]), E1=vals["E1"],
        C_max=c_max(p), total=p.c_num * math.fsum(parts), flags=flags, terms=terms,
    )


# ---------------------------------------------------------------- simplified forms


def simplified_rate(setting: str, C_R: float, L: float, calib: float = 1.0, *, h: float | None = None,
                    beta_inv: float = 0.0, n: int | None = None, m: float | None = None, b: int = 1) -> float:
    """calib (C_R^3 + C_R L^6 + L^7) times the setting rate.

    statistical: sqrt(m^6 b {log(n/b) + m^6} / n)   (needs n, m, b)
    numerical:   sqrt(h log(1/h) + 1/beta)          (needs h, beta_inv)
    """
    pre = calib * (C_R**3 + C_R * L**6 + L**7)
    if setting == "statistical":
        if n is None or m is None:
            raise BoundInputError("statistical rate needs n and m")
        if n <= b:
            raise BoundInputError(f"statistical rate needs n > b (n={n}, b={b})")
        return pre * math.sqrt(m**6 * b * (math.log(n / b) + m**6) / n)
    if setting == "numerical":
        if h is None or not 0 < h <= 1:
            raise BoundInputError("numerical rate needs 0 < h <= 1")
        return pre * math.sqrt(h * math.log(1.0 / h) + beta_inv)
    raise BoundInputError(f"unknown setting {setting!r}")


def simplified_rate_for(constants: ModelConstants, config: AlgoConfig, calib: float = 1.0) -> float:
    s = config.setting
    if s.kind == "statistical":
        return simplified_rate("statistical", constants.C_R, constants.L, calib, n=s.n, m=s.m, b=config.b)
    return simplified_rate("numerical", constants.C_R, constants.L, calib, h=config.h, beta_inv=config.beta_inv)


def _simplified_terms(p: BoundInputs):
    h, b, bi, w, L = p.h, p.b, p.beta_inv, p.w, p.L
    lg = math.log(2 * p.alpha)
    r = math.sqrt
    return [
        Term("L^2 (h/b + h^(1/2)/b^(1/2) 1/beta^(1/2))", L**2 * (h / b + r(h / b) * bi**0.5)),
        Term("w (1 + K1 C_R)(h/b + 1/beta + [h/b^(1/2) + h^(1/2)/beta^(1/2)] log^(1/2)(2 alpha))",
             w * (1 + p.K1 * p.C_R) * (h / b + bi + (h / r(b) + r(h) * bi**0.5) * lg**0.5)),
        Term("w^2 L^(13/2) (...)",
             w**2 * L**6.5 * (h**1.5 / b + h * bi + h**1.75 * bi**0.75 + r(h / b) * r(h) * bi**0.5 + r(h / b) * bi)),
        Term("w^3 L^(27/4) (1 + C_R^3 K3^3)(...)",
             w**3 * L**6.75 * (1 + p.C_R**3 * p.K3**3) * (
                 bi**3 + h**3.125 * bi**1.125 + h**1.75 * bi**1.25 + r(h / b) * r(h) * bi
                 + r(h / b) * h**1.75 * bi**0.75 + h / b * r(h) * bi**0.5
                 + (h**3 / b**1.5 + h**1.5 * bi**1.5) * lg**1.5)),
        Term("w^4 L^(27/4) (1 + C_R K3)(...)",
             w**4 * L**6.75 * (1 + p.C_R * p.K3) * (
                 bi**2.5 + h**1.875 * bi**2.125 + h / b * h**1.875 * bi**1.125 + (h / b) ** 1.5 * r(h) * bi**0.5
                 + h / b * r(h) * bi + h / b * h**1.75 * bi**0.75 + r(h / b) * bi**1.5
                 + (h**2.5 / b**2 + r(h) * bi**2) * lg**0.5)),
        Term("w^5 L (...)",
             w**5 * L * (h**3 / b**2.5 + r(h) * bi**2.5 + h / b * r(h) * bi**1.5 + (h / b) ** 2 * r(h) * bi**0.5
                         + (h / b) ** 1.5 * r(h) * bi + r(h / b) * r(h) * bi**2)),
    ]


def general_simplified_bound(p: BoundInputs) -> float:
    """C_max times the bracketed bound valid for h <= 1, beta >= 1, alpha h <= C_bar."""
    if p.C_bar is not None and p.alpha * p.h > p.C_bar * (1 + 1e-12):
        raise BoundInputError(f"alpha h = {p.alpha * p.h:g} exceeds C_bar = {p.C_bar:g}")
    return c_max(p) * _sum(_simplified_terms(p))


def ou_constant_C(A_t: float, B: float, B_t: float) -> float:
    """C(A~, B, B~) of the OU comparison."""
    den = B_t * (B + B_t)
    if den == 0:
        raise ZeroDivisionError("B~ (B + B~) must be nonzero")
    return A_t * (1 + 2 * B * (1 + 4 * B_t)) * (3 + 4 * B_t) * math.exp(4 * abs(B_t - B)) / den


def ou_kp(p: int, Cp: float, A: float, A_t: float, B: float, B_t: float) -> float:
    m = min(A, A_t)
    if m <= 0:
        raise ZeroDivisionError("min(A, A~) must be positive")
    C = ou_constant_C(A_t, B, B_t)
    first = 2 ** ((3 * p - 4) / 2) / m ** (p / 2)
    second = 2 ** (2 * (p - 1)) * (C ** (p / 2) + 2 ** (p / 2) * A_t ** (p / 2) * math.exp(p * abs(B_t - B)))
    return Cp * max(first, second)


def ou_kappa(A, A_t, B, B_t, Cp=None, C3=None) -> float:
    """Constant of the OU comparison; ``Cp`` maps p to C_p (default 1)."""
    Cp = {1: 1.0, 3: 1.0, **(Cp or {})}
    C3 = Cp[3] if C3 is None else C3
    K1 = ou_kp(1, Cp[1], A, A_t, B, B_t)
    K3 = ou_kp(3, Cp[3], A, A_t, B, B_t)
    return max(K1 + 2**2.5 * C3 * A**1.5 * K3 ** (1 / 3), 2 * K3)


def ou_to_ou_bound(A: float, A_t: float, B: float, B_t: float, Cp=None, C3=None) -> float:
    """Kappa [|A - A~| + |B - B~| + |A - A~|^3 + |B - B~|^3]."""
    if min(A, A_t) <= 0 or min(B, B_t) <= 0:
        raise ZeroDivisionError("OU comparison needs A, A~, B, B~ > 0")
    dA, dB = abs(A - A_t), abs(B - B_t)
    return ou_kappa(A, A_t, B, B_t, Cp, C3) * (dA + dB + dA**3 + dB**3)


@dataclass(frozen=True)
class RateExponents:
    lp_exponent: float
    bw_exponent: float
    lp_vacuous: bool
    bw_vacuous: bool


def metric_rate_exponents(r) -> RateExponents:
    """Exponents of h in the Levy-Prokhorov and bounded-Wasserstein rates.

    Integer or Fraction input is evaluated exactly with rationals.
    """
    exact = isinstance(r, (int, Fraction)) and not isinstance(r, bool)
    one = Fraction(1) if exact else 1.0
    r = Fraction(r) if exact else float(r)
    if not r > 1:
        raise ValueError(f"r must exceed 1, got {r}")
    lp = one / 20 - 9 / (200 * r - 20)
    bw = one / 14 - 2 / (49 * r - 21)
    return RateExponents(lp, bw, lp <= 0, bw <= 0)


def iterate_average_bound(eps: float, mean_abs_Y: float, p: BoundInputs) -> dict:
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    variance_rhs = (G1_NORM * mean_abs_Y + G2_NORM) * eps
    mean_rhs = p.K1 * p.C_R * p.w * p.alpha * p.h * (p.h * p.Omega / p.b + 2 * p.beta_inv)
    return {"variance_rhs": variance_rhs, "mean_rhs": mean_rhs}


def explain(p: BoundInputs) -> str:
    """Human-readable listing of every term."""
    bd = eps_components(p)
    lines = []
    for comp, terms in bd.terms.items():
        lines.append(f"{comp} = {_sum(terms):.10g}")
        for t in terms:
            lines.append(f"    {t.value:.6e}  {t.label}")
    lines.append(f"C_max = {bd.C_max:.10g}")
    lines.append(f"total = c_num * (eps_R + eps_Z + eps_rem + eps_exch + eps_cov) = {bd.total:.10g}")
    if bd.flags:
        lines.append("flags: " + ", ".join(bd.flags))
    return "\n".join(lines)
