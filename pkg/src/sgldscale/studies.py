"""Study drivers: rate studies, iterate-average variance and assumption checks.

Rate studies compare E g(Y) with E g(Z) where g is the grid average g1 or its
square g2. A naive estimate from two independent ensembles has a standard
error of order Var(g) / sqrt(R), which at desk-scale R is far above the O(h)
gaps of interest. The default estimator therefore splits the gap as

    E g(Y) - E g(Z) = E[g(Y) - g(Ylin)] + (E g(Ylin) - E g(Z))

where Ylin is the linearized path driven by the same draws as Y. The first
term is a low-variance paired Monte Carlo mean; the second is computed exactly
from second moments of the linear recursion and of the OU process on the same
grid. Both pieces target exactly what ``functional_gap`` on two independent
ensembles targets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng as rngmod
from .functionals import G1_NORM, G2_NORM, evaluate, gap_from_values, g1, g2, ou_average_variance
from .models import GlmModel, ModelConstants
from .ou import OuGenerator, OuParams, limit_params, ou_covariance
from .sgld import AlgoConfig, coupled_block, map_blocks


# ---------------------------------------------------------------- exact second moments


def linearized_moments(constants: ModelConstants, config: AlgoConfig):
    """Means mu_k and second moments E[eta_j eta_k] of the linear recursion.

    With f = 1 - (h/b) sum sigma_I and u = (h/b) sum psi_I for one batch,
    eta_{k+1} = f eta_k + u + s xi_k, so
        mu_{k+1}  = E f mu_k + E u
        m2_{k+1}  = E f^2 m2_k + 2 E[f u] mu_k + E u^2 + s^2
        E[eta_j eta_k] = (E f)^{k-j} (m2_j - mu_j^2) + mu_j mu_k,  j <= k.
    """
    h, b, a = config.h, config.b, config.alpha
    psi, sig = constants.psi, constants.sigma
    hb = h / b
    m_s, m_p = float(np.mean(sig)), float(np.mean(psi))
    m_ss, m_pp, m_sp = float(np.mean(sig * sig)), float(np.mean(psi * psi)), float(np.mean(sig * psi))
    # moments of batch sums of b i.i.d. uniform picks
    e_sum_s = b * m_s
    e_sum_s2 = b * m_ss + b * (b - 1) * m_s**2
    e_sum_p = b * m_p
    e_sum_p2 = b * m_pp + b * (b - 1) * m_p**2
    e_sum_sp = b * m_sp + b * (b - 1) * m_s * m_p
    Ef = 1.0 - hb * e_sum_s
    Ef2 = 1.0 - 2.0 * hb * e_sum_s + hb**2 * e_sum_s2
    Eu = hb * e_sum_p
    Eu2 = hb**2 * e_sum_p2
    Efu = hb * e_sum_p - hb**2 * e_sum_sp
    s2 = 2.0 * h * config.beta_inv
    mu = np.zeros(a + 1)
    m2 = np.zeros(a + 1)
    for k in range(a):
        mu[k + 1] = Ef * mu[k] + Eu
        m2[k + 1] = Ef2 * m2[k] + 2.0 * Efu * mu[k] + Eu2 + s2
    k = np.arange(a + 1)
    lo = np.minimum.outer(k, k)
    hi = np.maximum.outer(k, k)
    cov = Ef ** (hi - lo) * (m2[lo] - mu[lo] ** 2) + mu[lo] * mu[hi]
    return mu, cov


def exact_linear_means(constants: ModelConstants, config: AlgoConfig) -> dict:
    """E g1 and E g2 of the rescaled linearized path (grid average)."""
    mu, second = linearized_moments(constants, config)
    a, w = config.alpha, config.w
    return {"g1": w * float(np.mean(mu[1:])), "g2": w**2 * float(np.sum(second[1:, 1:])) / a**2}


def exact_ou_means(params: OuParams, alpha: int) -> dict:
    """E g1 and E g2 of the OU grid path (Z_0 = 0)."""
    t = np.arange(1, alpha + 1) / alpha
    cov = ou_covariance(params, t[:, None], t[None, :])
    return {"g1": 0.0, "g2": float(np.sum(cov)) / alpha**2}


# ---------------------------------------------------------------- coupled sampling


@dataclass
class CoupledSample:
    avg_Y: np.ndarray
    avg_lin: np.ndarray
    moments: dict = field(default_factory=dict)  # q -> per-step mean of |theta_k - theta_hat|^q


def coupled_sample(model: GlmModel, constants: ModelConstants, config: AlgoConfig, R: int,
                   threads: int = 1, moment_orders=()) -> CoupledSample:
    """Per-replicate grid averages of Y and of its linearization under shared draws."""
    if R < 2:
        raise ValueError("need at least two replicates")
    parts = map_blocks(lambda rows: coupled_block(model, constants, config, rows, moment_orders), R, threads)
    avg_Y = np.concatenate([p["avg_Y"] for p in parts])
    avg_lin = np.concatenate([p["avg_lin"] for p in parts])
    moments = {}
    for q in moment_orders:
        total = np.zeros(config.alpha + 1)
        for p in parts:  # fixed block order keeps the sum deterministic
            total = total + p[("moment", q)]
        moments[q] = total / R
    return CoupledSample(avg_Y, avg_lin, moments)


def ou_averages(params: OuParams, alpha: int, R: int, master_seed: int, threads: int = 1) -> np.ndarray:
    gen = OuGenerator(params, alpha, master_seed)
    parts = map_blocks(lambda rows: evaluate(g1(), gen.block(rows)), R, threads)
    return np.concatenate(parts)


# ---------------------------------------------------------------- rate study


@dataclass
class RatePoint:
    h: float
    alpha: int
    w: float
    beta_inv: float
    B: float
    A: float
    gap: float
    stderr: float
    replicates: int
    var_y: float
    var_y_stderr: float
    var_z: float
    var_gap: float
    mean_y: float
    mean_y_stderr: float
    mean_rhs: float
    K1_hat: float


@dataclass
class RateStudy:
    points: list
    functional: str
    estimator: str
    slope: float
    slope_se: float
    intercept: float


def ols_loglog(h, gap):
    """OLS fit of log(gap) on log(h): (slope, slope stderr, intercept)."""
    h, gap = np.asarray(h, dtype=float), np.asarray(gap, dtype=float)
    if h.size < 3:
        raise ValueError("slope fit needs at least three points")
    if np.any(gap <= 0):
        raise ArithmeticError("gap estimates must be positive for a log-log fit")
    fit = stats.linregress(np.log(h), np.log(gap))
    return float(fit.slope), float(fit.stderr), float(fit.intercept)


def _tau_sq_2(constants: ModelConstants, config: AlgoConfig) -> float:
    """tau_2^2 = E (psibar + sqrt(2/(h beta)) xi)^2 in closed form."""
    m, m2 = float(np.mean(constants.psi)), float(np.mean(constants.psi**2))
    return (m2 - m * m) / config.b + m * m + 2.0 * config.beta_inv / config.h


def rate_point(model: GlmModel, constants: ModelConstants, config: AlgoConfig, R: int, functional: str = "g2",
               estimator: str = "coupled", threads: int = 1) -> RatePoint:
    params = limit_params(constants, config)
    sample = coupled_sample(model, constants, config, R, threads, moment_orders=(2,))
    yv = sample.avg_Y
    if estimator == "coupled":
        lin = exact_linear_means(constants, config)
        ou = exact_ou_means(params, config.alpha)
        if functional == "g1":
            d, norm = yv - sample.avg_lin, G1_NORM
        else:
            d, norm = yv**2 - sample.avg_lin**2, G2_NORM
        diff = float(np.mean(d)) + lin[functional] - ou[functional]
        gap = abs(diff) / norm
        se = float(np.std(d, ddof=1)) / math.sqrt(R) / norm
    elif estimator == "ensemble":
        zv = ou_averages(params, config.alpha, R, rngmod.derive_seed(config.master_seed, "ou"), threads)
        fy, fz = (yv, zv) if functional == "g1" else (yv**2, zv**2)
        est = gap_from_values(fy, fz, G1_NORM if functional == "g1" else G2_NORM, functional)
        gap, se = est.value, est.stderr
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    vstats = coupled_variance(sample, constants, config)
    var_z = ou_average_variance(params)
    K1_hat = float(np.max(sample.moments[2][1:])) / (config.h * _tau_sq_2(constants, config))
    mean_rhs = K1_hat * constants.C_R * config.w * config.alpha * config.h * (
        config.h * constants.Omega / config.b + 2.0 * config.beta_inv)
    return RatePoint(
        h=config.h, alpha=config.alpha, w=config.w, beta_inv=config.beta_inv, B=params.B, A=params.A,
        gap=gap, stderr=se, replicates=R,
        var_y=vstats["var"], var_y_stderr=vstats["var_se"], var_z=var_z, var_gap=abs(vstats["var"] - var_z),
        mean_y=vstats["mean"], mean_y_stderr=vstats["mean_se"], mean_rhs=mean_rhs, K1_hat=K1_hat,
    )


def coupled_variance(sample: CoupledSample, constants: ModelConstants, config: AlgoConfig) -> dict:
    """Var of the grid average of Y via the linearized control variate.

    E Ybar   = E Ylin_bar   + mean(Ybar - Ylin_bar)
    E Ybar^2 = E Ylin_bar^2 + mean(Ybar^2 - Ylin_bar^2)
    Standard errors by the delta method on the paired differences.
    """
    lin = exact_linear_means(constants, config)
    d1 = sample.avg_Y - sample.avg_lin
    d2 = sample.avg_Y**2 - sample.avg_lin**2
    R = d1.size
    mean = lin["g1"] + float(np.mean(d1))
    second = lin["g2"] + float(np.mean(d2))
    var = second - mean**2
    grad = np.vstack([d2, d1])  # var = second - mean^2 -> gradient (1, -2 mean)
    cov = np.cov(grad)
    var_se = math.sqrt(max(cov[0, 0] - 4 * mean * cov[0, 1] + 4 * mean**2 * cov[1, 1], 0.0) / R)
    mean_se = math.sqrt(cov[1, 1] / R)
    return {"mean": mean, "mean_se": mean_se, "var": var, "var_se": var_se}


def rate_configs(h_grid, b: int, beta_scale: float, c1=1.0, c2=1.0, c3=1.0, master_seed: int = 0):
    """Numerical-preset configs with beta = beta_scale / h; one derived seed per grid point."""
    h_grid = [float(h) for h in h_grid]
    if len(h_grid) < 1 or any(h2 >= h1 for h1, h2 in zip(h_grid, h_grid[1:])):
        raise ValueError("h_grid must be strictly decreasing")
    out = []
    for i, h in enumerate(h_grid):
        seed = rngmod.derive_seed(master_seed, f"rate-point-{i}")
        beta_inv = 0.0 if beta_scale == math.inf else h / beta_scale
        out.append(AlgoConfig.numerical(h, b, beta_inv, c1, c2, c3, master_seed=seed))
    return out


def rate_study(model: GlmModel, constants: ModelConstants, configs, R: int, functional: str = "g2",
               estimator: str = "coupled", threads: int = 1) -> RateStudy:
    if functional not in ("g1", "g2"):
        raise ValueError("functional must be g1 or g2")
    for c in configs:
        if not c.h < 1.0 / (2.0 * constants.L):
            raise ValueError(f"step size h = {c.h:g} violates h < 1/(2L) = {1 / (2 * constants.L):g}")
    pts = [rate_point(model, constants, c, R, functional, estimator, threads) for c in configs]
    if len(pts) >= 3 and all(p.gap > 0 for p in pts):
        slope, se, icpt = ols_loglog([p.h for p in pts], [p.gap for p in pts])
    else:
        slope = se = icpt = math.nan
    return RateStudy(pts, functional, estimator, slope, se, icpt)


# ---------------------------------------------------------------- assumption checks


def tau_q(constants: ModelConstants, config: AlgoConfig, q: float, max_enum: int = 200_000,
          mc_samples: int = 200_000, seed: int = 0) -> float:
    """tau_q = E{|b^-1 sum psi_I + (2/(h beta))^(1/2) xi|^q}^(1/q).

    Batches are enumerated exhaustively when n^b <= max_enum, otherwise
    sampled. The Gaussian part is integrated by Gauss-Hermite quadrature,
    which is exact for even integer q.
    """
    psi, n, b = constants.psi, constants.n, config.b
    if n**b <= max_enum:
        grids = np.meshgrid(*([psi] * b), indexing="ij")
        means = sum(grids).ravel() / b
    else:
        gen = np.random.default_rng(seed)
        means = psi[gen.integers(0, n, size=(mc_samples, b))].mean(axis=1)
    c = math.sqrt(2.0 * config.beta_inv / config.h)
    if c == 0.0:
        return float(np.mean(np.abs(means) ** q)) ** (1.0 / q)
    nodes, weights = np.polynomial.hermite_e.hermegauss(40)
    weights = weights / weights.sum()
    vals = np.abs(means[:, None] + c * nodes[None, :]) ** q @ weights
    return float(np.mean(vals)) ** (1.0 / q)


@dataclass
class AssumptionReport:
    curvature_ok: bool
    step_size_ok: bool
    smoothness_ok: bool
    h_cap: float
    L: float
    tau2: float
    tau6: float
    K1_hat: float
    K3_hat: float
    replicates: int
    source: str
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_assumptions(constants: ModelConstants, config: AlgoConfig, model: GlmModel | None = None,
                      replicates: int = 2000, threads: int = 1) -> AssumptionReport:
    """Curvature, step size and smoothness checks plus Monte Carlo K1, K3.

    K_p is estimated as max_k E{|theta_k - theta_hat|^(2p)}^(1/p) / (h tau_{2p}^2)
    from SGLD paths when ``model`` is given, else from linearized paths.
    """
    failures = []
    curvature_ok = bool(np.all(constants.sigma >= 0))
    if not curvature_ok:
        failures.append(f"curvature: {int(np.sum(constants.sigma < 0))} sigma_i are negative")
    h_cap = 1.0 / (2.0 * constants.L)
    step_ok = 0.0 < config.h < h_cap
    if not step_ok:
        failures.append(f"step size: h = {config.h:g} not in (0, {h_cap:g})")
    smooth_ok = math.isfinite(constants.C_R)
    if not smooth_ok:
        failures.append("smoothness: C_R is not finite")
    t2, t6 = tau_q(constants, config, 2), tau_q(constants, config, 6)
    k1 = k3 = math.nan
    source = "sgld" if model is not None else "linearized"
    if replicates >= 2 and step_ok:
        mom = _iterate_moments(model, constants, config, replicates, threads)
        if t2 > 0:
            k1 = float(np.max(mom[2][1:])) / (config.h * t2**2)
        if t6 > 0:
            k3 = float(np.max(mom[6][1:] ** (1 / 3))) / (config.h * t6**2)
    return AssumptionReport(curvature_ok, step_ok, smooth_ok, h_cap, constants.L, t2, t6, k1, k3,
                            replicates, source, failures)


def _iterate_moments(model, constants, config, R, threads):
    if model is not None:
        return coupled_sample(model, constants, config, R, threads, moment_orders=(2, 6)).moments
    from .sgld import SgldGenerator, make_ensemble

    ens = make_ensemble(SgldGenerator(None, constants, config, "linearized"), R, threads)
    eta = ens.values / config.w
    return {2: np.mean(eta**2, axis=0), 6: np.mean(eta**6, axis=0)}

