"""Ornstein-Uhlenbeck limit: exact grid simulation, covariances, coupled pairs
and the maximal-inequality experiment.

dZ_t = -B Z_t dt + sqrt(A) dW_t
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .models import ModelConstants
from .sgld import AlgoConfig, PathGenerator

SMALL_BDT = 1e-8


@dataclass(frozen=True)
class OuParams:
    B: float
    A: float
    z0: float = 0.0

    def __post_init__(self):
        for name in ("B", "A", "z0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.A < 0 or self.B < 0:
            raise ValueError(f"need A >= 0 and B >= 0, got A={self.A}, B={self.B}")


def limit_params(constants: ModelConstants, config: AlgoConfig) -> OuParams:
    """B = alpha h Sigma, A = w^2 (alpha h^2 Omega / b + 2 alpha h / beta)."""
    a, h, b = config.alpha, config.h, config.b
    B = a * h * constants.SigmaInfo
    A = config.w**2 * (a * h**2 * constants.Omega / b + 2.0 * a * h * config.beta_inv)
    return OuParams(B, A, 0.0)


def transition(params: OuParams, dt: float) -> tuple[float, float]:
    """(decay, variance) of the exact one-step law over ``dt``."""
    x = params.B * dt
    decay = math.exp(-x)
    if x < SMALL_BDT:
        # series of (1 - e^{-2x}) / (2x)
        var = params.A * dt * (1.0 - x + 2.0 * x * x / 3.0)
    else:
        var = params.A * dt * (-math.expm1(-2.0 * x)) / (2.0 * x)
    return decay, var


def _normals(rng, R: int, alpha: int) -> np.ndarray:
    if isinstance(rng, rngmod.CounterStream):
        return rng.normal(rngmod.OU_GAUSS, np.arange(alpha))
    return rng.standard_normal((R, alpha))


def _ar1(params: OuParams, alpha: int, z: np.ndarray) -> np.ndarray:
    decay, var = transition(params, 1.0 / alpha)
    sd = math.sqrt(var)
    out = np.empty((z.shape[0], alpha + 1))
    out[:, 0] = params.z0
    cur = np.full(z.shape[0], params.z0, dtype=float)
    for k in range(alpha):
        cur = decay * cur + sd * z[:, k]
        out[:, k + 1] = cur
    return out


def simulate_ou_exact(params: OuParams, alpha: int, rng, size: int | None = None) -> np.ndarray:
    """Grid path(s) with the exact transition law.

    ``rng`` is a ``numpy.random.Generator`` or a :class:`CounterStream`
    (one row per stream row). Returns shape (alpha+1,) when ``size`` is None
    and the rng is a Generator, else (R, alpha+1).
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if isinstance(rng, rngmod.CounterStream):
        R = len(rng)
    else:
        R = 1 if size is None else int(size)
    paths = _ar1(params, alpha, _normals(rng, R, alpha))
    if size is None and not isinstance(rng, rngmod.CounterStream):
        return paths[0]
    return paths


def discretized_ou(path, alpha: int, t):
    """Step-function value Z_{floor(alpha t)/alpha} at time(s) t in [0, 1]."""
    path = np.asarray(path, dtype=float)
    if path.shape[-1] != alpha + 1:
        raise ValueError(f"path must have {alpha + 1} grid values")
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t must lie in [0, 1]")
    # nudge so that t = k/alpha lands on k despite rounding in alpha * t
    k = np.floor(alpha * t + 1e-12 * alpha).astype(np.int64)
    k = np.clip(k, 0, alpha)
    return path[..., k]


def ou_covariance(params: OuParams, t, s):
    """Cov(Z_t, Z_s) for Z_0 = 0."""
    t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    lo = np.minimum(t, s)
    if params.B == 0.0:
        return params.A * lo
    B = params.B
    # A/(2B) (e^{-B|t-s|} - e^{-B(t+s)}) written without cancellation
    return params.A * np.exp(-B * np.abs(t - s)) * (-np.expm1(-2.0 * B * lo)) / (2.0 * B)


def coupled_ou_pair(p1: OuParams, p2: OuParams, alpha: int, rng, size: int | None = None):
    """Two exact OU paths consuming the same standard normal per step."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if p1.z0 != p2.z0:
        raise ValueError("coupled pair needs a common initial value")
    R = len(rng) if isinstance(rng, rngmod.CounterStream) else (1 if size is None else int(size))
    z = _normals(rng, R, alpha)
    a, b = _ar1(p1, alpha, z), _ar1(p2, alpha, z)
    if size is None and not isinstance(rng, rngmod.CounterStream):
        return a[0], b[0]
    return a, b


class OuGenerator(PathGenerator):
    """Ensemble generator for the discretized limit process."""

    def __init__(self, params: OuParams, alpha: int, master_seed: int, label: str = "ou_Z", w: float = 1.0):
        self.params, self.alpha, self.master_seed, self.label, self.w = params, alpha, master_seed, label, w

    def block(self, rows):
        return simulate_ou_exact(self.params, self.alpha, rngmod.CounterStream(self.master_seed, rows))

    def meta(self):
        return {"kind": "ou", "B": self.params.B, "A": self.params.A, "alpha": self.alpha}


# ---------------------------------------------------------------- maximal inequality


@dataclass(frozen=True)
class MaxIneqSpec:
    """Constant-coefficient case q(t) = sqrt(A) e^{a t}."""

    a: float
    A: float
    gamma: float
    p: float
    grid_size: int = 1000
    replicates: int = 10_000
    rel_stderr_target: float | None = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.A < 0:
            raise ValueError("A must be nonnegative")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if self.replicates < 100:
            raise ValueError("replicates must be >= 100")


@dataclass(frozen=True)
class MaxIneqResult:
    lhs_mc: float
    stderr: float
    rhs_no_cp: float
    implied_Cp: float


def max_ineq_rhs(a: float, A: float, gamma: float, p: float) -> float:
    """Right-hand side of the maximal inequality without its constant C_p."""
    integral_1 = A * math.expm1(2.0 * a) / (2.0 * a)
    # e^{-2as}[gamma + A(e^{2as}-1)/(2a)] is monotone in s, so its sup is at an endpoint
    end = math.exp(-2.0 * a) * (gamma + integral_1)
    peak = max(gamma, end)
    ratio = integral_1 / gamma
    return peak ** (p / 2.0) * math.log(1.0 + ratio + math.log1p(ratio)) ** (p / 2.0)


def sup_moments(a: float, A: float, grid_size: int, replicates: int, rng, ps) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo mean and stderr of max_k |X_k|^p for each p, sharing one simulation."""
    params = OuParams(a, A, 0.0)
    decay, var = transition(params, 1.0 / grid_size)
    sd = math.sqrt(var)
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    means, ses = [], []
    peak = np.zeros(replicates)
    cur = np.zeros(replicates)
    chunk = 64
    for k0 in range(0, grid_size, chunk):
        k1 = min(k0 + chunk, grid_size)
        if isinstance(rng, rngmod.CounterStream):
            z = rng.normal(rngmod.AUX, np.arange(k0, k1))
        else:
            z = rng.standard_normal((replicates, k1 - k0))
        for j in range(k1 - k0):
            cur = decay * cur + sd * z[:, j]
            np.maximum(peak, np.abs(cur), out=peak)
    for p in ps:
        v = peak**p
        means.append(float(np.mean(v)))
        ses.append(float(np.std(v, ddof=1) / math.sqrt(replicates)))
    return np.array(means), np.array(ses)


def maximal_inequality_experiment(spec: MaxIneqSpec, rng) -> MaxIneqResult:
    """E sup_{s<=1} |X_s|^p on the grid against the constant-free bound."""
    if isinstance(rng, rngmod.CounterStream) and len(rng) != spec.replicates:
        raise ValueError("counter stream must carry one row per replicate")
    (lhs,), (se,) = sup_moments(spec.a, spec.A, spec.grid_size, spec.replicates, rng, [spec.p])
    rhs = max_ineq_rhs(spec.a, spec.A, spec.gamma, spec.p)
    if spec.rel_stderr_target is not None and lhs > 0 and se / lhs > spec.rel_stderr_target:
        raise ValueError(
            f"relative stderr {se / lhs:.3g} exceeds target {spec.rel_stderr_target:g}; "
            f"increase replicates beyond {spec.replicates}"
        )
    implied = 0.0 if lhs == 0.0 else lhs / rhs
    return MaxIneqResult(lhs, se, rhs, implied)


def max_ineq_grid(a_grid, A_grid, p_grid, gamma="g0", grid_size: int = 1000, replicates: int = 100_000,
                  master_seed: int = 0) -> list[dict]:
    """Implied C_p over an (a, A, p) grid.

    ``gamma="g0"`` uses gamma = A / (2a). The process with parameter A is
    sqrt(A) times the A = 1 process driven by the same normals, so one
    simulation per a serves every A (and every p).
    """
    rows = []
    for i, a in enumerate(a_grid):
        stream = rngmod.CounterStream(rngmod.derive_seed(master_seed, f"maxineq-{i}"), np.arange(replicates))
        unit_means, unit_ses = sup_moments(a, 1.0, grid_size, replicates, stream, p_grid)
        for A in A_grid:
            gam = A / (2 * a) if isinstance(gamma, str) and gamma.lower() == "g0" else float(gamma)
            for p, m1, s1 in zip(p_grid, unit_means, unit_ses):
                MaxIneqSpec(a, A, gam, p, grid_size, replicates)  # validates the grid point
                lhs, se = A ** (p / 2) * m1, A ** (p / 2) * s1
                rhs = max_ineq_rhs(a, A, gam, p)
                rows.append({"a": a, "A": A, "gamma": gam, "p": p, "lhs_mc": lhs, "stderr": se,
                             "rhs_no_cp": rhs, "implied_cp": 0.0 if lhs == 0 else lhs / rhs})
    return rows


def ou_to_ou_gap_mc(p1: OuParams, p2: OuParams, g, R: int, rng, alpha: int = 256):
    """|E g(Z) - E g(Z~)| from coupled pairs, with paired-difference stderr."""
    from .functionals import DistanceEstimate, evaluate

    if R < 2:
        raise ValueError("R must be >= 2")
    if isinstance(rng, rngmod.CounterStream):
        z1, z2 = coupled_ou_pair(p1, p2, alpha, rng)
    else:
        z1, z2 = coupled_ou_pair(p1, p2, alpha, rng, size=R)
    d = evaluate(g, z1) - evaluate(g, z2)
    value = abs(float(np.mean(d)))
    se = float(np.std(d, ddof=1) / math.sqrt(d.size))
    return DistanceEstimate(value, se, d.size, "ou_coupled_gap")
