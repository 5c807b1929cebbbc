"""Univariate GLM losses, their linearization and model-level constants.

Gradients are written in ascent form, ``grad l_i(theta) = {y_i - q(theta x_i + b0)} x_i``,
so that the update ``theta + h * grad`` moves toward the critical point and the
negated second derivative ``sigma_i`` is nonnegative.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


class Family(str, enum.Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"
    POISSON = "poisson"


class ModelError(ValueError):
    """Invalid model specification."""


class NoCriticalPointError(ModelError):
    """The score has no sign change on the search bracket."""


class ConvergenceError(ArithmeticError):
    """Root finder hit its iteration cap."""


def link_mean(family: Family, u):
    """Mean function q(u)."""
    if family is Family.LINEAR:
        return u
    if family is Family.LOGISTIC:
        return expit(u)
    with np.errstate(over="ignore"):
        return np.exp(u)


def link_slope(family: Family, u):
    """Derivative q'(u)."""
    if family is Family.LINEAR:
        return np.ones_like(np.asarray(u, dtype=float))
    if family is Family.LOGISTIC:
        p = expit(u)
        return p * (1.0 - p)
    with np.errstate(over="ignore"):
        return np.exp(u)


@dataclass(frozen=True)
class GlmModel:
    """Dataset plus GLM family.

    Args:
        family: one of linear, logistic, poisson.
        x: covariates, length n.
        y: responses, length n.
        intercept: fixed offset b0 inside the link.
        theta_domain: closed interval (lo, hi). Required for poisson, where it
            bounds the smoothness constant.
    """

    family: Family
    x: np.ndarray
    y: np.ndarray
    intercept: float = 0.0
    theta_domain: tuple[float, float] | None = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        x = np.array(self.x, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if x.size < 1 or x.size != y.size:
            raise ModelError(f"x and y need equal length n >= 1 (got {x.size}, {y.size})")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ModelError("x and y must be finite")
        if not math.isfinite(self.intercept):
            raise ModelError("intercept must be finite")
        if fam is Family.LOGISTIC and not np.all((y == 0) | (y == 1)):
            raise ModelError("logistic responses must be 0 or 1")
        if fam is Family.POISSON:
            if np.any(y < 0) or np.any(y != np.round(y)):
                raise ModelError("poisson responses must be nonnegative integers")
            if self.theta_domain is None:
                raise ModelError("poisson models need a bounded theta_domain")
        if self.theta_domain is not None:
            lo, hi = (float(v) for v in self.theta_domain)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ModelError(f"theta_domain must be a bounded interval, got {self.theta_domain}")
            object.__setattr__(self, "theta_domain", (lo, hi))
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class ModelConstants:
    theta_hat: float
    psi: np.ndarray
    sigma: np.ndarray
    L: float
    C_R: float
    Omega: float
    SigmaInfo: float
    psi_moments: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.psi.size

    @classmethod
    def from_arrays(cls, psi, sigma, theta_hat=0.0, C_R=0.0):
        """Constants for hand-built (psi, sigma) vectors, mostly for tests."""
        psi = np.asarray(psi, dtype=float).ravel()
        sigma = np.asarray(sigma, dtype=float).ravel()
        if psi.size != sigma.size or psi.size == 0:
            raise ModelError("psi and sigma must be nonempty and of equal length")
        moments = {q: float(np.mean(psi**q)) for q in (2, 4, 6)}
        return cls(
            theta_hat=float(theta_hat),
            psi=psi,
            sigma=sigma,
            L=max(1.0, float(np.max(sigma))),
            C_R=float(C_R),
            Omega=moments[2],
            SigmaInfo=float(np.mean(sigma)),
            psi_moments=moments,
        )


def _check_index(model_n: int, i) -> int:
    if isinstance(i, (bool, np.bool_)) or int(i) != i:
        raise IndexError(f"index must be an integer, got {i!r}")
    i = int(i)
    if not 0 <= i < model_n:
        raise IndexError(f"index {i} out of range for n = {model_n}")
    return i


def gradient(model: GlmModel, i: int, theta: float) -> float:
    """Ascent-form gradient of the i-th loss (0-based index)."""
    i = _check_index(model.n, i)
    u = theta * model.x[i] + model.intercept
    return float((model.y[i] - link_mean(model.family, u)) * model.x[i])


def gradients(model: GlmModel, idx: np.ndarray, theta) -> np.ndarray:
    """Vectorised gradient for index array ``idx`` and broadcastable ``theta``."""
    x = model.x[idx]
    u = theta * x + model.intercept
    return (model.y[idx] - link_mean(model.family, u)) * x


def linearized_gradient(constants: ModelConstants, i: int, theta: float) -> float:
    i = _check_index(constants.n, i)
    return float(constants.psi[i] - constants.sigma[i] * (theta - constants.theta_hat))


def score(model: GlmModel, theta: float) -> float:
    """Mean gradient n^-1 sum_i grad l_i(theta)."""
    return float(np.mean(gradients(model, np.arange(model.n), theta)))


def _score_slope(model: GlmModel, theta: float) -> float:
    u = theta * model.x + model.intercept
    return float(-np.mean(link_slope(model.family, u) * model.x**2))


def fit_critical_point(model: GlmModel, max_iter: int = 200) -> float:
    """Root of the mean score by safeguarded Newton on a doubling bracket.

    The score is nonincreasing in theta for all three families, so a sign
    change on [-B, B] brackets the unique root (or root interval).
    """
    all_idx = np.arange(model.n)
    tol = 1e-12 * (1.0 + float(np.mean(np.abs(gradients(model, all_idx, 0.0)))))

    def S(t):
        with np.errstate(over="ignore", invalid="ignore"):
            return score(model, t)

    if model.family is Family.LINEAR:
        # least squares has a closed form; exact for noiseless data
        sxx = float(np.dot(model.x, model.x))
        return 0.0 if sxx == 0.0 else float(np.dot(model.x, model.y - model.intercept)) / sxx
    s0 = S(0.0)
    if abs(s0) <= tol:
        return 0.0
    # the score is monotone, so a root exists iff its limit on the far side has the opposite sign
    far = _score_limit(model, 1 if s0 > 0 else -1)
    if (s0 > 0 and not far < 0) or (s0 < 0 and not far > 0):
        raise NoCriticalPointError(
            f"{model.family.value} score never changes sign (separated or degenerate data)"
        )
    bound = 1.0
    while True:
        lo_val, hi_val = S(-bound), S(bound)
        if (s0 > 0 and hi_val < 0) or (s0 < 0 and lo_val > 0):
            break
        bound *= 2.0
        if bound > 2.0**60:
            raise NoCriticalPointError(
                f"{model.family.value} score has no sign change on [-2^60, 2^60]; data are degenerate"
            )
    lo, hi = -bound, bound
    theta = 0.0 if lo < 0.0 < hi else 0.5 * (lo + hi)
    for _ in range(max_iter):
        s = S(theta)
        if abs(s) <= tol:
            return theta
        if s > 0:
            lo = theta
        else:
            hi = theta
        slope = _score_slope(model, theta)
        step_ok = False
        if slope < 0 and math.isfinite(slope):
            cand = theta - s / slope
            if lo < cand < hi and math.isfinite(cand):
                theta, step_ok = cand, True
        if not step_ok:
            theta = 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(theta)):
            if abs(S(theta)) <= tol:
                return theta
            break
    raise ConvergenceError(f"critical point not found within {max_iter} iterations (last theta={theta!r})")


def _score_limit(model: GlmModel, direction: int) -> float:
    """Limit of the summed score as theta -> direction * infinity (nonlinear families)."""
    x, y = model.x, model.y
    pos = direction * x > 0  # link argument -> +inf on these points
    neg = direction * x < 0
    if model.family is Family.LOGISTIC:
        return float(np.sum((y[pos] - 1.0) * x[pos]) + np.sum(y[neg] * x[neg]))
    if np.any(pos):  # Poisson mean explodes
        return -math.inf * direction
    return float(np.sum(y[neg] * x[neg]))


def model_constants(model: GlmModel) -> ModelConstants:
    theta_hat = fit_critical_point(model)
    x, b0 = model.x, model.intercept
    u = theta_hat * x + b0
    psi = (model.y - link_mean(model.family, u)) * x
    sigma = link_slope(model.family, u) * x**2
    if model.family is Family.LINEAR:
        c_r = 0.0
    elif model.family is Family.LOGISTIC:
        c_r = float(np.max(x**2)) / 27.0
    else:
        lo, hi = model.theta_domain
        c_r = 0.0
        for t in (lo, hi, theta_hat):
            with np.errstate(over="ignore"):
                vals = np.exp(np.abs(x * t + b0) + abs(b0)) / 2.0 * x**2
            c_r = max(c_r, float(np.max(vals)))
    moments = {q: float(np.mean(psi**q)) for q in (2, 4, 6)}
    return ModelConstants(
        theta_hat=float(theta_hat),
        psi=psi,
        sigma=sigma,
        L=max(1.0, float(np.max(sigma))),
        C_R=c_r,
        Omega=moments[2],
        SigmaInfo=float(np.mean(sigma)),
        psi_moments=moments,
    )
