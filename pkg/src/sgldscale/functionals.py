"""Path functionals, functional gaps and path-space distance estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .ou import OuParams, ou_covariance
from .sgld import PathEnsemble

G1_NORM = 1.53
G2_NORM = 3.53

KINDS = ("average", "squared_average", "clipped_sup", "eval_clip", "clipped_average")


class GridMismatchError(ValueError):
    pass


class UncertifiedFunctionalError(ValueError):
    pass


@dataclass(frozen=True)
class PathFunctional:
    """A test functional on grid step paths.

    kind:
        ``average``          g1 = integral of X over [0, 1]
        ``squared_average``  g2 = g1 squared
        ``clipped_sup``      min(sup |X|, c)
        ``eval_clip``        X_t clipped to [-c, c]
        ``clipped_average``  g1 clipped to [-c, c]
    ``scale`` multiplies the value (and the certified norm bound).
    """

    kind: str
    c: float = 1.0
    t: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.c <= 0:
            raise ValueError("clip level c must be positive")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("evaluation time t must lie in [0, 1]")

    @property
    def m_norm_bound(self) -> float | None:
        """Certified upper bound on the M-norm; None outside the smooth class."""
        if self.kind == "average":
            return G1_NORM * abs(self.scale)
        if self.kind == "squared_average":
            return G2_NORM * abs(self.scale)
        return None

    @property
    def bw_certified(self) -> bool:
        """Bounded by 1 and 1-Lipschitz in sup norm."""
        clipped = self.kind in ("clipped_sup", "eval_clip", "clipped_average")
        return clipped and abs(self.scale) * self.c <= 1.0

    @property
    def name(self) -> str:
        base = {
            "average": "g1",
            "squared_average": "g2",
            "clipped_sup": f"clipsup[c={self.c:g}]",
            "eval_clip": f"evalclip[t={self.t:g},c={self.c:g}]",
            "clipped_average": f"clipavg[c={self.c:g}]",
        }[self.kind]
        return base if self.scale == 1.0 else f"{self.scale:g}*{base}"

    def scaled(self, factor: float) -> "PathFunctional":
        return PathFunctional(self.kind, self.c, self.t, self.scale * factor)


def g1() -> PathFunctional:
    return PathFunctional("average")


def g2() -> PathFunctional:
    return PathFunctional("squared_average")


def grid_average(values) -> np.ndarray:
    """alpha^-1 sum_{k=1}^{alpha} X_{k/alpha} along the last axis."""
    v = np.asarray(values, dtype=float)
    if v.shape[-1] < 2:
        raise ValueError("path needs at least two grid values")
    return np.mean(v[..., 1:], axis=-1)


def evaluate(g: PathFunctional, path):
    """Value of ``g`` on one path (1-D) or on every row of a 2-D array."""
    v = np.asarray(path, dtype=float)
    if v.size == 0:
        raise ValueError("empty path")
    if g.kind == "average":
        out = grid_average(v)
    elif g.kind == "squared_average":
        out = grid_average(v) ** 2
    elif g.kind == "clipped_sup":
        out = np.minimum(np.max(np.abs(v), axis=-1), g.c)
    elif g.kind == "eval_clip":
        alpha = v.shape[-1] - 1
        k = min(int(math.floor(alpha * g.t + 1e-12 * alpha)), alpha)
        out = np.clip(v[..., k], -g.c, g.c)
    else:
        out = np.clip(grid_average(v), -g.c, g.c)
    out = g.scale * out
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    stderr: float | None
    replicates: int
    method: str
    resolution: float | None = None
    censored: bool = False

    def csv_row(self, label_a: str, label_b: str) -> list:
        spread = self.stderr if self.stderr is not None else self.resolution
        return [self.method, self.value, spread, self.replicates, label_a, label_b]


def _same_grid(a: PathEnsemble, b: PathEnsemble):
    if a.alpha != b.alpha:
        raise GridMismatchError(f"grid mismatch: alpha {a.alpha} vs {b.alpha}")


def gap_from_values(va, vb, norm: float | None, method: str, same: bool = False) -> DistanceEstimate:
    va, vb = np.asarray(va, dtype=float), np.asarray(vb, dtype=float)
    norm = 1.0 if norm is None else norm
    value = abs(float(np.mean(va)) - float(np.mean(vb))) / norm
    if same:
        se = 0.0
    else:
        var_a = float(np.var(va, ddof=1)) / va.size if va.size > 1 else 0.0
        var_b = float(np.var(vb, ddof=1)) / vb.size if vb.size > 1 else 0.0
        se = math.sqrt(var_a + var_b) / norm
    return DistanceEstimate(value, se, int(min(va.size, vb.size)), method)


def functional_gap(ensA: PathEnsemble, ensB: PathEnsemble, g: PathFunctional) -> DistanceEstimate:
    """|mean_A g - mean_B g| divided by the certified M-norm bound of g."""
    _same_grid(ensA, ensB)
    same = ensA is ensB
    va = evaluate(g, ensA.values)
    vb = va if same else evaluate(g, ensB.values)
    return gap_from_values(va, vb, g.m_norm_bound, f"gap_{g.name}", same)


# ---------------------------------------------------------------- iterate average variance


def ou_average_variance(params: OuParams, nodes: int = 1024) -> float:
    """Var of the time average of Z over [0, 1]: double integral of the covariance.

    The covariance has a kink on the diagonal, so the square is split there and
    each triangle is mapped to the unit square (s = t v) before tensor
    Gauss-Legendre with ``nodes`` points per axis.
    """
    if params.A == 0.0:
        return 0.0
    x, wts = roots_legendre(nodes)
    u, wu = 0.5 * (x + 1.0), 0.5 * wts
    t = u[:, None]
    s = t * u[None, :]
    vals = ou_covariance(params, t, s) * t
    return float(2.0 * wu @ vals @ wu)


@dataclass(frozen=True)
class VarianceGap:
    var_y: float
    var_y_stderr: float
    var_z_analytic: float
    gap: float
    mean_y: float
    mean_y_stderr: float
    rhs_bound: float | None


def variance_gap(ensY: PathEnsemble, paramsZ: OuParams, eps: float | None = None) -> VarianceGap:
    if ensY.R < 2:
        raise ValueError("variance needs at least two replicates")
    vals = evaluate(g1(), ensY.values)
    return variance_gap_from_values(vals, paramsZ, eps)


def variance_gap_from_values(vals, paramsZ: OuParams, eps: float | None = None) -> VarianceGap:
    vals = np.asarray(vals, dtype=float)
    n = vals.size
    mean = float(np.mean(vals))
    var = float(np.var(vals, ddof=1))
    # stderr of the sample variance from the fourth central moment
    m4 = float(np.mean((vals - mean) ** 4))
    var_se = math.sqrt(max(m4 - var**2 * (n - 3) / (n - 1), 0.0) / n)
    vz = ou_average_variance(paramsZ)
    rhs = None if eps is None else (G1_NORM * abs(mean) + G2_NORM) * eps
    return VarianceGap(var, var_se, vz, abs(var - vz), mean, math.sqrt(var / n), rhs)


# ---------------------------------------------------------------- distances


def _sup_dist(a: np.ndarray, b: np.ndarray, block: int = 256) -> np.ndarray:
    out = np.empty((a.shape[0], b.shape[0]))
    for s in range(0, a.shape[0], block):
        out[s : s + block] = np.max(np.abs(a[s : s + block, None, :] - b[None, :, :]), axis=-1)
    return out


def levy_prokhorov_estimate(ensA: PathEnsemble, ensB: PathEnsemble, eps_grid, max_paths: int | None = 2000
                            ) -> DistanceEstimate:
    """Resolution-limited surrogate for the Levy-Prokhorov distance.

    Test sets are closed sup-norm balls centred at the sample paths of both
    ensembles with radii from ``eps_grid``; the eps-enlargement of such a ball
    is the open ball with radius increased by eps. Returns the smallest grid eps
    for which both one-sided plug-in inequalities hold on every test set. If
    none does, the grid maximum is returned with ``censored`` set.
    ``max_paths`` caps each ensemble (leading rows) to bound the quadratic cost.
    """
    _same_grid(ensA, ensB)
    grid = np.asarray(eps_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("eps_grid must be nonempty")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("eps_grid must be nonnegative and strictly increasing")
    a, b = ensA.values, ensB.values
    if max_paths is not None:
        a, b = a[:max_paths], b[:max_paths]
    centers = np.vstack([b, a])
    da = np.sort(_sup_dist(centers, a), axis=1)  # distance of every A path to each center
    db = np.sort(_sup_dist(centers, b), axis=1)
    na, nb = a.shape[0], b.shape[0]

    def closed(d, n, r):  # P[dist <= r]
        return np.array([np.searchsorted(row, r, side="right") for row in d]) / n

    def open_(d, n, r):  # P[dist < r]
        return np.array([np.searchsorted(row, r, side="left") for row in d]) / n

    tol = 1e-12
    closed_a = {r: closed(da, na, r) for r in grid}
    closed_b = {r: closed(db, nb, r) for r in grid}
    chosen, censored = grid[-1], True
    for eps in grid:
        ok = True
        for r in grid:
            pa_k, pb_k = closed_a[r], closed_b[r]
            pb_e, pa_e = open_(db, nb, r + eps), open_(da, na, r + eps)
            if np.any(pa_k > pb_e + eps + tol) or np.any(pb_k > pa_e + eps + tol):
                ok = False
                break
        if ok:
            chosen, censored = eps, False
            break
    i = int(np.searchsorted(grid, chosen))
    resolution = float(grid[i] - grid[i - 1]) if i > 0 else float(grid[0])
    return DistanceEstimate(float(chosen), None, int(min(na, nb)), "lp_surrogate", resolution, censored)


def bounded_wasserstein_lower(ensA: PathEnsemble, ensB: PathEnsemble, dictionary) -> DistanceEstimate:
    """max over a certified dictionary of |mean_A g - mean_B g|."""
    _same_grid(ensA, ensB)
    dictionary = list(dictionary)
    if not dictionary:
        raise ValueError("dictionary must be nonempty")
    bad = [g.name for g in dictionary if not g.bw_certified]
    if bad:
        raise UncertifiedFunctionalError(f"not bounded by 1 and 1-Lipschitz: {', '.join(bad)}")
    best = None
    for g in dictionary:
        est = gap_from_values(evaluate(g, ensA.values), evaluate(g, ensB.values), None, "bw_lower",
                              ensA is ensB)
        if best is None or est.value > best.value:
            best = est
    return best


def parse_dictionary(text: str) -> list[PathFunctional]:
    """Parse ``clipsup:1, evalclip:0.5:1, clipavg:1`` into functionals."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        kind, args = parts[0].strip().lower(), [float(p) for p in parts[1:]]
        if kind == "clipsup" and len(args) == 1:
            out.append(PathFunctional("clipped_sup", c=args[0]))
        elif kind == "evalclip" and len(args) == 2:
            out.append(PathFunctional("eval_clip", t=args[0], c=args[1]))
        elif kind == "clipavg" and len(args) == 1:
            out.append(PathFunctional("clipped_average", c=args[0]))
        else:
            raise ValueError(f"bad dictionary entry {item!r}")
    if not out:
        raise ValueError("empty dictionary")
    return out
