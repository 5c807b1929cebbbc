"""SG(L)D and linearized iterates, Q-products and the exchangeable pair.

Two layers live here. The single-path functions (``run_sgld``,
``run_linearized``, ``eta_closed_form``, ...) take a materialised
:class:`BatchDraw` and mirror the defining recursions literally. The block
kernels (``_sgld_block``, ``_linearized_block``, ``coupled_block``) run many replicates at once off a
:class:`~sgldscale.rng.CounterStream`; ``BatchDraw.generate`` pulls its numbers
from the same streams so both layers agree bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .models import GlmModel, ModelConstants, gradients


class IterateOverflowError(ArithmeticError):
    def __init__(self, step: int):
        super().__init__(f"non-finite iterate at step {step}")
        self.step = step


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class RawSetting:
    kind: str = "raw"


@dataclass(frozen=True)
class StatisticalSetting:
    w1: float
    w2: float
    m: float
    n: int
    n_epochs_check: float
    alpha_exact: float
    kind: str = "statistical"


@dataclass(frozen=True)
class NumericalSetting:
    c1: float
    c2: float
    c3: float
    alpha_exact: float
    kind: str = "numerical"


@dataclass(frozen=True)
class AlgoConfig:
    """Step size, batch size, temperature and path scalings.

    ``beta_inv = 0`` encodes beta = infinity (plain SGD).
    """

    h: float
    b: int
    beta_inv: float
    alpha: int
    w: float
    master_seed: int = 0
    setting: RawSetting | StatisticalSetting | NumericalSetting = field(default_factory=RawSetting)

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"h must be positive, got {self.h}")
        if int(self.b) != self.b or self.b < 1:
            raise ValueError(f"b must be a positive integer, got {self.b}")
        if not (math.isfinite(self.beta_inv) and self.beta_inv >= 0):
            raise ValueError(f"beta_inv must be >= 0, got {self.beta_inv}")
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError(f"alpha must be a positive integer, got {self.alpha}")
        if not (math.isfinite(self.w) and self.w > 0):
            raise ValueError(f"w must be positive, got {self.w}")
        object.__setattr__(self, "b", int(self.b))
        object.__setattr__(self, "alpha", int(self.alpha))
        object.__setattr__(self, "master_seed", rngmod.check_seed(self.master_seed))

    @classmethod
    def statistical(cls, n: int, b: int, w1: float, w2: float, m: float, master_seed: int = 0):
        """h = 2 w1 b / n, beta = n / w2, alpha = m n / b, w = sqrt(n)."""
        if n < 1 or b < 1:
            raise ValueError("n and b must be positive")
        if w1 <= 0 or w2 < 0 or m <= 0:
            raise ValueError("need w1 > 0, w2 >= 0, m > 0")
        alpha_exact = m * n / b
        alpha = max(1, int(round(alpha_exact)))
        setting = StatisticalSetting(w1, w2, m, int(n), m, alpha_exact)
        return cls(2.0 * w1 * b / n, b, w2 / n, alpha, math.sqrt(n), master_seed, setting)

    @classmethod
    def numerical(cls, h: float, b: int, beta_inv: float, c1: float = 1.0, c2: float = 1.0,
                  c3: float = 1.0, master_seed: int = 0):
        """alpha = round(c1 / h), w = c2 min(sqrt(b/h), sqrt(beta)), b <= c3 h^-4."""
        if b > c3 * h**-4:
            raise ValueError(f"b = {b} exceeds c3 * h^-4 = {c3 * h ** -4:g}")
        alpha_exact = c1 / h
        alpha = max(1, int(round(alpha_exact)))
        scale = math.sqrt(b / h)
        if beta_inv > 0:
            scale = min(scale, math.sqrt(1.0 / beta_inv))
        setting = NumericalSetting(c1, c2, c3, alpha_exact)
        return cls(h, b, beta_inv, alpha, c2 * scale, master_seed, setting)

    def with_seed(self, seed: int) -> "AlgoConfig":
        return replace(self, master_seed=seed)


# ---------------------------------------------------------------- draws


@dataclass
class BatchDraw:
    """All randomness for one replicate (0-based indices)."""

    indices: np.ndarray  # (alpha, b)
    gauss: np.ndarray  # (alpha,)
    swap_index: int = 0
    swap_batch: np.ndarray | None = None  # (b,)
    swap_gauss: float = 0.0

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.ndim == 1:
            self.indices = self.indices[:, None]
        self.gauss = np.asarray(self.gauss, dtype=float).ravel()
        if self.indices.shape[0] != self.gauss.size:
            raise ValueError("indices and gauss disagree on alpha")
        if self.swap_batch is None:
            self.swap_batch = self.indices[self.swap_index].copy() if self.alpha else np.zeros(0, np.int64)
        self.swap_batch = np.asarray(self.swap_batch, dtype=np.int64).ravel()
        if not 0 <= self.swap_index < max(self.alpha, 1):
            raise ValueError(f"swap_index {self.swap_index} outside 0..alpha-1")

    @property
    def alpha(self) -> int:
        return self.gauss.size

    @property
    def b(self) -> int:
        return self.indices.shape[1]

    @classmethod
    def generate(cls, master_seed: int, row: int, n: int, b: int, alpha: int) -> "BatchDraw":
        src = StreamSource(rngmod.CounterStream(master_seed, [row]), n, b, alpha)
        idx = np.stack([src.indices(k)[0] for k in range(alpha)])
        gauss = np.array([src.gauss(k)[0] for k in range(alpha)])
        return cls(idx, gauss, int(src.swap_index()[0]), src.swap_batch()[0], float(src.swap_gauss()[0]))


class StreamSource:
    """Step-wise view of a CounterStream for a block of rows."""

    def __init__(self, stream: rngmod.CounterStream, n: int, b: int, alpha: int):
        self.stream, self.n, self.b, self.alpha = stream, n, b, alpha
        self._slots = np.arange(b, dtype=np.uint64)

    def __len__(self):
        return len(self.stream)

    def indices(self, k: int) -> np.ndarray:
        return self.stream.integers(rngmod.BATCH, np.uint64(k * self.b) + self._slots, self.n)

    def gauss(self, k: int) -> np.ndarray:
        return self.stream.normal(rngmod.GAUSS, [k])[:, 0]

    def swap_index(self) -> np.ndarray:
        return self.stream.integers(rngmod.SWAP_K, [0], self.alpha)[:, 0]

    def swap_batch(self) -> np.ndarray:
        return self.stream.integers(rngmod.SWAP_BATCH, self._slots, self.n)

    def swap_gauss(self) -> np.ndarray:
        return self.stream.normal(rngmod.SWAP_GAUSS, [0])[:, 0]


class DrawSource:
    """Adapter presenting one BatchDraw with the StreamSource interface."""

    def __init__(self, draw: BatchDraw):
        self.draw = draw

    def __len__(self):
        return 1

    def indices(self, k):
        return self.draw.indices[k][None, :]

    def gauss(self, k):
        return self.draw.gauss[k : k + 1]

    def swap_index(self):
        return np.array([self.draw.swap_index])

    def swap_batch(self):
        return self.draw.swap_batch[None, :]

    def swap_gauss(self):
        return np.array([self.draw.swap_gauss])


# ---------------------------------------------------------------- block kernels


def _check_draw(config: AlgoConfig, draw: BatchDraw):
    if draw.alpha != config.alpha or draw.b != config.b:
        raise ValueError(
            f"draw shape (alpha={draw.alpha}, b={draw.b}) does not match config "
            f"(alpha={config.alpha}, b={config.b})"
        )


def _sgld_block(model: GlmModel, theta_hat: float, config: AlgoConfig, src) -> np.ndarray:
    """Centered SGLD iterates theta_k - theta_hat, shape (R, alpha+1)."""
    R, a = len(src), config.alpha
    out = np.empty((R, a + 1))
    out[:, 0] = 0.0
    hb = config.h / config.b
    noise = math.sqrt(2.0 * config.h * config.beta_inv)
    delta = np.zeros(R)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(a):
            idx = src.indices(k)
            g = gradients(model, idx, theta_hat + delta[:, None]).sum(axis=1)
            delta = delta + hb * g + noise * src.gauss(k)
            if not np.all(np.isfinite(delta)):
                raise IterateOverflowError(k + 1)
            out[:, k + 1] = delta
    return out


def _linearized_block(psi, sigma, config: AlgoConfig, src, swap: bool = False) -> np.ndarray:
    """Linearized iterates eta_k; with ``swap`` step K uses the replacement draws."""
    R, a = len(src), config.alpha
    out = np.empty((R, a + 1))
    out[:, 0] = 0.0
    hb = config.h / config.b
    noise = math.sqrt(2.0 * config.h * config.beta_inv)
    eta = np.zeros(R)
    if swap:
        K = src.swap_index()
        sw_idx, sw_xi = src.swap_batch(), src.swap_gauss()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(a):
            idx, xi = src.indices(k), src.gauss(k)
            if swap:
                hit = K == k
                if np.any(hit):
                    idx = np.where(hit[:, None], sw_idx, idx)
                    xi = np.where(hit, sw_xi, xi)
            eta = eta + hb * (psi[idx].sum(axis=1) - sigma[idx].sum(axis=1) * eta) + noise * xi
            if not np.all(np.isfinite(eta)):
                raise IterateOverflowError(k + 1)
            out[:, k + 1] = eta
    return out


# ---------------------------------------------------------------- single-path API


def run_sgld(model: GlmModel, constants: ModelConstants, config: AlgoConfig, draw: BatchDraw) -> np.ndarray:
    """theta_0 .. theta_alpha started at theta_hat."""
    _check_draw(config, draw)
    centered = _sgld_block(model, constants.theta_hat, config, DrawSource(draw))[0]
    return constants.theta_hat + centered


def run_linearized(constants: ModelConstants, config: AlgoConfig, draw: BatchDraw) -> np.ndarray:
    """eta_0 .. eta_alpha in centered coordinates."""
    _check_draw(config, draw)
    return _linearized_block(constants.psi, constants.sigma, config, DrawSource(draw))[0]


def q_product(sigma, draw: BatchDraw, j: int, k: int, h: float, b: int) -> float:
    """prod_{m=j}^{k-1} (1 - (h/b) sum_i sigma_{I(m,i)}); 1 when j >= k."""
    if not (0 <= j <= draw.alpha and 0 <= k <= draw.alpha):
        raise IndexError(f"need 0 <= j, k <= alpha = {draw.alpha}")
    sigma = np.asarray(sigma, dtype=float)
    out = 1.0
    for m in range(j, k):
        out *= 1.0 - (h / b) * float(np.sum(sigma[draw.indices[m]]))
    return out


def eta_closed_form(constants: ModelConstants, config: AlgoConfig, draw: BatchDraw) -> np.ndarray:
    """eta_k = sum_{j<k} Q(j+1, k) * innovation_j, evaluated without the recursion."""
    _check_draw(config, draw)
    a, hb = config.alpha, config.h / config.b
    noise = math.sqrt(2.0 * config.h * config.beta_inv)
    innov = hb * constants.psi[draw.indices].sum(axis=1) + noise * draw.gauss
    factors = 1.0 - hb * constants.sigma[draw.indices].sum(axis=1)
    eta = np.zeros(a + 1)
    for k in range(1, a + 1):
        # q[j] = Q(j+1, k) for j = 0..k-1, built right to left
        q = np.ones(k)
        if k > 1:
            q[: k - 1] = np.cumprod(factors[1:k][::-1])[::-1]
        eta[k] = float(np.dot(q, innov[:k]))
    return eta


def rescale(iterates, config: AlgoConfig, theta_hat: float = 0.0) -> np.ndarray:
    """Grid values w * (theta_k - theta_hat)."""
    it = np.asarray(iterates, dtype=float)
    if it.shape[-1] != config.alpha + 1:
        raise ValueError(f"expected {config.alpha + 1} iterates, got {it.shape[-1]}")
    return config.w * (it - theta_hat)


def exchangeable_pair(constants: ModelConstants, config: AlgoConfig, draw: BatchDraw):
    """(linearized path, path with step K redrawn), both rescaled by w."""
    _check_draw(config, draw)
    src = DrawSource(draw)
    y = _linearized_block(constants.psi, constants.sigma, config, src)[0]
    y2 = _linearized_block(constants.psi, constants.sigma, config, src, swap=True)[0]
    return config.w * y, config.w * y2


def pair_difference_oracle(constants: ModelConstants, config: AlgoConfig, draw: BatchDraw) -> np.ndarray:
    """Closed form of the pair difference on the grid."""
    _check_draw(config, draw)
    psi, sigma = constants.psi, constants.sigma
    K, hb = draw.swap_index, config.h / config.b
    eta = run_linearized(constants, config, draw)
    I, I2 = draw.indices[K], draw.swap_batch
    jump = hb * ((-sigma[I].sum() + sigma[I2].sum()) * eta[K] + psi[I].sum() - psi[I2].sum())
    jump += math.sqrt(2.0 * config.h * config.beta_inv) * (draw.gauss[K] - draw.swap_gauss)
    out = np.zeros(config.alpha + 1)
    for m in range(K + 1, config.alpha + 1):
        out[m] = config.w * q_product(sigma, draw, K + 1, m, config.h, config.b) * jump
    return out


# ---------------------------------------------------------------- ensembles


@dataclass
class PathEnsemble:
    values: np.ndarray  # (R, alpha+1)
    alpha: int
    w: float
    label: str
    seed_base: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.alpha + 1:
            raise ValueError(f"values must have shape (R, {self.alpha + 1}), got {self.values.shape}")

    @property
    def R(self) -> int:
        return self.values.shape[0]


class PathGenerator:
    """Base for anything that can fill a block of replicate rows."""

    alpha: int
    w: float
    label: str
    master_seed: int

    def block(self, rows: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def meta(self) -> dict:
        return {}


class SgldGenerator(PathGenerator):
    """Rescaled SG(L)D paths Y (``kind='sgld'``), linearized paths (``'linearized'``)
    or the swapped linearized path of the exchangeable pair (``'swapped'``)."""

    def __init__(self, model: GlmModel | None, constants: ModelConstants, config: AlgoConfig,
                 kind: str = "sgld", label: str | None = None):
        if kind not in ("sgld", "linearized", "swapped"):
            raise ValueError(f"unknown path kind {kind!r}")
        if kind == "sgld" and model is None:
            raise ValueError("sgld paths need the model")
        self.model, self.constants, self.config, self.kind = model, constants, config, kind
        self.alpha, self.w = config.alpha, config.w
        self.master_seed = config.master_seed
        self.label = label or kind

    def source(self, rows) -> StreamSource:
        c = self.config
        return StreamSource(rngmod.CounterStream(c.master_seed, rows), self.constants.n, c.b, c.alpha)

    def block(self, rows):
        src = self.source(rows)
        if self.kind == "sgld":
            out = _sgld_block(self.model, self.constants.theta_hat, self.config, src)
        else:
            out = _linearized_block(self.constants.psi, self.constants.sigma, self.config, src,
                                    swap=self.kind == "swapped")
        return self.w * out

    def meta(self):
        c = self.config
        m = {"kind": self.kind, "h": c.h, "b": c.b, "beta_inv": c.beta_inv, "alpha": c.alpha, "w": c.w,
             "theta_hat": self.constants.theta_hat, "setting": c.setting.kind}
        alpha_exact = getattr(c.setting, "alpha_exact", None)
        if alpha_exact is not None:
            m["alpha_exact"] = alpha_exact
        return m


DEFAULT_CHUNK = 4096


def row_blocks(R: int, chunk: int = DEFAULT_CHUNK):
    return [np.arange(s, min(s + chunk, R), dtype=np.uint64) for s in range(0, R, chunk)]


def map_blocks(fn, R: int, threads: int = 1, chunk: int = DEFAULT_CHUNK):
    """Apply ``fn(rows)`` over fixed row blocks; results come back in row order."""
    blocks = row_blocks(R, chunk)
    if threads <= 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def make_ensemble(generator: PathGenerator, R: int, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> PathEnsemble:
    """R replicate rows; row r depends only on (master_seed, r)."""
    if R < 1:
        raise ValueError("R must be >= 1")
    try:
        values = np.empty((R, generator.alpha + 1))
    except MemoryError as exc:
        raise MemoryError(
            f"cannot allocate ensemble of {R} x {generator.alpha + 1} doubles "
            f"({8 * R * (generator.alpha + 1) / 2**30:.1f} GiB)"
        ) from exc

    def fill(rows):
        values[rows.astype(np.int64)] = generator.block(rows)

    map_blocks(fill, R, threads, chunk)
    return PathEnsemble(values, generator.alpha, generator.w, generator.label, generator.master_seed,
                        generator.meta())


def coupled_block(model: GlmModel, constants: ModelConstants, config: AlgoConfig, rows,
                  moment_orders=()) -> dict:
    """SGLD and linearized recursions driven by the same draws, reduced on the fly.

    Returns per-row grid averages ``avg_Y`` and ``avg_lin`` (rescaled by w, sum
    over k = 1..alpha) and, for each order q in ``moment_orders``, the per-step
    sums over rows of |theta_k - theta_hat|^q under key ``('moment', q)``.
    """
    src = StreamSource(rngmod.CounterStream(config.master_seed, rows), constants.n, config.b, config.alpha)
    R, a = len(src), config.alpha
    hb = config.h / config.b
    noise = math.sqrt(2.0 * config.h * config.beta_inv)
    psi, sigma, th = constants.psi, constants.sigma, constants.theta_hat
    delta, eta = np.zeros(R), np.zeros(R)
    acc_y, acc_l = np.zeros(R), np.zeros(R)
    moments = {q: np.zeros(a + 1) for q in moment_orders}
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(a):
            idx, xi = src.indices(k), src.gauss(k)
            g = gradients(model, idx, th + delta[:, None]).sum(axis=1)
            delta = delta + hb * g + noise * xi
            eta = eta + hb * (psi[idx].sum(axis=1) - sigma[idx].sum(axis=1) * eta) + noise * xi
            if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(eta))):
                raise IterateOverflowError(k + 1)
            acc_y += delta
            acc_l += eta
            for q, arr in moments.items():
                arr[k + 1] = np.sum(np.abs(delta) ** q)
    out = {"avg_Y": config.w * acc_y / a, "avg_lin": config.w * acc_l / a}
    for q, arr in moments.items():
        out[("moment", q)] = arr
    return out
