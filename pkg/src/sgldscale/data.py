"""Synthetic GLM datasets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .models import Family, GlmModel, ModelError


@dataclass(frozen=True)
class SynthSpec:
    """Covariates uniform on [-scale, scale]; responses drawn from the GLM at ``theta_true``."""

    family: Family
    n: int
    scale: float = 1.0
    theta_true: float = 1.0
    intercept: float = 0.0
    noise: float = 1.0  # linear family only
    domain: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n < 2:
            raise ModelError("synthetic data need n >= 2")
        if self.scale < 0:
            raise ModelError("covariate scale must be nonnegative")
        if self.scale == 0 and self.family is Family.LOGISTIC:
            raise ModelError("degenerate spec: logistic data with all covariates zero")
        if self.noise < 0:
            raise ModelError("noise must be nonnegative")


def synth_data(spec: SynthSpec, seed: int) -> GlmModel:
    gen = np.random.default_rng(np.random.SeedSequence(int(seed)))
    x = gen.uniform(-spec.scale, spec.scale, size=spec.n)
    u = spec.theta_true * x + spec.intercept
    if spec.family is Family.LINEAR:
        y = u + spec.noise * gen.standard_normal(spec.n)
    elif spec.family is Family.LOGISTIC:
        y = (gen.random(spec.n) < expit(u)).astype(float)
        if np.all(y == y[0]):
            raise ModelError("degenerate logistic sample: all responses identical")
    else:
        y = gen.poisson(np.exp(u)).astype(float)
    domain = spec.domain
    if spec.family is Family.POISSON and domain is None:
        domain = (spec.theta_true - 1.0, spec.theta_true + 1.0)
    return GlmModel(spec.family, x, y, spec.intercept, domain)
