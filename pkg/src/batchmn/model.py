"""Isotropic Gaussian linear model ``Y = X beta + W`` and its normalized risk."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidXi, NonIntegerDimension


class BetaMode(str, enum.Enum):
    """How the direction of ``beta`` is drawn (its norm is always ``r``)."""

    UNIFORM_SPHERE = "uniform"
    FIRST_AXIS = "first-axis"


@dataclass(frozen=True)
class ModelParams:
    n: int
    p: int
    r: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1 or int(self.p) != self.p or self.p < 1:
            raise ValueError(f"n and p must be positive integers, got n={self.n}, p={self.p}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")

    @property
    def gamma(self) -> float:
        return self.p / self.n

    @property
    def xi(self) -> float:
        return self.r**2 / (self.r**2 + self.sigma**2)

    @property
    def snr(self) -> float:
        return math.inf if self.sigma == 0 else self.r**2 / self.sigma**2


def make_params(n: int, gamma: float, xi: float, r: float = 1.0) -> ModelParams:
    """Build params from ``(n, gamma, xi, r)``, snapping ``p = round(n*gamma)``.

    Downstream formulas should use ``params.gamma`` (the exact ``p/n``), not
    the ``gamma`` passed in here.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 < xi <= 1:
        raise InvalidXi(f"xi must lie in (0, 1], got {xi}")
    p_real = n * gamma
    p = round(p_real)
    if abs(p_real - p) > 1e-9:
        raise NonIntegerDimension(f"n*gamma = {p_real!r} is not an integer")
    if p < 1:
        raise NonIntegerDimension(f"n*gamma = {p_real!r} gives p < 1")
    sigma = 0.0 if xi == 1 else r * math.sqrt((1 - xi) / xi)
    return ModelParams(n=int(n), p=int(p), r=float(r), sigma=sigma)


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *stream)``.

    Streams with different keys are independent, and each one is
    reproducible regardless of which other streams were drawn before it.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Instance:
    params: ModelParams
    X: np.ndarray
    beta: np.ndarray
    W: np.ndarray
    Y: np.ndarray = field(repr=False)


def draw_beta(p: int, r: float, mode: BetaMode, rng: np.random.Generator) -> np.ndarray:
    mode = BetaMode(mode)
    if mode is BetaMode.FIRST_AXIS:
        beta = np.zeros(p)
        beta[0] = r
        return beta
    v = rng.standard_normal(p)
    return r * v / np.linalg.norm(v)


def generate_instance(
    params: ModelParams,
    beta_mode: BetaMode = BetaMode.UNIFORM_SPHERE,
    seed: int = 0,
    stream: tuple[int, ...] = (),
) -> Instance:
    """Draw one realization of the model, deterministic in ``(seed, stream)``."""
    rng = rng_for(seed, *stream)
    X = rng.standard_normal((params.n, params.p))
    beta = draw_beta(params.p, params.r, beta_mode, rng)
    W = params.sigma * rng.standard_normal(params.n)
    Y = X @ beta + W
    return Instance(params=params, X=X, beta=beta, W=W, Y=Y)


def normalized_risk(beta_hat, beta, r: float) -> float:
    """``||beta_hat - beta||^2 / r^2`` for a single realization."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if beta_hat.shape != beta.shape:
        raise DimensionMismatch(f"shapes differ: {beta_hat.shape} vs {beta.shape}")
    d = beta_hat - beta
    return float(d @ d) / r**2
