"""Finite-p Monte Carlo checks of the probabilistic facts behind the bounds.

Three checks:

* the expected squared noisy projection of ``beta`` onto a random
  ``b``-dimensional subspace followed by a fixed projection ``P``,
* the covariance of the normalized modified noise across two batches,
* the convergence ``p * A_j -> y_j`` of the per-batch coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateProjection, SingularGram
from .linalg import spd_solve
from .model import rng_for

CHUNK = 1 << 16


def _rel_err(empirical, predicted):
    if predicted == 0:
        return abs(empirical)
    return abs(empirical - predicted) / abs(predicted)


@dataclass(frozen=True)
class CheckResult:
    empirical: float
    predicted: float
    rel_err: float
    stderr: float = math.nan


# --- noisy projection -----------------------------------------------------


@dataclass(frozen=True)
class ProjectionScenario:
    p: int = 2000
    b: int = 3
    delta: float = 0.7
    alpha: float = 0.5
    r: float = 1.0
    sigma: float = 0.5
    trials: int = 2000
    seed: int = 0
    # "unit": T_i = 1; "wishart": T_i are eigenvalues of (X X^T / p)^{-1}
    t_mode: str = "unit"

    def __post_init__(self):
        if self.p < 1 or self.b < 1 or self.trials < 1:
            raise ValueError("p, b and trials must be positive")
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        m = self.m
        if m < 1:
            raise ValueError("delta * p rounds to zero")
        if self.alpha < 1 and m >= self.p:
            raise ValueError("alpha < 1 needs a non-trivial complement of the projection range")
        if self.b > self.p:
            raise ValueError("b must not exceed p")
        if self.t_mode not in ("unit", "wishart"):
            raise ValueError(f"unknown t_mode {self.t_mode!r}")

    @property
    def m(self) -> int:
        return int(round(self.delta * self.p))

    @classmethod
    def from_xi(cls, xi: float, r: float = 1.0, **kw) -> ProjectionScenario:
        return cls(r=r, sigma=0.0 if xi == 1 else r * math.sqrt((1 - xi) / xi), **kw)

    @property
    def predicted(self) -> float:
        ar2 = self.alpha * self.r**2
        return ar2 / self.delta * (1 + (self.b - 1) * ar2 / (self.sigma**2 + self.r**2))


def _t_values(rng, s: ProjectionScenario):
    if s.t_mode == "unit":
        return np.ones(s.b)
    Xj = rng.standard_normal((s.b, s.p))
    return 1.0 / np.linalg.eigvalsh(Xj @ Xj.T / s.p)


def _projection_direct(s: ProjectionScenario) -> np.ndarray:
    """Per-trial statistic, building the p-dimensional vectors explicitly."""
    m = s.m
    beta = np.zeros(s.p)
    beta[0] = s.r * math.sqrt(s.alpha)
    if s.alpha < 1:
        beta[m] = s.r * math.sqrt(1 - s.alpha)
    out = np.empty(s.trials)
    for t in range(s.trials):
        rng = rng_for(s.seed, 0, t)
        U, _ = np.linalg.qr(rng.standard_normal((s.p, s.b)))
        T = _t_values(rng, s)
        z = rng.standard_normal(s.b) * np.sqrt(T * s.sigma**2 / s.p)
        v = U @ (U.T @ beta + z)
        pv = v[:m]
        nrm2 = float(pv @ pv)
        if nrm2 < 1e-24:
            raise DegenerateProjection(f"||P D~ beta|| below 1e-12 on trial {t}")
        out[t] = float(pv @ beta[:m]) ** 2 / nrm2
    return out


def _bartlett(rng, df, b, size):
    """Wishart(df, I_b) draws via the Bartlett decomposition."""
    A = np.zeros((size, b, b))
    i = np.arange(b)
    A[:, i, i] = np.sqrt(rng.chisquare(df - i, size=(size, b)))
    lo = np.tril_indices(b, -1)
    A[:, lo[0], lo[1]] = rng.standard_normal((size, lo[0].size))
    return A @ np.swapaxes(A, 1, 2)


def _projection_reduced(s: ProjectionScenario) -> np.ndarray:
    """Same statistic sampled through ``b x b`` sufficient statistics only.

    With ``G`` the ``p x b`` Gaussian matrix whose span defines ``D``, the
    statistic depends on ``G`` only through its rows ``0`` and ``m`` (where
    ``beta`` lives) and the Wishart blocks formed by the remaining rows
    inside and outside the range of ``P``. Exact in distribution, and cheap
    enough for millions of trials.
    """
    if s.t_mode != "unit":
        raise ValueError("the reduced sampler supports t_mode='unit' only")
    m, b = s.m, s.b
    rest = s.p - m - 1 if s.alpha < 1 else s.p - m
    if (m > 1 and m - 1 < b) or (rest > 0 and rest < b):
        raise ValueError("reduced sampler needs at least b rows inside and outside the projection range")
    a0, a1 = s.r * math.sqrt(s.alpha), s.r * math.sqrt(1 - s.alpha)
    chunks = []
    for c, start in enumerate(range(0, s.trials, CHUNK)):
        size = min(CHUNK, s.trials - start)
        rng = rng_for(s.seed, 1, c)
        g0 = rng.standard_normal((size, b))
        gm = rng.standard_normal((size, b))
        in_range = _bartlett(rng, m - 1, b, size) if m > 1 else np.zeros((size, b, b))
        outside = _bartlett(rng, rest, b, size) if rest > 0 else np.zeros((size, b, b))
        if s.alpha == 1:
            gm = np.zeros_like(gm)
        PG = g0[:, :, None] * g0[:, None, :] + in_range
        M = PG + gm[:, :, None] * gm[:, None, :] + outside
        L = np.linalg.cholesky(M)
        # coefficients of the noisy projection in the basis G: mean M^{-1} G^T beta, cov (sigma^2/p) M^{-1}
        w = np.linalg.solve(M, (a0 * g0 + a1 * gm)[..., None])[..., 0]
        e = rng.standard_normal((size, b, 1))
        w += s.sigma / math.sqrt(s.p) * np.linalg.solve(np.swapaxes(L, 1, 2), e)[..., 0]
        num = (a0 * np.einsum("ti,ti->t", w, g0)) ** 2
        den = np.einsum("ti,tij,tj->t", w, PG, w)
        if np.any(den < 1e-24 * s.p):
            raise DegenerateProjection("||P D~ beta|| below 1e-12")
        chunks.append(num / den)
    return np.concatenate(chunks)


def check_noisy_projection(s: ProjectionScenario, method: str = "direct") -> CheckResult:
    """Compare ``p * E<P D~ beta, beta>^2 / ||P D~ beta||^2`` with its asymptotic value.

    ``method="direct"`` orthonormalizes ``b`` Gaussian ``p``-vectors per trial;
    ``method="reduced"`` samples the equivalent low-dimensional statistics.
    """
    if method == "direct":
        stat = _projection_direct(s)
    elif method == "reduced":
        stat = _projection_reduced(s)
    else:
        raise ValueError(f"unknown method {method!r}")
    emp = s.p * float(np.mean(stat))
    se = s.p * float(np.std(stat, ddof=1)) / math.sqrt(stat.size) if stat.size > 1 else math.nan
    return CheckResult(emp, s.predicted, _rel_err(emp, s.predicted), se)


# --- modified-noise covariance --------------------------------------------


def chi_mean(b: int) -> float:
    """``E sqrt(B)`` for ``B ~ chi^2_b``: ``sqrt(2) Gamma((b+1)/2) / Gamma(b/2)``."""
    return math.sqrt(2.0) * math.exp(gammaln((b + 1) / 2) - gammaln(b / 2))


def chi_mean_monte_carlo(b: int, samples: int = 1_000_000, seed: int = 0) -> float:
    rng = rng_for(seed, 2, b)
    return float(np.mean(np.sqrt(np.sum(rng.standard_normal((samples, b)) ** 2, axis=1))))


@dataclass(frozen=True)
class ModifiedNoiseScenario:
    b: int = 1
    r: float = 1.0
    sigma: float = 1.0
    trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("b must be >= 1")
        if self.trials < 2:
            raise ValueError("trials must be >= 2")


@dataclass(frozen=True)
class QCovarianceResult:
    diag: CheckResult
    offdiag: CheckResult


def q_covariance_predicted(b, r, sigma) -> tuple[float, float]:
    s2, r2 = sigma**2, r**2
    q = chi_mean(b)
    return s2 * (s2 * b + r2) / (s2 + r2), s2**2 * q**2 / (s2 + r2)


def check_q_covariance(s: ModifiedNoiseScenario) -> QCovarianceResult:
    """Second moments of ``Q_j = <y_j, w_j> / ||y_j||`` for two independent batches."""
    diag_samples, off_samples = [], []
    for c, start in enumerate(range(0, s.trials, CHUNK)):
        size = min(CHUNK, s.trials - start)
        rng = rng_for(s.seed, 3, c)
        a = rng.standard_normal((size, 2, s.b))
        w = s.sigma * rng.standard_normal((size, 2, s.b))
        y = s.r * a + w
        ny = np.linalg.norm(y, axis=2)
        Q = np.where(ny > 0, np.sum(y * w, axis=2) / np.where(ny > 0, ny, 1.0), 0.0)
        diag_samples.append(0.5 * (Q[:, 0] ** 2 + Q[:, 1] ** 2))
        off_samples.append(Q[:, 0] * Q[:, 1])
    pd, po = q_covariance_predicted(s.b, s.r, s.sigma)
    out = []
    for samples, pred in ((np.concatenate(diag_samples), pd), (np.concatenate(off_samples), po)):
        emp = float(np.mean(samples))
        se = float(np.std(samples, ddof=1)) / math.sqrt(samples.size)
        out.append(CheckResult(emp, pred, _rel_err(emp, pred), se))
    return QCovarianceResult(*out)


# --- coefficient convergence ---------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    p: int
    coef_rel_err: float
    coef_rel_rms: float
    yprime_rel_err: float


def check_modified_convergence(p_list, b=1, r=1.0, sigma=0.5, trials=200, seed=0) -> list[ConvergenceRow]:
    """Per ``p``: mean of ``||p A_j - y_j|| / ||y_j||`` and of ``|p Y'_j - ||y_j||^2| / ||y_j||^2``.

    ``beta`` is taken along the first axis (the construction is
    rotation invariant).
    """
    rows = []
    for p in p_list:
        if p < 10 * b:
            raise ValueError(f"p={p} must be at least 10*b")
        coef, ypr = np.empty(trials), np.empty(trials)
        for t in range(trials):
            rng = rng_for(seed, 4, p, t)
            X = rng.standard_normal((b, p))
            y = r * X[:, 0] + sigma * rng.standard_normal(b)
            A = spd_solve(X @ X.T, y)
            ny2 = float(y @ y)
            if ny2 == 0:
                raise SingularGram("all-zero batch samples")
            coef[t] = np.linalg.norm(p * A - y) / math.sqrt(ny2)
            ypr[t] = abs(p * float(A @ y) - ny2) / ny2
        rows.append(ConvergenceRow(int(p), float(coef.mean()), float(np.sqrt(np.mean(coef**2))),
                                   float(ypr.mean())))
    return rows
