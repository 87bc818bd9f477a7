"""Closed-form asymptotic risks, bounds and optimal batch sizes.

All risks are normalized by ``r^2`` and are limits as ``n, p -> inf`` with
``gamma = p/n`` fixed. ``xi = r^2 / (r^2 + sigma^2)`` is the normalized SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError


@dataclass(frozen=True)
class BoundPair:
    bias_term: float
    noise_term: float

    @property
    def total(self) -> float:
        return self.bias_term + self.noise_term


@dataclass(frozen=True)
class BatchChoice:
    """A batch size that may be the distinguished value "infinite"."""

    value: int | None

    def __post_init__(self):
        if self.value is not None and (int(self.value) != self.value or self.value < 1):
            raise ValueError(f"finite batch size must be a positive integer, got {self.value}")

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def __float__(self):
        return math.inf if self.value is None else float(self.value)

    def __str__(self):
        return "inf" if self.value is None else str(self.value)


INFINITE = BatchChoice(None)


def _check_xi(xi, closed=True):
    ok = 0 < xi <= 1 if closed else 0 < xi < 1
    if not ok:
        raise DomainError(f"xi must lie in (0, 1{']' if closed else ')'}, got {xi}")


def _check_gb(b, gamma):
    if b < 1:
        raise DomainError(f"batch size must be >= 1, got {b}")
    if not gamma * b > 1:
        raise DomainError(f"bounds need gamma*b > 1, got gamma={gamma}, b={b}")


def mn_asymptotic_risk(gamma: float, xi: float) -> float:
    if not gamma > 1:
        raise DomainError(f"min-norm risk needs gamma > 1, got {gamma}")
    _check_xi(xi)
    return 1 - 1 / gamma + (1 - xi) / xi / (gamma - 1)


def _ub_bias(b, gamma, xi):
    return (gamma * b - 1) / (gamma * b + (b - 1) * xi)


def _lb_bias(b, gamma, xi):
    return (1 - 1 / (gamma * b)) ** (1 + (b - 1) * xi)


def c_factor(b: float, gamma: float, xi: float) -> float:
    """Multiplicative gap between the lower and upper noise bounds."""
    _check_gb(b, gamma)
    u = (1 + (b - 1) * xi) / (gamma * b - 1)
    return 1 - u / (1 + u)


def bmn_upper_bound(b: float, gamma: float, xi: float) -> BoundPair:
    _check_gb(b, gamma)
    _check_xi(xi)
    noise = (1 - xi) / xi * (b - (b - 1) * xi) / (gamma * b - 1)
    return BoundPair(_ub_bias(b, gamma, xi), noise)


def bmn_lower_bound(b: float, gamma: float, xi: float) -> BoundPair:
    _check_gb(b, gamma)
    _check_xi(xi)
    noise = (1 - xi) / xi * (b - (b - 1) * xi) / (gamma * b - 1) * c_factor(b, gamma, xi)
    return BoundPair(_lb_bias(b, gamma, xi), noise)


def sbmn_upper_bound(b: float, gamma: float, xi: float) -> BoundPair:
    _check_gb(b, gamma)
    _check_xi(xi)
    return BoundPair(_ub_bias(b, gamma, xi), (1 - xi) / (gamma * b - 1))


def sbmn_lower_bound(b: float, gamma: float, xi: float) -> BoundPair:
    _check_gb(b, gamma)
    _check_xi(xi)
    return BoundPair(_lb_bias(b, gamma, xi), (1 - xi) / (gamma * b - 1) * c_factor(b, gamma, xi))


def bmn_upper_bound_limit(gamma: float, xi: float) -> BoundPair:
    """``lim_{b -> inf}`` of :func:`bmn_upper_bound`, addend by addend."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    _check_xi(xi)
    return BoundPair(gamma / (gamma + xi), (1 - xi) ** 2 / (xi * gamma))


def sbmn_upper_bound_limit(gamma: float, xi: float) -> BoundPair:
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    _check_xi(xi)
    return BoundPair(gamma / (gamma + xi), 0.0)


def sbmn_b1_risk(gamma: float, xi: float) -> float:
    """Limiting risk of ``xi * MN`` (shrunk min-norm)."""
    if not gamma > 1:
        raise DomainError(f"needs gamma > 1, got {gamma}")
    _check_xi(xi)
    return 1 - (2 * xi - xi**2) / gamma + (1 - xi) / xi * xi**2 / (gamma - 1)


# --- optimal batch size for BMN -------------------------------------------


def bmn_c(gamma: float, xi: float) -> float:
    g, x = gamma, xi
    return (
        -(x**4) * (1 - g)
        - x**3 * (-2 * g**2 + 3 * g - 2)
        - x**2 * (2 * g**2 - 4 * g + 1)
        - x * (2 * g - 2 * g**2)
        - g**2
    )


def bmn_stationary_points(gamma: float, xi: float) -> tuple[float, float]:
    """The two roots ``(b1, b2)`` of ``d/db UB(b) = 0``.

    Returns NaNs when the roots are complex or the leading coefficient
    vanishes.
    """
    g, x = gamma, xi
    num = (
        2 * x**2 * g**2 - x**3 * g**2 + x * g - x * g**2 - 3 * x**2 * g
        + 2 * x**3 * g - x**4 * g + x**2 - 2 * x**3 + x**4
    )
    den = (
        -(x**4) * g + x**4 - 2 * x**3 * g**2 + 3 * x**3 * g - 2 * x**3 + 2 * x**2 * g**2
        - 4 * x**2 * g + x**2 - 2 * x * g**2 + 2 * x * g + g**2
    )
    rad = -x * (x - 1) * (x * g - x + 1) * (x + g - x * g) ** 3
    if den == 0 or rad < 0:
        return math.nan, math.nan
    s = math.sqrt(rad)
    return (num + s) / den, (num - s) / den


def bmn_t(gamma: float, xi: float) -> float:
    """Candidate interior minimizer, chosen by the sign of ``c(gamma, xi)``."""
    b1, b2 = bmn_stationary_points(gamma, xi)
    if math.isnan(b1):
        return 1.0
    c = bmn_c(gamma, xi)
    use_b1 = (c < 0 and b1 < b2) or (c > 0 and b1 > b2)
    return max(b1 if use_b1 else b2, 1.0)


def _ub_total(b, gamma, xi):
    return bmn_upper_bound(b, gamma, xi).total


def _round_by_value(t: float, f) -> int:
    lo, hi = max(1, math.floor(t)), max(1, math.ceil(t))
    return lo if f(lo) <= f(hi) else hi


def bmn_optimal_batch_real(gamma: float, xi: float) -> float:
    """Real-valued argmin of the BMN upper bound over ``{1, inf, t}``."""
    if not gamma > 1:
        raise DomainError(f"needs gamma > 1, got {gamma}")
    _check_xi(xi)
    t = bmn_t(gamma, xi)
    cands = [(_ub_total(1, gamma, xi), 1.0), (_ub_total(t, gamma, xi), t),
             (bmn_upper_bound_limit(gamma, xi).total, math.inf)]
    return min(cands)[1]


def bmn_optimal_batch(gamma: float, xi: float) -> BatchChoice:
    """Batch size minimizing the BMN upper bound, rounded to an integer.

    The interior candidate ``t`` is rounded to whichever of ``floor(t)``,
    ``ceil(t)`` has the smaller bound; if the rounded value no longer beats
    the ``b -> inf`` limit the answer is :data:`INFINITE`.
    """
    best = bmn_optimal_batch_real(gamma, xi)
    lim = bmn_upper_bound_limit(gamma, xi).total
    if math.isinf(best):
        return INFINITE
    f = lambda b: _ub_total(b, gamma, xi)  # noqa: E731
    b = _round_by_value(best, f)
    if f(b) > lim:
        return INFINITE
    return BatchChoice(b)


def bmn_ub_derivative(b: float, gamma: float, xi: float, h: float = 1e-5) -> float:
    """Central finite difference of the BMN upper bound in ``b``."""
    return (_ub_total(b + h, gamma, xi) - _ub_total(b - h, gamma, xi)) / (2 * h)


def bmn_snr_threshold() -> float:
    """Unique real root of ``2 xi^3 - 2 xi^2 + 2 xi - 1`` in (0, 1)."""
    return optimize.bisect(threshold_polynomial, 0.0, 1.0, xtol=1e-12)


def threshold_polynomial(xi):
    return 2 * xi**3 - 2 * xi**2 + 2 * xi - 1


# --- optimal batch size for SBMN ------------------------------------------

B_MAX = 1e6


def sbmn_optimal_batch(gamma: float, xi: float, b_max: float = B_MAX) -> BatchChoice:
    """Minimize the SBMN upper bound over real ``b`` in ``[1, b_max]``.

    A log-spaced scan locates the basin, a bounded scalar search refines it,
    and the result is rounded by value. ``INFINITE`` is returned when the
    bound is still decreasing at ``b_max`` or the ``b -> inf`` limit wins.
    """
    if not gamma > 1:
        raise DomainError(f"needs gamma > 1, got {gamma}")
    _check_xi(xi)
    f = lambda b: sbmn_upper_bound(b, gamma, xi).total  # noqa: E731
    grid = np.geomspace(1.0, b_max, 2001)
    vals = np.array([f(b) for b in grid])
    i = int(np.argmin(vals))
    if i == len(grid) - 1:
        return INFINITE
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if i == 0:
        t = 1.0
    else:
        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
        t = float(res.x) if res.fun <= vals[i] else float(grid[i])
    b = _round_by_value(t, f)
    if f(b) > sbmn_upper_bound_limit(gamma, xi).total:
        return INFINITE
    return BatchChoice(b)


# --- min-norm with discarded samples, server averaging ---------------------


def mn_gamma_opt(xi: float) -> float:
    """Overparametrization ratio minimizing the min-norm risk (``inf`` for xi <= 1/2)."""
    _check_xi(xi)
    if xi <= 0.5:
        return math.inf
    if xi == 1:
        return 1.0
    root_snr = math.sqrt(xi / (1 - xi))
    return root_snr / (root_snr - 1)


def server_avg_asymptotic_risk(gamma: float, xi: float, gamma_tilde: float) -> float:
    """Risk of equal-weight averaging of per-batch min-norm estimates.

    ``gamma_tilde = p / b`` is the per-batch overparametrization.
    """
    if not gamma_tilde > 1:
        raise DomainError(f"needs gamma_tilde > 1, got {gamma_tilde}")
    _check_xi(xi)
    gt = gamma_tilde
    return (1 - 1 / gt) * (gamma + gt * (gt - 1)) / gt**2 + (1 - xi) / xi * (gamma / gt) / (gt - 1)


def server_avg_optimal_batch(gamma: float, xi: float, n: int, divisors_only: bool = True) -> int:
    """Integer ``b`` in ``[1, n/2]`` minimizing the averaging risk at ``gamma_tilde = gamma n / b``.

    With ``divisors_only`` (default) only batch sizes dividing ``n`` are
    scanned. Ties go to the smaller batch.
    """
    if n < 2:
        raise DomainError(f"needs n >= 2, got {n}")
    best = None
    for b in range(1, n // 2 + 1):
        if divisors_only and n % b:
            continue
        gt = gamma * n / b
        if gt <= 1:
            continue
        risk = server_avg_asymptotic_risk(gamma, xi, gt)
        if best is None or risk < best[0]:
            best = (risk, b)
    if best is None:
        raise DomainError(f"no batch size in [1, {n // 2}] has gamma_tilde > 1")
    return best[1]
