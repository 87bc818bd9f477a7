"""Monte Carlo risk estimation and parameter sweeps.

Trial ``i`` of a cell always draws its instance from the stream
``(seed, i)``, so results do not depend on execution order or on the number
of worker threads, and every estimator in a cell sees the same instances.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import theory
from .errors import BatchMNError, SingularGram
from .estimators import BATCH_KINDS, EstimatorSpec, subsample_keep
from .model import BetaMode, Instance, ModelParams, generate_instance, make_params, normalized_risk

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 200


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    stderr: float
    trials: int

    @classmethod
    def from_samples(cls, risks) -> RiskEstimate:
        risks = np.asarray(risks, dtype=float)
        t = risks.size
        sd = float(np.std(risks, ddof=1)) if t > 1 else math.nan
        return cls(float(np.mean(risks)), sd / math.sqrt(t), t)


def _workers(threads) -> int:
    if threads in (None, "auto"):
        return os.cpu_count() or 1
    return max(1, int(threads))


def _map_trials(fn, trials: int, threads=1):
    nw = _workers(threads)
    if nw == 1 or trials == 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(fn, range(trials)))


def trial_risks(specs, params: ModelParams, beta_mode=BetaMode.UNIFORM_SPHERE, trials=DEFAULT_TRIALS,
                seed=0, threads=1) -> np.ndarray:
    """Risk of each concrete spec on each trial, shape ``(trials, len(specs))``.

    A numerical failure in any trial aborts the whole computation.
    """
    specs = list(specs)
    xi = params.xi

    def one(i):
        inst = generate_instance(params, beta_mode, seed, stream=(i,))
        out = np.empty(len(specs))
        for k, spec in enumerate(specs):
            try:
                est = spec.fit(inst.X, inst.Y, xi)
            except SingularGram as exc:
                raise SingularGram(f"{spec.label} failed on trial {i} (n={params.n}, p={params.p}, "
                                   f"seed={seed}): {exc}") from exc
            out[k] = normalized_risk(est, inst.beta, params.r)
        return out

    return np.array(_map_trials(one, trials, threads)).reshape(trials, len(specs))


def estimate_risk(spec: EstimatorSpec, params: ModelParams, beta_mode=BetaMode.UNIFORM_SPHERE,
                  trials=DEFAULT_TRIALS, seed=0, threads=1) -> RiskEstimate:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = resolve_spec(spec, params, beta_mode=beta_mode, trials=trials, seed=seed, threads=threads)
    return RiskEstimate.from_samples(trial_risks([spec], params, beta_mode, trials, seed, threads)[:, 0])


# --- ridge tuning ---------------------------------------------------------


class _RidgePath:
    """Eigen-decomposition of ``X X^T`` reused across penalties.

    ``ridge(lam) = X^T U diag(1/(s + lam)) U^T y``.
    """

    def __init__(self, inst: Instance):
        s, U = np.linalg.eigh(inst.X @ inst.X.T)
        self.s = np.clip(s, 0.0, None)
        self.XtU = inst.X.T @ U
        self.z = U.T @ inst.Y
        self.beta = inst.beta
        self.r = inst.params.r

    def risk(self, lam):
        est = self.XtU @ (self.z / (self.s + lam))
        return normalized_risk(est, self.beta, self.r)


LOG10_LAMBDA_BOUNDS = (-4.0, 4.0)


def tune_ridge(params: ModelParams, beta_mode=BetaMode.UNIFORM_SPHERE, trials=DEFAULT_TRIALS, seed=0,
               threads=1, bounds=LOG10_LAMBDA_BOUNDS) -> tuple[float, RiskEstimate]:
    """Pick the ridge penalty minimizing Monte Carlo risk.

    Search is over ``log10(lambda)`` within ``bounds`` using common random
    numbers: every penalty is scored on the same ``trials`` instances.
    """
    paths = _map_trials(
        lambda i: _RidgePath(generate_instance(params, beta_mode, seed, stream=(i,))), trials, threads
    )

    def risks(loglam):
        return np.array([pth.risk(10.0**loglam) for pth in paths])

    def mean_risk(loglam):
        return float(np.mean(risks(loglam)))

    # coarse scan guards against a non-unimodal Monte Carlo objective
    grid = np.linspace(bounds[0], bounds[1], 17)
    vals = [mean_risk(v) for v in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(mean_risk, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4})
    best = float(res.x) if res.fun <= vals[i] else float(grid[i])
    return 10.0**best, RiskEstimate.from_samples(risks(best))


# --- resolving "optimized" estimators ------------------------------------


def _divisors(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def _best_divisor(n, bound_fn, cap):
    """Divisor of ``n`` no larger than ``cap`` with the smallest bound value."""
    best = None
    for d in _divisors(n):
        if d > cap:
            break
        try:
            v = bound_fn(d)
        except theory.DomainError:
            continue
        if best is None or v < best[0]:
            best = (v, d)
    if best is None:
        raise theory.DomainError(f"no admissible batch size divides n={n}")
    return best[1]


def resolve_spec(spec: EstimatorSpec, params: ModelParams, **tune_kw) -> EstimatorSpec:
    """Turn an ``optimize=True`` spec into concrete parameters for ``params``.

    Batch sizes are restricted to divisors of ``n`` that are at most
    ``sqrt(n)`` (so both stages keep many rows); among those the one with the
    smallest asymptotic upper bound is used.
    """
    if not spec.optimize:
        return spec
    g, xi, n = params.gamma, params.xi, params.n
    cap = max(1, math.isqrt(n))
    if spec.kind == "bmn":
        b = _best_divisor(n, lambda d: theory.bmn_upper_bound(d, g, xi).total, cap)
        return EstimatorSpec("bmn", b=b)
    if spec.kind == "sbmn":
        b = _best_divisor(n, lambda d: theory.sbmn_upper_bound(d, g, xi).total, cap)
        return EstimatorSpec("sbmn", b=b, shrink_mode=spec.shrink_mode)
    if spec.kind == "avg":
        return EstimatorSpec("avg", b=theory.server_avg_optimal_batch(g, xi, n))
    if spec.kind == "sub":
        g_opt = theory.mn_gamma_opt(xi) if xi < 1 else 1.0
        ratio = 1.0 if g >= g_opt else g / g_opt
        keep = subsample_keep(n, ratio) if ratio > 0 else 1
        return EstimatorSpec("sub", keep_ratio=keep / n)
    if spec.kind == "ridge":
        kw = {k: v for k, v in tune_kw.items() if k in ("beta_mode", "trials", "seed", "threads")}
        lam, _ = tune_ridge(params, **kw)
        return EstimatorSpec("ridge", lam=lam)
    raise ValueError(f"cannot optimize {spec.label}")


# --- sweeps ---------------------------------------------------------------

N_RULES = ("fixed", "ceil")


@dataclass
class SweepConfig:
    estimators: list[EstimatorSpec]
    gamma_grid: list[float]
    xi_grid: list[float]
    b_grid: list[int] = field(default_factory=lambda: [1])
    n: int = 400
    n_rule: str = "fixed"
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    beta_mode: BetaMode = BetaMode.UNIFORM_SPHERE
    r: float = 1.0
    with_theory: bool = False

    def __post_init__(self):
        for name in ("estimators", "gamma_grid", "xi_grid", "b_grid"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if self.trials < 2:
            raise ValueError("trials must be >= 2")
        if self.n_rule not in N_RULES:
            raise ValueError(f"n_rule must be one of {N_RULES}, got {self.n_rule!r}")
        self.beta_mode = BetaMode(self.beta_mode)

    def n_for(self, b: int) -> int:
        """Sample count for grid batch size ``b``; ``ceil`` rounds up to a multiple of ``b``."""
        if self.n_rule == "ceil":
            return -(-self.n // b) * b
        return self.n


ROW_FIELDS = ("estimator", "n", "p", "gamma", "xi", "b", "mean", "stderr", "trials", "seed", "error")
THEORY_FIELDS = ("theory", "theory_lb")


def theory_columns(spec: EstimatorSpec, params: ModelParams) -> tuple[float | None, float | None]:
    """Asymptotic reference value(s) matching an estimator: ``(risk or UB, LB)``."""
    g, xi = params.gamma, params.xi
    try:
        if spec.kind == "mn":
            return theory.mn_asymptotic_risk(g, xi), None
        if spec.kind == "bmn":
            return theory.bmn_upper_bound(spec.b, g, xi).total, theory.bmn_lower_bound(spec.b, g, xi).total
        if spec.kind == "sbmn":
            return theory.sbmn_upper_bound(spec.b, g, xi).total, theory.sbmn_lower_bound(spec.b, g, xi).total
        if spec.kind == "avg":
            return theory.server_avg_asymptotic_risk(g, xi, params.p / spec.b), None
        if spec.kind == "sub":
            keep = subsample_keep(params.n, spec.keep_ratio)
            return theory.mn_asymptotic_risk(params.p / keep, xi), None
    except theory.DomainError:
        pass
    return None, None


def _cells(config: SweepConfig):
    for spec in config.estimators:
        # only specs that take b from the grid are swept over it
        b_values = config.b_grid if spec.needs_grid_b else [spec.effective_batch]
        for gamma in config.gamma_grid:
            for xi in config.xi_grid:
                for b in b_values:
                    yield spec, gamma, xi, b


def _evaluate_cell(config: SweepConfig, spec, gamma, xi, b, threads):
    n = config.n_for(b)
    row = {"estimator": spec.label, "n": n, "p": None, "gamma": gamma, "xi": xi, "b": b,
           "mean": None, "stderr": None, "trials": config.trials, "seed": config.seed, "error": ""}
    if config.with_theory:
        row.update(theory=None, theory_lb=None)
    try:
        params = make_params(n, gamma, xi, config.r)
        row["p"] = params.p
        concrete = spec.with_b(b) if spec.needs_grid_b else spec
        concrete = resolve_spec(concrete, params, beta_mode=config.beta_mode, trials=config.trials,
                                seed=config.seed, threads=threads)
        if spec.optimize:
            row["estimator"] = f"{spec.label}->{concrete.label}"
            if concrete.kind in BATCH_KINDS:
                row["b"] = concrete.b
        elif concrete is not spec:
            row["estimator"] = concrete.label
        est = RiskEstimate.from_samples(
            trial_risks([concrete], params, config.beta_mode, config.trials, config.seed, threads)[:, 0]
        )
        row.update(mean=est.mean, stderr=est.stderr)
        if config.with_theory:
            row["theory"], row["theory_lb"] = theory_columns(concrete, params)
    except (BatchMNError, ValueError) as exc:
        log.warning("cell %s gamma=%s xi=%s b=%s failed: %s", spec.label, gamma, xi, b, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep(config: SweepConfig, threads=1) -> list[dict]:
    """Evaluate every (estimator, gamma, xi, b) cell; rows come back in grid order.

    Trials inside a cell are spread over ``threads`` workers. A failing cell
    records its error and the sweep continues.
    """
    return [_evaluate_cell(config, *cell, threads) for cell in _cells(config)]


def row_fields(config: SweepConfig) -> tuple[str, ...]:
    return ROW_FIELDS + (THEORY_FIELDS if config.with_theory else ())

