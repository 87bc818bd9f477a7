"""Minimum-norm estimators and their batch variants.

All estimators take a feature matrix ``X`` of shape ``(n, p)`` and samples
``y`` of length ``n`` and return a length-``p`` estimate of ``beta``.
Batches are consecutive blocks of ``b`` rows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BatchMismatch, DimensionMismatch
from .linalg import gram, spd_solve, spd_solve_stacked


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} and y {y.shape} are incompatible")
    return X, y


def min_norm(X, y):
    """Minimum-l2 interpolator ``X^T (X X^T)^{-1} y``."""
    X, y = _check_xy(X, y)
    return X.T @ spd_solve(gram(X), y)


@dataclass(frozen=True)
class ModifiedModel:
    """Per-batch weak estimators stacked as a new regression problem.

    ``Xp[j] = A[j] @ X_j`` is the min-norm estimate from batch ``j``,
    ``Yp[j] = A[j] @ y_j`` the matching modified sample, with
    ``A[j] = y_j^T (X_j X_j^T)^{-1}``.
    """

    Xp: np.ndarray
    Yp: np.ndarray
    A: np.ndarray

    @property
    def n_batches(self) -> int:
        return self.Xp.shape[0]

    def modified_noise(self, W):
        """``W'_j = A_j W_j`` for a known noise vector ``W``."""
        k, b = self.A.shape
        return np.einsum("ki,ki->k", self.A, np.asarray(W, dtype=float).reshape(k, b))


def _split(X, y, b):
    n, p = X.shape
    if int(b) != b or b < 1 or n % b:
        raise BatchMismatch(f"batch size {b} does not divide n={n}")
    k = n // b
    return X.reshape(k, b, p), y.reshape(k, b)


def build_modified_model(X, y, b: int) -> ModifiedModel:
    X, y = _check_xy(X, y)
    Xb, yb = _split(X, y, b)
    G = np.einsum("kip,kjp->kij", Xb, Xb)
    A = spd_solve_stacked(G, yb)
    Xp = np.einsum("ki,kip->kp", A, Xb)
    Yp = np.einsum("ki,ki->k", A, yb)
    return ModifiedModel(Xp=Xp, Yp=Yp, A=A)


def batch_min_norm(X, y, b: int):
    mm = build_modified_model(X, y, b)
    return min_norm(mm.Xp, mm.Yp)


class ShrinkMode(str, enum.Enum):
    # mu_j = (1 - xi) * Y'_j, so the output is exactly xi * BMN
    EXACT = "exact"
    # mu_j = (1 - xi) * ||y_j||^2 / p, i.e. ||y_j||^2 brought to the scale of Y'_j
    LITERAL = "literal"


def shrunk_batch_min_norm(X, y, b: int, xi: float, shrink_mode=ShrinkMode.EXACT):
    """Batch min-norm with the mean of the modified noise removed.

    ``X'^T (X' X'^T)^{-1} (Y' - mu)``; see :class:`ShrinkMode` for ``mu``.
    """
    if not 0 < xi <= 1:
        raise ValueError(f"xi must lie in (0, 1], got {xi}")
    mm = build_modified_model(X, y, b)
    if ShrinkMode(shrink_mode) is ShrinkMode.EXACT:
        # Y' - mu = xi * Y' and min-norm is linear; scaling afterwards avoids
        # the rounding of the subtraction
        return xi * min_norm(mm.Xp, mm.Yp)
    X, y = _check_xy(X, y)
    _, yb = _split(X, y, b)
    mu = (1 - xi) * np.einsum("ki,ki->k", yb, yb) / X.shape[1]
    return min_norm(mm.Xp, mm.Yp - mu)


def iterative_batch_min_norm(X, y, b_list):
    """Repeat the modified-model construction once per entry of ``b_list``,
    then finish with a single min-norm step."""
    X, y = _check_xy(X, y)
    for b in b_list:
        mm = build_modified_model(X, y, b)
        X, y = mm.Xp, mm.Yp
    return min_norm(X, y)


def server_average(X, y, b: int):
    """Unweighted mean of the per-batch min-norm estimators."""
    # rows of X' are exactly the per-batch min-norm estimates
    return build_modified_model(X, y, b).Xp.mean(axis=0)


def subsample_keep(n: int, keep_ratio: float) -> int:
    if not 0 < keep_ratio <= 1:
        raise ValueError(f"keep_ratio must lie in (0, 1], got {keep_ratio}")
    return max(1, int(np.floor(keep_ratio * n + 0.5)))


def subsample_min_norm(X, y, keep_ratio: float):
    """Min-norm on the first ``round(keep_ratio * n)`` rows."""
    X, y = _check_xy(X, y)
    keep = subsample_keep(X.shape[0], keep_ratio)
    return min_norm(X[:keep], y[:keep])


def ridge(X, y, lam: float):
    """Ridge regression in dual form, ``X^T (X X^T + lam I)^{-1} y``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    X, y = _check_xy(X, y)
    G = gram(X)
    G[np.diag_indices_from(G)] += lam
    return X.T @ spd_solve(G, y)


# --- estimator specs ------------------------------------------------------

KINDS = ("mn", "bmn", "sbmn", "ibmn", "avg", "sub", "ridge")
BATCH_KINDS = ("bmn", "sbmn", "avg")


@dataclass(frozen=True)
class EstimatorSpec:
    """Declarative description of one estimator.

    ``b=None`` on a batch kind means "take b from the sweep grid"; ``optimize``
    asks the harness to pick the tuning parameter per cell (optimal batch
    size, optimal kept fraction, tuned ridge penalty).
    """

    kind: str
    b: int | None = None
    b_list: tuple[int, ...] = ()
    keep_ratio: float | None = None
    lam: float | None = None
    shrink_mode: ShrinkMode = ShrinkMode.EXACT
    optimize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.b is not None and (int(self.b) != self.b or self.b < 1):
            raise ValueError(f"batch size must be a positive integer, got {self.b}")
        if self.kind == "ibmn" and not self.b_list:
            raise ValueError("ibmn needs a non-empty b_list")
        if self.keep_ratio is not None and not 0 < self.keep_ratio <= 1:
            raise ValueError(f"keep_ratio must lie in (0, 1], got {self.keep_ratio}")
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    @property
    def label(self) -> str:
        if self.kind == "mn":
            return "MN"
        if self.kind == "ibmn":
            return "IBMN(" + "x".join(map(str, self.b_list)) + ")"
        name = {"bmn": "BMN", "sbmn": "SBMN", "avg": "AVG", "sub": "SUB", "ridge": "RIDGE"}[self.kind]
        if self.optimize:
            arg = "opt"
        elif self.kind in BATCH_KINDS:
            arg = "b" if self.b is None else f"b={self.b}"
        elif self.kind == "sub":
            arg = f"keep={self.keep_ratio!r}"
        else:
            arg = f"lam={self.lam!r}"
        if self.kind == "sbmn" and self.shrink_mode is not ShrinkMode.EXACT:
            arg += ",literal"
        return f"{name}({arg})"

    @property
    def needs_grid_b(self) -> bool:
        return self.kind in BATCH_KINDS and self.b is None and not self.optimize

    def with_b(self, b: int) -> EstimatorSpec:
        return EstimatorSpec(self.kind, b, self.b_list, self.keep_ratio, self.lam, self.shrink_mode)

    @property
    def effective_batch(self) -> int:
        """Number of original rows folded into one final-stage row."""
        if self.kind in BATCH_KINDS:
            return self.b or 1
        if self.kind == "ibmn":
            return int(np.prod(self.b_list))
        return 1

    def fit(self, X, y, xi: float | None = None):
        if self.optimize or self.needs_grid_b:
            raise ValueError(f"{self.label} must be resolved to concrete parameters before fitting")
        k = self.kind
        if k == "mn":
            return min_norm(X, y)
        if k == "bmn":
            return batch_min_norm(X, y, self.b)
        if k == "sbmn":
            if xi is None:
                raise ValueError("SBMN needs the normalized SNR xi")
            return shrunk_batch_min_norm(X, y, self.b, xi, self.shrink_mode)
        if k == "ibmn":
            return iterative_batch_min_norm(X, y, self.b_list)
        if k == "avg":
            return server_average(X, y, self.b)
        if k == "sub":
            return subsample_min_norm(X, y, self.keep_ratio)
        if self.lam is None:
            raise ValueError("ridge needs a penalty")
        return ridge(X, y, self.lam)

    @classmethod
    def parse(cls, text: str) -> EstimatorSpec:
        """Parse the compact form used in configs and on the command line.

        Examples: ``mn``, ``bmn:2``, ``bmn`` (b from grid), ``sbmn:4``,
        ``sbmn:4:literal``, ``ibmn:2x2``, ``avg:100``, ``sub:0.5``,
        ``ridge:0.1``, and ``bmn:opt`` / ``sbmn:opt`` / ``avg:opt`` /
        ``sub:opt`` / ``ridge:opt``.
        """
        parts = text.strip().lower().split(":")
        kind, args = parts[0], parts[1:]
        try:
            if kind == "mn" and not args:
                return cls("mn")
            if args and args[0] == "opt":
                if kind not in ("bmn", "sbmn", "avg", "sub", "ridge") or len(args) > 1:
                    raise ValueError
                return cls(kind, optimize=True)
            if kind in BATCH_KINDS:
                b = int(args[0]) if args and args[0] not in ("", "b") else None
                mode = ShrinkMode.EXACT
                if len(args) > 2:
                    raise ValueError
                if len(args) == 2:
                    if kind != "sbmn" or args[1] not in ("literal", "exact"):
                        raise ValueError
                    mode = ShrinkMode.EXACT if args[1] == "exact" else ShrinkMode.LITERAL
                return cls(kind, b=b, shrink_mode=mode)
            if kind == "ibmn" and len(args) == 1:
                return cls("ibmn", b_list=tuple(int(v) for v in args[0].replace(",", "x").split("x")))
            if kind == "sub" and len(args) == 1:
                return cls("sub", keep_ratio=float(args[0]))
            if kind == "ridge" and len(args) == 1:
                return cls("ridge", lam=float(args[0]))
        except ValueError:
            pass
        raise ValueError(f"cannot parse estimator {text!r}")
