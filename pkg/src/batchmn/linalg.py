"""Symmetric positive-definite Gram solves.

Everything in the package that needs ``(X X^T)^{-1} v`` goes through here, so
the conditioning check lives in one place. Inverses are never formed.
"""

import numpy as np
from scipy import linalg as sla
from scipy.linalg import lapack

from .errors import SingularGram

COND_LIMIT = 1e12


def gram(X):
    return X @ X.T


def spd_solve(G, rhs, cond_limit=COND_LIMIT):
    """Solve ``G x = rhs`` for a single SPD matrix via Cholesky.

    The 1-norm condition number is estimated from the factor (LAPACK
    ``dpocon``); anything above ``cond_limit`` raises :class:`SingularGram`.
    """
    G = np.asarray(G, dtype=float)
    try:
        c, lower = sla.cho_factor(G, lower=False, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularGram(f"Gram matrix of size {G.shape[0]} is not positive definite") from exc
    anorm = np.abs(G).sum(axis=0).max()
    rcond, info = lapack.dpocon(c, anorm, uplo="U")
    if info != 0 or not rcond * cond_limit >= 1.0:
        raise SingularGram(
            f"Gram matrix of size {G.shape[0]} has condition estimate {1 / max(rcond, 1e-300):.3g}"
            f" > {cond_limit:.0e}"
        )
    return sla.cho_solve((c, lower), rhs, check_finite=False)


def spd_solve_stacked(G, rhs, cond_limit=COND_LIMIT):
    """Batched version of :func:`spd_solve` for a stack of small SPD systems.

    ``G`` has shape ``(k, m, m)`` and ``rhs`` shape ``(k, m)``. Meant for the
    per-batch ``b x b`` Gram matrices, where an exact eigenvalue condition
    number is cheap.
    """
    G = np.asarray(G, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    eig = np.linalg.eigvalsh(G)
    lo, hi = eig[:, 0], eig[:, -1]
    bad = ~(lo > 0) | ~(hi <= cond_limit * lo)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise SingularGram(
            f"batch {j} Gram matrix is singular or ill-conditioned"
            f" (eigenvalues in [{lo[j]:.3g}, {hi[j]:.3g}])"
        )
    L = np.linalg.cholesky(G)
    z = np.linalg.solve(L, rhs[..., None])
    return np.linalg.solve(np.swapaxes(L, -1, -2), z)[..., 0]
