"""Small dense linear-algebra helpers used by the allocator.

Everything here works on tiny matrices (a handful of spacecraft), so the
routines favour determinism over raw speed.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

__all__ = ["SymEig", "sym_eig", "vec", "hermitian_reshape", "he"]

_SYM_TOL = 1e-12
_OFF_TOL = 1e-13
_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition ``M = R diag(eigenvalues) R^T``.

    Eigenvalues are ascending and column ``i`` of ``eigenvectors`` pairs with
    ``eigenvalues[i]``. In every column the entry of largest magnitude is
    nonnegative (first index wins a tie).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        R = self.eigenvectors
        return (R * self.eigenvalues) @ R.T


def he(M: np.ndarray) -> np.ndarray:
    """Hermitian part ``(M + M^T) / 2``."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def vec(M: np.ndarray) -> np.ndarray:
    """Stack the columns of ``M`` into one vector (column-major)."""
    return np.asarray(M, dtype=float).ravel(order="F")


def hermitian_reshape(a: np.ndarray) -> np.ndarray:
    """Return the symmetric matrix ``S`` with ``a @ vec(x x^T) == x^T S x``.

    ``a`` is a row of length ``n**2``; it is reshaped to ``n x n`` (the
    inverse of :func:`vec`) and symmetrised.
    """
    a = np.asarray(a, dtype=float).ravel()
    n = math.isqrt(a.size)
    if n * n != a.size or n == 0:
        raise ValueError(f"length {a.size} is not a positive perfect square")
    return he(a.reshape((n, n), order="F"))


def _rotate(M: list, V: list, p: int, q: int, n: int) -> None:
    # one Jacobi rotation annihilating M[p][q], applied in place on nested lists
    # (scalar loops beat numpy call overhead at the sizes used here)
    apq = M[p][q]
    theta = (M[q][q] - M[p][p]) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 0.5 / theta
    else:
        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c

    for row in M:
        a, b = row[p], row[q]
        row[p] = c * a - s * b
        row[q] = s * a + c * b
    Mp, Mq = M[p], M[q]
    for k in range(n):
        a, b = Mp[k], Mq[k]
        Mp[k] = c * a - s * b
        Mq[k] = s * a + c * b
    Mp[q] = Mq[p] = 0.0
    for row in V:
        a, b = row[p], row[q]
        row[p] = c * a - s * b
        row[q] = s * a + c * b


def sym_eig(M: np.ndarray) -> SymEig:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps.

    Raises
    ------
    ValueError
        If ``M`` is not square or deviates from symmetry by more than
        ``1e-12`` per entry (relative to its largest entry when that exceeds 1).
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValueError(f"expected a nonempty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M))))
    asym = float(np.max(np.abs(M - M.T)))
    if asym > _SYM_TOL * scale:
        raise ValueError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})")

    n = M.shape[0]
    M = he(M)
    target = _OFF_TOL * float(np.linalg.norm(M))
    A = M.tolist()
    W = np.eye(n).tolist()
    for _ in range(_MAX_SWEEPS):
        off = math.sqrt(sum(A[i][j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p][q] != 0.0:
                    _rotate(A, W, p, q, n)
    else:  # pragma: no cover - Jacobi converges quadratically
        raise RuntimeError("Jacobi iteration did not converge")
    M = np.array(A)
    V = np.array(W)

    w = np.diag(M).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    V = V[:, order]
    for i in range(n):
        mag = np.abs(V[:, i])
        # entries equal up to rounding count as a tie
        k = int(np.flatnonzero(mag >= mag.max() - 1e-12)[0])
        if V[k, i] < 0:
            V[:, i] = -V[:, i]
    return SymEig(eigenvalues=w, eigenvectors=V)
