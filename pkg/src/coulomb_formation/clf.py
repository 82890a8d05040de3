"""Quadratic control Lyapunov function ``V = Xi^T P Xi`` and its Lie derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formation import (
    DesiredConfiguration,
    ErrorState,
    FormationModel,
    error_dynamics_matrices,
    gc_matrix,
    gt_matrix,
)
from .mathkit import hermitian_reshape, sym_eig, vec

__all__ = [
    "SQUARE_P_DIAG",
    "SQUARE_P_OFFDIAG",
    "SQUARE_EPSILON",
    "QuadraticCLF",
    "CLFDerivatives",
    "CLFCheck",
    "square_clf",
    "evaluate",
    "verify_clf",
]

# 2x2 block weights of the square-formation CLF preset (each block ⊗ I)
SQUARE_P_DIAG = 0.995057
SQUARE_P_OFFDIAG = 0.00497061
SQUARE_EPSILON = 0.01


@dataclass(frozen=True)
class QuadraticCLF:
    P: np.ndarray
    epsilon: float

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"P: expected a square matrix, got shape {P.shape}")
        if not np.all(np.isfinite(P)):
            raise ValueError("P: non-finite entries")
        if np.max(np.abs(P - P.T)) > 1e-12:
            raise ValueError("P: matrix is not symmetric")
        P = 0.5 * (P + P.T)
        lam_min = sym_eig(P).eigenvalues[0]
        if lam_min <= 0:
            raise ValueError(f"P: not positive definite (smallest eigenvalue {lam_min:.3e})")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon: must be a nonnegative decay rate, got {self.epsilon}")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def value(self, Xi) -> float:
        Xi = _packed(Xi)
        return float(Xi @ self.P @ Xi)


def square_clf(n_rel: int = 6, epsilon: float = SQUARE_EPSILON) -> QuadraticCLF:
    """The square-formation CLF with blocks ``[a I, b I; b I, a I]`` of size ``n_rel``."""
    I = np.eye(n_rel)
    P = np.block([[SQUARE_P_DIAG * I, SQUARE_P_OFFDIAG * I], [SQUARE_P_OFFDIAG * I, SQUARE_P_DIAG * I]])
    return QuadraticCLF(P, epsilon)


@dataclass(frozen=True)
class CLFDerivatives:
    """``V`` and the terms of ``Vdot = LfV + LgcV vec(q q^T) + LgTV T``."""

    V: float
    LfV: float
    LgcV: np.ndarray
    LgTV: np.ndarray

    @property
    def charge_form(self) -> np.ndarray:
        """Symmetric ``S`` with ``LgcV vec(q q^T) = q^T S q`` (zero diagonal)."""
        return hermitian_reshape(self.LgcV)

    def vdot(self, q, T) -> float:
        q = np.asarray(q, dtype=float).ravel()
        return float(self.LfV + self.LgcV @ vec(np.outer(q, q)) + self.LgTV @ np.asarray(T, dtype=float).ravel())


def _packed(Xi) -> np.ndarray:
    if isinstance(Xi, ErrorState):
        return Xi.packed()
    return np.asarray(Xi, dtype=float).ravel()


def evaluate(clf: QuadraticCLF, model: FormationModel, des: DesiredConfiguration, Xi) -> CLFDerivatives:
    """Value and Lie derivatives of ``V`` at the error state ``Xi``."""
    Xi = _packed(Xi)
    n = model.n_rel
    if Xi.size != clf.dim or clf.dim != 2 * n:
        raise ValueError(f"state of length {Xi.size} does not match P of size {clf.dim} (expected {2 * n})")
    PXi = clf.P @ Xi
    V = float(Xi @ PXi)
    # A Xi = (nu, 0), so Xi^T (A^T P + P A) Xi = 2 (P Xi) . (nu, 0)
    LfV = 2.0 * float(PXi[:n] @ Xi[n:])
    # 2 Xi^T P B picks the velocity rows of P Xi
    w = 2.0 * PXi[n:]
    LgcV = w @ gc_matrix(model, Xi[:n] + des.xi_des)
    LgTV = w @ gt_matrix(model)
    return CLFDerivatives(V=V, LfV=LfV, LgcV=LgcV, LgTV=LgTV)


@dataclass(frozen=True)
class CLFCheck:
    passed: bool
    margin: float
    witness: np.ndarray | None
    tol: float

    def __bool__(self) -> bool:
        return self.passed


def verify_clf(clf: QuadraticCLF, model: FormationModel, tol: float = 1e-10) -> CLFCheck:
    """Check ``inf_u {LfV + LBV u + eps V} <= 0`` for every error state.

    For quadratic ``V`` the infimum is ``-inf`` unless ``B^T P Xi = 0``, so the
    condition reduces to ``He(PA) + (eps/2) P`` being negative semidefinite on
    ``null(B^T P)``. ``margin`` is the largest eigenvalue of that restricted
    form; ``witness`` is a unit error state attaining it when the check fails.
    """
    A, B = error_dynamics_matrices(model)
    P = clf.P
    if P.shape[0] != A.shape[0]:
        raise ValueError(f"P has size {P.shape[0]} but the formation needs {A.shape[0]}")
    # orthonormal basis of null(B^T P); B^T P has full row rank
    M = B.T @ P
    _, _, Vt = np.linalg.svd(M)
    Z = Vt[M.shape[0]:].T
    H = 0.5 * (P @ A + A.T @ P) + 0.5 * clf.epsilon * P
    restricted = Z.T @ H @ Z
    eig = sym_eig(0.5 * (restricted + restricted.T))
    margin = float(eig.eigenvalues[-1])
    passed = margin <= tol
    witness = None if passed else Z @ eig.eigenvectors[:, -1]
    return CLFCheck(passed=passed, margin=margin, witness=witness, tol=tol)
