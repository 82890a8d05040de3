"""CLF-based charge/thrust allocation.

At each error state the required CLF decrease ``LfV + eps V`` is split: a
fraction ``eta`` is requested from Coulomb actuation through the most
negative eigen-direction of the charge form, and thrusters cover whatever
remains with the minimum-norm thrust.
"""

from __future__ import annotations

from dataclasses import dataclass
import enum
import math

import numpy as np

from .clf import CLFDerivatives, QuadraticCLF, evaluate
from .formation import DesiredConfiguration, FormationModel
from .mathkit import sym_eig, vec

__all__ = [
    "Branch",
    "AllocatorConfig",
    "AllocationResult",
    "CLFViolationError",
    "KKTReport",
    "allocate",
    "allocate_from_derivatives",
    "min_norm_thrust",
    "charge_decrease_check",
    "kkt_consistency",
]


class Branch(str, enum.Enum):
    NO_INPUT = "no-input"
    CHARGE_AND_THRUST = "charge-and-thrust"
    THRUST_ONLY = "thrust-only"

    def __str__(self) -> str:
        return self.value


class CLFViolationError(RuntimeError):
    """Thrust is needed but ``LgTV`` vanishes; ``P`` or the state is corrupt."""


@dataclass(frozen=True)
class AllocatorConfig:
    eta: float
    q_max: float = 1e-2
    clf_violation_tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta: must lie in [0, 1], got {self.eta}")
        if not (math.isfinite(self.q_max) and self.q_max > 0):
            raise ValueError(f"q_max: must be a positive charge in C, got {self.q_max}")
        if not self.clf_violation_tol >= 0:
            raise ValueError("clf_violation_tol must be nonnegative")


@dataclass(frozen=True)
class AllocationResult:
    q_star: np.ndarray
    T_star: np.ndarray
    branch: Branch
    lambda_min: float  # nan on the no-input branch (no decomposition is made)
    cap_active: bool
    predicted_Vdot: float
    V: float


def min_norm_thrust(c: float, a: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Minimiser of ``T.T`` subject to ``c + a.T <= 0``.

    ``c <= tol`` counts as already satisfied. Raises :class:`CLFViolationError`
    when the constraint is active but ``a`` vanishes, so no finite thrust helps.
    """
    a = np.asarray(a, dtype=float)
    if c <= tol:
        return np.zeros_like(a)
    aa = float(a @ a)
    T = -(c / aa) * a if aa > 0.0 else None
    if T is None or not np.all(np.isfinite(T)):
        raise CLFViolationError(
            f"required decrease {c:.3e} cannot be met: thrust direction has |LgTV|^2 = {aa:.3e}"
        )
    return T


def allocate_from_derivatives(der: CLFDerivatives, epsilon: float, cfg: AllocatorConfig) -> AllocationResult:
    """Allocation from precomputed CLF terms (see :func:`allocate`)."""
    values = (der.V, der.LfV)
    if not all(math.isfinite(v) for v in values) or not (
        np.all(np.isfinite(der.LgcV)) and np.all(np.isfinite(der.LgTV))
    ):
        raise ValueError("non-finite CLF terms; refusing to allocate")

    N = math.isqrt(der.LgcV.size)
    need = der.LfV + epsilon * der.V
    tol = cfg.clf_violation_tol * (1.0 + abs(der.V))

    if need <= 0:
        return AllocationResult(
            q_star=np.zeros(N),
            T_star=np.zeros_like(der.LgTV),
            branch=Branch.NO_INPUT,
            lambda_min=math.nan,
            cap_active=False,
            predicted_Vdot=der.LfV,
            V=der.V,
        )

    eig = sym_eig(der.charge_form)
    lam = float(eig.eigenvalues[0])
    q = np.zeros(N)
    cap_active = False
    if lam < 0:
        q_free = math.sqrt(-cfg.eta * need / lam)
        cap_active = q_free > cfg.q_max
        q = min(cfg.q_max, q_free) * eig.eigenvectors[:, 0]
        if q[0] < 0:
            q = -q

    c = need + float(der.LgcV @ vec(np.outer(q, q)))
    T = min_norm_thrust(c, der.LgTV, tol)
    branch = Branch.CHARGE_AND_THRUST if np.any(q != 0) else Branch.THRUST_ONLY
    return AllocationResult(
        q_star=q,
        T_star=T,
        branch=branch,
        lambda_min=lam,
        cap_active=cap_active,
        predicted_Vdot=der.vdot(q, T),
        V=der.V,
    )


def allocate(
    clf: QuadraticCLF,
    model: FormationModel,
    des: DesiredConfiguration,
    Xi,
    cfg: AllocatorConfig,
) -> AllocationResult:
    """Charges and thrusts that make ``Vdot <= -eps V`` at the error state ``Xi``.

    Charges are confined to the eigenvector of the most negative eigenvalue of
    the charge form, scaled so Coulomb forces deliver the fraction ``eta`` of
    the required decrease (capped at ``|q| <= q_max``) and signed so that
    ``q_1 >= 0``. The thrust is the minimum-norm top-up.
    """
    Xi = np.asarray(Xi.packed() if hasattr(Xi, "packed") else Xi, dtype=float).ravel()
    if not np.all(np.isfinite(Xi)):
        raise ValueError("error state has non-finite entries")
    der = evaluate(clf, model, des, Xi)
    return allocate_from_derivatives(der, clf.epsilon, cfg)


def charge_decrease_check(result: AllocationResult, der: CLFDerivatives, cfg: AllocatorConfig, epsilon: float) -> float:
    """``LgcV vec(q* q*^T) + eta (LfV + eps V)``; zero when the charge cap is inactive."""
    q = result.q_star
    return float(der.LgcV @ vec(np.outer(q, q)) + cfg.eta * (der.LfV + epsilon * der.V))


@dataclass(frozen=True)
class KKTReport:
    applicable: bool
    reason: str = ""
    gamma2: float = math.nan
    mu: float = math.nan
    T_reconstructed: np.ndarray | None = None
    thrust_rel_error: float = math.nan
    equality_rel_residual: float = math.nan
    stationarity_residual: float = math.nan
    passed: bool = False


def kkt_consistency(
    der: CLFDerivatives,
    result: AllocationResult,
    cfg: AllocatorConfig,
    epsilon: float,
    thrust_tol: float = 1e-8,
    equality_tol: float = 1e-8,
    stationarity_tol: float = 1e-10,
) -> KKTReport:
    """Check the allocation against the stationarity conditions of the one-constraint QCQP.

    With ``gamma1 = 1`` and the weight
    ``gamma2 = -|LgTV|^2 / (2 (1 - eta) lam (LfV + eps V))`` the multiplier is
    ``mu = -1/lam`` and the QCQP optimum is ``T = -(mu / (2 gamma2)) LgTV^T``
    with all charge on the first eigen-coordinate. Applicable only when the
    charge cap is inactive, ``lam < 0`` and ``0 < eta < 1``.
    """
    if result.branch is not Branch.CHARGE_AND_THRUST:
        return KKTReport(False, f"branch is {result.branch}")
    if not result.lambda_min < 0:
        return KKTReport(False, "smallest eigenvalue is not negative")
    if result.cap_active:
        return KKTReport(False, "charge cap is active")
    if not 0.0 < cfg.eta < 1.0:
        return KKTReport(False, "eta must lie strictly between 0 and 1")

    need = der.LfV + epsilon * der.V
    a = der.LgTV
    aa = float(a @ a)
    eig = sym_eig(der.charge_form)
    lam_all = eig.eigenvalues
    lam = float(lam_all[0])
    mu = -1.0 / lam
    gamma2 = -aa / (2.0 * (1.0 - cfg.eta) * lam * need)
    T_rec = -(mu / (2.0 * gamma2)) * a

    T = result.T_star
    thrust_err = float(np.linalg.norm(T_rec - T) / max(np.linalg.norm(T), np.finfo(float).tiny))

    q_t = eig.eigenvectors.T @ result.q_star
    eq = lam * q_t[0] ** 2 + aa / (2.0 * gamma2 * lam) + need
    eq_rel = abs(eq) / abs(need)

    stat = float(np.max(np.abs((1.0 + mu * lam_all) * q_t)))

    ok = thrust_err <= thrust_tol and eq_rel <= equality_tol and stat <= stationarity_tol
    return KKTReport(
        applicable=True,
        gamma2=gamma2,
        mu=mu,
        T_reconstructed=T_rec,
        thrust_rel_error=thrust_err,
        equality_rel_residual=eq_rel,
        stationarity_residual=stat,
        passed=ok,
    )
