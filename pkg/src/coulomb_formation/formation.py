"""Formation model, Coulomb/thrust dynamics and relative (error) coordinates.

Conventions
-----------
* Spacecraft are indexed ``0 .. N-1`` internally; diagnostics report them
  1-based.
* Stacked vectors are spacecraft-major: ``T = (T_1, ..., T_N)`` with each
  block of length ``d``.
* Charge products enter through ``vec(q q^T)`` (column-major), so the product
  ``q_a q_b`` sits at index ``b * N + a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "COULOMB_CONSTANT",
    "SingularityError",
    "FormationModel",
    "AbsoluteState",
    "ErrorState",
    "DesiredConfiguration",
    "Inputs",
    "relative_from_absolute",
    "gt_matrix",
    "gc_matrix",
    "coulomb_coefficients",
    "accelerations",
    "full_dynamics",
    "error_dynamics_matrices",
    "gc_error",
    "gt_error",
]

COULOMB_CONSTANT = 8.99e9  # N m^2 / C^2
DEFAULT_MIN_SEPARATION = 0.5  # m


class SingularityError(ValueError):
    """Two spacecraft are closer than the model's minimum separation."""

    def __init__(self, pair: tuple[int, int], distance: float, r_min: float):
        self.pair = pair
        self.distance = distance
        self.r_min = r_min
        super().__init__(
            f"spacecraft {pair[0]} and {pair[1]} are {distance:.6g} m apart "
            f"(minimum separation {r_min:g} m)"
        )


@dataclass(frozen=True)
class FormationModel:
    """``N`` point-charge spacecraft with thrusters, embedded in ``R^d``."""

    masses: np.ndarray
    d: int = 2
    kappa_c: float = COULOMB_CONSTANT
    r_min: float = DEFAULT_MIN_SEPARATION

    def __post_init__(self):
        m = np.array(self.masses, dtype=float).ravel()
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        if m.size < 2:
            raise ValueError(f"masses: need at least 2 spacecraft, got {m.size}")
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValueError(f"masses: every mass must be a positive finite number, got {m.tolist()}")
        if self.d not in (1, 2, 3):
            raise ValueError(f"d: embedding dimension must be 1, 2 or 3, got {self.d}")
        if not self.kappa_c > 0:
            raise ValueError("kappa_c must be positive")
        if not self.r_min > 0:
            raise ValueError("r_min must be positive")

    @property
    def N(self) -> int:
        return int(self.masses.size)

    @cached_property
    def _pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # unordered pairs i < j and the (N, n_pairs) incidence matrix (+1 at i, -1 at j)
        I, J = np.triu_indices(self.N, k=1)
        inc = np.zeros((self.N, I.size))
        inc[I, np.arange(I.size)] = 1.0
        inc[J, np.arange(I.size)] = -1.0
        return I, J, inc

    @cached_property
    def _gt(self) -> np.ndarray:
        N, d, m = self.N, self.d, self.masses
        I = np.eye(d)
        first = -np.kron(np.ones((N - 1, 1)), I) / m[0]
        rest = np.kron(np.diag(1.0 / m[1:]), I)
        G = np.hstack([first, rest])
        G.setflags(write=False)
        return G

    @property
    def n_rel(self) -> int:
        """Length of the relative position vector, ``d (N - 1)``."""
        return self.d * (self.N - 1)

    @property
    def n_state(self) -> int:
        return 2 * self.n_rel

    def check_separation(self, positions: np.ndarray) -> None:
        """Raise :class:`SingularityError` for the first pair closer than ``r_min``."""
        dist = _pairwise_distances(positions)
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] < self.r_min:
            i, j = sorted((int(i), int(j)))
            raise SingularityError((i + 1, j + 1), float(dist[i, j]), self.r_min)


@dataclass
class AbsoluteState:
    """Inertial positions and velocities, each of shape ``(N, d)``."""

    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float)
        self.velocities = np.array(self.velocities, dtype=float)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        if self.velocities.ndim == 1:
            self.velocities = self.velocities[:, None]
        if self.positions.shape != self.velocities.shape:
            raise ValueError(
                f"positions {self.positions.shape} and velocities {self.velocities.shape} differ in shape"
            )

    @classmethod
    def at_rest(cls, positions) -> "AbsoluteState":
        p = np.array(positions, dtype=float)
        return cls(p, np.zeros_like(p))

    def copy(self) -> "AbsoluteState":
        return AbsoluteState(self.positions.copy(), self.velocities.copy())


@dataclass
class ErrorState:
    """Relative position error ``xi`` and its rate ``nu``; packed as ``Col(xi, nu)``."""

    xi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        self.xi = np.array(self.xi, dtype=float).ravel()
        self.nu = np.array(self.nu, dtype=float).ravel()
        if self.xi.shape != self.nu.shape:
            raise ValueError(f"xi has length {self.xi.size} but nu has length {self.nu.size}")

    @classmethod
    def from_packed(cls, Xi) -> "ErrorState":
        Xi = np.asarray(Xi, dtype=float).ravel()
        if Xi.size % 2:
            raise ValueError(f"packed error state has odd length {Xi.size}")
        h = Xi.size // 2
        return cls(Xi[:h], Xi[h:])

    def packed(self) -> np.ndarray:
        return np.concatenate([self.xi, self.nu])

    def __len__(self) -> int:
        return 2 * self.xi.size


@dataclass
class DesiredConfiguration:
    """Target relative positions ``xi_des`` (spacecraft 2..N relative to spacecraft 1)."""

    xi_des: np.ndarray

    def __post_init__(self):
        self.xi_des = np.array(self.xi_des, dtype=float).ravel()

    def validate(self, model: FormationModel) -> None:
        if self.xi_des.size != model.n_rel:
            raise ValueError(f"xi_des: expected length {model.n_rel}, got {self.xi_des.size}")
        pos = _positions_from_relative(self.xi_des, model.N, model.d)
        dist = _pairwise_distances(pos)
        np.fill_diagonal(dist, np.inf)
        if np.min(dist) <= 0:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            raise ValueError(f"xi_des: desired positions of spacecraft {min(i, j) + 1} and {max(i, j) + 1} coincide")


@dataclass
class Inputs:
    """Charges ``q`` (C, length N) and stacked thrusts ``T`` (N, length dN)."""

    q: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        self.q = np.array(self.q, dtype=float).ravel()
        self.T = np.array(self.T, dtype=float).ravel()

    @classmethod
    def zeros(cls, model: FormationModel) -> "Inputs":
        return cls(np.zeros(model.N), np.zeros(model.d * model.N))


def _pairwise_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _positions_from_relative(xi_tilde: np.ndarray, N: int, d: int) -> np.ndarray:
    # spacecraft 1 pinned at the origin
    pos = np.zeros((N, d))
    pos[1:] = np.asarray(xi_tilde, dtype=float).reshape(N - 1, d)
    return pos


def relative_from_absolute(s: AbsoluteState, des: DesiredConfiguration) -> ErrorState:
    """Error coordinates of an inertial state with respect to ``des``."""
    pos, vel = s.positions, s.velocities
    xi_tilde = (pos[1:] - pos[0]).ravel()
    if xi_tilde.size != des.xi_des.size:
        raise ValueError(
            f"state implies {xi_tilde.size} relative coordinates but xi_des has {des.xi_des.size}"
        )
    return ErrorState(xi_tilde - des.xi_des, (vel[1:] - vel[0]).ravel())


def gt_matrix(model: FormationModel) -> np.ndarray:
    """Map from stacked thrusts to relative accelerations, shape ``(d(N-1), dN)``.

    The matrix depends only on the model, so a cached read-only array is returned.
    """
    return model._gt


def coulomb_coefficients(model: FormationModel, positions: np.ndarray) -> np.ndarray:
    """Array ``C`` of shape ``(N, N, d)`` with acceleration of craft ``i`` = ``sum_j C[i, j] q_i q_j``.

    Raises :class:`SingularityError` when any pair is closer than ``model.r_min``.
    """
    positions = np.asarray(positions, dtype=float)
    model.check_separation(positions)
    diff = positions[:, None, :] - positions[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(r2, 1.0)
    inv_r3 = r2 ** -1.5
    np.fill_diagonal(inv_r3, 0.0)
    return (model.kappa_c / model.masses)[:, None, None] * diff * inv_r3[:, :, None]


def gc_matrix(model: FormationModel, xi_tilde) -> np.ndarray:
    """Coulomb input matrix: relative accelerations per entry of ``vec(q q^T)``.

    Shape ``(d(N-1), N**2)``. The coefficient of each pair ``(i, j)`` is split
    evenly between the ``(i, j)`` and ``(j, i)`` columns, so the columns of
    self-products ``q_a q_a`` are exactly zero.
    """
    N, d = model.N, model.d
    xi_tilde = np.asarray(xi_tilde, dtype=float).ravel()
    if xi_tilde.size != model.n_rel:
        raise ValueError(f"xi_tilde: expected length {model.n_rel}, got {xi_tilde.size}")
    C = coulomb_coefficients(model, _positions_from_relative(xi_tilde, N, d))

    # G[i, c, a, b]: component c of craft i's acceleration per q_a q_b
    G = np.zeros((N, d, N, N))
    idx = np.arange(N)
    half = 0.5 * C.transpose(0, 2, 1)  # [i, c, j]
    G[idx, :, idx, :] += half
    G[idx, :, :, idx] += half
    rel = G[1:] - G[0]
    # flatten (a, b) column-major: column index b * N + a
    return rel.transpose(0, 1, 3, 2).reshape(model.n_rel, N * N)


def accelerations(model: FormationModel, positions: np.ndarray, q: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Inertial accelerations for raw arrays; see :func:`full_dynamics`."""
    I, J, inc = model._pairs
    diff = positions[I] - positions[J]
    r2 = np.sum(diff * diff, axis=1)
    if r2.min() < model.r_min**2:
        k = int(np.argmin(r2))
        raise SingularityError((int(I[k]) + 1, int(J[k]) + 1), float(np.sqrt(r2[k])), model.r_min)
    # force on i from j; j receives the opposite
    f = (model.kappa_c * q[I] * q[J] / (r2 * np.sqrt(r2)))[:, None] * diff
    return (inc @ f + T.reshape(model.N, model.d)) / model.masses[:, None]


def full_dynamics(model: FormationModel, s: AbsoluteState, inputs: Inputs) -> np.ndarray:
    """Inertial accelerations of every spacecraft, shape ``(N, d)``."""
    return accelerations(model, s.positions, inputs.q, inputs.T)


def error_dynamics_matrices(model: FormationModel) -> tuple[np.ndarray, np.ndarray]:
    """Double-integrator matrices ``(A, B)`` of the error dynamics."""
    n = model.n_rel
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    B = np.zeros((2 * n, n))
    B[n:, :] = np.eye(n)
    return A, B


def gc_error(model: FormationModel, des: DesiredConfiguration, xi) -> np.ndarray:
    """``B @ gc_matrix(xi + xi_des)``: Coulomb input matrix in error coordinates."""
    _, B = error_dynamics_matrices(model)
    return B @ gc_matrix(model, np.asarray(xi, dtype=float) + des.xi_des)


def gt_error(model: FormationModel) -> np.ndarray:
    """``B @ gt_matrix``: thrust input matrix in error coordinates."""
    _, B = error_dynamics_matrices(model)
    return B @ gt_matrix(model)
