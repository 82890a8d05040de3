"""Sample-and-hold closed loop: allocate at each sample, hold inputs, integrate with RK4."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math
from typing import Sequence

import numpy as np

from .allocator import AllocatorConfig, Branch, allocate
from .clf import QuadraticCLF
from .formation import (
    AbsoluteState,
    DesiredConfiguration,
    FormationModel,
    Inputs,
    SingularityError,
    accelerations,
    relative_from_absolute,
)

__all__ = [
    "EtaSchedule",
    "SimConfig",
    "SimulationRecord",
    "SimulationAborted",
    "step",
    "run",
    "impulse",
    "sweep",
]


class SimulationAborted(RuntimeError):
    """Integration hit a singular (collision) configuration."""

    def __init__(self, time: float, cause: SingularityError):
        self.time = time
        self.pair = cause.pair
        super().__init__(f"simulation aborted at t = {time:.6g} s: {cause}")


@dataclass(frozen=True)
class EtaSchedule:
    """Piecewise-constant ``eta(t)``; each ``(t_start, eta)`` holds on ``[t_start, next)``."""

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        segs = tuple((float(t), float(e)) for t, e in self.segments)
        if not segs:
            raise ValueError("eta schedule is empty")
        if segs[0][0] != 0.0:
            raise ValueError(f"eta schedule must start at t = 0, starts at {segs[0][0]}")
        for (t0, _), (t1, _) in zip(segs, segs[1:]):
            if not t1 > t0:
                raise ValueError("eta schedule switch times must be strictly increasing")
        for _, e in segs:
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"eta schedule value {e} outside [0, 1]")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, eta: float) -> "EtaSchedule":
        return cls(((0.0, eta),))

    @classmethod
    def coerce(cls, value) -> "EtaSchedule":
        if isinstance(value, EtaSchedule):
            return value
        if np.ndim(value) == 0:
            return cls.constant(float(value))
        return cls(tuple(tuple(p) for p in value))

    def __call__(self, t: float) -> float:
        eta = self.segments[0][1]
        for ts, e in self.segments[1:]:
            # sample times are k * dt, so allow rounding at the switch instant
            if t >= ts - 1e-9 * max(1.0, abs(ts)):
                eta = e
            else:
                break
        return eta

    @property
    def is_constant(self) -> bool:
        return len(self.segments) == 1


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    t_f: float = 700.0
    eta_schedule: EtaSchedule = field(default_factory=lambda: EtaSchedule.constant(0.99))
    integrator_substeps: int = 10

    def __post_init__(self):
        object.__setattr__(self, "eta_schedule", EtaSchedule.coerce(self.eta_schedule))
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt: must be positive, got {self.dt}")
        if not (math.isfinite(self.t_f) and self.t_f >= 0):
            raise ValueError(f"t_f: must be nonnegative, got {self.t_f}")
        if int(self.integrator_substeps) != self.integrator_substeps or self.integrator_substeps < 1:
            raise ValueError(f"substeps: must be an integer >= 1, got {self.integrator_substeps}")

    @property
    def n_intervals(self) -> int:
        return int(math.floor(self.t_f / self.dt + 1e-9))


@dataclass
class SimulationRecord:
    """Per-sample log. Row ``k`` holds the state at ``t[k]`` and the inputs
    computed from it; the inputs of the last row are never applied."""

    dt: float
    t: np.ndarray
    Xi: np.ndarray
    q: np.ndarray
    T: np.ndarray
    V: np.ndarray
    eta: np.ndarray
    branch: list[Branch]
    positions: np.ndarray
    velocities: np.ndarray

    @property
    def n_rel(self) -> int:
        return self.Xi.shape[1] // 2

    @property
    def impulse(self) -> float:
        return impulse(self)

    @property
    def final_xi_norm(self) -> float:
        return float(np.linalg.norm(self.Xi[-1, : self.n_rel]))

    @property
    def final_Xi_norm(self) -> float:
        return float(np.linalg.norm(self.Xi[-1]))

    def __len__(self) -> int:
        return self.t.size


def impulse(record: SimulationRecord) -> float:
    """``sum_k |T_k| dt`` over the applied hold intervals (exact under zero-order hold)."""
    if len(record) == 0:
        raise ValueError("empty record")
    applied = record.T[:-1]
    return float(np.sum(np.linalg.norm(applied, axis=1)) * record.dt)


def _rk4_substep(model: FormationModel, x: np.ndarray, v: np.ndarray, inputs: Inputs, h: float):
    q, T = inputs.q, inputs.T
    k1x, k1v = v, accelerations(model, x, q, T)
    k2x, k2v = v + 0.5 * h * k1v, accelerations(model, x + 0.5 * h * k1x, q, T)
    k3x, k3v = v + 0.5 * h * k2v, accelerations(model, x + 0.5 * h * k2x, q, T)
    k4x, k4v = v + h * k3v, accelerations(model, x + h * k3x, q, T)
    x_new = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v_new = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return x_new, v_new


def step(model: FormationModel, state: AbsoluteState, inputs: Inputs, dt: float, substeps: int = 10) -> AbsoluteState:
    """Integrate the inertial dynamics over ``dt`` with ``inputs`` held constant.

    Raises :class:`SingularityError` if a collision is encountered at any
    RK4 stage.
    """
    x = state.positions.copy()
    v = state.velocities.copy()
    h = dt / substeps
    for _ in range(substeps):
        x, v = _rk4_substep(model, x, v, inputs, h)
    model.check_separation(x)
    return AbsoluteState(x, v)


def run(
    model: FormationModel,
    des: DesiredConfiguration,
    clf: QuadraticCLF,
    alloc_cfg: AllocatorConfig,
    sim_cfg: SimConfig,
    initial: AbsoluteState,
) -> SimulationRecord:
    """Closed-loop simulation; ``alloc_cfg.eta`` is replaced by the schedule value at each sample."""
    K = sim_cfg.n_intervals
    dt = sim_cfg.dt
    n2 = model.n_state
    N, dN = model.N, model.d * model.N

    t = np.arange(K + 1) * dt
    Xi = np.empty((K + 1, n2))
    q = np.empty((K + 1, N))
    T = np.empty((K + 1, dN))
    V = np.empty(K + 1)
    etas = np.empty(K + 1)
    pos = np.empty((K + 1,) + initial.positions.shape)
    vel = np.empty_like(pos)
    branches: list[Branch] = []

    cfgs: dict[float, AllocatorConfig] = {}
    state = initial.copy()
    model.check_separation(state.positions)
    for k in range(K + 1):
        eta = sim_cfg.eta_schedule(t[k])
        cfg = cfgs.get(eta)
        if cfg is None:
            cfg = cfgs[eta] = AllocatorConfig(eta, alloc_cfg.q_max, alloc_cfg.clf_violation_tol)
        err = relative_from_absolute(state, des)
        try:
            res = allocate(clf, model, des, err, cfg)
        except SingularityError as exc:
            raise SimulationAborted(float(t[k]), exc) from exc

        Xi[k] = err.packed()
        q[k], T[k], V[k], etas[k] = res.q_star, res.T_star, res.V, eta
        branches.append(res.branch)
        pos[k], vel[k] = state.positions, state.velocities
        if k == K:
            break
        try:
            state = step(model, state, Inputs(res.q_star, res.T_star), dt, sim_cfg.integrator_substeps)
        except SingularityError as exc:
            raise SimulationAborted(float(t[k]), exc) from exc

    return SimulationRecord(dt=dt, t=t, Xi=Xi, q=q, T=T, V=V, eta=etas, branch=branches, positions=pos, velocities=vel)


def _run_one(args):
    return run(*args)


def sweep(
    model: FormationModel,
    des: DesiredConfiguration,
    clf: QuadraticCLF,
    alloc_cfg: AllocatorConfig,
    sim_cfg: SimConfig,
    initial: AbsoluteState,
    etas: Sequence[float],
    workers: int | None = 1,
) -> list[SimulationRecord]:
    """One constant-``eta`` run per entry of ``etas``, returned in the same order."""
    jobs = []
    for eta in etas:
        cfg = SimConfig(sim_cfg.dt, sim_cfg.t_f, EtaSchedule.constant(eta), sim_cfg.integrator_substeps)
        jobs.append((model, des, clf, AllocatorConfig(eta, alloc_cfg.q_max, alloc_cfg.clf_violation_tol), cfg, initial))
    if workers == 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
