"""Scenario files: YAML documents describing one formation experiment.

Layout::

    formation:  {dimension: 2, masses: [...]}
    initial:    {positions: [[x, y], ...], velocities: [[vx, vy], ...]}
    desired:    {xi_des: [...]}
    clf:        {preset: square | P: [[...], ...], epsilon: 0.01, verify_tol: 1.0e-10}
    allocator:  {eta: 0.99 | eta_schedule: [[0, 1.0], [300, 0.99]], q_max: 0.01}
    simulation: {dt: 0.1, t_f: 700, substeps: 10}
    output:     run.csv

Every field is validated on load; errors name the offending field.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
import os
from pathlib import Path

import numpy as np
import yaml

from .allocator import AllocatorConfig
from .clf import CLFCheck, QuadraticCLF, square_clf, verify_clf
from .formation import AbsoluteState, DesiredConfiguration, FormationModel
from .simulator import EtaSchedule, SimConfig

__all__ = [
    "ScenarioError",
    "Scenario",
    "CheckResult",
    "parse_scenario",
    "load_scenario",
    "scenario_to_dict",
    "dump_scenario",
    "validate_scenario",
    "bundled_scenario_path",
    "BUNDLED_SCENARIOS",
]

CLF_PRESETS = ("square",)
BUNDLED_SCENARIOS = ("paper_square",)


class ScenarioError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class Scenario:
    model: FormationModel
    initial: AbsoluteState
    desired: DesiredConfiguration
    clf: QuadraticCLF
    eta_schedule: EtaSchedule
    q_max: float
    sim: SimConfig
    clf_preset: str | None = None
    clf_verify_tol: float = 1e-10
    output: str | None = None
    name: str = ""

    @property
    def allocator_config(self) -> AllocatorConfig:
        return AllocatorConfig(self.eta_schedule(0.0), self.q_max)

    def with_overrides(
        self,
        eta=None,
        dt: float | None = None,
        t_f: float | None = None,
        q_max: float | None = None,
        substeps: int | None = None,
        output: str | None = None,
    ) -> "Scenario":
        """Copy with command-line style overrides applied (``None`` keeps a field)."""
        sched = self.eta_schedule if eta is None else EtaSchedule.coerce(eta)
        sim = SimConfig(
            dt=self.sim.dt if dt is None else float(dt),
            t_f=self.sim.t_f if t_f is None else float(t_f),
            eta_schedule=sched,
            integrator_substeps=self.sim.integrator_substeps if substeps is None else int(substeps),
        )
        return replace(
            self,
            eta_schedule=sched,
            sim=sim,
            q_max=self.q_max if q_max is None else float(q_max),
            output=self.output if output is None else output,
        )


def _section(doc: dict, key: str) -> dict:
    sec = doc.get(key)
    if not isinstance(sec, dict):
        raise ScenarioError(key, "missing or not a mapping")
    return sec


def _get(sec: dict, prefix: str, key: str, default=...):
    if key not in sec:
        if default is ...:
            raise ScenarioError(f"{prefix}.{key}", "missing")
        return default
    return sec[key]


def _array(value, field: str, shape=None) -> np.ndarray:
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(field, "expected numbers") from None
    if not np.all(np.isfinite(a)):
        raise ScenarioError(field, "non-finite entries")
    if shape is not None and a.shape != shape:
        raise ScenarioError(field, f"expected shape {shape}, got {a.shape}")
    return a


def _number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(field, f"expected a number, got {value!r}")
    return float(value)


def parse_scenario(doc: dict, check_clf: bool = True, name: str = "") -> Scenario:
    """Build a validated :class:`Scenario` from a parsed document.

    With ``check_clf`` the CLF condition is verified at the scenario's
    ``clf.verify_tol`` and a failure raises :class:`ScenarioError`.
    """
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a mapping")

    form = _section(doc, "formation")
    d = _get(form, "formation", "dimension")
    if isinstance(d, bool) or not isinstance(d, int) or d not in (1, 2, 3):
        raise ScenarioError("formation.dimension", f"must be 1, 2 or 3, got {d!r}")
    masses = _array(_get(form, "formation", "masses"), "formation.masses")
    if masses.ndim != 1 or masses.size < 2:
        raise ScenarioError("formation.masses", "need a list of at least two masses")
    if np.any(masses <= 0):
        bad = int(np.flatnonzero(masses <= 0)[0])
        raise ScenarioError(f"formation.masses[{bad}]", f"mass must be positive, got {masses[bad]}")
    model = FormationModel(masses, d=d)
    N = model.N

    init = _section(doc, "initial")
    pos = _array(_get(init, "initial", "positions"), "initial.positions", (N, d))
    vel_raw = _get(init, "initial", "velocities", None)
    vel = np.zeros_like(pos) if vel_raw is None else _array(vel_raw, "initial.velocities", (N, d))
    initial = AbsoluteState(pos, vel)
    try:
        model.check_separation(pos)
    except ValueError as exc:
        raise ScenarioError("initial.positions", str(exc)) from None

    des_sec = _section(doc, "desired")
    des = DesiredConfiguration(_array(_get(des_sec, "desired", "xi_des"), "desired.xi_des", (model.n_rel,)))
    try:
        des.validate(model)
    except ValueError as exc:
        raise ScenarioError("desired.xi_des", str(exc)) from None

    clf_sec = _section(doc, "clf")
    eps = _number(_get(clf_sec, "clf", "epsilon"), "clf.epsilon")
    if eps < 0:
        raise ScenarioError("clf.epsilon", f"must be nonnegative, got {eps}")
    verify_tol = _number(_get(clf_sec, "clf", "verify_tol", 1e-10), "clf.verify_tol")
    preset = clf_sec.get("preset")
    if ("P" in clf_sec) == (preset is not None):
        raise ScenarioError("clf", "give exactly one of 'preset' or 'P'")
    if preset is not None:
        if preset not in CLF_PRESETS:
            raise ScenarioError("clf.preset", f"unknown preset {preset!r} (known: {', '.join(CLF_PRESETS)})")
        clf = square_clf(model.n_rel, eps)
    else:
        P = _array(clf_sec["P"], "clf.P", (model.n_state, model.n_state))
        try:
            clf = QuadraticCLF(P, eps)
        except ValueError as exc:
            raise ScenarioError("clf.P", str(exc)) from None
    if check_clf:
        chk = verify_clf(clf, model, tol=verify_tol)
        if not chk.passed:
            raise ScenarioError("clf", f"CLF condition fails: margin {chk.margin:.6e} > {verify_tol:g}")

    alloc = _section(doc, "allocator")
    has_eta, has_sched = "eta" in alloc, "eta_schedule" in alloc
    if has_eta == has_sched:
        raise ScenarioError("allocator", "give exactly one of 'eta' or 'eta_schedule'")
    try:
        if has_eta:
            sched = EtaSchedule.constant(_number(alloc["eta"], "allocator.eta"))
        else:
            sched = EtaSchedule(tuple(tuple(p) for p in alloc["eta_schedule"]))
    except (TypeError, ValueError) as exc:
        field = "allocator.eta" if has_eta else "allocator.eta_schedule"
        raise ScenarioError(field, str(exc)) from None
    q_max = _number(_get(alloc, "allocator", "q_max"), "allocator.q_max")
    if not q_max > 0:
        raise ScenarioError("allocator.q_max", f"must be positive, got {q_max}")

    sim_sec = _section(doc, "simulation")
    substeps = _get(sim_sec, "simulation", "substeps", 10)
    if isinstance(substeps, bool) or not isinstance(substeps, int):
        raise ScenarioError("simulation.substeps", f"expected an integer, got {substeps!r}")
    dt = _number(_get(sim_sec, "simulation", "dt"), "simulation.dt")
    t_f = _number(_get(sim_sec, "simulation", "t_f"), "simulation.t_f")
    try:
        sim = SimConfig(dt=dt, t_f=t_f, eta_schedule=sched, integrator_substeps=substeps)
    except ValueError as exc:
        # SimConfig messages lead with the offending field name
        key = str(exc).partition(":")[0]
        raise ScenarioError(f"simulation.{key}", str(exc).partition(":")[2].strip()) from None

    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ScenarioError("output", "expected a path string")

    return Scenario(
        model=model,
        initial=initial,
        desired=des,
        clf=clf,
        eta_schedule=sched,
        q_max=q_max,
        sim=sim,
        clf_preset=preset,
        clf_verify_tol=verify_tol,
        output=output,
        name=name,
    )


def bundled_scenario_path(name: str) -> Path:
    if name not in BUNDLED_SCENARIOS:
        raise KeyError(name)
    return Path(str(resources.files("coulomb_formation") / "data" / f"{name}.scenario"))


def _resolve(path: str | os.PathLike) -> Path:
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED_SCENARIOS:
        return bundled_scenario_path(str(path))
    return p


def load_scenario(path: str | os.PathLike, check_clf: bool = True) -> Scenario:
    """Read a scenario file; a bare bundled name such as ``paper_square`` also works."""
    p = _resolve(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError("<file>", f"cannot read {p}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("<file>", f"not valid YAML: {exc}") from None
    return parse_scenario(doc, check_clf=check_clf, name=p.stem)


def scenario_to_dict(s: Scenario) -> dict:
    clf: dict = {"epsilon": float(s.clf.epsilon), "verify_tol": float(s.clf_verify_tol)}
    if s.clf_preset is not None:
        clf["preset"] = s.clf_preset
    else:
        clf["P"] = s.clf.P.tolist()
    if s.eta_schedule.is_constant:
        alloc: dict = {"eta": s.eta_schedule.segments[0][1]}
    else:
        alloc = {"eta_schedule": [list(seg) for seg in s.eta_schedule.segments]}
    alloc["q_max"] = float(s.q_max)
    doc = {
        "formation": {"dimension": s.model.d, "masses": s.model.masses.tolist()},
        "initial": {"positions": s.initial.positions.tolist(), "velocities": s.initial.velocities.tolist()},
        "desired": {"xi_des": s.desired.xi_des.tolist()},
        "clf": clf,
        "allocator": alloc,
        "simulation": {"dt": s.sim.dt, "t_f": s.sim.t_f, "substeps": int(s.sim.integrator_substeps)},
    }
    if s.output is not None:
        doc["output"] = s.output
    return doc


def dump_scenario(s: Scenario, path: str | os.PathLike) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(s), sort_keys=False))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def validate_scenario(path: str | os.PathLike) -> tuple[list[CheckResult], CLFCheck | None]:
    """Run every structural check plus the CLF condition; failures are reported, not raised."""
    try:
        s = load_scenario(path, check_clf=False)
    except ScenarioError as exc:
        return [CheckResult("structure", False, str(exc))], None
    checks = [CheckResult("structure", True, f"N={s.model.N}, d={s.model.d}, state dimension {s.model.n_state}")]
    chk = verify_clf(s.clf, s.model, tol=s.clf_verify_tol)
    detail = f"margin {chk.margin:.6e} (tolerance {s.clf_verify_tol:g})"
    if not chk.passed:
        w = chk.witness
        detail += "; violating error state " + np.array2string(w, precision=6, separator=", ", max_line_width=1000)
    checks.append(CheckResult("clf", chk.passed, detail))
    return checks, chk
