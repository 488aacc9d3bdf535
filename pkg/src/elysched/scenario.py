"""Scenario definition, TOML ingestion/serialization, randomized target
generation and fleet scale-up."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # Python 3.10
    import tomli as tomllib

from .admm import SolverSettings
from .economics import FinancialParameters, PeriodContext
from .electrolyzer import PeaParameters, default_curve


class ScenarioError(ValueError):
    """Validation failure with the offending field in the message."""


class FaultKind(enum.Enum):
    MALFUNCTION = "malfunction"


@dataclass(frozen=True)
class FaultEvent:
    agent: str
    period: int          # 1-based
    iteration: int       # 1-based loop pass within the period
    kind: FaultKind = FaultKind.MALFUNCTION


@dataclass(frozen=True)
class Scenario:
    name: str
    fleet: tuple[tuple[PeaParameters, FinancialParameters], ...]
    periods: int
    delta_int: float                     # hours
    targets: tuple[float, ...]           # kg/h per period
    prices_eur_mwh: tuple[float, ...]    # as tabulated; converted on use
    faults: tuple[FaultEvent, ...] = ()
    solver: SolverSettings = field(default_factory=SolverSettings)

    def context(self, t: int) -> PeriodContext:
        """PeriodContext for 1-based period t (prices become EUR/kWh here)."""
        return PeriodContext(c_e=self.prices_eur_mwh[t - 1] / 1000.0,
                             delta_int=self.delta_int,
                             demand=self.targets[t - 1])

    def agent_ids(self) -> list[str]:
        return [pea.id for pea, _ in self.fleet]


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ScenarioError(f"{where}: missing required key '{key}'")
    return table[key]


def _build_fleet_entry(row: dict, idx: int) -> tuple[PeaParameters, FinancialParameters]:
    where = f"fleet[{idx}]"
    mh2_nom = float(_require(row, "mh2_nom_kg_h", where))
    if {"alpha", "beta", "gamma"} <= row.keys():
        curve = (float(row["alpha"]), float(row["beta"]), float(row["gamma"]))
    elif row.keys() & {"alpha", "beta", "gamma"}:
        raise ScenarioError(f"{where}: give all of alpha/beta/gamma or none")
    else:
        curve = default_curve(mh2_nom)
    try:
        pea = PeaParameters(
            id=str(_require(row, "id", where)),
            p_el=float(_require(row, "p_el_kw", where)),
            op_min=float(row.get("op_min_pct", 8.0)),
            op_max=float(row.get("op_max_pct", 100.0)),
            alpha=curve[0], beta=curve[1], gamma=curve[2],
            t_h=int(row.get("holding_periods", 1)),
            mh2_nom=mh2_nom)
        fin = FinancialParameters(
            capex0=float(_require(row, "capex0_eur", where)),
            omf=float(row.get("om_factor_per_yr", 0.015)),
            ut=float(row.get("utilization_yr", 20.0)),
            lf=float(row.get("load_factor", 0.98)),
            r=float(row.get("discount_rate", 0.0973)),
            c_su=float(row.get("startup_cost_eur", 0.12)),
            delta=float(row.get("delta_guard_kg_h", 2e-5)))
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    return pea, fin


def _build_solver(table: dict) -> SolverSettings:
    try:
        return SolverSettings(
            penalty=float(table.get("penalty", 200.0)),
            dual_step=float(table.get("dual_step", 0.5)),
            eps=float(table.get("eps", 1e-3)),
            eps_demand=float(table.get("eps_demand", 1e-3)),
            max_iterations=int(table.get("max_iterations", 100)),
            seed=int(table.get("seed", 42)),
            timeout_ms=float(table.get("timeout_ms", 50.0)))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"solver: {exc}") from exc


def _validate(sc: Scenario) -> Scenario:
    if not sc.fleet:
        raise ScenarioError("fleet: must contain at least one module")
    ids = sc.agent_ids()
    if len(set(ids)) != len(ids):
        raise ScenarioError(f"fleet: duplicate module ids {ids}")
    if len(sc.targets) != sc.periods:
        raise ScenarioError(
            f"targets_kg_h: expected {sc.periods} values, got {len(sc.targets)}")
    if len(sc.prices_eur_mwh) != sc.periods:
        raise ScenarioError(
            f"prices_eur_mwh: expected {sc.periods} values, got "
            f"{len(sc.prices_eur_mwh)} (targets has {len(sc.targets)})")
    if sc.delta_int <= 0:
        raise ScenarioError(f"delta_int_h: must be > 0, got {sc.delta_int}")
    for i, d in enumerate(sc.targets):
        if d < 0:
            raise ScenarioError(f"targets_kg_h[{i}]: must be >= 0, got {d}")
    for i, c in enumerate(sc.prices_eur_mwh):
        if c < 0:
            raise ScenarioError(f"prices_eur_mwh[{i}]: must be >= 0, got {c}")
    for i, ev in enumerate(sc.faults):
        if ev.agent not in ids:
            raise ScenarioError(f"faults[{i}]: unknown agent '{ev.agent}'")
        if not 1 <= ev.period <= sc.periods:
            raise ScenarioError(
                f"faults[{i}]: period {ev.period} outside 1..{sc.periods}")
        if not 1 <= ev.iteration <= sc.solver.max_iterations:
            raise ScenarioError(
                f"faults[{i}]: iteration {ev.iteration} outside "
                f"1..{sc.solver.max_iterations}")
    return sc


def scenario_from_dict(doc: dict, name: str) -> Scenario:
    periods = int(_require(doc, "periods", "scenario"))
    fleet_rows = _require(doc, "fleet", "scenario")
    fleet = tuple(_build_fleet_entry(row, i) for i, row in enumerate(fleet_rows))
    faults = tuple(
        FaultEvent(agent=str(_require(row, "agent", f"faults[{i}]")),
                   period=int(_require(row, "period", f"faults[{i}]")),
                   iteration=int(_require(row, "iteration", f"faults[{i}]")),
                   kind=FaultKind(row.get("kind", "malfunction")))
        for i, row in enumerate(doc.get("faults", ())))
    sc = Scenario(
        name=name,
        fleet=fleet,
        periods=periods,
        delta_int=float(doc.get("delta_int_h", 0.25)),
        targets=tuple(float(v) for v in _require(doc, "targets_kg_h", "scenario")),
        prices_eur_mwh=tuple(float(v) for v in _require(doc, "prices_eur_mwh", "scenario")),
        faults=tuple(sorted(faults, key=lambda e: (e.period, e.iteration))),
        solver=_build_solver(doc.get("solver", {})))
    return _validate(sc)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path.name}: parse error: {exc}") from exc
    return scenario_from_dict(doc, name=path.stem)


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (e.g. 'case_study')."""
    return Path(resources.files("elysched").joinpath(f"data/{name}.toml"))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    return f'"{v}"'


def serialize_scenario(sc: Scenario) -> str:
    """Canonical TOML text; load(serialize(sc)) == sc."""
    lines = [
        f"periods = {sc.periods}",
        f"delta_int_h = {_fmt(sc.delta_int)}",
        "targets_kg_h = [" + ", ".join(repr(v) for v in sc.targets) + "]",
        "prices_eur_mwh = [" + ", ".join(repr(v) for v in sc.prices_eur_mwh) + "]",
        "",
        "[solver]",
        f"penalty = {_fmt(sc.solver.penalty)}",
        f"dual_step = {_fmt(sc.solver.dual_step)}",
        f"eps = {_fmt(sc.solver.eps)}",
        f"eps_demand = {_fmt(sc.solver.eps_demand)}",
        f"max_iterations = {sc.solver.max_iterations}",
        f"seed = {sc.solver.seed}",
        f"timeout_ms = {_fmt(sc.solver.timeout_ms)}",
    ]
    for pea, fin in sc.fleet:
        lines += [
            "",
            "[[fleet]]",
            f"id = {_fmt(pea.id)}",
            f"p_el_kw = {_fmt(pea.p_el)}",
            f"op_min_pct = {_fmt(pea.op_min)}",
            f"op_max_pct = {_fmt(pea.op_max)}",
            f"mh2_nom_kg_h = {_fmt(pea.mh2_nom)}",
            f"alpha = {_fmt(pea.alpha)}",
            f"beta = {_fmt(pea.beta)}",
            f"gamma = {_fmt(pea.gamma)}",
            f"holding_periods = {pea.t_h}",
            f"capex0_eur = {_fmt(fin.capex0)}",
            f"om_factor_per_yr = {_fmt(fin.omf)}",
            f"utilization_yr = {_fmt(fin.ut)}",
            f"load_factor = {_fmt(fin.lf)}",
            f"discount_rate = {_fmt(fin.r)}",
            f"startup_cost_eur = {_fmt(fin.c_su)}",
            f"delta_guard_kg_h = {_fmt(fin.delta)}",
        ]
    for ev in sc.faults:
        lines += [
            "",
            "[[faults]]",
            f"agent = {_fmt(ev.agent)}",
            f"period = {ev.period}",
            f"iteration = {ev.iteration}",
            f"kind = {_fmt(ev.kind.value)}",
        ]
    return "\n".join(lines) + "\n"


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(serialize_scenario(sc))


def scenario_digest(sc: Scenario) -> str:
    return hashlib.sha256(serialize_scenario(sc).encode()).hexdigest()[:16]


def fleet_production_bounds(fleet) -> tuple[float, float]:
    """Aggregate output range [sum mh2(op_min), sum mh2(op_max)] in kg/h."""
    lo = sum(pea.curve(pea.op_min) for pea, _ in fleet)
    hi = sum(pea.curve(pea.op_max) for pea, _ in fleet)
    return lo, hi


def generate_targets(fleet, periods: int, seed: int) -> list[float]:
    """Demands drawn uniformly inside the fleet's feasible output range."""
    if not fleet:
        raise ScenarioError("fleet: must contain at least one module")
    if periods == 0:
        return []
    lo, hi = fleet_production_bounds(fleet)
    rng = np.random.default_rng(seed)
    return [float(v) for v in rng.uniform(lo, hi, periods)]


def scale_fleet(sc: Scenario, n: int, rescale_targets: bool = True) -> Scenario:
    """Fleet of n copies of the first module (fresh ids); targets optionally
    rescaled by the capacity ratio."""
    if n < 1:
        raise ScenarioError(f"fleet size must be >= 1, got {n}")
    pea0, fin0 = sc.fleet[0]
    base = pea0.id.rstrip("0123456789") or "pea"
    fleet = tuple((replace(pea0, id=f"{base}{i + 1}"), fin0) for i in range(n))
    targets = sc.targets
    if rescale_targets:
        old = sum(p.mh2_nom for p, _ in sc.fleet)
        new = sum(p.mh2_nom for p, _ in fleet)
        targets = tuple(d * new / old for d in sc.targets)
    known = {p.id for p, _ in fleet}
    faults = tuple(ev for ev in sc.faults if ev.agent in known)
    return _validate(replace(sc, name=f"{sc.name}_x{n}", fleet=fleet,
                             targets=targets, faults=faults))
