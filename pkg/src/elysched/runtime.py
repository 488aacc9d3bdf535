"""Multi-agent execution of the scheduling loop: per-iteration broadcast
and collection of production quantities, inactivity detection, the period
loop with warm starts, and fault injection.

Simulation mode advances agents in logical rounds, so a missing message is
detected by absence from the round and results are reproducible.  The
optional real-time mode runs one thread per agent against a wall-clock
timeout.
"""

from __future__ import annotations

import enum
import statistics
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .admm import (AdmmState, AgentContext, SolverSettings, XUpdateResult,
                   converged, damped_z_step, deviation, dual_update,
                   init_state, x_update)
from .economics import (CostBreakdown, FinancialParameters, PeriodContext,
                        interval_cost, mlcoh, mlcoh_gradient)
from .electrolyzer import (OperatingState, PeaParameters, PeaStatus,
                           advance_status, may_produce, production_rate,
                           startup_indicator)
from .scenario import FaultEvent, Scenario, scenario_digest


class MessageKind(enum.Enum):
    PRODUCTION_QTY = "production_qty"
    SHUTDOWN = "shutdown"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    sender: str
    period: int
    iteration: int
    qty: float
    # published alongside the quantity so peers can weight their dual
    # updates and agree on convergence without a coordinator
    gradient: float = 0.0
    vote: bool = False

    def __post_init__(self):
        if self.qty < 0:
            raise ValueError(f"message qty must be >= 0, got {self.qty}")


@dataclass(frozen=True)
class TraceRow:
    period: int
    iteration: int
    agent: str
    x: float
    z: float
    lam: float
    deviation: float


@dataclass(frozen=True)
class AgentPeriodRecord:
    agent: str
    x: float
    z: float
    lam: float
    state: OperatingState
    mh2: float
    costs: CostBreakdown
    started: bool
    cost_eur: float


@dataclass(frozen=True)
class PeriodResult:
    period: int
    records: tuple[AgentPeriodRecord, ...]
    iterations_used: int
    deviation_rel: float
    converged: bool
    unmet_demand: bool
    wall_time_s: float
    fault_iteration: Optional[int] = None
    recovery_iterations: Optional[int] = None
    recovery_latency_s: Optional[float] = None


@dataclass(frozen=True)
class ScheduleResult:
    scenario: str
    digest: str
    periods: tuple[PeriodResult, ...]
    trace: tuple[TraceRow, ...]
    total_kg: float
    total_cost_eur: float
    mean_mlcoh: float
    total_iterations: int
    max_recovery_latency_s: float

    @property
    def all_converged(self) -> bool:
        return all(p.converged for p in self.periods)


class FleetDownError(RuntimeError):
    """Raised when a collection round finds zero live agents."""


class PeaAgent:
    """One software agent owning one electrolysis module."""

    def __init__(self, pea: PeaParameters, fin: FinancialParameters,
                 settings: SolverSettings, index: int,
                 faults: tuple[FaultEvent, ...] = ()):
        self.pea = pea
        self.fin = fin
        self.settings = settings
        self.index = index
        self.id = pea.id
        self.status = PeaStatus()
        self.prev_achieved = OperatingState.PRODUCTION
        self.state = AdmmState()
        self.pending_state = OperatingState.PRODUCTION
        self.gradient = 0.0
        self.skip_rounds: set[tuple[int, int]] = set()  # test hook: lost msgs
        self.fault_at: Optional[tuple[int, int]] = None
        for ev in faults:
            if ev.agent == self.id:
                self.fault_at = (ev.period, ev.iteration)
        self.rng = np.random.default_rng(
            np.random.SeedSequence(entropy=settings.seed,
                                   spawn_key=(index,)))

    # -- period lifecycle -------------------------------------------------

    def begin_period(self, t: int, warm: bool) -> None:
        if warm:
            self.state.lam = 0.0
            self.state.k = 0
            self.state.history = None
            self.state.g_ref = 1.0
        else:
            self.state = init_state(self.settings, self.pea, self.rng)
        if self.status.state is OperatingState.IDLE or not self.status.active:
            self.state.x = 0.0
            if not warm:
                self.state.z = 0.0
        self.pending_state = (OperatingState.PRODUCTION if self.state.x > 0
                              else OperatingState.IDLE)

    def context(self, ctx: PeriodContext) -> AgentContext:
        return AgentContext(
            pea=self.pea, fin=self.fin, period=ctx,
            started=self.prev_achieved is OperatingState.IDLE,
            can_produce=self.status.active and may_produce(self.status, self.pea))

    def faulted(self, t: int, iteration: int) -> bool:
        return (self.fault_at is not None
                and (t, iteration) >= self.fault_at)

    def compute_x(self, actx: AgentContext) -> XUpdateResult:
        res = x_update(self.state, actx)
        self.state.x = res.op
        self.pending_state = res.state
        if res.state is OperatingState.PRODUCTION:
            self.gradient = mlcoh_gradient(res.op, self.fin, self.pea,
                                           actx.period, actx.started).value
        else:
            self.gradient = 0.0
        return res

    def current_qty(self) -> float:
        if self.pending_state is OperatingState.PRODUCTION and self.status.active:
            return self.pea.curve(self.state.x)
        return 0.0

    def publish(self, t: int, iteration: int, vote: bool = False) -> Optional[Message]:
        if not self.status.active or self.faulted(t, iteration):
            return None
        if (t, iteration) in self.skip_rounds:
            return None
        return Message(kind=MessageKind.PRODUCTION_QTY, sender=self.id,
                       period=t, iteration=iteration, qty=self.current_qty(),
                       gradient=self.gradient, vote=vote)

    def mark_inactive(self) -> None:
        self.status = replace(self.status, active=False,
                              state=OperatingState.IDLE)
        self.state.x = 0.0
        self.state.z = 0.0
        self.pending_state = OperatingState.IDLE

    def observe(self, collected: dict[str, float], gradients: dict[str, float],
                demand: float, actx: AgentContext,
                live_ids: list[str], fleet_by_id: dict[str, PeaParameters]) -> None:
        """z damping plus dual update from one round of collected data."""
        total = sum(collected[a] for a in live_ids)
        dev = deviation(total, demand)
        if self.state.k == 0:
            producing = [abs(gradients[a]) for a in live_ids if collected[a] > 0]
            self.state.g_ref = max(statistics.median(producing), 1e-9) \
                if producing else 1.0
        live_noms = sum(fleet_by_id[a].mh2_nom for a in live_ids)
        share = self.pea.mh2_nom / live_noms
        fleet_min = sum(fleet_by_id[a].curve(fleet_by_id[a].op_min)
                        for a in live_ids)
        self.state.z = damped_z_step(
            self.state.z, collected.get(self.id, 0.0), total, demand,
            share, fleet_min, actx)
        self.state.lam = dual_update(self.state, dev, self.gradient)
        self.state.k += 1


def collect_iteration(agents: list[PeaAgent], period: int, iteration: int,
                      timeout: Optional[float] = None) -> dict[str, float]:
    """Quantities published for (period, iteration); agents that stay silent
    are marked inactive and contribute zero from here on.

    In simulation the timeout is logical (absence from the round); the
    wall-clock argument only applies to the real-time bus.
    """
    out: dict[str, float] = {}
    for agent in agents:
        was_active = agent.status.active
        msg = agent.publish(period, iteration)
        if msg is None:
            if was_active:
                agent.mark_inactive()
            out[agent.id] = 0.0
        else:
            out[agent.id] = msg.qty
    if not any(a.status.active for a in agents):
        raise FleetDownError(
            f"no live agents left in period {period}, iteration {iteration}")
    return out


def _fault_pending(agents: list[PeaAgent], t: int, iteration: int) -> bool:
    return any(a.fault_at is not None and a.fault_at[0] == t
               and a.fault_at[1] > iteration and a.status.active
               for a in agents)


def run_period(agents: list[PeaAgent], t: int, sc: Scenario,
               trace: Optional[list[TraceRow]] = None) -> PeriodResult:
    """One pass of the decentralized loop until convergence or the cap.

    A convergence exit is deferred while a fault scheduled later in this
    period has not fired yet, so the malfunction always interrupts a live
    negotiation as in the reference experiment.
    """
    ctx = sc.context(t)
    demand = ctx.demand
    fleet_by_id = {a.id: a.pea for a in agents}
    t0 = time.perf_counter()
    if trace is None:
        trace = []

    def live() -> list[str]:
        return [a.id for a in agents if a.status.active]

    # iteration 0: state as initialized, before any update
    qty0 = {a.id: a.current_qty() for a in agents}
    dev = deviation(sum(qty0[a] for a in live()), demand)
    for a in agents:
        trace.append(TraceRow(t, 0, a.id, a.state.x, a.state.z,
                              a.state.lam, dev))

    iterations = 0
    did_converge = False
    fault_iteration = None
    fault_time = None
    recovery_iterations = None
    recovery_latency = None

    for j in range(1, sc.solver.max_iterations + 1):
        actxs = {a.id: a.context(ctx) for a in agents}
        for a in agents:
            if a.status.active:
                a.compute_x(actxs[a.id])
        before = set(live())
        collected = collect_iteration(agents, t, j)
        lost = before - set(live())
        if lost and fault_iteration is None:
            fault_iteration = j
            fault_time = time.perf_counter()
        gradients = {a.id: a.gradient for a in agents}
        live_ids = live()
        total = sum(collected[a] for a in live_ids)
        dev = deviation(total, demand)
        if (fault_iteration is not None and recovery_iterations is None
                and j > fault_iteration and abs(dev) < sc.solver.eps_demand):
            recovery_iterations = j - fault_iteration
            recovery_latency = time.perf_counter() - fault_time
        for a in agents:
            trace.append(TraceRow(t, j, a.id, a.state.x, a.state.z,
                                  a.state.lam, dev))
        votes = all(converged(a.state, dev) for a in agents if a.status.active)
        for a in agents:
            a.state.history = (a.state.x, a.state.z, a.state.lam)
        iterations = j
        if votes and not _fault_pending(agents, t, j):
            did_converge = True
            iterations = max(a.state.k for a in agents)
            break
        for a in agents:
            if a.status.active:
                a.observe(collected, gradients, demand, actxs[a.id],
                          live_ids, fleet_by_id)
            else:
                a.state.k += 1

    records = []
    for a in agents:
        actx = a.context(ctx)
        started = bool(startup_indicator(a.pending_state, a.prev_achieved))
        costs = mlcoh(a.state.x, a.pending_state, started, a.fin, a.pea, ctx)
        qty = a.current_qty()
        eur = interval_cost(a.state.x, a.pending_state, started,
                            a.fin, a.pea, ctx)
        records.append(AgentPeriodRecord(
            agent=a.id, x=a.state.x, z=a.state.z, lam=a.state.lam,
            state=a.pending_state, mh2=qty, costs=costs, started=started,
            cost_eur=eur))

    final_dev = deviation(sum(r.mh2 for r in records), demand)
    return PeriodResult(
        period=t, records=tuple(records), iterations_used=iterations,
        deviation_rel=final_dev, converged=did_converge,
        unmet_demand=not did_converge, wall_time_s=time.perf_counter() - t0,
        fault_iteration=fault_iteration,
        recovery_iterations=recovery_iterations,
        recovery_latency_s=recovery_latency)


def _advance_between_periods(agents: list[PeaAgent], sc: Scenario,
                             t: int) -> None:
    for a in agents:
        achieved = a.pending_state if a.status.active else OperatingState.IDLE
        a.prev_achieved = achieved
        st = replace(a.status, state=achieved)
        if t < sc.periods:
            wants = (achieved is OperatingState.PRODUCTION
                     or sc.targets[t] > 0)
            req = OperatingState.PRODUCTION if wants else OperatingState.IDLE
            st = advance_status(st, req, a.pea)
        a.status = st
        if a.status.state is OperatingState.IDLE:
            a.state.x = 0.0


def build_agents(sc: Scenario) -> list[PeaAgent]:
    return [PeaAgent(pea, fin, sc.solver, i, sc.faults)
            for i, (pea, fin) in enumerate(sc.fleet)]


def run_horizon(sc: Scenario, mode: str = "sim",
                timeout_ms: Optional[float] = None) -> ScheduleResult:
    """All periods in order, warm-starting x and z from the previous period
    and resetting the multiplier and iteration counter."""
    if mode == "realtime":
        return _run_horizon_realtime(sc, timeout_ms or sc.solver.timeout_ms)
    agents = build_agents(sc)
    trace: list[TraceRow] = []
    periods = []
    for t in range(1, sc.periods + 1):
        for a in agents:
            a.begin_period(t, warm=t > 1)
        periods.append(run_period(agents, t, sc, trace))
        _advance_between_periods(agents, sc, t)
    return _assemble(sc, periods, trace)


def _assemble(sc: Scenario, periods: list[PeriodResult],
              trace: list[TraceRow]) -> ScheduleResult:
    total_kg = sum(r.mh2 * sc.delta_int
                   for p in periods for r in p.records)
    total_eur = sum(r.cost_eur for p in periods for r in p.records)
    latencies = [p.recovery_latency_s for p in periods
                 if p.recovery_latency_s is not None]
    return ScheduleResult(
        scenario=sc.name,
        digest=scenario_digest(sc),
        periods=tuple(periods),
        trace=tuple(trace),
        total_kg=total_kg,
        total_cost_eur=total_eur,
        mean_mlcoh=total_eur / total_kg if total_kg > 0 else float("inf"),
        total_iterations=sum(p.iterations_used for p in periods),
        max_recovery_latency_s=max(latencies, default=0.0))


# -- real-time mode -------------------------------------------------------

class RealtimeBus:
    """Wall-clock rendezvous: a round closes when every live agent has
    published or the deadline passes; late agents are dropped globally so
    all peers share one view."""

    def __init__(self, agent_ids: list[str], timeout_s: float):
        self.timeout_s = timeout_s
        self.live = set(agent_ids)
        self.rounds: dict[tuple, dict[str, Message]] = {}
        self.closed: dict[tuple, dict[str, Message]] = {}
        self.cv = threading.Condition()

    def publish(self, tag: tuple, msg: Message) -> None:
        with self.cv:
            self.rounds.setdefault(tag, {})[msg.sender] = msg
            self.cv.notify_all()

    def collect(self, tag: tuple) -> dict[str, Message]:
        deadline = time.monotonic() + self.timeout_s
        with self.cv:
            while True:
                if tag in self.closed:
                    return self.closed[tag]
                got = self.rounds.setdefault(tag, {})
                if self.live <= set(got):
                    self.closed[tag] = dict(got)
                    return self.closed[tag]
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self.live &= set(got)
                    if not self.live:
                        raise FleetDownError(f"all agents silent at {tag}")
                    self.closed[tag] = dict(got)
                    return self.closed[tag]
                self.cv.wait(remaining)

    def drop(self, agent_id: str) -> None:
        with self.cv:
            self.live.discard(agent_id)
            self.cv.notify_all()


def _agent_loop(agent: PeaAgent, sc: Scenario, bus: RealtimeBus,
                records: dict, traces: dict, errors: list) -> None:
    try:
        fleet_by_id = {pea.id: pea for pea, _ in sc.fleet}
        my_periods = {}
        my_trace = []
        for t in range(1, sc.periods + 1):
            ctx = sc.context(t)
            agent.begin_period(t, warm=t > 1)
            my_trace.append(TraceRow(t, 0, agent.id, agent.state.x,
                                     agent.state.z, agent.state.lam, 0.0))
            for j in range(1, sc.solver.max_iterations + 1):
                actx = agent.context(ctx)
                if agent.status.active:
                    agent.compute_x(actx)
                if agent.faulted(t, j):
                    bus.drop(agent.id)
                    return
                msg = agent.publish(t, j)
                if msg is not None:
                    bus.publish(("qty", t, j), msg)
                got = bus.collect(("qty", t, j))
                live_ids = [a for a in sc.agent_ids() if a in bus.live]
                collected = {a: got[a].qty if a in got else 0.0
                             for a in sc.agent_ids()}
                gradients = {a: got[a].gradient if a in got else 0.0
                             for a in sc.agent_ids()}
                total = sum(collected[a] for a in live_ids)
                dev = deviation(total, ctx.demand)
                my_trace.append(TraceRow(t, j, agent.id, agent.state.x,
                                         agent.state.z, agent.state.lam, dev))
                vote = (converged(agent.state, dev)
                        and not _fault_pending([agent], t, j))
                agent.state.history = (agent.state.x, agent.state.z,
                                       agent.state.lam)
                bus.publish(("vote", t, j), Message(
                    kind=MessageKind.PRODUCTION_QTY, sender=agent.id,
                    period=t, iteration=j, qty=0.0, vote=vote))
                votes = bus.collect(("vote", t, j))
                if votes and all(m.vote for m in votes.values()):
                    my_periods[t] = (agent.state.k, dev, True)
                    break
                agent.observe(collected, gradients, ctx.demand, actx,
                              live_ids, fleet_by_id)
            else:
                my_periods[t] = (sc.solver.max_iterations, dev, False)
            agent._final = (agent.state.x, agent.state.z, agent.state.lam,
                            agent.pending_state)
            agent._records = getattr(agent, "_records", {})
            started = bool(startup_indicator(agent.pending_state,
                                             agent.prev_achieved))
            agent._records[t] = AgentPeriodRecord(
                agent=agent.id, x=agent.state.x, z=agent.state.z,
                lam=agent.state.lam, state=agent.pending_state,
                mh2=agent.current_qty(),
                costs=mlcoh(agent.state.x, agent.pending_state, started,
                            agent.fin, agent.pea, ctx),
                started=started,
                cost_eur=interval_cost(agent.state.x, agent.pending_state,
                                       started, agent.fin, agent.pea, ctx))
            achieved = agent.pending_state
            agent.prev_achieved = achieved
            st = replace(agent.status, state=achieved)
            if t < sc.periods:
                wants = (achieved is OperatingState.PRODUCTION
                         or sc.targets[t] > 0)
                req = (OperatingState.PRODUCTION if wants
                       else OperatingState.IDLE)
                st = advance_status(st, req, agent.pea)
            agent.status = st
        bus.publish(("bye",), Message(kind=MessageKind.SHUTDOWN,
                                      sender=agent.id, period=sc.periods,
                                      iteration=0, qty=0.0))
        records[agent.id] = my_periods
        traces[agent.id] = my_trace
    except FleetDownError:
        return
    except Exception as exc:                     # surfaced by the caller
        errors.append((agent.id, exc))


def _run_horizon_realtime(sc: Scenario, timeout_ms: float) -> ScheduleResult:
    agents = build_agents(sc)
    bus = RealtimeBus(sc.agent_ids(), timeout_ms / 1000.0)
    records: dict = {}
    traces: dict = {}
    errors: list = []
    threads = [threading.Thread(target=_agent_loop,
                                args=(a, sc, bus, records, traces, errors),
                                daemon=True)
               for a in agents]
    t0 = time.perf_counter()
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise errors[0][1]
    wall = time.perf_counter() - t0
    periods = []
    for t in range(1, sc.periods + 1):
        ctx = sc.context(t)
        recs = tuple(
            a._records[t] if hasattr(a, "_records") and t in a._records
            else AgentPeriodRecord(
                agent=a.id, x=0.0, z=0.0, lam=0.0, state=OperatingState.IDLE,
                mh2=0.0,
                costs=mlcoh(0.0, OperatingState.IDLE, False, a.fin, a.pea, ctx),
                started=False,
                cost_eur=interval_cost(0.0, OperatingState.IDLE, False,
                                       a.fin, a.pea, ctx))
            for a in agents)
        metas = [records[a.id][t] for a in agents
                 if a.id in records and t in records[a.id]]
        iters = max((m[0] for m in metas), default=sc.solver.max_iterations)
        dev = metas[0][1] if metas else 1.0
        conv = all(m[2] for m in metas) if metas else False
        periods.append(PeriodResult(
            period=t, records=recs, iterations_used=iters,
            deviation_rel=dev, converged=conv, unmet_demand=not conv,
            wall_time_s=wall / sc.periods))
    trace = [row for a in agents for row in traces.get(a.id, [])]
    trace.sort(key=lambda r: (r.period, r.iteration, r.agent))
    return _assemble(sc, periods, trace)
