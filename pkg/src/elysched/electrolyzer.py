"""One electrolysis module: quadratic production curve, the two operating
states, start-up accounting and the idle-to-production holding time."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace


class OperatingState(enum.Enum):
    IDLE = "idle"
    PRODUCTION = "production"


@dataclass(frozen=True)
class PeaParameters:
    """Technical description of one module.

    The production curve is mh2(op) = alpha*op^2 + beta*op + gamma in kg/h
    with op in percent of nominal capacity; it must be strictly increasing
    on [0, op_max] so demand can be inverted through it.
    """

    id: str
    p_el: float                 # kW
    op_min: float = 8.0         # percent
    op_max: float = 100.0       # percent
    alpha: float = 0.0          # kg/h per percent^2
    beta: float = 0.0           # kg/h per percent
    gamma: float = 0.0          # kg/h
    t_h: int = 1                # holding periods for idle -> production
    mh2_nom: float = 0.0        # kg/h at op = 100

    def __post_init__(self):
        if not 0 <= self.op_min < self.op_max <= 100:
            raise ValueError(
                f"need 0 <= op_min < op_max <= 100, got [{self.op_min}, {self.op_max}]")
        if self.p_el <= 0:
            raise ValueError(f"p_el must be > 0, got {self.p_el}")
        if self.t_h < 0:
            raise ValueError(f"t_h must be >= 0, got {self.t_h}")
        if self.mh2_nom <= 0:
            raise ValueError(f"mh2_nom must be > 0, got {self.mh2_nom}")
        if self.curve(self.op_max) <= 0:
            raise ValueError("production at op_max must be > 0")
        if self.beta < 0 or 2 * self.alpha * self.op_max + self.beta <= 0:
            raise ValueError("production curve must be increasing on [0, op_max]")

    def curve(self, op: float) -> float:
        return (self.alpha * op + self.beta) * op + self.gamma


def default_curve(mh2_nom: float) -> tuple[float, float, float]:
    """Mildly concave calibration pinned to mh2(100) = mh2_nom.

    alpha = -0.15*mh2_nom/1e4 and beta = 1.15*mh2_nom/1e2 make the two
    terms sum to exactly mh2_nom at full load.
    """
    return -0.15 * mh2_nom / 1e4, 1.15 * mh2_nom / 1e2, 0.0


def make_pea(id: str, p_el: float, mh2_nom: float, *, op_min: float = 8.0,
             op_max: float = 100.0, t_h: int = 1) -> PeaParameters:
    """Module with the default production-curve calibration."""
    alpha, beta, gamma = default_curve(mh2_nom)
    return PeaParameters(id=id, p_el=p_el, op_min=op_min, op_max=op_max,
                         alpha=alpha, beta=beta, gamma=gamma, t_h=t_h,
                         mh2_nom=mh2_nom)


@dataclass(frozen=True)
class PeaStatus:
    """Runtime state of one module, owned by exactly one agent."""

    state: OperatingState = OperatingState.PRODUCTION
    periods_since_start_request: int = 0
    active: bool = True


def feasible_op_range(state: OperatingState, pea: PeaParameters) -> tuple[float, float]:
    """Production allows [op_min, op_max]; idle pins the setpoint to 0."""
    if state is OperatingState.PRODUCTION:
        return (pea.op_min, pea.op_max)
    return (0.0, 0.0)


def production_rate(op: float, state: OperatingState, pea: PeaParameters) -> float:
    """Hydrogen output in kg/h; zero whenever the module is idle."""
    lo, hi = feasible_op_range(state, pea)
    if not lo <= op <= hi:
        raise ValueError(f"op={op} infeasible for state {state.value} [{lo}, {hi}]")
    if state is not OperatingState.PRODUCTION:
        return 0.0
    return pea.curve(op)


def invert_production(pea: PeaParameters, qty: float) -> float:
    """Operating point on [op_min, op_max] whose output is closest to qty.

    Solves alpha*op^2 + beta*op + gamma = qty on the curve's rising branch
    and clamps to the operating limits; non-positive qty maps to op_min.
    """
    if qty <= pea.gamma:
        return pea.op_min
    if qty >= pea.curve(pea.op_max):
        return pea.op_max
    if pea.alpha == 0.0:
        op = (qty - pea.gamma) / pea.beta
    else:
        disc = pea.beta * pea.beta - 4.0 * pea.alpha * (pea.gamma - qty)
        # rising-branch root, written to avoid cancellation for alpha < 0
        op = 2.0 * (qty - pea.gamma) / (pea.beta + math.sqrt(max(disc, 0.0)))
    return min(max(op, pea.op_min), pea.op_max)


def startup_indicator(state_t: OperatingState, state_prev: OperatingState) -> int:
    """1 exactly when a module switches from idle to production."""
    started = (state_t is OperatingState.PRODUCTION
               and state_prev is OperatingState.IDLE)
    return 1 if started else 0


def advance_status(status: PeaStatus, requested: OperatingState,
                   pea: PeaParameters) -> PeaStatus:
    """Status for the next period given this period's requested state.

    An idle module asking for production accumulates start-request periods
    and switches only once t_h of them have elapsed (t_h = 0 switches
    immediately).  Shutdown is immediate; inactive modules stay idle.
    """
    if not status.active:
        return replace(status, state=OperatingState.IDLE,
                       periods_since_start_request=0)
    if status.state is OperatingState.PRODUCTION:
        if requested is OperatingState.IDLE:
            return replace(status, state=OperatingState.IDLE,
                           periods_since_start_request=0)
        return status
    # idle
    if requested is OperatingState.PRODUCTION:
        count = status.periods_since_start_request + 1
        if count >= pea.t_h:
            return replace(status, state=OperatingState.PRODUCTION,
                           periods_since_start_request=0)
        return replace(status, periods_since_start_request=count)
    return replace(status, periods_since_start_request=0)


def may_produce(status: PeaStatus, pea: PeaParameters) -> bool:
    """Whether the module can run in production this period.

    With t_h = 0 an idle module may start within the same period; with
    t_h > 0 it must go through advance_status first.
    """
    if not status.active:
        return False
    if status.state is OperatingState.PRODUCTION:
        return True
    return pea.t_h == 0
