"""Decentralized cost-optimal scheduling for modular electrolysis plants."""

from .admm import (AdmmState, AgentContext, SolverSettings, converged,
                   damped_z_step, deviation, dual_update, lagrangian,
                   x_update, z_update)
from .economics import (CostBreakdown, FinancialParameters, GradientResult,
                        PeriodContext, annualized_capex, capex_per_interval,
                        interval_cost, mlcoh, mlcoh_gradient, om_per_kg,
                        opex_for_interval)
from .electrolyzer import (OperatingState, PeaParameters, PeaStatus,
                           advance_status, default_curve, feasible_op_range,
                           invert_production, make_pea, production_rate,
                           startup_indicator)
from .oracle import OracleResult, brute_force_dispatch
from .runtime import (FaultEvent, Message, MessageKind, PeaAgent,
                      PeriodResult, ScheduleResult, build_agents,
                      collect_iteration, run_horizon, run_period)
from .scenario import (FaultKind, Scenario, ScenarioError,
                       bundled_scenario_path, fleet_production_bounds,
                       generate_targets, load_scenario, save_scenario,
                       scale_fleet, scenario_digest, serialize_scenario)

__version__ = "0.1.0"
