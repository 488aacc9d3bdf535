"""Schedule, trace and summary emission: plot-ready CSV plus a lossless
JSON summary."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .runtime import ScheduleResult

SCHEDULE_COLUMNS = ["period", "agent", "state", "op_pct", "mh2_kg_h",
                    "capex_eur_per_kg", "opex_eur_per_kg", "om_eur_per_kg",
                    "mlcoh_eur_per_kg"]
TRACE_COLUMNS = ["period", "iteration", "agent", "x_pct", "z_pct",
                 "lambda", "deviation_rel"]


def _g(v: float) -> str:
    return f"{v:.6g}"


def schedule_csv(result: ScheduleResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCHEDULE_COLUMNS)
    for p in result.periods:
        for r in p.records:
            w.writerow([p.period, r.agent, r.state.value, _g(r.x), _g(r.mh2),
                        _g(r.costs.capex_per_kg), _g(r.costs.opex_per_kg),
                        _g(r.costs.om_per_kg), _g(r.costs.mlcoh)])
    return buf.getvalue()


def trace_csv(result: ScheduleResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in result.trace:
        w.writerow([row.period, row.iteration, row.agent, _g(row.x),
                    _g(row.z), _g(row.lam), _g(row.deviation)])
    return buf.getvalue()


def summary_dict(result: ScheduleResult) -> dict:
    return {
        "scenario": result.scenario,
        "digest": result.digest,
        "all_converged": result.all_converged,
        "total_kg": result.total_kg,
        "total_cost_eur": result.total_cost_eur,
        "mean_mlcoh_eur_per_kg": result.mean_mlcoh,
        "total_iterations": result.total_iterations,
        "max_recovery_latency_s": result.max_recovery_latency_s,
        "periods": [
            {
                "period": p.period,
                "iterations": p.iterations_used,
                "converged": p.converged,
                "unmet_demand": p.unmet_demand,
                "deviation_rel": p.deviation_rel,
                "wall_time_s": p.wall_time_s,
                "fault_iteration": p.fault_iteration,
                "recovery_iterations": p.recovery_iterations,
                "recovery_latency_s": p.recovery_latency_s,
            }
            for p in result.periods
        ],
    }


def write_outputs(result: ScheduleResult, out_dir: str | Path) -> list[Path]:
    """Render everything first, then write, so a failing target directory
    leaves no partial files behind."""
    out = Path(out_dir)
    rendered = {
        "schedule.csv": schedule_csv(result),
        "trace.csv": trace_csv(result),
        "summary.json": json.dumps(summary_dict(result), indent=2) + "\n",
    }
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in rendered.items():
        path = out / name
        path.write_text(text)
        written.append(path)
    return written
