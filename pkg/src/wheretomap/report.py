"""Result writers for the CLI: JSON summary and schema-stable CSV tables."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict
from typing import Sequence

from .mapio import write_grid_csv
from .mission import MissionResult, MonteCarloRow, Scenario
from .rover_planner import cumulative_cost

ROVER_PATH_COLUMNS = ["step", "row", "col", "x_m", "y_m", "cum_mean", "cum_std"]
COPTER_PATH_COLUMNS = ["order", "x_m", "y_m", "z_m", "value"]
MC_COLUMNS = ["label", "start_x", "start_y", "proposed_rate", "baseline_rate"]

PLAN_FILES = (
    "summary.json",
    "rover_path.csv",
    "copter_path.csv",
    "map_sigma_before.csv",
    "map_sigma_after.csv",
)


def _pose_dict(pose):
    return None if pose is None else {"x_m": pose.x, "y_m": pose.y, "z_m": pose.z}


def summary_dict(result: MissionResult, scenario: Scenario) -> dict:
    plan = result.plan
    return {
        "j_before": result.j_before,
        "j_after": result.j_after,
        "reduction_rate": result.reduction_rate,
        "confidence": scenario.confidence,
        "p0_trace": scenario.p0_trace,
        "seed": scenario.seed,
        "rover_start_cell": scenario.start_cell,
        "rover_goal_cell": scenario.goal_cell,
        "initial_cost": asdict(result.initial_cost),
        "final_cost": asdict(result.final_cost),
        "final_path_waypoints": len(result.final_path),
        "iterations": [
            {
                "iteration": r.iteration,
                "j": r.cost.quantile_value,
                "best_j": r.best_j,
                "path_waypoints": len(r.rover_path),
                "images": len(r.plan),
            }
            for r in result.trace
        ],
        "observations": [
            {"order": k + 1, **_pose_dict(pose), "value": value}
            for k, (pose, value) in enumerate(zip(plan.poses, plan.values))
        ],
        "copter_objective": plan.objective,
        "flight_length_m": plan.flight_length,
        "copter_start": _pose_dict(scenario.copter_start),
        "copter_landing": _pose_dict(plan.landing),
        "realized": result.realized,
    }


def write_plan_outputs(result: MissionResult, scenario: Scenario, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary_dict(result, scenario), fh, indent=2)
        fh.write("\n")

    geom = scenario.belief.geometry
    path = result.final_path
    means, stds = cumulative_cost(path, result.final_map, scenario.p0_trace)
    with open(os.path.join(outdir, "rover_path.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROVER_PATH_COLUMNS)
        for k, cell in enumerate(path.waypoints):
            row, col = divmod(cell, geom.width)
            x, y = geom.center(cell)
            w.writerow([k, row, col, repr(float(x)), repr(float(y)), repr(float(means[k])), repr(float(stds[k]))])

    with open(os.path.join(outdir, "copter_path.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COPTER_PATH_COLUMNS)
        for k, (pose, value) in enumerate(zip(result.plan.poses, result.plan.values)):
            w.writerow([k + 1, repr(pose.x), repr(pose.y), repr(pose.z), repr(value)])

    write_grid_csv(os.path.join(outdir, "map_sigma_before.csv"), scenario.belief.sigma)
    write_grid_csv(os.path.join(outdir, "map_sigma_after.csv"), result.final_map.sigma)


def write_mc_results(rows: Sequence[MonteCarloRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MC_COLUMNS)
        for r in rows:
            w.writerow([r.label, repr(r.start_x), repr(r.start_y), repr(r.proposed_rate), repr(r.baseline_rate)])
