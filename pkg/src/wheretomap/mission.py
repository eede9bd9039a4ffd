"""Iterative rover/copter planning, the random-mapping baseline and batch runs."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import copter_planner, rover_planner
from .copter_planner import FlightLimits, MeasurementPlan
from .localizability_map import (
    CameraModel,
    CopterPose,
    MapBelief,
    apply_measurements,
    measurement_noise,
    predictive_map_update_many,
    simulate_measurement,
)
from .rover_planner import PathCost, RoverPath, path_cost

log = logging.getLogger(__name__)

REL_IMPROVEMENT_STOP = 1e-9


@dataclass(frozen=True)
class Scenario:
    belief: MapBelief
    rover_start: Tuple[float, float]
    rover_goal: Tuple[float, float]
    copter_start: CopterPose
    copter_goal: Optional[CopterPose] = None
    camera: CameraModel = field(default_factory=CameraModel)
    limits: FlightLimits = field(default_factory=FlightLimits)
    confidence: float = 0.95
    p0_trace: float = 0.0
    max_iterations: int = 5
    sampling_iterations: int = 2000
    altitudes: Optional[Tuple[float, ...]] = None
    candidate_stride: int = 1
    seed: int = 0
    truth: Optional[np.ndarray] = None
    baseline_runs: int = 100
    mc_starts: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")
        geom = self.belief.geometry
        for name, xy in (("rover start", self.rover_start), ("rover goal", self.rover_goal)):
            try:
                cell = geom.cell_at(*xy)
            except IndexError:
                raise ValueError(f"{name} {tuple(xy)} lies outside the map") from None
            if self.belief.obstacle.flat[cell]:
                raise ValueError(f"{name} {tuple(xy)} lies on an obstacle cell")

    @property
    def start_cell(self) -> int:
        return self.belief.geometry.cell_at(*self.rover_start)

    @property
    def goal_cell(self) -> int:
        return self.belief.geometry.cell_at(*self.rover_goal)

    @property
    def candidate_altitudes(self) -> Tuple[float, ...]:
        if self.altitudes is not None:
            return tuple(self.altitudes)
        lim = self.limits
        return tuple(sorted({lim.h_min, lim.mid_altitude, lim.h_max}))

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    rover_path: RoverPath
    plan: MeasurementPlan
    cost: PathCost
    best_j: float


@dataclass
class MissionResult:
    initial_path: RoverPath
    initial_cost: PathCost
    final_path: RoverPath
    final_cost: PathCost
    plan: MeasurementPlan
    final_map: MapBelief
    trace: List[IterationRecord]
    timings: Dict[str, float]
    realized: Optional[Dict[str, float]] = None

    @property
    def j_before(self) -> float:
        return self.initial_cost.quantile_value

    @property
    def j_after(self) -> float:
        return self.final_cost.quantile_value

    @property
    def reduction_rate(self) -> float:
        return compute_reduction_rate(self.j_before, self.j_after)

    @property
    def j_trace(self) -> List[float]:
        return [r.best_j for r in self.trace]


def compute_reduction_rate(j_before: float, j_after: float) -> float:
    if not j_before > 0:
        raise ValueError(f"reduction rate needs j_before > 0, got {j_before}")
    return 100.0 * (j_before - j_after) / j_before


def _copter_plan(scenario: Scenario, rover_path: RoverPath, seed: int) -> MeasurementPlan:
    return copter_planner.plan(
        rover_path,
        scenario.belief,
        scenario.camera,
        scenario.limits,
        scenario.confidence,
        scenario.sampling_iterations,
        seed,
        start=scenario.copter_start,
        landing=scenario.copter_goal,
        altitudes=scenario.candidate_altitudes,
        stride=scenario.candidate_stride,
    )


def run_iterative(scenario: Scenario) -> MissionResult:
    """Alternate rover and copter planning on the predicted map.

    The copter plan is always scored against the prior map, and the map the
    rover replans on is the prior updated by that plan alone. The best
    (rover path, copter plan) pair is kept, so the recorded J never increases.
    """
    prior = scenario.belief
    p, p0 = scenario.confidence, scenario.p0_trace
    timings = {"rover": 0.0, "copter": 0.0}

    t0 = time.perf_counter()
    path0, cost0 = rover_planner.plan(prior, scenario.start_cell, scenario.goal_cell, p, p0)
    timings["rover"] += time.perf_counter() - t0

    empty = MeasurementPlan(landing=scenario.copter_goal)
    best = (path0, empty, prior, cost0)
    trace = [IterationRecord(0, path0, empty, cost0, cost0.quantile_value)]
    current = path0

    for j in range(1, scenario.max_iterations + 1):
        t0 = time.perf_counter()
        mplan = _copter_plan(scenario, current, scenario.seed)
        timings["copter"] += time.perf_counter() - t0
        predicted = predictive_map_update_many(prior, mplan.poses, scenario.camera)

        t0 = time.perf_counter()
        new_path, new_cost = rover_planner.plan(predicted, scenario.start_cell, scenario.goal_cell, p, p0)
        timings["rover"] += time.perf_counter() - t0
        same_cost = path_cost(current, predicted, p0, p)
        # Surrogate replanning can pick a path with a worse exact J.
        if same_cost.quantile_value <= new_cost.quantile_value:
            pair = (current, mplan, predicted, same_cost)
        else:
            pair = (new_path, mplan, predicted, new_cost)

        previous_best = best[3].quantile_value
        if pair[3].quantile_value < previous_best:
            best = pair
        trace.append(IterationRecord(j, pair[0], mplan, pair[3], best[3].quantile_value))
        log.info("iteration %d: J=%.6g best=%.6g images=%d", j, pair[3].quantile_value,
                 best[3].quantile_value, len(mplan))

        if new_path.waypoints == current.waypoints:
            break
        gain = previous_best - best[3].quantile_value
        if gain < REL_IMPROVEMENT_STOP * abs(previous_best):
            break
        current = new_path

    final_path, final_plan, final_map, final_cost = best
    result = MissionResult(
        initial_path=path0,
        initial_cost=cost0,
        final_path=final_path,
        final_cost=final_cost,
        plan=final_plan,
        final_map=final_map,
        trace=trace,
        timings=timings,
    )
    if scenario.truth is not None:
        result.realized = realized_outcome(scenario, result)
    return result


def true_trace(path: RoverPath, truth: np.ndarray, p0_trace: float) -> float:
    cells, dists = path.cell_distances()
    return p0_trace + float(np.dot(dists, np.asarray(truth).reshape(-1)[cells]))


def realized_outcome(scenario: Scenario, result: MissionResult) -> Dict[str, float]:
    """Fly the plan against the ground truth and score the outcome.

    Readings are simulated from the truth grid and folded into the prior
    with the ordinary Bayesian update; the rover then replans on that map.
    """
    rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, 1]))
    belief = scenario.belief
    for pose in result.plan.poses:
        readings = simulate_measurement(scenario.truth, pose, scenario.camera, belief.geometry, rng)
        belief = apply_measurements(belief, readings, measurement_noise(pose, scenario.camera))
    path, cost = rover_planner.plan(
        belief, scenario.start_cell, scenario.goal_cell, scenario.confidence, scenario.p0_trace
    )
    return {
        "j_after_measured": cost.quantile_value,
        "true_trace_initial": true_trace(result.initial_path, scenario.truth, scenario.p0_trace),
        "true_trace_final": true_trace(result.final_path, scenario.truth, scenario.p0_trace),
        "true_trace_measured": true_trace(path, scenario.truth, scenario.p0_trace),
    }


@dataclass
class BaselineResult:
    j_before: float
    rates: List[float]

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.rates)) if self.rates else 0.0


def run_baseline_random(scenario: Scenario, runs: int, seed: Optional[int] = None) -> BaselineResult:
    """Random mapping: images at uniformly drawn rover waypoints, mid altitude."""
    if runs < 1:
        raise ValueError("baseline needs at least one run")
    prior = scenario.belief
    p, p0 = scenario.confidence, scenario.p0_trace
    path0, cost0 = rover_planner.plan(prior, scenario.start_cell, scenario.goal_cell, p, p0)
    j_before = cost0.quantile_value
    n = scenario.limits.k_max
    z = scenario.limits.mid_altitude
    xs, ys = path0.xy()
    xs, ys = np.atleast_1d(xs), np.atleast_1d(ys)
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    rates = []
    for _ in range(runs):
        if n == 0:
            rates.append(0.0)
            continue
        picks = rng.choice(len(xs), size=n, replace=n > len(xs))
        poses = [CopterPose(float(xs[k]), float(ys[k]), z) for k in picks]
        predicted = predictive_map_update_many(prior, poses, scenario.camera)
        _, new_cost = rover_planner.plan(predicted, scenario.start_cell, scenario.goal_cell, p, p0)
        j_after = min(new_cost.quantile_value, path_cost(path0, predicted, p0, p).quantile_value)
        rates.append(compute_reduction_rate(j_before, j_after))
    return BaselineResult(j_before, rates)


@dataclass(frozen=True)
class MonteCarloRow:
    label: str
    start_x: float
    start_y: float
    proposed_rate: float
    baseline_rate: float


def run_monte_carlo(
    scenario: Scenario,
    starts: Sequence[Tuple[float, float]],
    seed: int,
    baseline_runs: Optional[int] = None,
) -> List[MonteCarloRow]:
    """Proposed planner vs. the random baseline for each rover start position."""
    if not starts:
        raise ValueError("monte carlo needs at least one start position")
    runs = scenario.baseline_runs if baseline_runs is None else baseline_runs
    seeds = np.random.SeedSequence(seed).generate_state(2 * len(starts))
    rows = []
    for k, start in enumerate(starts):
        sc = scenario.with_(rover_start=(float(start[0]), float(start[1])), seed=int(seeds[2 * k]))
        proposed = run_iterative(sc)
        baseline = run_baseline_random(sc, runs, seed=int(seeds[2 * k + 1]))
        rows.append(
            MonteCarloRow(
                f"s{k + 1}", float(start[0]), float(start[1]),
                proposed.reduction_rate, baseline.mean_rate,
            )
        )
        log.info("%s start=(%g, %g) proposed=%.2f%% baseline=%.2f%%", rows[-1].label,
                 start[0], start[1], rows[-1].proposed_rate, rows[-1].baseline_rate)
    return rows
