"""Where the copter should take images.

Each candidate image is valued by how much it lowers the surrogate cost of
the cells the rover will drive through. A plan is a set of at most ``k_max``
images, flown in the shortest open-path order from the copter's start. The
search samples image subsets, orders each subset with a small TSP solver,
and keeps the most valuable subset that meets every flight constraint.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .localizability_map import (
    CameraModel,
    CellBelief,
    CopterPose,
    GridGeometry,
    MapBelief,
    footprint,
    footprint_half_width,
    measurement_noise,
    posterior_sigma,
)
from .rover_planner import RoverPath, quantile_z

EXACT_TSP_MAX = 8
UNIFORM_SHARE = 0.25


@dataclass(frozen=True)
class FlightLimits:
    h_min: float = 2.0
    h_max: float = 10.0
    k_max: int = 3
    l_max: float = 500.0
    delta: float = 5.0
    # Apply the rover-distance margin to every image pose, not just the last.
    strict_delta: bool = False
    # Charge the final leg to the landing pose against l_max.
    count_landing_leg: bool = False

    def __post_init__(self):
        if not 0 < self.h_min <= self.h_max:
            raise ValueError("need 0 < h_min <= h_max")
        if self.k_max < 0 or self.l_max < 0 or self.delta < 0:
            raise ValueError("k_max, l_max and delta must be nonnegative")

    @property
    def mid_altitude(self) -> float:
        return 0.5 * (self.h_min + self.h_max)


@dataclass(frozen=True)
class CandidateObservation:
    pose: CopterPose
    footprint: np.ndarray
    cells: np.ndarray  # rover-path cells inside the footprint
    gains: np.ndarray  # v_ik for those cells, aligned with ``cells``

    @property
    def per_cell_gain(self) -> Dict[int, float]:
        return {int(c): float(g) for c, g in zip(self.cells, self.gains)}

    @property
    def total_value(self) -> float:
        return float(self.gains.sum())


@dataclass(frozen=True)
class MeasurementPlan:
    observations: Tuple[CandidateObservation, ...] = ()
    flight_length: float = 0.0
    objective: float = 0.0
    landing: Optional[CopterPose] = None

    @property
    def poses(self) -> Tuple[CopterPose, ...]:
        return tuple(o.pose for o in self.observations)

    @property
    def values(self) -> Tuple[float, ...]:
        return tuple(o.total_value for o in self.observations)

    @property
    def final_pose(self) -> Optional[CopterPose]:
        if not self.observations:
            return None
        return self.landing if self.landing is not None else self.observations[-1].pose

    def __len__(self):
        return len(self.observations)


def measurement_gain(cell: CellBelief, d: float, pose: CopterPose, camera: CameraModel, p: float) -> float:
    """Drop in the cell's surrogate weight after a predictive update from ``pose``."""
    w = measurement_noise(pose, camera)
    sigma_post = float(posterior_sigma(cell.sigma, w))
    return max(d * quantile_z(p) * (cell.sigma - sigma_post), 0.0)


def _footprint_bounds(pose: CopterPose, geometry: GridGeometry, camera: CameraModel):
    hw = footprint_half_width(pose, camera)
    res = geometry.resolution
    ox, oy = geometry.origin
    c_lo = math.ceil((pose.x - hw - ox) / res - 0.5)
    c_hi = math.floor((pose.x + hw - ox) / res - 0.5)
    r_lo = math.ceil((pose.y - hw - oy) / res - 0.5)
    r_hi = math.floor((pose.y + hw - oy) / res - 0.5)
    return r_lo, r_hi, c_lo, c_hi


def generate_candidates(
    rover_path: RoverPath,
    belief: MapBelief,
    camera: CameraModel,
    altitudes: Sequence[float],
    stride: int = 1,
    p: float = 0.95,
    limits: Optional[FlightLimits] = None,
) -> List[CandidateObservation]:
    """Images centered above every ``stride``-th rover waypoint at each altitude.

    Off-path cells carry no value, so candidates elsewhere would be worthless.
    Candidates that improve nothing are dropped.
    """
    if len(rover_path) == 0:
        raise ValueError("rover path is empty")
    if stride < 1:
        raise ValueError("candidate stride must be >= 1")
    if limits is not None:
        for z in altitudes:
            if not limits.h_min <= z <= limits.h_max:
                raise ValueError(f"altitude {z} outside [{limits.h_min}, {limits.h_max}]")
    geom = belief.geometry
    zq = quantile_z(p)
    cells, dists = rover_path.cell_distances()
    rows, cols = np.divmod(cells, geom.width)
    sigma = belief.sigma.reshape(-1)[cells]
    xs, ys = rover_path.xy()
    xs, ys = np.atleast_1d(xs), np.atleast_1d(ys)

    out = []
    for k in range(0, len(rover_path), stride):
        for z in altitudes:
            pose = CopterPose(float(xs[k]), float(ys[k]), float(z))
            r_lo, r_hi, c_lo, c_hi = _footprint_bounds(pose, geom, camera)
            inside = (rows >= r_lo) & (rows <= r_hi) & (cols >= c_lo) & (cols <= c_hi)
            if not inside.any():
                continue
            w = measurement_noise(pose, camera)
            gain = dists[inside] * zq * (sigma[inside] - posterior_sigma(sigma[inside], w))
            gain = np.maximum(gain, 0.0)
            keep = gain > 0
            if not keep.any():
                continue
            out.append(
                CandidateObservation(
                    pose=pose,
                    footprint=footprint(pose, geom, camera),
                    cells=cells[inside][keep],
                    gains=gain[keep],
                )
            )
    return out


def combine_gains(rover_path: RoverPath, selected: Sequence[CandidateObservation]) -> float:
    """Sum over rover-path cells of the best improvement any selected image gives."""
    on_path = set(rover_path.waypoints)
    best: Dict[int, float] = {}
    for obs in selected:
        for cell, gain in zip(obs.cells.tolist(), obs.gains.tolist()):
            if cell in on_path and gain > best.get(cell, 0.0):
                best[cell] = gain
    return float(sum(best.values()))


def _dist(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def _open_length(points: np.ndarray, order: Sequence[int], start, end) -> float:
    seq = [start] + [points[i] for i in order] + ([end] if end is not None else [])
    return sum(_dist(a, b) for a, b in zip(seq, seq[1:]))


def _two_opt(points, order, start, end):
    order = list(order)
    best = _open_length(points, order, start, end)
    improved = True
    while improved:
        improved = False
        for i in range(len(order) - 1):
            for j in range(i + 1, len(order)):
                cand = order[:i] + order[i : j + 1][::-1] + order[j + 1 :]
                length = _open_length(points, cand, start, end)
                if length < best - 1e-12:
                    order, best, improved = cand, length, True
    return order, best


def nearest_neighbor_order(start: CopterPose, poses: Sequence[CopterPose]) -> Tuple[List[int], float]:
    points = np.array([q.position for q in poses]).reshape(-1, 3)
    here = start.position
    left = list(range(len(poses)))
    order = []
    while left:
        nxt = min(left, key=lambda i: (_dist(here, points[i]), i))
        order.append(nxt)
        left.remove(nxt)
        here = points[nxt]
    return order, _open_length(points, order, start.position, None)


def tsp_order(
    start: CopterPose,
    poses: Sequence[CopterPose],
    end: Optional[CopterPose] = None,
) -> Tuple[List[CopterPose], float]:
    """Shortest open path from ``start`` through all ``poses`` (optionally ending at ``end``).

    Exact permutation search up to 8 poses, nearest neighbor plus 2-opt beyond.
    """
    poses = list(poses)
    if not poses:
        length = _dist(start.position, end.position) if end is not None else 0.0
        return [], length
    points = np.array([q.position for q in poses])
    s = start.position
    e = end.position if end is not None else None
    if len(poses) <= EXACT_TSP_MAX:
        best_order, best_len = None, math.inf
        for perm in itertools.permutations(range(len(poses))):
            length = _open_length(points, perm, s, e)
            if length < best_len - 1e-12:
                best_order, best_len = perm, length
    else:
        nn, _ = nearest_neighbor_order(start, poses)
        best_order, best_len = _two_opt(points, nn, s, e)
    return [poses[i] for i in best_order], best_len


def check_constraints(
    plan: MeasurementPlan,
    rover_path: RoverPath,
    limits: FlightLimits,
) -> List[str]:
    """Return the violated flight constraints (empty list when the plan is feasible)."""
    violations = []
    for k, pose in enumerate(plan.poses):
        if not limits.h_min <= pose.z <= limits.h_max:
            violations.append(f"altitude: image {k} at z={pose.z} outside [{limits.h_min}, {limits.h_max}]")
    if len(plan) > limits.k_max:
        violations.append(f"count: {len(plan)} images exceed k_max={limits.k_max}")
    if plan.flight_length > limits.l_max + 1e-9:
        violations.append(f"length: flight {plan.flight_length:.3f} m exceeds l_max={limits.l_max}")
    if plan.observations:
        xs, ys = rover_path.xy()
        xs, ys = np.atleast_1d(xs), np.atleast_1d(ys)
        checked = list(plan.poses) if limits.strict_delta else []
        checked.append(plan.final_pose)
        for pose in checked:
            gap = float(np.min(np.hypot(xs - pose.x, ys - pose.y)))
            if not gap > limits.delta:
                violations.append(
                    f"margin: pose ({pose.x:.2f}, {pose.y:.2f}) within {gap:.3f} m of the rover path (delta={limits.delta})"
                )
                break
    return violations


@dataclass
class _Search:
    """Shared state for scoring candidate subsets."""

    rover_path: RoverPath
    candidates: List[CandidateObservation]
    limits: FlightLimits
    start: CopterPose
    landing: Optional[CopterPose]
    gain_matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        cells, _ = self.rover_path.cell_distances()
        column = {int(c): j for j, c in enumerate(cells)}
        g = np.zeros((len(self.candidates), len(cells)))
        for k, obs in enumerate(self.candidates):
            cols = [column[int(c)] for c in obs.cells]
            g[k, cols] = obs.gains
        self.gain_matrix = g

    def value(self, subset) -> float:
        if not subset:
            return 0.0
        return float(self.gain_matrix[list(subset)].max(axis=0).sum())

    def build(self, subset) -> MeasurementPlan:
        subset = sorted(subset)
        poses = [self.candidates[i].pose for i in subset]
        end = self.landing if self.limits.count_landing_leg else None
        ordered, length = tsp_order(self.start, poses, end)
        # Map ordered poses back to candidates; identical poses are interchangeable.
        remaining = list(subset)
        obs = []
        for pose in ordered:
            i = next(i for i in remaining if self.candidates[i].pose == pose)
            remaining.remove(i)
            obs.append(self.candidates[i])
        return MeasurementPlan(tuple(obs), length, -self.value(subset), self.landing)

    def feasible(self, plan: MeasurementPlan) -> bool:
        return not check_constraints(plan, self.rover_path, self.limits)


def _greedy_subset(search: _Search, k_max: int) -> Tuple[int, ...]:
    chosen: List[int] = []
    current = 0.0
    for _ in range(k_max):
        best_i, best_v = None, current
        for i in range(len(search.candidates)):
            if i in chosen:
                continue
            v = search.value(chosen + [i])
            if v > best_v and search.feasible(search.build(chosen + [i])):
                best_i, best_v = i, v
        if best_i is None:
            break
        chosen.append(best_i)
        current = best_v
    return tuple(sorted(chosen))


def plan(
    rover_path: RoverPath,
    belief: MapBelief,
    camera: CameraModel,
    limits: FlightLimits,
    p: float,
    iterations: int,
    seed: int,
    start: CopterPose,
    landing: Optional[CopterPose] = None,
    altitudes: Optional[Sequence[float]] = None,
    stride: int = 1,
    candidates: Optional[List[CandidateObservation]] = None,
    warm_start: bool = True,
) -> MeasurementPlan:
    """Sampling search for the most valuable feasible image set.

    Each iteration draws a subset of at most ``k_max`` candidates, mostly in
    proportion to their stand-alone value and sometimes uniformly, orders it
    by TSP and keeps it if it beats the best feasible plan so far. The greedy
    marginal-value set is scored first when ``warm_start`` is on.
    """
    empty = MeasurementPlan(landing=landing)
    if limits.k_max == 0:
        return empty
    if candidates is None:
        if altitudes is None:
            altitudes = (limits.h_min, limits.mid_altitude, limits.h_max)
        candidates = generate_candidates(rover_path, belief, camera, altitudes, stride, p, limits)
    if not candidates:
        return empty

    search = _Search(rover_path, list(candidates), limits, start, landing)
    n = len(search.candidates)
    k_cap = min(limits.k_max, n)
    values = np.array([c.total_value for c in search.candidates])
    weights = values / values.sum()
    rng = np.random.default_rng(seed)

    best, best_value = empty, 0.0
    seen = set()

    def consider(subset):
        nonlocal best, best_value
        if subset in seen:
            return
        seen.add(subset)
        c = search.value(subset)
        if c <= best_value:
            return
        candidate_plan = search.build(subset)
        if search.feasible(candidate_plan):
            best, best_value = candidate_plan, c

    if warm_start:
        greedy = _greedy_subset(search, k_cap)
        if greedy:
            consider(greedy)
    positive = int(np.count_nonzero(weights))
    for _ in range(iterations):
        size = int(rng.integers(1, k_cap + 1))
        if rng.random() < UNIFORM_SHARE or size > positive:
            pick = rng.choice(n, size=size, replace=False)
        else:
            pick = rng.choice(n, size=size, replace=False, p=weights)
        consider(tuple(sorted(int(i) for i in pick)))
    return best
