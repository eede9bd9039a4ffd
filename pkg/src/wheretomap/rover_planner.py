"""Minimum-uncertainty rover paths over a localizability map belief.

A path is a chain of 8-connected cells. Driving a step of length ``d`` into
cell ``i`` adds ``d * lambda_i`` to the terminal covariance trace, where
``lambda_i ~ N(mu_i, sigma_i^2)`` independently per cell. The terminal trace
``Omega`` is therefore Gaussian and its ``p``-quantile ``J`` is the cost that
matters. ``J`` is not additive over edges, so the graph search minimizes the
upper bound ``sum d * (mu + z_p * sigma)`` and then reports the exact ``J`` of
the path it found.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Dict, List, Tuple

import numpy as np
from numba import njit

from .localizability_map import CellBelief, GridGeometry, MapBelief
from .pose_belief import Pose

WEIGHT_FLOOR = 1e-9
SQRT2 = math.sqrt(2.0)


class NoPathError(RuntimeError):
    pass


def quantile_z(p: float) -> float:
    """Standard-normal quantile; ``p`` must lie in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"confidence p must be in (0, 1), got {p}")
    return NormalDist().inv_cdf(p)


@dataclass(frozen=True)
class RoverPath:
    """Waypoints are flat cell indices; ``steps[k]`` is the length of the move
    into ``waypoints[k + 1]``."""

    waypoints: Tuple[int, ...]
    geometry: GridGeometry

    def __post_init__(self):
        wp = tuple(int(i) for i in self.waypoints)
        if not wp:
            raise ValueError("rover path needs at least one waypoint")
        object.__setattr__(self, "waypoints", wp)
        for a, b in zip(wp, wp[1:]):
            ra, ca = divmod(a, self.geometry.width)
            rb, cb = divmod(b, self.geometry.width)
            if max(abs(ra - rb), abs(ca - cb)) != 1:
                raise ValueError(f"waypoints {a} and {b} are not 8-neighbors")

    def __len__(self):
        return len(self.waypoints)

    @property
    def start(self) -> int:
        return self.waypoints[0]

    @property
    def goal(self) -> int:
        return self.waypoints[-1]

    @property
    def steps(self) -> np.ndarray:
        wp = np.asarray(self.waypoints)
        rows, cols = np.divmod(wp, self.geometry.width)
        diag = (np.diff(rows) != 0) & (np.diff(cols) != 0)
        return np.where(diag, SQRT2, 1.0) * self.geometry.resolution

    def cell_distances(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distinct visited cells (first-visit order) and total distance driven in each."""
        totals: Dict[int, float] = {}
        totals[self.waypoints[0]] = 0.0
        for cell, d in zip(self.waypoints[1:], self.steps):
            totals[cell] = totals.get(cell, 0.0) + float(d)
        cells = np.fromiter(totals.keys(), dtype=np.int64, count=len(totals))
        dists = np.fromiter(totals.values(), dtype=float, count=len(totals))
        return cells, dists

    def xy(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.geometry.center(np.asarray(self.waypoints))

    def length(self) -> float:
        return float(self.steps.sum())


@dataclass(frozen=True)
class PathCost:
    mean: float
    std: float
    quantile_value: float


def _check_traversable(path: RoverPath, belief: MapBelief) -> None:
    blocked = belief.obstacle.reshape(-1)[np.asarray(path.waypoints)]
    if blocked.any():
        cell = path.waypoints[int(np.argmax(blocked))]
        raise ValueError(f"rover path crosses obstacle cell {cell}")


def path_cost(path: RoverPath, belief: MapBelief, p0_trace: float, p: float) -> PathCost:
    """Exact Gaussian quantile of the terminal covariance trace along ``path``."""
    z = quantile_z(p)
    _check_traversable(path, belief)
    cells, dists = path.cell_distances()
    mu = belief.mu.reshape(-1)[cells]
    sigma = belief.sigma.reshape(-1)[cells]
    mean = p0_trace + float(np.dot(dists, mu))
    std = math.sqrt(float(np.dot(dists**2, sigma**2)))
    return PathCost(mean, std, mean + z * std)


def cumulative_cost(path: RoverPath, belief: MapBelief, p0_trace: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and std of the accumulated trace after each waypoint."""
    flat_mu = belief.mu.reshape(-1)
    flat_sigma = belief.sigma.reshape(-1)
    per_cell: Dict[int, float] = {}
    mean, var = p0_trace, 0.0
    means, stds = [mean], [0.0]
    for cell, d in zip(path.waypoints[1:], path.steps):
        s2 = float(flat_sigma[cell]) ** 2
        before = per_cell.get(cell, 0.0)
        after = before + float(d)
        per_cell[cell] = after
        mean += float(d) * float(flat_mu[cell])
        var += (after**2 - before**2) * s2
        means.append(mean)
        stds.append(math.sqrt(max(var, 0.0)))
    return np.array(means), np.array(stds)


def edge_weight(cell: CellBelief, d: float, p: float) -> float:
    """Additive surrogate cost of driving ``d`` meters in ``cell``."""
    if not d > 0:
        raise ValueError(f"edge length must be positive, got {d}")
    return d * max(cell.mu + quantile_z(p) * cell.sigma, WEIGHT_FLOOR)


def cell_rates(belief: MapBelief, p: float) -> np.ndarray:
    """Per-meter surrogate weight of every cell (flat)."""
    rate = belief.mu + quantile_z(p) * belief.sigma
    return np.maximum(rate, WEIGHT_FLOOR).reshape(-1)


def surrogate_cost(path: RoverPath, belief: MapBelief, p: float) -> float:
    rates = cell_rates(belief, p)
    return float(np.dot(path.steps, rates[np.asarray(path.waypoints[1:], dtype=np.int64)]))


@njit(cache=True)
def _dijkstra(rate, blocked, width, height, res, start, goal):
    n = width * height
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    dist[start] = 0.0
    # (cost, index) ordering: equal costs pop the lower cell index first.
    heap = [(0.0, start)]
    diag = res * np.sqrt(2.0)
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == goal:
            break
        r = u // width
        c = u - r * width
        for dr in range(-1, 2):
            rr = r + dr
            if rr < 0 or rr >= height:
                continue
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                cc = c + dc
                if cc < 0 or cc >= width:
                    continue
                v = rr * width + cc
                if blocked[v] or done[v]:
                    continue
                step = diag if (dr != 0 and dc != 0) else res
                nd = d + step * rate[v]
                if nd < dist[v]:
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
    return dist, prev


def plan(
    belief: MapBelief,
    start: int,
    goal: int,
    p: float,
    p0_trace: float = 0.0,
) -> Tuple[RoverPath, PathCost]:
    """Dijkstra over the 8-connected traversable cells under the surrogate weight."""
    geom = belief.geometry
    blocked = belief.obstacle.reshape(-1)
    for name, cell in (("start", start), ("goal", goal)):
        if not 0 <= cell < geom.size:
            raise ValueError(f"{name} cell {cell} is outside the grid")
        if blocked[cell]:
            raise ValueError(f"{name} cell {cell} is an obstacle")
    rates = cell_rates(belief, p)
    _, prev = _dijkstra(
        rates, np.ascontiguousarray(blocked), geom.width, geom.height,
        geom.resolution, int(start), int(goal),
    )
    if start != goal and prev[goal] < 0:
        raise NoPathError(f"no path from cell {start} to cell {goal}")
    chain: List[int] = [int(goal)]
    while chain[-1] != start:
        chain.append(int(prev[chain[-1]]))
    path = RoverPath(tuple(reversed(chain)), geom)
    return path, path_cost(path, belief, p0_trace, p)


def nominal_poses(path: RoverPath) -> List[Pose]:
    """Planar poses at waypoint centers, yaw along the step that reached them."""
    xs, ys = path.xy()
    xs, ys = np.atleast_1d(xs), np.atleast_1d(ys)
    poses = []
    for k in range(len(xs)):
        if len(xs) == 1:
            yaw = 0.0
        elif k == 0:
            yaw = math.atan2(ys[1] - ys[0], xs[1] - xs[0])
        else:
            yaw = math.atan2(ys[k] - ys[k - 1], xs[k] - xs[k - 1])
        poses.append(Pose.planar(float(xs[k]), float(ys[k]), yaw))
    return poses


def path_segments(path: RoverPath, cell_covariance) -> list:
    """Segments ``(d_i, Sigma_tilde_i, pose_i)`` for full 6x6 covariance accumulation.

    ``cell_covariance`` maps a flat cell index to its 6x6 per-meter covariance.
    """
    poses = nominal_poses(path)
    return [
        (float(d), cell_covariance(cell), poses[k + 1])
        for k, (cell, d) in enumerate(zip(path.waypoints[1:], path.steps))
    ]
