"""Grid of Gaussian beliefs over a per-cell localizability index.

The index of a cell is the growth of the pose-covariance trace per meter
driven on it. Each cell carries an independent ``N(mu, sigma^2)`` belief that
starts from a satellite prior and is refined by copter images. A copter image
observes every cell in a square footprint whose half-width grows with
altitude, with measurement noise variance that also grows with altitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np


class MapLoadError(ValueError):
    """A prior raster violates the map invariants; ``cell`` is the flat index."""

    def __init__(self, message: str, cell: Optional[int] = None):
        super().__init__(message if cell is None else f"{message} (cell {cell})")
        self.cell = cell


@dataclass(frozen=True)
class GridGeometry:
    width: int
    height: int
    resolution: float
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError("grid width and height must be at least 1")
        if not self.resolution > 0:
            raise ValueError("grid resolution must be positive")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def size(self) -> int:
        return self.width * self.height

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise IndexError(f"cell ({row}, {col}) outside {self.height}x{self.width} grid")
        return row * self.width + col

    def row_col(self, index) -> Tuple:
        return np.divmod(index, self.width)

    def center(self, index) -> Tuple:
        """World coordinates [m] of cell centers; accepts scalars or arrays."""
        row, col = np.divmod(np.asarray(index), self.width)
        x = self.origin[0] + (col + 0.5) * self.resolution
        y = self.origin[1] + (row + 0.5) * self.resolution
        return x, y

    def cell_at(self, x: float, y: float) -> int:
        """Flat index of the cell containing world point ``(x, y)``."""
        col = int(math.floor((x - self.origin[0]) / self.resolution))
        row = int(math.floor((y - self.origin[1]) / self.resolution))
        return self.index(row, col)

    @property
    def extent(self) -> Tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, ox + self.width * self.resolution, oy, oy + self.height * self.resolution


@dataclass(frozen=True)
class CellBelief:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError("cell belief must be finite")
        if self.mu < 0 or self.sigma < 0:
            raise ValueError(f"cell belief needs mu >= 0 and sigma >= 0, got ({self.mu}, {self.sigma})")


@dataclass(frozen=True)
class MapBelief:
    """Per-cell beliefs stored as ``(height, width)`` arrays; flat index is row-major."""

    geometry: GridGeometry
    mu: np.ndarray
    sigma: np.ndarray
    obstacle: np.ndarray

    def __post_init__(self):
        shape = (self.geometry.height, self.geometry.width)
        for name in ("mu", "sigma", "obstacle"):
            arr = getattr(self, name)
            if np.shape(arr) != shape:
                raise MapLoadError(f"{name} grid has shape {np.shape(arr)}, expected {shape}")

    def cell(self, index: int) -> CellBelief:
        return CellBelief(float(self.mu.flat[index]), float(self.sigma.flat[index]))

    def with_sigma(self, sigma: np.ndarray) -> "MapBelief":
        return replace(self, sigma=sigma)

    def scaled(self, factor: float) -> "MapBelief":
        return replace(self, mu=self.mu * factor, sigma=self.sigma * factor)


@dataclass(frozen=True)
class CopterPose:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError(f"copter altitude must be positive, got {self.z}")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class CameraModel:
    """Nadir camera: footprint half-width ``z * half_fov_tangent``, noise
    variance ``w0 * (z / z_ref)^2 * grade_multiplier``."""

    half_fov_tangent: float = 0.5
    base_noise_variance: float = 0.25
    reference_altitude: float = 10.0
    grade: str = "high"
    grade_multipliers: Mapping[str, float] = field(
        default_factory=lambda: {"high": 1.0, "low": 4.0}
    )

    def __post_init__(self):
        if self.half_fov_tangent <= 0 or self.reference_altitude <= 0:
            raise ValueError("camera FOV tangent and reference altitude must be positive")
        # w0 = 0 is kept for noiseless simulation; the planner rejects it.
        if self.base_noise_variance < 0:
            raise ValueError("camera base noise variance must be nonnegative")
        mult = dict(self.grade_multipliers)
        if self.grade not in mult:
            raise ValueError(f"unknown camera grade {self.grade!r}")
        if any(v <= 0 for v in mult.values()):
            raise ValueError("grade multipliers must be positive")
        if "high" in mult and "low" in mult and not mult["low"] > mult["high"]:
            raise ValueError("low-resolution multiplier must exceed the high-resolution one")
        object.__setattr__(self, "grade_multipliers", mult)

    @property
    def multiplier(self) -> float:
        return self.grade_multipliers[self.grade]

    def with_grade(self, grade: str) -> "CameraModel":
        return replace(self, grade=grade)


def init_from_satellite(
    mu,
    sigma,
    geometry: GridGeometry,
    obstacle=None,
) -> MapBelief:
    """Build the prior map belief from per-cell satellite estimates."""
    shape = (geometry.height, geometry.width)
    mu = np.array(mu, dtype=float)
    sigma = np.array(sigma, dtype=float)
    if mu.shape != shape or sigma.shape != shape:
        raise MapLoadError(f"raster shape {mu.shape}/{sigma.shape} does not match geometry {shape}")
    obstacle = np.zeros(shape, dtype=bool) if obstacle is None else np.array(obstacle, dtype=bool)
    if obstacle.shape != shape:
        raise MapLoadError(f"obstacle mask shape {obstacle.shape} does not match geometry {shape}")
    for name, arr in (("mu", mu), ("sigma", sigma)):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise MapLoadError(f"non-finite {name}", int(bad[0]))
        bad = np.flatnonzero(arr < 0)
        if bad.size:
            raise MapLoadError(f"negative {name} {arr.flat[bad[0]]}", int(bad[0]))
    return MapBelief(geometry, mu, sigma, obstacle)


def footprint_half_width(pose: CopterPose, camera: CameraModel) -> float:
    return pose.z * camera.half_fov_tangent


def footprint(pose: CopterPose, geometry: GridGeometry, camera: CameraModel) -> np.ndarray:
    """Sorted flat indices of cells whose centers lie in the image square."""
    hw = footprint_half_width(pose, camera)
    res = geometry.resolution
    ox, oy = geometry.origin
    c_lo = max(math.ceil((pose.x - hw - ox) / res - 0.5), 0)
    c_hi = min(math.floor((pose.x + hw - ox) / res - 0.5), geometry.width - 1)
    r_lo = max(math.ceil((pose.y - hw - oy) / res - 0.5), 0)
    r_hi = min(math.floor((pose.y + hw - oy) / res - 0.5), geometry.height - 1)
    if c_lo > c_hi or r_lo > r_hi:
        return np.empty(0, dtype=np.int64)
    rows = np.arange(r_lo, r_hi + 1)
    cols = np.arange(c_lo, c_hi + 1)
    return (rows[:, None] * geometry.width + cols[None, :]).ravel().astype(np.int64)


def measurement_noise(pose: CopterPose, camera: CameraModel) -> float:
    return camera.base_noise_variance * (pose.z / camera.reference_altitude) ** 2 * camera.multiplier


def posterior_sigma(sigma, w):
    """Posterior std of conjugate updates; vectorized, ``sigma = 0`` is a fixed point."""
    sigma = np.asarray(sigma, dtype=float)
    # sigma * sqrt(w / (sigma^2 + w)) never exceeds sigma, even for subnormal sigma^2.
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.sqrt(w / (sigma * sigma + w))
    return np.where(sigma > 0, sigma * shrink, 0.0)


def bayes_update(cell: CellBelief, z: float, w: float) -> CellBelief:
    """Conjugate Gaussian update of one cell with measurement ``z`` of variance ``w``."""
    if not w > 0:
        raise ValueError(f"measurement noise variance must be positive, got {w}")
    if cell.sigma == 0:
        return cell
    var = cell.sigma**2
    post_mu = (cell.mu * w + z * var) / (var + w)
    return CellBelief(max(post_mu, 0.0), float(posterior_sigma(cell.sigma, w)))


def predict_measurement_belief(cell: CellBelief, pose: CopterPose, camera: CameraModel) -> Tuple[float, float]:
    """Predictive ``(mean, variance)`` of a copter reading of ``cell``."""
    return cell.mu, cell.sigma**2 + measurement_noise(pose, camera)


def predictive_map_update(belief: MapBelief, pose: CopterPose, camera: CameraModel) -> MapBelief:
    """Update every footprint cell with its own most-likely reading.

    The most-likely reading equals the prior mean, so means are kept exactly
    and only the standard deviations shrink.
    """
    cells = footprint(pose, belief.geometry, camera)
    if cells.size == 0:
        return belief
    w = measurement_noise(pose, camera)
    if not w > 0:
        raise ValueError(f"measurement noise variance must be positive, got {w}")
    sigma = belief.sigma.copy()
    flat = sigma.reshape(-1)
    flat[cells] = posterior_sigma(flat[cells], w)
    return belief.with_sigma(sigma)


def predictive_map_update_many(
    belief: MapBelief, poses: Iterable[CopterPose], camera: CameraModel
) -> MapBelief:
    for pose in poses:
        belief = predictive_map_update(belief, pose, camera)
    return belief


def simulate_measurement(
    truth: np.ndarray,
    pose: CopterPose,
    camera: CameraModel,
    geometry: GridGeometry,
    seed,
) -> List[Tuple[int, float]]:
    """Noisy copter readings of the true index over the footprint.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (geometry.height, geometry.width):
        raise MapLoadError(f"truth grid shape {truth.shape} does not match geometry")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cells = footprint(pose, geometry, camera)
    w = measurement_noise(pose, camera)
    values = truth.reshape(-1)[cells] + math.sqrt(w) * rng.standard_normal(cells.size)
    return [(int(i), float(z)) for i, z in zip(cells, values)]


def apply_measurements(belief: MapBelief, readings: Sequence[Tuple[int, float]], w: float) -> MapBelief:
    """Bayesian update of the map with actual readings sharing noise variance ``w``."""
    if not w > 0:
        raise ValueError(f"measurement noise variance must be positive, got {w}")
    if not readings:
        return belief
    idx = np.fromiter((i for i, _ in readings), dtype=np.int64, count=len(readings))
    z = np.fromiter((v for _, v in readings), dtype=float, count=len(readings))
    mu = belief.mu.copy()
    sigma = belief.sigma.copy()
    m, s = mu.reshape(-1), sigma.reshape(-1)
    var = s[idx] ** 2
    post_mu = (m[idx] * w + z * var) / (var + w)
    m[idx] = np.where(s[idx] > 0, np.maximum(post_mu, 0.0), m[idx])
    s[idx] = posterior_sigma(s[idx], w)
    return replace(belief, mu=mu, sigma=sigma)
