"""Synthetic annotated terrain for experiments.

A map is split into Voronoi regions around random seed points and every
region is assigned a terrain class (e.g. feature-rich rock vs. feature-poor
sand). A class fixes the satellite prior ``(mu, sigma)`` of all its cells.
The hidden true index of a region is one draw from that prior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .localizability_map import GridGeometry, MapBelief, init_from_satellite


@dataclass(frozen=True)
class TerrainClass:
    name: str
    mu: float
    sigma: float
    weight: float = 1.0
    obstacle: bool = False

    def __post_init__(self):
        if self.mu < 0 or self.sigma < 0:
            raise ValueError(f"terrain class {self.name!r} needs mu >= 0 and sigma >= 0")
        if not self.weight > 0:
            raise ValueError(f"terrain class {self.name!r} needs a positive weight")


@dataclass(frozen=True)
class Terrain:
    labels: np.ndarray
    belief: MapBelief
    truth: np.ndarray


def generate_terrain(
    geometry: GridGeometry,
    classes: Sequence[TerrainClass],
    regions: int,
    seed: int,
) -> Terrain:
    if not classes:
        raise ValueError("at least one terrain class is required")
    names = [c.name for c in classes]
    if len(set(names)) != len(names):
        raise ValueError("terrain class names must be unique")
    if regions < 1:
        raise ValueError("need at least one region")
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = geometry.extent
    points = np.column_stack([rng.uniform(x0, x1, regions), rng.uniform(y0, y1, regions)])
    weights = np.array([c.weight for c in classes], dtype=float)
    region_class = rng.choice(len(classes), size=regions, p=weights / weights.sum())
    mu_c = np.array([c.mu for c in classes])
    sigma_c = np.array([c.sigma for c in classes])
    region_truth = np.maximum(mu_c[region_class] + sigma_c[region_class] * rng.standard_normal(regions), 0.0)

    xs, ys = geometry.center(np.arange(geometry.size))
    _, nearest = cKDTree(points).query(np.column_stack([xs, ys]))
    shape = (geometry.height, geometry.width)
    labels = region_class[nearest].reshape(shape)
    obstacle = np.array([c.obstacle for c in classes])[labels]
    belief = init_from_satellite(mu_c[labels], sigma_c[labels], geometry, obstacle)
    truth = region_truth[nearest].reshape(shape)
    return Terrain(labels, belief, truth)
