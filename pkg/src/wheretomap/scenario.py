"""Scenario files: one YAML document with nested sections.

Relative map paths are resolved against the scenario file's directory.
Every physical default below is an artifact default chosen for this tool,
not a measured camera or copter property.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .copter_planner import FlightLimits
from .localizability_map import CameraModel, CopterPose, GridGeometry
from .mapio import read_prior_csv, read_raster_prior, read_truth_csv
from .mission import Scenario
from .terrain import TerrainClass

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "rover": {"p0_trace": 0.0},
    "camera": {
        "half_fov_tangent": 0.5,
        "base_noise_variance": 0.25,
        "reference_altitude": 10.0,
        "grade": "high",
        "grade_multipliers": {"high": 1.0, "low": 4.0},
    },
    "limits": {
        "h_min": 2.0,
        "h_max": 10.0,
        "k_max": 3,
        "l_max": 500.0,
        "delta": 5.0,
        "strict_delta": False,
        "count_landing_leg": False,
    },
    "planning": {
        "confidence": 0.95,
        "max_iterations": 5,
        "sampling_iterations": 2000,
        "altitudes": None,
        "candidate_stride": 1,
        "seed": 0,
    },
    "montecarlo": {"starts": [], "baseline_runs": 100},
}

DEFAULT_STARTS = [(float(x), 20.0) for x in range(10, 101, 10)]


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioFile:
    path: str
    raw: Dict[str, Any]
    geometry: GridGeometry
    genmap: Optional["GenmapSpec"] = None

    def resolve(self, relpath: str) -> str:
        if os.path.isabs(relpath):
            return relpath
        return os.path.join(os.path.dirname(os.path.abspath(self.path)), relpath)

    def section(self, name: str) -> Dict[str, Any]:
        merged = dict(DEFAULTS.get(name, {}))
        merged.update(self.raw.get(name) or {})
        return merged


@dataclass
class GenmapSpec:
    classes: List[TerrainClass]
    regions: int
    seed: int
    prior_name: str = "map_prior.csv"
    truth_name: str = "map_truth.csv"


def _pair(value, what: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in value)
    except TypeError:
        raise ConfigError(f"{what} must be a list of numbers, got {value!r}") from None


def read_scenario_file(path: str) -> ScenarioFile:
    if not os.path.isfile(path):
        raise ConfigError(f"scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict) or "map" not in raw:
        raise ConfigError(f"{path}: missing 'map' section")
    m = raw["map"]
    try:
        geometry = GridGeometry(
            int(m["width"]), int(m["height"]), float(m["resolution"]),
            _pair(m.get("origin", (0.0, 0.0)), "map.origin"),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: map section lacks {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    sf = ScenarioFile(path, raw, geometry)
    if "genmap" in raw:
        sf.genmap = _genmap_spec(sf)
    return sf


def _genmap_spec(sf: ScenarioFile) -> GenmapSpec:
    g = sf.raw["genmap"] or {}
    try:
        classes = [
            TerrainClass(
                str(c["name"]), float(c["mu"]), float(c["sigma"]),
                float(c.get("weight", 1.0)), bool(c.get("obstacle", False)),
            )
            for c in g.get("classes", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{sf.path}: invalid terrain class spec: {exc}") from None
    if not classes:
        raise ConfigError(f"{sf.path}: genmap needs at least one terrain class")
    m = sf.raw["map"]
    return GenmapSpec(
        classes,
        int(g.get("regions", 40)),
        int(g.get("seed", 0)),
        os.path.basename(m.get("prior", "map_prior.csv")),
        os.path.basename(m.get("truth", "map_truth.csv")),
    )


def load_scenario(
    path: str,
    seed: Optional[int] = None,
    iterations: Optional[int] = None,
) -> Scenario:
    """Build a :class:`Scenario`, loading the map prior and optional truth."""
    sf = read_scenario_file(path)
    m = sf.raw["map"]
    try:
        if "prior" in m:
            belief = read_prior_csv(sf.resolve(m["prior"]), sf.geometry)
        elif "raster" in m and "lookup" in m:
            belief = read_raster_prior(sf.resolve(m["raster"]), sf.resolve(m["lookup"]), sf.geometry)
        else:
            raise ConfigError(f"{path}: map section needs 'prior' or 'raster' + 'lookup'")
        truth = read_truth_csv(sf.resolve(m["truth"]), sf.geometry) if m.get("truth") else None
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    except OSError as exc:
        raise ConfigError(f"cannot read map data: {exc}") from None

    rover, copter = sf.section("rover"), sf.raw.get("copter") or {}
    cam, lim, pl, mc = sf.section("camera"), sf.section("limits"), sf.section("planning"), sf.section("montecarlo")
    try:
        copter_goal = CopterPose(*_pair(copter["goal"], "copter.goal")) if copter.get("goal") else None
        return Scenario(
            belief=belief,
            rover_start=_pair(rover["start"], "rover.start"),
            rover_goal=_pair(rover["goal"], "rover.goal"),
            copter_start=CopterPose(*_pair(copter["start"], "copter.start")),
            copter_goal=copter_goal,
            camera=CameraModel(
                float(cam["half_fov_tangent"]), float(cam["base_noise_variance"]),
                float(cam["reference_altitude"]), str(cam["grade"]),
                {str(k): float(v) for k, v in cam["grade_multipliers"].items()},
            ),
            limits=FlightLimits(
                float(lim["h_min"]), float(lim["h_max"]), int(lim["k_max"]), float(lim["l_max"]),
                float(lim["delta"]), bool(lim["strict_delta"]), bool(lim["count_landing_leg"]),
            ),
            confidence=float(pl["confidence"]),
            p0_trace=float(rover["p0_trace"]),
            max_iterations=int(pl["max_iterations"]),
            sampling_iterations=int(pl["sampling_iterations"] if iterations is None else iterations),
            altitudes=None if pl["altitudes"] is None else _pair(pl["altitudes"], "planning.altitudes"),
            candidate_stride=int(pl["candidate_stride"]),
            seed=int(pl["seed"] if seed is None else seed),
            truth=truth,
            baseline_runs=int(mc["baseline_runs"]),
            mc_starts=tuple(_pair(s, "montecarlo.starts") for s in mc["starts"]),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
