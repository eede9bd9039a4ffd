import os

import numpy as np
import pytest

from wheretomap.localizability_map import GridGeometry, init_from_satellite

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIOS = os.path.join(ROOT, "scenarios")
TWO_CLASS = os.path.join(SCENARIOS, "two_class.yaml")
FULL_SCALE = os.path.join(SCENARIOS, "full_scale.yaml")

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[number] = (title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, outcome = _acceptance[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {title}")


def random_belief(width, height, resolution=1.0, seed=0, mu_range=(0.0, 1.0), sigma_range=(0.05, 1.0),
                  obstacle_share=0.0):
    """Per-cell independent uniform map, so ties between paths are unlikely."""
    rng = np.random.default_rng(seed)
    geom = GridGeometry(width, height, resolution)
    mu = rng.uniform(*mu_range, size=(height, width))
    sigma = rng.uniform(*sigma_range, size=(height, width))
    obstacle = rng.random((height, width)) < obstacle_share
    return init_from_satellite(mu, sigma, geom, obstacle)


@pytest.fixture
def small_belief():
    return random_belief(12, 10, resolution=0.5, seed=3)


def random_scenario(seed, size=40, resolution=1.0, k_max=2, iterations=300):
    """Small Voronoi-terrain mission with random start, goal and camera."""
    from wheretomap.copter_planner import FlightLimits
    from wheretomap.localizability_map import CameraModel, CopterPose
    from wheretomap.mission import Scenario
    from wheretomap.terrain import TerrainClass, generate_terrain

    rng = np.random.default_rng(seed)
    geom = GridGeometry(size, size, resolution)
    classes = [
        TerrainClass("rich", float(rng.uniform(0.02, 0.1)), float(rng.uniform(0.3, 1.0))),
        TerrainClass("poor", float(rng.uniform(0.2, 0.5)), float(rng.uniform(0.8, 2.0))),
    ]
    terrain = generate_terrain(geom, classes, int(rng.integers(5, 30)), int(rng.integers(1 << 30)))
    extent = size * resolution
    start = tuple(rng.uniform(0.05, 0.3, 2) * extent)
    goal = tuple(rng.uniform(0.7, 0.95, 2) * extent)
    return Scenario(
        belief=terrain.belief,
        rover_start=start,
        rover_goal=goal,
        copter_start=CopterPose(0.02 * extent, 0.98 * extent, 2.0),
        copter_goal=CopterPose(0.98 * extent, 0.02 * extent, 2.0),
        camera=CameraModel(half_fov_tangent=float(rng.uniform(0.4, 1.5))),
        limits=FlightLimits(k_max=k_max, l_max=4.0 * extent, delta=2.0),
        sampling_iterations=iterations,
        seed=int(rng.integers(1 << 30)),
        truth=terrain.truth,
    )
