"""Command line entry point: ``wheretomap {plan,montecarlo,genmap,validate}``.

Exit codes: 0 success, 1 configuration or I/O error, 2 no rover path.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from typing import List, Optional

from .rover_planner import NoPathError

log = logging.getLogger("wheretomap")


def _common(p: argparse.ArgumentParser, out: bool = True) -> None:
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    if out:
        p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--iterations", type=int, default=None, help="copter sampling budget per plan")
    p.add_argument("--quiet", action="store_true", help="only report errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wheretomap", description="Iterative rover/copter planning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one mission and write the report")
    _common(p)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("montecarlo", help="proposed planner vs. random baseline over start positions")
    _common(p)
    p.add_argument("--runs", type=int, default=None, help="baseline runs per start")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("genmap", help="write a synthetic annotated prior and ground truth")
    _common(p)

    p = sub.add_parser("validate", help="check a scenario file and its map")
    _common(p, out=False)
    return parser


def _writable_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory not writable: {path}")


def cmd_plan(args) -> int:
    from .mission import run_iterative
    from .report import write_plan_outputs
    from .scenario import load_scenario

    scenario = load_scenario(args.scenario, args.seed, args.iterations)
    _writable_dir(args.out)
    t0 = time.perf_counter()
    result = run_iterative(scenario)
    log.info(
        "J %.6g -> %.6g, reduction %.2f%%, %d images, %d iterations (%.2fs; rover %.2fs, copter %.2fs)",
        result.j_before, result.j_after, result.reduction_rate, len(result.plan),
        len(result.trace) - 1, time.perf_counter() - t0,
        result.timings["rover"], result.timings["copter"],
    )
    write_plan_outputs(result, scenario, args.out)
    if not args.no_figures:
        from .plotting import plot_mission

        plot_mission(result, scenario, os.path.join(args.out, "plan_overview.png"))
    return 0


def cmd_montecarlo(args) -> int:
    from .mission import run_monte_carlo
    from .report import write_mc_results
    from .scenario import DEFAULT_STARTS, load_scenario

    scenario = load_scenario(args.scenario, args.seed, args.iterations)
    _writable_dir(args.out)
    starts = list(scenario.mc_starts) or DEFAULT_STARTS
    rows = run_monte_carlo(scenario, starts, scenario.seed, args.runs)
    write_mc_results(rows, os.path.join(args.out, "mc_results.csv"))
    if not args.no_figures:
        from .plotting import plot_monte_carlo

        plot_monte_carlo(rows, os.path.join(args.out, "mc_reduction.png"))
    for r in rows:
        log.info("%s (%g, %g): proposed %.2f%%, baseline %.2f%%", r.label, r.start_x, r.start_y,
                 r.proposed_rate, r.baseline_rate)
    return 0


def cmd_genmap(args) -> int:
    from .mapio import write_prior_csv, write_truth_csv
    from .scenario import ConfigError, read_scenario_file
    from .terrain import generate_terrain

    sf = read_scenario_file(args.scenario)
    if sf.genmap is None:
        raise ConfigError(f"{args.scenario}: no 'genmap' section")
    gm = sf.genmap
    seed = gm.seed if args.seed is None else args.seed
    _writable_dir(args.out)
    terrain = generate_terrain(sf.geometry, gm.classes, gm.regions, seed)
    write_prior_csv(os.path.join(args.out, gm.prior_name), terrain.belief)
    write_truth_csv(os.path.join(args.out, gm.truth_name), terrain.truth, sf.geometry)
    log.info("wrote %s and %s to %s", gm.prior_name, gm.truth_name, args.out)
    return 0


def cmd_validate(args) -> int:
    from .scenario import load_scenario

    scenario = load_scenario(args.scenario, args.seed, args.iterations)
    geom = scenario.belief.geometry
    log.info("ok: %dx%d grid at %g m, rover %s -> %s, k_max=%d",
             geom.width, geom.height, geom.resolution, scenario.rover_start,
             scenario.rover_goal, scenario.limits.k_max)
    return 0


COMMANDS = {"plan": cmd_plan, "montecarlo": cmd_montecarlo, "genmap": cmd_genmap, "validate": cmd_validate}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger("wheretomap").setLevel(logging.ERROR if args.quiet else logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except NoPathError as exc:
        log.error("no path: %s", exc)
        return 2
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
