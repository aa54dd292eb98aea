"""Command-line interface.

Subcommands: solve (oracle only), run (distributed + report), continuous
(closed form + distributed), check (assumption certificate), gen
(scenario generator).  Exit codes: 0 success, 2 validation failure,
3 non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from . import rootfind, scenario
from .criticality import eval_surrogate
from .netgraph import check_window_connectivity
from .oracle import InfeasibleError
from .protocol import NoisySplit, certify_deficit_tracking, run_protocol
from .scenario import ScenarioError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3


def _load(path: str, overrides: argparse.Namespace) -> scenario.ScenarioConfig:
    config = scenario.load_scenario(path)
    changes = {}
    if overrides.max_rounds is not None:
        changes["max_rounds"] = overrides.max_rounds
    if overrides.seed is not None:
        changes["seed"] = overrides.seed
    if changes:
        config = dataclasses.replace(config, **changes)
    return config


def _emit(obj: str, quiet: bool) -> None:
    if not quiet:
        print(obj)


def cmd_solve(args: argparse.Namespace) -> int:
    config = _load(args.config, args)
    if config.mode == "continuous":
        regions = [(r.capacity, float(r.criticality)) for r in config.continuous_regions]
        from .oracle import continuous_solution

        solution = continuous_solution(regions, config.deficit)
        _emit(
            json.dumps(dataclasses.asdict(solution), sort_keys=True, indent=2),
            args.quiet,
        )
        return EXIT_OK
    summary = scenario.oracle_summary(config)
    _emit(json.dumps(dataclasses.asdict(summary), sort_keys=True, indent=2), args.quiet)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args.config, args)
    record = args.trace is not None
    if config.mode == "continuous":
        trace, report = scenario.run_continuous(config, record_trace=record)
    else:
        trace, report = scenario.run_scenario(config, record_trace=record)
    if args.trace:
        scenario.emit_trace(trace, args.trace, scenario.region_ids(config))
    _emit(report.to_json(), args.quiet)
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def cmd_continuous(args: argparse.Namespace) -> int:
    config = _load(args.config, args)
    if config.mode != "continuous":
        raise ScenarioError("continuous subcommand needs a continuous-mode config")
    return cmd_run(args)


def cmd_check(args: argparse.Namespace) -> int:
    config = _load(args.config, args)
    inst = scenario.build_instance(config)
    n = len(inst.region_criticalities)

    estimator = inst.estimator
    fld = rootfind.TimeVaryingField(
        n=n,
        evaluate=lambda j, z, t: eval_surrogate(inst.surrogates[j], z)
        - estimator.values(int(t))[j],
        limit=lambda j, z: eval_surrogate(inst.surrogates[j], z)
        - config.deficit / n,
    )
    all_bps = [b for s in inst.surrogates for b in s.base.breakpoints]
    lo = min(all_bps) - 2 * inst.ramp_width
    hi = max(all_bps) + 2 * inst.ramp_width
    grid = np.linspace(lo, hi, 1001)
    horizon = min(config.max_rounds, 2000)

    cert = rootfind.AssumptionCertificate()
    bounded, lipschitz, cert.bound, cert.lipschitz = (
        rootfind.verify_assumption_bounded_lipschitz(fld, grid, horizon)
    )
    cert.add(bounded)
    cert.add(lipschitz)
    sign = rootfind.verify_sign_condition(fld, grid, 10.0 * horizon)
    cert.add(sign)
    cert.sign_witness = sign.witness
    deviation = rootfind.verify_deviation_rate(
        fld, grid[::10], horizon, lambda t: inst.step.eta(t)
    )
    cert.add(deviation)
    cert.deviation_rate = deviation.value if deviation.value is not None else math.nan

    theta = certify_deficit_tracking(inst.estimator, inst.step, min(100_000, 10 * config.max_rounds))
    bound_theta = 2.0 * n if isinstance(inst.estimator, NoisySplit) else max(theta, 1.0)
    cert.add(
        rootfind.CheckResult(
            "deficit_tracking",
            theta <= bound_theta + 1e-9,
            value=theta,
            detail=f"bound {bound_theta:g}",
        )
    )

    B = inst.schedule.window
    cert.window = B
    connectivity = check_window_connectivity(inst.schedule, max(B, (min(config.max_rounds, 100 * B) // B) * B))
    cert.add(
        rootfind.CheckResult(
            "window_connectivity",
            connectivity.passed,
            value=float(connectivity.windows_checked),
            detail=str(connectivity),
        )
    )
    digest = scenario.certificate_digest(config, inst)
    cert.add(
        rootfind.CheckResult(
            "doubly_stochastic",
            digest["stochasticity_defect"] <= 1e-12,
            value=digest["stochasticity_defect"],
        )
    )

    probe_inst = dataclasses.replace(
        inst, max_rounds=min(500, config.max_rounds), convergence_window=None
    )
    probe = run_protocol(probe_inst, record_trace=True)
    means = probe.x.mean(axis=1)
    spread = np.abs(probe.x - means[:, None]).max(axis=1)
    etas = probe.eta
    cert.consensus_ratio = float((spread / etas).max())

    _emit(str(cert), args.quiet)
    return EXIT_OK if cert.passed else EXIT_VALIDATION


def cmd_gen(args: argparse.Namespace) -> int:
    config = scenario.generate_scenario(
        n_regions=args.regions,
        loads_per_region=args.loads,
        seed=args.seed,
        deficit_fraction=args.deficit_fraction,
        graph=args.graph,
    )
    scenario.dump_scenario(config, args.output)
    _emit(f"wrote {args.output}", args.quiet)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadshed",
        description="Distributed priority-based load shedding simulator",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress stdout reports")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="scenario JSON path")
        p.add_argument("--max-rounds", type=int, default=None, dest="max_rounds")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--quiet", action="store_true", help="suppress stdout reports")

    p_solve = sub.add_parser("solve", help="centralized oracle solution only")
    add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_run = sub.add_parser("run", help="full distributed run plus report")
    add_common(p_run)
    p_run.add_argument("--trace", default=None, help="write per-round CSV here")
    p_run.set_defaults(func=cmd_run)

    p_cont = sub.add_parser("continuous", help="continuous-variant oracle and run")
    add_common(p_cont)
    p_cont.add_argument("--trace", default=None, help="write per-round CSV here")
    p_cont.set_defaults(func=cmd_continuous)

    p_check = sub.add_parser("check", help="verify run assumptions numerically")
    add_common(p_check)
    p_check.set_defaults(func=cmd_check)

    p_gen = sub.add_parser("gen", help="generate a random scenario")
    p_gen.add_argument("--regions", type=int, default=4)
    p_gen.add_argument("--loads", type=int, default=100)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--deficit-fraction", type=float, default=0.4)
    p_gen.add_argument("--graph", default="line",
                       choices=["line", "line-periodic", "random-periodic", "random"])
    p_gen.add_argument("-o", "--output", required=True)
    p_gen.add_argument("--quiet", action="store_true", help="suppress stdout reports")
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, InfeasibleError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
