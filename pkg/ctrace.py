#!/usr/bin/env python3
"""
ctrace: command-line front end for the contact-tracing branching process.

    python3 ctrace.py compute --offspring poisson:2.5 --b 1 --p 1 --alpha 0:1:11
    python3 ctrace.py critical --b 0,1,2,3 --p 0.01:1:100
    python3 ctrace.py theta-curve --b 1 --p 0.4 --alpha 0:1:200
    python3 ctrace.py simulate --engine direct --p 0.4 --alpha 0.5 --horizon 20
    python3 ctrace.py mc --op vn --p 0.4 --alpha 0.5 --trials 100000
    python3 ctrace.py validate --profile quick

Exit codes: 0 success, 1 usage error, 2 computation error, 3 validation failure.
"""

import argparse
import itertools
import logging
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

import montecarlo
import sim_cluster
import sim_direct
import validation
from analytics import (CtpParams, ThetaUndefinedError, classify_extinction, compute_sequences, critical_alpha,
                       malthusian_theta)
from config import *
from offspring import DomainError, parse_offspring
from scripts.utils import write_table
from streams import mix64, trial_rng
from trajectory import ExplosionCapError

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_COMPUTATION, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    """Bad command line."""


class CtraceArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_grid(text: str) -> List[float]:
    """`start:stop:steps` (inclusive, steps=1 gives start), a comma list, or one value."""
    try:
        if ":" in text:
            start, stop, steps = text.split(":")
            steps = int(steps)
            if steps < 1:
                raise UsageError(f"grid needs at least one step: {text!r}")
            if steps == 1:
                return [float(start)]
            return [float(x) for x in np.linspace(float(start), float(stop), steps)]
        return [float(x) for x in text.split(",")]
    except ValueError as e:
        raise UsageError(f"bad grid {text!r}: {e}") from e


def parse_b(text: str) -> List[int]:
    try:
        values = [int(x) for x in text.split(",")]
    except ValueError as e:
        raise UsageError(f"bad --b {text!r}: {e}") from e
    if any(b < 0 for b in values):
        raise UsageError(f"--b must be nonnegative: {text!r}")
    return values


@dataclass
class ExperimentConfig:
    command: str
    offspring: str
    b: List[int]
    p: List[float]
    alpha: List[float]
    trials: int
    horizon: int
    seed: int
    tol: float
    engine: str = "cluster"
    op: Optional[str] = None
    n_max: int = 8
    window_start: Optional[int] = None
    workers: Optional[int] = None
    profile: str = "full"
    suites: List[str] = field(default_factory=list)
    out: Optional[str] = None
    format: str = "csv"

    @property
    def dist(self):
        return parse_offspring(self.offspring)

    def points(self):
        dist = self.dist
        for b, p, alpha in itertools.product(self.b, self.p, self.alpha):
            yield CtpParams(b, p, alpha, dist)

    def as_dict(self) -> dict:
        return asdict(self)


def cmd_compute(config: ExperimentConfig) -> List[dict]:
    """y_b, verdict and theta over the grid."""
    rows = []
    for params in config.points():
        verdict = classify_extinction(params, config.tol)
        theta = None
        if params.p > 0.0:
            try:
                theta = malthusian_theta(params, config.tol)
            except ThetaUndefinedError as e:
                logger.debug(f"theta undefined at {params.as_dict()}: {e}")
        rows.append({"b": params.b, "p": params.p, "alpha": params.alpha, "y_b": verdict.seed_mean,
                     "verdict": verdict.verdict.value, "theta": theta})
    return rows


def cmd_critical(config: ExperimentConfig) -> List[dict]:
    """e_b(p) for every b and p."""
    dist = config.dist
    return [{"b": b, "p": p, "e_b": critical_alpha(dist, b, p, config.tol)}
            for b in config.b for p in config.p]


def cmd_theta_curve(config: ExperimentConfig) -> List[dict]:
    """theta(alpha) at fixed p, blank from e_b(p) on."""
    if len(config.p) != 1:
        raise UsageError("theta-curve takes a single --p")
    dist, p = config.dist, config.p[0]
    rows = []
    for b in config.b:
        cutoff = critical_alpha(dist, b, p, config.tol)
        for alpha in config.alpha:
            theta = malthusian_theta(CtpParams(b, p, alpha, dist), config.tol) if alpha < cutoff else None
            rows.append({"b": b, "alpha": alpha, "theta": theta})
    return rows


def _single_point(config: ExperimentConfig) -> CtpParams:
    points = list(config.points())
    if len(points) != 1:
        raise UsageError(f"{config.command} takes scalar --b, --p and --alpha")
    return points[0]


def cmd_simulate(config: ExperimentConfig) -> List[dict]:
    """Trajectories `n,Z,ZCT,R0` (with a leading trial column for several trials)."""
    params = _single_point(config)
    rows = []
    for trial in range(config.trials):
        try:
            if config.engine == "direct":
                trajectory = sim_direct.run(params, config.horizon, mix64(config.seed, trial), POPULATION_CAP)
            else:
                trajectory = sim_cluster.run(params, config.horizon, trial_rng(config.seed, trial), POPULATION_CAP)
        except ExplosionCapError as e:
            logger.warning(f"trial {trial}: {e}; writing the generations simulated")
            trajectory = e.trajectory
        for row in trajectory.rows():
            rows.append(dict(trial=trial, **row) if config.trials > 1 else row)
    return rows


def _record(config, op, params, estimate, horizon=None, **extra):
    record = {"op": op, "params": params.as_dict(), "horizon": horizon, "trials": estimate.trials,
              "value": estimate.value, "stderr": estimate.stderr, "ci95": list(estimate.ci95), "seed": config.seed}
    record.update(extra)
    return record


def _flatten(record: dict) -> dict:
    row = {"op": record["op"], **record["params"]}
    row.update({k: v for k, v in record.items() if k not in ("op", "params", "ci95")})
    if "ci95" in record:
        row["ci95_low"], row["ci95_high"] = record["ci95"]
    return row


def cmd_mc(config: ExperimentConfig) -> List[dict]:
    """Monte Carlo estimates; `--op vn` and `--op martingale` emit one row per generation."""
    records = []
    for index, params in enumerate(config.points()):
        seed = config.seed if index == 0 else mix64(config.seed, index)
        if config.op == "extinction":
            estimate = montecarlo.estimate_extinction_probability(params, config.horizon, config.trials, seed,
                                                                  config.workers)
            records.append(_record(config, "extinction", params, estimate, config.horizon))
        elif config.op == "growth":
            estimate = montecarlo.estimate_growth_rate(params, config.horizon, config.trials, config.window_start,
                                                       seed, config.workers)
            records.append(_record(config, "growth", params, estimate, config.horizon,
                                   theta=malthusian_theta(params, config.tol)))
        elif config.op == "vn":
            analytic = compute_sequences(params, config.n_max).v
            estimates = montecarlo.estimate_vn(params, config.n_max, config.trials, seed, config.workers)
            for n, estimate in enumerate(estimates, start=1):
                records.append(_record(config, "vn", params, estimate, n=n, analytic=float(analytic[n]),
                                       z=estimate.z_score(float(analytic[n]))))
        elif config.op == "martingale":
            check = montecarlo.estimate_martingale(params, config.horizon, config.trials, seed, workers=config.workers)
            for n, estimate in enumerate(check.means):
                records.append(_record(config, "martingale", params, estimate, config.horizon, n=n, theta=check.theta))
            records.append(_record(config, "martingale-slope", params, check.slope, config.horizon, theta=check.theta))
        else:
            raise UsageError(f"unknown --op {config.op!r}")
    return records


def cmd_validate(config: ExperimentConfig) -> bool:
    results = validation.run_validation(config.profile, config.seed, config.suites or None)
    return bool(results) and all(results.values())


def build_parser() -> argparse.ArgumentParser:
    parser = CtraceArgumentParser(prog="ctrace", description="Contact-tracing branching process CTP(b, p, alpha)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--offspring", default="poisson:2.5",
                        help="poisson:LAM | geometric:Q | binomial:N:Q | pmf:P0,P1,...")
    common.add_argument("--b", default="0", help="detection delay; comma list allowed")
    common.add_argument("--p", default="0.4", help="detection probability: value, list or start:stop:steps")
    common.add_argument("--alpha", default="0.5", help="trace probability: value, list or start:stop:steps")
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--horizon", type=int, default=30)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: CTRACE_SEED)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=CtraceArgumentParser)
    sub.add_parser("compute", parents=[common], help="y_b, verdict and theta over a grid")
    sub.add_parser("critical", parents=[common], help="critical curve e_b(p)")
    sub.add_parser("theta-curve", parents=[common], help="theta as a function of alpha")
    simulate = sub.add_parser("simulate", parents=[common], help="simulate trajectories")
    simulate.add_argument("--engine", choices=["direct", "cluster"], default="cluster")
    mc = sub.add_parser("mc", parents=[common], help="Monte Carlo estimates")
    mc.add_argument("--op", choices=["extinction", "growth", "vn", "martingale"], required=True)
    mc.add_argument("--n-max", type=int, default=8)
    mc.add_argument("--window-start", type=int, default=None)
    mc.add_argument("--workers", type=int, default=None)
    validate = sub.add_parser("validate", parents=[common], help="run the agreement suites")
    validate.add_argument("--profile", choices=sorted(validation.PROFILES), default="full")
    validate.add_argument("--suite", action="append", default=[], help="run only this suite (repeatable)")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig(
        command=args.command,
        offspring=args.offspring,
        b=parse_b(args.b),
        p=parse_grid(args.p),
        alpha=parse_grid(args.alpha),
        trials=args.trials,
        horizon=args.horizon,
        seed=master_seed() if args.seed is None else args.seed,
        tol=args.tol,
        engine=getattr(args, "engine", "cluster"),
        op=getattr(args, "op", None),
        n_max=getattr(args, "n_max", 8),
        window_start=getattr(args, "window_start", None),
        workers=getattr(args, "workers", None),
        profile=getattr(args, "profile", "full"),
        suites=getattr(args, "suite", []),
        out=args.out,
        format=args.format,
    )
    for name, values in (("p", config.p), ("alpha", config.alpha)):
        if any(not (0.0 <= v <= 1.0) for v in values):
            raise UsageError(f"--{name} values must lie in [0,1]")
    if config.trials < 1 or config.horizon < 1:
        raise UsageError("--trials and --horizon must be positive")
    parse_offspring(config.offspring)
    return config


COMMANDS = {
    "compute": (cmd_compute, ["b", "p", "alpha", "y_b", "verdict", "theta"]),
    "critical": (cmd_critical, ["b", "p", "e_b"]),
    "theta-curve": (cmd_theta_curve, ["b", "alpha", "theta"]),
    "simulate": (cmd_simulate, None),
    "mc": (cmd_mc, None),
}


def main(argv=None) -> int:
    """Main entry point."""
    ensure_directories()
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(LOG_FILE),
            logging.StreamHandler()
        ]
    )

    try:
        config = resolve_config(build_parser().parse_args(argv))
    except (UsageError, DomainError) as e:
        print(f"ctrace: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logger.info(f"ctrace {config.command} (seed {config.seed})")
    try:
        if config.command == "validate":
            return EXIT_OK if cmd_validate(config) else EXIT_VALIDATION
        command, columns = COMMANDS[config.command]
        rows = command(config)
        if config.format == "csv" and config.command == "mc":
            rows = [_flatten(r) for r in rows]
        write_table(rows, config.out, config.format, config.as_dict(), columns)
    except UsageError as e:
        print(f"ctrace: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"ctrace {config.command} failed: {e}")
        return EXIT_COMPUTATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
