"""Command-line entry point: ``scripkit <command> --config game.json [options]``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .equilibrium import (critical_money, default_jobs, greatest_equilibrium, parse_grid, sweep_header,
                          sweep_rows, welfare_sweep)
from .errors import ConfigError, ScripError
from .mdp import K_MAX
from .model import ValidatedSpec, spec_from_json, validate_spec

logger = logging.getLogger("scripkit")

EXIT_IO = 4


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def _round_floats(obj):
    if isinstance(obj, float):
        return float(format(obj, ".12g"))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_round_floats(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


class Context:
    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.raw = b""
        self.doc: dict = {}

    def load(self) -> ValidatedSpec:
        try:
            self.raw = Path(self.args.config).read_bytes()
        except OSError:
            raise
        try:
            self.doc = json.loads(self.raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return validate_spec(spec_from_json(self.doc))

    def manifest(self, seed: int | None = None, **extra) -> None:
        import numba
        import scipy

        doc = {
            "command": self.args.command,
            "argv": self.args.argv,
            "config_sha256": hashlib.sha256(self.raw).hexdigest(),
            "seed": seed,
            "versions": {
                "scripkit": __version__, "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__,
            },
        }
        doc.update(extra)
        write_json(self.out / "manifest.json", doc)


def _dist_csv(path: Path, dist) -> None:
    write_csv(path, ["type_index", "wealth", "fraction"], dist.csv_rows())


def cmd_equilibrium(ctx: Context) -> dict:
    spec = ctx.load()
    rep = greatest_equilibrium(spec, ctx.args.kmax)
    doc = rep.to_json(spec.n)
    write_json(ctx.out / "equilibrium.json", doc)
    if rep.dist is not None:
        _dist_csv(ctx.out / "distribution.csv", rep.dist)
    ctx.manifest()
    return doc


def _sweep_out(ctx: Context, spec: ValidatedSpec, reports, stem: str = "sweep") -> dict:
    write_csv(ctx.out / f"{stem}.csv", sweep_header(spec.num_types), sweep_rows(reports))
    doc = {"points": [r.to_json(spec.n) for r in reports]}
    for p in doc["points"]:
        p.pop("trace")
    write_json(ctx.out / f"{stem}.json", doc)
    return {"points": len(reports), "crashed_from": next((str(r.m) for r in reports if r.crashed), None)}


def _grid(ctx: Context):
    if not ctx.args.m:
        raise ConfigError("--m LO:STEP:HI is required")
    return parse_grid(ctx.args.m)


def cmd_sweep(ctx: Context) -> dict:
    spec = ctx.load()
    reports = welfare_sweep(spec, _grid(ctx), ctx.args.kmax, jobs=ctx.args.jobs)
    doc = _sweep_out(ctx, spec, reports)
    ctx.manifest()
    return doc


def cmd_crash(ctx: Context) -> dict:
    spec = ctx.load()
    grid = _grid(ctx)
    step = grid[1] - grid[0] if len(grid) > 1 else None
    lo, hi = critical_money(spec, grid[0], grid[-1], step, ctx.args.kmax)
    doc = {"last_nontrivial_m": str(lo), "first_trivial_m": str(hi)}
    write_json(ctx.out / "crash.json", doc)
    ctx.manifest()
    return doc


def cmd_simulate(ctx: Context) -> dict:
    from .simulator import SimConfig, run

    spec = ctx.load()
    block = dict(ctx.doc.get("simulate", {}))
    args = ctx.args
    rounds = int(float(args.rounds if args.rounds is not None else block.get("rounds", 100_000)))
    seed = int(args.seed if args.seed is not None else block.get("seed", 0))
    profile = block.get("profile")
    if profile is None:
        profile = greatest_equilibrium(spec, args.kmax).profile
    try:
        config = SimConfig(
            spec=spec, profile=tuple(int(k) for k in profile), rounds=rounds, seed=seed,
            agent_thresholds=block.get("agent_thresholds"),
            collusion_groups=block.get("collusion_groups", ()),
            group_thresholds=block.get("group_thresholds"),
            sybil_counts=block.get("sybil_counts"),
            initial=block.get("initial", "uniform"),
            tail_fraction=float(block.get("tail_fraction", 0.5)),
            free_service_prob=float(block.get("free_service_prob", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad simulate block: {exc}") from exc
    res = run(config)
    doc = dict(res.counters_json(), profile=list(config.profile), rounds=rounds, seed=seed)
    write_json(ctx.out / "simulation.json", doc)
    _dist_csv(ctx.out / "distribution.csv", res.empirical_dist)
    write_csv(ctx.out / "utility.csv", ["agent", "type_index", "discounted", "per_round"],
              ((j, int(res.agent_type[j]), res.utility_discounted[j], res.utility_per_round[j])
               for j in range(res.agent_type.size)))
    ctx.manifest(seed=seed)
    return {"money_conserved": res.money_conserved, "satisfied": res.counter("satisfied")}


def cmd_infer(ctx: Context) -> dict:
    from .inference import minimal_explanation, read_distribution_csv, synthesize_game

    args = ctx.args
    path = args.dist or args.config
    if not path:
        raise ConfigError("--dist PATH is required")
    ctx.raw = Path(path).read_bytes()
    obs = read_distribution_csv(path)
    exp = minimal_explanation(obs, tol=args.tol, smooth=args.smooth)
    game = synthesize_game(obs, exp, gamma=args.gamma, delta=args.delta, n=args.n)
    doc = exp.to_json()
    doc["cost_bounds"] = [{"k": k, "alpha_low": lo, "alpha_high": hi}
                          for k, (lo, hi) in zip(game.profile, game.cost_bounds)]
    write_json(ctx.out / "inference.json", doc)
    ctx.manifest()
    return doc


def cmd_perturb(ctx: Context) -> dict:
    from .perturbations import altruist_equilibrium, hoarder_spec, sybil_spec

    spec = ctx.load()
    args = ctx.args
    chosen = [x is not None for x in (args.altruist_fraction, args.hoarder_fraction, args.sybil)]
    if sum(chosen) != 1:
        raise ConfigError("choose exactly one of --altruist-fraction, --hoarder-fraction, --sybil")
    grid = _grid(ctx) if args.m else [spec.m]
    if args.altruist_fraction is not None:
        spec = spec.integral_for(grid)
        reports = [altruist_equilibrium(spec.with_m(m), args.altruist_fraction, args.kmax) for m in grid]
    else:
        if args.hoarder_fraction is not None:
            spec = hoarder_spec(spec, args.hoarder_fraction)
        else:
            if args.sybil_fraction is None:
                raise ConfigError("--sybil needs --sybil-fraction")
            spec = sybil_spec(spec, args.sybil, args.sybil_fraction)
        reports = welfare_sweep(spec, grid, args.kmax, jobs=args.jobs)
    doc = _sweep_out(ctx, spec, reports, stem="perturb")
    ctx.manifest()
    return doc


COMMANDS = {
    "equilibrium": cmd_equilibrium, "sweep": cmd_sweep, "crash": cmd_crash,
    "simulate": cmd_simulate, "infer": cmd_infer, "perturb": cmd_perturb,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scripkit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="game JSON")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--kmax", type=int, default=K_MAX)
        p.add_argument("--jobs", type=int, default=default_jobs())
        if name in ("sweep", "crash", "perturb"):
            p.add_argument("--m", help="money grid LO:STEP:HI")
        if name == "simulate":
            p.add_argument("--rounds", help="number of rounds (accepts 1e7)")
            p.add_argument("--seed", type=int)
        if name == "infer":
            p.add_argument("--dist", help="CSV with wealth,fraction columns")
            p.add_argument("--tol", type=float, default=1e-6)
            p.add_argument("--smooth", action="store_true", help="median-smooth log-ratios (noisy input)")
            p.add_argument("--gamma", type=float, default=1.0)
            p.add_argument("--delta", type=float, default=0.95)
            p.add_argument("--n", type=int, default=100)
        if name == "perturb":
            p.add_argument("--altruist-fraction", type=float)
            p.add_argument("--hoarder-fraction")
            p.add_argument("--sybil", type=int)
            p.add_argument("--sybil-fraction")
    return parser


def _error(exc: BaseException, code: int) -> int:
    json.dump({"error": type(exc).__name__, "message": str(exc), "exit_code": code}, sys.stderr)
    sys.stderr.write("\n")
    return code


def run_command(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=os.environ.get("SCRIPKIT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    if args.command != "infer" and not args.config:
        return _error(ConfigError("--config is required"), 2)
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        doc = COMMANDS[args.command](Context(args))
    except ScripError as exc:
        return _error(exc, exc.exit_code)
    except OSError as exc:
        return _error(exc, EXIT_IO)
    json.dump(_round_floats(doc), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def main() -> None:
    sys.exit(run_command())
