"""Batch CLI: configuration in, CSV/JSON reports out.

Exit codes: 0 success, 1 configuration error, 2 numerical blow-up,
3 assertion failure (reports are still written).

Flags mirror environment variables with the FERROSPEC_ prefix
(FERROSPEC_OUTPUT, FERROSPEC_JOBS, FERROSPEC_SEED, FERROSPEC_QUIET);
explicit flags win over the environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .grid import Grid
from .integrate import BlowUpError, simulate, write_checkpoint
from .state import State
from .verify import (
    ExperimentResult,
    measure_smallness_diagnostics,
    run_tau_sweep,
    sweep_trajectories,
    verify_damping_estimate,
    verify_limit_convergence,
    verify_multiplier_decay,
    verify_parabolic_smoothing,
)
from . import fields as field_ops

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_ASSERTION = 3

CSV_COLUMNS = ("t", "hs12_u", "hs12_m", "hs12_r",
               "hs1_u", "hs1_m", "hs1_r", "l4t_h1_running")


def _say(quiet: bool, *parts):
    if not quiet:
        print(*parts)


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_norms_csv(path: Path, report):
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [report.t, report.hs12_u, report.hs12_m, report.hs12_r,
            report.hs1_u, report.hs1_m, report.hs1_r, report.l4t_h1_running]
    lines = [",".join(CSV_COLUMNS)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def cmd_simulate(cfg, outdir: Path, quiet: bool) -> int:
    grid = cfg.build_grid()
    p = cfg.build_params()
    tgrid = cfg.build_time_grid()
    ext = cfg.build_external_field(grid)
    U0 = cfg.build_state(grid)
    opts = cfg.simulate_options()
    try:
        traj, report = simulate(grid, U0, ext, p, tgrid)
    except BlowUpError as exc:
        _say(quiet, f"simulation blew up at t = {exc.t:.6g}")
        _write_json(outdir / "summary.json",
                    {"status": "blow-up", "time": exc.t})
        return EXIT_BLOWUP

    _write_norms_csv(outdir / "norms.csv", report)
    diags = measure_smallness_diagnostics(grid, U0, ext, p, tgrid)
    summary = {
        "status": "ok",
        "config_echo": cfg.raw,
        "report": report.as_dict(),
        "smallness_diagnostics": diags.as_dict(),
    }
    _write_json(outdir / "summary.json", summary)
    if opts["write_checkpoints"]:
        write_checkpoint(outdir / "final.ckpt", grid, p, tgrid.t_end,
                         traj.state_at(traj.n_nodes - 1))
    _say(quiet, f"simulate: ok; wrote {outdir / 'norms.csv'}")
    return EXIT_OK


def cmd_sweep_tau(cfg, outdir: Path, quiet: bool) -> int:
    grid = cfg.build_grid()
    p_base = cfg.build_params()
    tgrid = cfg.build_time_grid()
    ext = cfg.build_external_field(grid)
    U0 = cfg.build_state(grid)
    opts = cfg.sweep_options()
    try:
        trajectories = sweep_trajectories(
            grid, U0, ext, p_base, opts["tau_list"], tgrid)
        sweep = run_tau_sweep(
            grid, U0, ext, p_base, opts["tau_list"], tgrid,
            eps_fraction=cfg.eps_fraction, h_target=opts["h_target"],
            min_reduction=opts["min_reduction"], trajectories=trajectories)
        limit = verify_limit_convergence(
            grid, U0, ext, p_base, opts["tau_list"], tgrid,
            eps_fraction=cfg.eps_fraction, trajectories=trajectories)
    except BlowUpError as exc:
        _say(quiet, f"sweep aborted: blow-up at t = {exc.t:.6g}")
        _write_json(outdir / "sweep_tau.json",
                    {"status": "blow-up", "time": exc.t})
        return EXIT_BLOWUP

    for tau in opts["tau_list"]:
        _traj, rep = trajectories[tau]
        _write_norms_csv(outdir / f"norms_tau_{tau:g}.csv", rep)
    combined = {
        "status": "ok",
        "config_echo": cfg.raw,
        "tau_sweep": sweep.as_dict(),
        "limit_convergence": limit.as_dict(),
    }
    _write_json(outdir / "sweep_tau.json", combined)
    passed = sweep.passed and limit.passed
    _say(quiet, f"sweep-tau: {'pass' if passed else 'FAIL'}; "
                f"wrote {outdir / 'sweep_tau.json'}")
    return EXIT_OK if passed else EXIT_ASSERTION


def cmd_verify(cfg, outdir: Path, quiet: bool, jobs: int) -> int:
    grid = cfg.build_grid()
    p = cfg.build_params()
    tgrid = cfg.build_time_grid()
    opts = cfg.verify_options()

    def run_parabolic():
        return verify_parabolic_smoothing(grid, trials=opts["trials"],
                                          seed=cfg.seed)

    def run_multiplier():
        return verify_multiplier_decay(grid, mu=1.0, alpha=1.0, seed=cfg.seed)

    def run_damping():
        rng = np.random.default_rng(cfg.seed + 13)
        w0 = field_ops.single_mode_vector(grid, (1, 0, 0), (0.0, 0.5, 0.0))
        forcing_base = field_ops.random_band(grid, rng, components=3, kmax=3)
        nt = tgrid.n_steps + 1
        forcing = np.broadcast_to(forcing_base, (nt,) + forcing_base.shape)
        gammas = [10.0**j for j in range(9)]
        pure = verify_damping_estimate(
            grid, w0, None, None, 1e-3, gammas, tgrid,
            eps_fraction=cfg.eps_fraction)
        forced = verify_damping_estimate(
            grid, w0, forcing.copy(), None, 1e-3, gammas, tgrid,
            eps_fraction=cfg.eps_fraction)
        return ExperimentResult(
            name="damping_estimate",
            inputs_digest=pure.inputs_digest,
            measured={"pure_data": pure.measured, "forced": forced.measured},
            passed=pure.passed and forced.passed,
            tolerance=pure.tolerance,
        )

    runners = {"parabolic": run_parabolic,
               "multiplier": run_multiplier,
               "damping": run_damping}
    chosen = opts["experiments"]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = {name: pool.submit(runners[name]) for name in chosen}
        results = {name: fut.result() for name, fut in futures.items()}

    all_pass = True
    aggregate = {}
    for name in sorted(results):
        res = results[name]
        _write_json(outdir / f"verify_{name}.json", res.as_dict())
        aggregate[name] = {"passed": res.passed,
                           "inputs_digest": res.inputs_digest}
        all_pass = all_pass and res.passed
        _say(quiet, f"verify[{name}]: {'pass' if res.passed else 'FAIL'}")
    _write_json(outdir / "verify_summary.json",
                {"experiments": aggregate, "passed": all_pass,
                 "config_echo": cfg.raw})
    return EXIT_OK if all_pass else EXIT_ASSERTION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ferrospec",
        description="pseudo-spectral ferrofluid relaxation solver and verifier")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "run one simulation"),
                        ("sweep-tau", "run the relaxation-time sweep"),
                        ("verify", "run the estimate verification suite")):
        cmd = sub.add_parser(name, help=help_)
        cmd.add_argument("--config", required=True, help="YAML config path")
        cmd.add_argument("--output", default=None, help="output directory")
        cmd.add_argument("--jobs", type=int, default=None,
                         help="max concurrent experiments")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--quiet", action="store_true", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    output = args.output or os.environ.get("FERROSPEC_OUTPUT")
    jobs = args.jobs if args.jobs is not None else \
        int(os.environ.get("FERROSPEC_JOBS", "1"))
    quiet = args.quiet if args.quiet is not None else \
        bool(os.environ.get("FERROSPEC_QUIET"))
    env_seed = os.environ.get("FERROSPEC_SEED")

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        elif env_seed is not None:
            cfg.seed = int(env_seed)
        if output:
            cfg.output_dir = output
        if jobs < 1:
            raise ConfigError("jobs: must be >= 1")
        outdir = Path(cfg.output_dir)
        if args.command == "simulate":
            return cmd_simulate(cfg, outdir, quiet)
        if args.command == "sweep-tau":
            return cmd_sweep_tau(cfg, outdir, quiet)
        if args.command == "verify":
            return cmd_verify(cfg, outdir, quiet, jobs)
        raise ConfigError(f"command: unknown {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
