"""Command-line front end.

    smib-pss analyze  [--config PATH] [--out DIR] [--format csv|txt]
    smib-pss tune     [--config PATH] [--method ga|pso|both] [--seed N]
    smib-pss simulate --ks K --t1 T1 --t2 T2 [--scenario ID] [--out DIR]
    smib-pss study    [--config PATH] --out DIR [--method ...] [--seed N] [--format ...]

Exit status: 0 success, 1 invalid configuration, 2 a tuned stabilizer
misses the damping threshold.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import ConfigError, ScenarioFile, default_config, load_config
from .modal import analyze
from .model import PssParams, build_closed_loop_for, build_open_loop_for
from .study import (
    eigen_pairs,
    format_eigenvalue,
    run_study,
    sorted_eigenvalues,
    tune as tune_scenario,
)
from .timesim import response_metrics, simulate, write_trajectory_csv

EXIT_OK, EXIT_CONFIG, EXIT_THRESHOLD = 0, 1, 2


def _methods(arg: str) -> tuple[str, ...]:
    return ("ga", "pso") if arg == "both" else (arg,)


def _load(args) -> ScenarioFile:
    sf = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        sf = sf.with_seeds([args.seed])
    return sf


def _select(sf: ScenarioFile, scenario_id: str | None):
    if scenario_id is None:
        return list(sf.scenarios)
    for sc in sf.scenarios:
        if sc.id == scenario_id:
            return [sc]
    raise ConfigError(f"no scenario with id {scenario_id!r}")


def cmd_analyze(args) -> int:
    sf = _load(args)
    for sc in _select(sf, args.scenario):
        model = build_open_loop_for(sf.system, sc.op)
        ms = analyze(model, sf.zeta_threshold)
        print(f"scenario {sc.id}: P={sc.op.P} Q={sc.op.Q}")
        for m in ms.modes:
            tag = "  EM" if m.is_em else ""
            z = complex(m.sigma, m.omega)
            print(f"  {format_eigenvalue(z):>22}  zeta={m.zeta:+.5f}  f={m.freq_hz:.4f} Hz{tag}")
        print(f"  min EM zeta = {ms.min_em_zeta:.5f}")
        if args.out:
            out = Path(args.out) / sc.id
            out.mkdir(parents=True, exist_ok=True)
            with (out / f"eigen-open.{args.format}").open("w") as fh:
                sep = "," if args.format == "csv" else "  "
                fh.write(sep.join(("real", "imag", "zeta", "is_em")) + "\n")
                for m in ms.modes:
                    fh.write(sep.join((repr(m.sigma), repr(m.omega), repr(m.zeta), str(m.is_em))) + "\n")
    return EXIT_OK


def cmd_tune(args) -> int:
    sf = _load(args)
    status = EXIT_OK
    for sc in _select(sf, args.scenario):
        for method in _methods(args.method):
            pss, per_seed = tune_scenario(sf.system, sc.op, method, sf)
            best = max(per_seed.values())
            ok = best >= sf.zeta_threshold
            status = status if ok else EXIT_THRESHOLD
            print(
                f"scenario {sc.id} {method}: K_s={pss.K_s:.4f} T1={pss.T1:.4f} T2={pss.T2:.4f} "
                f"zeta={best:.5f} {'pass' if ok else 'FAIL'}"
            )
    return status


def cmd_simulate(args) -> int:
    sf = _load(args)
    pss = None
    if args.ks is not None:
        if args.t1 is None or args.t2 is None:
            raise ConfigError("--ks requires --t1 and --t2")
        pss = PssParams(args.ks, args.t1, args.t2, sf.T_w)
    for sc in _select(sf, args.scenario):
        model = build_open_loop_for(sf.system, sc.op) if pss is None else build_closed_loop_for(sf.system, pss, sc.op)
        sim = dataclasses.replace(sf.sim, disturbance=sc.op.delta_P_L)
        traj = simulate(model, sim)
        speed = response_metrics(traj, "domega")
        angle = response_metrics(traj, "ddelta")
        print(
            f"scenario {sc.id}: ISE(domega)={speed.ise_speed:.6e} ISE(ddelta)={speed.ise_angle:.6e} "
            f"peak(domega)={speed.peak_overshoot:.6f} peak(ddelta)={angle.peak_overshoot:.6f}"
            + (" overflow" if traj.overflow else "")
        )
        if args.out:
            out = Path(args.out) / sc.id
            out.mkdir(parents=True, exist_ok=True)
            name = "traj-open.csv" if pss is None else "traj-pss.csv"
            write_trajectory_csv(traj, out / name)
    return EXIT_OK


def cmd_study(args) -> int:
    sf = _load(args)
    report = run_study(sf, args.out, args.format, _methods(args.method))
    sys.stdout.write((Path(args.out) / "report.txt").read_text())
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smib-pss", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--config", metavar="PATH", help="scenario file (default: built-in study)")
        sp.add_argument("--scenario", metavar="ID", help="restrict to one scenario")
        sp.add_argument("--out", metavar="DIR", required=out_required)
        sp.add_argument("--format", choices=("csv", "txt"), default="csv")

    sp = sub.add_parser("analyze", help="open-loop modes")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("tune", help="GA/PSO stabilizer tuning")
    common(sp)
    sp.add_argument("--method", choices=("ga", "pso", "both"), default="both")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("simulate", help="time response for given stabilizer settings")
    common(sp)
    sp.add_argument("--ks", type=float)
    sp.add_argument("--t1", type=float)
    sp.add_argument("--t2", type=float)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("study", help="full comparison pipeline")
    common(sp, out_required=True)
    sp.add_argument("--method", choices=("ga", "pso", "both"), default="both")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_study)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
