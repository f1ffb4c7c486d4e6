"""Command-line front end.

Exit codes: 0 on success, 1 for configuration errors, 2 for runtime or
numerical errors.
"""

import argparse
import os
import sys
import warnings

import numpy as np

from . import analysis, dynamics, protocol, scenarios
from .config import SCENARIOS, ScenarioConfig, parse_config, parse_freq
from .curves import read_curve_csv
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _build_parser():
    p = argparse.ArgumentParser(prog="corrdd", description="Correlated double-drive qubit simulator")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a named scenario")
    sim.add_argument("scenario", help=", ".join(SCENARIOS))
    sim.add_argument("--config", help="INI-style configuration file")
    sim.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                     help="set a config key (section.key=value or key=value); repeatable")
    sim.add_argument("--seed", type=int, help="noise seed, overrides [noise] seed")
    sim.add_argument("--workers", type=int, help="compiled-loop threads (default: $DD_WORKERS or 1)")
    sim.add_argument("--output", help="output directory, overrides [run] output_dir")
    sim.add_argument("--full", action="store_true", help="use 2500 realizations unless the config sets a count")

    fit = sub.add_parser("fit", help="coherence time of a curve CSV (t_s,value,stderr)")
    fit.add_argument("csv")
    fit.add_argument("--floor", default="axis",
                     help="long-time fidelity floor: 'avg' (2/3), 'axis' (1/2) or a number")
    fit.add_argument("--period", type=float, help="oscillation period in seconds")
    fit.add_argument("--scenario", default="external")
    fit.add_argument("--protocol", default="curve")

    sens = sub.add_parser("sensitivity", help="shot-noise sensitivity from [run] keys of a config")
    sens.add_argument("config")
    sens.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")

    sh = sub.add_parser("shift", help="optimal modulation frequency")
    sh.add_argument("omega1", help="first-drive Rabi frequency, e.g. 4.47MHz (bare numbers are MHz)")
    sh.add_argument("omega2", help="second-drive Rabi frequency")
    sh.add_argument("c", type=float, help="cross-correlation")
    sh.add_argument("--bs", action="store_true", help="include the counter-rotating c -> c+1/4 correction")
    return p


def _mhz_arg(text):
    try:
        return 2 * np.pi * 1e6 * float(text)
    except ValueError:
        return parse_freq(text)


def _load(args):
    cfg = parse_config(args.config) if getattr(args, "config", None) else ScenarioConfig()
    for o in args.override:
        cfg.override(o)
    return cfg


def _print_rows(rows):
    print(f"{'scenario':<20} {'protocol':<26} {'quantity':<26} {'value':>16}  {'unit':<12} method")
    for r in rows:
        print(f"{r['scenario']:<20} {r['protocol']:<26} {r['quantity']:<26} {r['value']:>16.6g}  "
              f"{r['unit']:<12} {r['method']}")


def _simulate(args):
    if args.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}")
    cfg = _load(args)
    if args.seed is not None:
        cfg.set("noise", "seed", str(args.seed))
    workers = args.workers if args.workers is not None else int(os.environ.get("DD_WORKERS", "1"))
    if workers < 1:
        raise ConfigError("worker count must be at least 1")
    dynamics.set_workers(workers)
    res = scenarios.run_scenario(args.scenario, cfg, args.output, args.full)
    _print_rows(res.summary)


def _fit(args):
    floor = {"avg": analysis.AVG_FLOOR, "axis": analysis.AXIS_FLOOR}.get(args.floor)
    if floor is None:
        try:
            floor = float(args.floor)
        except ValueError:
            raise ConfigError(f"--floor must be avg, axis or a number, got {args.floor!r}") from None
    try:
        curve = read_curve_csv(args.csv)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc.strerror}") from None
    res = analysis.coherence_time(curve, floor, args.period)
    print(",".join(analysis.FIT_HEADER))
    print(f"{args.scenario},{args.protocol},{res.threshold.time!r},{res.fit.beta!r},"
          f"{'threshold' if res.threshold.reached else 'threshold_not_reached'},0.0")
    print(f"{args.scenario},{args.protocol},{res.fit.t2!r},{res.fit.beta!r},{res.fit.method},"
          f"{res.fit.rms_residual!r}")


def _sensitivity(args):
    cfg = _load(args)
    inp = scenarios.sensitivity_inputs_from(scenarios.Settings(cfg))
    out = analysis.sensitivity(inp)
    print(f"eta = {out.eta * 1e9:.4g} nT/sqrt(Hz)  (contrast {out.contrast:.4g}, tau {inp.tau:.4g} s)")
    print(f"with dead time = {out.delta_b_min_sqrt_t * 1e9:.4g} nT/sqrt(Hz)")
    if out.eta_opt is not None:
        print(f"at tau = T2/2 ({out.tau_opt:.4g} s): eta = {out.eta_opt * 1e9:.4g} nT/sqrt(Hz)")


def _shift(args):
    try:
        o1, o2 = _mhz_arg(args.omega1), _mhz_arg(args.omega2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not (0 < o2 < o1):
        raise ConfigError("need 0 < omega2 < omega1")
    if not -1 <= args.c <= 1:
        raise ConfigError("cross-correlation must satisfy |c| <= 1")
    exact = protocol.optimal_shift_exact(o1, o2, args.c)
    approx = protocol.optimal_shift_approx(o1, o2, args.c, args.bs)
    mhz = 2 * np.pi * 1e6
    print(f"{'quantity':<22} {'rad/s':>18} {'MHz':>12}")
    for name, v in (("omega1_tilde_exact", exact), ("omega1_tilde_approx", approx)):
        print(f"{name:<22} {v:>18.10g} {v / mhz:>12.6f}")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "simulate":
                _simulate(args)
            elif args.command == "fit":
                _fit(args)
            elif args.command == "sensitivity":
                _sensitivity(args)
            else:
                _shift(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
