"""Command-line front end.

Subcommands: tabulate, construct, simulate, sweep, verify, replay.
Every file written with ``--out`` is paired with ``<out>.manifest.json``
recording the resolved parameters; ``replay`` re-runs a manifest.

Exit codes: 0 success, 1 verification failure, 2 usage or parameter
error, 3 simulation divergence.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .activation import (
    ActivationError,
    ControlParams,
    PowerLawParams,
    Scheduled,
    SingularityError,
    conjugate_g,
    control_u,
    make_spec,
)
from .functional import (
    accumulate,
    build_form,
    describe_form,
    equilibrium_baseline,
    f_state,
    g_cost,
)
from .simulate import (
    DoubleIntegrator,
    ScalarIntegrator,
    SimConfig,
    SimulationDivergence,
    alpha_sweep,
    c_sweep,
    exponential_law,
    power_law,
    simulate_closed_loop,
)
from .specfun import DivergenceError, DomainError
from . import verification

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

_UNDEFINED = (SingularityError, DomainError, DivergenceError, OverflowError)


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Fixed CSV number format: 17 significant digits, empty for missing values."""
    if x is None:
        return ""
    x = float(x)
    if not math.isfinite(x):
        return ""
    return format(x, ".17g")


def write_csv(path: Optional[str], header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    _emit(path, text)
    return text


def _emit(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def write_manifest(args: argparse.Namespace, extra: Optional[dict] = None) -> None:
    if args.out is None:
        return
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "command")}
    manifest = {
        "command": args.command,
        "parameters": params,
        "tool_version": __version__,
        "outputs": [args.out],
    }
    manifest.update(extra or {"status": "ok"})
    _emit(args.out + ".manifest.json", dump_json(manifest))


def _params_and_spec(args):
    params = ControlParams(args.c)
    spec = make_spec(args.case, alpha=args.alpha, weights=args.weights)
    return params, spec


def _parse_weights(text: str) -> list:
    try:
        return [float(w) for w in text.split(",") if w.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad weight list {text!r}") from exc


def _parse_values(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from exc


# --- tabulate ---------------------------------------------------------------

PLOT_TEMPLATE = '''"""Plot {csv} (generated by expfunctional tabulate)."""
import csv

import matplotlib.pyplot as plt

xs, ys = [], []
with open({csv!r}) as fh:
    for row in csv.DictReader(fh):
        if row["value"]:
            xs.append(float(row["x"]))
            ys.append(float(row["value"]))

plt.plot(xs, ys)
plt.xlabel("x")
plt.ylabel({label!r})
plt.grid(True)
plt.show()
'''


def tabulate_rows(args) -> list:
    if not args.step > 0:
        raise UsageError("--step must be positive")
    if not (math.isfinite(args.from_) and math.isfinite(args.to)) or args.to < args.from_:
        raise UsageError("need finite --from <= --to")
    params, spec = _params_and_spec(args)
    form = build_form(params, spec)
    curve = {
        "g": lambda x: conjugate_g(params, x),
        "G": lambda x: g_cost(params, x),
        "F": lambda x: f_state(form, x),
        "U": lambda x: control_u(params, spec, x, args.u_max),
    }[args.curve]
    n = int(math.floor((args.to - args.from_) / args.step + 1e-9))
    rows = []
    for k in range(n + 1):
        x = round(args.from_ + k * args.step, 12)
        try:
            value = curve(x)
        except _UNDEFINED:
            value = None
        rows.append((x, value))
    return rows


def cmd_tabulate(args) -> int:
    write_csv(args.out, ("x", "value"), tabulate_rows(args))
    if args.plot_script:
        csv_name = args.out or "table.csv"
        _emit(args.plot_script, PLOT_TEMPLATE.format(csv=csv_name, label=args.curve))
    write_manifest(args)
    return EXIT_OK


# --- construct --------------------------------------------------------------


def cmd_construct(args) -> int:
    params, spec = _params_and_spec(args)
    report = describe_form(build_form(params, spec))
    _emit(args.out, dump_json(report))
    write_manifest(args)
    return EXIT_OK


# --- simulate ---------------------------------------------------------------


def _law(args, params, spec):
    if args.law == "power":
        if isinstance(spec, Scheduled):
            return spec.power_law
        if args.alpha is None:
            raise UsageError("--law power requires --alpha")
        PowerLawParams(args.alpha)
        return power_law(args.alpha)
    return exponential_law(params, spec, args.u_max)


def _plant(args):
    if args.plant == "double":
        return DoubleIntegrator(args.surface_c)
    return ScalarIntegrator()


def _f_column(form, s_values) -> np.ndarray:
    out = np.empty(len(s_values))
    for i, s in enumerate(s_values):
        try:
            out[i] = f_state(form, float(s))
        except _UNDEFINED:
            out[i] = math.nan
    return out


def simulation_table(form, traj, baseline) -> tuple[list, Optional[dict]]:
    """CSV rows t,S,U,F,G,Jcum and the final JBreakdown (None if F is undefined somewhere)."""
    try:
        cum = accumulate(form, traj, baseline)
    except _UNDEFINED:
        F = _f_column(form, traj.s_values)
        if baseline is not None:
            F = F - baseline
        G = np.array([g_cost(form.params, float(u)) for u in traj.u_values])
        J = np.full(len(F), math.nan)
        return list(zip(traj.times, traj.s_values, traj.u_values, F, G, J)), None
    rows = list(zip(traj.times, traj.s_values, traj.u_values, cum.F, cum.G, cum.j_total))
    breakdown = None
    if len(traj.times):
        j_state, j_energy = float(cum.j_state[-1]), float(cum.j_energy[-1])
        breakdown = {
            "j_total": j_state + j_energy,
            "j_state": j_state,
            "j_energy": j_energy,
            "horizon": float(traj.times[-1] - traj.times[0]),
        }
    return rows, breakdown


SIM_HEADER = ("t", "S", "U", "F", "G", "Jcum")


def cmd_simulate(args) -> int:
    params, spec = _params_and_spec(args)
    form = build_form(params, spec)
    law = _law(args, params, spec)
    cfg = SimConfig(
        horizon=args.t, initial_state=args.s0, dt=args.dt, dead_zone=args.dead_zone, seed=args.seed
    )
    baseline = equilibrium_baseline(form) if args.baseline == "equilibrium" else None
    try:
        traj = simulate_closed_loop(_plant(args), law, cfg)
    except SimulationDivergence as exc:
        rows = simulation_table(form, exc.partial, baseline)[0] if exc.partial is not None else []
        write_csv(args.out, SIM_HEADER, rows)
        write_manifest(args, {"status": "diverged", "failure_time": exc.time})
        print(f"error: simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    rows, breakdown = simulation_table(form, traj, baseline)
    write_csv(args.out, SIM_HEADER, rows)
    extra = {
        "status": "ok",
        "reached_origin_at": traj.reached_origin_at,
        "j_breakdown": breakdown,
    }
    write_manifest(args, extra)
    return EXIT_OK


# --- sweep ------------------------------------------------------------------


def cmd_sweep(args) -> int:
    if not args.values:
        raise UsageError("--values must list at least one value")
    cfg = SimConfig(horizon=args.t, initial_state=args.s0, dt=args.dt, dead_zone=args.dead_zone, seed=args.seed)
    params, spec = _params_and_spec(args)
    if args.kind == "alpha":
        schedule = Scheduled() if args.adaptive_demo else None
        rows = alpha_sweep(args.values, args.s0, cfg, form=build_form(params, spec), schedule=schedule, sort=False)
    else:
        rows = c_sweep(args.values, spec, args.s0, cfg)
        if args.adaptive_demo:
            rows += alpha_sweep([], args.s0, cfg, form=build_form(params, spec), schedule=Scheduled())
    write_csv(
        args.out,
        ("param", "reach_time", "j_total", "j_energy"),
        [(r.param, r.reach_time, r.j_total, r.j_energy) for r in rows],
    )
    write_manifest(args)
    return EXIT_OK


# --- verify -----------------------------------------------------------------


def _parse_tolerances(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set-tol expects NAME=VALUE, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError as exc:
            raise UsageError(f"bad tolerance in {item!r}") from exc
    return out


def cmd_verify(args) -> int:
    try:
        results = verification.run_all(_parse_tolerances(args.set_tol))
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from exc
    passed = all(r.passed for r in results)
    if args.json:
        text = dump_json(
            {"tool_version": __version__, "passed": passed, "checks": [r.as_dict() for r in results]}
        )
    else:
        text = "".join(
            f"{'PASS' if r.passed else 'FAIL'}  {r.name}  observed={r.observed:.3e}  tol={r.tolerance:.3e}\n"
            for r in results
        )
    _emit(args.out, text)
    write_manifest(args, {"status": "ok" if passed else "failed"})
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


# --- replay -----------------------------------------------------------------


def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from exc
    command = manifest["command"]
    params = dict(manifest["parameters"])
    if args.out is not None:
        params["out"] = args.out
    ns = argparse.Namespace(command=command, config=None, func=COMMANDS[command], **params)
    return ns.func(ns)


COMMANDS = {
    "tabulate": cmd_tabulate,
    "construct": cmd_construct,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


# --- parser -----------------------------------------------------------------


def _case_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--c", type=float, default=2.0, help="activation base C (C > 0, C != 1)")
    p.add_argument(
        "--case",
        choices=["identity", "sqrt", "reciprocal", "power", "additive", "scheduled"],
        default="identity",
    )
    p.add_argument("--alpha", type=float, default=None, help="exponent for the power case / power law")
    p.add_argument("--weights", type=_parse_weights, default=None, help="w1,w2 for the additive case")
    p.add_argument("--u-max", dest="u_max", type=float, default=1e6, help="control saturation")
    return p


def _sim_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--s0", type=float, default=1.0, help="initial surface value")
    p.add_argument("--t", type=float, default=1.0, help="horizon in seconds")
    p.add_argument("--dt", type=float, default=1e-4, help="RK4 step")
    p.add_argument("--dead-zone", dest="dead_zone", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    return p


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=None, help="JSON file with flag values; explicit flags win")
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    return p


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="expfunctional",
        description="Quality functionals for exponential-activation control laws.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    case, sim, common = _case_flags(), _sim_flags(), _common_flags()
    subs = {}

    p = sub.add_parser("tabulate", parents=[case, common], help="tabulate g, G, F or U on a grid")
    p.add_argument("--curve", choices=["g", "G", "F", "U"], required=True)
    p.add_argument("--from", dest="from_", type=float, default=-2.0)
    p.add_argument("--to", type=float, default=2.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--plot-script", dest="plot_script", default=None, help="also write a matplotlib script")
    p.set_defaults(func=cmd_tabulate)
    subs["tabulate"] = p

    p = sub.add_parser("construct", parents=[case, common], help="describe the functional for a case")
    p.set_defaults(func=cmd_construct)
    subs["construct"] = p

    p = sub.add_parser("simulate", parents=[case, sim, common], help="closed-loop run with functional accumulation")
    p.add_argument("--plant", choices=["integrator", "double"], default="integrator")
    p.add_argument("--surface-c", dest="surface_c", type=float, default=1.0, help="slope c of S = c x1 + x2")
    p.add_argument("--law", choices=["exp", "power"], default="exp", help="exponential activation or power law")
    p.add_argument("--baseline", choices=["none", "equilibrium"], default="none")
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("sweep", parents=[case, sim, common], help="alpha or C parameter sweep")
    p.add_argument("--kind", choices=["alpha", "C"], required=True)
    p.add_argument("--values", type=_parse_values, required=True, help="comma-separated list")
    p.add_argument("--adaptive-demo", dest="adaptive_demo", action="store_true",
                   help="append a row for the scheduled-exponent power law")
    p.set_defaults(func=cmd_sweep, t=12.0)
    subs["sweep"] = p

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.add_argument("--set-tol", dest="set_tol", action="append", metavar="NAME=VALUE",
                   help="override a check tolerance")
    p.set_defaults(func=cmd_verify)
    subs["verify"] = p

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write to this path instead of the recorded one")
    p.set_defaults(func=cmd_replay)
    subs["replay"] = p
    return parser, subs


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    # config must be applied before the real parse so it can satisfy required flags
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config and known.command in subs:
        try:
            config = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {known.config}: {exc}")
        if not isinstance(config, dict):
            parser.error(f"config {known.config} must hold a JSON object")
        sub = subs[known.command]
        unknown = set(config) - {a.dest for a in sub._actions}
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(sorted(unknown))}")
        # config supplies defaults, so explicit flags still win
        for action in sub._actions:
            if action.dest in config:
                action.required = False
        sub.set_defaults(**config)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ActivationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
