"""Command-line front end.

Every subcommand writes plain CSV/JSON with fixed formatting so that two
identical invocations produce byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import analysis
from ._version import __version__
from .core import (IntegrationError, IntegratorConfig, integrate,
                   read_trajectory, sample_grid, write_trajectory)
from .oracle import cross_check, integrate_direct, matched_initial_data
from .potential import (PotentialError, PotentialSpec, estimate_envelope,
                        export_table, import_table)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

CONFIG_HELP = """\
configuration file:
  --config FILE reads flat "key = value" lines; '#' starts a comment.  Keys
  are long option names with or without the leading dashes ("x-end" and
  "x_end" are equivalent).  Precedence: command-line flags > config file >
  built-in defaults.
"""


class UsageError(Exception):
    pass


# -- parsing helpers ---------------------------------------------------------

def parse_values(text: str) -> list[float]:
    """'0.5,0.6' or 'start:stop:step' (stop inclusive) or a mix of both."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise UsageError(f"bad range {part!r}; use start:stop:step")
            start, stop, step = (float(b) for b in bits)
            if step <= 0 or stop < start:
                raise UsageError(f"empty range {part!r}")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            out.extend(round(start + i * step, 12) for i in range(n))
        else:
            out.append(float(part))
    if not out:
        raise UsageError(f"no values in {text!r}")
    return out


def read_config(path: str) -> dict[str, str]:
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{n}: expected key=value")
                key, _, val = line.partition("=")
                cfg[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    return cfg


def resolve_k(args) -> float:
    if args.k is not None and args.lam is not None:
        raise UsageError("give either --k or --lambda, not both")
    if args.k is not None:
        k = float(args.k)
    elif args.lam is not None:
        if float(args.lam) <= 0:
            raise UsageError("--lambda must be positive")
        k = math.sqrt(float(args.lam))
    else:
        raise UsageError("one of --k or --lambda is required")
    if not k > 0:
        raise UsageError("--k must be positive")
    return k


def build_spec(args) -> PotentialSpec:
    kind = args.potential
    if kind == "zero":
        return PotentialSpec.zero()
    if kind == "coulomb-sign":
        return PotentialSpec.coulomb_sign(args.a, int(args.sign))
    if kind == "wvn":
        return PotentialSpec.wigner_von_neumann(args.c, args.kappa,
                                                args.phase)
    if kind == "feedback":
        return PotentialSpec.feedback_sign(args.a)
    if kind == "table":
        if not args.file:
            raise UsageError("--potential table needs --file")
        return import_table(args.file)
    raise UsageError(f"unknown potential {kind!r}")


def build_config(args, k: float, x_end: float) -> IntegratorConfig:
    try:
        return IntegratorConfig(k=k, x_end=x_end, theta0=args.theta0,
                                rtol=args.rel_tol, atol=args.abs_tol,
                                n_samples=args.samples)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def out_path(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def dump(obj) -> str:
    return json.dumps(obj, sort_keys=False, allow_nan=True)


def emit(text: str, fh=None):
    sys.stdout.write(text + "\n")
    if fh is not None:
        fh.write(text + "\n")


# -- subcommands -------------------------------------------------------------

def cmd_integrate(args) -> int:
    spec = build_spec(args)
    k = resolve_k(args)
    x_end = args.x_end
    if x_end is None:
        if spec.variant != "tabulated":
            raise UsageError("--x-end is required unless --potential table")
        x_end = float(spec.grid[-1])
    traj = integrate(spec, build_config(args, k, x_end))
    path = out_path(args, args.name + ".csv")
    write_trajectory(traj, path)
    print(dump({"trajectory": path, "status": traj.status,
                "x_stop": float(traj.x[-1]), "n_rows": int(traj.x.size)}))
    if traj.truncated:
        print(f"error: integration stopped: {traj.status}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_synthesize(args) -> int:
    if not args.a > 0:
        raise UsageError("--a must be positive")
    k = resolve_k(args)
    thr = analysis.max_eigenvalue_bound(args.a)
    if k * k >= thr:
        raise UsageError(
            f"lambda={k * k:.6g} >= 4a^2/pi^2 = {thr:.6f}: no potential with "
            f"envelope a={args.a:g} has an eigenvalue there; refusing")
    spec = PotentialSpec.feedback_sign(args.a)
    traj = integrate(spec, build_config(args, k, args.x_end))
    traj.require_complete()
    path = out_path(args, args.name + ".csv")
    table = export_table(spec, traj, path)
    env = estimate_envelope(table, args.x_end / 100.0)
    print(dump({"table": path, "rows": int(table.grid.size),
                "envelope_estimate": env.estimate,
                "predicted_exponent": args.a / (k * math.pi),
                "threshold": thr, "lambda": k * k}))
    return EXIT_OK


def cmd_fit_decay(args) -> int:
    traj = read_trajectory(args.trajectory)
    window = tuple(args.window) if args.window else None
    fit = analysis.fit_decay(traj, window)
    print(dump(fit.to_json()))
    return EXIT_OK


@dataclass(frozen=True)
class SweepPoint:
    potential: str
    a: float
    k: float
    theta0: float
    x_end: float
    rtol: float
    atol: float
    n_samples: int
    window: tuple | None
    trajectory_path: str | None = None


def _point_spec(pt: SweepPoint) -> PotentialSpec:
    if pt.potential == "zero" or pt.a == 0.0:
        return PotentialSpec.zero()
    if pt.potential == "coulomb-sign":
        return PotentialSpec.coulomb_sign(pt.a, -1)
    return PotentialSpec.feedback_sign(pt.a)


def run_point(pt: SweepPoint) -> dict:
    """One sweep point; failures become a record instead of an exception."""
    head = {"a": pt.a, "k": pt.k, "theta0": pt.theta0}
    try:
        cfg = IntegratorConfig(k=pt.k, x_end=pt.x_end, theta0=pt.theta0,
                               rtol=pt.rtol, atol=pt.atol,
                               n_samples=pt.n_samples)
        traj = integrate(_point_spec(pt), cfg)
        if pt.trajectory_path:
            write_trajectory(traj, pt.trajectory_path)
        traj.require_complete()
        rec = analysis.verdict(traj, pt.a, pt.k, pt.window).to_json()
        rec["theta0"] = pt.theta0
        return rec
    except (IntegrationError, ValueError, ArithmeticError) as exc:
        return {**head, "verdict": "error", "error": str(exc)}


def run_points(points, workers: int) -> list[dict]:
    if workers <= 1 or len(points) <= 1:
        return [run_point(p) for p in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order whatever the completion order.
        return list(pool.map(run_point, points))


def flip_summary(a: float, theta0: float, recs: list[dict]) -> dict:
    """k where the fitted exponent crosses 1/2, by linear interpolation."""
    pts = sorted((r["k"], r["fitted_exponent"]) for r in recs
                 if r.get("verdict") != "error")
    flip = None
    for (k0, p0), (k1, p1) in zip(pts, pts[1:]):
        if (p0 - 0.5) * (p1 - 0.5) <= 0 and p0 != p1:
            flip = k0 + (k1 - k0) * (p0 - 0.5) / (p0 - p1)
            break
    pred = analysis.critical_wavenumber(a)
    out = {"summary": "threshold_flip", "a": a, "theta0": theta0,
           "flip_k": flip, "predicted_flip_k": pred,
           "relative_deviation": None if flip is None or pred == 0
           else (flip - pred) / pred}
    return out


def _sweep_points(args, potential: str, ks_relative: bool, traj_dir=None):
    a_vals = parse_values(args.a)
    if args.k is not None and args.lam is not None:
        raise UsageError("give either --k or --lambda, not both")
    if args.k is not None:
        k_vals = parse_values(args.k)
    elif args.lam is not None:
        k_vals = [math.sqrt(v) if v > 0 else -1.0
                  for v in parse_values(args.lam)]
    else:
        raise UsageError("one of --k or --lambda is required")
    th_vals = parse_values(args.theta0)
    if any(a < 0 for a in a_vals):
        raise UsageError("all a must be >= 0")
    if any(k <= 0 for k in k_vals):
        raise UsageError("all k (and lambda) must be positive")
    window = tuple(args.window) if args.window else None
    points = []
    for a in a_vals:
        for th in th_vals:
            for kv in k_vals:
                k = kv * a if ks_relative and a > 0 else kv
                tp = None
                if traj_dir is not None:
                    tp = os.path.join(
                        traj_dir, f"traj_a{a:.17g}_k{k:.17g}_t{th:.17g}.csv")
                points.append(SweepPoint(
                    potential, a, k, th, args.x_end, args.rel_tol,
                    args.abs_tol, args.samples, window, tp))
    return points


def cmd_threshold_scan(args) -> int:
    points = _sweep_points(args, "feedback", args.k_relative)
    recs = run_points(points, args.workers)
    fh = open(out_path(args, "threshold_scan.jsonl"), "w", encoding="utf-8",
              newline="\n") if args.out_dir else None
    try:
        for rec in recs:
            emit(dump(rec), fh)
        seen = []
        for pt in points:
            if (pt.a, pt.theta0) not in seen:
                seen.append((pt.a, pt.theta0))
        for a, th in seen:
            group = [r for r, p in zip(recs, points)
                     if p.a == a and p.theta0 == th]
            emit(dump(flip_summary(a, th, group)), fh)
    finally:
        if fh:
            fh.close()
    return EXIT_NUMERIC if any(r["verdict"] == "error" for r in recs) \
        else EXIT_OK


def cmd_sweep(args) -> int:
    traj_dir = None
    if args.write_trajectories:
        traj_dir = os.path.join(args.out_dir, "trajectories")
        os.makedirs(traj_dir, exist_ok=True)
    points = _sweep_points(args, args.potential, False, traj_dir)
    recs = run_points(points, args.workers)
    fh = open(out_path(args, "sweep.jsonl"), "w", encoding="utf-8",
              newline="\n")
    with fh:
        for rec in recs:
            emit(dump(rec), fh)
    return EXIT_NUMERIC if any(r["verdict"] == "error" for r in recs) \
        else EXIT_OK


def cmd_verify(args) -> int:
    k = resolve_k(args)
    spec = build_spec(args)
    x_end = args.x_end
    if spec.is_feedback:
        if not args.via_table:
            raise UsageError("feedback potentials are checked through an "
                             "exported table; add --via-table")
        x_end = 1e4 if x_end is None else x_end
        ftraj = integrate(spec, build_config(args, k, x_end), strict=True)
        spec = export_table(spec, ftraj, out_path(args, "verify_table.csv"))
        profile = "table"
    else:
        x_end = 1e3 if x_end is None else x_end
        profile = "exact" if spec.variant == "zero" else (
            "table" if spec.variant == "tabulated" else "smooth")
    if args.profile:
        profile = args.profile
    cfg = build_config(args, k, x_end)
    grid = sample_grid(x_end, cfg.n_samples, cfg.n_prefix)
    ptraj = integrate(spec, cfg, out_x=grid, strict=True)
    if args.step:
        step = args.step
    else:
        # RK4 global error ~ x_end h^4; the exact profile needs a finer step.
        step = min(0.0025 if profile == "exact" else 0.01,
                   math.pi / (20 * k))
    u0, up0 = matched_initial_data(cfg.theta0, k)
    wtraj = integrate_direct(spec, k, u0, up0, x_end, step, sample_x=grid)
    rep = cross_check(ptraj, wtraj, k, profile)
    text = json.dumps(rep.to_json(), indent=2) + "\n"
    with open(out_path(args, "verify.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_NUMERIC


# -- parser ------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="flat key=value defaults file")
    g.add_argument("--out-dir", default=".", help="output directory")
    g.add_argument("--workers", type=int, default=1,
                   help="worker processes for sweeps")
    g.add_argument("--rel-tol", type=float, default=1e-10)
    g.add_argument("--abs-tol", type=float, default=1e-12)
    g.add_argument("--samples", type=int, default=1000,
                   help="log-spaced output samples")
    g.add_argument("--seed", type=int, default=0,
                   help="reserved; every algorithm here is deterministic")
    return p


def _potential_args(p, required=True):
    p.add_argument("--potential", required=required,
                   choices=["zero", "coulomb-sign", "wvn", "feedback",
                            "table"])
    p.add_argument("--a", type=float, default=1.0, help="envelope a")
    p.add_argument("--sign", type=int, default=-1, choices=[-1, 1])
    p.add_argument("--c", type=float, default=1.0, help="WvN amplitude")
    p.add_argument("--kappa", type=float, default=1.0, help="WvN frequency")
    p.add_argument("--phase", type=float, default=0.0, help="WvN phase")
    p.add_argument("--file", help="tabulated potential CSV")


def _energy_args(p):
    p.add_argument("--k", type=float, help="wavenumber, lambda = k^2")
    p.add_argument("--lambda", dest="lam", type=float, help="energy")
    p.add_argument("--theta0", type=float, default=math.pi / 4)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="pruefer",
        description="Pruefer-angle integration, feedback potentials and "
                    "embedded-eigenvalue threshold checks.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    subs = {}

    def add(name, helptext):
        p = sub.add_parser(name, parents=[common], help=helptext,
                           description=helptext, epilog=CONFIG_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        subs[name] = p
        return p

    p = add("integrate", "integrate one trajectory and write CSV + events")
    _potential_args(p)
    _energy_args(p)
    p.add_argument("--x-end", type=float,
                   help="right end (default for tables: last node)")
    p.add_argument("--name", default="trajectory", help="output file stem")
    p.set_defaults(func=cmd_integrate)

    p = add("synthesize", "build and export a feedback potential table")
    p.add_argument("--a", type=float, required=True)
    _energy_args(p)
    p.add_argument("--x-end", type=float, default=1e4)
    p.add_argument("--name", default="potential", help="output file stem")
    p.set_defaults(func=cmd_synthesize)

    p = add("fit-decay", "fit the decay exponent of a trajectory file")
    p.add_argument("trajectory", help="trajectory CSV")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.set_defaults(func=cmd_fit_decay)

    for name, helptext in (
            ("threshold-scan", "feedback verdicts over (a, k, theta0) with "
                               "the empirical flip k per a"),
            ("sweep", "verdict records over a parameter grid")):
        p = add(name, helptext)
        p.add_argument("--a", default="1", help="list or start:stop:step")
        p.add_argument("--k", help="list or start:stop:step")
        p.add_argument("--lambda", dest="lam",
                       help="energies, converted with k = sqrt(lambda)")
        p.add_argument("--theta0", default=repr(math.pi / 4))
        p.add_argument("--x-end", type=float, default=1e6)
        p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
        if name == "threshold-scan":
            p.add_argument("--k-relative", action="store_true",
                           help="read k values as multiples of a")
            p.set_defaults(func=cmd_threshold_scan, out_dir=None)
        else:
            p.add_argument("--potential", default="feedback",
                           choices=["feedback", "coulomb-sign", "zero"])
            p.add_argument("--write-trajectories", action="store_true")
            p.set_defaults(func=cmd_sweep)

    p = add("verify", "run both pipelines and compare")
    _potential_args(p)
    _energy_args(p)
    p.add_argument("--x-end", type=float)
    p.add_argument("--step", type=float, help="oracle RK4 step")
    p.add_argument("--via-table", action="store_true",
                   help="check feedback through its exported table")
    p.add_argument("--profile", choices=["exact", "smooth", "table"])
    p.set_defaults(func=cmd_verify)
    return parser, subs


def _apply_config(parser, subs, argv):
    """Parse ``argv`` with config-file values installed as the subcommand's
    defaults, so explicit flags still win."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((t for t in argv if t in subs), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    cfg = read_config(known.config)
    sp = subs[command]
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, val in cfg.items():
        if key == "lambda":
            key = "lam"
        if key not in actions or key in ("config", "help"):
            raise UsageError(f"config key {key!r} is not an option of "
                             f"{command}")
        act = actions[key]
        if not act.option_strings:
            raise UsageError(f"config key {key!r} is positional")
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = val.lower() in ("1", "true", "yes", "on")
        elif act.nargs not in (None, "?"):
            defaults[key] = [act.type(v) if act.type else v
                             for v in val.split()]
        else:
            try:
                defaults[key] = act.type(val) if act.type else val
            except ValueError as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
        if act.choices is not None and defaults[key] not in act.choices:
            raise UsageError(f"config key {key!r}: {val!r} not in "
                             f"{list(act.choices)}")
        act.required = False
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = _apply_config(parser, subs, argv)
        if args.workers < 1 or args.samples < 2:
            raise UsageError("--workers >= 1 and --samples >= 2 required")
        return args.func(args)
    except UsageError as exc:
        print(f"pruefer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PotentialError as exc:
        print(f"pruefer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, ArithmeticError) as exc:
        print(f"pruefer: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"pruefer: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
