"""Command-line front end.

Every artifact starts with header lines holding the tool version, the fully
resolved parameters and the command that produced it, so re-running that
command regenerates the file.  Exit codes: 0 success, 1 usage error,
2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import shlex
import sys

import numpy as np

from . import __version__
from .integrate import IntegrationError, IntegratorConfig, Mode, integrate, perturb
from .model import ModelParams, SystemState
from .stationary import NewtonFailure
from .sweep import SpecMismatch

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

_ANGLE = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$")


class UsageError(Exception):
    pass


def parse_angle(text: str) -> float:
    """Float or pi-literal such as ``pi``, ``2pi/3``, ``-pi/2``, ``0.5*pi``."""
    text = str(text).strip().lower()
    m = _ANGLE.match(text)
    if m:
        coef, den = m.group(1), m.group(2)
        if coef in ("", "+"):
            c = 1.0
        elif coef == "-":
            c = -1.0
        else:
            c = float(coef)
        val = c * math.pi
        return val / float(den) if den else val
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as a number") from None


def parse_range(text: str) -> tuple[float, float, int]:
    """``lo:hi:n`` with pi-literals allowed in both ends."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"range {text!r} must look like lo:hi:n")
    try:
        n = int(parts[2])
    except ValueError:
        raise UsageError(f"range count {parts[2]!r} is not an integer") from None
    if n < 2:
        raise UsageError("a range needs at least 2 points")
    return parse_angle(parts[0]), parse_angle(parts[1]), n


def parse_values(text: str) -> np.ndarray:
    """A range ``lo:hi:n``, a comma list, or a single value."""
    text = str(text)
    if ":" in text:
        return np.linspace(*parse_range(text))
    return np.array([parse_angle(v) for v in text.split(",") if v.strip()])


def parse_scalar(text: str) -> float:
    vals = parse_values(text)
    if len(vals) != 1:
        raise UsageError(f"expected a single value, got {text!r}")
    return float(vals[0])


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _physics(ap: argparse.ArgumentParser, phi: str | None = "2pi/3", lam: str | None = None) -> None:
    ap.add_argument("--omega-c", type=float, default=500.0, help="cavity frequency")
    ap.add_argument("--kappa", type=float, default=150.0, help="cavity loss")
    ap.add_argument("--gamma", type=float, default=0.05, help="spin damping")
    ap.add_argument("--omega", type=float, default=1.0, help="bare spin frequency")
    ap.add_argument("--phi", default=phi, help="phase (pi-literals allowed; ranges lo:hi:n where supported)")
    ap.add_argument("--lambda", dest="lam", default=lam, help="coupling (ranges/lists where supported)")


def _io(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("-o", "--output", help="output file (default: stdout)")
    ap.add_argument("--seed", type=int, default=0, help="random seed")
    ap.add_argument("--config", help="JSON file whose keys mirror the flags")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nrdicke", description="Three-species nonreciprocal Dicke model toolkit")
    ap.add_argument("--version", action="version", version=f"nrdicke {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("trajectory", help="integrate and export a trajectory")
    _physics(s, lam="10.8")
    _io(s)
    s.add_argument("--t-end", type=float, default=2000.0)
    s.add_argument("--dt", type=float, default=0.5, help="sample spacing")
    s.add_argument("--mode", choices=["adiabatic", "full"], default="adiabatic")
    s.add_argument("--kick", type=float, default=1e-6, help="size of the kick away from the normal state")
    s.add_argument("--rtol", type=float, default=1e-9)
    s.add_argument("--atol", type=float, default=1e-12)

    s = sub.add_parser("stationary", help="stationary-root census and phase label")
    _physics(s, lam="54")
    _io(s)

    s = sub.add_parser("stability", help="spectrum flow along a path with exceptional points")
    _physics(s, phi="0:pi:2000", lam="12")
    _io(s)
    s.add_argument("--np", action="store_true", help="follow the normal state (default: a stable branch)")
    s.add_argument("--branch", type=int, default=0, help="index of the stable root followed from the path start")

    s = sub.add_parser("classify", help="attractor verdict and spectrum")
    _physics(s, lam="49")
    _io(s)
    s.add_argument("--t-end", type=float, default=12000.0)
    s.add_argument("--dt", type=float, default=0.5)
    s.add_argument("--mode", choices=["adiabatic", "full"], default="adiabatic")
    s.add_argument("--spectrum", help="write the periodogram of s_x,+1 here")

    for name, helptext in (("sweep", "steady-state phase map"), ("groundstate", "reciprocal-limit ground-state map")):
        s = sub.add_parser(name, help=helptext)
        _physics(s, phi="0:pi:128", lam="0:80:128")
        _io(s)
        s.add_argument("--csv", help="companion phi,lambda,label,degeneracy file")
        s.add_argument("--workers", type=int, default=None, help="worker threads (default: env or CPU count)")
        s.add_argument("--resume", action="store_true", help="complete an existing output file")
        if name == "sweep":
            s.add_argument("--integrate-dp", action="store_true", help="classify attractors at DP points")
            s.add_argument("--dp-t-end", type=float, default=12000.0)
            s.add_argument("--plan", choices=["none", "populations", "full"], default="none",
                           help="apply a compensation plan at every point")

    s = sub.add_parser("scaling", help="emergent-frequency scaling toward the exceptional point")
    _physics(s, lam=None)
    _io(s)
    s.add_argument("--lambda-star", type=float, default=None, help="default: located from the stable branches")
    s.add_argument("--t-end", type=float, default=2e5)
    s.add_argument("--dt", type=float, default=0.5)

    s = sub.add_parser("compensate", help="compensation plan and compensated run")
    _physics(s, lam="50")
    _io(s)
    s.add_argument("--no-freq", action="store_true", help="populations only, no frequency modulation")
    s.add_argument("--run", action="store_true", help="integrate from the kicked normal state and classify")
    s.add_argument("--t-end", type=float, default=12000.0)
    s.add_argument("--trace", help="write the orbit in the (X_d1, X_d2) plane here")
    return ap


# ---------------------------------------------------------------------------
# helpers


def _params(args, phi: float, lam: float) -> ModelParams:
    return ModelParams.homogeneous(lam=lam, phi=phi, gamma=args.gamma, omega_c=args.omega_c,
                                   kappa=args.kappa, omega=args.omega)


def _header(argv: list[str], params: dict | None = None, extra: dict | None = None) -> dict:
    h = {"tool": "nrdicke", "version": __version__, "command": "nrdicke " + shlex.join(argv)}
    if params is not None:
        h["params"] = params
    if extra:
        h.update(extra)
    return h


class _Out:
    def __init__(self, path: str | None):
        self.path = path
        self.fh = open(path, "w", newline="") if path else sys.stdout

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()
        else:
            self.fh.flush()


def _comment_header(fh, header: dict) -> None:
    fh.write("# " + json.dumps(header, sort_keys=True) + "\n")


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        bad = sorted(set(cfg) - known)
        if bad:
            raise UsageError(f"unknown config keys: {', '.join(bad)}")
        # explicit flags win over the config file
        sub.set_defaults(**{k: v for k, v in cfg.items()})
        args = ap.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# subcommands


def cmd_trajectory(args, argv) -> int:
    p = _params(args, parse_scalar(args.phi), parse_scalar(args.lam))
    mode = Mode.FULL if args.mode == "full" else Mode.ADIABATIC
    cfg = IntegratorConfig(t_end=args.t_end, sample_dt=args.dt, rel_tol=args.rtol, abs_tol=args.atol, mode=mode)
    traj = integrate(perturb(SystemState.normal(), args.kick, args.seed), p, cfg)
    with _Out(args.output) as fh:
        _comment_header(fh, _header(argv, p.to_dict(), {"mode": args.mode}))
        traj.to_csv(fh)
    return EXIT_OK


def cmd_stationary(args, argv) -> int:
    from .stationary import SeedStrategy, stationary_phase
    p = _params(args, parse_scalar(args.phi), parse_scalar(args.lam))
    label, roots = stationary_phase(p, SeedStrategy(seed=12345 + args.seed))
    with _Out(args.output) as fh:
        fh.write(json.dumps(_header(argv, p.to_dict(), {"label": label.to_dict()}), sort_keys=True) + "\n")
        for r in roots:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    print(f"{label} (stable degeneracy {label.degeneracy}, {len(roots)} roots)", file=sys.stderr)
    return EXIT_OK


def cmd_stability(args, argv) -> int:
    from .stability import TrackedPath, detect_ep, np_matrix_family
    phis, lams = parse_values(args.phi), parse_values(args.lam)
    if len(phis) > 1 and len(lams) > 1:
        raise UsageError("only one of --phi and --lambda may be a range")
    if len(phis) > 1:
        which, grid, p = "phi", phis, _params(args, float(phis[0]), float(lams[0]))
    elif len(lams) > 1:
        which, grid, p = "lam", lams, _params(args, float(phis[0]), float(lams[0]))
    else:
        raise UsageError("give a range for --phi or --lambda")
    if args.np:
        family = np_matrix_family(p, which)
        label = "normal"
    else:
        from .stationary import find_all_stationary, stable_nontrivial
        p0 = p.replace(phi=float(grid[0])) if which == "phi" else p.with_lambda(float(grid[0]))
        roots = stable_nontrivial(find_all_stationary(p0))
        if not 0 <= args.branch < len(roots):
            raise UsageError(f"branch {args.branch} not available ({len(roots)} stable roots at the path start)")
        family = TrackedPath(roots[args.branch], p, which, float(grid[0]))
        label = f"branch {args.branch}"
    scan = detect_ep(grid, family)
    eps = [{"param": e.param, "eigenvalue": [e.eigenvalue.real, e.eigenvalue.imag], "gap": e.gap,
            "cond": e.cond, "max_re": e.max_re} for e in scan.locations]
    header = _header(argv, p.to_dict(), {"path": which, "follow": label, "break_at": scan.break_at,
                                         "exceptional_points": eps})
    with _Out(args.output) as fh:
        _comment_header(fh, header)
        scan.to_csv(fh, "phi" if which == "phi" else "lambda")
    for e in eps:
        print(json.dumps(e), file=sys.stderr)
    return EXIT_OK


def cmd_classify(args, argv) -> int:
    from .dynamics import fourier_spectrum, run_and_classify, xd_plane
    from .stationary import stationary_phase
    p = _params(args, parse_scalar(args.phi), parse_scalar(args.lam))
    label, roots = stationary_phase(p)
    mode = Mode.FULL if args.mode == "full" else Mode.ADIABATIC
    verdict, window = run_and_classify(p, t_end=args.t_end, seed=args.seed, fps=roots,
                                       sample_dt=args.dt, mode=mode)
    summary = verdict.to_dict()
    summary["stationary_label"] = label.to_dict()
    print(json.dumps(summary, sort_keys=True))
    if args.output:
        xd = xd_plane(window.sx)
        with _Out(args.output) as fh:
            _comment_header(fh, _header(argv, p.to_dict(), {"kind": verdict.kind.value}))
            fh.write("t,xd1,xd2,a_re,a_im\n")
            for t, (x1, x2), a in zip(window.times, xd, window.cavity):
                fh.write(f"{t!r},{x1!r},{x2!r},{a.real!r},{a.imag!r}\n")
    if args.spectrum and len(window) >= 1024:
        spec = fourier_spectrum(window.sx[:, 2], window.dt)
        with _Out(args.spectrum) as fh:
            _comment_header(fh, _header(argv, p.to_dict(), {"omega0": spec.omega0}))
            spec.to_csv(fh)
    return EXIT_OK


def _sweep_common(args, argv, mode) -> int:
    from .sweep import DPResolution, SweepSpec, resume, sweep, write_label_csv, write_phase_map
    base = ModelParams.homogeneous(gamma=args.gamma, omega_c=args.omega_c,
                                   kappa=0.0 if mode == "GroundState" else args.kappa, omega=args.omega)
    plan = getattr(args, "plan", "none")
    dp = DPResolution.INTEGRATE_DP if getattr(args, "integrate_dp", False) else DPResolution.STABILITY_ONLY
    if not args.output:
        raise UsageError("sweeps need -o/--output")
    try:
        spec = SweepSpec(parse_range(args.phi), parse_range(args.lam), base, mode, dp,
                         getattr(args, "dp_t_end", 12000.0), args.seed, plan)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.resume:
        records = resume(spec, args.output, args.workers)
    else:
        records = []

        def keep():
            for r in sweep(spec, args.workers):
                records.append(r)
                yield r
        write_phase_map(args.output, spec, keep())
    if args.csv:
        write_label_csv(args.csv, records)
    bad = sum(1 for r in records if r.status != "ok")
    print(f"{len(records)} points written to {args.output} ({bad} failed)", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args, argv) -> int:
    return _sweep_common(args, argv, "SteadyState")


def cmd_groundstate(args, argv) -> int:
    return _sweep_common(args, argv, "GroundState")


def cmd_scaling(args, argv) -> int:
    from .dynamics import approach_lambdas, omega0_scaling
    phi = parse_scalar(args.phi)
    base = _params(args, phi, 0.0)
    lam_star = args.lambda_star
    if lam_star is None:
        from .stability import fsop_exceptional_point
        lam_star = fsop_exceptional_point(base)
    lams = approach_lambdas(lam_star) if args.lam is None else parse_values(args.lam)
    fit = omega0_scaling(phi, lams, base, lam_star, t_end=args.t_end, sample_dt=args.dt, seed=args.seed)
    result = {"lambda_star": fit.lambda_star, "beta": fit.beta, "amplitude": fit.amplitude,
              "excluded": list(fit.excluded)}
    print(json.dumps(result, sort_keys=True))
    with _Out(args.output) as fh:
        _comment_header(fh, _header(argv, base.to_dict(), result))
        fh.write("lambda,omega0\n")
        for lam, w in zip(fit.lambdas, fit.omega0):
            fh.write(f"{lam!r},{w!r}\n")
    return EXIT_OK


def cmd_compensate(args, argv) -> int:
    from .compensate import distortion, make_plan, params_from_plan
    phi = parse_scalar(args.phi)
    try:
        plan = make_plan(phi, parse_scalar(args.lam), compensate_freq=not args.no_freq)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    p = params_from_plan(plan, _params(args, phi, 0.0))
    out = {"plan": plan.to_dict(), "params": p.to_dict()}
    if args.run:
        from .dynamics import hexagon_vertices, run_and_classify, xd_plane
        verdict, window = run_and_classify(p, t_end=args.t_end, seed=args.seed)
        verts, share = hexagon_vertices(window)
        out["verdict"] = verdict.to_dict()
        out["sector_share"] = share.tolist()
        out["distortion"] = distortion(verts)
        if args.trace:
            xd = xd_plane(window.sx)
            with _Out(args.trace) as fh:
                _comment_header(fh, _header(argv, p.to_dict(), {"plan": plan.to_dict()}))
                fh.write("t,xd1,xd2\n")
                for t, (x1, x2) in zip(window.times, xd):
                    fh.write(f"{t!r},{x1!r},{x2!r}\n")
    with _Out(args.output) as fh:
        fh.write(json.dumps({"header": _header(argv), **out}, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {
    "trajectory": cmd_trajectory, "stationary": cmd_stationary, "stability": cmd_stability,
    "classify": cmd_classify, "sweep": cmd_sweep, "groundstate": cmd_groundstate,
    "scaling": cmd_scaling, "compensate": cmd_compensate,
}


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
        return COMMANDS[args.command](args, argv)
    except SystemExit as exc:  # argparse help/usage
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, SpecMismatch) as exc:
        print(f"nrdicke: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, NewtonFailure, np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"nrdicke: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"nrdicke: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
