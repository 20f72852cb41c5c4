"""Command-line front end.

Subcommands print ``key = value`` reports and write CSV with a versioned
header line. Exit codes: 0 success, 2 configuration error, 3 convergence
failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .decoherence import survival_time, survival_time_closed_form, survival_time_transcendental
from .errors import ConfigError, ConvergenceError, NoEntanglementError, ParameterError
from .grid import entanglement_grid
from .modes import fitted_frequency, lo_waveform, mode_scan, optimize_mode
from .montecarlo import SimConfig, halving_check, simulate_ensemble, validate
from .params import build_params
from .wienerhopf import solve_lambda

log = logging.getLogger("cv_entangle")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4
RATIO_OMEGA_F = 0.1
AGREEMENT_TOL = 1e-3


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def closed_form(ratio: float) -> float:
    return 0.5 * math.log(1.0 + 25.0 / 8.0 * ratio**2)


class _Out:
    """Text sink with LF endings; stdout unless a path is given."""

    def __init__(self, path):
        self.path = path
        self.buf = io.StringIO()

    def line(self, *parts):
        self.buf.write(",".join(parts) + "\n")

    def kv(self, key, value):
        self.buf.write(f"{key} = {fmt(value)}\n")

    def flush(self):
        text = self.buf.getvalue()
        if self.path in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(self.path, "w", newline="\n") as fh:
                fh.write(text)


def _header(out, sub):
    out.buf.write(f"# cv-entangle v{__version__} {sub}\n")


# ---------------------------------------------------------------- parameters

def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    vals = {}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            vals[key.replace("-", "_")] = val
    return vals


def params_from(args):
    if args.ratio is not None and (args.omega_q is not None or args.omega_f is not None):
        raise ConfigError("--ratio fixes omega_f = 0.1 and omega_q = ratio * omega_f; "
                          "do not combine it with --omega-q/--omega-f")
    omega_f, omega_q = args.omega_f, args.omega_q
    if args.ratio is not None:
        if args.nth is not None:
            raise ConfigError("--ratio conflicts with --nth")
        omega_f, omega_q = RATIO_OMEGA_F, args.ratio * RATIO_OMEGA_F
    if omega_f is None and args.nth is None:
        omega_f = RATIO_OMEGA_F
    if omega_q is None:
        omega_q = RATIO_OMEGA_F
    return build_params(q_m=args.qm, omega_q=omega_q, omega_f=omega_f, n_th=args.nth)


def _evaluate(params, method):
    """``(e_n, lambda_min, method_label, extra)``."""
    if method == "grid":
        res = entanglement_grid(params)
        return res.e_n, res.lambda_min, "grid", res.convergence_info
    if params.omega_q == 0:
        return 0.0, float("nan"), "wiener-hopf", {"separable": True}
    res = solve_lambda(params)
    lam = res.lambda_min if res.below_unity_count else float("nan")
    return res.e_n, lam, "wiener-hopf", res.convergence_info


# ---------------------------------------------------------------- commands

def cmd_negativity(args) -> int:
    params = params_from(args)
    out = _Out(args.output)
    methods = ["grid", "wiener-hopf"] if args.method == "both" else [args.method]
    vals = {}
    for m in methods:
        e_n, lam, label, info = _evaluate(params, m)
        vals[m] = e_n
        out.kv(f"{m}.e_n", e_n)
        out.kv(f"{m}.lambda_min", lam)
        if m == "grid":
            out.kv("grid.below_unity", info.get("trace", [{}])[-1].get("below_unity", 0))
            for row in info.get("trace", []):
                out.kv(f"grid.trace.{row['level']}",
                       f"dim={row['dim']} e_n={fmt(row['e_n'])} seconds={row['seconds']:.3f}")
    if params.omega_q > 0 and params.omega_f > 0:
        out.kv("closed_form", closed_form(params.omega_q / params.omega_f))
    code = EXIT_OK
    if len(vals) == 2:
        diff = abs(vals["grid"] - vals["wiener-hopf"])
        out.kv("abs_diff", diff)
        out.kv("agree", diff <= AGREEMENT_TOL)
        if diff > AGREEMENT_TOL:
            code = EXIT_VALIDATION
    out.flush()
    return code


def _sweep_point(job):
    q_m, omega_f, ratio, method = job
    params = build_params(q_m=q_m, omega_q=ratio * omega_f, omega_f=omega_f)
    try:
        e_n, lam, label, _ = _evaluate(params, method)
        return ratio, e_n, label, lam, True
    except ConvergenceError:
        return ratio, float("nan"), method, float("nan"), False


def cmd_sweep(args) -> int:
    if args.points < 1 or not args.stop > args.start or (args.log and args.start <= 0):
        raise ConfigError("sweep range must satisfy 0 < start < stop and points >= 1")
    if args.method == "both":
        raise ConfigError("sweep takes a single method")
    ratios = (np.geomspace if args.log else np.linspace)(args.start, args.stop, args.points)
    if args.points == 1:
        ratios = np.array([args.start])
    omega_f = args.omega_f if args.omega_f is not None else RATIO_OMEGA_F
    jobs = [(args.qm, omega_f, float(r), args.method) for r in ratios]
    if args.threads > 1:
        with ProcessPoolExecutor(args.threads) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    out = _Out(args.output)
    _header(out, "sweep")
    out.line("ratio", "e_n", "e_n_closed_form", "method", "lambda_min", "converged")
    for ratio, e_n, label, lam, ok in rows:
        out.line(fmt(ratio), fmt(e_n), fmt(closed_form(ratio)), label, fmt(lam), fmt(ok))
    out.flush()
    failed = sum(not r[-1] for r in rows)
    if failed:
        print(f"warning: {failed} sweep points did not converge", file=sys.stderr)
    return EXIT_OK


def cmd_survival(args) -> int:
    params = params_from(args)
    out = _Out(args.output)
    res = {"grid": survival_time(params), "transcendental": survival_time_transcendental(params),
           "closed_form": survival_time_closed_form(params)}
    for k, r in res.items():
        out.kv(f"{k}.theta_s", r.theta_s)
    out.kv("transcendental.residual", res["transcendental"].diagnostics["residual"])
    out.kv("grid.lambda_at_root", res["grid"].diagnostics["lambda_at_root"])
    keys = list(res)
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            ta, tb = res[a].theta_s, res[b].theta_s
            out.kv(f"rel_diff.{a}.{b}", abs(ta - tb) / max(ta, tb))
    out.flush()
    return EXIT_OK


def cmd_mode(args) -> int:
    params = params_from(args)
    out = _Out(args.output)
    opt = optimize_mode(params)
    m = opt.mode
    out.kv("omega_g", m.omega_g)
    out.kv("zeta", m.zeta)
    out.kv("gamma_g", m.gamma_g)
    out.kv("e_n_sub", opt.e_n_sub)
    fit = fitted_frequency(params)
    out.kv("omega_g_fit", fit)
    out.kv("omega_g_fit_rel_diff", abs(m.omega_g - fit) / fit if fit > 0 else float("nan"))
    for i, s in enumerate(opt.diagnostics["starts"]):
        out.kv(f"start.{i}", f"e_n_sub={fmt(s['e_n_sub'])} evaluations={s['evaluations']}")
    out.flush()
    if args.scan:
        wm = params.omega_m
        hi = args.scan_stop if args.scan_stop is not None else max(1.0, 2.0 * fit / wm)
        rel = np.linspace(args.scan_start, hi, args.scan_points)
        zeta = args.zeta if args.zeta is not None else m.zeta
        # the lowest admissible frequency sits a hair below omega_m
        omegas = np.maximum(wm * (1.0 + rel), math.sqrt(wm**2 - params.gamma_m**2) * (1 + 1e-12))
        sc = _Out(args.scan)
        _header(sc, "mode-scan")
        sc.line("omega_g_rel", "e_n_sub")
        for r, (_, e) in zip(rel, mode_scan(params, omegas, zeta)):
            sc.line(fmt(r), fmt(e))
        sc.flush()
    if args.lo:
        horizon = args.lo_horizon if args.lo_horizon is not None else 10.0 / m.gamma_g
        t = np.linspace(-horizon, 0.0, args.lo_points)
        l1, l2 = lo_waveform(m, args.zeta_q, t)
        lo = _Out(args.lo)
        _header(lo, "lo")
        lo.line("t", "l1", "l2")
        for row in zip(t, l1, l2):
            lo.line(*map(fmt, row))
        lo.flush()
    return EXIT_OK


def cmd_validate(args) -> int:
    params = params_from(args)
    cfg = SimConfig(dt=args.dt, n_traj=args.n_traj, seed=args.seed,
                    bin_width=args.bin_width, n_bins=args.n_bins)
    cfg.validate(params)
    samples = simulate_ensemble(params, cfg)
    rep = validate(params, cfg, samples=samples)
    ratio, ok = halving_check(params, cfg, samples=samples)
    out = _Out(args.output)
    for k, v in rep.as_dict().items():
        out.kv(k, v)
    out.kv("halving_ratio", ratio)
    out.kv("halving_ok", ok)
    out.flush()
    return EXIT_OK if rep.passed and ok else EXIT_VALIDATION


# ---------------------------------------------------------------- parser

def _params_group(p):
    g = p.add_argument_group("parameters (units of omega_m)")
    g.add_argument("--qm", type=float, default=1e3, help="mechanical quality factor")
    g.add_argument("--omega-q", type=float, default=None)
    g.add_argument("--omega-f", type=float, default=None)
    g.add_argument("--nth", type=float, default=None, help="thermal occupation (instead of --omega-f)")
    g.add_argument("--ratio", type=float, default=None, help="omega_q/omega_f with omega_f = 0.1")
    p.add_argument("--config", default=None, help="file of key = value lines; flags win")
    p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cv-entangle", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"cv-entangle {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("negativity", help="E_N of oscillator versus output field")
    _params_group(p)
    p.add_argument("--method", choices=["grid", "wiener-hopf", "both"], default="wiener-hopf")
    p.set_defaults(func=cmd_negativity)

    p = sub.add_parser("sweep", help="E_N over a range of omega_q/omega_f")
    _params_group(p)
    p.add_argument("--method", choices=["grid", "wiener-hopf", "both"], default="wiener-hopf")
    p.add_argument("--start", type=float, default=0.1)
    p.add_argument("--stop", type=float, default=100.0)
    p.add_argument("--points", type=int, default=50)
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--log", dest="log", action="store_true", default=True)
    scale.add_argument("--linear", dest="log", action="store_false")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("survival", help="survival time after decoupling")
    _params_group(p)
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("mode", help="maximally entangled single output mode")
    _params_group(p)
    p.add_argument("--scan", default=None, metavar="CSV", help="write omega_g scan")
    p.add_argument("--scan-start", type=float, default=0.0, help="lowest (omega_g - omega_m)/omega_m")
    p.add_argument("--scan-stop", type=float, default=None)
    p.add_argument("--scan-points", type=int, default=101)
    p.add_argument("--zeta", type=float, default=None, help="zeta for the scan (default: optimum)")
    p.add_argument("--lo", default=None, metavar="CSV", help="write local-oscillator envelopes")
    p.add_argument("--zeta-q", type=float, default=math.pi / 2)
    p.add_argument("--lo-points", type=int, default=1001)
    p.add_argument("--lo-horizon", type=float, default=None)
    p.set_defaults(func=cmd_mode)

    p = sub.add_parser("validate", help="Monte-Carlo check of the covariances")
    _params_group(p)
    p.add_argument("--n-traj", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--bin-width", type=float, default=0.2)
    p.add_argument("--n-bins", type=int, default=32)
    p.set_defaults(func=cmd_validate)
    return ap


_BOOLS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        try:
            file_vals = read_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        sp = ap._subparsers._group_actions[0].choices[args.command]
        unknown = set(file_vals) - {a.dest for a in sp._actions}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        defaults = {}
        for action in sp._actions:
            if action.dest not in file_vals or action.dest in defaults:
                continue
            raw = file_vals[action.dest]
            if action.nargs == 0 and isinstance(action.const, bool):
                if raw.lower() not in _BOOLS:
                    raise ConfigError(f"{action.dest}: expected true or false, got {raw!r}")
                defaults[action.dest] = _BOOLS[raw.lower()]
            else:
                defaults[action.dest] = action.type(raw) if action.type else raw
        sp.set_defaults(**defaults)
        args = ap.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse(argv)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NoEntanglementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        for row in getattr(exc, "trace", None) or []:
            print(f"trace: {row}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    raise SystemExit(main())
