"""Command-line front end.

Subcommands: ``spectrum``, ``rates``, ``bohr``, ``gap``, ``simulate``,
``sweep`` and ``figure``.  Parameters come from flags, optionally on top
of a flat ``key = value`` config file given with ``--config``; flags win.

Exit codes: 0 on success, 2 on invalid input, 3 when a numerical
procedure fails.  Floats are written with 17 significant digits and rows
in a fixed order, so identical input gives byte-identical output.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from .algebra import DeformationParams, max_safe_level, spectrum_table
from .birthdeath import TAIL_RTOL, bd_rates, required_levels
from .coupling import bohr_spectrum, is_generic
from .dynamics import (decay_rate_fit, evolve, initial_state, simulation_levels,
                       stable_step, trajectory_to_csv)
from .errors import DegenerateParams, NumericalError, ValidationError
from .generator import build_generator, gamma_rates
from .spectral import crossing_curves, gap_report, offdiag_minimum

FLOAT_FMT = ".17g"
DEFAULT_LEVELS = 64
MAX_SWEEP_POINTS = 10**6

#: Config keys and their parsers; dashes and underscores are interchangeable.
CONFIG_KEYS = {
    "r": float, "q": float, "beta": float, "levels": int, "t_max": float,
    "dt": float, "format": str, "out": str, "workers": int, "initial": str,
    "record_every": int, "r_range": str, "q_range": str, "beta_range": str,
    "which": int, "resolution": int, "r_max": float, "beta_max": float,
    "tol": float,
}


# -- formatting ---------------------------------------------------------------

def fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v) + 0.0, FLOAT_FMT)
    return str(v)


def to_csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_value(v) for v in row])
    return buf.getvalue()


def to_json(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits; NaN and inf become null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_json_str(str(k))}: {to_json(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj) + 0.0, FLOAT_FMT) if math.isfinite(obj) else "null"
    return _json_str(str(obj))


def _json_str(s: str) -> str:
    return json.dumps(s)


def table_output(header: list, rows: list, fmt: str) -> str:
    if fmt == "json":
        return to_json([dict(zip(header, row)) for row in rows]) + "\n"
    return to_csv(header, rows)


# -- configuration --------------------------------------------------------------

def read_config(path: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path!r}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value.strip())
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: bad value for {key}: {value.strip()!r}") from None
    return out


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from built-in defaults."""
    cfg = read_config(args.config) if args.config else {}
    for key, value in cfg.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    defaults = {"beta": 1.0, "format": "csv", "workers": 1, "t_max": 10.0,
                "initial": "level:1", "resolution": 100, "r_max": 4.0,
                "beta_max": 5.0, "tol": 1e-9}
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    if args.format not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json, got {args.format!r}")
    return args


def params_from(args, need_rq: bool = True) -> DeformationParams:
    missing = [k for k in ("r", "q") if getattr(args, k, None) is None]
    if need_rq and missing:
        raise ValidationError("missing parameter(s): " + ", ".join("--" + k for k in missing))
    return DeformationParams(args.r, args.q, args.beta)


def parse_range(text: str, name: str) -> np.ndarray:
    """``start,stop,count`` -> ``count`` evenly spaced values."""
    parts = text.split(",")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise ValidationError(f"{name} must be 'start,stop,count', got {text!r}") from None
    if len(parts) != 3 or count < 1:
        raise ValidationError(f"{name} must be 'start,stop,count' with count >= 1, got {text!r}")
    return np.linspace(start, stop, count)


def gap_levels(params: DeformationParams, levels: Optional[int]) -> int:
    """Explicit ``levels``, else at least 64 and enough for the tail bound."""
    if levels is not None:
        return levels
    n = max(DEFAULT_LEVELS, required_levels(params, rtol=TAIL_RTOL, minimum=16))
    return min(n, max_safe_level(params))


# -- subcommands --------------------------------------------------------------

def cmd_spectrum(args) -> str:
    p = params_from(args)
    p.require("A")
    n = args.levels if args.levels is not None else DEFAULT_LEVELS
    table = spectrum_table(p, n, max_level=max(n, 1024))
    log_pi = np.asarray(table.log_pi[:n])
    m = log_pi.max()
    log_z = m + math.log(math.fsum(np.exp(log_pi - m)))
    rows = []
    for i in range(n):
        omega = None if i == 0 else float(table.omega[i])
        lp = float(log_pi[i] - log_z)
        rows.append([i, float(table.eps[i]), omega, math.exp(lp), float(log_pi[i]), lp])
    return table_output(["n", "eps_n", "omega_n", "pi_tilde_n", "log_pi_n", "log_pi_tilde_n"],
                        rows, args.format)


def cmd_rates(args) -> str:
    p = params_from(args)
    p.require("A+")
    n = args.levels if args.levels is not None else DEFAULT_LEVELS
    table = spectrum_table(p, n, max_level=max(n, 1024))
    rows = []
    for i in range(n):
        if i == 0:
            gm = gp = None
        else:
            gm, gp = gamma_rates(float(table.omega[i]), p.beta)
        lam, mu = bd_rates(p, i)
        rows.append([i, float(table.eps[i]), None if i == 0 else float(table.omega[i]),
                     gm, gp, lam, mu])
    return table_output(["n", "eps_n", "omega_n", "gamma_minus_n", "gamma_plus_n",
                         "lambda_n", "mu_n"], rows, args.format)


def cmd_bohr(args) -> str:
    p = params_from(args)
    p.require("A")
    n = args.levels if args.levels is not None else DEFAULT_LEVELS
    table = spectrum_table(p, n, max_level=max(n, 1024))
    spec = bohr_spectrum(table, tol=args.tol)
    gen = is_generic(spec, table)
    rows = []
    for w in spec.omegas:
        for upper, lower in spec.pairs[w]:
            rows.append([w, upper, lower, len(spec.pairs[w]), (upper, lower) in spec.boundary_pairs])
    if args.format == "json":
        return to_json({"generic": gen.generic,
                        "degenerate_levels": [list(x) for x in gen.degenerate_levels],
                        "frequencies": [dict(zip(["omega", "upper", "lower", "multiplicity",
                                                  "boundary"], row)) for row in rows]}) + "\n"
    return to_csv(["omega", "upper", "lower", "multiplicity", "boundary"], rows)


GAP_FIELDS = ["r", "q", "beta", "levels", "offdiag_min", "offdiag_argmin_j", "offdiag_argmin_k",
              "diag_lower_strong", "diag_lower_weak", "diag_upper_alpha", "diag_numeric",
              "gap_formula_paper", "gap_numeric", "formula_below_numeric", "alpha_below_numeric"]


def _gap_row(report) -> list:
    d = report.to_dict()
    j, k = d.pop("offdiag_argmin")
    d["offdiag_argmin_j"], d["offdiag_argmin_k"] = j, k
    return [d[f] for f in GAP_FIELDS]


def cmd_gap(args) -> str:
    p = params_from(args)
    report = gap_report(p, gap_levels(p, args.levels))
    if args.format == "json":
        return to_json(report.to_dict()) + "\n"
    return to_csv(GAP_FIELDS, [_gap_row(report)])


def cmd_simulate(args) -> str:
    p = params_from(args)
    p.require("A+")
    n = args.levels if args.levels is not None else simulation_levels(p)
    gen = build_generator(p, n)
    dt = args.dt if args.dt is not None else stable_step(gen)
    rho0 = initial_state(gen, args.initial)
    steps = math.ceil(args.t_max / dt - 1e-12)
    every = args.record_every if args.record_every is not None else max(1, steps // 1000)
    traj = evolve(gen, rho0, args.t_max, dt, record_every=every)
    entries = [(0, 0), (0, 1), (1, 1)]
    kind, _, arg = args.initial.partition(":")
    if kind == "coherence":
        j, k = (int(s) for s in arg.replace("(", "").replace(")", "").split(","))
        entries.append((j, k))
    entries = list(dict.fromkeys(entries))
    if args.format == "json":
        rows = []
        for i, t in enumerate(traj.times):
            row = {"t": t, "trace": traj.traces[i], "min_eig": traj.min_eigs[i],
                   "trace_dist": traj.trace_distances[i], "l2_dist": traj.l2_distances[i]}
            for j, k in entries:
                row[f"re_{j}_{k}"] = traj.states[i, j, k].real
                row[f"im_{j}_{k}"] = traj.states[i, j, k].imag
            rows.append(row)
        try:
            rate = decay_rate_fit(traj)
        except NumericalError:
            rate = None
        return to_json({"levels": n, "dt": traj.dt, "trace_drift": traj.trace_drift,
                        "decay_rate": rate, "trajectory": rows}) + "\n"
    return trajectory_to_csv(traj, entries)


SWEEP_FIELDS = ["status"] + GAP_FIELDS + ["message"]


def _sweep_point(point) -> list:
    r, q, beta, levels = point
    try:
        p = DeformationParams(r, q, beta)
        report = gap_report(p, gap_levels(p, levels))
        return ["ok"] + _gap_row(report) + [""]
    except DegenerateParams as exc:
        status, msg = "degenerate", str(exc)
    except ValidationError as exc:
        status, msg = "invalid", str(exc)
    except (NumericalError, OverflowError) as exc:
        status, msg = "numerical_failure", str(exc)
    row = [None] * len(GAP_FIELDS)
    row[:4] = [r, q, beta, levels]
    return [status] + row + [msg]


def cmd_sweep(args) -> str:
    axes = []
    given = False
    for name in ("r", "q", "beta"):
        text = getattr(args, f"{name}_range")
        if text is not None:
            axes.append([float(v) for v in parse_range(text, f"--{name.replace('_', '-')}-range")])
            given = True
        elif getattr(args, name) is not None:
            axes.append([float(getattr(args, name))])
        else:
            raise ValidationError(f"--{name} or --{name}-range is required")
    if not given:
        raise ValidationError("sweep needs at least one of --r-range, --q-range, --beta-range")
    total = math.prod(len(a) for a in axes)
    if total > MAX_SWEEP_POINTS:
        raise ValidationError(f"sweep has {total} points, more than {MAX_SWEEP_POINTS}")
    points = [(r, q, b, args.levels) for r, q, b in itertools.product(*axes)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, points, chunksize=max(1, len(points) // (4 * args.workers))))
    else:
        rows = [_sweep_point(pt) for pt in points]
    return table_output(SWEEP_FIELDS, rows, args.format)


def figure_rows(which: int, q: float, resolution: int, r_max: float, beta_max: float):
    """Curve data for the three gap figures.

    1: ``(r, diag_lower, offdiag_min)`` at ``beta = 1.5`` over ``r`` from
       ``2 - q`` (excluded when it is not above 1) to ``r_max``.
    2: ``(beta, diag_lower, offdiag_min)`` at ``r = 2`` over ``(0, beta_max]``.
    3: the two crossing curves ``beta(r)`` for ``r`` in ``(1, r_max]``.
    ``diag_lower`` is ``1 - e^{-2 beta}``.  Figure 2 uses ``q = 1`` unless
    another ``q`` is given.
    """
    if resolution < 1:
        raise ValidationError(f"resolution must be >= 1, got {resolution}")
    if which == 1:
        beta = 1.5
        lo = 2.0 - q
        rs = np.linspace(lo, r_max, resolution + 1)
        rs = rs[1:] if lo <= 1.0 else rs
        rows = []
        for r in rs:
            p = DeformationParams(float(r), q, beta)
            p.require("B")
            rows.append([float(r), -math.expm1(-2 * beta), offdiag_minimum(p)[0]])
        return ["r", "diag_lower", "offdiag_min"], rows
    if which == 2:
        betas = np.linspace(0.0, beta_max, resolution + 1)[1:]
        rows = []
        for b in betas:
            p = DeformationParams(2.0, q, float(b))
            p.require("B")
            rows.append([float(b), -math.expm1(-2 * b), offdiag_minimum(p)[0]])
        return ["beta", "diag_lower", "offdiag_min"], rows
    if which == 3:
        rs = np.linspace(1.0, r_max, resolution + 1)[1:]
        c = crossing_curves(q, (float(rs[0]), float(rs[-1])), (0.01, beta_max + 1.0), len(rs))
        rows = [[float(c.r[i]), c.upper[i], c.lower[i], c.upper_status[i], c.lower_status[i]]
                for i in range(len(c.r))]
        return ["r", "beta_upper", "beta_lower", "upper_status", "lower_status"], rows
    raise ValidationError(f"figure must be 1, 2 or 3, got {which}")


def cmd_figure(args) -> str:
    which = args.which
    if which is None:
        raise ValidationError("figure number required (1, 2 or 3)")
    q = args.q if args.q is not None else 1.0
    header, rows = figure_rows(which, q, args.resolution, args.r_max, args.beta_max)
    return table_output(header, rows, args.format)


COMMANDS = {"spectrum": cmd_spectrum, "rates": cmd_rates, "bohr": cmd_bohr, "gap": cmd_gap,
            "simulate": cmd_simulate, "sweep": cmd_sweep, "figure": cmd_figure}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--r", type=float, help="deformation parameter r (> 1)")
    common.add_argument("--q", type=float, help="deformation parameter q (in [-1, 1])")
    common.add_argument("--beta", type=float, help="inverse temperature (default 1)")
    common.add_argument("--levels", type=int, help="truncation N")
    common.add_argument("--t-max", dest="t_max", type=float, help="simulation horizon (default 10)")
    common.add_argument("--dt", type=float, help="time step (default 0.1 / max rate)")
    common.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--workers", type=int, help="processes for sweep (default 1)")
    common.add_argument("--config", help="flat key = value config file")

    parser = argparse.ArgumentParser(prog="fibosc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="levels, gaps and thermal weights")
    sub.add_parser("rates", parents=[common], help="thermal rates per level")
    b = sub.add_parser("bohr", parents=[common], help="Bohr frequencies and level pairs")
    b.add_argument("--tol", type=float, help="frequency grouping tolerance (default 1e-9)")
    sub.add_parser("gap", parents=[common], help="spectral gap report")
    s = sub.add_parser("simulate", parents=[common], help="integrate the master equation")
    s.add_argument("--initial", help="ground | invariant | level:n | thermal-perturbed | coherence:j,k")
    s.add_argument("--record-every", dest="record_every", type=int)
    w = sub.add_parser("sweep", parents=[common], help="gap reports over a parameter grid")
    for name in ("r", "q", "beta"):
        w.add_argument(f"--{name}-range", dest=f"{name}_range", metavar="START,STOP,COUNT")
    f = sub.add_parser("figure", parents=[common], help="curve data for the gap figures")
    f.add_argument("which", type=int, nargs="?", choices=(1, 2, 3))
    f.add_argument("--resolution", type=int)
    f.add_argument("--r-max", dest="r_max", type=float)
    f.add_argument("--beta-max", dest="beta_max", type=float)
    return parser


def _fill_missing(args):
    for key in CONFIG_KEYS:
        if not hasattr(args, key):
            setattr(args, key, None)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = resolve(_fill_missing(args))
        text = COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, OverflowError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
