"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 physics or regime violation,
4 numerical failure.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import feshbach, rates_analytic as ra, rates_numeric as rn, scans, twobody, zrp
from .units import CODATA, amu_to_au, three_body_reduced_mass

EXIT_OK, EXIT_INPUT, EXIT_PHYSICS, EXIT_NUMERIC = 0, 2, 3, 4
DIGITS = 12
NA23_AMU = feshbach.ISOTOPE_MASSES["23Na"]
CONSTANT_KEYS = ("amu_in_electron_masses", "bohr_magneton_au", "gauss_in_au_field")


class InputError(ValueError):
    pass


# ----------------------------------------------------------------- output

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{DIGITS}g}"
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.{DIGITS}g}")
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    return v


def render(rows, columns, fmt, summary=None, invocation=None):
    """Deterministic CSV or JSON text for ``rows`` (a list of dicts)."""
    if fmt == "json":
        data = [{c: _json_value(r.get(c, "")) for c in columns} for r in rows]
        if summary is None and invocation is None:
            payload = data
        else:
            payload = {"rows": data}
            if summary is not None:
                payload["summary"] = _json_value(summary)
            if invocation is not None:
                payload["invocation"] = invocation
        return json.dumps(payload, indent=1) + "\n"
    out = io.StringIO()
    if invocation is not None:
        out.write("# " + " ".join(invocation) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in columns])
    if summary is not None:
        out.write("# " + " ".join(f"{k}={_cell(v)}" for k, v in summary.items()) + "\n")
    return out.getvalue()


def _emit(args, rows, columns, summary=None):
    inv = (["narrow3b", __version__] + list(args.argv)) if args.annotate else None
    text = render(rows, columns, args.format, summary, inv)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------ config file

def read_config(path):
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}")
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _constants(args):
    overrides = {k: float(v) for k, v in getattr(args, "constant_overrides", {}).items()}
    return replace(CODATA, **overrides) if overrides else CODATA


def _mass_au(args, constants):
    if getattr(args, "m_au", None) is not None:
        if not args.m_au > 0:
            raise InputError("--m-au must be positive")
        return args.m_au
    return amu_to_au(args.mass_amu, constants)


# ---------------------------------------------------------------- commands

def cmd_reff_table(args):
    constants = _constants(args)
    try:
        source = args.catalog if args.catalog else None
        entries, skipped = feshbach.load_catalog(source, lenient=args.lenient)
    except FileNotFoundError as exc:
        raise InputError(str(exc))
    for line, msg in skipped:
        print(f"skipped {msg}", file=sys.stderr)
    rows = feshbach.table_rows(entries, constants)
    columns = list(feshbach.HEADER) + ["r_eff_au", "ratio_to_r0", "class"]
    _emit(args, rows, columns)
    return EXIT_PHYSICS if any(r["class"] == "error" for r in rows) else EXIT_OK


def _model_from_args(args):
    if not args.r0 > 0:
        raise InputError("r0 must be positive")
    try:
        return twobody.PotentialModel(args.kind, args.D, args.B, args.r0)
    except ValueError as exc:
        raise InputError(str(exc))


def _mu2(args, constants):
    if args.mu2 is not None:
        if not args.mu2 > 0:
            raise InputError("--mu2 must be positive")
        return args.mu2
    return amu_to_au(args.mass_amu, constants) / 2.0


def _twobody_row(model, mu2):
    report = twobody.analyze(model, mu2)
    return {"kind": model.kind, "D": model.D, "B": model.B, "r0": model.r0, "mu2": mu2,
            "a": report.a, "r_eff": report.r_eff, "n_bound": report.n_bound,
            "residual": report.residual, "k_min": report.k_window[0],
            "k_max": report.k_window[1]}


TWOBODY_COLUMNS = ["kind", "D", "B", "r0", "mu2", "a", "r_eff", "n_bound", "residual",
                   "k_min", "k_max"]


def cmd_twobody_fit(args):
    model = _model_from_args(args)
    mu2 = _mu2(args, _constants(args))
    _emit(args, [_twobody_row(model, mu2)], TWOBODY_COLUMNS)
    return EXIT_OK


def cmd_tune(args):
    if not args.r0 > 0:
        raise InputError("r0 must be positive")
    mu2 = _mu2(args, _constants(args))
    tol = args.tol if args.tol is not None else 1e-4
    try:
        model = twobody.tune_to_target(args.kind, args.r0, args.a, args.r_eff,
                                       n_bound=args.n_bound, mu2=mu2, tol=tol)
    except twobody.TuningError:
        raise
    except ValueError as exc:
        raise InputError(str(exc))
    row = _twobody_row(model, mu2)
    row.update(target_a=args.a, target_r_eff=args.r_eff)
    _emit(args, [row], ["target_a", "target_r_eff"] + TWOBODY_COLUMNS)
    return EXIT_OK


def cmd_s0(args):
    _emit(args, [{"s0": zrp.efimov_root_unitarity(), "p0": zrp.P0}], ["s0", "p0"])
    return EXIT_OK


def cmd_zrp_curve(args):
    if not args.r_eff < 0:
        raise InputError("--r-eff must be negative")
    if not 0 < args.R_min < args.R_max:
        raise InputError("need 0 < R-min < R-max")
    a = math.inf if args.a is None else args.a
    mass = _mass_au(args, _constants(args))
    mu = three_body_reduced_mass(mass)
    R = np.geomspace(args.R_min, args.R_max, args.n)
    rows = []
    prev = None
    for Ri in R:
        pt = zrp.zrp_potentials(float(Ri), a, args.r_eff, mu, prev=prev)
        prev = pt.s_squared
        rows.append({"R": pt.R, "s_squared": pt.s_squared, "U": pt.U, "W00": pt.W00,
                     "scaled_W00": 2 * mu * pt.R ** 2 * pt.W00})
    summary = {"s0": zrp.S0}
    if math.isinf(a):
        fit = zrp.fit_c0(args.r_eff)
        summary.update(c0=fit.c0, c0_residual=fit.residual)
    _emit(args, rows, ["R", "s_squared", "U", "W00", "scaled_W00"], summary)
    return EXIT_OK


def _scan_system(name):
    if name not in scans.SYSTEMS:
        raise InputError(f"unknown system {name!r}")
    return name


def _short_range(args):
    try:
        return ra.ShortRangeParams(args.A_re, args.A_im)
    except ValueError as exc:
        raise InputError(str(exc))


def cmd_rates_scan(args):
    system = _scan_system(args.system)
    sign = scans.SYSTEMS[system][3]
    if args.a_grid:
        grid = [float(x) for x in args.a_grid.split(",") if x.strip()]
    else:
        start = args.a_start if args.a_start is not None else sign * 1e3 * abs(args.r_eff)
        grid = list(scans.log_period_grid(start, args.n, args.periods))
    mass = _mass_au(args, _constants(args))
    try:
        spec = scans.ScanSpec(system=system, a_grid=tuple(grid), r_eff=args.r_eff,
                              alpha=args.alpha, beta=args.beta, A=_short_range(args),
                              r0=args.r0, m=mass, k=args.k, kba=args.kba)
    except ValueError as exc:
        raise InputError(str(exc))
    rows = scans.run_scan(spec, args.engine, h=args.step)
    columns = ["a", "abs_a_over_reff", "u", "rate", "scaled_rate"]
    if args.engine == "both":
        columns += ["rate_analytic", "rate_numeric", "rel_diff"]
    columns.append("regime")
    summary = None
    if args.engine == "both":
        summary = {"max_abs_rel_diff": max(abs(r["rel_diff"]) for r in rows)}
    _emit(args, rows, columns, summary)
    return EXIT_OK


def _read_scan(path):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read scan {path}: {exc}")
    if lines and lines[0].lstrip().startswith(("[", "{")):
        payload = json.loads("".join(lines))
        rows = payload["rows"] if isinstance(payload, dict) else payload
    else:
        rows = list(csv.DictReader(io.StringIO("".join(lines))))
    if not rows:
        raise InputError(f"scan {path} has no rows")
    try:
        a = np.array([float(r["a"]) for r in rows])
        ratio = np.array([float(r["abs_a_over_reff"]) for r in rows])
        y = np.array([float(r["scaled_rate"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise InputError(f"scan {path}: {exc}")
    r_eff = -float(np.median(np.abs(a) / ratio))
    u = zrp.S0 * np.log(ratio)
    return r_eff, u, y


def cmd_fit_alpha_beta(args):
    system = _scan_system(args.system)
    if system == "fermion_relax":
        raise InputError("fermion rates have no log-periodic peaks to fit")
    l = scans.SYSTEMS[system][2]
    peaks = {}
    for path in args.scans:
        r_eff, u, y = _read_scan(path)
        p, _ = scans.locate_peaks(u, y)
        if len(p) < 2:
            raise ra.RegimeError(f"{path}: need at least 2 peaks, found {len(p)}")
        peaks[r_eff] = p
    if len(peaks) < 2:
        raise InputError("need scans at two or more distinct r_eff values")
    fit = scans.fit_alpha_beta(peaks, _short_range(args), l)
    rows = []
    for r_eff, ps in fit.peak_positions.items():
        sp = scans.peak_spacings(ps)
        for i, u in enumerate(ps):
            rows.append({"r_eff": r_eff, "peak_index": i, "u_peak": u,
                         "spacing_over_pi": (sp[i - 1] / math.pi) if i > 0 else float("nan")})
    summary = {"alpha": fit.alpha_fit, "beta": fit.beta_fit, "residual": fit.residual,
               "alpha_large_reff": fit.alpha_large_reff, "beta_large_reff": fit.beta_large_reff,
               "alpha_extrapolated": fit.alpha_extrapolated,
               "beta_extrapolated": fit.beta_extrapolated}
    _emit(args, rows, ["r_eff", "peak_index", "u_peak", "spacing_over_pi"], summary)
    return EXIT_OK


def cmd_threshold_check(args):
    system = _scan_system(args.system)
    oracle, _, l, sign, _ = scans.SYSTEMS[system]
    a = args.a if args.a is not None else sign * 1e3 * abs(args.r_eff)
    mass = _mass_au(args, _constants(args))
    mu = three_body_reduced_mass(mass)
    try:
        ch = rn.build_channel(oracle, a, args.r_eff, args.alpha, args.beta, _short_range(args),
                              mu, mass / 2, args.r0)
    except ValueError as exc:
        raise InputError(str(exc))
    kba = np.geomspace(args.kba_min, args.kba_max, args.n)
    ks = kba / ch.R2
    fit = rn.threshold_scan(ch, ks, h=args.step)
    expected = 2 * l + 1
    tol = args.tol if args.tol is not None else 0.02
    ok = abs(fit.exponent / expected - 1) <= tol
    _emit(args, [{"system": system, "l": l, "exponent": fit.exponent, "expected": expected,
                  "residual": fit.residual, "pass": ok}],
          ["system", "l", "exponent", "expected", "residual", "pass"])
    return EXIT_OK if ok else EXIT_NUMERIC


# ------------------------------------------------------------------ parser

def _add_common(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--tol", type=float, default=None, help="command-specific tolerance")
    p.add_argument("--annotate", action="store_true", help="echo the invocation in the output")
    p.add_argument("--config", help="key=value file with defaults; flags override it")


def _add_mass(p):
    p.add_argument("--mass-amu", type=float, default=NA23_AMU, help="atom mass in amu")
    p.add_argument("--m-au", type=float, default=None, help="atom mass in electron masses")


def _add_narrow(p):
    p.add_argument("--system", required=True, choices=tuple(scans.SYSTEMS))
    p.add_argument("--r-eff", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--A-re", type=float, default=None)
    p.add_argument("--A-im", type=float, default=None)
    p.add_argument("--r0", type=float, default=50.0)
    p.add_argument("--step", type=float, default=rn.DEFAULT_STEP, help="oracle step in ln R")
    _add_mass(p)


def build_parser():
    parser = argparse.ArgumentParser(prog="narrow3b", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reff-table", help="effective ranges for a resonance catalog")
    p.add_argument("catalog", nargs="?", help="CSV catalog (default: bundled table)")
    p.add_argument("--lenient", action="store_true", help="skip malformed rows")
    _add_common(p)
    p.set_defaults(func=cmd_reff_table)

    for name, func, helptext in (("twobody-fit", cmd_twobody_fit, "fit a and r_eff of a model"),
                                 ("tune", cmd_tune, "tune (D, B) to target a and r_eff")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--kind", choices=twobody.KINDS, default="sech_barrier")
        p.add_argument("--r0", type=float, default=50.0)
        p.add_argument("--mu2", type=float, default=None, help="pair reduced mass (a.u.)")
        _add_mass(p)
        if name == "twobody-fit":
            p.add_argument("--D", type=float, required=True)
            p.add_argument("--B", type=float, default=0.0)
        else:
            p.add_argument("--a", type=float, required=True)
            p.add_argument("--r-eff", type=float, required=True)
            p.add_argument("--n-bound", type=int, default=None)
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("s0", help="Efimov exponent at unitarity")
    _add_common(p)
    p.set_defaults(func=cmd_s0)

    p = sub.add_parser("zrp-curve", help="zero-range channel exponent and potentials")
    p.add_argument("--r-eff", type=float, required=True)
    p.add_argument("--a", type=float, default=None, help="omit for 1/a = 0")
    p.add_argument("--R-min", type=float, default=None)
    p.add_argument("--R-max", type=float, default=None)
    p.add_argument("-n", type=int, default=41)
    _add_mass(p)
    _add_common(p)
    p.set_defaults(func=cmd_zrp_curve)

    p = sub.add_parser("rates-scan", help="narrow-resonance rates along a")
    _add_narrow(p)
    p.add_argument("--engine", choices=scans.ENGINES, default="analytic")
    p.add_argument("--a-grid", help="comma-separated a values")
    p.add_argument("--a-start", type=float, default=None)
    p.add_argument("-n", type=int, default=50)
    p.add_argument("--periods", type=float, default=1.0)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--kba", type=float, default=1e-3, help="k beta|a| when --k is not given")
    _add_common(p)
    p.set_defaults(func=cmd_rates_scan)

    p = sub.add_parser("fit-alpha-beta", help="fit alpha, beta from peak positions")
    p.add_argument("scans", nargs="+", help="rates-scan outputs at different r_eff")
    p.add_argument("--system", required=True, choices=tuple(scans.SYSTEMS))
    p.add_argument("--A-re", type=float, default=None)
    p.add_argument("--A-im", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_fit_alpha_beta)

    p = sub.add_parser("threshold-check", help="Wigner exponent of 1 - R")
    _add_narrow(p)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--kba-min", type=float, default=1e-6)
    p.add_argument("--kba-max", type=float, default=1e-4)
    p.add_argument("-n", type=int, default=5)
    _add_common(p)
    p.set_defaults(func=cmd_threshold_check)
    return parser


def _apply_config(parser, argv):
    """Parse once to find ``--config``, then re-parse with its values as defaults."""
    args = parser.parse_args(argv)
    constants = {}
    if getattr(args, "config", None):
        values = read_config(args.config)
        sub_defaults = {}
        for key, value in values.items():
            if key in CONSTANT_KEYS:
                constants[key] = value
            elif hasattr(args, key):
                current = getattr(args, key)
                sub_defaults[key] = _coerce(value, current)
            else:
                raise InputError(f"unknown config key {key!r}")
        sp = parser._subparsers._group_actions[0].choices[args.command]
        sp.set_defaults(**sub_defaults)
        args = parser.parse_args(argv)
    args.constant_overrides = constants
    return args


def _coerce(value, current):
    if isinstance(current, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(value)
    try:
        return float(value)
    except ValueError:
        return value


def _fill_defaults(args):
    # values that depend on other arguments
    if args.command in ("rates-scan", "threshold-check", "fit-alpha-beta"):
        r0 = getattr(args, "r0", 50.0)
        if args.A_re is None:
            args.A_re = r0
        if args.A_im is None:
            args.A_im = r0
    if args.command == "zrp-curve":
        if args.R_min is None:
            args.R_min = 1e-3 * abs(args.r_eff)
        if args.R_max is None:
            args.R_max = 1e2 * abs(args.r_eff)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args.argv = argv
        _fill_defaults(args)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    except (InputError, feshbach.CatalogError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ra.RegimeError, twobody.TuningError) as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (FloatingPointError, ZeroDivisionError, zrp.BracketError, zrp.BranchJumpError,
            ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
