"""Rate scans over a at fixed r_eff, peak location and the (alpha, beta) fit.

Peaks of the narrow boson rates are log-periodic in ``u = s0 ln|a/r_eff|``.
Because the scaled rate has the form ``C / (sin^2(u + c) + sinh^2 eta)``,
its inverse is exactly ``p + q cos 2u + r sin 2u``. Each sampled local
maximum is refined by a linear least-squares fit of that form to the points
within half a period around it; this resolves peaks far narrower than the
grid spacing.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import rates_analytic as ra
from . import rates_numeric as rn
from .units import three_body_reduced_mass
from .zrp import S0

SYSTEMS = {
    # cli name -> (oracle system, analytic function, l, sign of a, a power in the scaling)
    "boson_recomb_neg_a": ("boson_recomb", ra.k3_neg_a_narrow, ra.L_RECOMB, -1, 4),
    "boson_relax_pos_a": ("boson_relax", ra.vrel_boson_narrow, ra.L_RELAX, 1, 1),
    "fermion_relax": ("fermion_relax", ra.vrel_fermion_narrow, ra.L_RELAX, 1, 1),
}
ENGINES = ("analytic", "numeric", "both")


@dataclass(frozen=True)
class ScanSpec:
    system: str
    a_grid: tuple
    r_eff: float
    alpha: float
    beta: float
    A: ra.ShortRangeParams
    r0: float
    m: float
    k: float = None
    kba: float = 1e-3
    regime_ratio: float = ra.REGIME_RATIO

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}; expected one of {tuple(SYSTEMS)}")
        grid = np.asarray(self.a_grid, dtype=float)
        if grid.size == 0:
            raise ValueError("empty a grid")
        d = np.diff(grid)
        if grid.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("a grid must be strictly monotone")
        sign = SYSTEMS[self.system][3]
        if np.any(np.sign(grid) != sign):
            raise ValueError(f"{self.system} needs a {'> 0' if sign > 0 else '< 0'}")


def log_period_grid(a_start, n, periods=1.0, s0=S0, endpoint=False):
    """``n`` points spaced uniformly in ``ln|a|`` across ``periods`` log-periods."""
    sign = math.copysign(1.0, a_start)
    u = np.linspace(0.0, periods * math.pi, n, endpoint=endpoint)
    return sign * abs(a_start) * np.exp(u / s0)


def _spec_at(spec, a):
    _, _, l, _, _ = SYSTEMS[spec.system]
    return ra.NarrowSpec(a=float(a), r_eff=spec.r_eff, alpha=spec.alpha, beta=spec.beta,
                         A=spec.A, l=l, m=spec.m, r0=spec.r0, regime_ratio=spec.regime_ratio)


def scaled_rate(system, rate, a, r_eff):
    """``rate |r_eff| / |a|^n`` with ``n`` = 4 for recombination, 1 for relaxation."""
    power = SYSTEMS[system][4]
    return rate * abs(r_eff) / abs(a) ** power


def run_scan(spec, engine="analytic", h=rn.DEFAULT_STEP):
    """One row per grid point, in grid order.

    Rows carry ``a``, ``abs_a_over_reff``, ``u``, ``rate``, ``scaled_rate`` and
    ``regime`` (``ok`` or ``out``); with ``engine='both'`` they also carry the
    two engines' rates and their relative difference.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    oracle_system, analytic_fn, _, _, _ = SYSTEMS[spec.system]
    mu = three_body_reduced_mass(spec.m)
    rows = []
    for a in np.asarray(spec.a_grid, dtype=float):
        ns = _spec_at(spec, a)
        ok = ra.regime_ok(ns)
        row = {"a": float(a), "abs_a_over_reff": abs(a / spec.r_eff),
               "u": S0 * math.log(abs(a / spec.r_eff))}
        rate_a = rate_n = None
        if engine in ("analytic", "both"):
            rate_a = analytic_fn(ns, check_regime=False)
        if engine in ("numeric", "both"):
            ch = rn.build_channel(oracle_system, a, spec.r_eff, spec.alpha, spec.beta, spec.A,
                                  mu, spec.m / 2, spec.r0)
            k = spec.k if spec.k is not None else spec.kba / ch.R2
            rate_n = rn.numeric_rate(ch, k, h)
            if k * ch.R2 > ra.MAX_K_BETA_A:
                ok = False
        rate = rate_a if engine == "analytic" else rate_n
        row["rate"] = rate
        row["scaled_rate"] = scaled_rate(spec.system, rate, a, spec.r_eff)
        if engine == "both":
            row["rate_analytic"] = rate_a
            row["rate_numeric"] = rate_n
            row["rel_diff"] = (rate_n / rate_a - 1.0) if rate_a else (0.0 if rate_n == 0 else math.inf)
        row["regime"] = "ok" if ok else "out"
        rows.append(row)
    return rows


def _fit_inverse_sinusoid(u, y):
    inv = 1.0 / np.asarray(y, dtype=float)
    design = np.column_stack([np.ones_like(u), np.cos(2 * u), np.sin(2 * u)])
    coef, *_ = np.linalg.lstsq(design, inv, rcond=None)
    resid = inv - design @ coef
    rel = float(np.sqrt(np.mean(resid ** 2)) / np.mean(np.abs(inv)))
    return coef, rel


def locate_peaks(u, y, min_points=5):
    """Peak positions in ``u`` of a log-periodic, positive curve ``y(u)``.

    Returns ``(peaks, residuals)``. Every interior sampled maximum is refined
    with the inverse-sinusoid fit on the samples within ``pi/2`` of it.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(u)
    u, y = u[order], y[order]
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("peak location needs a positive, finite curve")
    peaks, residuals = [], []
    for i in range(1, len(u) - 1):
        if not (y[i] > y[i - 1] and y[i] >= y[i + 1]):
            continue
        sel = np.abs(u - u[i]) <= math.pi / 2
        if sel.sum() < min_points:
            continue
        (p, q, r), rel = _fit_inverse_sinusoid(u[sel], y[sel])
        # minimum of p + rho cos(2u - psi) sits at 2u = psi + pi (mod 2 pi)
        psi = math.atan2(r, q)
        base = 0.5 * (psi + math.pi)
        peak = base + math.pi * round((u[i] - base) / math.pi)
        peaks.append(peak)
        residuals.append(rel)
    return peaks, residuals


@dataclass(frozen=True)
class PeakFit:
    peak_positions: dict
    alpha_fit: float
    beta_fit: float
    residual: float
    pair_fits: list = field(default_factory=list)
    alpha_large_reff: float = float("nan")
    beta_large_reff: float = float("nan")
    alpha_extrapolated: float = float("nan")
    beta_extrapolated: float = float("nan")


def _wrap(x):
    # to (-pi/2, pi/2]
    return x - math.pi * np.round(x / math.pi)


def _peak_residuals(params, data, A, l, s0):
    alpha, beta = np.exp(params)
    res = []
    p0 = ra.phi0(l, s0)
    for r_eff, peaks in data:
        Phi = ra.phi_narrow(A, r_eff, alpha, s0)
        vphi = ra.varphi(alpha, beta, s0, p0)
        for u in peaks:
            res.append(_wrap(u + Phi + vphi))
    return np.asarray(res)


def _phi_log_alpha_derivative(A, r_eff, alpha, s0):
    y = A.A_re / abs(r_eff)
    den = alpha + y
    if den == 0:
        return math.inf
    ratio = (alpha - y) / den
    return 4 * s0 * alpha * y / den ** 2 / (1 + (2 * s0 * ratio) ** 2)


def _fit_subset(data, A, l, s0, x0):
    n_peaks = sum(len(p) for _, p in data)
    if n_peaks < 2:
        raise ValueError("fewer peaks than unknowns (alpha, beta)")
    sol = least_squares(_peak_residuals, np.log(x0), args=(data, A, l, s0),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    alpha, beta = np.exp(sol.x)
    resid = float(np.sqrt(np.mean(sol.fun ** 2)))
    return float(alpha), float(beta), resid, sol


def fit_alpha_beta(peaks_by_reff, A, l, s0=S0, x0=(1.0, 1.0), min_sensitivity=1e-6):
    """Fit (alpha, beta) to peak positions measured at several ``r_eff``.

    ``peaks_by_reff`` maps ``r_eff`` to a list of peak positions in
    ``s0 ln|a/r_eff|``. The peak condition is
    ``u + Phi(alpha, r_eff) + s0 ln(beta/alpha) + phi0(l) = n pi``.
    Only ``beta/alpha`` is constrained unless ``Re A / |r_eff|`` is
    appreciable, since ``Phi`` depends on ``alpha`` through that ratio; an
    unidentifiable ``alpha`` raises ``ValueError``.

    Besides the global fit, each pair of neighbouring ``r_eff`` values is fit
    on its own; the pair with the largest ``|r_eff|`` and a linear
    extrapolation of the pair fits in ``1/|r_eff|`` are both reported.
    """
    data = sorted(((float(r), list(p)) for r, p in peaks_by_reff.items()), key=lambda t: abs(t[0]))
    if len(data) < 2:
        raise ValueError("need peaks from at least two r_eff values")
    if any(len(p) < 1 for _, p in data):
        raise ValueError("every r_eff needs at least one peak")
    alpha, beta, resid, _ = _fit_subset(data, A, l, s0, x0)
    # at fixed beta/alpha only Phi responds to alpha
    if max(abs(_phi_log_alpha_derivative(A, r, alpha, s0)) for r, _ in data) < min_sensitivity:
        raise ValueError("alpha is not identifiable: Re A / |r_eff| is negligible on all curves")
    pairs = []
    for (r1, p1), (r2, p2) in zip(data[:-1], data[1:]):
        a_i, b_i, res_i, _ = _fit_subset([(r1, p1), (r2, p2)], A, l, s0, (alpha, beta))
        pairs.append({"r_eff_pair": (r1, r2), "alpha": a_i, "beta": b_i, "residual": res_i})
    a_large, b_large = pairs[-1]["alpha"], pairs[-1]["beta"]
    if len(pairs) >= 2:
        x = np.array([2.0 / (abs(p["r_eff_pair"][0]) + abs(p["r_eff_pair"][1])) for p in pairs])
        a_ex = float(np.polyval(np.polyfit(x, [p["alpha"] for p in pairs], 1), 0.0))
        b_ex = float(np.polyval(np.polyfit(x, [p["beta"] for p in pairs], 1), 0.0))
    else:
        a_ex, b_ex = a_large, b_large
    return PeakFit(peak_positions={r: p for r, p in data}, alpha_fit=alpha, beta_fit=beta,
                   residual=resid, pair_fits=pairs, alpha_large_reff=a_large,
                   beta_large_reff=b_large, alpha_extrapolated=a_ex, beta_extrapolated=b_ex)


def peak_spacings(peaks):
    return np.diff(np.sort(np.asarray(peaks, dtype=float)))
