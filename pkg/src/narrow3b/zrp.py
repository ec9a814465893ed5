"""Zero-range-potential model for three identical bosons at finite r_eff.

The hyperangular problem with an energy-dependent contact condition reduces
to one transcendental equation for the channel exponent ``s`` at each
hyperradius ``R``::

    s cosh(pi s/2) - (8/sqrt3) sinh(pi s/6)
        = 12**(-1/4) sinh(pi s/2) (2R/a + (r_eff/R) s^2)

It is solved in ``z = s^2`` as a real variable. For ``z < 0`` the same
function is evaluated in its trigonometric form (``s = i p``), so imaginary
exponents never appear explicitly. The lowest adiabatic channel is the
largest root.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

SQRT3 = math.sqrt(3.0)
COUPLING = 12.0 ** -0.25
# fermionic barrier exponent; pinned rather than solved
P0 = 2.166

S_SQUARED_TOL = 1e-12
MAX_RELATIVE_JUMP = 0.5


class BracketError(RuntimeError):
    pass


class BranchJumpError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChannelExponent:
    R: float
    s_squared: float


@dataclass(frozen=True)
class ZrpPotentialPoint:
    R: float
    U: float
    W00: float
    s_squared: float


@dataclass(frozen=True)
class C0Fit:
    c0: float
    residual: float
    window: tuple


def _unitarity_function(s):
    return s * math.cosh(math.pi * s / 2) - 8.0 / SQRT3 * math.sinh(math.pi * s / 6)


def efimov_root_unitarity():
    """Efimov exponent s0 at ``1/a = 0`` and ``r_eff = 0``.

    ``s = 0`` is a trivial root of the defining function, so the search is
    bracketed away from it on [0.9, 1.1].
    """
    return brentq(_unitarity_function, 0.9, 1.1, xtol=1e-15, rtol=4 * np.finfo(float).eps)


S0 = efimov_root_unitarity()


def _rhs_factor(R, inv_a, r_eff, z):
    return 2.0 * R * inv_a + (r_eff / R) * z


def channel_function(z, R, inv_a, r_eff):
    """Transcendental function in ``z = s^2``, scaled to stay finite.

    For ``z > 0`` the equation is divided by ``s cosh(pi s/2)``; for
    ``z <= 0`` it is divided by ``s`` only (the continued form). Both pieces
    agree at ``z = 0`` and keep the roots of the original equation.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z > 0
    if np.any(pos):
        s = np.sqrt(z[pos])
        ch = np.cosh(np.minimum(math.pi * s / 2, 700.0))
        # sinh(pi s/6)/cosh(pi s/2) without overflow
        ratio = np.where(
            s < 400,
            np.sinh(np.minimum(math.pi * s / 6, 700.0)) / ch,
            np.exp(-math.pi * s / 3),
        )
        out[pos] = (1.0 - 8.0 / SQRT3 * ratio / s
                    - COUPLING * np.tanh(math.pi * s / 2) / s * _rhs_factor(R, inv_a, r_eff, z[pos]))
    neg = ~pos
    if np.any(neg):
        p = np.sqrt(-z[neg])
        small = p < 1e-8
        p_safe = np.where(small, 1.0, p)
        sin6 = np.where(small, math.pi / 6, np.sin(math.pi * p_safe / 6) / p_safe)
        sin2 = np.where(small, math.pi / 2, np.sin(math.pi * p_safe / 2) / p_safe)
        out[neg] = (np.cos(math.pi * p / 2) - 8.0 / SQRT3 * sin6
                    - COUPLING * sin2 * _rhs_factor(R, inv_a, r_eff, z[neg]))
    return out if out.ndim else float(out)


def _inverse_length(a):
    if a is None or math.isinf(a):
        return 0.0
    if a == 0:
        raise ValueError("a = 0 is not allowed; pass math.inf for 1/a = 0")
    return 1.0 / a


def _all_roots(R, inv_a, r_eff, n_scan=1200):
    # the lowest channel always lies above z = -4 (the lambda = 0 free value)
    x = COUPLING * 2.0 * R * abs(inv_a)
    s_max = max(6.0, 4.0 * x + 4.0)
    s = np.linspace(0.0, s_max, n_scan)[1:]
    p = np.linspace(0.0, 2.0, n_scan // 4)[::-1]
    z = np.concatenate([-(p ** 2), s ** 2])
    g = channel_function(z, R, inv_a, r_eff)
    if g[-1] <= 0:
        raise BracketError(
            f"no sign change above z={z[-1]:.6g} at R={R:g}; scanned [{z[0]:g}, {z[-1]:g}]")
    idx = np.nonzero(np.sign(g[:-1]) != np.sign(g[1:]))[0]
    roots = []
    for i in idx:
        lo, hi = z[i], z[i + 1]
        roots.append(brentq(lambda t: channel_function(t, R, inv_a, r_eff), lo, hi,
                            xtol=S_SQUARED_TOL, rtol=4 * np.finfo(float).eps))
    return roots, (float(z[0]), float(z[-1]))


def solve_s_at(R, a, r_eff, prev=None, max_jump=MAX_RELATIVE_JUMP):
    """Lowest-channel ``s^2`` at hyperradius ``R``.

    ``a = math.inf`` selects ``1/a = 0``. With ``prev`` (the ``s^2`` of the
    previous point in a scan) a jump larger than ``max_jump * (1 + |prev|)``
    raises :class:`BranchJumpError`.
    """
    if not R > 0:
        raise ValueError(f"R must be positive, got {R!r}")
    if r_eff > 0:
        raise ValueError(f"r_eff must be <= 0, got {r_eff!r}")
    inv_a = _inverse_length(a)
    roots, scanned = _all_roots(R, inv_a, r_eff)
    if not roots:
        raise BracketError(f"no root found at R={R:g} on z in {scanned}")
    z = max(roots)
    if prev is not None and abs(z - prev) > max_jump * (1.0 + abs(prev)):
        raise BranchJumpError(f"s^2 jumped from {prev:.6g} to {z:.6g} at R={R:g}")
    return ChannelExponent(R=R, s_squared=float(z))


def solve_s_scan(R_grid, a, r_eff, max_jump=MAX_RELATIVE_JUMP):
    """Ordered scan of :func:`solve_s_at` with branch-continuity checks."""
    R_grid = np.asarray(R_grid, dtype=float)
    if R_grid.size > 1 and not (np.all(np.diff(R_grid) > 0) or np.all(np.diff(R_grid) < 0)):
        raise ValueError("R grid must be strictly monotone")
    out = []
    prev = None
    for R in R_grid:
        ce = solve_s_at(float(R), a, r_eff, prev=prev, max_jump=max_jump)
        out.append(ce)
        prev = ce.s_squared
    return out


def zrp_potentials(R, a, r_eff, mu, prev=None):
    """Adiabatic potential ``U`` and ``W00`` (equal in this model) at ``R``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    ce = solve_s_at(R, a, r_eff, prev=prev)
    U = -(ce.s_squared + 0.25) / (2.0 * mu * R * R)
    return ZrpPotentialPoint(R=R, U=U, W00=U, s_squared=ce.s_squared)


def fit_c0(r_eff, fit_window=None, n_points=21, residual_threshold=1e-3):
    """Coefficient of the Coulomb-like correction at ``1/a = 0``.

    Fits ``2 mu R^2 W00 + 1/4 = -s^2`` against ``-c0 x - c1 x^2`` with
    ``x = R/|r_eff|`` on log-spaced ``R`` in ``fit_window``, which defaults
    to ``[1e-3, 1e-2] |r_eff|``. The quadratic term only soaks up curvature
    so that ``c0`` is the leading slope. ``residual`` is the RMS misfit
    relative to the RMS of the data; windows outside ``R << |r_eff|`` show
    up there.
    """
    if not r_eff < 0:
        raise ValueError("r_eff must be negative")
    if fit_window is None:
        fit_window = (1e-3 * abs(r_eff), 1e-2 * abs(r_eff))
    lo, hi = fit_window
    if not 0 < lo < hi:
        raise ValueError(f"bad fit window {fit_window!r}")
    R = np.geomspace(lo, hi, n_points)
    z = np.array([c.s_squared for c in solve_s_scan(R, math.inf, r_eff)])
    x = R / abs(r_eff)
    design = np.column_stack([x, x * x])
    coef, *_ = np.linalg.lstsq(design, z, rcond=None)
    c0 = float(coef[0])
    residual = float(np.sqrt(np.mean((z - design @ coef) ** 2) / np.mean(z ** 2)))
    if residual > residual_threshold:
        raise ValueError(
            f"window {fit_window} is outside the asymptotic regime (residual {residual:.3g})")
    return C0Fit(c0=c0, residual=residual, window=(float(lo), float(hi)))


def free_channel_potential(lam, R, mu):
    """Large-R potential of the ``lam``-th free three-atom channel."""
    if lam < 0 or int(lam) != lam:
        raise ValueError(f"lambda must be a non-negative integer, got {lam!r}")
    if not R > 0:
        raise ValueError("R must be positive")
    return (lam * (lam + 4) + 3.75) / (2.0 * mu * R * R)
