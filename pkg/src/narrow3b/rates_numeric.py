"""Numeric oracle for the three-region hyperradial model.

A single channel with a piecewise potential::

    0                            r0 < R < R1 = alpha |r_eff|
    -(s0^2 + 1/4)/(2 mu R^2)     R1 < R < R2 = beta |a|    (bosons)
    +(p0^2 - 1/4)/(2 mu R^2)     R1 < R < R2               (fermions)
    E_nu + l(l+1)/(2 mu R^2)     R > R2

is solved with an absorbing boundary condition at ``r0``: the inner
solution is ``sin(k (R - A))`` with complex ``A``. The wavenumber ``k`` is
the same in every region, i.e. each branch is measured from the channel
threshold ``E_nu``.

Propagation runs in ``x = ln R`` on ``F = sqrt(R) g`` where ``g'' = Q g``.
Each step is a fourth-order Magnus exponential built from ``Q`` at the two
Gauss points. It is a real Moebius map of the log-derivative ``y = g'/g`` with unit
determinant. The imaginary part is then carried separately as
``Im y / |den|^2`` and keeps full relative precision even when it is
sixteen orders of magnitude below the real part (fermions behind the
barrier).
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import jv, jvp, yv, yvp

from .rates_analytic import L_RECOMB, L_RELAX, ShortRangeParams
from .units import three_body_reduced_mass
from .zrp import P0, S0

SYSTEMS = ("boson_recomb", "boson_relax", "fermion_relax")
MIDDLE_KINDS = ("boson", "fermion", "free")
DEFAULT_STEP = 0.01
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class PiecewiseChannel:
    r0: float
    R1: float
    R2: float
    middle: str
    l: float
    E_nu: float
    A: ShortRangeParams
    mu: float
    s0: float = S0
    p0: float = P0

    def __post_init__(self):
        if self.middle not in MIDDLE_KINDS:
            raise ValueError(f"unknown middle branch {self.middle!r}")
        if not 0 < self.r0 <= self.R1 <= self.R2:
            raise ValueError(f"need 0 < r0 <= R1 <= R2, got {self.r0}, {self.R1}, {self.R2}")
        if self.mu <= 0:
            raise ValueError("mu must be positive")

    @property
    def middle_coefficient(self):
        """``2 mu R^2 W`` in the middle branch."""
        if self.middle == "boson":
            return -(self.s0 ** 2 + 0.25)
        if self.middle == "fermion":
            return self.p0 ** 2 - 0.25
        return 0.0

    def potential(self, R):
        R = np.asarray(R, dtype=float)
        out = np.zeros_like(R)
        mid = (R > self.R1) & (R <= self.R2)
        out[mid] = self.middle_coefficient / (2 * self.mu * R[mid] ** 2)
        outer = R > self.R2
        out[outer] = self.E_nu + self.l * (self.l + 1) / (2 * self.mu * R[outer] ** 2)
        return out if out.ndim else float(out)

    def k_of_energy(self, E):
        if not E > self.E_nu:
            raise ValueError(f"E={E:g} must lie above the threshold E_nu={self.E_nu:g}")
        return math.sqrt(2 * self.mu * (E - self.E_nu))

    def energy_of_k(self, k):
        return self.E_nu + k * k / (2 * self.mu)


@dataclass(frozen=True)
class ScatterResult:
    tan_delta: complex
    R_coeff: float
    one_minus_R: float
    k: float = float("nan")


def build_channel(system, a, r_eff, alpha, beta, A, mu, mu2, r0, s0=S0, p0=P0):
    """Piecewise channel for one of the three supported processes."""
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")
    R1, R2 = alpha * abs(r_eff), beta * abs(a)
    if not r0 < R1 < R2:
        raise ValueError(f"need r0 < alpha|r_eff| < beta|a|, got {r0:g}, {R1:g}, {R2:g}")
    if system == "boson_recomb":
        if a >= 0:
            raise ValueError("recombination channel is built for a < 0")
        return PiecewiseChannel(r0, R1, R2, "boson", L_RECOMB, 0.0, A, mu, s0, p0)
    if a <= 0:
        raise ValueError("relaxation needs a > 0")
    E_nu = -1.0 / (2.0 * mu2 * a * a)
    middle = "boson" if system == "boson_relax" else "fermion"
    return PiecewiseChannel(r0, R1, R2, middle, L_RELAX, E_nu, A, mu, s0, p0)


@njit(cache=True)
def _mobius(a, b, c, d, u, v):
    # (a y + b)/(c y + d) for y = u + i v, real coefficients, ad - bc = 1
    re_den = c * u + d
    im_den = c * v
    n2 = re_den * re_den + im_den * im_den
    re_num = a * u + b
    im_num = a * v
    re = (re_num * re_den + im_num * im_den) / n2
    im = v / n2
    return re, im


@njit(cache=True)
def _magnus_step(q1, q2, h):
    # fourth-order Magnus transfer of (g, g') for g'' = Q g, with Q sampled at
    # the two Gauss points; returns m11, m12, m21, m22 with unit determinant
    qbar = 0.5 * (q1 + q2)
    d = SQRT3 * h * h / 12.0 * (q1 - q2)
    th2 = d * d + h * h * qbar
    if th2 > 0:
        th = math.sqrt(th2)
        ch = math.cosh(th)
        sh = math.sinh(th) / th
    elif th2 < 0:
        th = math.sqrt(-th2)
        ch = math.cos(th)
        sh = math.sin(th) / th
    else:
        ch, sh = 1.0, 1.0
    return ch + d * sh, h * sh, h * qbar * sh, ch - d * sh


@njit(cache=True)
def _propagate_branch(u, v, inverted, x0, x1, q0, k2, h_target):
    """Carry y = g'/g (or 1/y when ``inverted``) from x0 to x1.

    Inside the branch ``Q(x) = q0 - k2 exp(2x)``.
    """
    n = max(1, int(math.ceil((x1 - x0) / h_target)))
    h = (x1 - x0) / n
    g1 = 0.5 - SQRT3 / 6.0
    g2 = 0.5 + SQRT3 / 6.0
    for j in range(n):
        xa = x0 + j * h
        q1 = q0 - k2 * math.exp(2 * (xa + g1 * h))
        q2 = q0 - k2 * math.exp(2 * (xa + g2 * h))
        m11, m12, m21, m22 = _magnus_step(q1, q2, h)
        if not inverted:
            u, v = _mobius(m22, m21, m12, m11, u, v)
        else:
            u, v = _mobius(m11, m12, m21, m22, u, v)
        mag2 = u * u + v * v
        if mag2 > 1.0:
            u, v = u / mag2, -v / mag2
            inverted = not inverted
    return u, v, inverted


def _initial_state(kr0, re, im):
    # y = k r0 cot(z) - 1/2 at z = re + i im, or its inverse when |y| > 1;
    # imaginary parts are formed without cancellation
    sin2, cos2 = math.sin(2 * re), math.cos(2 * re)
    sh2, ch2 = math.sinh(2 * im), math.cosh(2 * im)
    if math.sin(re) ** 2 + math.sinh(im) ** 2 >= math.cos(re) ** 2 + math.sinh(im) ** 2:
        den = ch2 - cos2
        u, v = kr0 * sin2 / den - 0.5, -kr0 * sh2 / den
        if u * u + v * v <= 1.0:
            return u, v, False
        mag2 = u * u + v * v
        return u / mag2, -v / mag2, True
    # tan z = t, 1/y = t/(k r0 - t/2), a real Moebius map with determinant k r0
    den = ch2 + cos2
    tr, ti = sin2 / den, sh2 / den
    dr, di = kr0 - 0.5 * tr, -0.5 * ti
    n2 = dr * dr + di * di
    wr = (tr * dr + ti * di) / n2
    wi = kr0 * ti / n2
    if wr * wr + wi * wi <= 1.0:
        return wr, wi, True
    mag2 = wr * wr + wi * wi
    return wr / mag2, -wi / mag2, False


def _branch_q(channel, branch):
    if branch == "inner":
        return 0.25
    if branch == "middle":
        return channel.middle_coefficient + 0.25
    return (channel.l + 0.5) ** 2


def propagate(channel, E, h=DEFAULT_STEP, R_match=None):
    """Log-derivative ``F'/F`` just outside the last branch boundary.

    ``h`` is the step in ``ln R``; the branch boundaries are always grid
    nodes. ``R_match`` (default ``R2``) may lie further out, in which case
    the outer branch is propagated too.
    """
    k = channel.k_of_energy(E)
    return _propagate_k(channel, k, h, R_match)


def _propagate_k(channel, k, h=DEFAULT_STEP, R_match=None):
    if R_match is None:
        R_match = channel.R2
    if R_match < channel.R2:
        raise ValueError("R_match must not lie inside R2")
    A = channel.A
    # F = sin(k (R - A)) at r0; R F'/F = k R cot(k (R - A))
    u, v, inverted = _initial_state(k * channel.r0, k * (channel.r0 - A.A_re), k * A.A_im)
    k2 = k * k
    nodes = [
        (math.log(channel.r0), math.log(channel.R1), _branch_q(channel, "inner")),
        (math.log(channel.R1), math.log(channel.R2), _branch_q(channel, "middle")),
        (math.log(channel.R2), math.log(R_match), _branch_q(channel, "outer")),
    ]
    for x0, x1, q0 in nodes:
        if x1 > x0:
            u, v, inverted = _propagate_branch(u, v, inverted, x0, x1, q0, k2, h)
    if inverted:
        mag2 = u * u + v * v
        if mag2 == 0:
            raise FloatingPointError("log-derivative is infinite at the matching radius")
        u, v = u / mag2, -v / mag2
    # R F'/F = 1/2 + y
    return complex((0.5 + u) / R_match, v / R_match)


def extract_tandelta(logderiv, l, k_out, R_match):
    """Match ``F'/F`` to ``sqrt(R) [J_nu(kR) - tan(delta) Y_nu(kR)]``.

    ``nu = l + 1/2``. The imaginary part of ``tan(delta)`` follows from the
    Wronskian, so it is as precise as the imaginary part of ``logderiv``.
    """
    nu = l + 0.5
    x = k_out * R_match
    y = R_match * logderiv - 0.5
    u, v = y.real, y.imag
    J, Y = jv(nu, x), yv(nu, x)
    dJ, dY = x * jvp(nu, x), x * yvp(nu, x)
    # t = (dJ - y J)/(dY - y Y)
    re_den = dY - u * Y
    im_den = -v * Y
    n2 = re_den ** 2 + im_den ** 2
    if n2 == 0 or not math.isfinite(n2):
        raise ZeroDivisionError("matching matrix is singular at this radius")
    re_num = dJ - u * J
    im_num = -v * J
    t_re = (re_num * re_den + im_num * im_den) / n2
    # J Y' - J' Y = 2/(pi x)
    t_im = -(2.0 / math.pi) * v / n2
    return complex(t_re, t_im)


def reflection(tan_delta, k=float("nan")):
    """Elastic probability ``|(1 + i t)/(1 - i t)|^2`` and its complement."""
    t = complex(tan_delta)
    den = abs(1 - 1j * t) ** 2
    if den == 0:
        raise ZeroDivisionError("tan(delta) = -i: total absorption pole")
    one_minus = 4.0 * t.imag / den
    return ScatterResult(tan_delta=t, R_coeff=abs(1 + 1j * t) ** 2 / den,
                         one_minus_R=one_minus, k=k)


def rate_from_probability(result, process, mu, k):
    """``pi/(mu k) (1-R)`` for relaxation, ``192 pi^2/(mu k^4) (1-R)`` for recombination."""
    if not k > 0:
        raise ValueError("k must be positive")
    if process == "relaxation":
        return math.pi / (mu * k) * result.one_minus_R
    if process == "recombination":
        return 192 * math.pi ** 2 / (mu * k ** 4) * result.one_minus_R
    raise ValueError(f"unknown process {process!r}")


def scatter(channel, k, h=DEFAULT_STEP, R_match=None):
    """Propagate, match and return the :class:`ScatterResult` at wavenumber ``k``."""
    R_match = channel.R2 if R_match is None else R_match
    ld = _propagate_k(channel, k, h, R_match)
    return reflection(extract_tandelta(ld, channel.l, k, R_match), k)


def numeric_rate(channel, k, h=DEFAULT_STEP):
    process = "recombination" if channel.l == L_RECOMB else "relaxation"
    return rate_from_probability(scatter(channel, k, h), process, channel.mu, k)


def narrow_rate(system, a, r_eff, alpha, beta, A, m, r0, k=None, kba=1e-3, h=DEFAULT_STEP):
    """Rate of ``system`` from the oracle, with atom mass ``m``.

    ``k`` defaults to ``kba / (beta |a|)``.
    """
    mu = three_body_reduced_mass(m)
    ch = build_channel(system, a, r_eff, alpha, beta, A, mu, m / 2, r0)
    if k is None:
        k = kba / ch.R2
    return numeric_rate(ch, k, h)


@dataclass(frozen=True)
class ThresholdFit:
    exponent: float
    residual: float


def threshold_scan(channel, k_list, h=DEFAULT_STEP, residual_threshold=1e-2):
    """Log-log slope of ``1 - R`` against ``k``."""
    k_list = np.asarray(k_list, dtype=float)
    if k_list.size < 4 or k_list.max() / k_list.min() < 10:
        raise ValueError("need at least 4 k values spanning a decade")
    p = np.array([scatter(channel, float(k), h).one_minus_R for k in k_list])
    if np.any(p <= 0):
        raise ValueError("1 - R must be positive for a threshold fit")
    lx, ly = np.log(k_list), np.log(p)
    coef = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - np.polyval(coef, lx)) ** 2)))
    if resid > residual_threshold:
        raise ValueError(f"threshold fit residual {resid:.3g} exceeds {residual_threshold:g}")
    return ThresholdFit(exponent=float(coef[0]), residual=resid)
