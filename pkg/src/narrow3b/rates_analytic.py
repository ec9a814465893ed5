"""Closed-form three-body loss rates, broad and narrow resonances.

All rates are in atomic units with the atom mass ``m``. The narrow-resonance
forms come from a three-region hyperradial model: free motion inside
``alpha |r_eff|``, an Efimov (bosons) or repulsive (fermions) ``1/R^2``
region out to ``beta |a|``, and the asymptotic channel beyond. Short-range
physics enters through the complex three-body scattering length
``A = A_re - i A_im`` with ``A_im >= 0`` for absorption.

The broad-resonance forms use the fitted universal coefficients 67.1, 4590
and 20.3 and the phase offsets 1.53 and 1.47.
"""

import math
from dataclasses import dataclass, field

from scipy.special import gamma

from .zrp import P0, S0

REGIME_RATIO = 10.0
MAX_K_BETA_A = 0.1

K3_BROAD_POS_COEFF = 67.1
K3_BROAD_NEG_COEFF = 4590.0
VREL_BROAD_COEFF = 20.3
OFFSET_RECOMB = 1.53
OFFSET_RELAX = 1.47

L_RELAX = 0.0
L_RECOMB = 1.5


class RegimeError(ValueError):
    pass


@dataclass(frozen=True)
class ShortRangeParams:
    A_re: float
    A_im: float = 0.0

    def __post_init__(self):
        if self.A_im < 0:
            raise ValueError("A_im is the magnitude of the absorptive part and must be >= 0")

    @property
    def complex(self):
        return complex(self.A_re, -self.A_im)


@dataclass(frozen=True)
class BroadParams:
    Phi: float
    eta: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")


@dataclass(frozen=True)
class NarrowSpec:
    """Everything one narrow-resonance rate evaluation needs.

    ``l`` is the effective angular momentum of the outermost region (0 for
    relaxation, 3/2 for recombination). ``r0`` is optional and only used by
    the regime check.
    """
    a: float
    r_eff: float
    alpha: float
    beta: float
    A: ShortRangeParams
    l: float
    m: float
    s0: float = S0
    p0: float = P0
    r0: float = None
    regime_ratio: float = field(default=REGIME_RATIO, compare=False)

    def __post_init__(self):
        if not self.r_eff < 0:
            raise ValueError("r_eff must be negative")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if self.a == 0 or not math.isfinite(self.a):
            raise ValueError("a must be finite and non-zero")
        if self.m <= 0:
            raise ValueError("mass must be positive")

    @property
    def R1(self):
        return self.alpha * abs(self.r_eff)

    @property
    def R2(self):
        return self.beta * abs(self.a)

    @property
    def in_regime(self):
        return regime_ok(self)


def regime_ok(spec, ratio=None):
    """True when ``r0 << alpha|r_eff| << beta|a|`` with ``<<`` meaning ``ratio``."""
    ratio = spec.regime_ratio if ratio is None else ratio
    ok = spec.R2 >= ratio * spec.R1
    if spec.r0 is not None:
        ok = ok and spec.R1 >= ratio * spec.r0
    return ok


def _require_regime(spec, check):
    if check and not regime_ok(spec):
        raise RegimeError(
            f"outside the narrow regime: r0={spec.r0}, alpha|r_eff|={spec.R1:g}, "
            f"beta|a|={spec.R2:g} (ratio {spec.regime_ratio:g} required)")


def phi0(l, s0=S0):
    return math.atan(s0 / (l + 0.5))


def phi_narrow(A, r_eff, alpha, s0=S0):
    """Short-range phase, principal branch (-pi/2, pi/2].

    The pole of the ratio (``alpha + A_re/|r_eff| = 0``) returns pi/2.
    """
    y = A.A_re / abs(r_eff)
    den = alpha + y
    if den == 0:
        return math.pi / 2
    return math.atan(2.0 * s0 * (alpha - y) / den)


def eta_narrow(A, r_eff, alpha, phi0_value, Phi):
    if not 0 < phi0_value < math.pi / 2:
        raise ValueError("phi0 must lie in (0, pi/2)")
    x = abs(A.A_im / (alpha * r_eff)) / math.sin(2 * phi0_value) * math.sin(Phi + phi0_value) ** 2
    return math.asinh(x)


def varphi(alpha, beta, s0, phi0_value):
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    return s0 * math.log(beta / alpha) + phi0_value


@dataclass(frozen=True)
class NarrowPhases:
    Phi: float
    eta: float
    phi0: float
    varphi: float
    argument: float


def narrow_phases(spec):
    """Phases entering the narrow formulas.

    ``eta`` is built with the phase of the inner free region, which is
    always an s-wave (``l = 0``); ``phi0`` and ``varphi`` belong to the
    outer region with angular momentum ``spec.l``.
    """
    Phi = phi_narrow(spec.A, spec.r_eff, spec.alpha, spec.s0)
    eta = eta_narrow(spec.A, spec.r_eff, spec.alpha, phi0(L_RELAX, spec.s0), Phi)
    p0_outer = phi0(spec.l, spec.s0)
    vphi = varphi(spec.alpha, spec.beta, spec.s0, p0_outer)
    arg = spec.s0 * math.log(abs(spec.a / spec.r_eff)) + Phi + vphi
    return NarrowPhases(Phi=Phi, eta=eta, phi0=p0_outer, varphi=vphi, argument=arg)


def _resonant_factor(ph):
    # sinh(2 eta) / (sin^2 + sinh^2 eta)
    return (math.sin(2 * ph.phi0) * math.sinh(2 * ph.eta)
            / (math.sin(ph.argument) ** 2 + math.sinh(ph.eta) ** 2))


def inelastic_probability(k, spec, max_kba=MAX_K_BETA_A, check_regime=True, clamp=False):
    """Low-energy inelastic probability ``1 - R`` of the three-region model."""
    if not k > 0:
        raise ValueError("k must be positive")
    _require_regime(spec, check_regime)
    x = k * spec.R2
    if x > max_kba:
        raise RegimeError(f"k beta|a| = {x:g} exceeds the low-energy bound {max_kba:g}")
    ph = narrow_phases(spec)
    if ph.eta == 0:
        return 0.0
    l = spec.l
    pref = 2 * math.pi / (gamma(l + 1.5) * gamma(l + 0.5)) * (x / 2) ** (2 * l + 1)
    prob = pref * _resonant_factor(ph)
    if prob > 1:
        if clamp:
            return 1.0
        raise RegimeError(f"inelastic probability {prob:g} exceeds 1; input is out of regime")
    return prob


def vrel_boson_narrow(spec, check_regime=True):
    """Atom-dimer relaxation rate for identical bosons, ``a > 0``."""
    if spec.a <= 0:
        raise ValueError("relaxation needs a > 0")
    if spec.l != L_RELAX:
        raise ValueError("relaxation uses l = 0")
    _require_regime(spec, check_regime)
    ph = narrow_phases(spec)
    if ph.eta == 0:
        return 0.0
    return 2 * math.sqrt(3) * math.pi * spec.beta * _resonant_factor(ph) * spec.a / spec.m


def k3_neg_a_narrow(spec, check_regime=True):
    """Three-body recombination rate for identical bosons, ``a < 0``."""
    if spec.a >= 0:
        raise ValueError("this recombination form needs a < 0")
    if spec.l != L_RECOMB:
        raise ValueError("recombination uses l = 3/2")
    _require_regime(spec, check_regime)
    ph = narrow_phases(spec)
    if ph.eta == 0:
        return 0.0
    return (12 * math.sqrt(3) * math.pi ** 3 * spec.beta ** 4 * _resonant_factor(ph)
            * spec.a ** 4 / spec.m)


def vrel_fermion_narrow(spec, check_regime=True):
    """Relaxation rate for two-component fermions, ``a > 0``.

    The Efimov region is replaced by a repulsive barrier with exponent
    ``p0``; the result falls off as ``a**(1 - 2 p0)``.
    """
    if spec.a <= 0:
        raise ValueError("relaxation needs a > 0")
    _require_regime(spec, check_regime)
    p0 = spec.p0
    if spec.A.A_im == 0:
        return 0.0
    y = spec.A.A_re / spec.R1
    den = ((1 - 4 * p0 ** 2) * y ** 2 + (2 * p0 + 1) ** 2) ** 2
    return (256 * math.pi * math.sqrt(3) * p0 ** 2 * spec.A.A_im / spec.m / den
            * (spec.beta * spec.a / spec.R1) ** (1 - 2 * p0))


def _broad_guard(a, r0, ratio=REGIME_RATIO):
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if abs(a) < ratio * r0:
        raise RegimeError(f"|a|={abs(a):g} is not >> r0={r0:g}")


def k3_broad_pos(a, r0, params, m, s0=S0):
    if a <= 0:
        raise ValueError("needs a > 0")
    _broad_guard(a, r0)
    arg = s0 * math.log(a / r0) + params.Phi
    return (K3_BROAD_POS_COEFF * math.exp(-2 * params.eta)
            * (math.sin(arg) ** 2 + math.sinh(params.eta) ** 2) * a ** 4 / m)


def k3_broad_neg(a, r0, params, m, s0=S0):
    if a >= 0:
        raise ValueError("needs a < 0")
    _broad_guard(a, r0)
    arg = s0 * math.log(abs(a) / r0) + params.Phi + OFFSET_RECOMB
    return (K3_BROAD_NEG_COEFF * math.sinh(2 * params.eta)
            / (math.sin(arg) ** 2 + math.sinh(params.eta) ** 2) * a ** 4 / m)


def vrel_broad(a, r0, params, m, s0=S0):
    if a <= 0:
        raise ValueError("needs a > 0")
    _broad_guard(a, r0)
    arg = s0 * math.log(a / r0) + params.Phi + OFFSET_RELAX
    return (VREL_BROAD_COEFF * math.sinh(2 * params.eta)
            / (math.sin(arg) ** 2 + math.sinh(params.eta) ** 2) * a / m)


def broad_limit_offset(beta, l, s0=S0):
    """Phase offset the narrow argument carries once ``alpha|r_eff| = r0``.

    With ``alpha|r_eff|`` replaced by ``r0`` the narrow argument becomes
    ``s0 ln(|a|/r0) + Phi + s0 ln(beta) + phi0(l)``; the last two terms are
    the offset to compare with the broad forms.
    """
    return s0 * math.log(beta) + phi0(l, s0)


def beta_from_offset(offset, l, s0=S0):
    """Inverse of :func:`broad_limit_offset`."""
    return math.exp((offset - phi0(l, s0)) / s0)
