"""Physical constants and the few unit conversions the package needs.

Everything downstream works in Hartree atomic units. Conversions from
lab units (amu, gauss, Bohr magnetons) happen only here, at the catalog
and CLI boundary.

Values are CODATA 2018, pinned as literals so golden outputs never drift
with whatever ``scipy.constants`` ships.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    # m_u / m_e
    amu_in_electron_masses: float = 1822.888486209
    # mu_B = e hbar / 2 m_e = 1/2 in atomic units
    bohr_magneton_au: float = 0.5
    # 1 G = 1e-4 T; atomic unit of magnetic flux density = 2.35051756758e5 T
    gauss_in_au_field: float = 1.0e-4 / 2.35051756758e5


CODATA = PhysicalConstants()


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite input: {v!r}")


def amu_to_au(mass_amu, constants=CODATA):
    """Mass in unified atomic mass units -> electron masses."""
    _check_finite(mass_amu)
    if mass_amu <= 0:
        raise ValueError(f"mass must be positive, got {mass_amu!r}")
    return mass_amu * constants.amu_in_electron_masses


def au_to_amu(mass_au, constants=CODATA):
    _check_finite(mass_au)
    if mass_au <= 0:
        raise ValueError(f"mass must be positive, got {mass_au!r}")
    return mass_au / constants.amu_in_electron_masses


def gauss_to_au(field_gauss, constants=CODATA):
    _check_finite(field_gauss)
    return field_gauss * constants.gauss_in_au_field


def au_to_gauss(field_au, constants=CODATA):
    _check_finite(field_au)
    return field_au / constants.gauss_in_au_field


def moment_field_product_to_au(delta_mu_in_muB, delta_B_gauss, constants=CODATA):
    """Energy scale ``delta_mu * delta_B`` in Hartree.

    ``delta_mu_in_muB`` is a magnetic-moment difference in Bohr magnetons,
    ``delta_B_gauss`` a resonance width in gauss. Signs are kept; callers that
    need a magnitude take ``abs`` themselves.
    """
    _check_finite(delta_mu_in_muB, delta_B_gauss)
    return (delta_mu_in_muB * constants.bohr_magneton_au
            * delta_B_gauss * constants.gauss_in_au_field)


def reduced_mass(m1, m2):
    return m1 * m2 / (m1 + m2)


def three_body_reduced_mass(m):
    """Hyperradial reduced mass for three identical atoms of mass ``m``."""
    return m / math.sqrt(3.0)
