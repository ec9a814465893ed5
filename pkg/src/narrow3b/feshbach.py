"""Feshbach-resonance catalog and the effective range it implies.

Near an isolated resonance the effective range is fixed by the background
scattering length and the resonance strength::

    r_eff = -1 / |mu2 a_bg delta_mu delta_B|

in atomic units. ``mass_amu`` in the catalog is the mass of one atom, so
``mu2 = mass_amu / 2``. For a mixed pair the column holds ``2 mu2`` (see
:func:`pair_mass_amu`), which keeps that rule uniform.
"""

import csv
import io
import math
import os
from dataclasses import dataclass, fields
from importlib import resources

from .units import CODATA, amu_to_au, moment_field_product_to_au

HEADER = ("species", "position_G", "a_bg_au", "delta_mu_muB", "delta_B_G", "mass_amu", "r0_au")
DITTO = ("''", '"', "")

NARROW_RATIO = 10.0
BROAD_RATIO = 1.0

# atomic masses in amu (AME2020)
ISOTOPE_MASSES = {
    "6Li": 6.0151228874,
    "23Na": 22.989769282,
    "39K": 38.9637064864,
    "52Cr": 51.9405075,
    "87Rb": 86.909180531,
    "133Cs": 132.905451961,
}


class CatalogError(ValueError):
    """Malformed catalog input; ``line`` is 1-based within the file."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ResonanceEntry:
    species: str
    position_G: float
    a_bg: float
    delta_mu_muB: float
    delta_B_G: float
    mass_amu: float
    r0: float


_COLUMN_FOR_FIELD = dict(zip([f.name for f in fields(ResonanceEntry)], HEADER))


def pair_mass_amu(species_a, species_b):
    """``2 mu2`` in amu for two different isotopes."""
    m1, m2 = ISOTOPE_MASSES[species_a], ISOTOPE_MASSES[species_b]
    return 2.0 * m1 * m2 / (m1 + m2)


def reduced_mass_au(entry, constants=CODATA):
    return amu_to_au(entry.mass_amu, constants) / 2.0


def reff_from_resonance(entry, constants=CODATA):
    """Effective range in bohr; always negative."""
    mu2 = reduced_mass_au(entry, constants)
    product = mu2 * entry.a_bg * moment_field_product_to_au(
        entry.delta_mu_muB, entry.delta_B_G, constants)
    if product == 0:
        raise ZeroDivisionError(
            f"{entry.species} {entry.position_G} G: a_bg, delta_mu and delta_B must be non-zero")
    return -1.0 / abs(product)


def classify(entry, computed_reff, narrow_ratio=NARROW_RATIO, broad_ratio=BROAD_RATIO):
    if not entry.r0 > 0:
        raise ValueError("r0 must be positive")
    ratio = abs(computed_reff) / entry.r0
    if ratio >= narrow_ratio:
        return "narrow"
    if ratio <= broad_ratio:
        return "broad"
    return "marginal"


def bundled_catalog_path():
    return resources.files("narrow3b").joinpath("data", "table1.csv")


def _open_source(source):
    if source is None:
        return bundled_catalog_path().read_text(encoding="utf-8")
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source
                                          and os.path.exists(source)):
        with open(source, encoding="utf-8") as fh:
            return fh.read()
    if isinstance(source, str) and "," in source:
        return source
    raise FileNotFoundError(f"catalog not found: {source!r}")


def load_catalog(source=None, lenient=False):
    """Parse a catalog; ``source`` is a path, an open file or CSV text.

    Returns ``(entries, skipped)`` where ``skipped`` lists ``(line, message)``
    for rows dropped in lenient mode. Without ``lenient`` the first bad row
    raises :class:`CatalogError`. Ditto marks in ``r0_au`` repeat the
    previous row's value.
    """
    text = _open_source(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CatalogError("empty catalog: header row missing", 1)
    missing = [h for h in HEADER if h not in header]
    if missing:
        raise CatalogError(f"missing column(s): {', '.join(missing)}", 1)
    col = {h: header.index(h) for h in HEADER}
    entries, skipped = [], []
    prev_r0 = None
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            if len(row) < len(header):
                raise CatalogError(f"expected {len(header)} cells, got {len(row)}", line_no)
            cell = {h: row[col[h]].strip() for h in HEADER}
            r0_text = cell["r0_au"]
            if r0_text in DITTO:
                if prev_r0 is None:
                    raise CatalogError("ditto mark with no previous r0", line_no)
                r0 = prev_r0
            else:
                r0 = _number(r0_text, "r0_au", line_no)
            entry = ResonanceEntry(
                species=cell["species"],
                position_G=_number(cell["position_G"], "position_G", line_no),
                a_bg=_number(cell["a_bg_au"], "a_bg_au", line_no),
                delta_mu_muB=_number(cell["delta_mu_muB"], "delta_mu_muB", line_no),
                delta_B_G=_number(cell["delta_B_G"], "delta_B_G", line_no),
                mass_amu=_number(cell["mass_amu"], "mass_amu", line_no),
                r0=r0,
            )
        except CatalogError as exc:
            if not lenient:
                raise
            skipped.append((line_no, str(exc)))
            continue
        prev_r0 = entry.r0
        entries.append(entry)
    return entries, skipped


def _number(text, name, line_no):
    # some typeset tables use an en dash or double hyphen for minus
    cleaned = text.replace("–", "-").replace("−", "-").replace("--", "-")
    try:
        value = float(cleaned)
    except ValueError:
        raise CatalogError(f"column {name}: cannot parse {text!r} as a number", line_no)
    if not math.isfinite(value):
        raise CatalogError(f"column {name}: non-finite value {text!r}", line_no)
    return value


def table_rows(entries, constants=CODATA):
    """Input columns plus computed ``r_eff_au``, ``ratio_to_r0`` and ``class``.

    Rows whose effective range cannot be computed get an ``error`` class.
    """
    rows = []
    for e in entries:
        row = {_COLUMN_FOR_FIELD[f.name]: getattr(e, f.name) for f in fields(ResonanceEntry)}
        try:
            r = reff_from_resonance(e, constants)
            row.update(r_eff_au=r, ratio_to_r0=abs(r) / e.r0, **{"class": classify(e, r)})
        except (ZeroDivisionError, ValueError) as exc:
            row.update(r_eff_au=float("nan"), ratio_to_r0=float("nan"), **{"class": "error"})
            row["error"] = str(exc)
        rows.append(row)
    return rows


def _fmt_input(v):
    return v if isinstance(v, str) else repr(float(v))


def emit_table(entries, constants=CODATA, digits=12):
    """CSV text. Input columns round-trip exactly; computed ones use ``digits``."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    computed = ("r_eff_au", "ratio_to_r0", "class")
    w.writerow(HEADER + computed)
    for row in table_rows(entries, constants):
        cells = [_fmt_input(row[h]) for h in HEADER]
        cells += [f"{row['r_eff_au']:.{digits}g}", f"{row['ratio_to_r0']:.{digits}g}", row["class"]]
        w.writerow(cells)
    return out.getvalue()
