"""s-wave two-body scattering for the shape-resonance model potentials.

Two model potentials carry a Feshbach-like shape resonance: a short-range
well (``sech^2`` or Morse) of depth ``D`` plus a Gaussian barrier of height
``B``. ``D`` mostly sets the scattering length ``a``; ``B`` sets how narrow
the resonance is, i.e. how large and negative the effective range gets.

The radial equation ``u'' = 2 mu2 (V - E) u`` is integrated with a
renormalized Numerov recursion (ratios of successive values only, so deep
wells and barriers never overflow) and matched to the exact free solutions
at two grid points where the potential is negligible.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import brentq

KINDS = ("sech_barrier", "morse_barrier")

STEPS_PER_R0 = 200
MATCH_R0 = 20.0
# |V(r_match)| must sit below this fraction of the smallest kinetic energy
POTENTIAL_FLOOR = 1e-8
# "k << sqrt(2/|a r_eff|)" is enforced as k_max <= WINDOW_FRACTION * bound
WINDOW_FRACTION = 0.1
# |a| beyond this many r0 is treated as the resonance pole, 1/a = 0
UNITARITY_SENTINEL = 1e6
# bound-state count of the branch whose threshold state sits behind the
# barrier, for (a > 0 or 1/a = 0); one less for a < 0. The Morse tail stays
# attractive outside the barrier and holds one extra node.
POLE_SCALE = 1e-4
RESONANT_BRANCH = {"sech_barrier": 1, "morse_barrier": 2}


@dataclass(frozen=True)
class PotentialModel:
    kind: str
    D: float
    B: float
    r0: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0!r}")
        if self.D < 0 or self.B < 0:
            raise ValueError(f"D and B must be non-negative, got D={self.D!r}, B={self.B!r}")

    def __call__(self, r):
        return eval_potential(self, r)


@dataclass(frozen=True)
class PhaseShiftSample:
    k: float
    delta: float


@dataclass(frozen=True)
class ScatteringFit:
    a: float
    r_eff: float
    residual: float
    k_window: tuple
    inv_a: float = 0.0
    n_excluded: int = 0


@dataclass(frozen=True)
class RadialGrid:
    h: float
    r_match: float

    @property
    def n_steps(self):
        return int(round(self.r_match / self.h))


def energy_scale(r0, mu2):
    """Kinetic energy of a wave confined to the well width ``r0/3``."""
    return 1.0 / (2.0 * mu2 * (r0 / 3.0) ** 2)


def eval_potential(model, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("potential evaluated at negative r")
    x = 3.0 * r / model.r0
    barrier = model.B * np.exp(-2.0 * (x - 2.0) ** 2)
    if model.kind == "sech_barrier":
        # sech^2 x written to stay finite for huge x
        e = np.exp(-2.0 * x)
        well = -model.D * 4.0 * e / (1.0 + e) ** 2
    else:
        e = np.exp(-(x - 1.0))
        well = model.D * (e * e - 2.0 * e)
    v = well + barrier
    return float(v) if v.ndim == 0 else v


def default_grid(model, mu2, k_min=None, steps_per_r0=STEPS_PER_R0, floor=POTENTIAL_FLOOR):
    """Uniform grid out to the first radius where the potential is negligible.

    Negligible means ``|V| < floor * k_min^2 / (2 mu2)``, with ``k_min``
    defaulting to the bottom of the standard fit window. The radius is never
    below ``MATCH_R0 * r0``.
    """
    h = model.r0 / steps_per_r0
    if k_min is None:
        k_min = 1e-4 / model.r0
    e_kin = k_min ** 2 / (2.0 * mu2)
    r_match = MATCH_R0 * model.r0
    while abs(eval_potential(model, r_match)) > floor * e_kin:
        r_match += model.r0
        if r_match > 1e3 * model.r0:
            raise ValueError("potential does not decay below the floor within 1000 r0")
    return RadialGrid(h=h, r_match=r_match)


def _check_grid(model, mu2, k, grid, floor=POTENTIAL_FLOOR):
    e_kin = k ** 2 / (2.0 * mu2)
    v_end = abs(eval_potential(model, grid.r_match))
    if e_kin > 0 and v_end > floor * e_kin:
        raise ValueError(
            f"grid too short: |V(r_match={grid.r_match:g})| = {v_end:.3e} exceeds "
            f"{floor:g} x k^2/(2 mu2) = {floor * e_kin:.3e}")


@njit(cache=True)
def _numerov_ratio(q, h):
    """Renormalized Numerov for u'' = q u with u(0) = 0.

    Returns ``u[N]/u[N-1] - 1`` and the number of sign changes of ``u`` on
    (0, r_N]. The recursion runs on ``d = P - 1`` (``P`` the ratio of
    successive scaled values) because ``P`` sits close to 1 at low energy
    and would otherwise lose most of its significant digits.
    """
    n = q.shape[0] - 1
    c = h * h * q / 12.0
    nodes = 0
    # P_1 = U_1 because w_0 = 0; U - 2 = 12 c / (1 - c)
    d = 1.0 + 12.0 * c[1] / (1.0 - c[1])
    if d < -1.0:
        nodes += 1
    for j in range(2, n):
        d = 12.0 * c[j] / (1.0 - c[j]) + d / (1.0 + d)
        if d < -1.0:
            nodes += 1
    rm1 = (d * (1.0 - c[n - 1]) + c[n] - c[n - 1]) / (1.0 - c[n])
    return rm1, nodes


def _radial_ratio(model, mu2, energy, grid):
    r = np.arange(grid.n_steps + 1) * grid.h
    q = 2.0 * mu2 * (eval_potential(model, r) - energy)
    rm1, nodes = _numerov_ratio(q, grid.h)
    if not np.isfinite(rm1):
        raise FloatingPointError("radial propagation produced a non-finite ratio")
    return rm1, nodes, r[-2], r[-1]


def _tan_delta(model, mu2, k, grid):
    """Numerator and denominator of tan(delta) from two-point matching."""
    rm1, _, r1, r2 = _radial_ratio(model, mu2, k * k / (2.0 * mu2), grid)
    mid = 0.5 * k * (r1 + r2)
    half = math.sin(0.5 * k * (r2 - r1))
    s1, c1 = math.sin(k * r1), math.cos(k * r1)
    # s2 - rho s1 and rho c1 - c2 with the differences taken analytically
    num = 2.0 * math.cos(mid) * half - rm1 * s1
    den = 2.0 * math.sin(mid) * half + rm1 * c1
    return num, den


def solve_phase_shift(model, mu2, k, grid=None):
    """Phase shift at wavenumber ``k``, on the branch (-pi/2, pi/2]."""
    if not k > 0:
        raise ValueError(f"k must be positive, got {k!r}")
    if grid is None:
        grid = default_grid(model, mu2, k_min=k)
    _check_grid(model, mu2, k, grid)
    num, den = _tan_delta(model, mu2, k, grid)
    delta = math.atan2(num, den)
    if delta > math.pi / 2:
        delta -= math.pi
    elif delta <= -math.pi / 2:
        delta += math.pi
    return PhaseShiftSample(k=k, delta=delta)


def k_cot_delta(model, mu2, k, grid=None):
    """``k cot(delta)`` computed without forming delta (branch-free)."""
    if grid is None:
        grid = default_grid(model, mu2, k_min=k)
    _check_grid(model, mu2, k, grid)
    num, den = _tan_delta(model, mu2, k, grid)
    return k * den / num


def unwrap_phase_shifts(samples, a_hint=None):
    """Resolve the mod-pi ambiguity by continuity along ascending k.

    The first sample is anchored to the Wigner limit ``delta ~ -k a`` when a
    scattering-length hint is given, otherwise left on its principal branch.
    """
    samples = sorted(samples, key=lambda s: s.k)
    if not samples:
        return []
    out = []
    first = samples[0]
    d = first.delta
    if a_hint is not None and math.isfinite(a_hint):
        target = -first.k * a_hint
        d += math.pi * round((target - d) / math.pi)
    out.append(PhaseShiftSample(first.k, d))
    prev = d
    for s in samples[1:]:
        d = s.delta + math.pi * round((prev - s.delta) / math.pi)
        out.append(PhaseShiftSample(s.k, d))
        prev = d
    return out


def zero_energy_state(model, mu2, grid=None):
    """Scattering length and node data of the zero-energy regular solution.

    Returns ``(inv_a, nodes_inside, w)`` where ``w = u'/u`` at ``r_match``.
    Outside the potential ``u = C (r - a)``.
    """
    if grid is None:
        grid = default_grid(model, mu2)
    rm1, nodes, r1, r2 = _radial_ratio(model, mu2, 0.0, grid)
    h = r2 - r1
    den = h - rm1 * r1
    # den -> 0 when u is proportional to r outside (a = 0)
    inv_a = -rm1 / den if den != 0 else math.copysign(math.inf, -rm1)
    w = rm1 / ((1.0 + rm1) * h)
    return inv_a, nodes, w


def scattering_length(model, mu2, grid=None):
    """Scattering length from the zero-energy asymptote ``u ~ r - a``."""
    inv_a, _, _ = zero_energy_state(model, mu2, grid)
    return math.inf if inv_a == 0 else 1.0 / inv_a


def count_bound_states(model, mu2, grid=None):
    """Number of s-wave bound states (Sturm node count at zero energy).

    Nodes of the zero-energy solution inside the grid, plus the node at
    ``r = a`` when ``a`` lies beyond the matching radius.
    """
    if grid is None:
        grid = default_grid(model, mu2)
    _, nodes, w = zero_energy_state(model, mu2, grid)
    return nodes + (1 if w < 0 else 0)


def zero_energy_phase(model, mu2, grid=None, length=None):
    """Continuous Pruefer angle of the zero-energy solution at ``r_match``.

    Increases monotonically with ``D``; crosses ``(n + 1/2) pi`` exactly when
    the n-th bound state reaches threshold (``a = +-inf``).
    """
    if grid is None:
        grid = default_grid(model, mu2)
    if length is None:
        length = model.r0
    _, nodes, w = zero_energy_state(model, mu2, grid)
    return nodes * math.pi + math.pi / 2 - math.atan(length * w)


def _target_phase(inv_a, n_bound, r_match, length):
    # n_bound counts every node on (0, inf), including r = a when a > 0
    if inv_a > 0 and n_bound < 1:
        raise ValueError("a > 0 (or a resonance pole) needs n_bound >= 1")
    if n_bound < 0:
        raise ValueError("n_bound must be non-negative")
    if inv_a == 0.0:
        if n_bound < 1:
            raise ValueError("a resonance pole needs n_bound >= 1")
        return (n_bound - 0.5) * math.pi
    return n_bound * math.pi + math.atan((r_match - 1.0 / inv_a) / length)


def validity_bound(a, r_eff):
    """Upper wavenumber for the two-term expansion, ``sqrt(2/|a r_eff|)``.

    Capped at ``sqrt(2)/|r_eff|`` (its value at ``|a| = |r_eff|``) so that
    the next term of the expansion stays small too; this cap is the only
    constraint left when ``1/a = 0``.
    """
    if r_eff == 0 or not math.isfinite(r_eff):
        return math.inf
    cap = math.sqrt(2.0) / abs(r_eff)
    if a is None or not math.isfinite(a) or a == 0:
        return cap
    return min(math.sqrt(2.0 / abs(a * r_eff)), cap)


def default_window(r0, a=None, r_eff=None, n=5):
    """Log-spaced k points in [1e-4, 1e-2]/r0, shrunk to the validity bound.

    ``|a|`` beyond the unitarity sentinel is treated as ``1/a = 0``, which
    keeps the window where the effective-range term is still resolved.
    """
    k_lo, k_hi = 1e-4 / r0, 1e-2 / r0
    if a is not None and abs(a) > UNITARITY_SENTINEL * r0:
        a = math.inf
    if r_eff is not None:
        bound = validity_bound(a, r_eff)
        if k_hi > WINDOW_FRACTION * bound:
            k_hi = WINDOW_FRACTION * bound
            k_lo = k_hi / 100.0
    return np.geomspace(k_lo, k_hi, n)


def fit_scattering_params(samples, tol=1e-12):
    """Least-squares fit of ``k cot(delta) = -1/a + r_eff k^2 / 2``.

    ``samples`` may hold :class:`PhaseShiftSample` objects or ``(k, kcot)``
    pairs. Samples with ``delta`` within ``tol`` of a multiple of pi are
    dropped and counted.
    """
    ks, ys = [], []
    excluded = 0
    for s in samples:
        if isinstance(s, PhaseShiftSample):
            if abs(math.sin(s.delta)) < tol:
                excluded += 1
                continue
            ks.append(s.k)
            ys.append(s.k / math.tan(s.delta))
        else:
            ks.append(s[0])
            ys.append(s[1])
    if excluded:
        warnings.warn(f"{excluded} sample(s) with delta ~ n*pi excluded from fit")
    if len(ks) < 3:
        raise ValueError(f"need at least 3 usable samples, got {len(ks)}")
    ks = np.asarray(ks, dtype=float)
    ys = np.asarray(ys, dtype=float)
    x = ks ** 2
    if np.ptp(x) <= 1e-14 * np.max(x):
        raise ValueError("degenerate k grid: all k equal")
    # scale columns so the normal equations stay well conditioned
    xs = x / np.max(x)
    design = np.column_stack([np.ones_like(xs), xs])
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    intercept, slope = coef[0], coef[1] / np.max(x)
    resid = ys - design @ coef
    scale = np.max(np.abs(ys))
    residual = float(np.sqrt(np.mean(resid ** 2)) / scale) if scale > 0 else 0.0
    inv_a = -intercept
    a = math.inf if inv_a == 0 else 1.0 / inv_a
    return ScatteringFit(a=a, r_eff=2.0 * slope, residual=residual,
                         k_window=(float(ks.min()), float(ks.max())),
                         inv_a=float(inv_a), n_excluded=excluded)


def k_cot_delta_extrapolated(model, mu2, k, grid):
    """``k cot(delta)`` Richardson-extrapolated from steps ``h`` and ``h/2``.

    Numerov's phase error is O(h^4); near a narrow resonance ``a`` amplifies
    it by ``a/r0``, so the leading term is removed.
    """
    fine = RadialGrid(h=grid.h / 2, r_match=grid.r_match)
    return (16.0 * k_cot_delta(model, mu2, k, fine) - k_cot_delta(model, mu2, k, grid)) / 15.0


def _fit_on_window(model, mu2, ks, steps_per_r0=STEPS_PER_R0):
    grid = default_grid(model, mu2, k_min=float(ks[0]), steps_per_r0=steps_per_r0)
    pairs = [(k, k_cot_delta_extrapolated(model, mu2, k, grid)) for k in ks]
    return fit_scattering_params(pairs)


def fit_model(model, mu2, ks=None, steps_per_r0=STEPS_PER_R0, max_shrink=6):
    """Extract (a, r_eff) for a model, shrinking the window until it is valid."""
    if ks is not None:
        return _fit_on_window(model, mu2, np.asarray(ks, dtype=float), steps_per_r0)
    ks = default_window(model.r0)
    fit = _fit_on_window(model, mu2, ks, steps_per_r0)
    for _ in range(max_shrink):
        new = default_window(model.r0, fit.a, fit.r_eff)
        if np.allclose(new, ks, rtol=1e-3):
            break
        ks = new
        fit = _fit_on_window(model, mu2, ks, steps_per_r0)
    return fit


class TuningError(RuntimeError):
    pass


def _solve_depth(kind, r0, B, mu2, phase_target, grid, e_scale):
    def f(D):
        return zero_energy_phase(PotentialModel(kind, D, B, r0), mu2, grid) - phase_target

    lo, f_lo = 0.0, f(0.0)
    if f_lo > 0:
        raise TuningError(f"barrier B={B:g} alone overshoots the requested branch")
    hi = e_scale
    while f(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6 * e_scale:
            raise TuningError("depth search left the search box")
    return brentq(f, lo, hi, xtol=1e-15 * hi, maxiter=200)


def tune_to_target(kind, r0, target_a, target_reff, n_bound=None, mu2=None,
                   tol=1e-4, steps_per_r0=STEPS_PER_R0, b_max_scale=1e4):
    """Find (D, B) whose fitted (a, r_eff) hit the targets.

    The search is nested: for a trial barrier ``B`` the depth is fixed by
    the zero-energy phase (monotone in ``D``), and an outer bracketed root
    solve on ``B`` matches the fitted effective range. A final correction
    loop removes the small difference between the zero-energy ``a`` and the
    fitted one. ``|target_a| > UNITARITY_SENTINEL * r0`` means ``1/a = 0``.
    """
    if mu2 is None or mu2 <= 0:
        raise ValueError("mu2 must be given and positive")
    if not target_reff < 0:
        raise ValueError("target_reff must be negative (narrow-resonance regime)")
    if abs(target_reff) < r0:
        raise ValueError(f"|target_reff| must be >= r0, got {target_reff:g} with r0={r0:g}")
    if not abs(target_a) > r0:
        raise ValueError(f"|target_a| must exceed r0, got {target_a:g}")
    inv_target = 0.0 if abs(target_a) > UNITARITY_SENTINEL * r0 else 1.0 / target_a
    if n_bound is None:
        n_bound = RESONANT_BRANCH[kind] - (0 if inv_target >= 0 else 1)
    ks = default_window(r0, math.inf if inv_target == 0 else target_a, target_reff)
    e_scale = energy_scale(r0, mu2)
    probe = PotentialModel(kind, e_scale, 0.0, r0)
    grid = default_grid(probe, mu2, k_min=float(ks[0]), steps_per_r0=steps_per_r0)

    def model_for(B, inv_a0):
        target_phase = _target_phase(inv_a0, n_bound, grid.r_match, r0)
        D = _solve_depth(kind, r0, B, mu2, target_phase, grid, e_scale)
        return PotentialModel(kind, D, B, r0)

    def fit_for(m):
        return fit_model(m, mu2, ks, steps_per_r0)

    def solve_barrier(inv_a0):
        def g(B):
            return fit_for(model_for(B, inv_a0)).r_eff - target_reff

        g0 = g(0.0)
        if g0 < 0:
            raise TuningError(
                f"r_eff={target_reff:g} is above what B=0 gives ({g0 + target_reff:g})")
        lo, hi = 0.0, 0.1 * e_scale
        while g(hi) > 0:
            lo, hi = hi, 2.0 * hi
            if hi > b_max_scale * e_scale:
                raise TuningError(f"no barrier below {b_max_scale:g} x energy scale reaches r_eff")
        return brentq(g, lo, hi, xtol=1e-14 * hi, rtol=1e-13, maxiter=200)

    inv_a0 = inv_target
    model = None
    for _ in range(8):
        B = solve_barrier(inv_a0)
        model = model_for(B, inv_a0)
        fit = fit_for(model)
        if inv_target:
            err_a = abs(fit.inv_a - inv_target) * abs(target_a)
        else:
            # a pole is hit when |r0/a| is far below tol
            err_a = abs(fit.inv_a) * r0 / POLE_SCALE
        err_r = abs(fit.r_eff / target_reff - 1.0)
        if err_a < 0.1 * tol and err_r < 0.1 * tol:
            break
        # the fit window biases 1/a slightly; shift the zero-energy target
        inv_a0 += inv_target - fit.inv_a
    else:
        raise TuningError("tuning did not converge")
    # exactly at a pole the node may sit on either side of infinity
    allowed = (n_bound, n_bound - 1) if inv_target == 0 else (n_bound,)
    if count_bound_states(model, mu2, grid) not in allowed:
        raise TuningError("bound-state count does not match n_bound")
    return model


@dataclass(frozen=True)
class TwoBodyReport:
    a: float
    r_eff: float
    n_bound: int
    residual: float
    k_window: tuple
    a_zero_energy: float


def analyze(model, mu2, phase_floor=1e-12):
    """Fitted (a, r_eff), bound-state count and the zero-energy ``a``.

    A model that does not scatter at all (every phase shift below
    ``phase_floor``) reports ``a = 0`` and an undefined ``r_eff``.
    """
    grid = default_grid(model, mu2)
    a0 = scattering_length(model, mu2, grid)
    n = count_bound_states(model, mu2, grid)
    ks = default_window(model.r0)
    deltas = [solve_phase_shift(model, mu2, float(k), grid).delta for k in ks]
    if max(abs(d) for d in deltas) < phase_floor:
        return TwoBodyReport(a=0.0, r_eff=math.nan, n_bound=n, residual=0.0,
                             k_window=(float(ks[0]), float(ks[-1])), a_zero_energy=a0)
    fit = fit_model(model, mu2)
    return TwoBodyReport(a=float(fit.a), r_eff=float(fit.r_eff), n_bound=n,
                         residual=fit.residual, k_window=fit.k_window, a_zero_energy=a0)
