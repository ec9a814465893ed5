import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from narrow3b import twobody as tb
from narrow3b.units import amu_to_au

R0 = 50.0
MU2 = amu_to_au(22.989769282) / 2.0


def model(D=0.0, B=0.0, kind="sech_barrier"):
    return tb.PotentialModel(kind, D, B, R0)


def test_potential_examples():
    m = model(2.0, 3.0)
    assert tb.eval_potential(m, 0.0) == pytest.approx(-2.0 + 3.0 * math.exp(-8))
    assert tb.eval_potential(m, 1e4 * R0) == 0.0
    mo = model(2.0, 3.0, "morse_barrier")
    assert tb.eval_potential(mo, R0 / 3) == pytest.approx(-2.0 + 3.0 * math.exp(-2))
    with pytest.raises(ValueError):
        tb.eval_potential(m, -1.0)
    with pytest.raises(ValueError):
        tb.PotentialModel("square", 1.0, 0.0, R0)
    with pytest.raises(ValueError):
        tb.PotentialModel("sech_barrier", 1.0, 0.0, 0.0)


@given(st.floats(min_value=1e-7, max_value=1e-2))
@settings(max_examples=25, deadline=None)
def test_free_particle_has_no_phase_shift(k):
    assert abs(tb.solve_phase_shift(model(), MU2, k).delta) < 1e-10


def test_phase_shift_grid_convergence(mu2_na):
    m = model(1.5 * tb.energy_scale(R0, mu2_na), 0.3 * tb.energy_scale(R0, mu2_na))
    k = 1e-3
    coarse = tb.default_grid(m, mu2_na, k_min=k)
    fine = tb.RadialGrid(h=coarse.h / 2, r_match=coarse.r_match)
    d1 = tb.solve_phase_shift(m, mu2_na, k, coarse).delta
    d2 = tb.solve_phase_shift(m, mu2_na, k, fine).delta
    assert abs(d1 - d2) < 1e-8


def test_grid_too_short_is_rejected(mu2_na):
    m = model(1e-6)
    with pytest.raises(ValueError):
        tb.solve_phase_shift(m, mu2_na, 1e-4, tb.RadialGrid(h=0.25, r_match=2 * R0))


def test_fit_synthetic_round_trip():
    a0, r0e = 1234.5, -678.9
    ks = np.geomspace(1e-5, 1e-4, 7)
    pairs = [(k, -1 / a0 + 0.5 * r0e * k * k) for k in ks]
    fit = tb.fit_scattering_params(pairs)
    assert fit.a == pytest.approx(a0, rel=1e-10)
    assert fit.r_eff == pytest.approx(r0e, rel=1e-10)


@given(st.floats(min_value=1e2, max_value=1e6), st.floats(min_value=-1e5, max_value=-10.0),
       st.booleans())
@settings(max_examples=50, deadline=None)
def test_fit_synthetic_property(a_abs, r_eff, negative):
    a0 = -a_abs if negative else a_abs
    ks = tb.default_window(R0, a0, r_eff)
    samples = [tb.PhaseShiftSample(k, math.atan2(1.0, (-1 / a0 + 0.5 * r_eff * k * k) / k))
               for k in ks]
    fit = tb.fit_scattering_params(samples)
    # samples pass through atan/tan, so r_eff carries the rounding of a
    # quantity that is small next to -1/a
    assert fit.a == pytest.approx(a0, rel=1e-8)
    assert fit.r_eff == pytest.approx(r_eff, rel=1e-5)
    assert fit.k_window[1] <= tb.WINDOW_FRACTION * tb.validity_bound(a0, r_eff) * (1 + 1e-12)


def test_fit_errors():
    with pytest.raises(ValueError):
        tb.fit_scattering_params([(1e-3, 1.0)] * 3)
    with pytest.raises(ValueError):
        tb.fit_scattering_params([(1e-3, 1.0), (2e-3, 1.0)])
    samples = [tb.PhaseShiftSample(k, 0.1) for k in (1e-4, 2e-4, 3e-4)]
    samples.append(tb.PhaseShiftSample(4e-4, math.pi))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = tb.fit_scattering_params(samples)
    assert fit.n_excluded == 1
    assert caught


def _threshold_depth(mu2):
    """Bisection on D for the first change in the zero-energy node count."""
    lo, hi = 0.0, tb.energy_scale(R0, mu2)
    while tb.count_bound_states(model(hi), mu2) == 0:
        hi *= 2
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if tb.count_bound_states(model(mid), mu2) == 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def test_bound_state_threshold(mu2_na):
    assert tb.count_bound_states(model(), mu2_na) == 0
    lo, hi = _threshold_depth(mu2_na)
    assert tb.count_bound_states(model(lo), mu2_na) == 0
    assert tb.count_bound_states(model(hi), mu2_na) == 1
    # just below threshold: large negative a; just above: large positive a
    a_lo = tb.scattering_length(model(lo), mu2_na)
    a_hi = tb.scattering_length(model(hi), mu2_na)
    assert a_lo < -1e6 * R0 and a_hi > 1e6 * R0
    # delta(k -> 0) sits near pi/2 in magnitude at threshold
    d = tb.solve_phase_shift(model(hi), mu2_na, 1e-8).delta
    assert abs(abs(d) - math.pi / 2) < 1e-2


def test_near_threshold_large_positive_a(mu2_na):
    _, hi = _threshold_depth(mu2_na)
    m = model(hi * 1.001)
    fit = tb.fit_model(m, mu2_na)
    a_zero = tb.scattering_length(m, mu2_na)
    assert fit.a > 10 * R0
    assert fit.a == pytest.approx(a_zero, rel=1e-4)


def test_window_halving_stability(mu2_na):
    m = tb.tune_to_target("sech_barrier", R0, 1e4, -2e3, mu2=mu2_na)
    ks = tb.default_window(R0, 1e4, -2e3)
    f1 = tb.fit_model(m, mu2_na, ks)
    f2 = tb.fit_model(m, mu2_na, ks / 2)
    assert abs(f2.r_eff / f1.r_eff - 1) < 1e-2


def test_wigner_law(mu2_na):
    m = model(0.7 * tb.energy_scale(R0, mu2_na), 0.2 * tb.energy_scale(R0, mu2_na))
    fit = tb.fit_model(m, mu2_na)
    samples = [tb.solve_phase_shift(m, mu2_na, k) for k in fit.k_window]
    d = tb.unwrap_phase_shifts(samples, a_hint=fit.a)
    slope = (d[1].delta - d[0].delta) / (d[1].k - d[0].k)
    k_lo = d[0].k
    # the Wigner limit delta ~ -a k; compare against the smallest-k secant
    assert -d[0].delta / k_lo == pytest.approx(fit.a, rel=1e-3)
    assert abs(slope) > 0


def test_unwrap_is_continuous():
    ks = np.linspace(0.1, 3.0, 40)
    true = 0.3 + 1.2 * ks
    wrapped = [tb.PhaseShiftSample(k, math.atan(math.tan(t))) for k, t in zip(ks, true)]
    out = tb.unwrap_phase_shifts(wrapped)
    steps = np.diff([s.delta for s in out])
    assert np.all(np.abs(steps) < 0.5)


@given(st.lists(st.floats(min_value=0.0, max_value=30.0), min_size=2, max_size=6))
@settings(max_examples=15, deadline=None)
def test_node_count_monotone_in_depth(depths):
    es = tb.energy_scale(R0, MU2)
    counts = [tb.count_bound_states(model(d * es, 0.5 * es), MU2) for d in sorted(depths)]
    assert counts == sorted(counts)


def test_grid_convergence_of_fit(mu2_na):
    m = tb.tune_to_target("sech_barrier", R0, -3e3, -500.0, mu2=mu2_na)
    ks = tb.default_window(R0, -3e3, -500.0)
    f1 = tb.fit_model(m, mu2_na, ks)
    f2 = tb.fit_model(m, mu2_na, ks, steps_per_r0=2 * tb.STEPS_PER_R0)
    assert abs(f2.a / f1.a - 1) < 1e-6
    assert abs(f2.r_eff / f1.r_eff - 1) < 1e-6


def test_tune_unitarity(mu2_na):
    m = tb.tune_to_target("sech_barrier", R0, math.inf, -5000.0, mu2=mu2_na)
    fit = tb.fit_model(m, mu2_na, tb.default_window(R0, math.inf, -5000.0))
    assert abs(fit.inv_a) < 1e-9
    assert abs(fit.r_eff / -5000.0 - 1) < 1e-4


@pytest.mark.parametrize("kind", tb.KINDS)
@pytest.mark.parametrize("a", [2e3, -2e3])
def test_tune_round_trip(kind, a, mu2_na):
    m = tb.tune_to_target(kind, R0, a, -300.0, mu2=mu2_na)
    fit = tb.fit_model(m, mu2_na, tb.default_window(R0, a, -300.0))
    assert abs(fit.a / a - 1) < 1e-4
    assert abs(fit.r_eff / -300.0 - 1) < 1e-4
    expected = tb.RESONANT_BRANCH[kind] - (0 if a > 0 else 1)
    assert tb.count_bound_states(m, mu2_na) == expected


def test_depth_only_search_without_barrier(mu2_na):
    # B fixed at 0: the search over D alone reproduces a model's a
    es = tb.energy_scale(R0, mu2_na)
    ref = model(0.9 * es)
    grid = tb.default_grid(ref, mu2_na)
    inv_a = 1.0 / tb.scattering_length(ref, mu2_na, grid)
    n = tb.count_bound_states(ref, mu2_na, grid)
    target = tb._target_phase(inv_a, n, grid.r_match, R0)
    D = tb._solve_depth("sech_barrier", R0, 0.0, mu2_na, target, grid, es)
    assert D == pytest.approx(ref.D, rel=1e-9)


def test_tune_rejects_unreachable(mu2_na):
    with pytest.raises(ValueError):
        tb.tune_to_target("sech_barrier", R0, 1e4, 100.0, mu2=mu2_na)
    with pytest.raises(ValueError):
        tb.tune_to_target("sech_barrier", R0, 1e4, -10.0, mu2=mu2_na)
    with pytest.raises(ValueError):
        tb.tune_to_target("sech_barrier", R0, 10.0, -1e3, mu2=mu2_na)


def test_analyze_free_model(mu2_na):
    rep = tb.analyze(model(), mu2_na)
    assert rep.a == 0.0 and rep.n_bound == 0
