import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starflow import flow
from starflow import starset as ss
from starflow.flow import ConfigError, FlowParams, FlowTrace, StepFailed

from conftest import random_star, star_sets

# scalar root of (1 - V)/delta = sqrt(pi/V), mpmath findroot at 30 digits
EQUILIBRIUM_VOLUME = {0.1: 0.80209226303198803, 0.05: 0.90694166819179602, 0.025: 0.95464833507330924}
ENERGY_B1_DELTA_01 = 29.215280776728447  # 2 pi + (1 - pi)^2 / 0.2


def loose(**kw):
    base = dict(delta=0.05, h=1e-3, r0=0.2, R0=1.5, rho=0.05, T=0.01, M=128,
                enforce_admissible_bounds=False, check_unit_volume=False)
    base.update(kw)
    return FlowParams(**base)


# --------------------------------------------------------------------------
# parameters


def test_gamma_delta():
    assert flow.gamma_delta(1.0, 0.3) == 0.0
    assert flow.gamma_delta(0.9, 0.1) == pytest.approx(1.0)
    v = np.linspace(0.5, 1.5, 11)
    assert np.all(np.diff(flow.gamma_delta(v, 0.1)) < 0)


def test_admissible_bound_helpers():
    assert flow.rho_max() == pytest.approx(1 / (5 * np.sqrt(np.pi)))
    assert flow.delta_0(0.05) == pytest.approx(0.05 * (1 - np.pi * 0.25**2))


def test_delta_guard():
    with pytest.raises(ConfigError, match="delta exceeds delta_0"):
        FlowParams(delta=0.05, h=1e-3, r0=0.2, R0=1.5, rho=0.05, T=0.1)
    FlowParams(delta=0.04, h=1e-3, r0=0.2, R0=1.5, rho=0.05, T=0.1)


def test_rho_guard():
    with pytest.raises(ConfigError, match="rho exceeds rho_max"):
        FlowParams(delta=0.01, h=1e-3, r0=0.2, R0=1.5, rho=0.2, T=0.1)


@pytest.mark.parametrize("kw", [{"r0": 2.0}, {"h": 0.0}, {"delta": -1.0}, {"M": 8}])
def test_invalid_params(kw):
    with pytest.raises(ConfigError):
        loose(**kw)


def test_params_dict_roundtrip_and_unknown_keys():
    p = loose()
    assert FlowParams.from_dict(p.to_dict()) == p
    with pytest.raises(ConfigError, match="unknown"):
        FlowParams.from_dict({**p.to_dict(), "dt": 1.0})


# --------------------------------------------------------------------------
# energy


def test_energy_values():
    assert flow.energy(ss.ball(1 / np.sqrt(np.pi), 256), 0.05) == pytest.approx(2 * np.sqrt(np.pi), rel=1e-12)
    assert flow.energy(ss.ball(1.0, 4096), 0.1) == pytest.approx(ENERGY_B1_DELTA_01, rel=1e-6)
    S = ss.rescale_to_volume(ss.flower(M=256))
    assert flow.energy(S, 0.01) == pytest.approx(ss.perimeter(S), rel=1e-12)


@given(star_sets(M=64), st.sampled_from([0.1, 0.05]))
def test_energy_gradient_matches_finite_differences(S, delta):
    r = np.array(S.radii)
    _, g = flow.energy_gradient(r, delta)
    h = 1e-6
    fd = np.empty_like(r)
    for i in range(len(r)):
        e = np.zeros_like(r)
        e[i] = h
        fd[i] = (flow.energy(S.with_radii(r + e), delta) - flow.energy(S.with_radii(r - e), delta)) / (2 * h)
    assert np.max(np.abs(g - fd)) <= 1e-5 * np.max(np.abs(fd))


def test_perimeter_hessian_matches_finite_differences(rng):
    S = random_star(rng, 32)
    r, dth = np.array(S.radii), S.grid.dtheta
    _, _, H = flow._perimeter_terms(r, dth, hess=True)
    h = 1e-6
    for i in (0, 7, 31):
        e = np.zeros_like(r)
        e[i] = h
        fd = (flow._perimeter_terms(r + e, dth)[1] - flow._perimeter_terms(r - e, dth)[1]) / (2 * h)
        assert np.allclose(H[:, i], fd, atol=1e-7)


# --------------------------------------------------------------------------
# one step


def test_equilibrium_ball_is_a_fixed_point():
    E = ss.ball(flow.equilibrium_radius(0.05), 128)
    F = flow.mm_step(E, loose())
    assert np.max(np.abs(F.radii - E.radii)) < 1e-6


def test_small_ball_grows_and_stays_round():
    E = ss.ball(0.4, 128)
    F = flow.mm_step(E, loose())
    assert np.min(F.radii) > 0.4
    assert np.ptp(F.radii) < 1e-10


@given(star_sets(M=64, amp=0.1))
def test_step_decreases_objective(E):
    p = loose(M=64, R0=2.0)
    F, info = flow.mm_step(E, p, return_info=True)
    assert flow.energy(F, p.delta) + ss.pseudo_distance_sq(F, E) / p.h <= flow.energy(E, p.delta) + 1e-10
    assert info.residual <= p.max_residual
    assert flow.check_star_shaped(F, p.r0).passed


def test_step_rejects_inadmissible_input():
    with pytest.raises(StepFailed, match="step-failed"):
        flow.mm_step(ss.ball(0.1, 128), loose())


def test_step_rejects_grid_mismatch():
    with pytest.raises(ConfigError):
        flow.mm_step(ss.ball(1.0, 64), loose())


# --------------------------------------------------------------------------
# runs and diagnostics


@pytest.mark.parametrize("delta", sorted(EQUILIBRIUM_VOLUME))
def test_equilibrium_volume(delta):
    V = flow.equilibrium_volume(delta)
    assert V == pytest.approx(EQUILIBRIUM_VOLUME[delta], abs=1e-12)
    assert (1 - V) / delta == pytest.approx(np.sqrt(np.pi / V), rel=1e-12)


def test_equilibrium_volume_limits():
    assert flow.equilibrium_volume(1e-6) == pytest.approx(1.0, abs=1e-5)
    # first-order expansion 1 - delta sqrt(pi)
    assert flow.equilibrium_volume(0.05) == pytest.approx(1 - 0.05 * np.sqrt(np.pi), abs=6e-3)


@pytest.fixture(scope="module")
def stationary_trace():
    E = ss.ball(flow.equilibrium_radius(0.05), 128)
    return flow.run_flow(E, loose(T=0.08, check_reflection=False))


def test_equilibrium_run_stays_put(stationary_trace):
    V = flow.equilibrium_volume(0.05)
    assert np.max(np.abs(stationary_trace.array("volume") - V)) < 1e-4


def test_lambda_l2_stationary(stationary_trace):
    V = flow.equilibrium_volume(0.05)
    T = 0.05
    assert flow.lambda_l2(stationary_trace, 0.0, T) == pytest.approx(T * np.pi / V, rel=1e-6)


def test_lambda_l2_zero_for_unit_volume():
    tr = FlowTrace(loose())
    E = ss.ball(1 / np.sqrt(np.pi), 128)
    for _ in range(5):
        tr.append(E)
    assert flow.lambda_l2(tr, 0.0, 0.004) == pytest.approx(0.0, abs=1e-20)


def test_lambda_l2_window_check(stationary_trace):
    with pytest.raises(ValueError):
        flow.lambda_l2(stationary_trace, 0.0, 1.0)


def test_stationary_dissipation_margins(stationary_trace):
    rep = flow.dissipation_report(stationary_trace)
    assert np.max(np.abs(rep["dissipation_margin"])) < 1e-12
    assert rep["report"].passed


def test_stationary_holder_lags(stationary_trace):
    fit = flow.holder_fit(stationary_trace)
    assert np.max(fit.sup_distance) < 1e-6


def test_holder_requires_long_trace():
    tr = FlowTrace(loose())
    tr.append(ss.ball(0.6, 128))
    with pytest.raises(ValueError):
        flow.holder_fit(tr)


def test_run_flow_preconditions():
    with pytest.raises(ConfigError, match="star-shaped"):
        flow.run_flow(ss.ball(0.15, 128), loose())
    with pytest.raises(ConfigError, match="not 1"):
        flow.run_flow(ss.ball(0.6, 128), loose(check_unit_volume=True))
    with pytest.raises(ConfigError, match="reflection"):
        flow.run_flow(ss.translated_ball([0.2, 0.0], 0.7, 128), loose(rho=0.01))


def test_run_flow_is_deterministic():
    E = ss.rescale_to_volume(ss.flower(M=64))
    p = loose(M=64, r0=0.3, rho=0.3, T=0.005)
    a, b = flow.run_flow(E, p), flow.run_flow(E, p)
    assert np.array_equal(a.table(), b.table())


# --------------------------------------------------------------------------
# first variations


def test_variation_rates_on_circles():
    r, r0 = 1.3, 0.5
    E = ss.ball(r, 512)
    dil, shr = flow.dilation_field(), flow.shrink_field(r0)
    assert flow.first_variation_volume(E, dil) == pytest.approx(2 * np.pi * r**2, rel=1e-6)
    assert flow.first_variation_perimeter(E, dil) == pytest.approx(2 * np.pi * r, rel=1e-6)
    assert flow.first_variation_volume(E, shr) == pytest.approx(-(r**2 - r0**2) * 2 * np.pi * r**2, rel=1e-6)
    assert flow.first_variation_perimeter(E, shr) == pytest.approx(-(r**2 - r0**2) * 2 * np.pi * r, rel=1e-6)


def test_dilation_perimeter_rate_finite_difference():
    E = ss.flower(M=512)
    s = 1e-4
    fd = (ss.perimeter(ss.scale(E, 1 + s)) - ss.perimeter(E)) / s
    assert flow.first_variation_perimeter(E, flow.dilation_field()) == pytest.approx(fd, rel=1e-3)


def test_dtilde_variation_closed_forms():
    B1, B2 = ss.ball(1.0, 1024), ss.ball(2.0, 1024)
    dil = flow.dilation_field()
    assert flow.dtilde_first_variation(B1, B1, dil) == pytest.approx(0.0, abs=1e-12)
    assert flow.dtilde_first_variation(B1, B2, dil) == pytest.approx(-2 * np.pi, rel=1e-4)


@given(st.integers(0, 2**31 - 1), st.sampled_from(["dilation", "shrink"]))
def test_dtilde_variation_finite_difference(seed, name):
    rng = np.random.default_rng(seed)
    E, F = random_star(rng, 256, amp=0.05), random_star(rng, 256, amp=0.05)
    fld = flow.dilation_field() if name == "dilation" else flow.shrink_field(0.3)
    s = 1e-5
    fd = (ss.pseudo_distance_sq(fld.flow_map(E, s), F) - ss.pseudo_distance_sq(fld.flow_map(E, -s), F)) / (2 * s)
    assert flow.dtilde_first_variation(E, F, fld) == pytest.approx(fd, rel=1e-3, abs=1e-6)


def test_variation_feasibility_examples():
    assert 1 / (2 * (3.0**2 - 1.0**2)) == 0.0625
    rep = flow.variation_feasibility(ss.ball(2.0, 128), 1.0, 3.0)
    assert rep.passed
    assert rep.witness["s2"] == 0.0625


def test_field_invariants():
    E = ss.flower(M=256)
    r0, R0 = 0.5, 2.0
    xn = flow.dilation_field().normal_component(E)
    assert np.all((xn >= r0) & (xn <= R0))
    assert np.all(flow.shrink_field(r0).normal_component(E) <= 0)
