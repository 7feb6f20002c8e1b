import json

import numpy as np
import pytest
import shapely
from hypothesis import given
from hypothesis import strategies as st

from starflow import geochecks as gc
from starflow import starset as ss
from starflow.counterexamples import cone_spike_radius

from conftest import random_star, star_sets

# area of IC(e1, 0.5) n B_1(e1), exact polygon clipping in shapely at 8192 segments
ETA1_EXACT = 0.521979919618123


def _visible_from_ball(S, r, n_ball=48):
    """Brute-force visibility: every segment from dB_r to a boundary vertex stays in S."""
    poly = shapely.Polygon(S.points).buffer(1e-9)
    phi = 2 * np.pi * np.arange(n_ball) / n_ball
    Y = r * np.column_stack([np.cos(phi), np.sin(phi)])
    segs = [shapely.LineString([y, x]) for y in Y for x in S.points]
    return bool(np.all(shapely.covers(poly, segs)))


# --------------------------------------------------------------------------
# reports


def test_report_pass_iff_margin_above_tolerance():
    assert gc.CheckReport.from_margin("a", -1e-3, 1e-3).passed
    assert not gc.CheckReport.from_margin("a", -2e-3, 1e-3).passed


def test_report_json_roundtrip():
    rep = gc.CheckReport.from_margin("x", 0.5, 1e-9, {"p": np.array([1.0, 2.0]), "i": np.int64(3)}, seed=4)
    d = json.loads(rep.to_json())
    assert set(d) == {"name", "passed", "worst_margin", "witness", "tolerance", "seed"}
    back = gc.CheckReport.from_dict(d)
    assert back.witness["p"] == [1.0, 2.0] and back.seed == 4


# --------------------------------------------------------------------------
# star-shapedness and cones


@pytest.mark.parametrize("r, margin", [(0.5, 0.5), (1.0, 0.0)])
def test_star_shaped_unit_ball(r, margin):
    rep = gc.check_star_shaped(ss.ball(1.0, 128), r)
    assert rep.passed
    assert rep.worst_margin == pytest.approx(margin, abs=1e-12)


def test_star_shaped_fails_when_ball_not_contained():
    assert not gc.check_star_shaped(ss.ball(1.0, 128), 1.2).passed


@pytest.mark.parametrize("r", [0.5, 0.7])
def test_star_shaped_flower_matches_visibility(r):
    S = ss.flower(M=512)
    assert gc.check_star_shaped(S, r).passed == _visible_from_ball(S, r)


def test_cones_unit_ball():
    assert gc.check_cones(ss.ball(1.0, 128), 0.5).passed


def test_cone_union_is_tight():
    # the sides of the spike are tangent to B_0.5, so x . n = 0.5 there
    g = ss.DirectionGrid(2048)
    S = ss.RadialSet(g, cone_spike_radius(g.theta, 0.5))
    assert abs(gc.check_star_shaped(S, 0.5).worst_margin) < 1e-3
    assert abs(gc.check_cones(S, 0.5, stride=8).worst_margin) < 1e-3


def test_cones_agree_with_star_on_flower():
    S = ss.flower(M=512)
    for r in (0.5, 0.85):
        assert gc.check_cones(S, r, stride=4).passed == gc.check_star_shaped(S, r).passed


@given(star_sets(M=128, amp=0.12), st.floats(0.2, 0.9))
def test_cones_star_equivalence(S, r):
    star = gc.check_star_shaped(S, r)
    if abs(star.worst_margin) < 0.02:
        return  # too close to the threshold for either sampled check
    assert gc.check_cones(S, r, stride=4).passed == star.passed


def test_cone_spec_validation():
    with pytest.raises(ValueError):
        gc.ConeSpec(np.array([0.5, 0.0]), 1.0)
    c = gc.ConeSpec(np.array([2.0, 0.0]), 1.0)
    assert c.aperture == pytest.approx(np.pi / 6)


# --------------------------------------------------------------------------
# reflection


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.7, 0.99])
def test_reflection_centred_ball(rho):
    assert gc.check_rho_reflection(ss.ball(1.0, 256), rho).passed


@pytest.mark.parametrize("rho", [0.0, 0.05, 0.1, 0.15, 0.19])
def test_reflection_off_centre_ball_fails_below_shift(rho):
    assert not gc.check_rho_reflection(ss.translated_ball([0.2, 0.0], 1.0, 256), rho).passed


def test_reflection_off_centre_ball_passes_above_shift():
    assert gc.check_rho_reflection(ss.translated_ball([0.2, 0.0], 1.0, 256), 0.25).passed


def test_reflection_from_class_radii():
    # rho^2 >= 5 (R^2 - r^2) with B_rho inside the set implies reflection
    S = ss.RadialSet.from_radii(1.0 + 0.01 * np.cos(3 * ss.DirectionGrid(256).theta))
    R = float(np.max(S.radii))
    r = float(np.min(gc.star_margins(S))) - 1e-6
    rho = np.sqrt(5 * (R**2 - r**2))
    assert rho < np.min(S.radii) and gc.check_star_shaped(S, r).passed
    assert gc.check_rho_reflection(S, rho).passed


def test_width_bound_flower_with_measured_rho():
    S = ss.flower(M=256)
    rho = gc.min_reflection_radius(S)
    assert gc.check_rho_reflection(S, rho).passed
    rep = gc.width_bound(S, rho)
    assert rep.passed and rep.witness["width"] == pytest.approx(0.2, abs=1e-3)


def test_width_failure_implies_reflection_failure():
    S = ss.translated_ball([0.3, 0.0], 1.0, 256)
    for rho in (0.05, 0.1, 0.14):
        if not gc.width_bound(S, rho).passed:
            assert not gc.check_rho_reflection(S, rho).passed


@pytest.mark.parametrize("rho, r", [(0.6, 0.8), (0.0, 1.0)])
def test_rho_to_starball_unit_ball(rho, r):
    assert gc.rho_to_starball(ss.ball(1.0, 64), rho) == pytest.approx(r)


def test_rho_to_starball_rejects_large_rho():
    with pytest.raises(ValueError):
        gc.rho_to_starball(ss.ball(1.0, 64), 1.0)


@given(star_sets(M=128, amp=0.08))
def test_rho_to_starball_composes_with_star_check(S):
    rho = 0.9 * float(np.min(S.radii))
    if gc.check_rho_reflection(S, rho, n_dirs=32, n_offsets=32).passed:
        assert gc.check_star_shaped(S, gc.rho_to_starball(S, rho)).passed


def test_reflection_checker_is_deterministic():
    S = ss.flower(M=128)
    a, b = gc.check_rho_reflection(S, 0.3), gc.check_rho_reflection(S, 0.3)
    assert a.to_json() == b.to_json()


# --------------------------------------------------------------------------
# density


def test_eta1_monte_carlo_brackets_exact_area():
    c = gc.density_constants(0.5, 1.0, 0.1, seed=0)
    assert abs(c["eta1_estimate"] - ETA1_EXACT) < 4 * c["eta1_stderr"]
    assert c["eta1"] <= ETA1_EXACT
    assert c["eta3"] == pytest.approx(np.sqrt(c["eta1"]))


def test_density_constants_seeded():
    assert gc.density_constants(0.5, 1.0, 0.1, seed=3) == gc.density_constants(0.5, 1.0, 0.1, seed=3)


def test_half_disc_density_on_unit_ball():
    B = ss.ball(1.0, 512)
    eps = 0.1
    vin, vout, per = gc.local_density(B, B.points[0], eps)
    eta1 = gc.density_constants(0.5, 1.0, eps)["eta1"]
    assert vin == pytest.approx(np.pi * eps**2 / 2, rel=0.1)
    assert vin >= eta1 * eps**2
    assert per == pytest.approx(2 * eps, rel=0.02)


def test_density_fractions_tend_to_half():
    B = ss.ball(1.0, 2048)
    fr = [gc.local_density(B, B.points[0], e)[0] / (np.pi * e**2) for e in (0.2, 0.05, 0.0125)]
    assert abs(fr[-1] - 0.5) < abs(fr[0] - 0.5)
    assert fr[-1] == pytest.approx(0.5, abs=0.01)


def test_density_flower():
    assert gc.check_density(ss.flower(M=256), 0.5, 1.0, seed=0).passed
