import numpy as np
import pytest

from starflow import counterexamples as ce
from starflow import starset as ss

# grid integration (shapely, 1e-3 midpoint cells) of d(x, boundary) over the spike at eps = 0.5
CONE_DTILDE_SQ_HALF = 0.021890994645744608
# mpmath double quadrature of (|x| - 1) over conv((k+1) e1, B_1) minus B_1
TRANSLATE_DTILDE_SQ = {1: 0.21070154685084572, 2: 0.99790219712662024, 3: 2.4181788289185985}


def test_annuli_no_holes():
    m = ce.annuli_family(0)
    assert m.total_curvature == pytest.approx(2 * np.pi)
    assert m.perimeter == pytest.approx(20 * np.pi)
    assert m.area == pytest.approx(100 * np.pi)


@pytest.mark.parametrize("N", [1, 3, 10, 40])
def test_annuli_total_curvature_exact(N):
    assert ce.annuli_family(N).total_curvature == 2 * np.pi * (1 - N)


def test_annuli_three_holes():
    assert ce.annuli_family(3).total_curvature == pytest.approx(-4 * np.pi, abs=1e-14)


def test_annuli_limits():
    m = ce.annuli_family(2000)
    assert m.perimeter == pytest.approx(20 * np.pi + 2 * np.pi * np.pi**2 / 6, abs=1e-2)
    slopes = np.diff([ce.annuli_family(N).total_curvature for N in (10, 20, 30)])
    assert np.allclose(slopes, -20 * np.pi)


@pytest.mark.parametrize("N", [1, 4, 12])
def test_annuli_quadrature_agrees(N):
    m = ce.annuli_family(N)
    K, P, A = ce.annuli_quadrature(N)
    assert K == pytest.approx(m.total_curvature, abs=1e-10)
    assert P == pytest.approx(m.perimeter, rel=1e-10)
    assert A == pytest.approx(m.area, rel=1e-10)


def test_annuli_holes_disjoint_and_inside():
    m = ce.annuli_family(40)
    d = np.abs(np.diff(m.centers[:, 0]))
    assert np.all(d > m.radii[:-1] + m.radii[1:])
    assert np.all(np.hypot(*m.centers.T) + m.radii < 10)


def test_annuli_overflow():
    with pytest.raises(ce.PlacementError):
        ce.annuli_family(5, outer=2.0)


def test_bump_constant_resolution_stable():
    a, b = ce.bump_cap_curvature(8), ce.bump_cap_curvature(16)
    assert abs(a - b) < 1e-6 and a > 0
    assert b == pytest.approx(np.pi * (1 + np.log(2)), rel=1e-12)


def test_bump_flux_identity():
    assert ce.bump_cap_flux(16) == pytest.approx(-np.sqrt(2) * np.pi, rel=1e-10)


def test_bump_profile_constraints():
    rho = np.linspace(0, 0.999, 200)
    phi = ce.bump_profile(rho)
    assert np.all((phi > 0) & (phi < 1))
    assert np.all(np.diff(phi, 2) < 0)  # concave
    assert np.all(np.abs(np.gradient(phi, rho)) <= 1 + 1e-9)


@pytest.mark.parametrize("N", [1, 5, 20])
def test_bump_partial_sums_are_harmonic(N):
    m = ce.bump_family(N)
    H = np.sum(1.0 / np.arange(1, N + 1))
    assert m.total_curvature / H == pytest.approx(m.cap_curvature, abs=1e-6)


def test_bump_divergence_signature():
    N = 50
    ratio = ce.bump_family(2 * N).total_curvature / ce.bump_family(N).total_curvature
    H = lambda n: np.sum(1.0 / np.arange(1, n + 1))
    assert ratio == pytest.approx(H(2 * N) / H(N), rel=1e-12)
    assert ratio > 1 + 0.5 * np.log(2) / np.log(N)


def test_bump_volume_and_perimeter_bounded():
    a, b = ce.bump_family(100), ce.bump_family(400)
    assert b.volume - a.volume < 1e-2 and b.perimeter - a.perimeter < 1e-2


def test_bump_star_margin():
    assert ce.bump_star_margin(ce.bump_family(30)) >= 10


@pytest.mark.parametrize("eps", [0.5, 0.25, 0.125])
def test_cone_hausdorff_and_area_bound(eps):
    m = ce.cone_family(eps)
    assert m.hausdorff == 1.0
    assert m.dtilde_sq <= 4 * m.sym_diff_area


def test_cone_dtilde_against_grid_oracle():
    assert ce.cone_family(0.5).dtilde_sq == pytest.approx(CONE_DTILDE_SQ_HALF, rel=2e-4)


def test_cone_dtilde_against_radial_sets():
    g = ss.DirectionGrid(2048)
    E = ss.RadialSet(g, ce.cone_spike_radius(g.theta, 0.5))
    d2 = ss.pseudo_distance_sq(ss.ball(1.0, 2048), E)
    assert d2 == pytest.approx(ce.cone_family(0.5).dtilde_sq, rel=1e-3)


def test_cone_ratio_grows():
    ratios = [ce.cone_family(2.0**-j).ratio for j in range(1, 9)]
    assert np.all(np.array(ratios[1:]) >= 1.5 * np.array(ratios[:-1]))


@pytest.mark.parametrize("k", sorted(TRANSLATE_DTILDE_SQ))
def test_translate_family(k):
    dH, d2 = ce.translate_family(k)
    assert dH == k
    assert d2 == pytest.approx(TRANSLATE_DTILDE_SQ[k], rel=1e-9)
    assert d2 <= 2 * np.pi * k**2


@pytest.mark.parametrize("bad", [0.0, 1.0])
def test_cone_eps_range(bad):
    with pytest.raises(ValueError):
        ce.cone_family(bad)
