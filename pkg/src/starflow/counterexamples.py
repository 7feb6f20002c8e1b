"""Families showing why the admissible class and the curvature bounds matter.

* ``annuli_family``: a disc with shrinking circular holes, bounded area and
  perimeter but total curvature ``2 pi (1 - N)``.
* ``bump_family``: a cube with rescaled concave caps attached to one face
  (three dimensions); the total mean curvature of the caps grows like the
  harmonic series while volume and area stay bounded.
* ``cone_family``: a unit disc with a thin spike reaching distance 2; the
  Hausdorff distance stays 1 while the pseudo-distance vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "PlacementError",
    "AnnuliMetrics",
    "BumpMetrics",
    "ConeMetrics",
    "annuli_family",
    "annuli_quadrature",
    "bump_profile",
    "bump_cap_curvature",
    "bump_cap_flux",
    "bump_family",
    "bump_star_margin",
    "cone_family",
    "cone_spike_radius",
    "translate_family",
]


class PlacementError(ValueError):
    """Holes or caps do not fit disjointly in the prescribed region."""


# --------------------------------------------------------------------------
# disc with holes


@dataclass
class AnnuliMetrics:
    N: int
    total_curvature: float
    perimeter: float
    area: float
    centers: np.ndarray
    radii: np.ndarray


def _place_holes(N: int, outer: float, gap_factor: float):
    """Holes of radius ``1/i^2`` in a row along the first axis.

    Each hole is followed by a gap of ``gap_factor`` times its radius; the row
    starts at ``-(outer - 1)``.
    """
    radii = 1.0 / np.arange(1, N + 1) ** 2
    x = -(outer - 1.0)
    centers = np.zeros((N, 2))
    for i, r in enumerate(radii):
        centers[i, 0] = x + r
        x += 2.0 * r + gap_factor * r
    if N and centers[-1, 0] + radii[-1] >= outer:
        raise PlacementError(f"{N} holes overflow the disc of radius {outer}")
    return centers, radii


def annuli_family(N: int, outer: float = 10.0, gap_factor: float = 1.0) -> AnnuliMetrics:
    """Closed-form metrics of the disc of radius ``outer`` minus ``N`` holes."""
    if N < 0:
        raise ValueError("N must be non-negative")
    centers, radii = _place_holes(N, outer, gap_factor)
    i = np.arange(1, N + 1, dtype=float)
    return AnnuliMetrics(
        N=N,
        total_curvature=2.0 * np.pi * (1 - N),
        perimeter=2.0 * np.pi * outer + 2.0 * np.pi * float(np.sum(1.0 / i**2)),
        area=np.pi * (outer**2 - float(np.sum(1.0 / i**4))),
        centers=centers,
        radii=radii,
    )


def annuli_quadrature(N: int, nodes: int = 64, outer: float = 10.0, gap_factor: float = 1.0):
    """Same metrics by trapezoid quadrature over each boundary circle.

    The outer circle is traversed counter-clockwise, holes clockwise, so the
    signed curvature of each hole is ``-1/r_i`` and Green's formula gives the
    enclosed area.
    """
    centers, radii = _place_holes(N, outer, gap_factor)
    t = 2.0 * np.pi * np.arange(nodes) / nodes
    dt = 2.0 * np.pi / nodes
    circles = [(np.zeros(2), outer, 1.0)] + [(c, r, -1.0) for c, r in zip(centers, radii)]
    K = P = A = 0.0
    for c, r, orient in circles:
        x = c[0] + r * np.cos(orient * t)
        y = c[1] + r * np.sin(orient * t)
        dx = -orient * r * np.sin(orient * t)
        dy = orient * r * np.cos(orient * t)
        ddx = -r * np.cos(orient * t)
        ddy = -r * np.sin(orient * t)
        speed = np.hypot(dx, dy)
        kappa = (dx * ddy - dy * ddx) / speed**3
        K += float(np.sum(kappa * speed)) * dt
        P += float(np.sum(speed)) * dt
        A += 0.5 * float(np.sum(x * dy - y * dx)) * dt
    return K, P, A


# --------------------------------------------------------------------------
# cube with caps (n = 3)


def bump_profile(rho):
    """Concave cap height ``(1 - rho^2) / 2`` on the unit disc, zero outside."""
    rho = np.asarray(rho, dtype=float)
    return np.where(rho < 1.0, 0.5 * (1.0 - rho**2), 0.0)


def _cap_integrand(rho):
    # H dsigma for the graph of (1 - rho^2)/2 written in polar coordinates:
    # H = (2 + rho^2) / (1 + rho^2)^(3/2), dsigma = sqrt(1 + rho^2) rho drho dtheta
    return 2.0 * np.pi * rho * (2.0 + rho**2) / (1.0 + rho**2)


def bump_cap_curvature(nodes: int = 16) -> float:
    """``int H dsigma`` over the unit cap by Gauss-Legendre in the radius."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    rho = 0.5 * (x + 1.0)
    return float(0.5 * np.sum(w * _cap_integrand(rho)))


def bump_cap_flux(nodes: int = 16) -> float:
    """``int_{B_1} div(D phi / sqrt(1 + |D phi|^2))``, the projected curvature integral."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    rho = 0.5 * (x + 1.0)
    # div(-rho e_rho / sqrt(1 + rho^2)) = -(2 + rho^2) / (1 + rho^2)^(3/2)
    f = -2.0 * np.pi * rho * (2.0 + rho**2) / (1.0 + rho**2) ** 1.5
    return float(0.5 * np.sum(w * f))


@dataclass
class BumpMetrics:
    N: int
    cap_curvature: float
    total_curvature: float
    volume: float
    perimeter: float
    centers: np.ndarray
    radii: np.ndarray


def _shelf_pack(radii, half_width: float):
    """Disjoint discs in ``[-half_width, half_width]^2`` by row (shelf) packing."""
    centers = np.zeros((len(radii), 2))
    y_top = half_width
    row_h = 0.0
    x = -half_width
    for i, r in enumerate(radii):
        if x + 2 * r > half_width:  # next row
            y_top -= row_h
            x = -half_width
            row_h = 0.0
        if row_h == 0.0:
            row_h = 2 * r
        if y_top - 2 * r < -half_width:
            raise PlacementError(f"cap {i + 1} does not fit in the packing square")
        centers[i] = (x + r, y_top - r)
        x += 2 * r
    return centers


def bump_family(N: int, nodes: int = 16, half_width: float = 7.0) -> BumpMetrics:
    """Cube ``[-40, 40]^3`` with ``N`` caps of radius ``1/i`` on the face ``x1 = 40``.

    Cap footprints are packed in ``[-7, 7]^2``, which lies inside the disc
    of radius 10 on that face.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    radii = 1.0 / np.arange(1, N + 1)
    centers = _shelf_pack(radii, half_width)
    C = bump_cap_curvature(nodes)
    i = np.arange(1, N + 1, dtype=float)
    cap_volume = np.pi / 4.0  # int (1 - rho^2)/2 over the unit disc
    cap_area = 2.0 * np.pi * (2.0**1.5 - 1.0) / 3.0  # int sqrt(1 + rho^2)
    side = 80.0
    return BumpMetrics(
        N=N,
        cap_curvature=C,
        total_curvature=C * float(np.sum(1.0 / i)),
        volume=side**3 + cap_volume * float(np.sum(radii**3)),
        perimeter=6.0 * side**2 + (cap_area - np.pi) * float(np.sum(radii**2)),
        centers=centers,
        radii=radii,
    )


def bump_star_margin(metrics: BumpMetrics, samples: int = 24) -> float:
    """``min x . n`` over a polar sample grid of every cap surface."""
    rho = (np.arange(samples) + 0.5) / samples
    th = 2.0 * np.pi * np.arange(samples) / samples
    R, T = np.meshgrid(rho, th, indexing="ij")
    y = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    phi = bump_profile(np.hypot(y[:, 0], y[:, 1]))
    dphi = -y  # gradient of (1 - |y|^2)/2
    norm = np.sqrt(1.0 + np.sum(dphi * dphi, axis=1))
    worst = np.inf
    for c, r in zip(metrics.centers, metrics.radii):
        x1 = 40.0 + r * phi
        xp = c + r * y
        xn = (x1 - np.sum(dphi * xp, axis=1)) / norm
        worst = min(worst, float(np.min(xn)))
    return worst


# --------------------------------------------------------------------------
# disc with a spike


@dataclass
class ConeMetrics:
    eps: float
    hausdorff: float
    dtilde: float
    dtilde_sq: float
    sym_diff_area: float
    ratio: float


def _spike_angles(eps, apex=2.0):
    phi_t = np.arccos(eps / apex)  # polar angle of the upper tangent point
    theta1 = phi_t - np.arccos(eps)  # where the upper side meets the unit circle
    return phi_t, theta1


def cone_spike_radius(theta, eps: float, apex: float = 2.0):
    """Radial function of ``B_1 u conv({apex e1} u B_eps)``."""
    phi_t, _ = _spike_angles(eps, apex)
    th = np.abs(np.angle(np.exp(1j * np.asarray(theta, dtype=float))))
    side = np.where(th < phi_t, eps / np.cos(np.clip(phi_t - th, 0.0, np.pi / 2 - 1e-15)), 0.0)
    return np.maximum(1.0, side)


def cone_family(eps: float, rtol: float = 1e-10) -> ConeMetrics:
    """Hausdorff and pseudo-distance between ``B_1`` and the spiked disc.

    The pseudo-distance is measured to the boundary of the spiked disc, over
    the part of the spike outside ``B_1``; by symmetry twice the upper half,
    where the nearest boundary piece is the upper side of the spike.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    phi_t, theta1 = _spike_angles(eps)
    apex = np.array([2.0, 0.0])
    corner = np.array([np.cos(theta1), np.sin(theta1)])
    # area outside the unit disc between the two sides
    area = eps * (2.0 * np.sqrt(1.0 - eps**2 / 4.0) - np.sqrt(1.0 - eps**2)) - theta1

    ab = corner - apex
    ab2 = ab @ ab

    def integrand(rho, th):
        p = np.array([rho * np.cos(th), rho * np.sin(th)])
        t = np.clip((p - apex) @ ab / ab2, 0.0, 1.0)
        return np.hypot(*(p - apex - t * ab)) * rho

    upper = lambda th: eps / np.cos(phi_t - th)
    val, _ = integrate.dblquad(integrand, 0.0, theta1, 1.0, upper, epsabs=0.0, epsrel=rtol)
    d2 = 2.0 * val
    return ConeMetrics(eps, 1.0, float(np.sqrt(d2)), float(d2), float(area), float(1.0 / d2))


def translate_family(k: int):
    """``(d_H, dtilde^2)`` between ``conv({(k+1) e1} u B_1)`` and ``B_1``.

    The pseudo-distance is to the boundary of ``B_1``, i.e. ``|x| - 1``.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    phi_t = np.arccos(1.0 / (k + 1))

    def inner(th):
        R = 1.0 / np.cos(phi_t - th)
        return R**3 / 3.0 - R**2 / 2.0 + 1.0 / 6.0

    val, _ = integrate.quad(inner, 0.0, phi_t, epsabs=0.0, epsrel=1e-12, limit=200)
    return float(k), float(2.0 * val)
