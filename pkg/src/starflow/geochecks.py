"""Sampled verifiers for the geometric properties a star-shaped flow relies on.

Every checker returns a :class:`CheckReport` whose ``worst_margin`` is signed
(negative means violated) and whose ``tolerance`` is the resolution allowance
of the discretization.  A check passes iff ``worst_margin >= -tolerance``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .starset import (
    RadialSet,
    contains,
    curvature,
    distance_to_boundary,
    radius_at,
    signed_distance,
)

__all__ = [
    "CheckReport",
    "ConeSpec",
    "resolution_tolerance",
    "check_star_shaped",
    "star_margins",
    "check_cones",
    "check_rho_reflection",
    "min_reflection_radius",
    "width_bound",
    "rho_to_starball",
    "density_constants",
    "local_density",
    "check_density",
]


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_margin: float
    witness: dict = field(default_factory=dict)
    tolerance: float = 0.0
    seed: int | None = None

    @classmethod
    def from_margin(cls, name, margin, tolerance, witness=None, seed=None):
        margin = float(margin)
        return cls(name, bool(margin >= -tolerance), margin, witness or {}, float(tolerance), seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["witness"] = _jsonable(d["witness"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        return cls(
            d["name"], bool(d["passed"]), float(d["worst_margin"]),
            dict(d.get("witness", {})), float(d.get("tolerance", 0.0)), d.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass(frozen=True)
class ConeSpec:
    """Interior or exterior cone attached to the boundary point ``apex``.

    The interior cone is the convex hull of ``apex`` and ``B_r(0)``; the
    exterior cone opens away from the origin along ``apex`` with half-angle
    ``arcsin(r / |apex|)``, truncated to ``B_eps(apex)``.
    """

    apex: np.ndarray
    r: float
    sense: str = "interior"
    eps: float | None = None

    def __post_init__(self):
        apex = np.asarray(self.apex, dtype=float)
        object.__setattr__(self, "apex", apex)
        if not self.r < np.hypot(*apex):
            raise ValueError("cone radius must be smaller than |apex|")
        if self.sense not in ("interior", "exterior"):
            raise ValueError(f"unknown cone sense {self.sense!r}")

    @property
    def aperture(self) -> float:
        return float(np.arcsin(self.r / np.hypot(*self.apex)))

    @property
    def axis(self) -> np.ndarray:
        a = self.apex / np.hypot(*self.apex)
        return -a if self.sense == "interior" else a

    def boundary_samples(self, k: int = 16) -> np.ndarray:
        """Points on the two straight sides of the cone, apex excluded."""
        x = self.apex
        if self.sense == "interior":
            # sides run to the tangent points of B_r
            phi = np.arctan2(x[1], x[0])
            alpha = np.arccos(self.r / np.hypot(*x))
            tips = self.r * np.array(
                [[np.cos(phi + alpha), np.sin(phi + alpha)], [np.cos(phi - alpha), np.sin(phi - alpha)]]
            )
        else:
            eps = self.eps if self.eps is not None else self.r
            th = self.aperture
            ax = self.axis
            rot = lambda a: np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
            tips = x + eps * np.stack([rot(th) @ ax, rot(-th) @ ax])
        t = np.arange(1, k + 1) / k
        return (x[None, None, :] + t[None, :, None] * (tips - x)[:, None, :]).reshape(-1, 2)


def resolution_tolerance(S: RadialSet) -> float:
    """Sagitta-type allowance for sampled inside tests against the polygon."""
    edge = float(np.max(S.edge_lengths))
    kappa = float(np.max(np.clip(curvature(S), 0.0, None)))
    kappa = max(kappa, 1.0 / float(np.max(S.radii)))
    return edge**2 * kappa / 4.0 + 1e-12


# --------------------------------------------------------------------------
# star-shapedness with respect to a ball


def star_margins(S: RadialSet) -> np.ndarray:
    """``x_i . n_i = r_i^2 / sqrt(r_i^2 + r_i'^2)`` at every node."""
    r, dr = S.radii, S.dr
    return r**2 / np.hypot(r, dr)


def check_star_shaped(S: RadialSet, r: float, tol: float = 1e-9) -> CheckReport:
    """Star-shapedness with respect to ``B_r(0)`` via ``x . n >= r``."""
    xn = star_margins(S)
    i = int(np.argmin(xn))
    j = int(np.argmin(S.radii))
    m_star = xn[i] - r
    m_contain = S.radii[j] - r
    if m_star <= m_contain:
        witness = {"kind": "normal", "index": i, "theta": S.grid.theta[i], "x_dot_n": xn[i]}
    else:
        witness = {"kind": "containment", "index": j, "theta": S.grid.theta[j], "radius": S.radii[j]}
    return CheckReport.from_margin("star_shaped", min(m_star, m_contain), tol, witness)


def check_cones(
    S: RadialSet,
    r: float,
    eps: float | None = None,
    samples_per_side: int = 16,
    stride: int = 1,
    tol: float | None = None,
) -> CheckReport:
    """Interior cones inside ``S`` and exterior cones outside, at every
    ``stride``-th boundary vertex.

    Margins are radial: for a cone sample ``p`` the interior margin is
    ``r_S(p) - |p|`` and the exterior margin is ``|p| - r_S(p)``.
    """
    if tol is None:
        tol = resolution_tolerance(S)
    if np.min(S.radii) <= r:
        j = int(np.argmin(S.radii))
        return CheckReport.from_margin(
            "cones", S.radii[j] - r, tol, {"kind": "containment", "index": j}
        )
    worst = np.inf
    witness = {}
    idx = np.arange(0, S.M, stride)
    for sense in ("interior", "exterior"):
        pts = []
        for i in idx:
            cone = ConeSpec(S.points[i], r, sense, eps)
            pts.append(cone.boundary_samples(samples_per_side))
        pts = np.stack(pts)  # (n_apex, 2k, 2)
        flat = pts.reshape(-1, 2)
        rho = np.hypot(flat[:, 0], flat[:, 1])
        rs = radius_at(S, np.arctan2(flat[:, 1], flat[:, 0]))
        m = (rs - rho) if sense == "interior" else (rho - rs)
        m = m.reshape(len(idx), -1).min(axis=1)
        k = int(np.argmin(m))
        if m[k] < worst:
            worst = float(m[k])
            witness = {"sense": sense, "index": int(idx[k]), "theta": S.grid.theta[idx[k]]}
    return CheckReport.from_margin("cones", worst, tol, witness)


# --------------------------------------------------------------------------
# rho-reflection


def check_rho_reflection(
    S: RadialSet,
    rho: float,
    n_dirs: int = 64,
    n_offsets: int = 64,
    tol: float | None = None,
    refine: int = 16,
) -> CheckReport:
    """Moving-plane reflection property beyond distance ``rho``.

    For plane normals ``nu`` on a uniform grid and offsets
    ``s in (rho, max |x|]`` (clustered towards ``rho``), every boundary vertex beyond the plane is
    reflected across it and must land in the closure of ``S``.  The reported
    margin is minus the signed distance of the worst reflected point, refined
    with exact polygon distances on the ``refine`` worst candidates.
    """
    if rho < 0:
        raise ValueError("rho must be non-negative")
    if tol is None:
        tol = resolution_tolerance(S)
    d0 = distance_to_boundary(np.zeros(2), S)
    worst = d0 - rho
    witness = {"kind": "ball", "distance_to_origin": d0}

    X = S.points
    rmax = float(np.max(S.radii))
    if rmax > rho:
        ang = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
        nu = np.column_stack([np.cos(ang), np.sin(ang)])
        # quadratic spacing resolves planes just beyond rho
        s = rho + (rmax - rho) * (np.arange(1, n_offsets + 1) / n_offsets) ** 2
        proj = X @ nu.T  # (M, D)
        cand_val, cand_pts, cand_meta = [], [], []
        for d in range(n_dirs):
            beyond = proj[:, d][None, :] > s[:, None]  # (S, M)
            ks, ms = np.nonzero(beyond)
            if ks.size == 0:
                continue
            shift = 2.0 * (proj[ms, d] - s[ks])
            Y = X[ms] - shift[:, None] * nu[d]
            ry = np.hypot(Y[:, 0], Y[:, 1])
            m = radius_at(S, np.arctan2(Y[:, 1], Y[:, 0])) - ry
            order = np.argsort(m)[:refine]
            cand_val.append(m[order])
            cand_pts.append(Y[order])
            cand_meta.append(np.column_stack([np.full(order.size, d), ks[order], ms[order]]))
        if cand_val:
            vals = np.concatenate(cand_val)
            pts = np.concatenate(cand_pts)
            meta = np.concatenate(cand_meta)
            order = np.argsort(vals)[:refine]
            sd = -np.atleast_1d(signed_distance(pts[order], S))
            k = int(np.argmin(sd))
            if sd[k] < worst:
                d, ks, ms = meta[order[k]]
                worst = float(sd[k])
                witness = {
                    "kind": "plane",
                    "normal_angle": ang[d],
                    "offset": s[ks],
                    "vertex": int(ms),
                    "reflected": pts[order[k]],
                }
    return CheckReport.from_margin("rho_reflection", worst, tol, witness)


def min_reflection_radius(S: RadialSet, n_dirs=64, n_offsets=64, iters=30, tol=None) -> float:
    """Smallest ``rho`` (to bisection accuracy) at which the reflection check passes."""
    hi = distance_to_boundary(np.zeros(2), S)
    if not check_rho_reflection(S, hi, n_dirs, n_offsets, tol).passed:
        raise ValueError("reflection check fails even at the inradius")
    lo = 0.0
    if check_rho_reflection(S, lo, n_dirs, n_offsets, tol).passed:
        return 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if check_rho_reflection(S, mid, n_dirs, n_offsets, tol).passed:
            hi = mid
        else:
            lo = mid
    return hi


def width_bound(S: RadialSet, rho: float, tol: float = 1e-12) -> CheckReport:
    """Radial oscillation ``max r - min r`` against ``4 rho``."""
    width = float(np.max(S.radii) - np.min(S.radii))
    return CheckReport.from_margin(
        "width_bound", 4.0 * rho - width, tol, {"width": width, "bound": 4.0 * rho}
    )


def rho_to_starball(S: RadialSet, rho: float) -> float:
    """Radius of a ball the set is star-shaped about, given ``rho``-reflection."""
    rmin = float(np.min(S.radii))
    if rmin <= rho:
        raise ValueError(f"minimum radius {rmin:.6g} does not exceed rho={rho:.6g}")
    return float(np.sqrt(rmin**2 - rho**2))


# --------------------------------------------------------------------------
# density estimates


def density_constants(r: float, R: float, eps0: float, n_samples: int = 400_000, seed: int = 0) -> dict:
    """Lower/upper constants for the local volume and perimeter densities.

    ``eta1`` is the area of the unit-truncated interior cone at distance
    ``R`` (Monte Carlo, seeded), ``eta2 = 2 pi sqrt(1 + L^2)`` with ``L``
    the graph slope allowed by the cone aperture over a ball of radius
    ``eps0``, and ``eta3 = sqrt(eta1)`` follows from the relative isoperimetric
    inequality in a disc (constant at least 1).
    """
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    rng = np.random.default_rng(seed)
    # uniform samples in B_1(R e1)
    u = rng.random(n_samples)
    a = 2.0 * np.pi * rng.random(n_samples)
    pts = np.column_stack([R + np.sqrt(u) * np.cos(a), np.sqrt(u) * np.sin(a)])
    inside = _in_interior_cone(pts, np.array([R, 0.0]), r)
    frac = inside.mean()
    eta1 = float(np.pi * frac)
    stderr = float(np.pi * np.sqrt(frac * (1 - frac) / n_samples))
    tilt = np.arccos(r / R) + eps0 / r
    if tilt >= np.pi / 2:
        raise ValueError("eps0 too large for a finite slope bound")
    eta2 = float(2.0 * np.pi * np.sqrt(1.0 + np.tan(tilt) ** 2))
    eta1_safe = eta1 - 4.0 * stderr
    return {
        "eta1": eta1_safe,
        "eta1_estimate": eta1,
        "eta1_stderr": stderr,
        "eta2": eta2,
        "eta3": float(np.sqrt(eta1_safe)),
        "r": r,
        "R": R,
        "eps0": eps0,
        "n_samples": n_samples,
        "seed": seed,
        "method": "monte-carlo",
    }


def _in_interior_cone(pts, x, r):
    """Membership in conv({x} U B_r(0))."""
    pts = np.atleast_2d(pts)
    if np.hypot(*x) <= r:
        return np.hypot(pts[:, 0], pts[:, 1]) <= r
    in_ball = np.hypot(pts[:, 0], pts[:, 1]) <= r
    # the hull minus the ball is bounded by the two tangent lines through x
    ax = x / np.hypot(*x)
    theta = np.arcsin(r / np.hypot(*x))
    v = pts - x
    dist = np.hypot(v[:, 0], v[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = (v @ -ax) / dist
    in_wedge = (dist == 0) | (cosang >= np.cos(theta))
    # and on the apex side of the chord joining the tangent points
    chord = r * np.cos(np.arccos(r / np.hypot(*x)))
    beyond_chord = pts @ ax >= chord
    return in_ball | (in_wedge & beyond_chord)


def _disc_polar_grid(n_rad: int, n_ang: int):
    """Midpoint polar quadrature on the unit disc: nodes and area weights."""
    t_edges = np.linspace(0.0, 1.0, n_rad + 1)
    t = 0.5 * (t_edges[1:] + t_edges[:-1])
    w_t = 0.5 * (t_edges[1:] ** 2 - t_edges[:-1] ** 2)
    a = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
    pts = (t[:, None, None] * np.stack([np.cos(a), np.sin(a)], axis=-1)[None]).reshape(-1, 2)
    w = np.repeat(w_t, n_ang) * (2.0 * np.pi / n_ang)
    return pts, w


def _length_in_disc(S: RadialSet, c, eps) -> float:
    """Exact length of the boundary polygon inside ``B_eps(c)``."""
    a = S.points - c
    b = np.roll(S.points, -1, axis=0) - c
    d = b - a
    A = np.sum(d * d, axis=1)
    B = 2.0 * np.sum(a * d, axis=1)
    C = np.sum(a * a, axis=1) - eps**2
    disc = B * B - 4 * A * C
    ok = disc > 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = np.clip((-B - sq) / (2 * A), 0.0, 1.0)
    t1 = np.clip((-B + sq) / (2 * A), 0.0, 1.0)
    frac = np.where(ok, t1 - t0, 0.0)
    return float(np.sum(frac * np.sqrt(A)))


def local_density(S: RadialSet, x, eps: float, n_rad: int = 48, n_ang: int = 192):
    """``(|S n B_eps(x)|, |B_eps(x) \\ S|, Per(S; B_eps(x)))``."""
    x = np.asarray(x, dtype=float)
    nodes, w = _disc_polar_grid(n_rad, n_ang)
    inside = contains(S, x + eps * nodes)
    area = np.pi * eps**2
    vin = float(np.sum(w[inside])) * eps**2
    return vin, area - vin, _length_in_disc(S, x, eps)


def check_density(
    S: RadialSet,
    r: float,
    R: float,
    eps_grid=(0.025, 0.05, 0.1),
    n_points: int = 24,
    seed: int = 0,
    constants: dict | None = None,
    tol: float | None = None,
) -> CheckReport:
    """Two-sided local volume and perimeter densities at sampled boundary points.

    Margins are normalised: ``|S n B_eps|/eps^2 - eta1``, the same for the
    complement, ``Per/eps - eta3`` and ``eta2 - Per/eps``.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if constants is None:
        constants = density_constants(r, R, float(eps_grid.max()), seed=seed)
    if tol is None:
        # midpoint-rule resolution of the disc quadrature plus the polygon sagitta
        tol = 0.02 + resolution_tolerance(S) / float(eps_grid.min())
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(S.M, size=min(n_points, S.M), replace=False))
    e1, e2, e3 = constants["eta1"], constants["eta2"], constants["eta3"]
    worst, witness = np.inf, {}
    for i in idx:
        x = S.points[i]
        for eps in eps_grid:
            vin, vout, per = local_density(S, x, eps)
            margins = {
                "volume_inside": vin / eps**2 - e1,
                "volume_outside": vout / eps**2 - e1,
                "perimeter_lower": per / eps - e3,
                "perimeter_upper": e2 - per / eps,
            }
            key = min(margins, key=margins.get)
            if margins[key] < worst:
                worst = margins[key]
                witness = {"index": int(i), "eps": eps, "bound": key}
    witness["constants"] = {k: constants[k] for k in ("eta1", "eta2", "eta3", "method", "seed")}
    return CheckReport.from_margin("density", worst, tol, witness, seed)
