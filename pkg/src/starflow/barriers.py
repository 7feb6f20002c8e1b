"""Exact radial dynamics for balls and ball barriers driven by a forcing.

A centred ball stays a ball under ``V = -H + lambda``; its radius obeys

    r' = -1/r + lambda(t),

with ``lambda = (1 - pi r^2) / delta`` for the penalized volume forcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import starset as ss
from .geochecks import CheckReport
from .starset import RadialSet, TimeForcing

__all__ = [
    "CollapseError",
    "RadialODEState",
    "BarrierPair",
    "radial_rhs",
    "radial_ode",
    "barrier_sets",
    "comparison_probe",
    "ordering_probe",
]


class CollapseError(ArithmeticError):
    """The ball radius reached zero during integration."""


@dataclass(frozen=True)
class RadialODEState:
    """Radius ``r`` at time ``t`` under a penalty (``delta``) or prescribed forcing.

    Exactly one of ``delta`` and ``forcing`` is used; with ``delta=None`` and
    no forcing the ball follows curvature alone.
    """

    r: float
    t: float = 0.0
    delta: float | None = None
    forcing: TimeForcing | None = None

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be positive")
        if self.delta is not None and self.forcing is not None:
            raise ValueError("give either delta or a prescribed forcing, not both")

    def rate(self, r, t):
        return radial_rhs(r, t, self.delta, self.forcing)


def radial_rhs(r, t, delta=None, forcing=None):
    lam = 0.0
    if delta is not None:
        lam = (1.0 - np.pi * r * r) / delta
    elif forcing is not None:
        lam = float(forcing(t))
    return -1.0 / r + lam


def radial_ode(r0: float, T: float, dt: float, delta: float | None = None, forcing=None, t0: float = 0.0):
    """Classical RK4 for the ball radius.

    Returns
    -------
    t, r : ndarray
        Sample times ``t0 + k dt`` (the last step is shortened to land on
        ``t0 + T``) and radii.

    Raises
    ------
    CollapseError
        If the radius becomes non-positive.
    """
    state = RadialODEState(r0, t0, delta, forcing)
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(np.ceil(T / dt - 1e-9))
    ts = t0 + np.minimum(np.arange(n + 1) * dt, T)
    rs = np.empty(n + 1)
    rs[0] = r = r0
    f = state.rate
    for k in range(n):
        t, step = ts[k], ts[k + 1] - ts[k]
        try:
            k1 = f(r, t)
            k2 = f(r + 0.5 * step * k1, t + 0.5 * step)
            k3 = f(r + 0.5 * step * k2, t + 0.5 * step)
            k4 = f(r + step * k3, t + step)
        except ZeroDivisionError as exc:
            raise CollapseError(f"collapse at t={t:.6g}") from exc
        r = r + step * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if not r > 0 or not np.isfinite(r):
            raise CollapseError(f"collapse at t={ts[k + 1]:.6g}")
        rs[k + 1] = r
    return ts, rs


@dataclass(frozen=True)
class BarrierPair:
    """Balls ``B_{c - Lambda(t)}`` and ``B_{c + Lambda(t)}``."""

    c: float
    forcing: TimeForcing

    def radii(self, t):
        L = float(self.forcing.Lambda(t))
        return self.c - L, self.c + L

    def sets(self, t, M: int = 256):
        return barrier_sets(self.c, self.forcing, t, M)


def barrier_sets(c: float, Lambda, t: float, M: int = 256):
    """Inner and outer barrier balls at time ``t``.

    ``Lambda`` is a :class:`TimeForcing` or a callable giving the running
    integral of the forcing.  The inner ball is ``None`` (empty) once
    ``c - Lambda(t) <= 0``.
    """
    L = float(Lambda.Lambda(t) if isinstance(Lambda, TimeForcing) else Lambda(t))
    lo, hi = c - L, c + L
    inner = ss.ball(lo, M) if lo > 0 else None
    outer = ss.ball(hi, M) if hi > 0 else None
    return inner, outer


def comparison_probe(trace, smaller=None, larger=None, tol: float = 1e-10) -> CheckReport:
    """Confinement in ``B_{R1}`` and, optionally, ordering of two ball runs.

    Parameters
    ----------
    trace : FlowTrace
        Every set must lie in ``B_{R1}``, ``R1 = 5 rho + sqrt(pi)``.
    smaller, larger : FlowTrace, optional
        Runs started from nested data; ``larger`` must contain ``smaller``
        radius-wise at every step.
    """
    R1 = trace.params.confinement_radius
    rmax = np.array([np.max(S.radii) for S in trace.sets])
    k = int(np.argmax(rmax))
    worst = R1 - rmax[k]
    witness = {"confinement_radius": R1, "max_radius": rmax[k], "step": k}
    if smaller is not None and larger is not None:
        rep = ordering_probe(smaller, larger, tol)
        witness["ordering"] = rep.witness
        if rep.worst_margin < worst:
            worst = rep.worst_margin
    return CheckReport.from_margin("comparison", worst, tol, witness)


def ordering_probe(smaller, larger, tol: float = 1e-10) -> CheckReport:
    """``min_k min_i (r_larger - r_smaller)`` over the common steps."""
    n = min(len(smaller), len(larger))
    gaps = np.array([np.min(larger.sets[k].radii - smaller.sets[k].radii) for k in range(n)])
    k = int(np.argmin(gaps))
    return CheckReport.from_margin("ordering", gaps[k], tol, {"step": k, "gap": gaps[k], "steps": n})
