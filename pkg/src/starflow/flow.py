"""Penalized-volume minimizing movements for star-shaped planar sets.

One step of the scheme replaces ``E`` by a minimizer of

    Phi(F) = Per(F) + (1 - |F|)^2 / (2 delta) + dtilde^2(F, E) / h

over radial sets ``F`` that are star-shaped with respect to ``B_r0`` and lie
inside ``B_R0``.  The multiplier of the discrete flow is
``lambda = (1 - |E_k|) / delta``.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import brentq, minimize

from . import starset as ss
from .geochecks import CheckReport, check_rho_reflection, check_star_shaped, star_margins
from .starset import RadialSet

__all__ = [
    "ConfigError",
    "StepFailed",
    "FlowParams",
    "FlowTrace",
    "StepInfo",
    "VariationField",
    "dilation_field",
    "shrink_field",
    "gamma_delta",
    "energy",
    "energy_gradient",
    "step_objective",
    "delta_0",
    "rho_max",
    "mm_step",
    "run_flow",
    "equilibrium_volume",
    "equilibrium_radius",
    "lambda_l2",
    "dissipation_report",
    "holder_fit",
    "holder_check",
    "first_variation_perimeter",
    "first_variation_volume",
    "dtilde_first_variation",
    "euler_lagrange_check",
    "boundary_distance_sq",
    "variation_feasibility",
]


class ConfigError(ValueError):
    """Invalid flow configuration."""


class StepFailed(RuntimeError):
    """The inner solver found no acceptable minimizer; carries diagnostics."""

    def __init__(self, message, **diagnostics):
        super().__init__(f"step-failed: {message}")
        self.diagnostics = diagnostics


# --------------------------------------------------------------------------
# parameters


def rho_max(n: int = 2) -> float:
    """Largest admissible reflection radius, ``1 / (5 |B_1|^(1/n))``."""
    return 1.0 / (5.0 * np.sqrt(np.pi)) if n == 2 else _unsupported(n)


def delta_0(rho: float, n: int = 2) -> float:
    """Penalty threshold ``rho (1 - |B_{5 rho}|) / (n - 1)``."""
    if n != 2:
        _unsupported(n)
    return rho * (1.0 - np.pi * (5.0 * rho) ** 2) / (n - 1)


def _unsupported(n):
    raise ConfigError(f"only n=2 is supported, got n={n}")


@dataclass(frozen=True)
class FlowParams:
    """Configuration of one discrete flow run.

    Attributes
    ----------
    delta : float
        Volume penalty scale.
    h : float
        Time step.
    r0, R0 : float
        Star-shape ball radius and confinement radius of the admissible class.
    rho : float
        Reflection radius of the initial datum.
    T : float
        Time horizon; the run has ``round(T / h)`` steps.
    M : int
        Number of directions.
    gtol : float
        First-order tolerance of the inner solver, in curvature units.
    max_iter : int
        Newton iteration cap per step.
    max_residual : float
        Residual above which a step is reported as failed.
    enforce_admissible_bounds : bool
        Reject ``delta >= delta_0(rho)`` and ``rho >= rho_max``.
    check_unit_volume : bool
        Require ``|E0| = 1`` within ``1e-6`` before running.
    check_reflection : bool
        Verify ``rho``-reflection of the initial datum before running.
    """

    delta: float
    h: float
    r0: float
    R0: float
    rho: float
    T: float
    M: int = 256
    n: int = 2
    gtol: float = 1e-9
    max_iter: int = 50
    max_residual: float = 1e-5
    enforce_admissible_bounds: bool = True
    check_unit_volume: bool = True
    check_reflection: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n != 2:
            _unsupported(self.n)
        if not (self.delta > 0 and self.h > 0 and self.T >= 0):
            raise ConfigError("delta and h must be positive and T non-negative")
        if not 0 < self.r0 < self.R0:
            raise ConfigError(f"need 0 < r0 < R0, got r0={self.r0}, R0={self.R0}")
        if self.rho < 0:
            raise ConfigError("rho must be non-negative")
        if self.M < 16:
            raise ConfigError("M must be at least 16")
        if self.enforce_admissible_bounds:
            if self.rho >= rho_max(self.n):
                raise ConfigError(
                    f"rho exceeds rho_max: rho={self.rho} >= {rho_max(self.n):.6g}"
                )
            d0 = delta_0(self.rho, self.n)
            if self.delta >= d0:
                raise ConfigError(f"delta exceeds delta_0: delta={self.delta} >= {d0:.6g}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.h))

    @property
    def delta_0(self) -> float:
        return delta_0(self.rho, self.n)

    @property
    def confinement_radius(self) -> float:
        """``5 rho + |B_1|^(-1/2)`` scaled so that ``|B| = 1``."""
        return 5.0 * self.rho + np.sqrt(np.pi)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FlowParams":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown flow parameters: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw) -> "FlowParams":
        return FlowParams(**{**self.to_dict(), **kw})


# --------------------------------------------------------------------------
# energy pieces on raw radii


def gamma_delta(v, delta: float):
    """Penalty forcing ``(1 - v) / delta``."""
    return (1.0 - np.asarray(v, dtype=float)) / delta if np.ndim(v) else (1.0 - v) / delta


def _perimeter_terms(r: np.ndarray, dth: float, hess: bool = False):
    rn = np.roll(r, -1)
    rbar = 0.5 * (r + rn)
    q = (rn - r) / dth
    s = np.hypot(rbar, q)
    P = float(np.sum(s)) * dth
    a = 0.5 * rbar * dth / s  # shared rbar part
    b = q / s
    g = (a - b) + np.roll(a + b, 1)
    if not hess:
        return P, g
    # Hessian of s(rbar, q) is (1/s^3) [[q^2, -rbar q], [-rbar q, rbar^2]]
    s3 = s**3
    Haa, Hab, Hbb = q * q / s3, -rbar * q / s3, rbar * rbar / s3
    # d(rbar, q)/d(r_i) = (1/2, -1/dth); d/d(r_{i+1}) = (1/2, 1/dth)
    ji = np.array([0.5, -1.0 / dth])
    jj = np.array([0.5, 1.0 / dth])

    def quad(u, v):
        return dth * (
            Haa * u[0] * v[0] + Hab * (u[0] * v[1] + u[1] * v[0]) + Hbb * u[1] * v[1]
        )

    d_ii, d_jj, d_ij = quad(ji, ji), quad(jj, jj), quad(ji, jj)
    M = len(r)
    H = np.zeros((M, M))
    idx = np.arange(M)
    nxt = (idx + 1) % M
    H[idx, idx] += d_ii
    H[nxt, nxt] += d_jj
    H[idx, nxt] += d_ij
    H[nxt, idx] += d_ij
    return P, g, H


def energy_gradient(radii, delta: float):
    """Value and gradient of ``Per + (1 - |F|)^2 / (2 delta)`` in the radii."""
    r = np.asarray(radii, dtype=float)
    dth = 2.0 * np.pi / len(r)
    P, gP = _perimeter_terms(r, dth)
    V = 0.5 * float(np.sum(r * r)) * dth
    lam = (1.0 - V) / delta
    return P + 0.5 * delta * lam * lam, gP - lam * r * dth


def energy(S: RadialSet, delta: float) -> float:
    """``Per(S) + (1 - |S|)^2 / (2 delta)``."""
    return ss.perimeter(S) + (1.0 - ss.volume(S)) ** 2 / (2.0 * delta)


def step_objective(F: RadialSet, E: RadialSet, params: FlowParams) -> float:
    """``energy(F) + dtilde^2(F, E) / h``."""
    return energy(F, params.delta) + ss.pseudo_distance_sq(F, E) / params.h


class _Objective:
    """Step objective on raw radii with cached pieces."""

    def __init__(self, E: RadialSet, params: FlowParams):
        self.E = E
        self.p = params
        self.dth = E.grid.dtheta
        self.rE = np.array(E.radii)

    def value(self, r):
        P, _ = _perimeter_terms(r, self.dth)
        V = 0.5 * float(np.sum(r * r)) * self.dth
        D = float(np.sum(ss._pseudo_terms(r, self.E)))
        return P + (1.0 - V) ** 2 / (2.0 * self.p.delta) + D / self.p.h

    def excess(self, r):
        """``Phi(r) - Phi(r_E)`` evaluated without cancellation.

        Near a stationary point the decrease of one step can be far below
        the round-off of ``Phi`` itself, so perimeter and penalty changes are
        formed from radius differences.
        """
        a = self.rE
        dth = self.dth
        du = r - a
        dbar = 0.5 * (du + np.roll(du, -1))
        dq = (np.roll(du, -1) - du) / dth
        rn, an = np.roll(r, -1), np.roll(a, -1)
        bar_r, bar_a = 0.5 * (r + rn), 0.5 * (a + an)
        q_r, q_a = (rn - r) / dth, (an - a) / dth
        s_r, s_a = np.hypot(bar_r, q_r), np.hypot(bar_a, q_a)
        dP = float(np.sum((dbar * (bar_r + bar_a) + dq * (q_r + q_a)) / (s_r + s_a))) * dth
        dV = 0.5 * float(np.sum(du * (r + a))) * dth
        V_a = 0.5 * float(np.sum(a * a)) * dth
        V_r = V_a + dV
        dPen = -dV * (2.0 - V_r - V_a) / (2.0 * self.p.delta)
        D = float(np.sum(ss._pseudo_terms(r, self.E)))
        return dP + dPen + D / self.p.h

    def full(self, r, hess=True):
        dth, delta, h = self.dth, self.p.delta, self.p.h
        out = _perimeter_terms(r, dth, hess=hess)
        P, gP = out[0], out[1]
        V = 0.5 * float(np.sum(r * r)) * dth
        lam = (1.0 - V) / delta
        vals, dD, hD = ss._pseudo_terms(r, self.E, grad=True)
        f = P + 0.5 * delta * lam * lam + float(np.sum(vals)) / h
        g = gP - lam * r * dth + dD / h
        if not hess:
            return f, g
        gv = r * dth
        H = out[2] + np.outer(gv, gv) / delta
        H[np.diag_indices_from(H)] += hD / h - lam * dth
        return f, g, H

    def feasible(self, r):
        if not np.all(np.isfinite(r)) or np.any(r <= 0) or np.max(r) > self.p.R0:
            return False
        return float(np.min(_star(r, self.dth))) >= self.p.r0

    def constraint_margin(self, r):
        return min(float(np.min(_star(r, self.dth))) - self.p.r0, self.p.R0 - float(np.max(r)))


def _star(r, dth):
    dr = (np.roll(r, -1) - np.roll(r, 1)) / (2.0 * dth)
    return r * r / np.hypot(r, dr)


def _star_jac(r, dth):
    M = len(r)
    dr = (np.roll(r, -1) - np.roll(r, 1)) / (2.0 * dth)
    s = np.hypot(r, dr)
    di = r * (r * r + 2 * dr * dr) / s**3
    dd = -r * r * dr / s**3 / (2.0 * dth)
    J = np.zeros((M, M))
    idx = np.arange(M)
    J[idx, idx] = di
    J[idx, (idx + 1) % M] += dd
    J[idx, (idx - 1) % M] -= dd
    return J


def _residual(obj: _Objective, r, g):
    """First-order residual in curvature units, ignoring constrained nodes.

    Nodes whose star margin (or its neighbours') is within ``1e-7`` of the
    bound, and radii at ``R0``, are treated as active constraints.
    """
    star = _star(r, obj.dth) - obj.p.r0
    active = star < 1e-7
    active = active | np.roll(active, 1) | np.roll(active, -1)
    active |= r > obj.p.R0 - 1e-9
    free = ~active
    if not np.any(free):
        return 0.0
    return float(np.max(np.abs(g[free]))) / obj.dth


@dataclass
class StepInfo:
    iters: int = 0
    residual: float = np.nan
    objective: float = np.nan
    objective_start: float = np.nan
    method: str = "newton"
    seconds: float = 0.0


def _newton(obj: _Objective, r, info: StepInfo):
    p = obj.p
    _, g, H = obj.full(r)
    f = obj.excess(r)
    for it in range(1, p.max_iter + 1):
        res = _residual(obj, r, g)
        info.iters, info.residual = it - 1, res
        if res <= p.gtol:
            return r, f, True
        shift = 0.0
        while True:
            try:
                c = cho_factor(H + shift * np.eye(len(r)), check_finite=False)
                break
            except LinAlgError:
                shift = max(2.0 * shift, 1e-8 * float(np.max(np.abs(np.diag(H)))))
        step = -cho_solve(c, g, check_finite=False)
        slope = float(g @ step)
        t = 1.0
        accepted = False
        while t > 1e-10:
            rn = r + t * step
            if obj.feasible(rn):
                fn = obj.excess(rn)
                if fn <= f + 1e-4 * t * slope:
                    accepted = True
                    break
                if t == 1.0:
                    # predicted decrease below the round-off of the objective:
                    # accept the full step if it halves the gradient instead
                    gn = obj.full(rn, hess=False)[1]
                    if np.linalg.norm(gn) <= 0.5 * np.linalg.norm(g):
                        accepted = True
                        break
            t *= 0.5
        if not accepted:
            return r, f, False
        r, f = rn, fn
        _, g, H = obj.full(r)
    info.iters = p.max_iter
    info.residual = _residual(obj, r, g)
    return r, f, info.residual <= p.gtol


def _slsqp(obj: _Objective, r, info: StepInfo):
    p, dth = obj.p, obj.dth

    def fun(x):
        return obj.full(x, hess=False)

    cons = [
        {"type": "ineq", "fun": lambda x: _star(x, dth) - p.r0, "jac": lambda x: _star_jac(x, dth)},
    ]
    bounds = [(1e-6, p.R0)] * len(r)
    res = minimize(
        fun, r, jac=True, method="SLSQP", bounds=bounds, constraints=cons,
        options={"maxiter": 500, "ftol": 1e-15},
    )
    x = np.clip(res.x, 1e-6, p.R0)
    info.iters += int(res.nit)
    info.method = "slsqp"
    if not obj.feasible(x):
        return r, obj.excess(r)
    return x, obj.excess(x)


def _projected_gradient(obj: _Objective, r, info: StepInfo, iters=2000):
    g = obj.full(r, hess=False)[1]
    f = obj.excess(r)
    t = 1.0
    for _ in range(iters):
        moved = False
        while t > 1e-14:
            rn = r - t * g / obj.dth
            if obj.feasible(rn):
                fn = obj.excess(rn)
                if fn <= f - 1e-4 * t * float(g @ g) / obj.dth:
                    moved = True
                    break
            t *= 0.5
        if not moved:
            break
        r, f = rn, fn
        g = obj.full(r, hess=False)[1]
        t *= 2.0
        info.iters += 1
        if _residual(obj, r, g) <= obj.p.gtol:
            break
    info.method = "projected-gradient"
    return r, f


def mm_step(E: RadialSet, params: FlowParams, guess=None, return_info: bool = False):
    """One minimizing-movement step from ``E``.

    Parameters
    ----------
    E : RadialSet
        Current set; must be admissible.
    params : FlowParams
    guess : array_like, optional
        Feasible starting radii (defaults to ``E``).
    return_info : bool
        Also return a :class:`StepInfo`.

    Raises
    ------
    StepFailed
        When no admissible point with objective at most that of ``E`` and
        residual below ``params.max_residual`` is found.
    """
    t0 = time.perf_counter()
    if E.M != params.M:
        raise ConfigError(f"set has M={E.M} directions, params expect M={params.M}")
    obj = _Objective(E, params)
    rE = np.array(E.radii)
    if not obj.feasible(rE):
        raise StepFailed("input set is not admissible", margin=obj.constraint_margin(rE))
    info = StepInfo()
    f0 = 0.0  # objectives below are measured relative to Phi(E)
    info.objective_start = obj.value(rE)

    start = rE
    if guess is not None:
        guess = np.asarray(guess, dtype=float)
        if obj.feasible(guess) and obj.excess(guess) <= f0:
            start = guess
    r, f, ok = _newton(obj, start, info)
    if not ok and start is not rE:
        # extrapolated guesses can land where the distance term has a kink
        r, f, ok = _newton(obj, rE, info)
    if not ok:
        r2, f2 = _slsqp(obj, r, info)
        if f2 <= f:
            r, f = r2, f2
        g = obj.full(r, hess=False)[1]
        info.residual = _residual(obj, r, g)
        if info.residual > params.gtol:
            r3, f3 = _projected_gradient(obj, r, info)
            if f3 <= f:
                r, f = r3, f3
            g = obj.full(r, hess=False)[1]
            info.residual = _residual(obj, r, g)
    if f > f0:
        r, f = rE, f0
        info.residual = _residual(obj, r, obj.full(r, hess=False)[1])
    info.objective = info.objective_start + f
    info.seconds = time.perf_counter() - t0
    if info.residual > params.max_residual or not obj.feasible(r):
        raise StepFailed(
            "no admissible minimizer within tolerance",
            residual=info.residual, objective=f, objective_start=f0, method=info.method,
        )
    F = E.with_radii(r)
    return (F, info) if return_info else F


# --------------------------------------------------------------------------
# traces


TRACE_COLUMNS = ("t", "volume", "perimeter", "energy", "lambda", "dtilde_step", "dH_step", "iters", "residual")


@dataclass(eq=False)
class FlowTrace:
    """Sets ``E_0, ..., E_K`` at ``t_k = k h`` with per-step diagnostics.

    Step quantities (``dtilde_step``, ``dH_step``, ``iters``, ``residual``)
    refer to the step that produced ``E_k`` and are zero at ``k = 0``.
    """

    params: FlowParams
    sets: list = field(default_factory=list)
    volume: list = field(default_factory=list)
    perimeter: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    dtilde_step: list = field(default_factory=list)
    dH_step: list = field(default_factory=list)
    iters: list = field(default_factory=list)
    residual: list = field(default_factory=list)

    def append(self, S: RadialSet, dtilde=0.0, dH=0.0, iters=0, residual=0.0):
        V = ss.volume(S)
        P = ss.perimeter(S)
        d = self.params.delta
        self.sets.append(S)
        self.volume.append(V)
        self.perimeter.append(P)
        self.energy.append(P + (1.0 - V) ** 2 / (2.0 * d))
        self.lam.append((1.0 - V) / d)
        self.dtilde_step.append(float(dtilde))
        self.dH_step.append(float(dH))
        self.iters.append(int(iters))
        self.residual.append(float(residual))

    def __len__(self):
        return len(self.sets)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.sets)) * self.params.h

    def array(self, name) -> np.ndarray:
        return np.asarray(getattr(self, "lam" if name == "lambda" else name), dtype=float)

    def table(self) -> np.ndarray:
        cols = [self.times] + [self.array(c) for c in TRACE_COLUMNS[1:]]
        return np.column_stack(cols)

    def save(self, directory, svg: bool = False, reports=None):
        from . import io

        return io.write_trace(self, directory, svg=svg, reports=reports)

    @classmethod
    def load(cls, directory) -> "FlowTrace":
        from . import io

        return io.read_trace(directory)


def run_flow(E0: RadialSet, params: FlowParams, progress=None) -> FlowTrace:
    """Iterate :func:`mm_step` for ``params.n_steps`` steps.

    ``progress``, if given, is called as ``progress(k, trace)`` after each step.
    """
    if E0.M != params.M:
        raise ConfigError(f"initial set has M={E0.M}, params expect M={params.M}")
    rep = check_star_shaped(E0, params.r0)
    if not rep.passed:
        raise ConfigError(f"initial set is not star-shaped about B_r0 (margin {rep.worst_margin:.3g})")
    if np.max(E0.radii) > params.R0:
        raise ConfigError("initial set exceeds R0")
    if params.check_unit_volume and abs(ss.volume(E0) - 1.0) > 1e-6:
        raise ConfigError(f"initial volume {ss.volume(E0):.9g} is not 1 (use rescale_to_volume)")
    if params.check_reflection:
        rep = check_rho_reflection(E0, params.rho)
        if not rep.passed:
            raise ConfigError(
                f"initial set fails rho-reflection at rho={params.rho} (margin {rep.worst_margin:.3g})"
            )
    E0 = E0.with_radii(E0.radii)
    trace = FlowTrace(params)
    trace.append(E0)
    E = E0
    prev = None
    for k in range(1, params.n_steps + 1):
        # linear extrapolation as warm start; mm_step falls back to E if worse
        guess = None if prev is None else 2.0 * E.radii - prev.radii
        F, info = mm_step(E, params, guess=guess, return_info=True)
        dt = ss.pseudo_distance(F, E)
        dH = ss.hausdorff_distance(F, E)
        trace.append(F, dt, dH, info.iters, info.residual)
        prev, E = E, F
        if progress is not None:
            progress(k, trace)
    return trace


# --------------------------------------------------------------------------
# equilibrium and multiplier diagnostics


def equilibrium_volume(delta: float) -> float:
    """Area of the stationary ball: root of ``(1 - V)/delta = sqrt(pi / V)``.

    The stable root lies between the maximiser of ``(1 - V)/delta - sqrt(pi/V)``,
    ``V = (delta sqrt(pi) / 2)^(2/3)``, and 1.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    f = lambda V: (1.0 - V) / delta - np.sqrt(np.pi / V)
    v_peak = (delta * np.sqrt(np.pi) / 2.0) ** (2.0 / 3.0)
    if v_peak >= 1.0 or f(v_peak) <= 0.0:
        raise ValueError(f"no stationary ball for delta={delta}")
    return float(brentq(f, v_peak, 1.0, xtol=1e-15, rtol=1e-15))


def equilibrium_radius(delta: float) -> float:
    return float(np.sqrt(equilibrium_volume(delta) / np.pi))


def lambda_l2(trace: FlowTrace, t0: float = 0.0, T: float | None = None) -> float:
    """``h sum lambda_k^2`` over the steps covering ``[t0, t0 + T)``."""
    h = trace.params.h
    lam = trace.array("lambda")
    k0 = int(round(t0 / h))
    k1 = len(lam) - 1 if T is None else int(round((t0 + T) / h))
    if k0 < 0 or k1 > len(lam) - 1 + 1e-9 or k1 < k0:
        raise ValueError("window not covered by the trace")
    return float(h * np.sum(lam[k0:k1] ** 2))


def dissipation_report(trace: FlowTrace, tol: float = 1e-8) -> dict:
    """Per-step energy decrease and one-step dissipation margins.

    Returns a dict with arrays ``energy_margin`` (``J_{k-1} - J_k``) and
    ``dissipation_margin`` (``h (J_{k-1} - J_k) - dtilde_k^2``), the telescoped
    sum ``sum dtilde_k^2 / h``, ``J_0 - J_K`` and the :class:`CheckReport`.
    """
    h = trace.params.h
    J = trace.array("energy")
    d2 = trace.array("dtilde_step")[1:] ** 2
    dJ = J[:-1] - J[1:]
    diss = h * dJ - d2
    total = float(np.sum(d2) / h)
    drop = float(J[0] - J[-1])
    per0 = float(trace.perimeter[0])
    worst = float(min(np.min(dJ, initial=np.inf), np.min(diss, initial=np.inf)))
    if not np.isfinite(worst):
        worst = 0.0
    k = int(np.argmin(np.minimum(dJ, diss / max(h, 1e-300)))) + 1 if len(dJ) else 0
    rep = CheckReport.from_margin(
        "dissipation", min(worst, per0 - total + tol, drop - total + tol), tol,
        {"step": k, "telescoped": total, "energy_drop": drop, "initial_perimeter": per0},
    )
    return {
        "energy_margin": dJ,
        "dissipation_margin": diss,
        "telescoped": total,
        "energy_drop": drop,
        "initial_perimeter": per0,
        "report": rep,
    }


def _lag_sup(trace: FlowTrace, lags):
    sets = trace.sets
    out = []
    for ell in lags:
        out.append(max(ss.hausdorff_distance(sets[k], sets[k + ell]) for k in range(len(sets) - ell)))
    return np.asarray(out)


def _default_lags(n: int):
    lags = []
    ell = 1
    while ell <= (n - 1) // 2:
        lags.append(ell)
        ell *= 2
    return lags


@dataclass
class HolderFit:
    exponent: float
    constant: float
    lags: np.ndarray
    times: np.ndarray
    sup_distance: np.ndarray
    initial_perimeter: float


def holder_fit(trace: FlowTrace, lags=None, min_steps: int = 64) -> HolderFit:
    """Fit ``sup_k d_H(E_k, E_{k+l}) ~ C (l h)^a`` over dyadic lags.

    ``constant`` is the smallest ``K`` with
    ``d_H <= K (l h)^(1/3) Per(E_0)^(1/3)`` at every lag.
    """
    if len(trace) - 1 < min_steps:
        raise ValueError(f"need at least {min_steps} steps, trace has {len(trace) - 1}")
    lags = _default_lags(len(trace)) if lags is None else list(lags)
    D = _lag_sup(trace, lags)
    tl = np.asarray(lags) * trace.params.h
    P0 = float(trace.perimeter[0])
    pos = D > 0
    if np.count_nonzero(pos) >= 2:
        slope = float(np.polyfit(np.log(tl[pos]), np.log(D[pos]), 1)[0])
    else:
        slope = np.inf
    K = float(np.max(D / (tl * P0) ** (1.0 / 3.0)))
    return HolderFit(slope, K, np.asarray(lags), tl, D, P0)


def holder_check(trace: FlowTrace, K3: float, lags=None, slack: float = 0.1) -> CheckReport:
    """Every lag obeys ``d_H <= (1 + slack) K3 (l h)^(1/3) Per(E_0)^(1/3)``."""
    fit = holder_fit(trace, lags)
    bound = (1.0 + slack) * K3 * (fit.times * fit.initial_perimeter) ** (1.0 / 3.0)
    m = bound - fit.sup_distance
    i = int(np.argmin(m))
    return CheckReport.from_margin(
        "holder", m[i], 0.0, {"lag": int(fit.lags[i]), "K3": K3, "fitted_K3": fit.constant}
    )


# --------------------------------------------------------------------------
# first variations


@dataclass(frozen=True)
class VariationField:
    """Radial velocity field ``Psi(x) = g(|x|) x`` with analytic profile.

    Attributes
    ----------
    name : str
    profile : callable
        ``g(rho)``.
    dprofile : callable
        ``g'(rho)``.
    """

    name: str
    profile: object
    dprofile: object

    def values(self, S: RadialSet) -> np.ndarray:
        return self.profile(S.radii)[:, None] * S.points

    def normal_component(self, S: RadialSet) -> np.ndarray:
        """``Psi . n`` at the boundary nodes."""
        b = S.boundary
        return np.sum(self.values(S) * b.normals, axis=1)

    def boundary_divergence(self, S: RadialSet) -> np.ndarray:
        """Tangential divergence ``g + g' |x| sin^2(angle(x, n))``."""
        r = S.radii
        cos = np.sum(S.grid.directions * S.boundary.normals, axis=1)
        return self.profile(r) + self.dprofile(r) * r * (1.0 - cos**2)

    def flux(self, S: RadialSet) -> np.ndarray:
        """``Psi . n dsigma`` per node in polar form, ``g(r) r^2 dtheta``.

        Exact for radial fields since ``x . n dsigma = r^2 dtheta``; this keeps
        the rates consistent with the polar quadratures of volume and
        pseudo-distance.
        """
        r = S.radii
        return self.profile(r) * r * r * S.grid.dtheta

    def radial_velocity(self, S: RadialSet) -> np.ndarray:
        """Radius change per unit parameter, ``r g(r)``."""
        return S.radii * self.profile(S.radii)

    def flow_map(self, S: RadialSet, s: float) -> RadialSet:
        """Image of ``S`` under ``x -> x + s Psi(x)``."""
        r = S.radii
        return S.with_radii(r * (1.0 + s * self.profile(r)))


def dilation_field() -> VariationField:
    return VariationField("dilation", lambda r: np.ones_like(r), lambda r: np.zeros_like(r))


def shrink_field(r0: float) -> VariationField:
    return VariationField(
        "shrink", lambda r: -(r * r - r0 * r0), lambda r: -2.0 * r
    )


def first_variation_perimeter(E: RadialSet, field: VariationField) -> float:
    """``int_{dE} div_{dE} Psi`` by boundary quadrature."""
    return float(np.sum(field.boundary_divergence(E) * E.boundary.weights))


def first_variation_volume(E: RadialSet, field: VariationField) -> float:
    """``int_{dE} Psi . n``."""
    return float(np.sum(field.flux(E)))


def dtilde_first_variation(E: RadialSet, F: RadialSet, field: VariationField) -> float:
    """Rate of ``dtilde^2(f_s(E), F)``: ``int_{dE} d_signed(x, dF) Psi . n``."""
    ds = ss.signed_distance(E.points, F)
    return float(np.sum(ds * field.flux(E)))


def boundary_distance_sq(F: RadialSet, E: RadialSet) -> float:
    """``int_{dF} d(x, dE)^2 dsigma``."""
    d = ss.distance_to_boundary(F.points, E)
    return float(np.sum(d * d * F.boundary.weights))


def euler_lagrange_check(trace: FlowTrace, k: int, fields=None, slack: float = 10.0) -> dict:
    """First-order optimality of ``E_k`` along admissible variation fields.

    For each field the margin is

        dPer(E_k)[v] + (1/h) int d_signed(x, dE_{k-1}) Psi.n - lambda_k int Psi.n

    with the perimeter rate taken as the exact derivative of the discrete
    perimeter along the induced radial velocity ``v``.  At a minimizer every
    margin is non-negative up to ``tol = slack * gtol * dtheta * sum|v|`` plus
    the distance-kernel round-off.  The continuous divergence form of the
    perimeter rate is reported alongside.
    """
    if k < 1 or k >= len(trace):
        raise ValueError("step index out of range")
    p = trace.params
    E, F = trace.sets[k - 1], trace.sets[k]
    lam = trace.lam[k]
    if fields is None:
        fields = (dilation_field(), shrink_field(p.r0))
    dth = F.grid.dtheta
    _, gP = _perimeter_terms(np.asarray(F.radii), dth)
    ds = ss.signed_distance(F.points, E)
    out = {}
    for fld in fields:
        v = fld.radial_velocity(F)
        flux = fld.flux(F)
        dper = float(gP @ v)
        dist_term = float(np.sum(ds * flux)) / p.h
        vol_term = lam * float(np.sum(flux))
        margin = dper + dist_term - vol_term
        tol = slack * p.gtol * dth * float(np.sum(np.abs(v))) + 1e-12 * (
            abs(dper) + abs(dist_term) + abs(vol_term) + 1.0
        )
        out[fld.name] = CheckReport.from_margin(
            f"euler_lagrange_{fld.name}", margin, tol,
            {
                "step": k,
                "perimeter_rate": dper,
                "perimeter_rate_divergence": first_variation_perimeter(F, fld),
                "distance_rate": dist_term,
                "volume_rate_times_lambda": vol_term,
            },
        )
    return out


def variation_feasibility(E: RadialSet, r0: float, R0: float, n_s: int = 16) -> CheckReport:
    """Dilations ``(1 + s) E`` and shrink maps stay in the admissible class.

    ``s`` runs over ``n_s`` points of ``[0, s1)`` with ``s1 = R0 / max r - 1``
    and of ``[0, s2)`` with ``s2 = 1 / (2 (R0^2 - r0^2))``.
    """
    s1 = R0 / float(np.max(E.radii)) - 1.0
    s2 = 1.0 / (2.0 * (R0**2 - r0**2))
    if s1 <= 0:
        raise ValueError("set touches R0; no admissible dilation range")
    worst, witness = np.inf, {}
    frac = np.arange(n_s) / n_s
    for fam, smax in (("dilation", s1), ("shrink", s2)):
        for s in smax * frac:
            G = ss.scale(E, 1.0 + s) if fam == "dilation" else ss.apply_shrink_map(E, s, r0, R_hi=R0)
            m = min(float(np.min(star_margins(G))) - r0, R0 - float(np.max(G.radii)))
            if m < worst:
                worst, witness = m, {"family": fam, "s": s}
    witness.update({"s1": s1, "s2": s2})
    return CheckReport.from_margin("variation_feasibility", worst, 1e-12, witness)
