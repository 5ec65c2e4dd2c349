"""Diagnostics: energy budget, cut-off and Orlicz functions, a Bogovskii-type
right inverse of the divergence, effective viscous flux and the weak-limit proxies.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as sint
from scipy import optimize
from scipy.sparse.linalg import LinearOperator, cg

from .fields import (COSINE, SINE, Grid, curl, divergence, forward, gradient, h1_seminorm_sq,
                     integrate, inverse, laplacian_symbol, lp_norm)
from .params import FluidParams, RegularizationParams, State

_SIN = (SINE,) * 3


# --- energy -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    pressure_potential: float
    artificial_potential: float
    magnetic: float
    visc_dissipation: float
    mag_dissipation: float
    eps_dissipation: float

    @property
    def total(self) -> float:
        return self.kinetic + self.pressure_potential + self.artificial_potential + self.magnetic

    @property
    def dissipation(self) -> float:
        return self.visc_dissipation + self.mag_dissipation + self.eps_dissipation


def _require_positive(rho: np.ndarray) -> None:
    if np.min(rho) <= 0:
        raise ValueError(f"density must be positive (min = {np.min(rho):.6g})")


def energy(state: State, fluid: FluidParams, reg: RegularizationParams) -> EnergyBreakdown:
    g, rho, u, H = state.grid, state.rho, state.u, state.H
    _require_positive(rho)
    a, gam = fluid.a, fluid.gamma
    div_u = divergence(g, u)
    art = 0.0
    if reg.delta > 0:
        art = reg.delta / (reg.beta - 1.0) * integrate(g, rho ** reg.beta)
    eps_d = 0.0
    if reg.eps > 0:
        weight = a * gam * rho ** (gam - 2.0)
        if reg.delta > 0:
            weight = weight + reg.delta * reg.beta * rho ** (reg.beta - 2.0)
        grad_sq = np.sum(gradient(g, rho, "cosine") ** 2, axis=0)
        eps_d = reg.eps * integrate(g, weight * grad_sq)
    return EnergyBreakdown(
        kinetic=0.5 * integrate(g, rho * np.sum(u * u, axis=0)),
        pressure_potential=a / (gam - 1.0) * integrate(g, rho ** gam),
        artificial_potential=art,
        magnetic=0.5 * integrate(g, np.sum(H * H, axis=0)),
        visc_dissipation=fluid.mu * h1_seminorm_sq(g, u)
        + (fluid.lam + fluid.mu) * lp_norm(g, div_u) ** 2,
        mag_dissipation=fluid.nu * lp_norm(g, curl(g, H)) ** 2,
        eps_dissipation=eps_d,
    )


@dataclass(frozen=True)
class TimeSeriesRow:
    t: float
    mass: float
    E_total: float
    E_kin: float
    E_press: float
    E_art: float
    E_mag: float
    D_visc: float
    D_mag: float
    D_eps: float
    divH_res: float
    min_rho: float
    max_rho: float
    u_L2: float
    H_L2: float
    rho_Lgamma: float

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in self.columns())


def series_row(state: State, fluid: FluidParams, reg: RegularizationParams) -> TimeSeriesRow:
    g = state.grid
    e = energy(state, fluid, reg)
    return TimeSeriesRow(
        t=float(state.t),
        mass=integrate(g, state.rho),
        E_total=e.total,
        E_kin=e.kinetic,
        E_press=e.pressure_potential,
        E_art=e.artificial_potential,
        E_mag=e.magnetic,
        D_visc=e.visc_dissipation,
        D_mag=e.mag_dissipation,
        D_eps=e.eps_dissipation,
        divH_res=lp_norm(g, divergence(g, state.H)),
        min_rho=float(np.min(state.rho)),
        max_rho=float(np.max(state.rho)),
        u_L2=lp_norm(g, state.u),
        H_L2=lp_norm(g, state.H),
        rho_Lgamma=lp_norm(g, state.rho, fluid.gamma),
    )


def time_integral(times, values) -> float:
    """Trapezoidal rule over snapshot times; a single sample integrates to zero."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 2:
        return 0.0
    return float(np.trapezoid(values, times, axis=0))


# --- cut-off families ---------------------------------------------------------------------------

def _profile(z: np.ndarray) -> np.ndarray:
    """Concave C1 profile: ``z`` up to 1, ``z - (z - 1)^2 / 4`` on [1, 3], then 2."""
    return np.where(z <= 1.0, z, np.where(z >= 3.0, 2.0, z - (z - 1.0) ** 2 / 4.0))


def _profile_prime(z: np.ndarray) -> np.ndarray:
    return np.clip((3.0 - z) / 2.0, 0.0, 1.0)


def _check_cut(k, z):
    if not k > 0:
        raise ValueError(f"cut level k must be positive (got {k})")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("cut-off functions are defined for z >= 0")
    return z


def cutoff_T(k: float, z):
    """``T_k(z) = k T(z / k)``, exactly ``z`` up to ``k`` and exactly ``2k`` from ``3k`` on."""
    z = _check_cut(k, z)
    out = np.where(z <= k, z, np.where(z >= 3.0 * k, 2.0 * k, k * _profile(z / k)))
    return float(out) if out.ndim == 0 else out


def cutoff_T_prime(k: float, z):
    z = _check_cut(k, z)
    out = _profile_prime(z / k)
    return float(out) if out.ndim == 0 else out


def _T_over_s2_integral(k: float, z: float) -> float:
    """``int_k^z T_k(s) / s^2 ds`` by adaptive quadrature with the kinks as breakpoints."""
    if z <= k:
        return 0.0
    f = lambda s: k * _profile(s / k) / (s * s)
    pts = [p for p in (3.0 * k,) if k < p < z]
    val, _ = sint.quad(f, k, z, points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def _scalar_or_array(fn, z):
    arr = np.asarray(z, dtype=float)
    out = np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def cutoff_L(k: float, z):
    """``z ln z`` below ``k``; ``z ln k + z int_k^z T_k(s)/s^2 ds`` from ``k`` on."""
    z = _check_cut(k, z)

    def one(v):
        if v < k:
            return v * np.log(v) if v > 0 else 0.0
        return v * np.log(k) + v * _T_over_s2_integral(k, v)

    return _scalar_or_array(one, z)


def cutoff_L_prime(k: float, z):
    """Derivative of ``L_k``: ``ln z + 1`` below ``k``, ``ln k + I(z) + T_k(z)/z`` above."""
    z = _check_cut(k, z)

    def one(v):
        if v < k:
            return np.log(v) + 1.0 if v > 0 else -np.inf
        return np.log(k) + _T_over_s2_integral(k, v) + k * _profile(v / k) / v

    return _scalar_or_array(one, z)


# --- Orlicz pair ------------------------------------------------------------------------------

def orlicz_M(s):
    """``(1 + s) ln(1 + s) - s``."""
    s = np.asarray(s, dtype=float)
    out = (1.0 + s) * np.log1p(s) - s
    return float(out) if out.ndim == 0 else out


def orlicz_N(t):
    """``e^t - t - 1``, the Legendre conjugate of ``orlicz_M``."""
    t = np.asarray(t, dtype=float)
    out = np.expm1(t) - t
    return float(out) if out.ndim == 0 else out


def luxemburg_norm(grid: Grid, f, which: str = "M", rtol: float = 1e-8) -> float:
    """``inf{eta > 0 : int Phi(|f| / eta) <= 1}`` by bisection on ``log eta``."""
    phi = {"M": orlicz_M, "N": orlicz_N}.get(which)
    if phi is None:
        raise ValueError(f"which must be 'M' or 'N' (got {which!r})")
    f = np.abs(np.asarray(f, dtype=float))
    if not np.any(f > 0):
        return 0.0

    def excess(log_eta):
        with np.errstate(over="ignore"):
            val = integrate(grid, phi(f / np.exp(log_eta)))
        return val - 1.0 if np.isfinite(val) else np.inf

    lo, hi = np.log(1e-12), np.log(1e12)
    if excess(lo) <= 0 or excess(hi) > 0:
        raise ValueError("Luxemburg norm outside the bracket [1e-12, 1e12]")
    log_eta = optimize.bisect(excess, lo, hi, xtol=rtol / 4, rtol=1e-15, maxiter=400)
    return float(np.exp(log_eta))


# --- Bogovskii-type right inverse of the divergence ---------------------------------------------

@dataclass(frozen=True)
class BogovskiiResult:
    W: np.ndarray
    residual: float  # ||div W - f|| / ||f||
    bound_ratio: float  # ||W||_{H1} / ||f||
    iterations: int


def bogovskii(grid: Grid, f, alpha: float = 1e-10, rtol: float = 1e-13) -> BogovskiiResult:
    """Zero-trace ``W`` minimizing ``||div W - f||^2 + alpha ||grad W||^2``.

    With ``K = -Lap`` on sine fields the minimizer is ``W = K^-1 D^T q`` where
    ``(D K^-1 D^T + alpha) q = f``, a symmetric positive system on scalars.
    """
    f = grid.check_scalar(f, "f")
    l1 = integrate(grid, np.abs(f))
    if abs(integrate(grid, f)) > 1e-10 * max(l1, 1e-300):
        raise ValueError("bogovskii needs a zero-mean right-hand side")
    norm_f = lp_norm(grid, f)
    if norm_f == 0:
        return BogovskiiResult(grid.vzeros(), 0.0, 0.0, 0)
    kinv = 1.0 / -laplacian_symbol(grid, _SIN)

    def K_inv(v):
        return np.stack([inverse(grid, kinv * forward(grid, v[i], _SIN), _SIN) for i in range(3)])

    def apply_Dt(q):
        return -gradient(grid, q, "cosine")

    n = int(np.prod(grid.shape))

    def matvec(x):
        q = x.reshape(grid.shape)
        return (divergence(grid, K_inv(apply_Dt(q))) + alpha * q).ravel()

    count = [0]

    def tick(_):
        count[0] += 1

    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    q, info = cg(A, f.ravel(), rtol=rtol, atol=0.0, maxiter=5000, callback=tick)
    if info != 0:
        raise RuntimeError(f"bogovskii solve did not converge (info = {info})")
    W = K_inv(apply_Dt(q.reshape(grid.shape)))
    resid = lp_norm(grid, divergence(grid, W) - f) / norm_f
    h1 = np.sqrt(lp_norm(grid, W) ** 2 + h1_seminorm_sq(grid, W))
    return BogovskiiResult(W, resid, h1 / norm_f, count[0])


# --- effective viscous flux and weak-limit proxies -----------------------------------------------

def effective_viscous_flux(state: State, fluid: FluidParams,
                           reg: RegularizationParams) -> np.ndarray:
    """``a rho^gamma + delta rho^beta - (lam + 2 mu) div u``."""
    _require_positive(state.rho)
    p = fluid.a * state.rho ** fluid.gamma
    if reg.delta > 0:
        p = p + reg.delta * state.rho ** reg.beta
    return p - (fluid.lam + 2.0 * fluid.mu) * divergence(state.grid, state.u)


def default_space_weight(grid: Grid) -> np.ndarray:
    """Smooth bump ``prod sin^2(pi x_i / L_i)`` vanishing on the walls."""
    x = grid.coords()
    w = np.ones(grid.shape)
    for a in grid.active_axes:
        w = w * np.sin(np.pi * x[a] / grid.length[a]) ** 2
    return w


def flux_functional(snapshots: Sequence[State], fluid: FluidParams, reg: RegularizationParams,
                    k: float, psi: Callable[[float], float] | None = None,
                    phi: np.ndarray | None = None) -> float:
    """``int int psi(t) phi(x) * flux * T_k(rho)`` with trapezoidal time weights."""
    g = snapshots[0].grid
    times = np.array([s.t for s in snapshots])
    if psi is None:
        t0, t1 = times[0], times[-1]
        span = (t1 - t0) or 1.0
        psi = lambda t: np.sin(np.pi * (t - t0) / span) ** 2
    phi = default_space_weight(g) if phi is None else phi
    vals = [psi(s.t) * integrate(g, phi * effective_viscous_flux(s, fluid, reg)
                                 * cutoff_T(k, s.rho)) for s in snapshots]
    return time_integral(times, vals)


def oscillation_defect(rho_ladder: Sequence[Sequence[np.ndarray]], times, grid: Grid,
                       k: float, gamma: float) -> list[float]:
    """``||T_k(rho_d) - T_k(rho_ref)||`` in space-time ``L^(gamma+1)``; the last entry is the reference.

    With a single sampling time the norm is purely spatial.
    """
    times = np.asarray(times, dtype=float)
    lengths = {len(r) for r in rho_ladder}
    if lengths != {len(times)}:
        raise ValueError("all ladder trajectories must share the sampling times")
    p = gamma + 1.0
    ref = [cutoff_T(k, r) for r in rho_ladder[-1]]
    out = []
    for traj in rho_ladder:
        vals = [integrate(grid, np.abs(cutoff_T(k, r) - rr) ** p) for r, rr in zip(traj, ref)]
        total = vals[0] if len(times) == 1 else time_integral(times, vals)
        out.append(total ** (1.0 / p))
    return out


# --- renormalized continuity residual ------------------------------------------------------------

def renormalizer(kind: str, k: float | None = None) -> tuple[Callable, Callable]:
    """``(b, b')`` for ``kind`` in {'T', 'L', 'log'}."""
    if kind == "T":
        return (lambda z: cutoff_T(k, z)), (lambda z: cutoff_T_prime(k, z))
    if kind == "L":
        return (lambda z: cutoff_L(k, z)), (lambda z: cutoff_L_prime(k, z))
    if kind == "log":
        return np.log1p, (lambda z: 1.0 / (1.0 + z))
    raise ValueError(f"unknown renormalization {kind!r}")


def renorm_residual(snapshots: Sequence[State], b: Callable, b_prime: Callable,
                    test_fn: Callable[[float, Grid], np.ndarray] | None = None) -> float:
    """Weak residual of ``b(rho)_t + div(b(rho) u) + (b'(rho) rho - b(rho)) div u = 0``.

    Time differences use consecutive snapshots; every other factor is taken
    at the left end of each interval:

        sum_n int [(b^{n+1} - b^n) phi^n - dt_n b^n u^n . grad phi^n
                   + dt_n (b'(rho^n) rho^n - b^n) div u^n phi^n]
    """
    g = snapshots[0].grid
    if test_fn is None:
        w = default_space_weight(g)
        t0, t1 = snapshots[0].t, snapshots[-1].t
        span = (t1 - t0) or 1.0
        test_fn = lambda t, grid: np.cos(0.5 * np.pi * (t - t0) / span) * w
    total = 0.0
    for s0, s1 in zip(snapshots[:-1], snapshots[1:]):
        dt = s1.t - s0.t
        phi = test_fn(s0.t, g)
        grad_phi = gradient(g, phi, "cosine")
        b0, b1 = b(s0.rho), b(s1.rho)
        div_u = divergence(g, s0.u)
        integrand = ((b1 - b0) * phi
                     - dt * b0 * np.sum(s0.u * grad_phi, axis=0)
                     + dt * (b_prime(s0.rho) * s0.rho - b0) * div_u * phi)
        total += integrate(g, integrand)
    return abs(total)


# --- Gronwall envelope ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallFit:
    C_fit: float
    C_theory: float
    residual_factor: float  # max_t exp|ln r(t) - C_fit t|
    envelope_holds: bool  # r(t) <= exp(C_theory t) at every sample


def gronwall_fit(times, ratios, u_inf: float, nu: float) -> GronwallFit:
    """Least-squares rate of ``ln r(t) = C t`` compared with ``C = ||u||_inf^2 / (4 nu)``."""
    t = np.asarray(times, dtype=float)
    r = np.asarray(ratios, dtype=float)
    sel = t > 0
    t, r = t[sel], r[sel]
    logr = np.log(r)
    C = float(np.dot(t, logr) / np.dot(t, t))
    resid = float(np.exp(np.max(np.abs(logr - C * t))))
    C_th = u_inf ** 2 / (4.0 * nu)
    holds = bool(np.all(logr <= C_th * t + 1e-12))
    return GronwallFit(C, C_th, resid, holds)
