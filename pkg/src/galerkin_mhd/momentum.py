"""Galerkin momentum equation with implicit viscosity and explicit forces.

    (rho u)_t + div(rho u (x) u) + a grad rho^gamma + delta grad rho^beta + eps (grad rho . grad) u
        = (curl H) x H + mu Lap u + (lam + mu) grad div u

Every pointwise product is de-aliased in the basis its factors imply: along
each axis, two factors of equal parity give an even (cosine) result and
factors of opposite parity give an odd (sine) one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import DensityPositivityError, StepFailure
from .fields import (COSINE, SINE, Grid, dealias, deriv, divergence, forward, gradient,
                     integrate, inverse, laplacian_symbol, product_tags, require_finite,
                     truncate, vector_laplacian)
from .params import FluidParams, RegularizationParams, State

_SIN = (SINE,) * 3
_COS = (COSINE,) * 3


def _flip_at(tags: tuple[str, ...], axis: int) -> tuple[str, ...]:
    t = list(tags)
    t[axis] = COSINE if t[axis] == SINE else SINE
    return tuple(t)


def _product(grid: Grid, a: np.ndarray, ta, b: np.ndarray, tb):
    tags = product_tags(ta, tb)
    return dealias(grid, a * b, tags), tags


# --- force terms ------------------------------------------------------------------------

def lorentz_force(grid: Grid, H) -> np.ndarray:
    """De-aliased ``(curl H) x H`` for a zero-trace ``H``.

    Each curl term ``dH_c/dx_b`` is multiplied by ``H`` separately so that
    every product has a single well-defined parity.
    """
    H = grid.check_vector(H, "H")
    require_finite(H, "H")
    active = set(grid.active_axes)
    # J_a = dH_c/dx_b - dH_b/dx_c, (a, b, c) cyclic; stored as (sign, component, axis)
    terms = {}
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        terms[a] = [(1.0, c, b), (-1.0, b, c)]
    out = grid.vzeros()
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        # (J x H)_i = J_j H_k - J_k H_j
        for J_idx, H_idx, sgn in ((j, k, 1.0), (k, j, -1.0)):
            for s, comp, axis in terms[J_idx]:
                if axis not in active:
                    continue
                dH = deriv(grid, H[comp], axis, SINE)
                prod, _ = _product(grid, dH, _flip_at(_SIN, axis), H[H_idx], _SIN)
                out[i] += sgn * s * prod
    return out


def magnetic_stress_divergence(grid: Grid, H) -> np.ndarray:
    """``div(H (x) H) - grad(|H|^2 / 2)``, equal to the Lorentz force when ``div H = 0``."""
    H = grid.check_vector(H, "H")
    out = grid.vzeros()
    for i in range(3):
        for j in grid.active_axes:
            out[i] += deriv(grid, dealias(grid, H[i] * H[j], _COS), j, COSINE)
    half_sq = dealias(grid, 0.5 * np.sum(H * H, axis=0), _COS)
    return out - gradient(grid, half_sq, "cosine")


def pressure(rho: np.ndarray, a: float, gamma: float, delta: float = 0.0,
             beta: float = 1.0) -> np.ndarray:
    if np.min(rho) <= 0:
        raise ValueError(f"pressure needs a positive density (min = {np.min(rho):.6g})")
    p = a * rho ** gamma
    if delta > 0:
        p = p + delta * rho ** beta
    return p


def pressure_gradient(grid: Grid, rho, a: float, gamma: float, delta: float = 0.0,
                      beta: float = 1.0) -> np.ndarray:
    """Spectral gradient of ``a rho^gamma + delta rho^beta``."""
    rho = grid.check_scalar(rho, "rho")
    require_finite(rho, "rho")
    return gradient(grid, pressure(rho, a, gamma, delta, beta), "cosine")


def convection(grid: Grid, rho, u) -> np.ndarray:
    """``div(rho u (x) u)`` in conservative form."""
    out = grid.vzeros()
    for i in range(3):
        for j in grid.active_axes:
            flux = dealias(grid, rho * u[i] * u[j], _COS)
            out[i] += deriv(grid, flux, j, COSINE)
    return out


def artificial_drag(grid: Grid, rho, u, eps: float) -> np.ndarray:
    """``eps (grad rho . grad) u``; both factors are odd on every axis, so the product is even."""
    out = grid.vzeros()
    if eps == 0:
        return out
    for j in grid.active_axes:
        drho = deriv(grid, rho, j, COSINE)
        for i in range(3):
            du = deriv(grid, u[i], j, SINE)
            out[i] += dealias(grid, drho * du, _SIN)
    return eps * out


@dataclass(frozen=True)
class Forces:
    convection: np.ndarray
    pressure: np.ndarray
    drag: np.ndarray
    lorentz: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return -self.convection - self.pressure - self.drag + self.lorentz


def explicit_forces(grid: Grid, rho_old: np.ndarray, rho_new: np.ndarray, u: np.ndarray,
                    H: np.ndarray, fluid: FluidParams, reg: RegularizationParams) -> Forces:
    """Explicit terms of one step.

    Convection carries the same mass flux ``rho_old u`` as the density update
    and pressure and drag use the updated density; with that pairing the
    kinetic energy balance of the continuous problem carries over.
    """
    return Forces(
        convection=convection(grid, rho_old, u),
        pressure=pressure_gradient(grid, rho_new, fluid.a, fluid.gamma, reg.delta, reg.beta),
        drag=artificial_drag(grid, rho_new, u, reg.eps),
        lorentz=lorentz_force(grid, H),
    )


# --- implicit viscous solve ----------------------------------------------------------------

def viscous_operator(grid: Grid, u: np.ndarray, fluid: FluidParams) -> np.ndarray:
    """``-mu Lap u + (lam + mu) D^T D u``: symmetric positive semi-definite."""
    out = -fluid.mu * vector_laplacian(grid, u, "sine")
    if fluid.lam + fluid.mu != 0:
        out = out - (fluid.lam + fluid.mu) * gradient(grid, divergence(grid, u), "cosine")
    return out


def viscous_power(grid: Grid, u: np.ndarray, fluid: FluidParams) -> float:
    """``-(mu ||grad u||^2 + (lam + mu) ||div u||^2)``."""
    return -integrate(grid, u * viscous_operator(grid, u, fluid))


class _MassViscousSystem:
    """``(rho_new + dt * A) u = b`` solved by preconditioned conjugate gradients."""

    def __init__(self, grid: Grid, rho: np.ndarray, fluid: FluidParams, dt: float):
        self.grid, self.rho, self.fluid, self.dt = grid, rho, fluid, dt
        self.size = 3 * int(np.prod(grid.shape))
        mu_eff = fluid.mu + 0.5 * (fluid.lam + fluid.mu)
        mu_eff = max(mu_eff, fluid.mu)
        self.symbol = float(np.mean(rho)) - dt * mu_eff * laplacian_symbol(grid, _SIN)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        u = x.reshape(self.grid.vshape)
        return (self.rho * u + self.dt * viscous_operator(self.grid, u, self.fluid)).ravel()

    def precondition(self, x: np.ndarray) -> np.ndarray:
        r = x.reshape(self.grid.vshape)
        out = np.stack([inverse(self.grid, forward(self.grid, r[i], _SIN) / self.symbol, _SIN)
                        for i in range(3)])
        return out.ravel()

    def solve(self, b: np.ndarray, x0: np.ndarray, rtol: float = 1e-12) -> tuple[np.ndarray, int]:
        n = self.size
        A = LinearOperator((n, n), matvec=self.matvec, dtype=float)
        M = LinearOperator((n, n), matvec=self.precondition, dtype=float)
        count = [0]

        def tick(_):
            count[0] += 1

        x, info = cg(A, b.ravel(), x0=x0.ravel(), rtol=rtol, atol=0.0, maxiter=2000,
                     M=M, callback=tick)
        if info != 0:
            raise StepFailure(f"viscous solve did not converge (info = {info})")
        return x.reshape(self.grid.vshape), count[0]


@dataclass(frozen=True)
class MomentumStepReport:
    kinetic_before: float
    kinetic_after: float
    power_convection: float
    power_pressure: float
    power_drag: float
    power_lorentz: float
    power_viscous: float
    cg_iterations: int
    min_density: float


def kinetic_energy(grid: Grid, rho, u) -> float:
    return 0.5 * integrate(grid, rho * np.sum(u * u, axis=0))


def step_momentum(state: State, fluid: FluidParams, reg: RegularizationParams, dt: float,
                  rho_new: np.ndarray | None = None, forcing: State | None = None
                  ) -> tuple[np.ndarray, MomentumStepReport]:
    """Advance ``rho u`` by ``dt``; returns the new velocity and a power report.

    ``rho_new`` is the density at the end of the step (defaults to the current
    density).  Velocity and magnetic field in the explicit forces come from
    ``forcing`` (defaults to ``state``), which lets a fixed-point loop
    re-evaluate them at updated iterates.  The viscous terms act implicitly on
    the new velocity:

        rho_new u_new + dt (-mu Lap + (lam + mu) D^T D) u_new = rho u + dt F
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive (got {dt})")
    g = state.grid
    for name, f in (("rho", state.rho), ("u", state.u), ("H", state.H)):
        require_finite(f, name)
    if np.min(state.rho) <= 0:
        raise DensityPositivityError(float(np.min(state.rho)))
    rho_new = state.rho if rho_new is None else g.check_scalar(rho_new, "rho_new")
    if np.min(rho_new) <= 0:
        raise DensityPositivityError(float(np.min(rho_new)))
    forcing = state if forcing is None else forcing

    forces = explicit_forces(g, state.rho, rho_new, forcing.u, forcing.H, fluid, reg)
    b = state.rho * state.u + dt * forces.total
    system = _MassViscousSystem(g, rho_new, fluid, dt)
    u_new, iters = system.solve(b, forcing.u)
    if reg.n_modes is not None and reg.n_modes < max(g.n):
        u_new = np.stack([truncate(g, u_new[i], _SIN, reg.n_modes) for i in range(3)])
    require_finite(u_new, "u_new")

    report = MomentumStepReport(
        kinetic_before=kinetic_energy(g, state.rho, state.u),
        kinetic_after=kinetic_energy(g, rho_new, u_new),
        power_convection=-integrate(g, forces.convection * u_new),
        power_pressure=-integrate(g, forces.pressure * u_new),
        power_drag=-integrate(g, forces.drag * u_new),
        power_lorentz=integrate(g, forces.lorentz * u_new),
        power_viscous=viscous_power(g, u_new, fluid),
        cg_iterations=iters,
        min_density=float(np.min(rho_new)),
    )
    return u_new, report
