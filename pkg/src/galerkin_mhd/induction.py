"""Magnetic sub-problem ``H_t - curl(u x H) = nu Lap H`` with ``H = 0`` on the walls and ``div H = 0``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import (COSINE, SINE, Grid, curl, dealias, divergence, h1_seminorm_sq,
                     lp_norm, project_solenoidal, require_finite, solve_helmholtz)

_COS = (COSINE,) * 3
_SIN = (SINE,) * 3


@dataclass(frozen=True)
class InductionStepReport:
    div_residual: float
    div_residual_pre: float
    magnetic_energy_before: float
    magnetic_energy_after: float
    dissipation: float


def magnetic_energy(grid: Grid, H) -> float:
    return 0.5 * lp_norm(grid, H, 2) ** 2


def div_residual(grid: Grid, H) -> float:
    return lp_norm(grid, divergence(grid, H), 2)


def electric_field(grid: Grid, u: np.ndarray, H: np.ndarray) -> np.ndarray:
    """De-aliased ``u x H`` (a product of two zero-trace fields, hence even)."""
    E = np.cross(u, H, axis=0)
    return np.stack([dealias(grid, E[i], _COS) for i in range(3)])


def step_magnetic(grid: Grid, H, u, nu: float, dt: float
                  ) -> tuple[np.ndarray, InductionStepReport]:
    """Explicit transport, implicit diffusion, then solenoidal projection."""
    if not dt > 0:
        raise ValueError(f"dt must be positive (got {dt})")
    if not nu > 0:
        raise ValueError(f"nu must be positive (got {nu})")
    H = grid.check_vector(H, "H")
    u = grid.check_vector(u, "u")
    require_finite(H, "H")
    require_finite(u, "u")

    rhs = H + dt * curl(grid, electric_field(grid, u, H), "cosine")
    pre = np.stack([solve_helmholtz(grid, rhs[i], nu * dt, _SIN) for i in range(3)])
    new = project_solenoidal(grid, pre)
    report = InductionStepReport(
        div_residual=div_residual(grid, new),
        div_residual_pre=div_residual(grid, pre),
        magnetic_energy_before=magnetic_energy(grid, H),
        magnetic_energy_after=magnetic_energy(grid, new),
        dissipation=nu * lp_norm(grid, curl(grid, new), 2) ** 2 * dt,
    )
    return new, report


def solve_operator(grid: Grid, u_traj, H0, t_end: float, dt: float,
                   nu: float = 1.0) -> list[np.ndarray]:
    """Repeated ``step_magnetic`` from ``H0``; returns ``H`` at every step including ``t = 0``.

    ``u_traj`` is either a callable ``t -> u`` or a sequence indexed by step.
    """
    if not dt > 0 or not t_end >= 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    n_steps = int(round(t_end / dt))
    if callable(u_traj):
        velocity = lambda k: u_traj(k * dt)
    else:
        seq: Sequence = u_traj
        if len(seq) < n_steps:
            raise ValueError(f"velocity trajectory has {len(seq)} entries, need {n_steps}")
        velocity = lambda k: seq[k]
    H = grid.check_vector(H0, "H0").copy()
    out = [H]
    for k in range(n_steps):
        H, _ = step_magnetic(grid, H, velocity(k), nu, dt)
        out.append(H)
    return out


def gronwall_rate(u_max: float, nu: float) -> float:
    """Rate ``C = ||u||_inf^2 / (4 nu)`` in ``||H1 - H2||(t) <= exp(C t) ||H1 - H2||(0)``.

    From ``d/dt ||dH||^2 = -2 nu ||curl dH||^2 + 2 (u x dH, curl dH)`` and Young's inequality.
    """
    return u_max ** 2 / (4.0 * nu)


def h1_norm_sq(grid: Grid, H) -> float:
    return lp_norm(grid, H, 2) ** 2 + h1_seminorm_sq(grid, H)
