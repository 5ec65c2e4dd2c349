"""Large-time behaviour: relaxation towards the constant-density rest state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis
from .fields import Grid, curl, h1_seminorm_sq, integrate, lp_norm
from .params import FluidParams, InitialData, RegularizationParams, State


@dataclass(frozen=True)
class StationaryState:
    rho_s: float

    def energy(self, fluid: FluidParams, grid: Grid) -> float:
        """``a / (gamma - 1) rho_s^gamma |Omega|``."""
        return fluid.a / (fluid.gamma - 1.0) * self.rho_s ** fluid.gamma * grid.volume


def predict_stationary(init: InitialData | np.ndarray, grid: Grid) -> StationaryState:
    """Constant density carrying the same mass as the initial density."""
    rho0 = init.rho0 if isinstance(init, InitialData) else np.asarray(init, dtype=float)
    m = integrate(grid, grid.check_scalar(rho0, "rho0"))
    if not m > 0:
        raise ValueError("initial mass must be positive")
    return StationaryState(m / grid.volume)


def first_dirichlet_eigenvalue(grid: Grid) -> float:
    return float(np.pi ** 2 * sum(1.0 / grid.length[a] ** 2 for a in grid.active_axes))


def large_time_horizon(fluid: FluidParams, rho_s: float, grid: Grid,
                       decades: float = 10.0) -> float:
    """Time over which the slowest viscous mode ``exp(-mu lambda_1 t / rho_s)`` falls by ``e^-decades``."""
    return decades * rho_s / (fluid.mu * first_dirichlet_eigenvalue(grid))


@dataclass(frozen=True)
class DecayReport:
    times: np.ndarray
    rho_deviation: np.ndarray  # ||rho - rho_s||_{L^gamma}
    u_L2: np.ndarray
    H_L2: np.ndarray
    energy: np.ndarray
    window_starts: np.ndarray
    window_dissipation: np.ndarray  # int over [m, m+1] of ||grad u||^2 + ||curl H||^2
    rho_s: float
    energy_gap: float  # |E(T) - a/(gamma-1) rho_s^gamma |Omega||


def decay_report(snapshots: list[State], fluid: FluidParams, reg: RegularizationParams,
                 rho_s: float | None = None, window: float = 1.0) -> DecayReport:
    g = snapshots[0].grid
    if rho_s is None:
        rho_s = predict_stationary(snapshots[0].rho, g).rho_s
    times = np.array([s.t for s in snapshots])
    dev = np.array([lp_norm(g, s.rho - rho_s, fluid.gamma) for s in snapshots])
    u = np.array([lp_norm(g, s.u) for s in snapshots])
    H = np.array([lp_norm(g, s.H) for s in snapshots])
    E = np.array([analysis.energy(s, fluid, reg).total for s in snapshots])
    rate = np.array([h1_seminorm_sq(g, s.u) + lp_norm(g, curl(g, s.H)) ** 2 for s in snapshots])

    starts, windows = [], []
    m = times[0]
    while m + window <= times[-1] + 1e-9 * window:
        sel = (times >= m - 1e-12) & (times <= m + window + 1e-12)
        starts.append(m)
        windows.append(analysis.time_integral(times[sel], rate[sel]))
        m += window
    gap = abs(E[-1] - StationaryState(rho_s).energy(fluid, g))
    return DecayReport(times, dev, u, H, E, np.array(starts), np.array(windows), rho_s, gap)


def monotone_after(values, times, t_start: float, rel_floor: float = 1e-12) -> bool:
    """Non-increasing from ``t_start`` on, ignoring wiggles below ``rel_floor * max``."""
    v = np.asarray(values)[np.asarray(times) >= t_start]
    if len(v) < 2:
        return True
    floor = rel_floor * float(np.max(np.abs(values)))
    return bool(np.all(np.diff(v) <= floor))
