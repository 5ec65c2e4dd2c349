"""Physical constants, approximation knobs and the state of one time slice."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fields import Grid


@dataclass(frozen=True)
class FluidParams:
    """Pressure law ``p = a rho^gamma``, viscosities ``mu``, ``lam`` and magnetic diffusivity ``nu``."""

    a: float = 1.0
    gamma: float = 5.0 / 3.0
    mu: float = 0.1
    lam: float = 0.0
    nu: float = 0.1

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive (got {self.a})")
        if not self.gamma > 1.5:
            raise ValueError(f"gamma must exceed 1.5 (got {self.gamma})")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive (got {self.mu})")
        if not 2 * self.mu + 3 * self.lam > 0:
            raise ValueError(f"2*mu + 3*lambda must be positive (got mu={self.mu}, lambda={self.lam})")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive (got {self.nu})")


def min_beta(gamma: float) -> float:
    """Lower bound on the artificial-pressure exponent: ``max(4, 6 gamma / (2 gamma - 3))``."""
    return max(4.0, 6.0 * gamma / (2.0 * gamma - 3.0))


@dataclass(frozen=True)
class RegularizationParams:
    """Artificial viscosity ``eps``, artificial pressure ``delta * rho^beta`` and Galerkin truncation.

    ``n_modes = None`` keeps every resolved sine mode.
    """

    eps: float = 0.0
    delta: float = 0.0
    beta: float = 31.0
    n_modes: int | None = None

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative (got {self.eps})")
        if self.delta < 0:
            raise ValueError(f"delta must be non-negative (got {self.delta})")
        if self.n_modes is not None and self.n_modes < 1:
            raise ValueError(f"n_modes must be positive (got {self.n_modes})")

    def validate_against(self, fluid: FluidParams) -> None:
        if self.delta > 0 and not self.beta > min_beta(fluid.gamma):
            raise ValueError(
                f"beta must exceed max(4, 6*gamma/(2*gamma-3)) = {min_beta(fluid.gamma):g} "
                f"when delta > 0 (got {self.beta})")


@dataclass(frozen=True)
class State:
    """One time slice ``(t, rho, u, H)`` on ``grid``."""

    grid: Grid
    t: float
    rho: np.ndarray
    u: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        self.grid.check_scalar(self.rho, "rho")
        self.grid.check_vector(self.u, "u")
        self.grid.check_vector(self.H, "H")

    def replace(self, **changes) -> "State":
        return replace(self, **changes)

    def copy(self) -> "State":
        return State(self.grid, self.t, self.rho.copy(), self.u.copy(), self.H.copy())


@dataclass(frozen=True)
class InitialData:
    """Raw initial data: density, momentum ``m0 = rho0 u0`` and a solenoidal magnetic field."""

    grid: Grid
    rho0: np.ndarray
    m0: np.ndarray
    H0: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid.check_scalar(self.rho0, "rho0")
        self.grid.check_vector(self.m0, "m0")
        self.grid.check_vector(self.H0, "H0")
        if np.min(self.rho0) < 0:
            raise ValueError("initial density must be non-negative")
        vacuum = self.rho0 <= 0
        if np.any(np.abs(self.m0[:, vacuum]) > 0):
            raise ValueError("initial momentum must vanish where the density vanishes")

    def to_state(self, t: float = 0.0) -> State:
        if np.min(self.rho0) <= 0:
            raise ValueError("initial density must be positive to form a state (mollify first)")
        return State(self.grid, t, self.rho0.copy(), self.m0 / self.rho0, self.H0.copy())
