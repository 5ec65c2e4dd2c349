"""Regularized compressible magnetohydrodynamics in a box.

Pseudo-spectral sine/cosine discretization of the isentropic compressible
MHD system with artificial viscosity and artificial pressure, plus the
diagnostics used to study the vanishing-regularization and large-time limits.
"""

from .analysis import (EnergyBreakdown, TimeSeriesRow, bogovskii, cutoff_L, cutoff_T,
                       effective_viscous_flux, energy, luxemburg_norm, orlicz_M, orlicz_N,
                       oscillation_defect, renorm_residual)
from .continuity import mass, step_density
from .errors import DensityPositivityError, PicardDivergenceError, StepFailure
from .fields import Grid
from .induction import solve_operator, step_magnetic
from .longtime import decay_report, large_time_horizon, predict_stationary
from .momentum import lorentz_force, pressure_gradient, step_momentum
from .params import FluidParams, InitialData, RegularizationParams, State
from .scheme import (RunConfig, Trajectory, ladder, make_initial_data, mollify_initial_data,
                     run, step_coupled)

__version__ = "0.1.0"
