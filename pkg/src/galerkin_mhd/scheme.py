"""Coupled time stepping, initial-data presets and regularization ladders."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis
from .continuity import ContinuityStepReport, step_density
from .errors import DensityPositivityError, PicardDivergenceError, StepFailure
from .fields import (COSINE, Grid, dealias, gradient, integrate, lp_norm, project_solenoidal,
                     random_smooth, random_solenoidal)
from .induction import InductionStepReport, step_magnetic
from .momentum import MomentumStepReport, step_momentum
from .params import FluidParams, InitialData, RegularizationParams, State

PRESETS = ("equilibrium", "acoustic-pulse", "mhd-pulse", "random-smooth")
FIELD_SHAPES = ("loop", "tube")
MAX_HALVINGS = 5


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    fluid: FluidParams = field(default_factory=FluidParams)
    reg: RegularizationParams = field(default_factory=RegularizationParams)
    dt: float = 1e-3
    t_end: float = 0.1
    picard_tol: float = 1e-10
    picard_max: int = 25
    series_every: int = 1
    snapshot_every: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive (got {self.dt})")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative (got {self.t_end})")
        if not self.picard_tol > 0:
            raise ValueError(f"picard_tol must be positive (got {self.picard_tol})")
        if self.picard_max < 1:
            raise ValueError(f"picard_max must be at least 1 (got {self.picard_max})")
        if self.series_every < 1 or self.snapshot_every < 1:
            raise ValueError("series_every and snapshot_every must be at least 1")
        self.reg.validate_against(self.fluid)

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


# --- initial data ----------------------------------------------------------------------------

def density_bump(grid: Grid, amplitude: float, mode: int = 1, rho_bar: float = 1.0) -> np.ndarray:
    """``rho_bar (1 + A prod_i sin^2(m pi x_i / L_i))`` over the active axes."""
    x = grid.coords()
    bump = np.ones(grid.shape)
    for a in grid.active_axes:
        bump = bump * np.sin(mode * np.pi * x[a] / grid.length[a]) ** 2
    return rho_bar * (1.0 + amplitude * bump)


def flux_tube(grid: Grid, mode: int = 1) -> np.ndarray:
    """Out-of-plane field ``(0, 0, sin(2 m pi x / Lx) sin(2 m pi y / Ly))``; z-invariant, hence solenoidal."""
    if grid.mode != "2.5d":
        raise ValueError("the flux-tube field needs a z-invariant grid")
    x, y, _ = grid.coords()
    H = grid.vzeros()
    H[2] = (np.sin(2 * mode * np.pi * x / grid.length[0])
            * np.sin(2 * mode * np.pi * y / grid.length[1]))
    return H


def make_initial_data(grid: Grid, preset: str = "equilibrium", amplitude: float = 0.1,
                      field_amplitude: float | None = None, velocity_amplitude: float = 0.0,
                      seed: int = 0, mode: int = 1, rho_bar: float = 1.0,
                      field_shape: str = "loop") -> InitialData:
    """Build one of the named presets.

    ``mode`` scales the lattice of the density bump (and of the flux tube).
    ``field_shape`` selects localized random loops or the flux-tube lattice
    for ``mhd-pulse``.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r} (choose from {', '.join(PRESETS)})")
    if field_shape not in FIELD_SHAPES:
        raise ValueError(f"unknown field shape {field_shape!r}")
    if not rho_bar > 0:
        raise ValueError("rho_bar must be positive")
    if mode < 1:
        raise ValueError("mode must be a positive integer")
    B = amplitude if field_amplitude is None else field_amplitude
    rng = np.random.default_rng(seed)
    info = {"preset": preset, "seed": seed, "amplitude": amplitude, "field_amplitude": B,
            "velocity_amplitude": velocity_amplitude, "mode": mode, "rho_bar": rho_bar,
            "field_shape": field_shape}
    H = grid.vzeros()
    m = grid.vzeros()
    if preset == "equilibrium":
        rho = np.full(grid.shape, rho_bar)
    elif preset == "acoustic-pulse":
        rho = density_bump(grid, amplitude, mode, rho_bar)
    elif preset == "mhd-pulse":
        rho = density_bump(grid, amplitude, mode, rho_bar)
        if field_shape == "tube":
            H = B * flux_tube(grid, mode)
        else:
            H = B * random_solenoidal(grid, rng)
    else:
        rho = rho_bar * (1.0 + amplitude * random_smooth(grid, rng, "cosine"))
        if np.min(rho) <= 0:
            raise ValueError("random-smooth amplitude too large for a positive density")
        if velocity_amplitude:
            u = np.stack([random_smooth(grid, rng, "sine") for _ in range(3)])
            m = rho * velocity_amplitude * u
        if B:
            H = B * random_solenoidal(grid, rng)
    return InitialData(grid, rho, m, H, info)


@dataclass(frozen=True)
class MollifiedData:
    data: InitialData
    artificial_mass: float  # delta * int rho_{0,delta}^beta


def mollify_initial_data(raw: InitialData, delta: float, beta: float) -> MollifiedData:
    """Lift the density into ``[delta, delta^(-1/(2 beta))]`` and adapt momentum and field.

    Clamp, then smooth by removing the top third of the cosine modes, then
    clip again so the bounds hold exactly.  Momentum is kept where the density
    was not lowered and zeroed elsewhere.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1) (got {delta})")
    g = raw.grid
    lo, hi = delta, delta ** (-1.0 / (2.0 * beta))
    rho = np.clip(raw.rho0, lo, hi)
    rho = np.clip(dealias(g, rho, (COSINE,) * 3), lo, hi)
    tol = 1e-8 * max(float(np.max(raw.rho0)), 1.0)
    keep = rho >= raw.rho0 - tol
    m = np.where(keep, raw.m0, 0.0)
    H = project_solenoidal(g, raw.H0)
    data = InitialData(g, rho, m, H, dict(raw.info, delta=delta, beta=beta))
    return MollifiedData(data, delta * integrate(g, rho ** beta))


# --- coupled step -----------------------------------------------------------------------------

@dataclass(frozen=True)
class StepReport:
    t: float
    dt: float
    picard_iterations: int
    defect: float
    defect_history: tuple[float, ...]
    continuity: ContinuityStepReport
    induction: InductionStepReport
    momentum: MomentumStepReport


def step_coupled(state: State, cfg: RunConfig, dt: float | None = None) -> tuple[State, StepReport]:
    """One step of the coupled system by Picard iteration on the velocity.

    Each sweep advances density and magnetic field with the current velocity
    iterate, then solves the momentum equation with the updated density and
    field.  Iteration stops once successive velocities agree to
    ``cfg.picard_tol`` in L2.
    """
    dt = cfg.dt if dt is None else dt
    g = state.grid
    fluid, reg = cfg.fluid, cfg.reg
    u_it = state.u
    history = []
    for it in range(1, cfg.picard_max + 1):
        rho_new, crep = step_density(g, state.rho, u_it, reg.eps, dt)
        if crep.min_density <= 0:
            raise DensityPositivityError(crep.min_density)
        H_new, irep = step_magnetic(g, state.H, u_it, fluid.nu, dt)
        forcing = State(g, state.t + dt, rho_new, u_it, H_new)
        u_new, mrep = step_momentum(state, fluid, reg, dt, rho_new=rho_new, forcing=forcing)
        defect = lp_norm(g, u_new - u_it)
        history.append(defect)
        u_it = u_new
        if not np.isfinite(defect) or (it > 1 and defect > 1e3 * history[0] + 1e-300):
            raise PicardDivergenceError(defect, it)
        if defect < cfg.picard_tol:
            break
    else:
        raise PicardDivergenceError(history[-1], cfg.picard_max)
    new = State(g, state.t + dt, rho_new, u_it, H_new)
    return new, StepReport(state.t + dt, dt, it, history[-1], tuple(history), crep, irep, mrep)


# --- full runs -------------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Snapshots, diagnostic series and the accumulated dissipation of one run.

    ``dissipation[i]`` is the sum of ``dt * D`` up to ``series[i].t``.
    """

    config: RunConfig
    snapshots: list[State] = field(default_factory=list)
    series: list[analysis.TimeSeriesRow] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    steps: list[StepReport] = field(default_factory=list)
    failure: str | None = None
    info: dict = field(default_factory=dict)
    artificial_mass: float | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def final(self) -> State:
        return self.snapshots[-1]

    @property
    def ok(self) -> bool:
        return self.failure is None


def initial_state(cfg: RunConfig, init: InitialData) -> tuple[State, float | None]:
    """Mollify when ``delta > 0``; returns the state and ``delta * int rho^beta``."""
    if init.grid != cfg.grid:
        raise ValueError("initial data and configuration use different grids")
    if cfg.reg.delta > 0:
        moll = mollify_initial_data(init, cfg.reg.delta, cfg.reg.beta)
        return moll.data.to_state(), moll.artificial_mass
    return InitialData(init.grid, init.rho0, init.m0, project_solenoidal(init.grid, init.H0),
                       init.info).to_state(), None


def _advance(state: State, cfg: RunConfig, dt: float, depth: int, reports: list) -> tuple[State, float]:
    """Advance by ``dt``, splitting into halves on failure; returns the state and ``sum dt D``."""
    try:
        new, rep = step_coupled(state, cfg, dt)
    except StepFailure:
        if depth >= MAX_HALVINGS:
            raise
        mid, d1 = _advance(state, cfg, dt / 2, depth + 1, reports)
        end, d2 = _advance(mid, cfg, dt / 2, depth + 1, reports)
        return end, d1 + d2
    reports.append(rep)
    e = analysis.energy(new, cfg.fluid, cfg.reg)
    return new, dt * e.dissipation


def run(cfg: RunConfig, init: InitialData, keep_steps: bool = False) -> Trajectory:
    """Integrate from ``init`` to ``cfg.t_end``.

    A failing step is retried as two half steps, recursively up to five
    levels; beyond that the partial trajectory is returned with ``failure`` set.
    """
    state, art = initial_state(cfg, init)
    traj = Trajectory(cfg, info=dict(init.info), artificial_mass=art)
    traj.snapshots.append(state)
    traj.series.append(analysis.series_row(state, cfg.fluid, cfg.reg))
    traj.dissipation.append(0.0)
    n_steps = int(np.ceil(cfg.t_end / cfg.dt - 1e-9)) if cfg.t_end > 0 else 0
    total = 0.0
    for n in range(1, n_steps + 1):
        dt = min(cfg.dt, cfg.t_end - state.t) if n == n_steps else cfg.dt
        reports: list[StepReport] = []
        try:
            state, d = _advance(state, cfg, dt, 0, reports)
        except (StepFailure, ValueError) as exc:
            traj.failure = f"step {n} at t = {state.t:.6g}: {exc}"
            if traj.snapshots[-1] is not state:
                traj.snapshots.append(state)
            break
        if n == n_steps:
            state = state.replace(t=cfg.t_end)
        total += d
        if keep_steps:
            traj.steps.extend(reports)
        if n % cfg.series_every == 0 or n == n_steps:
            traj.series.append(analysis.series_row(state, cfg.fluid, cfg.reg))
            traj.dissipation.append(total)
        if n % cfg.snapshot_every == 0 or n == n_steps:
            traj.snapshots.append(state)
    return traj


# --- ladders ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class LadderEntry:
    eps: float
    delta: float
    trajectory: Trajectory
    artificial_pressure: float  # delta * int int rho^beta
    log_bound: float  # int int (delta rho^beta + a rho^gamma) ln(1 + rho)
    eps_gradient: float  # eps * int int |grad rho|^2
    initial_artificial_mass: float | None
    distance_rho: float | None  # space-time L2 distance to the previous entry
    distance_u: float | None
    distance_H: float | None


@dataclass(frozen=True)
class LadderReport:
    entries: tuple[LadderEntry, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.entries], dtype=float)


def _space_time(traj: Trajectory, fn) -> float:
    vals = [fn(s) for s in traj.snapshots]
    return analysis.time_integral(traj.times, vals)


def _distance(a: Trajectory, b: Trajectory, attr: str) -> float | None:
    if len(a.snapshots) != len(b.snapshots) or not np.allclose(a.times, b.times):
        return None
    g = a.config.grid
    vals = [lp_norm(g, getattr(x, attr) - getattr(y, attr)) ** 2
            for x, y in zip(a.snapshots, b.snapshots)]
    return float(np.sqrt(analysis.time_integral(a.times, vals)))


def _ladder_workers() -> int:
    try:
        return max(1, int(os.environ.get("MHD_THREADS", "0")) or os.cpu_count() or 1)
    except ValueError:
        return 1


def ladder(cfg: RunConfig, init: InitialData, eps_list, delta_list,
           workers: int | None = None) -> LadderReport:
    """Run every ``(eps, delta)`` pair (eps outer, delta inner) on a fixed grid and step."""
    for name, values in (("eps", eps_list), ("delta", delta_list)):
        if list(values) != sorted(values, reverse=True):
            raise ValueError(f"{name} list must be sorted in decreasing order")
    pairs = list(itertools.product(eps_list, delta_list))
    configs = [cfg.replace(reg=replace(cfg.reg, eps=e, delta=d)) for e, d in pairs]
    for c in configs:
        c.reg.validate_against(c.fluid)
    workers = workers or _ladder_workers()
    if workers > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(lambda c: run(c, init), configs))
    else:
        trajs = [run(c, init) for c in configs]

    entries = []
    fluid = cfg.fluid
    for i, ((e, d), c, tr) in enumerate(zip(pairs, configs, trajs)):
        if not tr.ok:
            raise StepFailure(f"ladder entry eps={e:g}, delta={d:g} failed: {tr.failure}")
        g = c.grid
        art = _space_time(tr, lambda s: d * integrate(g, s.rho ** c.reg.beta))
        logb = _space_time(tr, lambda s: integrate(
            g, (d * s.rho ** c.reg.beta + fluid.a * s.rho ** fluid.gamma) * np.log1p(s.rho)))
        epsg = _space_time(tr, lambda s: e * lp_norm(g, gradient(g, s.rho, "cosine")) ** 2)
        prev = trajs[i - 1] if i > 0 else None
        entries.append(LadderEntry(
            eps=e, delta=d, trajectory=tr, artificial_pressure=art, log_bound=logb,
            eps_gradient=epsg, initial_artificial_mass=tr.artificial_mass,
            distance_rho=_distance(prev, tr, "rho") if prev else None,
            distance_u=_distance(prev, tr, "u") if prev else None,
            distance_H=_distance(prev, tr, "H") if prev else None,
        ))
    return LadderReport(tuple(entries))
