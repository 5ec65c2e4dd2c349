"""Desk-scale acceptance checks.

Desk configuration: z-invariant 2.5D mode, 64 x 64 cells, unit box,
gamma = 5/3, a = 1, mu = 0.1, lambda = 0, nu = 0.1.  Each test records one
PASS/FAIL line; the lines are repeated in the terminal summary.
"""

import numpy as np
import pytest
import sympy as sp

from galerkin_mhd.analysis import (bogovskii, cutoff_L, cutoff_L_prime, cutoff_T, flux_functional,
                                   gronwall_fit, orlicz_M, orlicz_N, oscillation_defect,
                                   renorm_residual, renormalizer)
from galerkin_mhd.continuity import mass_flux, step_density
from galerkin_mhd.fields import (Grid, curl, divergence, h1_seminorm_sq, laplacian, lp_norm,
                                 random_smooth, random_solenoidal, vector_laplacian)
from galerkin_mhd.induction import electric_field, solve_operator, step_magnetic
from galerkin_mhd.longtime import (decay_report, large_time_horizon, monotone_after,
                                   predict_stationary)
from galerkin_mhd.momentum import (artificial_drag, convection, lorentz_force,
                                   magnetic_stress_divergence, pressure_gradient, viscous_operator)
from galerkin_mhd.params import FluidParams, RegularizationParams, State
from galerkin_mhd.scheme import RunConfig, ladder, make_initial_data, run

pytestmark = pytest.mark.slow

FLUID = FluidParams(a=1.0, gamma=5.0 / 3.0, mu=0.1, lam=0.0, nu=0.1)
REG = RegularizationParams(eps=1e-2, delta=1e-2, beta=31)


def _fmt(values):
    return "[" + ", ".join(f"{v:.3e}" for v in values) + "]"


@pytest.fixture(scope="module")
def desk():
    return Grid.box(64, 64, 1, mode="2.5d")


@pytest.fixture(scope="module")
def pulse_run(desk):
    """2000 steps of the mhd-pulse preset, shared by the mass and energy checks."""
    cfg = RunConfig(desk, FLUID, REG, dt=1e-3, t_end=2.0, series_every=1, snapshot_every=2000)
    traj = run(cfg, make_initial_data(desk, "mhd-pulse", amplitude=0.1))
    assert traj.ok, traj.failure
    assert len(traj.series) == 2001
    return traj


@pytest.fixture(scope="module")
def delta_ladder(desk):
    cfg = RunConfig(desk, FLUID, REG, dt=1e-3, t_end=0.1, snapshot_every=10)
    init = make_initial_data(desk, "mhd-pulse", amplitude=0.1)
    return init, ladder(cfg, init, [1e-2], [1e-1, 1e-2, 1e-3])


def test_criterion_01_mass_conservation(pulse_run, verdict):
    mass = np.array([r.mass for r in pulse_run.series])
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    verdict(1, drift <= 1e-8, f"max relative mass drift {drift:.3e} over 2000 steps (limit 1e-8)")


def test_criterion_02_energy_inequality(pulse_run, verdict):
    E = np.array([r.E_total for r in pulse_run.series])
    budget = (E + np.array(pulse_run.dissipation)) / E[0]
    worst_rise = float(np.max(np.diff(E)) / E[0])
    ok = bool(np.all(budget <= 1.001)) and worst_rise <= 1e-6
    verdict(2, ok, f"max (E + sum dt D)/E(0) = {np.max(budget):.9f} (limit 1.001); "
                   f"largest step change of E = {worst_rise:.3e} E(0) (limit 1e-6)")


def _flow(grid, scale=1.0):
    x, y, _ = grid.coords()
    u = grid.vzeros()
    u[0] = scale * np.sin(np.pi * x) ** 2 * np.sin(2 * np.pi * y)
    u[1] = -scale * np.sin(2 * np.pi * x) * np.sin(np.pi * y) ** 2
    return u


def _tube(grid, kx=1, ky=1):
    x, y, _ = grid.coords()
    H = grid.vzeros()
    H[2] = np.sin(kx * np.pi * x) * np.sin(ky * np.pi * y)
    return H


def test_criterion_03_induction_operator(desk, verdict):
    nu, dt, t_end = FLUID.nu, 5e-3, 0.5
    u = _flow(desk, 2.0)
    flow = lambda t: np.cos(np.pi * t) * u

    # (a) determinism
    H0 = 0.3 * _tube(desk) + 0.1 * random_solenoidal(desk, np.random.default_rng(1))
    a = solve_operator(desk, flow, H0, t_end, dt, nu)
    b = solve_operator(desk, flow, H0, t_end, dt, nu)
    bitwise = all(np.array_equal(x, y) for x, y in zip(a, b))

    # (b) Gronwall envelope for the difference of two solutions
    G0 = H0 + 0.05 * _tube(desk, 2, 1)
    c = solve_operator(desk, flow, G0, t_end, dt, nu)
    d = np.array([lp_norm(desk, x - y) for x, y in zip(a, c)])
    t = dt * np.arange(len(d))
    fit = gronwall_fit(t, d / d[0], float(np.max(np.abs(u))), nu)

    # (c) continuity in the velocity
    w = desk.vzeros()
    x, y, _ = desk.coords()
    w[0] = np.sin(np.pi * x) * np.sin(np.pi * y)
    ratios = []
    for eta in (1e-1, 1e-2, 1e-3):
        pert = solve_operator(desk, lambda s: flow(s) + eta * w, H0, t_end, dt, nu)
        ratios.append(max(lp_norm(desk, p - q) for p, q in zip(pert, a)) / eta)
    band = max(ratios) / min(ratios)

    ok = bitwise and fit.envelope_holds and fit.residual_factor <= 2 and band <= 3
    verdict(3, ok, f"bitwise={bitwise}; envelope holds={fit.envelope_holds} "
                   f"(C fit {fit.C_fit:.3f} vs bound {fit.C_theory:.3f}, residual factor "
                   f"{fit.residual_factor:.3f} <= 2); perturbation band {band:.3f} <= 3")


def test_criterion_04_lorentz_identity(desk, verdict):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        H = random_solenoidal(desk, rng)
        err = lp_norm(desk, lorentz_force(desk, H) - magnetic_stress_divergence(desk, H))
        h1_sq = lp_norm(desk, H) ** 2 + h1_seminorm_sq(desk, H)
        worst = max(worst, err / h1_sq)
    verdict(4, worst <= 1e-8, f"max error / ||H||_H1^2 = {worst:.3e} over 20 fields (limit 1e-8)")


def test_criterion_05_linear_mode_decay(desk, verdict):
    eps, nu, dt = 0.05, FLUID.nu, 0.01
    x, y, _ = desk.coords()
    mode = np.cos(2 * np.pi * x) * np.cos(np.pi * y)
    rho_factor = 1.0 / (1.0 + eps * dt * 5 * np.pi ** 2)
    H_mode = _tube(desk, 1, 3)
    H_factor = 1.0 / (1.0 + nu * dt * 10 * np.pi ** 2)
    u = desk.vzeros()
    rho, H = 1.0 + 0.3 * mode, H_mode.copy()
    worst_rho = worst_H = 0.0
    for n in range(1, 21):
        rho, _ = step_density(desk, rho, u, eps, dt)
        H, _ = step_magnetic(desk, H, u, nu, dt)
        worst_rho = max(worst_rho, np.max(np.abs(rho - (1.0 + 0.3 * rho_factor ** n * mode))))
        worst_H = max(worst_H, np.max(np.abs(H - H_factor ** n * H_mode)))
    ok = worst_rho <= 1e-12 and worst_H <= 1e-12
    verdict(5, ok, f"max deviation from closed-form factors: density {worst_rho:.2e}, "
                   f"field {worst_H:.2e} over 20 steps (limit 1e-12)")


class _Manufactured:
    """Smooth steady fields with the exact residual of the regularized system.

    The density carries a Poisson-kernel profile whose cosine coefficients
    decay like ``r^k``, which keeps the error above round-off at 128^2.  The
    velocity and the in-plane field are Gaussian bumps that are flat at the
    walls, so every term has a smooth odd or even reflection.
    """

    def __init__(self, eps):
        X, Y = sp.symbols("x y")
        half = sp.Rational(1, 2)
        r = sp.Rational(17, 20)
        poisson = (1 - r ** 2) / (1 - 2 * r * sp.cos(sp.pi * X) + r ** 2)
        rho = 1 + sp.Rational(1, 20) * poisson * sp.cos(sp.pi * Y)
        bump = sp.exp(-((X - half) ** 2 + (Y - half) ** 2) / (2 * sp.Rational(3, 50) ** 2))
        u = [sp.Rational(3, 10) * bump * (1 + 5 * (Y - half)),
             -sp.Rational(1, 5) * bump * (1 + 4 * (X - half)),
             sp.Rational(1, 10) * bump]
        psi = bump / 200
        H = [sp.diff(psi, Y), -sp.diff(psi, X),
             sp.Rational(3, 10) * sp.sin(sp.pi * X) * sp.sin(2 * sp.pi * Y)]
        a, gam = FLUID.a, sp.Rational(5, 3)
        mu, lam, nu = sp.Rational(1, 10), 0, sp.Rational(1, 10)
        d = [lambda f: sp.diff(f, X), lambda f: sp.diff(f, Y), lambda f: 0 * f]
        lap = lambda f: d[0](d[0](f)) + d[1](d[1](f))
        cross = lambda p, q: [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2],
                              p[0] * q[1] - p[1] * q[0]]
        rot = lambda v: [d[1](v[2]), -d[0](v[2]), d[0](v[1]) - d[1](v[0])]
        div_u = d[0](u[0]) + d[1](u[1])
        JxH = cross(rot(H), H)
        mom = [sum(d[j](rho * u[i] * u[j]) for j in range(2)) + d[i](a * rho ** gam)
               - mu * lap(u[i]) - (lam + mu) * d[i](div_u) - JxH[i]
               + eps * sum(d[j](rho) * d[j](u[i]) for j in range(2)) for i in range(3)]
        cont = sum(d[j](rho * u[j]) for j in range(2)) - eps * lap(rho)
        E = cross(u, H)
        ind = [-rot(E)[i] - nu * lap(H[i]) for i in range(3)]
        f = lambda exprs: [sp.lambdify((X, Y), e, "numpy") for e in exprs]
        self.fields = {"rho": f([rho]), "u": f(u), "H": f(H)}
        self.exact = {"mom": f(mom), "cont": f([cont]), "ind": f(ind)}
        self.eps = eps

    @staticmethod
    def _eval(fns, x, y):
        return np.stack([np.broadcast_to(fn(x, y), x.shape).astype(float) for fn in fns])

    def residual_error(self, n):
        g = Grid.box(n, n, 1, mode="2.5d")
        x, y, _ = g.coords()
        rho = self._eval(self.fields["rho"], x, y)[0]
        u, H = self._eval(self.fields["u"], x, y), self._eval(self.fields["H"], x, y)
        mom = (convection(g, rho, u) + pressure_gradient(g, rho, FLUID.a, FLUID.gamma)
               + viscous_operator(g, u, FLUID) - lorentz_force(g, H)
               + artificial_drag(g, rho, u, self.eps))
        cont = divergence(g, mass_flux(g, rho, u)) - self.eps * laplacian(g, rho, "cosine")
        ind = -curl(g, electric_field(g, u, H), "cosine") - FLUID.nu * vector_laplacian(g, H)
        errs = [mom - self._eval(self.exact["mom"], x, y),
                cont - self._eval(self.exact["cont"], x, y)[0],
                ind - self._eval(self.exact["ind"], x, y)]
        return float(np.sqrt(sum(lp_norm(g, e) ** 2 for e in errs)))


def test_criterion_06_convergence(desk, verdict):
    mf = _Manufactured(REG.eps)
    errs = [mf.residual_error(n) for n in (32, 64, 128)]
    space = [errs[0] / errs[1], errs[1] / errs[2]]

    init = make_initial_data(desk, "mhd-pulse", amplitude=0.1)
    finals = {}
    for dt in (4e-3, 2e-3, 1e-3, 5e-4):
        traj = run(RunConfig(desk, FLUID, REG, dt=dt, t_end=0.04, snapshot_every=10 ** 6), init)
        finals[dt] = traj.final

    def dist(p, q):
        return np.sqrt(sum(lp_norm(desk, getattr(p, f) - getattr(q, f)) ** 2
                           for f in ("rho", "u", "H")))

    defects = [dist(finals[dt], finals[dt / 2]) for dt in (4e-3, 2e-3, 1e-3)]
    time_ratios = [defects[0] / defects[1], defects[1] / defects[2]]
    ok = min(space) >= 10 and all(1.6 <= q <= 2.4 for q in time_ratios)
    verdict(6, ok, f"residual {errs[0]:.2e} -> {errs[1]:.2e} -> {errs[2]:.2e} "
                   f"(reductions {space[0]:.1f}x, {space[1]:.1f}x, need >= 10); "
                   f"time self-convergence ratios {time_ratios[0]:.3f}, {time_ratios[1]:.3f} "
                   f"(need 2 +- 20%)")


def test_criterion_07_delta_ladder(delta_ladder, verdict):
    _, rep = delta_ladder
    art = rep.column("artificial_pressure")
    logb = rep.column("log_bound")
    decreasing = bool(np.all(np.diff(art) < 0))
    band = float(logb.max() / logb.min())
    verdict(7, decreasing and band <= 2,
            f"delta int int rho^beta = {_fmt(art)} strictly decreasing="
            f"{decreasing}; log-bound band {band:.3f} (limit 2)")


def test_criterion_08_flux_ladder(delta_ladder, verdict):
    init, rep = delta_ladder
    k = 2.0 * float(np.max(init.rho0))
    F = np.array([flux_functional(e.trajectory.snapshots, FLUID, e.trajectory.config.reg, k)
                  for e in rep.entries])
    diffs = np.abs(np.diff(F))
    ok = bool(np.all(np.diff(diffs) < 0))
    verdict(8, ok, f"flux functional {_fmt(F)}, consecutive differences "
                   f"{_fmt(diffs)} decreasing={ok} (k = {k:.3f})")


def test_criterion_09_oscillation_defect(delta_ladder, desk, verdict):
    _, rep = delta_ladder
    times = rep.entries[0].trajectory.times
    rho = [[s.rho for s in e.trajectory.snapshots] for e in rep.entries]
    envelope = []
    for k in (1.0, 2.0, 4.0, 8.0):
        d = oscillation_defect(rho, times, desk, k, FLUID.gamma)
        envelope.append(max(d[:-1]))  # the last entry is the reference
    ratio = max(envelope) / min(envelope)
    verdict(9, ratio <= 2, f"defect envelope over k = 1, 2, 4, 8: "
                           f"{_fmt(envelope)}, max/min {ratio:.3f}")


def test_criterion_10_long_time(desk, verdict):
    init = make_initial_data(desk, "mhd-pulse", amplitude=0.1, mode=3, field_shape="tube")
    reg = RegularizationParams()
    rho_s = predict_stationary(init, desk).rho_s
    T = large_time_horizon(FLUID, rho_s, desk)
    cfg = RunConfig(desk, FLUID, reg, dt=2e-3, t_end=T, series_every=10, snapshot_every=10)
    traj = run(cfg, init)
    assert traj.ok, traj.failure
    rep = decay_report(traj.snapshots, FLUID, reg, rho_s)
    t = rep.times
    mono_u = monotone_after(rep.u_L2, t, 0.05 * T)
    mono_H = monotone_after(rep.H_L2, t, 0.05 * T)
    # the velocity starts from rest, so its scale is the peak it reaches
    u_drop = rep.u_L2[-1] / np.max(rep.u_L2)
    H_drop = rep.H_L2[-1] / rep.H_L2[0]
    rho_rel = rep.rho_deviation[-1] / rho_s
    gap = rep.energy_gap / rep.energy[0]
    windows = bool(np.all(np.diff(rep.window_dissipation) < 0))
    ok = (mono_u and mono_H and u_drop < 1e-3 and H_drop < 1e-3 and rho_rel <= 1e-2
          and gap <= 1e-2 and windows)
    verdict(10, ok, f"T = {T:.4f}; monotone u={mono_u} H={mono_H}; ||u(T)||/peak {u_drop:.2e}, "
                    f"||H(T)||/||H(0)|| {H_drop:.2e} (< 1e-3); ||rho - rho_s||/rho_s {rho_rel:.2e}; "
                    f"energy gap {gap:.2e} E(0); {len(rep.window_dissipation)} unit windows "
                    f"strictly decreasing={windows}")


def test_criterion_11_bogovskii(desk, verdict):
    rng = np.random.default_rng(11)
    residuals, ratios = [], []
    for _ in range(20):
        f = random_smooth(desk, rng, "cosine")
        f -= f.mean()
        res = bogovskii(desk, f)
        residuals.append(res.residual)
        ratios.append(res.bound_ratio)
    zero = bogovskii(desk, desk.zeros())
    exact_zero = bool(np.all(zero.W == 0))
    band = max(ratios) / min(ratios)
    ok = max(residuals) <= 1e-6 and band <= 3 and exact_zero
    verdict(11, ok, f"max relative div residual {max(residuals):.2e} (limit 1e-6); "
                    f"bound-ratio band {band:.3f} (limit 3); f = 0 gives exact zero={exact_zero}")


def test_criterion_12_orlicz_pair(verdict):
    s = np.linspace(0.0, 200.0, 2_000_001)
    Ms = orlicz_M(s)
    t_grid = np.linspace(0.0, 5.0, 51)
    legendre = max(abs(np.max(s * t - Ms) - orlicz_N(t)) for t in t_grid)
    rng = np.random.default_rng(12)
    ss = 10.0 ** rng.uniform(-6, 3, 10_000)
    tt = rng.uniform(0.0, 10.0, 10_000)
    slack = ss * tt - (orlicz_M(ss) + orlicz_N(tt))
    young = int(np.sum(slack > 1e-12 * (1 + ss * tt)))
    ok = legendre <= 1e-6 and young == 0
    verdict(12, ok, f"max |sup_s(st - M(s)) - N(t)| on [0, 5] = {legendre:.2e} (limit 1e-6); "
                    f"Young violations {young} of 10^4")


def test_criterion_13_cutoffs(verdict):
    rng = np.random.default_rng(13)
    failures = []
    for k in (0.5, 1.0, 2.0, 7.3):
        z = np.sort(rng.uniform(0.0, 6.0 * k, 10_000))
        T = cutoff_T(k, z)
        if not np.array_equal(T[z <= k], z[z <= k]):
            failures.append(f"T identity k={k}")
        if not np.all(T[z >= 3 * k] == 2 * k):
            failures.append(f"T plateau k={k}")
        slopes = np.diff(T) / np.diff(z)
        if np.any(slopes > 1 + 1e-9) or np.any(slopes < -1e-12):
            failures.append(f"T Lipschitz k={k}")
        if np.any(np.diff(slopes) > 1e-9):
            failures.append(f"T concavity k={k}")
        zl = np.sort(rng.uniform(1e-3, 6.0 * k, 10_000))
        L = cutoff_L(k, zl)
        below = zl < k
        if np.max(np.abs(L[below] - zl[below] * np.log(zl[below]))) > 1e-13 * max(1.0, k):
            failures.append(f"L below k={k}")
        if abs(cutoff_L(k, k * (1 + 1e-12)) - k * np.log(k)) > 1e-9:
            failures.append(f"L continuity k={k}")
        beyond = zl[zl >= 3 * k]
        slope = cutoff_L_prime(k, 3 * k)
        if np.max(np.abs(cutoff_L_prime(k, beyond) - slope)) > 1e-10:
            failures.append(f"L decomposition k={k}")
    verdict(13, not failures, "all properties hold on 10^4-point samples for k = 0.5, 1, 2, 7.3"
            if not failures else "failed: " + ", ".join(failures))


def test_criterion_14_renormalized_residual(desk, verdict):
    b, bp = renormalizer("T", 2.2)
    equilibrium = [State(desk, 0.01 * i, np.full(desk.shape, 1.1), desk.vzeros(), desk.vzeros())
                   for i in range(6)]
    eq = renorm_residual(equilibrium, b, bp)
    init = make_initial_data(desk, "mhd-pulse", amplitude=0.1)
    res = []
    for dt in (2e-3, 1e-3, 5e-4):
        traj = run(RunConfig(desk, FLUID, RegularizationParams(), dt=dt, t_end=0.04,
                             snapshot_every=1), init)
        res.append(renorm_residual(traj.snapshots, b, bp))
    ratios = [res[0] / res[1], res[1] / res[2]]
    ok = eq <= 1e-12 and all(1.6 <= q <= 2.4 for q in ratios)
    verdict(14, ok, f"equilibrium residual {eq:.1e} (limit 1e-12); eps = 0 residual "
                    f"{res[0]:.2e} -> {res[1]:.2e} -> {res[2]:.2e}, ratios "
                    f"{ratios[0]:.3f}, {ratios[1]:.3f} (need 2 +- 20%)")
