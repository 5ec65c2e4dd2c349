import numpy as np
import pytest

from galerkin_mhd.continuity import mass, step_density
from galerkin_mhd.fields import Grid, integrate, lp_norm, random_smooth


def _smooth_velocity(grid):
    x, y, _ = grid.coords()
    u = grid.vzeros()
    u[0] = 0.3 * np.sin(np.pi * x) * np.sin(2 * np.pi * y)
    u[1] = -0.2 * np.sin(2 * np.pi * x) * np.sin(np.pi * y)
    return u


class TestStepDensity:
    def test_cosine_mode_factor(self, grid2):
        x, _, _ = grid2.coords()
        rho = 1 + 0.1 * np.cos(np.pi * x) + 0 * grid2.zeros()
        new, rep = step_density(grid2, rho, grid2.vzeros(), eps=0.01, dt=0.1)
        factor = 1.0 / (1.0 + 0.001 * np.pi ** 2)
        assert np.max(np.abs(new - (1 + 0.1 * factor * np.cos(np.pi * x)))) < 1e-14
        assert rep.implicit_solve_residual < 1e-13

    def test_repeated_steps_geometric(self, grid2):
        x, y, _ = grid2.coords()
        rho = 2 + 0.1 * np.cos(2 * np.pi * x) * np.cos(np.pi * y)
        eps, dt, n = 0.05, 0.02, 7
        cur = rho
        for _ in range(n):
            cur, _ = step_density(grid2, cur, grid2.vzeros(), eps, dt)
        factor = (1 + eps * 5 * np.pi ** 2 * dt) ** (-n)
        expect = 2 + 0.1 * factor * np.cos(2 * np.pi * x) * np.cos(np.pi * y)
        assert np.max(np.abs(cur - expect)) < 1e-13

    def test_constant_is_steady(self, grid2):
        rho = np.full(grid2.shape, 1.7)
        new, rep = step_density(grid2, rho, grid2.vzeros(), eps=0.1, dt=0.5)
        assert np.max(np.abs(new - 1.7)) < 1e-14
        assert rep.mass_drift < 1e-15

    def test_identity_without_flow_or_diffusion(self, grid2, rng):
        rho = 1 + 0.2 * random_smooth(grid2, rng, "cosine")
        new, _ = step_density(grid2, rho, grid2.vzeros(), eps=0.0, dt=0.3)
        assert np.array_equal(new, rho)

    @pytest.mark.parametrize("eps", [0.0, 1e-2])
    def test_mass_conserved(self, grid3, rng, eps):
        rho = 1 + 0.3 * random_smooth(grid3, rng, "cosine")
        u = np.stack([random_smooth(grid3, rng, "sine") for _ in range(3)])
        new, rep = step_density(grid3, rho, u, eps, 0.05)
        assert rep.mass_drift <= 1e-12
        assert mass(grid3, new) == pytest.approx(mass(grid3, rho), rel=1e-13)

    def test_negative_density_flagged_not_clipped(self, grid2):
        x, y, _ = grid2.coords()
        rho = 0.01 + 0.0 * x
        u = _smooth_velocity(grid2) * 50
        new, rep = step_density(grid2, rho + 0 * y, u, 0.0, 0.5)
        assert rep.negative and rep.min_density == np.min(new) < 0

    @pytest.mark.parametrize("dt", [0.0, -1.0])
    def test_bad_dt(self, grid2, dt):
        with pytest.raises(ValueError):
            step_density(grid2, np.ones(grid2.shape), grid2.vzeros(), 0.1, dt)

    def test_first_order_in_time(self, grid2):
        x, y, _ = grid2.coords()
        rho0 = 1 + 0.2 * np.cos(np.pi * x) * np.cos(np.pi * y)
        u = _smooth_velocity(grid2)

        def evolve(dt, T=0.2):
            r = rho0
            for _ in range(int(round(T / dt))):
                r, _ = step_density(grid2, r, u, 0.01, dt)
            return r

        ref = evolve(0.2 / 2000)
        e1 = lp_norm(grid2, evolve(0.01) - ref)
        e2 = lp_norm(grid2, evolve(0.005) - ref)
        assert 1.6 <= e1 / e2 <= 2.4


class TestMass:
    def test_constant(self, grid2):
        assert mass(grid2, np.ones(grid2.shape)) == pytest.approx(1.0, rel=1e-15)

    def test_zero_mean_perturbation(self, grid2):
        x, _, _ = grid2.coords()
        assert mass(grid2, 1 + 0.1 * np.cos(np.pi * x) + grid2.zeros()) == pytest.approx(1.0, rel=1e-14)

    def test_refined_grid(self, rng):
        # random positive density from the cosine family, evaluated on both grids
        coef = rng.standard_normal((6, 6)) / (1 + np.add.outer(np.arange(6), np.arange(6))) ** 2

        def rho(g):
            x, y, _ = g.coords()
            f = sum(coef[i, j] * np.cos(i * np.pi * x) * np.cos(j * np.pi * y)
                    for i in range(6) for j in range(6))
            return 2.0 + f / np.sum(np.abs(coef))
        coarse, fine = Grid.box(64, 64, 1, mode="2.5d"), Grid.box(512, 512, 1, mode="2.5d")
        assert mass(coarse, rho(coarse)) == pytest.approx(mass(fine, rho(fine)), rel=1e-6)
