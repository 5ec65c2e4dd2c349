"""Artificial pressure along a delta ladder.

With eps fixed, shrinking delta should drive the artificial pressure
integral to zero while the logarithmic bound stays put.
"""

from galerkin_mhd.fields import Grid
from galerkin_mhd.params import FluidParams, RegularizationParams
from galerkin_mhd.scheme import RunConfig, ladder, make_initial_data


def main() -> None:
    grid = Grid.box(32, 32, 1, mode="2.5d")
    cfg = RunConfig(grid, FluidParams(), RegularizationParams(eps=1e-2, delta=1e-1, beta=31),
                    dt=1e-3, t_end=0.05, snapshot_every=5)
    init = make_initial_data(grid, "mhd-pulse", amplitude=0.1)
    report = ladder(cfg, init, [1e-2], [1e-1, 1e-2, 1e-3])
    print(f"{'delta':>8} {'delta*rho^beta':>15} {'log bound':>12} {'dist rho':>10}")
    for e in report.entries:
        dist = "" if e.distance_rho is None else f"{e.distance_rho:.3e}"
        print(f"{e.delta:8.0e} {e.artificial_pressure:15.6e} {e.log_bound:12.6e} {dist:>10}")


if __name__ == "__main__":
    main()
