"""Energy budget of a short magnetized pulse.

Runs the desk configuration and prints how the initial energy splits into
what is left and what has been dissipated.  The sum never exceeds E(0).
"""

from pathlib import Path

from galerkin_mhd.io import load_config
from galerkin_mhd.scheme import run


def main() -> None:
    cfg = load_config(Path(__file__).with_name("desk.ini"))
    traj = run(cfg.run, cfg.init.build(cfg.run.grid))
    e0 = traj.series[0].E_total
    print(f"{'t':>6} {'E/E0':>12} {'dissipated/E0':>14} {'budget':>12} {'mass drift':>11}")
    for row, d in list(zip(traj.series, traj.dissipation))[::20]:
        print(f"{row.t:6.3f} {row.E_total / e0:12.9f} {d / e0:14.3e} "
              f"{(row.E_total + d) / e0:12.9f} {row.mass / traj.series[0].mass - 1:11.1e}")


if __name__ == "__main__":
    main()
