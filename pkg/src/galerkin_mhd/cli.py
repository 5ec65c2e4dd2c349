"""Command-line entry point: ``run``, ``ladder``, ``longtime`` and ``diagnose``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import analysis, io, longtime
from .fields import Grid, random_smooth
from .io import format_float, write_csv
from .scheme import ladder, run

LADDER_COLUMNS = ("eps", "delta", "artificial_pressure", "log_bound", "eps_gradient",
                  "initial_artificial_mass", "distance_rho", "distance_u", "distance_H")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_snapshots(out: Path, traj) -> None:
    cfg = traj.config
    for i, s in enumerate(traj.snapshots):
        io.write_snapshot(out / f"snap_{i:06d}.mhdf", s, cfg.fluid, cfg.reg)


def cmd_run(args) -> int:
    cfg = io.load_config(args.config)
    out = _prepare_out(args.out)
    (out / "config.ini").write_text(io.serialize_config(cfg))
    traj = run(cfg.run, cfg.init.build(cfg.run.grid))
    io.write_series(out / "series.csv", traj.series)
    _write_snapshots(out, traj)
    if not traj.ok:
        raise RuntimeError(traj.failure)
    return 0


def cmd_ladder(args) -> int:
    cfg = io.load_config(args.config)
    out = _prepare_out(args.out)
    (out / "config.ini").write_text(io.serialize_config(cfg))
    eps_list = args.eps_list or [cfg.run.reg.eps]
    delta_list = args.delta_list or [cfg.run.reg.delta]
    report = ladder(cfg.run, cfg.init.build(cfg.run.grid), eps_list, delta_list)
    header = LADDER_COLUMNS + analysis.TimeSeriesRow.columns()
    rows = []
    for e in report.entries:
        vals = [getattr(e, c) for c in LADDER_COLUMNS]
        vals = ["" if v is None else v for v in vals]
        rows.append(vals + list(e.trajectory.series[-1].values()))
    write_csv(out / "ladder.csv", header, rows)
    return 0


def cmd_longtime(args) -> int:
    cfg = io.load_config(args.config)
    out = _prepare_out(args.out)
    init = cfg.init.build(cfg.run.grid)
    rho_s = longtime.predict_stationary(init, cfg.run.grid).rho_s
    horizon = args.t_end or longtime.large_time_horizon(cfg.run.fluid, rho_s, cfg.run.grid)
    run_cfg = cfg.run.replace(t_end=horizon)
    (out / "config.ini").write_text(io.serialize_config(io.Config(run_cfg, cfg.init)))
    traj = run(run_cfg, init)
    rep = longtime.decay_report(traj.snapshots, run_cfg.fluid, run_cfg.reg, rho_s)
    write_csv(out / "decay.csv", ("t", "rho_dev_Lgamma", "u_L2", "H_L2", "E_total"),
              zip(rep.times, rep.rho_deviation, rep.u_L2, rep.H_L2, rep.energy))
    write_csv(out / "windows.csv", ("window_start", "dissipation"),
              zip(rep.window_starts, rep.window_dissipation))
    write_csv(out / "summary.csv", ("rho_s", "horizon", "energy_gap"),
              [(rep.rho_s, horizon, rep.energy_gap)])
    io.write_series(out / "series.csv", traj.series)
    if not traj.ok:
        raise RuntimeError(traj.failure)
    return 0


def _emit(header, rows) -> None:
    print(",".join(header))
    for row in rows:
        print(",".join(v if isinstance(v, str) else format_float(v) for v in row))


def cmd_diagnose(args) -> int:
    snaps = [io.read_snapshot(p) for p in args.snapshots]
    what = args.what
    if what == "bogovskii-selftest":
        grid = snaps[0].state.grid if snaps else Grid.box(32, 32, 1, mode="2.5d")
        rng = np.random.default_rng(args.seed)
        rows = []
        for i in range(args.samples):
            f = random_smooth(grid, rng, "cosine")
            f = f - f.mean()
            res = analysis.bogovskii(grid, f)
            rows.append((i, res.residual, res.bound_ratio))
        _emit(("sample", "residual", "bound_ratio"), rows)
        return 0
    if not snaps:
        raise ValueError(f"diagnose {what} needs at least one snapshot")
    if what == "energy":
        header = ("t",) + tuple(f.name for f in fields(analysis.EnergyBreakdown)) + ("E_total", "D_total")
        rows = []
        for s in snaps:
            e = analysis.energy(s.state, s.fluid, s.reg)
            rows.append((s.state.t,) + tuple(getattr(e, f) for f in header[1:-2])
                        + (e.total, e.dissipation))
        _emit(header, rows)
    elif what == "flux":
        k = args.k[0] if args.k else 2.0 * max(float(np.max(s.state.rho)) for s in snaps)
        rows = []
        for s in snaps:
            flux = analysis.effective_viscous_flux(s.state, s.fluid, s.reg)
            g = s.state.grid
            w = analysis.default_space_weight(g)
            rows.append((s.state.t, float(np.mean(flux)),
                         analysis.integrate(g, w * flux * analysis.cutoff_T(k, s.state.rho))))
        _emit(("t", "flux_mean", "weighted_flux_Tk"), rows)
        if len(snaps) > 1:
            total = analysis.flux_functional([s.state for s in snaps], snaps[0].fluid,
                                             snaps[0].reg, k)
            print(f"# space-time functional,{format_float(total)}")
    elif what == "oscillation":
        grid = snaps[0].state.grid
        ks = args.k or [1.0, 2.0, 4.0, 8.0]
        gamma = snaps[0].fluid.gamma
        rows = []
        for k in ks:
            d = analysis.oscillation_defect([[s.state.rho] for s in snaps], [0.0], grid, k, gamma)
            rows.extend((k, i, v) for i, v in enumerate(d))
        _emit(("k", "entry", "defect"), rows)
    elif what == "renorm":
        if len(snaps) < 2:
            raise ValueError("diagnose renorm needs at least two snapshots of one trajectory")
        k = args.k[0] if args.k else 2.0 * max(float(np.max(s.state.rho)) for s in snaps)
        b, bp = analysis.renormalizer(args.b, k)
        r = analysis.renorm_residual([s.state for s in snaps], b, bp)
        _emit(("b", "k", "residual"), [(args.b, k, r)])
    return 0


class _Parser(argparse.ArgumentParser):
    """Usage errors also come out as a single ``error:`` line."""

    def error(self, message):
        self.exit(2, f"error: UsageError: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="galerkin-mhd",
                                description="Regularized compressible MHD in a box.")
    sub = p.add_subparsers(dest="command", required=True)

    for name, helptext in (("run", "integrate one configuration"),
                           ("ladder", "sweep artificial viscosity and pressure"),
                           ("longtime", "integrate to the large-time horizon")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--out", required=True, help="output directory")
        if name == "ladder":
            sp.add_argument("--eps-list", type=_float_list, default=None)
            sp.add_argument("--delta-list", type=_float_list, default=None)
        if name == "longtime":
            sp.add_argument("--t-end", type=float, default=None,
                            help="override the computed horizon")

    dp = sub.add_parser("diagnose", help="evaluate diagnostics on snapshots")
    dp.add_argument("snapshots", nargs="*")
    dp.add_argument("--what", required=True,
                    choices=("energy", "flux", "oscillation", "renorm", "bogovskii-selftest"))
    dp.add_argument("--k", type=_float_list, default=None, help="cut level(s)")
    dp.add_argument("--b", choices=("T", "L", "log"), default="T")
    dp.add_argument("--samples", type=int, default=20)
    dp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "ladder": cmd_ladder, "longtime": cmd_longtime,
               "diagnose": cmd_diagnose}[args.command]
    try:
        return handler(args)
    except Exception as exc:  # one machine-readable line, nonzero exit
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
