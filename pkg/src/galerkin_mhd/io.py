"""Configuration files, CSV series and binary snapshots.

Configuration is INI-style with sections ``[grid]``, ``[fluid]``,
``[regularization]``, ``[time]``, ``[init]`` and ``[output]``.  The parser is
hand-rolled so every error can name ``section.key`` and the line number.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import TimeSeriesRow
from .fields import Grid
from .params import FluidParams, InitialData, RegularizationParams, State
from .scheme import FIELD_SHAPES, PRESETS, RunConfig, make_initial_data


class ConfigError(ValueError):
    def __init__(self, message: str, section: str | None = None, key: str | None = None,
                 line: int | None = None):
        where = ".".join(p for p in (section, key) if p)
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{where + ': ' if where else ''}{message}")
        self.section, self.key, self.line = section, key, line


# key -> (kind, default); kind is float | int | str | 'int?' ; default None marks a required key
_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "grid": {"mode": ("str", "2.5d"), "nx": ("int", None), "ny": ("int", 0), "nz": ("int", 0),
             "lx": ("float", 1.0), "ly": ("float", 1.0), "lz": ("float", 1.0)},
    "fluid": {"a": ("float", 1.0), "gamma": ("float", 5.0 / 3.0), "mu": ("float", 0.1),
              "lambda": ("float", 0.0), "nu": ("float", 0.1)},
    "regularization": {"eps": ("float", 0.0), "delta": ("float", 0.0), "beta": ("float", 31.0),
                       "n_modes": ("int?", "none")},
    "time": {"dt": ("float", None), "t_end": ("float", None), "picard_tol": ("float", 1e-10),
             "picard_max": ("int", 25)},
    "init": {"preset": ("str", "equilibrium"), "amplitude": ("float", 0.1),
             "field_amplitude": ("float?", "none"), "velocity_amplitude": ("float", 0.0),
             "seed": ("int", 0), "mode": ("int", 1), "rho_bar": ("float", 1.0),
             "field_shape": ("str", "loop")},
    "output": {"series_every": ("int", 1), "snapshot_every": ("int", 100)},
}


@dataclass(frozen=True)
class InitSpec:
    preset: str = "equilibrium"
    amplitude: float = 0.1
    field_amplitude: float | None = None
    velocity_amplitude: float = 0.0
    seed: int = 0
    mode: int = 1
    rho_bar: float = 1.0
    field_shape: str = "loop"

    def build(self, grid: Grid) -> InitialData:
        return make_initial_data(grid, self.preset, self.amplitude, self.field_amplitude,
                                 self.velocity_amplitude, self.seed, self.mode, self.rho_bar,
                                 self.field_shape)


@dataclass(frozen=True)
class Config:
    run: RunConfig
    init: InitSpec = field(default_factory=InitSpec)


def _number(kind: str, text: str):
    if kind.endswith("?") and text.lower() == "none":
        return None
    base = kind.rstrip("?")
    if base == "str":
        return text
    if base == "int":
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"expected an integer, got {text!r}") from None
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"expected a number, got {text!r}") from None


def _tokenize(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    out: dict[str, dict[str, tuple[str, int]]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=lineno)
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            if section in out:
                raise ConfigError(f"duplicate section [{section}]", line=lineno)
            out[section] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", section, line=lineno)
        if section is None:
            raise ConfigError("key outside of any section", line=lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if key not in _SCHEMA[section]:
            raise ConfigError("unknown key", section, key, lineno)
        if key in out[section]:
            raise ConfigError("duplicate key", section, key, lineno)
        out[section][key] = (value, lineno)
    return out


def parse_config(text: str) -> Config:
    """Parse and fully validate a configuration."""
    tokens = _tokenize(text)
    vals: dict[str, dict[str, object]] = {}
    lines: dict[tuple[str, str], int | None] = {}
    for section, schema in _SCHEMA.items():
        vals[section] = {}
        given = tokens.get(section, {})
        for key, (kind, default) in schema.items():
            if key in given:
                text_value, lineno = given[key]
                lines[(section, key)] = lineno
                try:
                    vals[section][key] = _number(kind, text_value)
                except ValueError as exc:
                    raise ConfigError(str(exc), section, key, lineno) from None
            elif default is None:
                raise ConfigError("missing required key", section, key)
            else:
                lines[(section, key)] = None
                vals[section][key] = _number(kind, str(default)) if isinstance(default, str) \
                    and kind != "str" else default

    def guard(section, key, build):
        """Run ``build``; blame the key named first in the error message, else ``key``."""
        try:
            return build()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            first = str(exc).split()[0] if str(exc) else ""
            first = {"lam": "lambda"}.get(first, first)
            if first.startswith("2*"):
                first = "lambda"
            if first in _SCHEMA[section]:
                key = first
            raise ConfigError(str(exc), section, key, lines.get((section, key))) from None

    gv = vals["grid"]
    mode = str(gv["mode"]).lower()
    if mode not in ("3d", "2.5d"):
        raise ConfigError("mode must be '3d' or '2.5d'", "grid", "mode", lines[("grid", "mode")])
    nx = gv["nx"]
    ny = gv["ny"] or nx
    nz = gv["nz"] or (1 if mode == "2.5d" else nx)
    grid = guard("grid", "nx", lambda: Grid((nx, ny, nz), (gv["lx"], gv["ly"], gv["lz"]), mode))

    fv = vals["fluid"]
    fluid = guard("fluid", "gamma", lambda: FluidParams(
        fv["a"], fv["gamma"], fv["mu"], fv["lambda"], fv["nu"]))

    rv = vals["regularization"]
    reg = guard("regularization", "eps", lambda: RegularizationParams(
        rv["eps"], rv["delta"], rv["beta"], rv["n_modes"]))
    guard("regularization", "beta", lambda: reg.validate_against(fluid))

    tv, ov = vals["time"], vals["output"]
    run_cfg = guard("time", "dt", lambda: RunConfig(
        grid, fluid, reg, tv["dt"], tv["t_end"], tv["picard_tol"], tv["picard_max"],
        ov["series_every"], ov["snapshot_every"]))

    iv = vals["init"]
    if iv["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {iv['preset']!r}", "init", "preset",
                          lines[("init", "preset")])
    if iv["field_shape"] not in FIELD_SHAPES:
        raise ConfigError(f"unknown field shape {iv['field_shape']!r}", "init", "field_shape",
                          lines[("init", "field_shape")])
    init = InitSpec(iv["preset"], iv["amplitude"], iv["field_amplitude"],
                    iv["velocity_amplitude"], iv["seed"], iv["mode"], iv["rho_bar"],
                    iv["field_shape"])
    return Config(run_cfg, init)


def load_config(path) -> Config:
    return parse_config(Path(path).read_text())


def serialize_config(cfg: Config) -> str:
    """Inverse of ``parse_config``; floats use ``repr`` so values round-trip exactly."""
    r = cfg.run
    g = r.grid
    fmt = lambda v: "none" if v is None else repr(v)
    sections = {
        "grid": [("mode", g.mode), ("nx", g.n[0]), ("ny", g.n[1]), ("nz", g.n[2]),
                 ("lx", g.length[0]), ("ly", g.length[1]), ("lz", g.length[2])],
        "fluid": [("a", r.fluid.a), ("gamma", r.fluid.gamma), ("mu", r.fluid.mu),
                  ("lambda", r.fluid.lam), ("nu", r.fluid.nu)],
        "regularization": [("eps", r.reg.eps), ("delta", r.reg.delta), ("beta", r.reg.beta),
                           ("n_modes", r.reg.n_modes)],
        "time": [("dt", r.dt), ("t_end", r.t_end), ("picard_tol", r.picard_tol),
                 ("picard_max", r.picard_max)],
        "init": [(f.name, getattr(cfg.init, f.name)) for f in fields(InitSpec)],
        "output": [("series_every", r.series_every), ("snapshot_every", r.snapshot_every)],
    }
    out = []
    for name, items in sections.items():
        out.append(f"[{name}]")
        for key, value in items:
            out.append(f"{key} = {value if isinstance(value, str) else fmt(value)}")
        out.append("")
    return "\n".join(out)


# --- CSV -----------------------------------------------------------------------------------------

def format_float(v) -> str:
    return format(float(v), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_float(v) for v in row])


def write_series(path, rows: Iterable[TimeSeriesRow]) -> None:
    write_csv(path, TimeSeriesRow.columns(), (r.values() for r in rows))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    # blank cells (undefined entries) read back as NaN
    return rows[0], np.array([[float(v) if v else np.nan for v in r] for r in rows[1:]], dtype=float)


# --- binary snapshots ------------------------------------------------------------------------------

MAGIC = b"MHDF"
VERSION = 1
_HEADER = struct.Struct("<4sIB3I3dd8d")
_DIM_CODES = {"3d": 0, "2.5d": 1}


class SnapshotError(ValueError):
    pass


class BadMagicError(SnapshotError):
    pass


class UnsupportedVersionError(SnapshotError):
    pass


class TruncatedPayloadError(SnapshotError):
    def __init__(self, expected: int, found: int):
        super().__init__(f"truncated payload: expected {expected} bytes, found {found}")
        self.expected, self.found = expected, found


@dataclass(frozen=True)
class Snapshot:
    state: State
    fluid: FluidParams
    reg: RegularizationParams


def write_snapshot(path, state: State, fluid: FluidParams, reg: RegularizationParams) -> None:
    """Little-endian header followed by rho, u1..u3, H1..H3 with x varying fastest."""
    g = state.grid
    header = _HEADER.pack(MAGIC, VERSION, _DIM_CODES[g.mode], *g.n, *g.length, float(state.t),
                          fluid.a, fluid.gamma, fluid.mu, fluid.lam, fluid.nu,
                          reg.eps, reg.delta, reg.beta)
    fields_ = [state.rho, *state.u, *state.H]
    payload = b"".join(np.asarray(f, dtype="<f8").ravel(order="F").tobytes() for f in fields_)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_snapshot(path) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r} (expected {MAGIC!r})")
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(_HEADER.size, len(data))
    (_, version, dim, nx, ny, nz, lx, ly, lz, t,
     a, gamma, mu, lam, nu, eps, delta, beta) = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported snapshot version {version} (expected {VERSION})")
    modes = {v: k for k, v in _DIM_CODES.items()}
    if dim not in modes:
        raise SnapshotError(f"unknown dimension mode {dim}")
    grid = Grid((nx, ny, nz), (lx, ly, lz), modes[dim])
    count = nx * ny * nz
    expected = _HEADER.size + 7 * count * 8
    if len(data) < expected:
        raise TruncatedPayloadError(expected, len(data))
    if len(data) > expected:
        raise SnapshotError(f"unexpected trailing data: expected {expected} bytes, found {len(data)}")
    arr = np.frombuffer(data, dtype="<f8", count=7 * count, offset=_HEADER.size)
    comps = [arr[i * count:(i + 1) * count].reshape((nx, ny, nz), order="F").astype(float)
             for i in range(7)]
    state = State(grid, t, comps[0], np.stack(comps[1:4]), np.stack(comps[4:7]))
    fluid = FluidParams(a, gamma, mu, lam, nu)
    reg = RegularizationParams(eps, delta, beta)
    return Snapshot(state, fluid, reg)
