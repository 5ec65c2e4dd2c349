"""Box grid, sine/cosine collocation transforms and spectral operators.

Fields are plain numpy arrays sampled at cell centres ``x_j = (j + 1/2) L / n``:
a scalar field has shape ``grid.shape`` and a vector field has shape
``(3,) + grid.shape``.  Each axis of a field is interpreted either in the
sine basis ``sin(k pi x / L), k = 1..n`` (zero trace, used for velocity and
magnetic components) or in the cosine basis ``cos(k pi x / L), k = 0..n-1``
(zero flux, used for density).  Differentiating along an axis swaps the two.

The transforms are the orthonormal DST-II / DCT-II pair, so the collocation
inner product (midpoint rule) is preserved exactly and the discrete
derivative along an axis in one basis is minus the transpose of the
derivative in the other basis.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

SINE = "S"
COSINE = "C"

_BASIS_ALIASES = {
    "s": SINE,
    "sine": SINE,
    "dirichlet": SINE,
    "c": COSINE,
    "cosine": COSINE,
    "neumann": COSINE,
}


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("MHD_THREADS", "0")) or os.cpu_count() or 1)
    except ValueError:
        return os.cpu_count() or 1


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred discretization of the box ``[0, Lx] x [0, Ly] x [0, Lz]``.

    In ``"2.5d"`` mode the z axis carries a single point and every field is
    z-invariant; all three vector components are still evolved.
    """

    n: tuple[int, int, int]
    length: tuple[float, float, float] = (1.0, 1.0, 1.0)
    mode: str = "3d"

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        length = tuple(float(v) for v in self.length)
        if len(n) != 3 or len(length) != 3:
            raise ValueError("grid needs three axis sizes and three lengths")
        if self.mode not in ("3d", "2.5d"):
            raise ValueError(f"unknown grid mode {self.mode!r} (expected '3d' or '2.5d')")
        if self.mode == "2.5d" and n[2] != 1:
            raise ValueError("z-invariant grids must have n_z = 1")
        for axis in self.active_axes_for(self.mode):
            if n[axis] < 8:
                raise ValueError(f"n[{axis}] = {n[axis]} < 8")
        if any(not np.isfinite(L) or L <= 0 for L in length):
            raise ValueError("box lengths must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)

    @staticmethod
    def active_axes_for(mode: str) -> tuple[int, ...]:
        return (0, 1) if mode == "2.5d" else (0, 1, 2)

    @classmethod
    def box(cls, nx: int, ny: int | None = None, nz: int | None = None,
            length=(1.0, 1.0, 1.0), mode: str = "2.5d") -> "Grid":
        ny = nx if ny is None else ny
        if mode == "2.5d":
            nz = 1
        elif nz is None:
            nz = nx
        return cls((nx, ny, nz), tuple(length), mode)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    @property
    def vshape(self) -> tuple[int, int, int, int]:
        return (3,) + self.n

    @property
    def active_axes(self) -> tuple[int, ...]:
        return self.active_axes_for(self.mode)

    @property
    def cell_volume(self) -> float:
        return float(np.prod([L / n for L, n in zip(self.length, self.n)]))

    @property
    def volume(self) -> float:
        return float(np.prod(self.length))

    def axis_points(self, axis: int) -> np.ndarray:
        n, L = self.n[axis], self.length[axis]
        return (np.arange(n) + 0.5) * L / n

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays (X, Y, Z) of the collocation points."""
        return tuple(np.meshgrid(*(self.axis_points(a) for a in range(3)), indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def vzeros(self) -> np.ndarray:
        return np.zeros(self.vshape)

    def check_scalar(self, f, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ValueError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def check_vector(self, v, name: str = "field") -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != self.vshape:
            raise ValueError(f"{name} has shape {v.shape}, grid expects {self.vshape}")
        return v


def require_finite(f: np.ndarray, name: str = "field") -> None:
    """Raise ``ValueError`` naming the first non-finite entry of ``f``."""
    bad = ~np.isfinite(f)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"{name} has a non-finite value {f[idx]!r} at index {idx}")


def _basis_tuple(basis, ndim: int = 3) -> tuple[str, ...]:
    if isinstance(basis, str):
        tag = _BASIS_ALIASES.get(basis.lower(), basis)
        if tag not in (SINE, COSINE):
            raise ValueError(f"unknown basis {basis!r}")
        return (tag,) * ndim
    tags = tuple(_BASIS_ALIASES.get(str(b).lower(), b) for b in basis)
    if len(tags) != ndim or any(t not in (SINE, COSINE) for t in tags):
        raise ValueError(f"bad basis specification {basis!r}")
    return tags


def flip(tag: str) -> str:
    return COSINE if tag == SINE else SINE


def product_tag(a: str, b: str) -> str:
    """Parity of a pointwise product: odd*odd and even*even are even."""
    return COSINE if a == b else SINE


def product_tags(a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
    return tuple(product_tag(x, y) for x, y in zip(a, b))


# --- one-dimensional transforms along an axis --------------------------------------

def _fwd(f: np.ndarray, axis: int, tag: str) -> np.ndarray:
    if tag == SINE:
        return sfft.dst(f, type=2, axis=axis, norm="ortho", workers=_workers())
    return sfft.dct(f, type=2, axis=axis, norm="ortho", workers=_workers())


def _inv(c: np.ndarray, axis: int, tag: str) -> np.ndarray:
    if tag == SINE:
        return sfft.idst(c, type=2, axis=axis, norm="ortho", workers=_workers())
    return sfft.idct(c, type=2, axis=axis, norm="ortho", workers=_workers())


def _shape_along(axis: int, n: int) -> tuple[int, ...]:
    s = [1, 1, 1]
    s[axis] = n
    return tuple(s)


@functools.lru_cache(maxsize=None)
def wavenumbers(grid: Grid, axis: int, tag: str) -> np.ndarray:
    """Angular wavenumbers ``k pi / L`` of the coefficient slots along ``axis``."""
    n, L = grid.n[axis], grid.length[axis]
    k = np.arange(1, n + 1) if tag == SINE else np.arange(n)
    if n == 1:
        k = np.zeros(1)
    return (k * np.pi / L).reshape(_shape_along(axis, n))


@functools.lru_cache(maxsize=None)
def laplacian_symbol(grid: Grid, tags: tuple[str, ...]) -> np.ndarray:
    """``-|k|^2`` on the coefficient array of a field with per-axis ``tags``."""
    sym = np.zeros(grid.shape)
    for axis in grid.active_axes:
        sym = sym - wavenumbers(grid, axis, tags[axis]) ** 2
    return sym


@functools.lru_cache(maxsize=None)
def _keep_mask(grid: Grid, cutoff: tuple[int, ...]) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for axis in grid.active_axes:
        idx = np.arange(grid.n[axis]).reshape(_shape_along(axis, grid.n[axis]))
        mask = mask & (idx < cutoff[axis])
    return mask


def dealias_cutoff(grid: Grid) -> tuple[int, ...]:
    """Number of retained coefficient slots per axis (top third zeroed)."""
    return tuple(n - n // 3 if n > 1 else 1 for n in grid.n)


# --- full transforms ---------------------------------------------------------------

@dataclass(frozen=True)
class SpectralCoeffs:
    """Coefficients of a scalar field in a per-axis sine/cosine basis.

    Slot ``j`` along a sine axis holds mode ``k = j + 1``; along a cosine axis
    it holds mode ``k = j``.
    """

    grid: Grid
    basis: tuple[str, str, str]
    coeffs: np.ndarray


def forward(grid: Grid, f: np.ndarray, tags: Sequence[str]) -> np.ndarray:
    c = f
    for axis in grid.active_axes:
        c = _fwd(c, axis, tags[axis])
    return c


def inverse(grid: Grid, c: np.ndarray, tags: Sequence[str]) -> np.ndarray:
    f = c
    for axis in grid.active_axes:
        f = _inv(f, axis, tags[axis])
    return f


def to_spectral(grid: Grid, f, basis="sine") -> SpectralCoeffs:
    f = grid.check_scalar(f)
    require_finite(f)
    tags = _basis_tuple(basis)
    return SpectralCoeffs(grid, tags, forward(grid, f, tags))


def from_spectral(coeffs: SpectralCoeffs) -> np.ndarray:
    return inverse(coeffs.grid, coeffs.coeffs, coeffs.basis)


def dealias(grid: Grid, f: np.ndarray, tags: Sequence[str]) -> np.ndarray:
    """Zero the top third of the modes of ``f`` in its own basis."""
    c = forward(grid, f, tags)
    c = np.where(_keep_mask(grid, dealias_cutoff(grid)), c, 0.0)
    return inverse(grid, c, tags)


def truncate(grid: Grid, f: np.ndarray, tags: Sequence[str], n_modes: int) -> np.ndarray:
    """Keep only the lowest ``n_modes`` coefficient slots per axis."""
    cutoff = tuple(min(n_modes, n) if n > 1 else 1 for n in grid.n)
    c = forward(grid, f, tags)
    c = np.where(_keep_mask(grid, cutoff), c, 0.0)
    return inverse(grid, c, tags)


# --- derivatives --------------------------------------------------------------------

def deriv(grid: Grid, f: np.ndarray, axis: int, tag: str) -> np.ndarray:
    """Spectral derivative along ``axis`` of a field that is ``tag`` along that axis.

    The result lives in the flipped basis along ``axis``.  Sine mode ``n``
    (the sawtooth) has zero derivative at the collocation points and is dropped.
    """
    n = grid.n[axis]
    if n == 1:
        return np.zeros_like(f)
    c = _fwd(f, axis, tag)
    kpi = np.arange(1, n) * np.pi / grid.length[axis]
    kpi = kpi.reshape(_shape_along(axis, n - 1))
    out = np.zeros_like(c)
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    if tag == SINE:
        # d/dx sin(k x) = k cos(k x): sine slot k-1 -> cosine slot k
        lo[axis] = slice(1, n)
        hi[axis] = slice(0, n - 1)
        out[tuple(lo)] = kpi * c[tuple(hi)]
    else:
        # d/dx cos(k x) = -k sin(k x): cosine slot k -> sine slot k-1
        lo[axis] = slice(0, n - 1)
        hi[axis] = slice(1, n)
        out[tuple(lo)] = -kpi * c[tuple(hi)]
    return _inv(out, axis, flip(tag))


def _vector_tags(basis) -> tuple[tuple[str, ...], ...]:
    if isinstance(basis, str):
        t = _basis_tuple(basis)
        return (t, t, t)
    tags = tuple(_basis_tuple(b) for b in basis)
    if len(tags) != 3:
        raise ValueError("vector basis needs one entry per component")
    return tags


def gradient_basis(basis="cosine") -> tuple[tuple[str, ...], ...]:
    """Per-component bases of ``gradient(f)`` for a scalar in ``basis``."""
    t = _basis_tuple(basis)
    out = []
    for i in range(3):
        c = list(t)
        c[i] = flip(t[i])
        out.append(tuple(c))
    return tuple(out)


def gradient(grid: Grid, f, basis="cosine") -> np.ndarray:
    f = grid.check_scalar(f)
    require_finite(f)
    tags = _basis_tuple(basis)
    return np.stack([deriv(grid, f, a, tags[a]) for a in range(3)])


def divergence(grid: Grid, v, basis="sine") -> np.ndarray:
    v = grid.check_vector(v)
    require_finite(v)
    tags = _vector_tags(basis)
    return sum(deriv(grid, v[a], a, tags[a][a]) for a in range(3))


def curl(grid: Grid, v, basis="sine") -> np.ndarray:
    v = grid.check_vector(v)
    require_finite(v)
    t = _vector_tags(basis)
    out = np.empty_like(v)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        out[i] = deriv(grid, v[k], j, t[k][j]) - deriv(grid, v[j], k, t[j][k])
    return out


def laplacian(grid: Grid, f, basis="cosine") -> np.ndarray:
    f = grid.check_scalar(f)
    require_finite(f)
    tags = _basis_tuple(basis)
    c = forward(grid, f, tags)
    return inverse(grid, laplacian_symbol(grid, tags) * c, tags)


def vector_laplacian(grid: Grid, v, basis="sine") -> np.ndarray:
    return np.stack([laplacian(grid, v[i], basis) for i in range(3)])


def solve_helmholtz(grid: Grid, f: np.ndarray, coef: float, tags: Sequence[str]) -> np.ndarray:
    """Solve ``(I - coef * Laplacian) g = f`` exactly in the basis ``tags``."""
    tags = tuple(tags)
    c = forward(grid, f, tags)
    return inverse(grid, c / (1.0 - coef * laplacian_symbol(grid, tags)), tags)


# --- solenoidal projection -----------------------------------------------------------

def project_solenoidal(grid: Grid, v) -> np.ndarray:
    """L2-orthogonal projection of a sine-basis vector field onto ker(divergence).

    The divergence ``D`` of sine fields satisfies ``D D^T = -Laplacian`` in the
    all-cosine basis, so ``v - D^T (D D^T)^+ D v`` is one diagonal solve.
    """
    v = grid.check_vector(v)
    require_finite(v)
    cos = (COSINE,) * 3
    d = divergence(grid, v)
    c = forward(grid, d, cos)
    sym = -laplacian_symbol(grid, cos)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(sym > 0, c / np.where(sym > 0, sym, 1.0), 0.0)
    p = inverse(grid, c, cos)
    # D^T p = -gradient(p) in the cosine basis
    return v + gradient(grid, p, "cosine")


# --- quadrature ----------------------------------------------------------------------

def integrate(grid: Grid, f) -> float:
    """Midpoint-rule integral over the box (sums over leading vector axes too)."""
    return float(np.sum(f) * grid.cell_volume)


def inner_product(grid: Grid, f, g) -> float:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.shape[-3:] != grid.shape:
        raise ValueError("inner_product needs two fields of the same shape on the grid")
    return float(np.sum(f * g) * grid.cell_volume)


def lp_norm(grid: Grid, f, p: float = 2.0) -> float:
    """L^p norm; vector fields use the pointwise Euclidean magnitude."""
    if p < 1:
        raise ValueError(f"p = {p} < 1 is not a norm")
    f = np.asarray(f, dtype=float)
    if f.shape == grid.vshape:
        f = np.sqrt(np.sum(f * f, axis=0))
    elif f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    if np.isinf(p):
        return float(np.max(np.abs(f)))
    return float((np.sum(np.abs(f) ** p) * grid.cell_volume) ** (1.0 / p))


def h1_seminorm_sq(grid: Grid, v) -> float:
    """``||grad v||^2`` of a sine-basis scalar or vector field via its spectrum."""
    v = np.asarray(v, dtype=float)
    comps = v if v.shape == grid.vshape else v[None]
    sine = (SINE,) * 3
    sym = -laplacian_symbol(grid, sine)
    total = 0.0
    for comp in comps:
        c = forward(grid, comp, sine)
        total += float(np.sum(sym * c * c))
    return total * grid.cell_volume


# --- test / preset field generators ----------------------------------------------------

def random_smooth(grid: Grid, rng: np.random.Generator, basis="sine",
                  n_low: int = 6, decay: float = 2.0) -> np.ndarray:
    """Band-limited random field with max |value| = 1 built from the lowest modes."""
    tags = _basis_tuple(basis)
    c = np.zeros(grid.shape)
    idx = tuple(slice(0, min(n_low, n)) for n in grid.n)
    shape = c[idx].shape
    k2 = np.zeros(shape)
    for axis in grid.active_axes:
        j = np.arange(shape[axis]).reshape(_shape_along(axis, shape[axis]))
        k2 = k2 + (j + (1 if tags[axis] == SINE else 0)) ** 2
    c[idx] = rng.standard_normal(shape) / (1.0 + k2) ** (decay / 2)
    f = inverse(grid, c, tags)
    return f / np.max(np.abs(f))


def random_solenoidal(grid: Grid, rng: np.random.Generator, width: float = 0.12,
                      jitter: float = 0.02) -> np.ndarray:
    """Random divergence-free field concentrated near the box centre.

    ``H = curl A`` with ``A`` a Gaussian of relative ``width`` times a random
    quadratic vector polynomial, followed by projection.  A solenoidal field
    with zero trace cannot be smooth under odd reflection unless it is flat
    at the walls, so the Gaussian keeps the wall values below roundoff and the
    sine representation spectrally accurate.
    """
    x = grid.coords()
    centre = [0.5 * L * (1 + jitter * rng.uniform(-1, 1)) for L in grid.length]
    scale = [width * L for L in grid.length]
    X = [(x[a] - centre[a]) / scale[a] if a in grid.active_axes else np.zeros_like(x[a])
         for a in range(3)]
    gauss = np.exp(-sum(Xa * Xa for Xa in X))
    A = grid.vzeros()
    for i in range(3):
        c = rng.standard_normal(10)
        poly = (c[0] + c[1] * X[0] + c[2] * X[1] + c[3] * X[2] + c[4] * X[0] * X[1]
                + c[5] * X[1] * X[2] + c[6] * X[0] * X[2]
                + c[7] * X[0] ** 2 + c[8] * X[1] ** 2 + c[9] * X[2] ** 2)
        A[i] = poly * gauss
    H = project_solenoidal(grid, curl(grid, A))
    return H / np.max(np.abs(H))
