"""Grids, field containers, radial/full conversion and analytic phantoms.

Axes come in two flavours.  Node axes (the ``x`` and ``u`` blocks) sample
``min + i*h``; centred axes (``z``, ``s`` and the ``y`` block of a full
field) sample ``min + (i + 1/2)*h`` so the ``z**(n-2)`` weight never hits
the coordinate singularity at zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from . import _kernels

logger = logging.getLogger(__name__)

SPHERE_AREA = {2: 2.0, 3: 2.0 * math.pi}
"""Area of the unit sphere in the fibre block, ``|S^{n-2}|``."""


class TruncationWarning(UserWarning):
    """Quadrature reached past the sampled window; out-of-grid reads are 0."""


class SymmetryError(ValueError):
    """Raised when a full field is not radial in its second block."""


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Axis:
    min: float
    max: float
    count: int
    centered: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError("axis bounds must be finite")
        if self.max <= self.min:
            raise ValueError(f"axis max {self.max} must exceed min {self.min}")
        if self.count < 4 or self.count % 2:
            raise ValueError(f"axis count must be even and >= 4, got {self.count}")

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / self.count

    @property
    def origin(self) -> float:
        """Coordinate of the first sample."""
        return self.min + (0.5 * self.spacing if self.centered else 0.0)

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = self.origin + self.spacing * np.arange(self.count)
        nodes.setflags(write=False)
        return nodes

    @property
    def frequencies(self) -> np.ndarray:
        """Dual grid ``2*pi*k/(N*h)`` for ``k`` in ``[-N/2, N/2)``."""
        k = np.arange(-self.count // 2, self.count // 2)
        return 2.0 * np.pi * k / (self.count * self.spacing)

    def extended(self, factor: int) -> "Axis":
        """Same spacing, ``factor`` times the length, same centre."""
        if factor == 1:
            return self
        half = 0.5 * (self.max - self.min) * factor
        mid = 0.5 * (self.max + self.min)
        return Axis(mid - half, mid + half, self.count * factor, self.centered)


@dataclass(frozen=True)
class GridSpec:
    axes: tuple[Axis, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(a.spacing for a in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def nodes(self, i: int) -> np.ndarray:
        return self.axes[i].nodes

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[a.nodes for a in self.axes], indexing="ij", sparse=True)

    def __add__(self, other: "GridSpec") -> "GridSpec":
        return GridSpec(self.axes + other.axes)


def symmetric_axis(extent: float, count: int) -> Axis:
    """Node axis ``[-extent, extent)``; contains 0 exactly."""
    return Axis(-extent, extent, count)


def half_axis(top: float, count: int) -> Axis:
    """Cell-centred axis on ``[0, top]``."""
    return Axis(0.0, top, count, centered=True)


def half_line_weights(axis: Axis, n: int) -> np.ndarray:
    """Midpoint weights for ``integral_0^inf g(z) z^{n-2} dz`` on a centred half axis.

    The integrands met here extend evenly to ``z < 0``.  For n = 2 the
    midpoint rule then has no endpoint error; for n = 3 the odd integrand
    ``z g(z)`` leaves an ``h^2 g(0)/24`` endpoint term, removed by giving the
    first node ``11 h^2/24`` instead of ``h^2/2``.
    """
    z = axis.nodes
    w = z ** (n - 2) * axis.spacing
    if n == 3 and axis.centered and axis.min == 0:
        w = w.copy()
        w[0] = 11.0 * axis.spacing ** 2 / 24.0
    return w


def radial_grids(n: int, x_extent: float = 8.0, nx: int = 128,
                 z_max: float | None = None, nz: int | None = None
                 ) -> tuple[GridSpec, GridSpec]:
    """The (x, z) grids of a radial field.  By default z has the x spacing."""
    _check_dim(n)
    z_max = x_extent if z_max is None else z_max
    if nz is None:
        nz = int(round(z_max * nx / (2 * x_extent)))
        nz = max(4, nz + nz % 2)
    x_grid = GridSpec((symmetric_axis(x_extent, nx),) * (n - 1))
    return x_grid, GridSpec((half_axis(z_max, nz),))


def _check_dim(n: int) -> None:
    if n not in (2, 3):
        raise ValueError(f"dimension n must be 2 or 3, got {n}")


# --------------------------------------------------------------------------
# containers


def _frozen(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != tuple(shape):
        raise ValueError(f"values have shape {arr.shape}, grid expects {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class _HalfSpaceField:
    """Shared layout of radial fields and cone data: an (n-1)-block and a half line."""

    n: int
    base: GridSpec
    half: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_dim(self.n)
        if self.base.ndim != self.n - 1 or self.half.ndim != 1:
            raise ValueError("grid blocks do not match the dimension")
        ax = self.half.axes[0]
        if ax.min != 0.0 or not ax.centered:
            raise ValueError("half-line axis must be cell-centred with min = 0")
        if any(a.centered for a in self.base.axes):
            raise ValueError("first block axes must be node axes")
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape))

    @property
    def grid(self) -> GridSpec:
        return self.base + self.half

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights of the ``|S^{n-2}| z^{n-2} dz dx`` measure."""
        w = SPHERE_AREA[self.n] * half_line_weights(self.half.axes[0], self.n)
        return np.broadcast_to(w * self.base.cell_volume, self.grid.shape)

    def integral(self) -> float:
        """Integral of the full-space function this field represents."""
        return float(np.sum(self.values * self.weights))

    def inner(self, other: "_HalfSpaceField") -> float:
        return float(np.sum(self.values * other.values * self.weights))

    def norm(self) -> float:
        return math.sqrt(self.inner(self))

    def peak(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def with_values(self, values):
        return type(self)(self.n, self.base, self.half, values)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


class RadialField(_HalfSpaceField):
    """Samples of ``f(x, z)`` with ``f(x, y) = f(x, |y|)``."""

    @property
    def x_grid(self) -> GridSpec:
        return self.base

    @property
    def z_grid(self) -> GridSpec:
        return self.half


class ConeData(_HalfSpaceField):
    """Samples of the cone transform on a (u, s) grid."""

    @property
    def u_grid(self) -> GridSpec:
        return self.base

    @property
    def s_grid(self) -> GridSpec:
        return self.half


@dataclass(frozen=True, eq=False)
class FullField:
    """Samples of ``f(x, y)`` on ``R^{n-1} x R^{n-1}``; the y block is cell-centred."""

    n: int
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_dim(self.n)
        if self.grid.ndim != 2 * (self.n - 1):
            raise ValueError("full field needs 2(n-1) axes")
        for a in self.grid.axes[self.n - 1:]:
            if not a.centered or not math.isclose(a.min, -a.max):
                raise ValueError("y axes must be symmetric and cell-centred")
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values) -> "FullField":
        return FullField(self.n, self.grid, values)


def zeros_like(f):
    return f.with_values(np.zeros(f.grid.shape))


# --------------------------------------------------------------------------
# interpolation


def interp_grid(values: np.ndarray, grid: GridSpec, points: np.ndarray,
                mirror_last: bool = False) -> np.ndarray:
    """Multilinear interpolation at ``points`` (shape ``(..., ndim)``).

    Nodes outside the grid count as zeros, so the result falls linearly to 0
    over one cell past the outermost node and is exactly 0 beyond.  With
    ``mirror_last`` the last axis is a half line extended evenly about 0.
    """
    pts = np.asarray(points, dtype=float)
    lead = pts.shape[:-1]
    pts = pts.reshape(-1, grid.ndim)
    out = np.zeros(pts.shape[0])
    idx, wts = [], []
    for d, ax in enumerate(grid.axes):
        c = pts[:, d]
        if mirror_last and d == grid.ndim - 1:
            c = np.abs(c)
        t = (c - ax.origin) / ax.spacing
        if mirror_last and d == grid.ndim - 1:
            t = np.maximum(t, 0.0)
        i0 = np.floor(t).astype(np.int64)
        idx.append(i0)
        wts.append(t - i0)
    for corner in range(1 << grid.ndim):
        w = np.ones(pts.shape[0])
        flat = np.zeros(pts.shape[0], dtype=np.int64)
        ok = np.ones(pts.shape[0], dtype=bool)
        for d, ax in enumerate(grid.axes):
            bit = (corner >> d) & 1
            i = idx[d] + bit
            w = w * (wts[d] if bit else 1.0 - wts[d])
            ok &= (i >= 0) & (i < ax.count)
            flat = flat * ax.count + np.clip(i, 0, ax.count - 1)
        out += np.where(ok, w * values.ravel()[flat], 0.0)
    return out.reshape(lead)


def interpolate(f, point) -> float | np.ndarray:
    """Multilinear value of a field at ``point``; 0 outside the grid."""
    pts = np.asarray(point, dtype=float)
    mirror = isinstance(f, _HalfSpaceField)
    res = interp_grid(f.values, f.grid, pts, mirror_last=mirror)
    return float(res) if pts.ndim == 1 else res


# --------------------------------------------------------------------------
# radial <-> full conversion


def _y_radial_kernel(d: int, r: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Average of ``exp(i eta.y)`` over the sphere ``|y| = r`` in ``R^d``."""
    arg = np.multiply.outer(eta, r)
    return np.cos(arg) if d == 1 else _kernels.bessel_j_array(0.0, arg)


def radialize(f: FullField, z_grid: GridSpec | None = None,
              tol: float = 1e-6) -> RadialField:
    """Spherical average in y of a full field, sampled on ``z_grid``.

    The average is taken of the trigonometric interpolant of the y block,
    which is exact at matched nodes and spectrally accurate elsewhere.  The
    input is rejected when averaging changes it by more than ``tol * peak``.
    """
    n = f.n
    d = n - 1
    ybox = GridSpec(f.grid.axes[d:])
    if z_grid is None:
        ay = ybox.axes[0]
        z_grid = GridSpec((half_axis(ay.max, ay.count // 2),))
    z = z_grid.nodes(0)
    vals = f.values.reshape(int(np.prod(f.grid.shape[:d])), -1)
    profile = _spherical_mean(vals, ybox, z)
    out = RadialField(n, GridSpec(f.grid.axes[:d]), z_grid, profile.reshape(f.grid.shape[:d] + (len(z),)))
    if tol is not None and f.peak() > 0:
        resid = f.values - unradialize(out, ybox).values
        worst = np.unravel_index(np.argmax(np.abs(resid)), resid.shape)
        bad = abs(resid[worst])
        if bad > tol * f.peak():
            coords = tuple(float(f.grid.nodes(i)[j]) for i, j in enumerate(worst))
            raise SymmetryError(
                f"field is not radial in y: residual {bad:.3e} (peak {f.peak():.3e}) "
                f"at index {tuple(int(j) for j in worst)}, coordinates {coords}")
    return out


def _spherical_mean(vals: np.ndarray, ybox: GridSpec, r: np.ndarray) -> np.ndarray:
    d = ybox.ndim
    axes = tuple(range(1, d + 1))
    shaped = vals.reshape((vals.shape[0],) + ybox.shape)
    coef = sfft.fftn(shaped, axes=axes)
    # phase of the first node so the series is centred on y = 0
    freqs = [2 * np.pi * sfft.fftfreq(a.count, a.spacing) for a in ybox.axes]
    phase = np.ones(ybox.shape, dtype=complex)
    for i, (a, k) in enumerate(zip(ybox.axes, freqs)):
        shp = [1] * d
        shp[i] = -1
        phase = phase * np.exp(-1j * k * a.origin).reshape(shp)
        # drop the unpaired Nyquist bin; it has no real symmetric partner
        nyq = [slice(None)] * d
        nyq[i] = a.count // 2
        phase[tuple(nyq)] = 0.0
    coef = coef * phase / np.prod(ybox.shape)
    eta = np.sqrt(sum(np.meshgrid(*[k ** 2 for k in freqs], indexing="ij"))).ravel()
    coef = coef.reshape(vals.shape[0], -1)
    # group frequencies by |eta| to keep the kernel small
    uniq, inv = np.unique(np.round(eta, 12), return_inverse=True)
    summed = np.zeros((vals.shape[0], len(uniq)), dtype=complex)
    np.add.at(summed.T, inv, coef.T)
    kern = _y_radial_kernel(d, r, uniq)
    return (summed @ kern).real


def unradialize(f: RadialField, y_grid: GridSpec | None = None) -> FullField:
    """Full field ``f(x, |y|)`` on a symmetric cell-centred y block.

    The profile is evaluated with the cosine (even) interpolant of the
    z samples.  The default y block has the z spacing, so ``|y|`` lands on
    z nodes when n = 2.
    """
    n = f.n
    d = n - 1
    az = f.z_grid.axes[0]
    if y_grid is None:
        y_grid = GridSpec((Axis(-az.max, az.max, 2 * az.count, centered=True),) * d)
    ymesh = np.meshgrid(*[a.nodes for a in y_grid.axes], indexing="ij")
    radius = np.sqrt(sum(m ** 2 for m in ymesh))
    uniq, inv = np.unique(np.round(radius.ravel(), 12), return_inverse=True)
    prof = f.values.reshape(-1, az.count)
    at = _even_profile(prof, az, uniq)
    vals = at[:, inv].reshape(f.grid.shape[:d] + y_grid.shape)
    return FullField(n, f.x_grid + y_grid, vals)


def _even_profile(prof: np.ndarray, az: Axis, r: np.ndarray) -> np.ndarray:
    """Evaluate the DCT-II interpolant of cell-centred samples at radii ``r``."""
    N = az.count
    c = sfft.dct(prof, type=2, axis=-1) / N
    c[:, 0] *= 0.5
    k = np.arange(N)
    basis = np.cos(np.pi * np.outer(k, r) / az.max)
    out = c @ basis
    out[:, r >= az.max] = 0.0
    return out


# --------------------------------------------------------------------------
# phantoms


@dataclass(frozen=True)
class GaussianBlob:
    """``amplitude * exp(-(|x - center|^2 + z^2) / (2 width^2))``."""

    center: tuple[float, ...]
    width: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def __call__(self, x: Sequence[np.ndarray], z: np.ndarray) -> np.ndarray:
        r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, self.center)) + z ** 2
        return self.amplitude * np.exp(-r2 / (2 * self.width ** 2))

    def mass(self, n: int) -> float:
        return self.amplitude * (2 * np.pi * self.width ** 2) ** (n - 1)

    def cone(self, u: Sequence[np.ndarray], s: np.ndarray) -> np.ndarray:
        """Closed-form cone transform; dimension follows ``len(center)``."""
        d = len(self.center)
        q = 1.0 + np.asarray(s) ** 2
        r2 = sum((ui - ci) ** 2 for ui, ci in zip(u, self.center))
        return (self.amplitude * (2 * np.pi * self.width ** 2 / q) ** (d / 2)
                * np.exp(-r2 / (2 * self.width ** 2 * q)))

    def fourier(self, xi: Sequence[np.ndarray], eta_abs: np.ndarray) -> np.ndarray:
        d = len(self.center)
        w2 = self.width ** 2
        k2 = sum(k ** 2 for k in xi) + np.asarray(eta_abs) ** 2
        phase = np.exp(-1j * sum(k * c for k, c in zip(xi, self.center)))
        return self.amplitude * (2 * np.pi * w2) ** d * np.exp(-w2 * k2 / 2) * phase


def _default_grids(n, x_grid, z_grid):
    if x_grid is None or z_grid is None:
        xg, zg = radial_grids(n)
        x_grid = xg if x_grid is None else x_grid
        z_grid = zg if z_grid is None else z_grid
    return x_grid, z_grid


def _inside(x_grid: GridSpec, c: Sequence[float]) -> bool:
    return all(a.min <= ci < a.max for a, ci in zip(x_grid.axes, c))


def gaussian_mixture_phantom(n: int, blobs: Sequence[GaussianBlob], *,
                             x_grid: GridSpec | None = None,
                             z_grid: GridSpec | None = None) -> RadialField:
    _check_dim(n)
    x_grid, z_grid = _default_grids(n, x_grid, z_grid)
    mesh = (x_grid + z_grid).mesh()
    vals = np.zeros((x_grid + z_grid).shape)
    for b in blobs:
        if len(b.center) != n - 1:
            raise ValueError("blob centre must have n-1 coordinates")
        if not _inside(x_grid, b.center):
            raise ValueError(f"centre {b.center} lies outside the grid")
        vals = vals + b(mesh[:-1], mesh[-1])
    return RadialField(n, x_grid, z_grid, vals)


def make_gaussian_phantom(n: int, center_x: Sequence[float] | None = None,
                          width: float = 1.0, *, amplitude: float = 1.0,
                          x_grid: GridSpec | None = None,
                          z_grid: GridSpec | None = None) -> RadialField:
    """Radial Gaussian ``exp(-(|x - c|^2 + z^2) / (2 width^2))``."""
    _check_dim(n)
    c = (0.0,) * (n - 1) if center_x is None else tuple(np.atleast_1d(center_x))
    blob = GaussianBlob(c, width, amplitude)
    return gaussian_mixture_phantom(n, [blob], x_grid=x_grid, z_grid=z_grid)


def smooth_step(r: np.ndarray, radius: float, smoothing: float) -> np.ndarray:
    """Indicator of ``r <= radius`` blurred by a compact quintic ramp.

    Equals 1/2 at ``radius`` and is exactly 0 beyond ``radius + 3 smoothing``.
    """
    if smoothing == 0:
        return (r <= radius).astype(float)
    t = np.clip((r - radius) / (3 * smoothing), -1.0, 1.0)
    p = 0.5 * (t + 1.0)
    return 1.0 - p ** 3 * (10 - 15 * p + 6 * p ** 2)


def make_ball_phantom(n: int, radius: float = 1.0, smoothing: float = 0.0, *,
                      center_x: Sequence[float] | None = None,
                      x_grid: GridSpec | None = None,
                      z_grid: GridSpec | None = None) -> RadialField:
    """Smoothed indicator of ``|x - c|^2 + z^2 <= radius^2``."""
    _check_dim(n)
    if not radius > 0:
        raise ValueError("radius must be positive")
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    x_grid, z_grid = _default_grids(n, x_grid, z_grid)
    c = np.zeros(n - 1) if center_x is None else np.atleast_1d(np.asarray(center_x, float))
    reach = radius + 3 * smoothing
    room = min([min(ci - a.min, a.max - a.spacing - ci) for a, ci in zip(x_grid.axes, c)]
               + [z_grid.axes[0].max])
    if reach > room:
        raise ValueError(f"radius exceeds grid: support reaches {reach:g}, room is {room:g}")
    mesh = (x_grid + z_grid).mesh()
    r = np.sqrt(sum((m - ci) ** 2 for m, ci in zip(mesh[:-1], c)) + mesh[-1] ** 2)
    return RadialField(n, x_grid, z_grid, smooth_step(r, radius, smoothing))


def boundary_ratio(f) -> float:
    """Largest |value| on the outer ring of the grid relative to the peak.

    The half-line axis only counts its far end.
    """
    peak = f.peak()
    if peak == 0:
        return 0.0
    v = np.abs(f.values)
    edge = 0.0
    half = isinstance(f, _HalfSpaceField)
    nd = v.ndim
    for d in range(nd):
        sl = [slice(None)] * nd
        sl[d] = -1
        edge = max(edge, float(v[tuple(sl)].max()))
        if not (half and d == nd - 1):
            sl[d] = 0
            edge = max(edge, float(v[tuple(sl)].max()))
    return edge / peak


def ball_indicator_mass(n: int, radius: float) -> float:
    """Volume of the ball of ``radius`` in ``R^{2(n-1)}``."""
    d = 2 * (n - 1)
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius ** d


__all__ = [
    "Axis", "GridSpec", "RadialField", "FullField", "ConeData", "GaussianBlob",
    "TruncationWarning", "SymmetryError", "SPHERE_AREA",
    "symmetric_axis", "half_axis", "radial_grids", "interpolate", "interp_grid",
    "radialize", "unradialize", "make_gaussian_phantom", "make_ball_phantom",
    "gaussian_mixture_phantom", "smooth_step", "boundary_ratio", "zeros_like",
    "ball_indicator_mass",
]
