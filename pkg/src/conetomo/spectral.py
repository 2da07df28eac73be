"""DFT conventions, Riesz multipliers, Bessel/Hankel transforms, slice checks, band projector.

Convention: ``F f(xi) = integral f(x) exp(-i x.xi) dx`` approximated by
``h^d * sum f_j exp(-i x_j.xi)``, frequencies ``2*pi*k/(N*h)`` with
``k in [-N/2, N/2)`` in increasing order.  The inverse carries
``(2*pi)^-d``.  Multipliers that depend only on ``|xi|`` are applied with
plain FFTs because the node phases cancel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .fields import Axis, ConeData, FullField, GridSpec, RadialField, radialize, unradialize

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# DFT


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of ``F`` on the dual grid of ``source`` along ``axes``."""

    coeffs: np.ndarray = field(repr=False)
    axes: tuple[int, ...]
    source: object = field(repr=False)
    real_input: bool = True

    @property
    def grid(self) -> GridSpec:
        return self.source.grid

    def frequencies(self, i: int) -> np.ndarray:
        return self.grid.axes[self.axes[i]].frequencies

    @property
    def dual_cell(self) -> float:
        return float(np.prod([2 * np.pi / (a.count * a.spacing)
                              for a in (self.grid.axes[i] for i in self.axes)]))


def block_axes(f, block) -> tuple[int, ...]:
    ndim = f.values.ndim
    if block == "first":
        return tuple(range(f.n - 1))
    if block == "all":
        return tuple(range(ndim))
    if block == "second":
        return tuple(range(f.n - 1, ndim))
    axes = tuple(int(b) for b in block)
    if any(not 0 <= a < ndim for a in axes):
        raise ValueError(f"axes {axes} out of range for a {ndim}-d field")
    return axes


def _phase(axis: Axis, sign: float) -> np.ndarray:
    return axis.spacing * np.exp(sign * 1j * axis.frequencies * axis.origin)


def _along(vec: np.ndarray, ax: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[ax] = -1
    return vec.reshape(shape)


def dft_forward(f, axes="first") -> SpectralField:
    """Approximate ``F`` (or the partial ``F_1`` on the first block)."""
    axes = block_axes(f, axes)
    vals = f.values
    c = sfft.fftshift(sfft.fftn(vals, axes=axes), axes=axes)
    for ax in axes:
        c = c * _along(_phase(f.grid.axes[ax], -1.0), ax, vals.ndim)
    return SpectralField(c, axes, f, bool(np.isrealobj(vals)))


def dft_inverse(S: SpectralField):
    c = S.coeffs
    for ax in S.axes:
        c = c / _along(_phase(S.grid.axes[ax], -1.0), ax, c.ndim)
    vals = sfft.ifftn(sfft.ifftshift(c, axes=S.axes), axes=S.axes)
    if S.real_input:
        vals = vals.real
    return S.source.with_values(vals)


def _freq_norm(axes_list: Sequence[Axis], shape_pad: Sequence[int], real_last: bool):
    """|xi| on an FFT-ordered (optionally rfft) grid."""
    comps = []
    for i, (a, m) in enumerate(zip(axes_list, shape_pad)):
        last = real_last and i == len(axes_list) - 1
        k = sfft.rfftfreq(m, a.spacing) if last else sfft.fftfreq(m, a.spacing)
        comps.append(2 * np.pi * k)
    mesh = np.meshgrid(*comps, indexing="ij", sparse=True)
    return np.sqrt(sum(m ** 2 for m in mesh))


def apply_radial_multiplier(values: np.ndarray, grid: GridSpec, axes: Sequence[int],
                            fn, pad: int = 1) -> np.ndarray:
    """Multiply by ``fn(|xi|)`` over ``axes`` with ``pad``-fold zero padding."""
    axes = tuple(axes)
    if not axes:
        return np.array(values, dtype=float)
    shape = [values.shape[a] * pad for a in axes]
    real = np.isrealobj(values)
    if real:
        c = sfft.rfftn(values, s=shape, axes=axes)
    else:
        c = sfft.fftn(values, s=shape, axes=axes)
    r = _freq_norm([grid.axes[a] for a in axes], shape, real)
    mult = fn(r)
    # move the block multipliers onto the block axes of c
    full_shape = [1] * values.ndim
    for a, m in zip(axes, mult.shape):
        full_shape[a] = m
    c = c * mult.reshape(full_shape)
    if real:
        out = sfft.irfftn(c, s=shape, axes=axes)
    else:
        out = sfft.ifftn(c, s=shape, axes=axes)
    crop = tuple(slice(0, values.shape[i]) if i in axes else slice(None)
                 for i in range(values.ndim))
    return out[crop]


def _power(r: np.ndarray, p: float) -> np.ndarray:
    out = np.zeros_like(r)
    nz = r > 0
    out[nz] = r[nz] ** p
    return out


def riesz_potential(f, k: float, block="first", pad: int = 1):
    """``I^k``: multiplier ``|xi|^-k`` on ``block``; the DC bin is 0 unless ``k = 0``."""
    if k == 0:
        return f.with_values(f.values)
    axes = block_axes(f, block)
    vals = apply_radial_multiplier(f.values, f.grid, axes, lambda r: _power(r, -k), pad)
    return f.with_values(vals)


def laplacian_stencil(values: np.ndarray, grid: GridSpec, axes: Iterable[int]) -> np.ndarray:
    """Second-order central Laplacian with zero ghost cells."""
    out = np.zeros_like(values, dtype=float)
    for a in axes:
        h2 = grid.axes[a].spacing ** 2
        padded = np.pad(values, [(1, 1) if i == a else (0, 0) for i in range(values.ndim)])
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[a] = slice(0, -2)
        hi[a] = slice(2, None)
        out += (padded[tuple(lo)] + padded[tuple(hi)] - 2.0 * values) / h2
    return out


def fractional_laplacian_power(f, m: int, block="first", method: str = "spectral",
                               pad: int = 1):
    """``Delta^m`` on ``block``: spectral ``(-|xi|^2)^m`` or the 3-point stencil."""
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    m = int(m)
    axes = block_axes(f, block)
    if method == "spectral":
        vals = apply_radial_multiplier(f.values, f.grid, axes, lambda r: (-r * r) ** m, pad)
    elif method == "stencil":
        vals = f.values
        for _ in range(m):
            vals = laplacian_stencil(vals, f.grid, axes)
    else:
        raise ValueError(f"unknown method {method!r}")
    return f.with_values(vals)


# --------------------------------------------------------------------------
# Bessel and Hankel


def _check_order(nu: float) -> float:
    nu = float(nu)
    if 2 * nu != math.floor(2 * nu) or nu < -0.5:
        raise ValueError(f"unsupported Bessel order {nu}; use -1/2 or k/2 with k >= 0")
    return nu


def bessel_j(nu: float, x):
    """``J_nu(x)`` for ``x >= 0`` and ``nu`` in ``{-1/2, 0, 1/2, 1, ...}``.

    Power series below x = 12, Hankel asymptotics (with upward recurrence for
    larger integer orders) beyond, closed trigonometric forms for ``+-1/2``
    and upward recurrence from them for other half-integer orders.
    """
    nu = _check_order(nu)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("bessel_j needs x >= 0")
    out = _kernels.bessel_j_array(nu, arr)
    return float(out) if out.ndim == 0 else out


def hankel(profile: np.ndarray, axis: Axis | GridSpec, d: int, rho) -> np.ndarray | float:
    """``H_{(d-2)/2} g(rho) = integral g(s) s^{d/2} J_{(d-2)/2}(s rho) ds`` (midpoint rule)."""
    ax = axis.axes[0] if isinstance(axis, GridSpec) else axis
    nu = (d - 2) / 2
    _check_order(nu)
    s = ax.nodes
    g = np.asarray(profile, dtype=float)
    r = np.atleast_1d(np.asarray(rho, dtype=float))
    kern = _kernels.bessel_j_array(nu, np.multiply.outer(r, s)) * s ** (d / 2)
    out = kern @ g.T * ax.spacing if g.ndim > 1 else kern @ g * ax.spacing
    return float(out[0]) if np.ndim(rho) == 0 else out


def radial_fourier(profile: np.ndarray, axis: Axis, d: int, r) -> np.ndarray:
    """``(2 pi)^{d/2} r^{(2-d)/2} H_{(d-2)/2} g(r)``: the d-dimensional transform of ``g(|y|)``.

    ``profile`` may be complex and stacked on leading axes; ``r`` is 1-d.
    The ``d = 1`` value at ``r = 0`` is the limit ``2 integral g``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s = axis.nodes
    if d == 1:
        kern = 2.0 * np.cos(np.outer(r, s))
    elif d == 2:
        kern = 2 * np.pi * _kernels.bessel_j_array(0.0, np.outer(r, s)) * s
    else:
        raise ValueError("radial_fourier supports d = 1 and d = 2")
    return np.asarray(profile) @ kern.T * axis.spacing


# --------------------------------------------------------------------------
# Fourier slice checks


def trusted_slices(g: ConeData, tol: float = 1e-6) -> np.ndarray:
    """Indices of s slices whose data has decayed to ``tol * peak`` at the u border."""
    peak = g.peak()
    if peak == 0:
        return np.arange(g.s_grid.shape[0])
    v = np.abs(g.values)
    edge = np.zeros(v.shape[-1])
    for d in range(g.n - 1):
        for end in (0, -1):
            sl = [slice(None)] * v.ndim
            sl[d] = end
            edge = np.maximum(edge, v[tuple(sl)].reshape(-1, v.shape[-1]).max(axis=0))
    ok = edge <= tol * peak
    bad = np.nonzero(~ok)[0]
    stop = bad[0] if bad.size else ok.size
    return np.arange(stop)


def _test_frequencies(axes_list: Sequence[Axis], per_axis: int, cut: float) -> np.ndarray:
    comps = []
    for a in axes_list:
        xi = a.frequencies
        xi = xi[np.abs(xi) <= cut]
        step = max(1, int(math.ceil(xi.size / per_axis)))
        zero = int(np.argmin(np.abs(xi)))
        comps.append(np.concatenate([xi[zero::-step][::-1], xi[zero + step::step]]))
    mesh = np.meshgrid(*comps, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _partial_direct(values: np.ndarray, x_axes: Sequence[Axis], xi: np.ndarray) -> np.ndarray:
    """``sum_x values[x, ...] exp(-i xi.x) h^d`` for arbitrary frequency rows."""
    d = len(x_axes)
    mesh = np.meshgrid(*[a.nodes for a in x_axes], indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=-1)
    E = np.exp(-1j * xi @ xs.T) * float(np.prod([a.spacing for a in x_axes]))
    flat = values.reshape(xs.shape[0], -1)
    return (E @ flat).reshape((xi.shape[0],) + values.shape[d:])


def _slice_lhs(g: ConeData, xi: np.ndarray, s_idx: np.ndarray) -> np.ndarray:
    vals = g.values[..., s_idx]
    return _partial_direct(vals, g.u_grid.axes, xi)


def _slice_test_set(g: ConeData, x_axes: Sequence[Axis], per_axis: int, n_s: int):
    nyq = min(min(math.pi / a.spacing for a in g.u_grid.axes),
              min(math.pi / a.spacing for a in x_axes))
    xi = _test_frequencies(g.u_grid.axes, per_axis, 0.5 * nyq)
    idx = trusted_slices(g)
    step = max(1, int(math.ceil(idx.size / n_s)))
    return xi, idx[::step]


def fourier_slice_residual(f: FullField | RadialField, g: ConeData,
                           per_axis: int = 24, n_s: int = 8) -> float:
    """``max |F_1(Cf)(xi, s) - F f(xi, s xi)| / |F f(0, 0)|`` over a test set.

    ``F f`` off the dual grid is evaluated by a direct DFT sum over the full
    field (frequencies in the data's u dual grid, ``eta = s xi``).
    """
    full = unradialize(f) if isinstance(f, RadialField) else f
    n = full.n
    d = n - 1
    x_axes = full.grid.axes[:d]
    y_axes = full.grid.axes[d:]
    xi, s_idx = _slice_test_set(g, x_axes, per_axis, n_s)
    s = g.s_grid.nodes(0)[s_idx]
    lhs = _slice_lhs(g, xi, s_idx)
    A = _partial_direct(full.values, x_axes, xi).reshape(xi.shape[0], -1)
    ymesh = np.meshgrid(*[a.nodes for a in y_axes], indexing="ij")
    ys = np.stack([m.ravel() for m in ymesh], axis=-1)
    hy = float(np.prod([a.spacing for a in y_axes]))
    rhs = np.empty_like(lhs)
    for j, sj in enumerate(s):
        rhs[:, j] = np.sum(A * np.exp(-1j * sj * (xi @ ys.T)), axis=1) * hy
    ref = abs(full.integral())
    scale = ref if ref > 0 else float(np.max(np.abs(rhs)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(lhs - rhs)) / scale)


def fourier_slice_radial_residual(f: RadialField, g: ConeData,
                                  per_axis: int = 24, n_s: int = 8) -> float:
    """Residual of ``F_1(Cf)(xi, s) = (2pi)^{(n-1)/2} (s|xi|)^{(3-n)/2} H_{(n-3)/2} F_1 f(xi, .)(s|xi|)``."""
    n = f.n
    d = n - 1
    xi, s_idx = _slice_test_set(g, f.x_grid.axes, per_axis, n_s)
    s = g.s_grid.nodes(0)[s_idx]
    lhs = _slice_lhs(g, xi, s_idx)
    prof = _partial_direct(f.values, f.x_grid.axes, xi)
    rho = np.linalg.norm(xi, axis=1)
    az = f.z_grid.axes[0]
    rhs = np.empty_like(lhs)
    for j, sj in enumerate(s):
        r = sj * rho
        uniq, inv = np.unique(r, return_inverse=True)
        table = radial_fourier(prof, az, d, uniq)
        rhs[:, j] = table[np.arange(xi.shape[0]), inv]
    ref = abs(f.integral())
    scale = ref if ref > 0 else float(np.max(np.abs(rhs)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(lhs - rhs)) / scale)


# --------------------------------------------------------------------------
# band projector


@dataclass(frozen=True)
class BandParams:
    """Opening band ``a < |v| < b``; ``b`` may be infinite."""

    a: float = 0.0
    b: float = math.inf

    def __post_init__(self):
        if not (self.a >= 0 and self.b > self.a):
            raise ValueError(f"band needs 0 <= a < b, got a={self.a}, b={self.b}")

    @property
    def is_full(self) -> bool:
        return self.a == 0 and math.isinf(self.b)


def band_multiplier(xi_norm: np.ndarray, eta_norm: np.ndarray, band: BandParams) -> np.ndarray:
    if band.is_full:
        return np.ones(np.broadcast_shapes(xi_norm.shape, eta_norm.shape))
    # half-open a|xi| <= |eta| < b|xi| so adjacent bands tile exactly
    upper = eta_norm < band.b * xi_norm if math.isfinite(band.b) else xi_norm > 0
    return ((eta_norm >= band.a * xi_norm) & upper).astype(float)


def band_project(f: FullField | RadialField, band: BandParams, pad: int = 1):
    """``P_(a,b)``: indicator of ``a|xi| <= |eta| < b|xi|`` in full frequency space.

    The indicator is homogeneous of degree 0, so ``P f`` decays only
    algebraically; ``pad`` embeds the field in a ``pad``-fold larger zero box
    before the DFT so that those tails do not wrap around.
    """
    if not isinstance(band, BandParams):
        band = BandParams(*band)
    if isinstance(f, RadialField):
        full = band_project(unradialize(f), band, pad)
        return radialize(full, f.z_grid, tol=None)
    if band.is_full:
        return f.with_values(f.values)
    d = f.n - 1
    shape = f.grid.shape
    lo = [(m * (pad - 1)) // 2 for m in shape]
    big = np.pad(f.values, [(l, m * pad - m - l) for l, m in zip(lo, shape)])
    c = sfft.fftn(big)
    xi = _freq_norm(f.grid.axes[:d], big.shape[:d], False)
    eta = _freq_norm(f.grid.axes[d:], big.shape[d:], False)
    xi = xi.reshape(xi.shape + (1,) * d)
    eta = eta.reshape((1,) * d + eta.shape)
    out = sfft.ifftn(c * band_multiplier(xi, eta, band)).real
    return f.with_values(out[tuple(slice(l, l + m) for l, m in zip(lo, shape))])
