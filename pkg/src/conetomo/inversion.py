"""Reconstruction from cone data: Riesz, local, circular-harmonic and limited-band pipelines.

All pipelines reconstruct on a target radial grid.  Slopes are only known up
to the data's ``s_max``, so every pipeline returns (an approximation of) the
component of the image whose frequencies satisfy ``|eta| < s_max |xi|``.
"""

from __future__ import annotations

import logging
import math
import warnings

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .fields import SPHERE_AREA, ConeData, GridSpec, RadialField, half_axis, half_line_weights
from .forward import backproject
from .spectral import BandParams, apply_radial_multiplier, laplacian_stencil, _power

logger = logging.getLogger(__name__)


class NonlocalInversion(ValueError):
    """Local inversion was requested in an even dimension."""


def _check_k(n: int, k: float) -> float:
    k = float(k)
    if not 0 <= k < n - 1:
        raise ValueError(f"k must satisfy 0 <= k < n-1 = {n - 1}, got {k}")
    return k


def default_target(F: ConeData) -> tuple[GridSpec, GridSpec]:
    """The u grid as x grid, and z on ``[0, u_max]`` with the u spacing."""
    ax = F.u_grid.axes[0]
    return F.u_grid, GridSpec((half_axis(ax.max, ax.count // 2),))


def _target_grids(F: ConeData, target) -> tuple[GridSpec, GridSpec]:
    if target is None:
        return default_target(F)
    if isinstance(target, RadialField):
        return target.x_grid, target.z_grid
    return target


def _u_axes(F: ConeData) -> tuple[int, ...]:
    return tuple(range(F.n - 1))


def filter_data(F: ConeData, exponent: float, pad: int = 2) -> ConeData:
    """Multiply every s slice by ``|xi|^exponent`` in u (zero-padded FFT)."""
    if exponent == 0:
        return F
    vals = apply_radial_multiplier(F.values, F.grid, _u_axes(F),
                                   lambda r: _power(r, exponent), pad)
    return F.with_values(vals)


def restore_mean(f: RadialField, F: ConeData) -> RadialField:
    """Spread the mass deficit against the data's mass uniformly in x.

    Each z row receives a share proportional to its x-integrated absolute
    value, so rows the reconstruction left empty stay empty.
    """
    target = float(np.sum(F.values[..., 0]) * F.u_grid.cell_volume)
    deficit = target - f.integral()
    d = f.n - 1
    area = float(np.prod([a.max - a.min for a in f.x_grid.axes]))
    rows = np.sum(np.abs(f.values), axis=tuple(range(d))) * f.x_grid.cell_volume
    w = rows * half_line_weights(f.z_grid.axes[0], f.n) * SPHERE_AREA[f.n]
    if deficit == 0 or not np.any(w > 0):
        return f
    offset = deficit * rows / (area * float(np.sum(w)))
    return f.with_values(f.values + offset)


def invert_riesz(F: ConeData, k: float = 0.0, *, target=None, pad: int = 2,
                 x_pad: int | None = None, restore_dc: bool = False, n_theta: int | None = None,
                 order: int = 3) -> RadialField:
    """``f = (2 pi)^{1-n} I^{-k} C I^{k+1-n} F``.

    The data are filtered by ``|xi|^{n-1-k}`` along u, backprojected, and
    for ``k > 0`` filtered by ``|xi|^k`` along x on an ``x_pad``-fold wider
    grid that is cropped afterwards (default 8 for n = 2, 4 for n = 3).
    """
    n = F.n
    k = _check_k(n, k)
    if x_pad is None:
        x_pad = 8 if n == 2 else 4
    x_grid, z_grid = _target_grids(F, target)
    if not np.any(F.values):
        return RadialField(n, x_grid, z_grid, np.zeros(x_grid.shape + z_grid.shape))
    G = filter_data(F, n - 1 - k, pad)
    if k == 0:
        out = backproject(G, (x_grid, z_grid), n_theta=n_theta, order=order)
        vals = out.values
    else:
        wide = GridSpec(tuple(a.extended(x_pad) for a in x_grid.axes))
        out = backproject(G, (wide, z_grid), n_theta=n_theta, order=order)
        vals = apply_radial_multiplier(out.values, out.grid, _u_axes(F),
                                       lambda r: _power(r, k), 1)
        lo = [(a.count * (x_pad - 1)) // 2 for a in x_grid.axes]
        vals = vals[tuple(slice(l, l + a.count) for l, a in zip(lo, x_grid.axes))]
    f = RadialField(n, x_grid, z_grid, vals * (2 * math.pi) ** (1 - n))
    return restore_mean(f, F) if restore_dc else f


def invert_local_odd(F: ConeData, *, target=None, restore_dc: bool = False,
                     n_theta: int | None = None, order: int = 3) -> RadialField:
    """``f = (2 pi)^{1-n} (-1)^{(n-1)/2} C Delta_u^{(n-1)/2} F`` with a stencil Laplacian.

    Every reconstructed value only depends on data near its backprojection
    surface.
    """
    n = F.n
    if n % 2 == 0:
        raise NonlocalInversion(
            "local inversion requires odd n: for even n the power of the "
            "Laplacian is fractional and therefore nonlocal")
    x_grid, z_grid = _target_grids(F, target)
    vals = F.values
    for _ in range((n - 1) // 2):
        vals = laplacian_stencil(vals, F.grid, _u_axes(F))
    G = F.with_values(vals)
    out = backproject(G, (x_grid, z_grid), n_theta=n_theta, order=order)
    sign = -1.0 if ((n - 1) // 2) % 2 else 1.0
    f = out * (sign * (2 * math.pi) ** (1 - n))
    return restore_mean(f, F) if restore_dc else f


# --------------------------------------------------------------------------
# circular harmonics


def _padded_spectrum(F: ConeData, pad: int):
    """Centred ``F_1 F`` on a ``pad``-fold finer dual grid, one slab per s."""
    axes = _u_axes(F)
    shape = [F.values.shape[a] * pad for a in axes]
    c = sfft.fftshift(sfft.fftn(F.values, s=shape, axes=axes), axes=axes)
    dual = []
    for a, m in zip(F.u_grid.axes, shape):
        xi = 2 * np.pi * (np.arange(m) - m // 2) / (m * a.spacing)
        c = c * (a.spacing * np.exp(-1j * xi * a.origin)).reshape(
            [-1 if i == len(dual) else 1 for i in range(c.ndim)])
        dual.append(xi)
    return c, dual


def _interp_dual(c: np.ndarray, dual, xi: np.ndarray) -> np.ndarray:
    """Bilinear reads of a complex ``(m1, m2, K)`` spectrum at ``xi`` (P, 2)."""
    out = np.zeros((xi.shape[0], c.shape[-1]), dtype=complex)
    t = [(xi[:, d] - dual[d][0]) / (dual[d][1] - dual[d][0]) for d in range(2)]
    i0 = [np.floor(ti).astype(np.int64) for ti in t]
    a = [ti - ii for ti, ii in zip(t, i0)]
    for bx in (0, 1):
        for by in (0, 1):
            ix, iy = i0[0] + bx, i0[1] + by
            ok = (ix >= 0) & (ix < c.shape[0]) & (iy >= 0) & (iy < c.shape[1])
            w = (a[0] if bx else 1 - a[0]) * (a[1] if by else 1 - a[1])
            w = np.where(ok, w, 0.0)
            out += w[:, None] * c[np.clip(ix, 0, c.shape[0] - 1),
                                  np.clip(iy, 0, c.shape[1] - 1)]
    return out


def _ring_lowpass(c, dual, rho: np.ndarray, phi: np.ndarray, l_max: int, m: int):
    """Harmonics ``|l| <= l_max`` of the data spectrum on rings, evaluated at ``phi``.

    ``rho``/``phi``: polar coordinates of the requested frequencies (P,).
    Returns (P, K).
    """
    uniq, inv = np.unique(rho, return_inverse=True)
    th = 2 * np.pi * np.arange(m) / m
    pts = np.stack([np.outer(uniq, np.cos(th)).ravel(),
                    np.outer(uniq, np.sin(th)).ravel()], axis=-1)
    ring = _interp_dual(c, dual, pts).reshape(uniq.size, m, -1)
    coeff = np.fft.fft(ring, axis=1) / m
    ls = np.fft.fftfreq(m, 1.0 / m).astype(int)
    keep = np.abs(ls) <= l_max
    coeff = coeff[:, keep]
    ls = ls[keep]
    basis = np.exp(1j * np.outer(phi, ls))
    return np.einsum("pl,plk->pk", basis, coeff[inv])


def invert_harmonic(F: ConeData, l_max: int = 16, *, target=None, pad: int = 2,
                    x_pad: int = 4, restore_dc: bool = False) -> RadialField:
    """Fourier-Hankel inversion, one circular harmonic of ``xi/|xi|`` at a time.

    With ``rho = |xi|`` and data spectrum ``G(xi, s) = F_1 F(xi, s)``:

    * n = 3: ``F_1 f(xi, z) = rho^2/(2 pi) * integral G_L(xi, s) J_0(s z rho) s ds``,
      where ``G_L`` keeps the harmonics ``|l| <= l_max`` on each ring;
    * n = 2: ``F_1 f(xi, z) = |xi|/pi * integral G(xi, s) cos(s z |xi|) ds``.

    The radial step is the same for every harmonic because the Bessel
    order does not depend on ``l``.  The ``xi = 0`` bin is indeterminate and
    left at 0; the spectrum is built on an ``x_pad``-fold wider x range so
    that this bin carries little of the image.
    """
    n = F.n
    if n not in (2, 3):
        raise ValueError("harmonic inversion is implemented for n = 2 and n = 3")
    x_grid, z_grid = _target_grids(F, target)
    if not np.any(F.values):
        return RadialField(n, x_grid, z_grid, np.zeros(x_grid.shape + z_grid.shape))
    wide = GridSpec(tuple(a.extended(x_pad) for a in x_grid.axes))
    s_ax = F.s_grid.axes[0]
    s, hs = s_ax.nodes, s_ax.spacing
    z = z_grid.nodes(0)
    c, dual = _padded_spectrum(F, pad)
    xi_axes = [a.frequencies for a in wide.axes]
    mesh = np.meshgrid(*xi_axes, indexing="ij")
    xi = np.stack([m_.ravel() for m_ in mesh], axis=-1)
    rho = np.linalg.norm(xi, axis=1)
    if n == 3:
        phi = np.arctan2(xi[:, 1], xi[:, 0])
        G = _ring_lowpass(c, dual, rho, phi, int(l_max), max(64, 4 * int(l_max)))
    else:
        G = _interp_dual1(c, dual[0], xi[:, 0])
    spec = np.zeros((xi.shape[0], z.size), dtype=complex)
    live = rho > 0
    uniq, inv = np.unique(rho[live], return_inverse=True)
    arg = np.multiply.outer(np.multiply.outer(uniq, z), s)  # (R, Z, K)
    if n == 3:
        kern = _kernels.bessel_j_array(0.0, arg) * (s * hs)
        pref = uniq ** 2 / (2 * np.pi)
    else:
        kern = np.cos(arg) * hs
        pref = uniq / np.pi
    kern *= pref[:, None, None]
    spec[live] = np.einsum("pk,pzk->pz", G[live], kern[inv])
    spec = spec.reshape(wide.shape + (z.size,))
    vals = _inverse_partial(spec, wide)
    if x_pad > 1:
        lo = [(a.count * (x_pad - 1)) // 2 for a in x_grid.axes]
        vals = vals[tuple(slice(l, l + a.count) for l, a in zip(lo, x_grid.axes))]
    f = RadialField(n, x_grid, z_grid, vals)
    return restore_mean(f, F) if restore_dc else f


def _interp_dual1(c: np.ndarray, dual: np.ndarray, xi: np.ndarray) -> np.ndarray:
    t = (xi - dual[0]) / (dual[1] - dual[0])
    i0 = np.floor(t).astype(np.int64)
    a = t - i0
    out = np.zeros((xi.size, c.shape[-1]), dtype=complex)
    for b, w in ((0, 1 - a), (1, a)):
        i = i0 + b
        ok = (i >= 0) & (i < c.shape[0])
        out += np.where(ok, w, 0.0)[:, None] * c[np.clip(i, 0, c.shape[0] - 1)]
    return out


def _inverse_partial(spec: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Inverse of the centred partial DFT over the leading ``grid.ndim`` axes."""
    axes = tuple(range(grid.ndim))
    for ax, a in enumerate(grid.axes):
        ph = a.spacing * np.exp(-1j * a.frequencies * a.origin)
        spec = spec / ph.reshape([-1 if i == ax else 1 for i in range(spec.ndim)])
    return sfft.ifftn(sfft.ifftshift(spec, axes=axes), axes=axes).real


# --------------------------------------------------------------------------
# limited data


def limited_mask(F: ConeData, band: BandParams) -> np.ndarray:
    s = F.s_grid.nodes(0)
    return ((s >= band.a) & (s < band.b)).astype(float)


def invert_limited(F: ConeData, band: BandParams | tuple, k: float = 0.0, **kw) -> RadialField:
    """Reconstruct ``P_(a,b) f`` from the slopes ``a < s < b`` only.

    The data are cut with a sharp indicator in s and passed to
    :func:`invert_riesz`, which already ends with ``I^{-k}``; for
    ``(a, b) = (0, inf)`` this is exactly :func:`invert_riesz`.
    """
    if not isinstance(band, BandParams):
        band = BandParams(*band)
    k = _check_k(F.n, k)
    if band.is_full:
        return invert_riesz(F, k, **kw)
    mask = limited_mask(F, band)
    if not mask.any():
        warnings.warn(f"no s samples inside the band ({band.a}, {band.b}); returning 0",
                      RuntimeWarning, stacklevel=2)
        x_grid, z_grid = _target_grids(F, kw.get("target"))
        return RadialField(F.n, x_grid, z_grid, np.zeros(x_grid.shape + z_grid.shape))
    return invert_riesz(F.with_values(F.values * mask), k, **kw)
