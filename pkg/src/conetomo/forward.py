"""Cone transform quadrature, backprojection, Radon relations and the Compton angle."""

from __future__ import annotations

import logging
import math
import warnings
from typing import Sequence

import numpy as np

from . import _kernels
from .fields import (Axis, ConeData, FullField, GaussianBlob, GridSpec, RadialField,
                     TruncationWarning, half_axis, interp_grid, radialize, unradialize)

logger = logging.getLogger(__name__)

ELECTRON_REST_ENERGY_KEV = 510.99895
SUPPORT_THRESHOLD = 1e-10
"""Samples below this fraction of the peak are treated as outside the support."""


class InvalidMeasurement(ValueError):
    """Energy deposit outside ``0 < dE < E``."""


class KinematicallyImpossible(ValueError):
    """The Compton formula gives a cosine outside ``[-1, 1]``."""


# --------------------------------------------------------------------------
# shared quadrature core


def default_n_theta(nx: int) -> int:
    return max(64, 4 * nx)


def s_axis(s_max: float = 4.0, n_s: int = 64) -> GridSpec:
    return GridSpec((half_axis(s_max, n_s),))


def _support_lines(stack: np.ndarray, axis: Axis, thr: float):
    lo = np.full(stack.shape[0], np.inf)
    hi = np.full(stack.shape[0], -np.inf)
    for k, row in enumerate(stack):
        idx = np.nonzero(np.abs(row) > thr)[0]
        if idx.size:
            lo[k] = axis.nodes[idx[0]] - axis.spacing
            hi[k] = axis.nodes[idx[-1]] + axis.spacing
    return lo, hi


def _support_disks(stack: np.ndarray, grid: GridSpec, thr: float) -> np.ndarray:
    disks = np.full((stack.shape[0], 3), -1.0)
    ax, ay = grid.axes
    pad = math.hypot(ax.spacing, ay.spacing)
    for k, img in enumerate(stack):
        ix, iy = np.nonzero(np.abs(img) > thr)
        if not ix.size:
            continue
        x, y = ax.nodes[ix], ay.nodes[iy]
        cx, cy = 0.5 * (x.min() + x.max()), 0.5 * (y.min() + y.max())
        disks[k] = (cx, cy, float(np.sqrt(np.max((x - cx) ** 2 + (y - cy) ** 2))) + pad)
    return disks


def ring_quadrature(n: int, stack: np.ndarray, base: GridSpec, src_half: np.ndarray,
                    src_h: float, points: np.ndarray, out_half: np.ndarray,
                    n_theta: int, order: int = 1) -> np.ndarray:
    """Accumulate ``sum_k w_k * mean-over-ring(stack[k])`` for every output.

    ``stack[k]`` is the slice at half-line node ``src_half[k]``; the ring
    radius for output ``(p, j)`` is ``out_half[j] * src_half[k]`` and the
    weight is the half-line weight of ``src_half[k]`` (times the ring
    length 2*pi when n = 3).  This single kernel is both the forward transform (slices
    over z) and backprojection (slices over s).
    """
    stack = np.ascontiguousarray(stack, dtype=float)
    peak = float(np.max(np.abs(stack))) if stack.size else 0.0
    P, J = points.shape[0], out_half.size
    if peak == 0.0:
        return np.zeros((P, J))
    thr = SUPPORT_THRESHOLD * peak
    radii = np.ascontiguousarray(np.outer(out_half, src_half))
    w = src_half ** (n - 2) * src_h
    if n == 3 and abs(src_half[0] - 0.5 * src_h) < 1e-12 * src_h:
        w[0] = 11.0 * src_h ** 2 / 24.0
    weights = np.ascontiguousarray(np.broadcast_to(w, radii.shape))
    if n == 2:
        ax = base.axes[0]
        lo, hi = _support_lines(stack, ax, thr)
        return _kernels.vline_accumulate(stack, ax.origin, ax.spacing,
                                         np.ascontiguousarray(points[:, 0]),
                                         radii, weights, lo, hi)
    ax, ay = base.axes
    disks = _support_disks(stack, base, thr)
    return _kernels.ring_accumulate(stack, ax.origin, ay.origin, ax.spacing, ay.spacing,
                                    np.ascontiguousarray(points[:, 0]),
                                    np.ascontiguousarray(points[:, 1]),
                                    radii, weights, disks, int(n_theta), int(order))


def _grid_points(grid: GridSpec) -> np.ndarray:
    mesh = np.meshgrid(*[a.nodes for a in grid.axes], indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# --------------------------------------------------------------------------
# cone transform


def cone_values(f: RadialField, points: np.ndarray, s_values: np.ndarray,
                n_theta: int | None = None, order: int = 3) -> np.ndarray:
    """Cone transform at arbitrary vertices ``points`` (P, n-1) and slopes."""
    n = f.n
    stack = np.moveaxis(f.values, -1, 0)
    az = f.z_grid.axes[0]
    n_theta = default_n_theta(f.x_grid.shape[0]) if n_theta is None else n_theta
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return ring_quadrature(n, stack, f.x_grid, az.nodes, az.spacing, pts,
                           np.asarray(s_values, dtype=float).ravel(), n_theta, order)


def cone_transform(f: RadialField, s_grid: GridSpec | None = None, *,
                   u_grid: GridSpec | None = None, s_max: float = 4.0, n_s: int = 64,
                   n_theta: int | None = None, order: int = 3) -> ConeData:
    """Cone transform of a radial field by trapezoid-in-z ring quadrature.

    For n = 2 each sample is ``sum_z h [f(u+zs, z) + f(u-zs, z)]``; for
    n = 3 the ring mean over ``n_theta`` uniform angles is weighted by
    ``z h``.  ``u_grid`` defaults to the x grid of ``f``.
    """
    s_grid = s_axis(s_max, n_s) if s_grid is None else s_grid
    u_grid = f.x_grid if u_grid is None else u_grid
    s = s_grid.nodes(0)
    reach = s[-1] * f.z_grid.axes[0].max
    room = min(a.max - a.min for a in f.x_grid.axes) / 2
    if reach > room:
        warnings.warn(f"cone rays reach {reach:.3g} past their vertex but the x grid "
                      f"half-width is {room:.3g}; reads outside it count as 0",
                      TruncationWarning, stacklevel=2)
    vals = cone_values(f, _grid_points(u_grid), s, n_theta, order)
    return ConeData(f.n, u_grid, s_grid, vals.reshape(u_grid.shape + (s.size,)))


def cone_transform_closed_form(n: int, blobs: Sequence[GaussianBlob], u_grid: GridSpec,
                               s_grid: GridSpec) -> ConeData:
    """Exact cone data of a Gaussian mixture."""
    mesh = (u_grid + s_grid).mesh()
    vals = np.zeros((u_grid + s_grid).shape)
    for b in blobs:
        vals = vals + b.cone(mesh[:-1], mesh[-1])
    return ConeData(n, u_grid, s_grid, vals)


def cone_transform_direct(f: FullField, u, v) -> float:
    """``Cf(u, v) = integral f(u + |v| y, y) dy`` summed over the y nodes."""
    n = f.n
    d = n - 1
    u = np.atleast_1d(np.asarray(u, dtype=float))
    speed = float(np.linalg.norm(np.atleast_1d(v)))
    ybox = GridSpec(f.grid.axes[d:])
    ymesh = np.meshgrid(*[a.nodes for a in ybox.axes], indexing="ij")
    ys = np.stack([m.ravel() for m in ymesh], axis=-1)
    pts = np.concatenate([u + speed * ys, ys], axis=-1)
    vals = interp_grid(f.values, f.grid, pts)
    return float(vals.sum() * ybox.cell_volume)


# --------------------------------------------------------------------------
# backprojection


def backproject(g: ConeData, target: RadialField | tuple[GridSpec, GridSpec] | None = None,
                n_theta: int | None = None, order: int = 3) -> RadialField:
    """``(C g)(x, z) = integral g(x + z v, |v|) dv`` over ``|v| <= s_max``.

    Same ring kernel as :func:`cone_transform` with the roles of the z and s
    axes exchanged.
    """
    if target is None:
        x_grid = g.u_grid
        ax = x_grid.axes[0]
        z_grid = GridSpec((half_axis(ax.max, ax.count // 2),))
    elif isinstance(target, RadialField):
        x_grid, z_grid = target.x_grid, target.z_grid
    else:
        x_grid, z_grid = target
    n = g.n
    n_theta = default_n_theta(x_grid.shape[0]) if n_theta is None else n_theta
    stack = np.moveaxis(g.values, -1, 0)
    a_s = g.s_grid.axes[0]
    z = z_grid.nodes(0)
    vals = ring_quadrature(n, stack, g.u_grid, a_s.nodes, a_s.spacing,
                           _grid_points(x_grid), z, n_theta, order)
    return RadialField(n, x_grid, z_grid, vals.reshape(x_grid.shape + (z.size,)))


# --------------------------------------------------------------------------
# Radon relations


def _as_full(f) -> FullField:
    return unradialize(f) if isinstance(f, RadialField) else f


def radon2d(f: FullField | RadialField, omega, t: float, step: float | None = None) -> float:
    """Line integral ``integral f(t*omega + sigma*omega_perp) d sigma`` by trapezoid."""
    f = _as_full(f)
    if f.n != 2:
        raise ValueError("radon2d needs a two-dimensional field")
    om = np.asarray(omega, dtype=float)
    if not math.isclose(float(np.hypot(*om)), 1.0, rel_tol=1e-9):
        raise ValueError("omega must be a unit vector")
    h = min(f.grid.spacing) if step is None else step
    half = math.hypot(*[max(abs(a.min), abs(a.max)) for a in f.grid.axes]) + h
    m = int(math.ceil(half / h))
    sig = h * np.arange(-m, m + 1)
    perp = np.array([-om[1], om[0]])
    pts = t * om + np.outer(sig, perp)
    return float(interp_grid(f.values, f.grid, pts).sum() * h)


def _symmetrize_y(f: FullField) -> FullField:
    return f.with_values(0.5 * (f.values + f.values[:, ::-1]))


def vline_radon_relation_residual(f: FullField | RadialField,
                                  s_values: Sequence[float] | None = None,
                                  u_stride: int = 4) -> float:
    """Peak-relative gap between ``Cf(u, v)`` and ``Rf(omega, t) / sqrt(1 + v^2)``.

    ``omega = (1, -v)/sqrt(1+v^2)`` and ``t = u/sqrt(1+v^2)``: the line behind
    ``Cf(u, v)`` has length element ``sqrt(1+v^2) dy``.
    """
    if isinstance(f, RadialField):
        radial, full = f, unradialize(f)
    else:
        full = _symmetrize_y(f)
        ay = full.grid.axes[1]
        radial = radialize(full, GridSpec((half_axis(ay.max, ay.count // 2),)), tol=None)
    if radial.n != 2:
        raise ValueError("the V-line relation is two-dimensional")
    s = np.asarray([0.0, 0.25, 0.5, 1.0, 1.5, 2.0] if s_values is None else s_values, float)
    u = radial.x_grid.nodes(0)[::u_stride]
    cf = cone_values(radial, u[:, None], s)
    peak = float(np.max(np.abs(cf)))
    if peak == 0.0:
        return 0.0
    worst = 0.0
    for j, sj in enumerate(s):
        q = math.sqrt(1.0 + sj * sj)
        om = (1.0 / q, -sj / q)
        for i, ui in enumerate(u):
            pred = radon2d(full, om, ui / q) / q
            worst = max(worst, abs(cf[i, j] - pred))
    return worst / peak


def slant_integrated_data(g: ConeData, a, b: float, s: float) -> float:
    """``integral g(a*u2 + b, u2, s) du2`` along the u2 nodes (n = 3)."""
    if g.n != 3:
        raise ValueError("slant integration is defined for n = 3")
    a = float(np.atleast_1d(a)[0])
    a1, a2 = g.u_grid.axes
    u2 = a2.nodes
    line = a * u2 + b
    if line.min() < a1.min or line.max() > a1.max:
        warnings.warn("slanted line leaves the u grid; missing samples count as 0",
                      TruncationWarning, stacklevel=2)
    pts = np.stack([line, u2, np.full_like(u2, s)], axis=-1)
    return float(interp_grid(g.values, g.grid, pts, mirror_last=True).sum() * a2.spacing)


def slant_radon(f: RadialField, omega, t: float, quad_points: int | None = None) -> float:
    """Four-dimensional Radon value through the slant parametrisation.

    ``Rf(omega, t) = c * integral f(-omega'.tau/omega_1 + t c, tau) d tau`` with
    ``c = sqrt(1 + |omega'/omega_1|^2)``, evaluated by a tensor trapezoid
    rule over ``tau = (x2, y1, y2)`` with multilinear reads of ``f``.
    """
    if f.n != 3:
        raise ValueError("slant Radon relation is four-dimensional")
    om = np.asarray(omega, dtype=float)
    if om.shape != (4,) or om[0] == 0:
        raise ValueError("omega must be a 4-vector with omega_1 != 0")
    om = om / np.linalg.norm(om)
    c = math.sqrt(1.0 + float(np.sum((om[1:] / om[0]) ** 2)))
    a2 = f.x_grid.axes[1]
    az = f.z_grid.axes[0]
    if quad_points is None:
        tau1 = a2.nodes
        yax = Axis(-az.max, az.max, 2 * az.count, centered=True)
    else:
        tau1 = Axis(a2.min, a2.max, quad_points).nodes
        yax = Axis(-az.max, az.max, quad_points, centered=True)
    h1 = tau1[1] - tau1[0]
    T1, Y1, Y2 = np.meshgrid(tau1, yax.nodes, yax.nodes, indexing="ij")
    x1 = -(om[1] * T1 + om[2] * Y1 + om[3] * Y2) / om[0] + t * c
    pts = np.stack([x1, T1, np.hypot(Y1, Y2)], axis=-1)
    vals = interp_grid(f.values, f.grid, pts, mirror_last=True)
    return float(c * vals.sum() * h1 * yax.spacing ** 2)


def slant_direction(a: float, v_abs: float, beta: float = 0.0) -> np.ndarray:
    """Unit normal ``(-1, a, alpha)/norm`` with ``|alpha|^2 = |v|^2 (1 + a^2)``."""
    alpha = v_abs * math.sqrt(1.0 + a * a)
    return np.array([-1.0, a, alpha * math.cos(beta), alpha * math.sin(beta)])


# --------------------------------------------------------------------------
# Compton kinematics


def compton_angle(E: float, dE: float, mc2: float = ELECTRON_REST_ENERGY_KEV) -> float:
    """Scattering angle from ``cos psi = 1 - mc2*dE/((E - dE)*E)``."""
    if not (0 < dE < E):
        raise InvalidMeasurement(f"need 0 < dE < E, got dE={dE}, E={E}")
    c = 1.0 - mc2 * dE / ((E - dE) * E)
    if not -1.0 <= c <= 1.0:
        raise KinematicallyImpossible(f"cos(psi) = {c:.6g} lies outside [-1, 1]")
    return math.acos(c)
