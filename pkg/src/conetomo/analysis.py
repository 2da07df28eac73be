"""Norms and executable checks of the transform's identities.

Every checker returns a plain number (ratio, residual, margin or
coefficient of variation) together with a status, so that sweeps can be
tabulated with :func:`write_report`.

Several identities (isometry, Sobolev estimate, Plancherel) integrate the
data over all slopes.  :func:`sample_cone` therefore evaluates the cone
transform on its own slope nodes, with a separate u window per slope that
follows the spreading support ``|u - c| <= R sqrt(1 + s^2)``.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .fields import (SPHERE_AREA, Axis, ConeData, GridSpec, RadialField, half_line_weights,
                     radialize, unradialize)
from .forward import backproject, cone_transform, cone_values
from .spectral import (SpectralField, _freq_norm, _power, apply_radial_multiplier, dft_forward,
                       dft_inverse, trusted_slices)

logger = logging.getLogger(__name__)

DEGENERATE = "degenerate"
OK = "ok"
FAIL = "fail"


@dataclass(frozen=True)
class CheckResult:
    """A scalar outcome; ``value`` is nan when the check is degenerate."""

    name: str
    value: float
    status: str = OK
    detail: dict = field(default_factory=dict)

    def __float__(self) -> float:
        return float(self.value)


# --------------------------------------------------------------------------
# norms


def _dft_power(values: np.ndarray, axes_list: Sequence[Axis], axes: Sequence[int],
               pad: int = 1):
    """``|F_1 values|^2`` (unshifted) and ``|xi|`` on the dual grid, plus the dual cell.

    ``pad`` refines the dual grid; it matters for weights such as ``|xi|``
    whose kink at 0 spoils the spectral accuracy of the plain sum.
    """
    shape = [a.count * pad for a in axes_list]
    c = sfft.fftn(values, s=shape, axes=tuple(axes))
    h = float(np.prod([a.spacing for a in axes_list]))
    xi = _freq_norm(axes_list, shape, False)
    dual = float(np.prod([2 * np.pi / (m * a.spacing) for a, m in zip(axes_list, shape)]))
    return np.abs(c * h) ** 2, xi, dual


def _expand(xi: np.ndarray, ndim: int) -> np.ndarray:
    return xi.reshape(xi.shape + (1,) * (ndim - xi.ndim))


def weighted_norm(f: RadialField, gamma: float = 0.0) -> float:
    """Squared norm ``integral |F_1 f(xi, z)|^2 (1 + |xi|^2)^gamma z^{n-2} dz dxi``."""
    d = f.n - 1
    pw, xi, dual = _dft_power(f.values, f.x_grid.axes, range(d))
    w = _expand((1 + xi ** 2) ** gamma, pw.ndim)
    az = f.z_grid.axes[0]
    zw = half_line_weights(az, f.n)
    return float(np.sum(pw * w * zw) * dual)


def sobolev_norm(f, gamma: float = 0.0) -> float:
    """Squared norm ``integral |F f(xi, eta)|^2 (1 + |xi|^2)^gamma d xi d eta``.

    For a radial field this is ``(2 pi)^{n-1} |S^{n-2}|`` times
    :func:`weighted_norm` (Parseval in y together with polar coordinates).
    """
    if isinstance(f, RadialField):
        return (2 * np.pi) ** (f.n - 1) * SPHERE_AREA[f.n] * weighted_norm(f, gamma)
    d = f.n - 1
    pw, _, dual = _dft_power(f.values, f.grid.axes, range(f.values.ndim))
    xi = _freq_norm(f.grid.axes[:d], f.grid.shape[:d], False)
    w = _expand((1 + xi ** 2) ** gamma, pw.ndim)
    return float(np.sum(pw * w) * dual)


# --------------------------------------------------------------------------
# cone samples on slope-adapted windows


@dataclass(frozen=True, eq=False)
class SlopeSamples:
    """Cone data on per-slope u windows.

    ``weights[j]`` integrates over ``s`` (including any change of variable);
    the measure on the v space is ``weights[j] * s[j]^{n-2} * |S^{n-2}|``.
    """

    n: int
    s: np.ndarray
    weights: np.ndarray
    windows: tuple[GridSpec, ...]
    values: tuple[np.ndarray, ...]

    @property
    def v_weights(self) -> np.ndarray:
        return self.weights * self.s ** (self.n - 2) * SPHERE_AREA[self.n]


def support_ball(f: RadialField, rel: float = 1e-8) -> tuple[np.ndarray, float]:
    """Centre ``c`` (in x) and radius ``R`` with ``f = 0`` outside ``|(x - c, z)| <= R``."""
    d = f.n - 1
    mag = np.abs(f.values)
    peak = mag.max()
    if peak == 0:
        return np.zeros(d), 0.0
    x_mass = mag.sum(axis=-1)
    mesh = f.x_grid.mesh()
    c = np.array([float(np.sum(m * x_mass) / x_mass.sum()) for m in mesh])
    idx = np.nonzero(mag > rel * peak)
    r2 = f.z_grid.nodes(0)[idx[-1]] ** 2
    for a in range(d):
        r2 = r2 + (f.x_grid.nodes(a)[idx[a]] - c[a]) ** 2
    h = math.hypot(*f.grid.spacing)
    return c, float(np.sqrt(r2.max())) + 2 * h


def slope_nodes(n_s: int, s_max: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes in ``phi = atan(s)`` over ``[0, pi/2)``, or uniform in s up to ``s_max``."""
    if s_max is None:
        dphi = 0.5 * np.pi / n_s
        phi = dphi * (np.arange(n_s) + 0.5)
        return np.tan(phi), dphi / np.cos(phi) ** 2
    h = s_max / n_s
    return h * (np.arange(n_s) + 0.5), np.full(n_s, h)


def _plane_values(f: RadialField, pts: np.ndarray, s: float) -> np.ndarray:
    d = f.n - 1
    cols = f.values.reshape(-1, f.values.shape[-1])
    keep = np.any(cols != 0, axis=1)
    mesh = np.meshgrid(*[a.nodes for a in f.x_grid.axes], indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=-1)[keep]
    az = f.z_grid.axes[0]
    raw = _kernels.plane_accumulate(np.ascontiguousarray(cols[keep]), np.ascontiguousarray(xs),
                                    az.origin, az.spacing, np.ascontiguousarray(pts),
                                    np.array([s]))
    return raw[:, 0] * f.x_grid.cell_volume / s ** d


def sample_cone(f: RadialField, *, n_s: int = 32, points: int | None = None,
                s_max: float | None = None, ball: tuple | None = None,
                n_theta: int | None = None) -> SlopeSamples:
    """Cone transform of ``f`` on slope-adapted windows.

    Slopes ``s <= 1`` use the ring quadrature of :func:`cone_values`; steeper
    cones are integrated over the x hyperplane, where ``dz`` shrinks with
    ``1/s`` and z-stepping would undersample the rays.
    """
    n = f.n
    points = (128 if n == 2 else 48) if points is None else points
    s, w = slope_nodes(n_s, s_max)
    c, R = support_ball(f) if ball is None else ball
    R = max(R, 1e-3)
    windows, values = [], []
    for sj in s:
        half = R * math.sqrt(1 + sj * sj)
        win = GridSpec(tuple(Axis(ci - half, ci + half, points) for ci in c))
        mesh = np.meshgrid(*[a.nodes for a in win.axes], indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        if sj <= 1.0:
            vals = cone_values(f, pts, np.array([sj]), n_theta)[:, 0]
        else:
            vals = _plane_values(f, pts, float(sj))
        windows.append(win)
        values.append(vals.reshape(win.shape))
    return SlopeSamples(n, s, w, tuple(windows), tuple(values))


def _mixed_sum(samples: SlopeSamples, gamma: float, xi_power: float, pad: int = 4) -> float:
    """``sum_j vw_j integral |xi|^p |F_1 g_j|^2 (1+|xi|^2)^gamma d xi``."""
    total = 0.0
    for wj, win, vals in zip(samples.v_weights, samples.windows, samples.values):
        pw, xi, dual = _dft_power(vals, win.axes, range(vals.ndim), pad if xi_power else 1)
        total += wj * float(np.sum(pw * _power(xi, xi_power) * (1 + xi ** 2) ** gamma)) * dual
    return total


# --------------------------------------------------------------------------
# identity checks


def check_isometry(f: RadialField, gamma: float = 0.0, *, samples: SlopeSamples | None = None,
                   **kw) -> CheckResult:
    """``||f||_gamma^2`` over the mixed data norm ``integral |xi|^{n-1} |F_1 Cf|^2 (1+|xi|^2)^gamma``.

    The mixed norm uses ``F_1`` in u and plain quadrature over the slopes,
    so the exact ratio is 1.
    """
    if not np.any(f.values):
        return CheckResult("isometry", math.nan, DEGENERATE, {"gamma": gamma})
    samples = sample_cone(f, **kw) if samples is None else samples
    lhs = sobolev_norm(f, gamma)
    rhs = _mixed_sum(samples, gamma, f.n - 1)
    return CheckResult("isometry", lhs / rhs, OK, {"gamma": gamma, "lhs": lhs, "rhs": rhs})


def check_sobolev_estimate(f: RadialField, gamma: float = 0.0, *,
                           samples: SlopeSamples | None = None, **kw) -> CheckResult:
    """``(2 pi)^{(1-n)/2} ||Cf||_{gamma + (n-1)/2} - ||f||_gamma`` (should be >= 0).

    ``||Cf||^2`` is the full Sobolev norm on ``(u, v)``, i.e.
    ``(2 pi)^{n-1} integral |F_1 Cf|^2 (1+|xi|^2)^{gamma'} d xi dv``.
    """
    n = f.n
    if not np.any(f.values):
        return CheckResult("sobolev_estimate", 0.0, OK, {"gamma": gamma})
    samples = sample_cone(f, **kw) if samples is None else samples
    lhs = math.sqrt(sobolev_norm(f, gamma))
    cf2 = (2 * np.pi) ** (n - 1) * _mixed_sum(samples, gamma + (n - 1) / 2, 0.0)
    rhs = (2 * np.pi) ** ((1 - n) / 2) * math.sqrt(cf2)
    margin = rhs - lhs
    return CheckResult("sobolev_estimate", margin, OK if margin >= 0 else FAIL,
                       {"gamma": gamma, "lhs": lhs, "rhs": rhs})


def _joint_ball(f: RadialField, g: RadialField):
    cf, rf = support_ball(f)
    cg, rg = support_ball(g)
    if rf == 0:
        return cg, rg
    if rg == 0:
        return cf, rf
    c = 0.5 * (cf + cg)
    return c, max(rf + np.linalg.norm(c - cf), rg + np.linalg.norm(c - cg))


def _embed(a: np.ndarray, pad: int) -> np.ndarray:
    """Centre ``a`` in a zero array ``pad`` times larger along every axis."""
    out = np.zeros([m * pad for m in a.shape])
    lo = [(m * (pad - 1)) // 2 for m in a.shape]
    out[tuple(slice(l, l + m) for l, m in zip(lo, a.shape))] = a
    return out


def check_plancherel(f: RadialField, g: RadialField, k: float = 0.0, *, n_s: int = 32,
                     points: int | None = None, pad: int = 4, **kw) -> CheckResult:
    """Relative gap between ``<f, g>`` and ``(2 pi)^{1-n} <I^{-k} Cf, I^{k+1-n} Cg>``.

    The data inner product is ``integral integral . du dv``; the filters are
    applied per slope on windows zero-padded ``pad``-fold.
    """
    n = f.n
    if not 0 <= k < n - 1:
        raise ValueError(f"k must satisfy 0 <= k < {n - 1}")
    lhs = f.inner(g)
    if not np.any(f.values) or not np.any(g.values):
        return CheckResult("plancherel", 0.0, OK, {"k": k, "lhs": lhs, "rhs": 0.0})
    ball = _joint_ball(f, g)
    sf = sample_cone(f, n_s=n_s, points=points, ball=ball, **kw)
    sg = sample_cone(g, n_s=n_s, points=points, ball=ball, **kw)
    rhs = 0.0
    axes = tuple(range(n - 1))
    for wj, win, a, b in zip(sf.v_weights, sf.windows, sf.values, sg.values):
        # filter on a zero-padded window so the slowly decaying filtered tails stay in
        wide = GridSpec(tuple(ax.extended(pad) for ax in win.axes))
        a, b = _embed(a, pad), _embed(b, pad)
        fa = apply_radial_multiplier(a, wide, axes, lambda r: _power(r, k)) if k else a
        fb = apply_radial_multiplier(b, wide, axes, lambda r: _power(r, n - 1 - k))
        rhs += wj * float(np.sum(fa * fb)) * wide.cell_volume
    rhs *= (2 * np.pi) ** (1 - n)
    scale = max(abs(lhs), abs(rhs))
    res = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return CheckResult("plancherel", res, OK, {"k": k, "lhs": lhs, "rhs": rhs})


def _x_conv(a: np.ndarray, b: np.ndarray, x_grid: GridSpec) -> np.ndarray:
    """Zero-padded linear convolution over the leading x axes, sampled on ``x_grid``.

    Product samples sit at ``2*origin + m*h``; node ``i`` of the grid is
    ``m = i - origin/h``, an integer for node-centred axes.
    """
    axes = tuple(range(x_grid.ndim))
    shape = [2 * m for m in x_grid.shape]
    conv = sfft.ifftn(sfft.fftn(a, shape, axes=axes) * sfft.fftn(b, shape, axes=axes),
                      axes=axes)
    conv = conv * x_grid.cell_volume
    for ax, ax_spec in enumerate(x_grid.axes):
        shift = -ax_spec.origin / ax_spec.spacing
        j0 = int(round(shift))
        if abs(shift - j0) > 1e-9:
            raise ValueError("x nodes must sit on integer multiples of the spacing")
        conv = np.take(conv, (np.arange(ax_spec.count) + j0) % shape[ax], axis=ax)
    return conv


def full_convolution(f: RadialField, g: RadialField) -> RadialField:
    """``f * g`` over ``R^n`` for two radial fields on the same grid.

    Both fields are unfolded to full fields and multiplied in Fourier space
    with the node phases of :func:`dft_forward`, which also takes care of
    the half-cell offset of the y nodes.  The product is periodic on the
    grid box, so both fields must be negligible near its border.
    """
    if f.grid != g.grid:
        raise ValueError("convolution needs fields on the same grid")
    F, G = unradialize(f), unradialize(g)
    SF, SG = dft_forward(F, "all"), dft_forward(G, "all")
    prod = SpectralField(SF.coeffs * SG.coeffs, SF.axes, F)
    return radialize(dft_inverse(prod), f.z_grid, tol=None)


def check_convolution(f: RadialField, g: RadialField, *, s_max: float = 2.0, n_s: int = 16,
                      n_theta: int | None = None) -> CheckResult:
    """Relative L2 gap between ``C(f * g)`` and the u-convolution ``Cf *_u Cg`` per slope.

    The convolution identity holds in u at fixed v; both convolutions are
    evaluated with zero-padded DFTs.
    """
    if not np.any(f.values) or not np.any(g.values):
        return CheckResult("convolution", 0.0, OK)
    d = f.n - 1
    for h in (f, g):
        rim = max(float(np.max(np.abs(np.take(h.values, [0, -1], axis=a)))) for a in range(d))
        rim = max(rim, float(np.max(np.abs(h.values[..., -1]))))
        if rim > 1e-6 * h.peak():
            warnings.warn("field is not small at the grid border; the convolution "
                          "may leave the grid", RuntimeWarning, stacklevel=2)
    fg = full_convolution(f, g)
    s_grid = GridSpec((Axis(0.0, s_max, n_s, centered=True),))
    lhs = cone_transform(fg, s_grid, n_theta=n_theta)
    Cf = cone_transform(f, s_grid, n_theta=n_theta)
    Cg = cone_transform(g, s_grid, n_theta=n_theta)
    rhs = _x_conv(Cf.values, Cg.values, f.x_grid).real
    diff = lhs.with_values(lhs.values - rhs)
    den = lhs.norm()
    return CheckResult("convolution", diff.norm() / den if den else 0.0, OK,
                       {"s_max": s_max})


def check_adjoint(f: RadialField, g: RadialField, *, n_theta: int | None = None) -> CheckResult:
    """Relative gap between ``<Cf, g>`` and ``<f, Cg>`` with the ``s^{n-2}``, ``z^{n-2}`` weights.

    ``g`` lives on the data space: its x grid is read as u and its z grid as s.
    """
    G = ConeData(g.n, g.x_grid, g.z_grid, g.values)
    lhs = cone_transform(f, g.z_grid, u_grid=g.x_grid, n_theta=n_theta).inner(G)
    rhs = f.inner(backproject(G, f, n_theta=n_theta))
    scale = max(abs(lhs), abs(rhs))
    res = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return CheckResult("adjoint", res, OK, {"lhs": lhs, "rhs": rhs})


# --------------------------------------------------------------------------
# range and support


def slice_masses(F: ConeData) -> np.ndarray:
    """``integral F(u, s) du`` for every s slice."""
    d = F.n - 1
    return F.values.sum(axis=tuple(range(d))) * F.u_grid.cell_volume


def trusted_window(F: ConeData, support_radius: float | None = None,
                   z_max: float | None = None) -> np.ndarray:
    """Slices whose transported support stays on the u grid.

    With a known support radius and height this is ``s <= (u_max - R)/z_max``;
    otherwise the leading run of slices that have decayed at the u border.
    """
    if support_radius is not None and z_max is not None:
        u_max = min(min(abs(a.min), abs(a.max)) for a in F.u_grid.axes)
        s_trust = (u_max - support_radius) / z_max
        return np.nonzero(F.s_grid.nodes(0) <= s_trust)[0]
    return trusted_slices(F)


def check_range_mass(F: ConeData, support_radius: float | None = None,
                     z_max: float | None = None) -> CheckResult:
    """Coefficient of variation of the slice masses over the trusted window."""
    idx = trusted_window(F, support_radius, z_max)
    m = slice_masses(F)[idx]
    if idx.size < 2 or np.all(m == 0):
        return CheckResult("range_mass", math.nan, DEGENERATE, {"slices": int(idx.size)})
    mean = float(np.mean(m))
    cv = float(np.std(m) / abs(mean)) if mean != 0 else math.inf
    return CheckResult("range_mass", cv, OK, {"slices": int(idx.size), "mass": mean})


@dataclass(frozen=True)
class SupportVerdict:
    data_inside: bool
    image_inside: bool
    data_excess: float
    image_excess: float

    @property
    def consistent(self) -> bool:
        return self.data_inside == self.image_inside


def check_support(f: RadialField, F: ConeData, eps: float = 1e-3) -> SupportVerdict:
    """Both sides of the unit-ball support theorem.

    Data side: ``max |F|`` over ``|u| > sqrt(1 + s^2)`` relative to the data
    peak; image side: ``max |f|`` over ``|x|^2 + z^2 > 1`` relative to the
    image peak.
    """
    u = F.u_grid.mesh()
    s = F.s_grid.nodes(0)
    ur = np.sqrt(sum(m ** 2 for m in u))
    outside_d = _expand(ur, F.values.ndim) > np.sqrt(1 + s ** 2)
    x = f.x_grid.mesh()
    xr2 = _expand(sum(m ** 2 for m in x), f.values.ndim)
    outside_i = xr2 + f.z_grid.nodes(0) ** 2 > 1
    pd, pi = F.peak(), f.peak()
    de = float(np.max(np.abs(F.values) * outside_d) / pd) if pd > 0 else 0.0
    ie = float(np.max(np.abs(f.values) * outside_i) / pi) if pi > 0 else 0.0
    return SupportVerdict(de < eps, ie < eps, de, ie)


# --------------------------------------------------------------------------
# report


REPORT_FIELDS = ("checker", "phantom", "parameters", "residual", "threshold", "passed")


@dataclass(frozen=True)
class ReportRow:
    checker: str
    phantom: str
    parameters: str
    residual: float
    threshold: str
    passed: bool


def write_report(rows: Iterable[ReportRow], path, header: Sequence[str] = ()) -> None:
    """CSV report; ``header`` lines are written first, each prefixed with ``#``."""
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(REPORT_FIELDS)
        for r in rows:
            w.writerow([r.checker, r.phantom, r.parameters, f"{r.residual:.6g}",
                        r.threshold, "pass" if r.passed else "fail"])
