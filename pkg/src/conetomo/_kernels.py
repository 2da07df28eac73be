"""Compiled inner loops: Bessel functions and the cone quadrature kernels.

The cone kernels serve both the forward transform and backprojection.  A
source stack ``src[k]`` (one slice per z or s node) is read on rings of
radius ``radii[j, k]`` about every output point and accumulated with weights
``weights[j, k]``.  Reads outside a slice return 0.
"""

import math

import numpy as np
from numba import njit

_TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# Bessel J


@njit(cache=True)
def _j_series(nu, x):
    if x == 0.0:
        if nu == 0.0:
            return 1.0
        return 0.0 if nu > 0 else math.inf
    half = 0.5 * x
    term = math.exp(nu * math.log(half) - math.lgamma(nu + 1.0))
    total = term
    q = -half * half
    m = 0
    while m < 500:
        m += 1
        term *= q / (m * (m + nu))
        total += term
        if m > half and abs(term) <= 1e-17 * abs(total):
            break
    return total


@njit(cache=True)
def _j_asymptotic(nu, x):
    mu = 4.0 * nu * nu
    p = 1.0
    q = 0.0
    t = 1.0
    prev = math.inf
    for k in range(1, 60):
        t *= (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        if abs(t) > prev or t == 0.0:
            break
        prev = abs(t)
        sign = 1.0 if (k // 2) % 2 == 0 else -1.0
        if k % 2 == 0:
            p += sign * t
        else:
            q += sign * t
        if abs(t) < 1e-17:
            break
    w = x - 0.5 * nu * math.pi - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(w) - q * math.sin(w))


@njit(cache=True)
def _recur_up(j_lo, j_hi, nu_hi, nu, x):
    # start from J_{nu_hi - 1} = j_lo, J_{nu_hi} = j_hi
    a, b, order = j_lo, j_hi, nu_hi
    while order < nu - 1e-12:
        a, b = b, 2.0 * order / x * b - a
        order += 1.0
    return b


@njit(cache=True)
def bessel_j_scalar(nu, x):
    twice = 2.0 * nu
    if twice != math.floor(twice) or twice < -1.0:
        return math.nan
    if x < 0.0:
        return math.nan
    half_int = (int(twice) % 2) != 0
    if half_int:
        if x == 0.0:
            return math.inf if nu < 0 else 0.0
        c = math.sqrt(2.0 / (math.pi * x))
        jm, jp = c * math.cos(x), c * math.sin(x)
        if nu == -0.5:
            return jm
        if nu == 0.5:
            return jp
        if x >= 12.0 and x > nu:
            return _recur_up(jm, jp, 0.5, nu, x)
        return _j_series(nu, x)
    if x < 12.0:
        return _j_series(nu, x)
    if nu <= 1.0:
        return _j_asymptotic(nu, x)
    if x > nu:
        return _recur_up(_j_asymptotic(0.0, x), _j_asymptotic(1.0, x), 1.0, nu, x)
    return _j_series(nu, x)


@njit(cache=True)
def _bessel_flat(nu, x):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = bessel_j_scalar(nu, x[i])
    return out


def bessel_j_array(nu, x):
    arr = np.asarray(x, dtype=float)
    return _bessel_flat(float(nu), np.ascontiguousarray(arr).ravel()).reshape(arr.shape)


# --------------------------------------------------------------------------
# cone kernels


@njit(cache=True, fastmath=False)
def vline_accumulate(src, origin, h, points, radii, weights, lo, hi):
    """out[p, j] = sum_k w[j,k] (src_k(p + r[j,k]) + src_k(p - r[j,k]))."""
    K, nx = src.shape
    P = points.size
    J = radii.shape[0]
    out = np.zeros((P, J))
    for p in range(P):
        u = points[p]
        for j in range(J):
            acc = 0.0
            for k in range(K):
                w = weights[j, k]
                if w == 0.0 or lo[k] > hi[k]:
                    continue
                r = radii[j, k]
                for sgn in (1.0, -1.0):
                    x = u + sgn * r
                    if x < lo[k] or x > hi[k]:
                        continue
                    t = (x - origin) / h
                    i = int(math.floor(t))
                    a = t - i
                    v = 0.0
                    if 0 <= i < nx:
                        v += (1.0 - a) * src[k, i]
                    if 0 <= i + 1 < nx:
                        v += a * src[k, i + 1]
                    acc += w * v
            out[p, j] = acc
    return out


@njit(cache=True, inline="always")
def _bilinear(img, ox, oy, ihx, ihy, px, py):
    nx, ny = img.shape
    tx = (px - ox) * ihx
    ty = (py - oy) * ihy
    if tx <= -1.0 or ty <= -1.0 or tx >= nx or ty >= ny:
        return 0.0
    i = int(math.floor(tx))
    j = int(math.floor(ty))
    a = tx - i
    b = ty - j
    v = 0.0
    if i >= 0:
        if j >= 0:
            v += (1.0 - a) * (1.0 - b) * img[i, j]
        if j + 1 < ny:
            v += (1.0 - a) * b * img[i, j + 1]
    if i + 1 < nx:
        if j >= 0:
            v += a * (1.0 - b) * img[i + 1, j]
        if j + 1 < ny:
            v += a * b * img[i + 1, j + 1]
    return v


@njit(cache=True, inline="always")
def _keys(t):
    # Catmull-Rom weights for taps at offsets -1, 0, 1, 2
    t2 = t * t
    t3 = t2 * t
    return (0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2))


@njit(cache=True, inline="always")
def _bicubic(img, ox, oy, ihx, ihy, px, py):
    nx, ny = img.shape
    tx = (px - ox) * ihx
    ty = (py - oy) * ihy
    if tx <= -2.0 or ty <= -2.0 or tx >= nx + 1 or ty >= ny + 1:
        return 0.0
    i = int(math.floor(tx))
    j = int(math.floor(ty))
    x0, x1, x2, x3 = _keys(tx - i)
    y0, y1, y2, y3 = _keys(ty - j)
    if 1 <= i < nx - 2 and 1 <= j < ny - 2:
        r0 = img[i - 1]
        r1 = img[i]
        r2 = img[i + 1]
        r3 = img[i + 2]
        return (x0 * (y0 * r0[j - 1] + y1 * r0[j] + y2 * r0[j + 1] + y3 * r0[j + 2])
                + x1 * (y0 * r1[j - 1] + y1 * r1[j] + y2 * r1[j + 1] + y3 * r1[j + 2])
                + x2 * (y0 * r2[j - 1] + y1 * r2[j] + y2 * r2[j + 1] + y3 * r2[j + 2])
                + x3 * (y0 * r3[j - 1] + y1 * r3[j] + y2 * r3[j + 1] + y3 * r3[j + 2]))
    wx = (x0, x1, x2, x3)
    wy = (y0, y1, y2, y3)
    v = 0.0
    for a in range(4):
        ii = i - 1 + a
        if ii < 0 or ii >= nx:
            continue
        row = 0.0
        for b in range(4):
            jj = j - 1 + b
            if 0 <= jj < ny:
                row += wy[b] * img[ii, jj]
        v += wx[a] * row
    return v


@njit(cache=True, inline="always")
def _sample(img, ox, oy, ihx, ihy, px, py, order):
    if order == 3:
        return _bicubic(img, ox, oy, ihx, ihy, px, py)
    return _bilinear(img, ox, oy, ihx, ihy, px, py)


@njit(cache=True)
def ring_accumulate(src, ox, oy, hx, hy, px, py, radii, weights, disks, ntheta, order):
    """out[p, j] = sum_k w[j,k] * dtheta * sum_theta src_k(p + r[j,k] theta).

    ``disks[k] = (cx, cy, R)`` bounds the support of slice k (R < 0: empty);
    only the arc of each ring inside that disk is visited.  ``order`` selects
    bilinear (1) or Catmull-Rom bicubic (3) reads.
    """
    ihx = 1.0 / hx
    ihy = 1.0 / hy
    K = src.shape[0]
    P = px.size
    J = radii.shape[0]
    dth = _TWO_PI / ntheta
    cos_t = np.cos(dth * np.arange(ntheta))
    sin_t = np.sin(dth * np.arange(ntheta))
    out = np.zeros((P, J))
    for k in range(K):
        R = disks[k, 2]
        if R < 0.0:
            continue
        img = src[k]
        cx = disks[k, 0]
        cy = disks[k, 1]
        for p in range(P):
            ux = px[p]
            uy = py[p]
            dx = cx - ux
            dy = cy - uy
            d = math.sqrt(dx * dx + dy * dy)
            phi = math.atan2(dy, dx)
            for j in range(J):
                w = weights[j, k]
                if w == 0.0:
                    continue
                r = radii[j, k]
                if r == 0.0:
                    if d <= R:
                        out[p, j] += w * _TWO_PI * _sample(img, ox, oy, ihx, ihy, ux, uy, order)
                    continue
                if d > r + R or r > d + R:
                    continue
                ring = 0.0
                if d + r <= R:
                    for i in range(ntheta):
                        ring += _sample(img, ox, oy, ihx, ihy,
                                        ux + r * cos_t[i], uy + r * sin_t[i], order)
                else:
                    c = (d * d + r * r - R * R) / (2.0 * d * r)
                    c = min(1.0, max(-1.0, c))
                    alpha = math.acos(c)
                    i_lo = int(math.ceil((phi - alpha) / dth))
                    i_hi = int(math.floor((phi + alpha) / dth))
                    if i_hi - i_lo + 1 > ntheta:
                        i_hi = i_lo + ntheta - 1
                    shift = ntheta * (1 + (-i_lo) // ntheta) if i_lo < 0 else 0
                    for ii in range(i_lo + shift, i_hi + shift + 1):
                        i = ii % ntheta
                        ring += _sample(img, ox, oy, ihx, ihy,
                                        ux + r * cos_t[i], uy + r * sin_t[i], order)
                out[p, j] += w * dth * ring
    return out


@njit(cache=True, inline="always")
def _column_read(col, i):
    # even extension about z = 0 for a cell-centred column; zero past the top
    if i < 0:
        i = -1 - i
    if i >= col.size:
        return 0.0
    return col[i]


@njit(cache=True)
def plane_accumulate(cols, xs, z_origin, hz, points, s_values):
    """out[p, j] = sum_m f(x_m, |x_m - u_p| / s_j) with Catmull-Rom reads in z.

    ``cols[m]`` is the z column of the field at x node ``xs[m]``.  This is
    the cone integral written over the x hyperplane, accurate for large s
    where the rays are nearly horizontal.
    """
    M, nz = cols.shape
    P = points.shape[0]
    d = points.shape[1]
    J = s_values.size
    ihz = 1.0 / hz
    top = z_origin + (nz + 1) * hz
    out = np.zeros((P, J))
    for p in range(P):
        for m in range(M):
            r2 = 0.0
            for a in range(d):
                t = xs[m, a] - points[p, a]
                r2 += t * t
            r = math.sqrt(r2)
            col = cols[m]
            for j in range(J):
                z = r / s_values[j]
                if z >= top:
                    continue
                t = (z - z_origin) * ihz
                i = int(math.floor(t))
                w0, w1, w2, w3 = _keys(t - i)
                out[p, j] += (w0 * _column_read(col, i - 1) + w1 * _column_read(col, i)
                              + w2 * _column_read(col, i + 1) + w3 * _column_read(col, i + 2))
    return out
