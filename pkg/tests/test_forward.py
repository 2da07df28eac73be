import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conetomo.fields import (GaussianBlob, TruncationWarning,
                             gaussian_mixture_phantom, make_gaussian_phantom, radial_grids,
                             unradialize, zeros_like)
from conetomo.forward import (InvalidMeasurement, KinematicallyImpossible, backproject,
                              compton_angle, cone_transform, cone_transform_closed_form,
                              cone_transform_direct, radon2d, s_axis, slant_direction,
                              slant_integrated_data, slant_radon, vline_radon_relation_residual)


def _gauss(n, N, X=8.0, **kw):
    xg, zg = radial_grids(n, X, N, X, N // 2)
    return make_gaussian_phantom(n, x_grid=xg, z_grid=zg, **kw)


def test_n2_gaussian_matches_closed_form():
    f = _gauss(2, 256)
    F = cone_transform(f, s_axis(4.0, 32))
    u = f.x_grid.nodes(0)[:, None]
    s = F.s_grid.nodes(0)[None, :]
    exact = np.sqrt(2 * np.pi / (1 + s ** 2)) * np.exp(-u ** 2 / (2 * (1 + s ** 2)))
    assert np.max(np.abs(F.values - exact)) / exact.max() < 1e-3


def test_n3_gaussian_matches_closed_form_coarse():
    f = _gauss(3, 32)
    F = cone_transform(f, s_axis(2.0, 8))
    exact = cone_transform_closed_form(3, [GaussianBlob((0.0, 0.0))], F.u_grid, F.s_grid)
    assert np.max(np.abs(F.values - exact.values)) / exact.peak() < 5e-3


def test_offcentre_mixture_matches_closed_form():
    xg, zg = radial_grids(2, 8.0, 256)
    blobs = [GaussianBlob((1.5,), 0.6), GaussianBlob((-1.0,), 0.9, 0.5)]
    f = gaussian_mixture_phantom(2, blobs, x_grid=xg, z_grid=zg)
    F = cone_transform(f, s_axis(3.0, 16))
    exact = cone_transform_closed_form(2, blobs, F.u_grid, F.s_grid)
    assert np.max(np.abs(F.values - exact.values)) / exact.peak() < 2e-3


def test_zero_field_gives_zero_data():
    f = zeros_like(_gauss(2, 32))
    assert not np.any(cone_transform(f, s_axis(2.0, 8)).values)


def test_truncation_warning_when_rays_leave_grid():
    f = _gauss(2, 32, X=4.0)
    with pytest.warns(TruncationWarning):
        cone_transform(f, s_axis(4.0, 8))


def test_direct_evaluation_agrees_with_grid_transform():
    f = _gauss(2, 128)
    F = cone_transform(f, s_axis(2.0, 8))
    full = unradialize(f)
    i, j = 70, 3
    u, s = f.x_grid.nodes(0)[i], F.s_grid.nodes(0)[j]
    assert cone_transform_direct(full, [u], [s]) == pytest.approx(F.values[i, j], rel=1e-3)


@pytest.mark.parametrize("n", [2, 3])
def test_backprojection_is_adjoint(n):
    f = _gauss(n, 24 if n == 3 else 64, X=6.0)
    xg, zg = radial_grids(n, 6.0, 24 if n == 3 else 64)
    g_r = make_gaussian_phantom(n, (0.5,) * (n - 1), 0.7, x_grid=xg, z_grid=zg)
    from conetomo.fields import ConeData
    sg = s_axis(2.0, 8)
    G = ConeData(n, xg, sg, np.broadcast_to(g_r.values[..., :1], xg.shape + (8,)) * 1.0)
    lhs = cone_transform(f, sg, u_grid=xg).inner(G)
    rhs = f.inner(backproject(G, f))
    assert abs(lhs - rhs) / abs(lhs) < 1e-9


def test_radon_relation_residual_small():
    assert vline_radon_relation_residual(_gauss(2, 128)) < 1e-3


def test_radon2d_of_gaussian():
    full = unradialize(_gauss(2, 256))
    # projections of the unit 2-D Gaussian are sqrt(2 pi) exp(-t^2/2)
    for t in (0.0, 0.7, 1.5):
        val = radon2d(full, (0.6, 0.8), t)
        assert val == pytest.approx(math.sqrt(2 * math.pi) * math.exp(-t * t / 2), rel=1e-3)


def test_slant_direction_constraint():
    om = slant_direction(0.7, 1.3, 0.4)
    assert np.hypot(om[2], om[3]) ** 2 == pytest.approx(1.3 ** 2 * (1 + 0.7 ** 2))


@pytest.mark.parametrize("exc,args", [(InvalidMeasurement, (100.0, 0.0)),
                                      (InvalidMeasurement, (100.0, 150.0)),
                                      (KinematicallyImpossible, (100.0, 95.0))])
def test_compton_angle_errors(exc, args):
    with pytest.raises(exc):
        compton_angle(*args)


def test_compton_angle_value():
    E, dE = 662.0, 200.0
    c = 1 - 510.99895 * dE / ((E - dE) * E)
    assert compton_angle(E, dE) == pytest.approx(math.acos(c))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 2.0))
def test_transform_is_linear(c):
    f = _gauss(2, 64)
    sg = s_axis(2.0, 8)
    a = cone_transform(f * c, sg).values
    b = c * cone_transform(f, sg).values
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_slant_helpers_require_n3():
    f = _gauss(2, 32)
    with pytest.raises(ValueError):
        slant_radon(f, (1, 0, 0, 0), 0.0)
    with pytest.raises(ValueError):
        slant_integrated_data(cone_transform(f, s_axis(1.0, 4)), 0.0, 0.0, 0.5)
