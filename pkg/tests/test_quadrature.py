"""Grids, masked integration, the collar rule, and principal values."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bogovskii.domain import make_bump
from bogovskii.kernel import eval_K1
from bogovskii.quadrature import (Grid, collar_nodes, fd_gradient, integrate_values,
                                  pv_integral)

# pv of z1*z2/|z|^4 against exp(-|y-c|^2/sigma^2), sigma = 0.2, c = (0.1, -0.05),
# over [-1,1]^2 with the singularity at the origin; frozen from a theta-first
# polar oracle (8192-point angular trapezoid, 800-point radial Gauss; the
# angular average of cos*sin kills the 1/r term, and the corner region beyond
# the inscribed disk contributes only ~2e-11)
PV_MODEL_KERNEL = -0.15986227754190874


def gaussian_density(p):
    d = p - np.array([0.1, -0.05])
    return np.exp(-(d[..., 0] ** 2 + d[..., 1] ** 2) / 0.04)


def model_kernel(p):
    r2 = p[..., 0] ** 2 + p[..., 1] ** 2
    return p[..., 0] * p[..., 1] / (r2 * r2)


# -- grids and masked integration -------------------------------------------

def test_disk_area(disk):
    grid = Grid.from_domain(disk, 0.02)
    area = float(np.sum(grid.vol))
    assert abs(area - np.pi) <= 2e-3


def test_integrate_odd_field_cancels(disk):
    grid = Grid.from_domain(disk, 0.02)
    pts = grid.points()
    vals = pts[..., 0] * np.exp(-(pts[..., 0] ** 2 + pts[..., 1] ** 2))
    assert abs(integrate_values(grid, vals)) <= 1e-12


def test_integrate_zero_field(disk_grid):
    assert integrate_values(disk_grid, np.zeros(disk_grid.shape)) == 0.0


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_integrate_linear(a, b):
    grid = Grid.box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 0.1)
    pts = grid.points()
    f = np.sin(3 * pts[..., 0]) * pts[..., 1]
    g = np.cos(pts[..., 0] + pts[..., 1])
    lhs = integrate_values(grid, a * f + b * g)
    rhs = a * integrate_values(grid, f) + b * integrate_values(grid, g)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_grid_interp_exact_on_affine():
    grid = Grid.box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 0.1)
    vals = 2.0 * grid.points()[..., 0] - 0.5 * grid.points()[..., 1] + 0.25
    rng = np.random.default_rng(3)
    q = rng.uniform(-0.8, 0.8, size=(50, 2))
    got = grid.interp(vals, q)
    want = 2.0 * q[:, 0] - 0.5 * q[:, 1] + 0.25
    assert np.max(np.abs(got - want)) <= 1e-12


def test_node_lookup_round_trip(disk_grid):
    pts = disk_grid.points()
    x = pts[(31, 47)]
    node, idx = disk_grid.node_at(x)
    assert np.max(np.abs(node - x)) <= 1e-13
    assert tuple(idx) == (31, 47)


# -- collar rule ------------------------------------------------------------

def test_collar_full_square_area():
    offs, w = collar_nodes(2, 0.3, 0.0)
    assert abs(w.sum() - 4 * 0.3 ** 2) <= 1e-12
    assert np.max(np.abs(offs)) <= 0.3 + 1e-12


def test_collar_square_minus_disk_area():
    a, eps = 0.3, 0.2
    offs, w = collar_nodes(2, a, eps)
    assert abs(w.sum() - (4 * a * a - np.pi * eps * eps)) <= 1e-8
    r = np.linalg.norm(offs, axis=1)
    assert np.all(r >= eps - 1e-12)


def test_collar_cube_volume_3d():
    offs, w = collar_nodes(3, 0.25, 0.0, n_ang=12, n_rad=8)
    assert abs(w.sum() - 8 * 0.25 ** 3) <= 1e-6


# -- principal values -------------------------------------------------------

def test_pv_zero_density(disk_grid):
    res = pv_integral(disk_grid, np.zeros(disk_grid.shape),
                      disk_grid.points()[(50, 50)], model_kernel,
                      (0.16, 0.08))
    assert float(res.value) == 0.0


def test_pv_model_kernel_matches_polar_oracle():
    h = 2.0 / 511
    grid = Grid.box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), h)
    dens = gaussian_density(grid.points())
    res = pv_integral(grid, dens, np.zeros(2), model_kernel,
                      (0.04, 0.02, 0.01), n_ang=32, n_rad=16)
    assert abs(float(res.value) - PV_MODEL_KERNEL) <= 1e-4
    assert res.defect < 5e-3


def test_pv_odd_kernel_constant_density_levels_vanish():
    def odd_kernel(p):
        r = np.linalg.norm(p, axis=-1)
        return p[..., 0] / r ** 3

    # odd cell count so the origin is a node and the node set is symmetric
    grid = Grid.box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 2.0 / 101)
    res = pv_integral(grid, np.ones(grid.shape), np.zeros(2), odd_kernel,
                      (0.16, 0.08))
    assert np.max(np.abs(res.levels)) <= 1e-10


def test_pv_k1_truncation_nearly_eps_independent(disk, disk_mol):
    """The spherical cancellation of K1 makes the truncated integrals
    almost independent of the truncation radius."""
    grid = Grid.from_domain(disk, 0.02)
    y0 = grid.points()[(52, 51)]

    def kernel(p):
        return eval_K1(y0, p - y0, disk_mol, disk.cutoff)

    res = pv_integral(grid, np.ones(grid.shape), y0, kernel,
                      (0.16, 0.08), n_ang=24, n_rad=12)
    assert res.defect <= 1e-3


def test_pv_rejects_bad_eps_lists(disk_grid):
    x = disk_grid.points()[(50, 50)]
    dens = np.ones(disk_grid.shape)
    with pytest.raises(ValueError):
        pv_integral(disk_grid, dens, x, model_kernel, (0.1,))
    with pytest.raises(ValueError):
        pv_integral(disk_grid, dens, x, model_kernel, (0.08, 0.16))
    with pytest.raises(ValueError):
        # smallest level below two grid steps
        pv_integral(disk_grid, dens, x, model_kernel, (0.16, 0.01))


def test_pv_rejects_off_node_point(disk_grid):
    x = disk_grid.points()[(50, 50)] + 0.3 * disk_grid.h
    with pytest.raises(ValueError):
        pv_integral(disk_grid, np.ones(disk_grid.shape), x, model_kernel,
                    (0.16, 0.08))


# -- finite differences -----------------------------------------------------

def test_fd_gradient_exact_on_affine():
    grid = Grid.box(np.array([0.0, 0.0]), np.array([1.0, 1.0]), 0.05)
    pts = grid.points()
    vals = 3.0 * pts[..., 0] - 2.0 * pts[..., 1] + 1.0
    grad, codes = fd_gradient(grid, vals)
    assert np.max(np.abs(grad[..., 0] - 3.0)) <= 1e-12
    assert np.max(np.abs(grad[..., 1] + 2.0)) <= 1e-12


def test_fd_gradient_constant_is_zero(disk_grid):
    grad, codes = fd_gradient(disk_grid, np.full(disk_grid.shape, 7.5))
    assert np.max(np.abs(grad)) == 0.0


def test_fd_gradient_trig_accuracy():
    grid = Grid.box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 0.01)
    pts = grid.points()
    vals = np.sin(pts[..., 0]) * np.cos(pts[..., 1])
    grad, codes = fd_gradient(grid, vals)
    exact = np.stack([np.cos(pts[..., 0]) * np.cos(pts[..., 1]),
                      -np.sin(pts[..., 0]) * np.sin(pts[..., 1])], axis=-1)
    inner = grid.interior_mask(1)
    err = np.max(np.abs((grad - exact)[inner]))
    assert err <= 1e-3


def test_fd_gradient_second_order():
    errs = []
    hs = (0.04, 0.02, 0.01)
    for h in hs:
        grid = Grid.box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), h)
        pts = grid.points()
        vals = np.sin(2 * pts[..., 0] + pts[..., 1])
        grad, _ = fd_gradient(grid, vals)
        exact = np.stack([2 * np.cos(2 * pts[..., 0] + pts[..., 1]),
                          np.cos(2 * pts[..., 0] + pts[..., 1])], axis=-1)
        inner = grid.interior_mask(1)
        errs.append(np.max(np.abs((grad - exact)[inner])))
    slopes = np.diff(np.log(errs)) / np.diff(np.log(hs))
    assert np.min(slopes) >= 1.8
