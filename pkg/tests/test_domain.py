"""Domain geometry: shapes, star checks, mollifiers, zero-mean splitting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bogovskii.domain import (Ball, Box, LipschitzDomain, StarDomain,
                              StarPolygon, domain_from_config, make_bump,
                              mollifier_from_config, split_zero_mean,
                              star_check)
from bogovskii.errors import InvalidDomain, MeanNotZero, SupportViolation
from bogovskii.quadrature import Grid, integrate_values

# unit bump mass (integral of exp(-1/(1-|z|^2)) over the unit ball), frozen
# from full-dimensional adaptive dblquad; the library integrates the radial
# profile instead, so agreement is a real cross-check
UNIT_BUMP_MASS_2D = 0.4665123931783301
UNIT_BUMP_MASS_3D = 0.44108888727660434


def five_pointed_star():
    ang = np.arange(10) * np.pi / 5 + np.pi / 2
    rad = np.where(np.arange(10) % 2 == 0, 1.0, 0.45)
    verts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1)
    return StarDomain(StarPolygon(verts), np.zeros(2), 0.2)


def l_shape_polygon(ball_center, ball_radius):
    verts = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]],
                     dtype=float)
    return StarDomain(StarPolygon(verts), ball_center, ball_radius)


# -- star checks ------------------------------------------------------------

def test_star_check_disk_passes(disk):
    rep = star_check(disk)
    assert rep.ok
    assert rep.violations == []
    assert rep.checked_segments > 0


def test_star_check_nonconvex_star_polygon_passes():
    rep = star_check(five_pointed_star())
    assert rep.ok


def test_star_check_flags_bad_ball_choice():
    """An L-shape is not star-shaped w.r.t. a ball sitting in one arm:
    segments toward the other arm cut through the missing corner."""
    dom = l_shape_polygon(np.array([1.3, 0.5]), 0.15)
    rep = star_check(dom)
    assert not rep.ok
    assert len(rep.violations) > 0
    ball_pt, boundary_pt, t, seg_pt = rep.violations[0]
    assert 0.0 < t < 1.0
    assert not dom.contains(seg_pt[None, :], tol=1e-12)[0]


def test_star_check_good_ball_choice_on_l_shape():
    # the kernel of this L-shape is the unit square, so a ball there works
    dom = l_shape_polygon(np.array([0.5, 0.5]), 0.3)
    assert star_check(dom).ok


def test_star_domain_rejects_ball_leaving_shape():
    with pytest.raises(InvalidDomain):
        StarDomain(Ball(np.zeros(2), 1.0), np.array([0.9, 0.0]), 0.35)


# -- mollifier --------------------------------------------------------------

def test_bump_normalization_matches_adaptive_quadrature():
    for radius in (0.35, 1.0):
        mol = make_bump(np.zeros(2), radius)
        expect = 1.0 / (radius ** 2 * UNIT_BUMP_MASS_2D)
        assert abs(mol.norm_const - expect) <= 1e-12 * expect
    mol3 = make_bump(np.zeros(3), 0.5)
    expect3 = 1.0 / (0.5 ** 3 * UNIT_BUMP_MASS_3D)
    assert abs(mol3.norm_const - expect3) <= 1e-12 * expect3


def test_bump_mass_on_grid_converges():
    b = make_bump(np.array([0.1, 0.05]), 0.3)
    errs = []
    for h in (0.02, 0.01):
        g = Grid.box(np.array([-0.5, -0.5]), np.array([0.7, 0.7]), h)
        errs.append(abs(integrate_values(g, b(g.points())) - 1.0))
    assert errs[0] <= 5e-6
    assert errs[1] <= 5e-7
    assert errs[1] < errs[0]


def test_bump_center_value_and_support():
    b = make_bump(np.array([0.2, -0.1]), 0.4)
    center_val = b(np.array([[0.2, -0.1]]))[0]
    assert abs(center_val - b.norm_const * np.exp(-1.0)) <= 1e-14 * center_val
    edge = np.array([[0.2 + 0.4, -0.1], [0.2, -0.1 + 0.41], [5.0, 5.0]])
    assert np.all(b(edge) == 0.0)
    assert np.all(b.grad(edge) == 0.0)
    inside = np.array([[0.3, 0.0], [0.1, -0.2]])
    assert np.all(b(inside) > 0.0)


def test_bump_gradient_matches_central_differences():
    b = make_bump(np.array([0.0, 0.0]), 0.5)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-0.3, 0.3, size=(20, 2))
    step = 1e-6
    g = b.grad(pts)
    for a in range(2):
        e = np.zeros(2)
        e[a] = step
        fd = (b(pts + e) - b(pts - e)) / (2 * step)
        assert np.max(np.abs(fd - g[:, a])) <= 1e-6 * max(1.0, np.max(np.abs(g)))


@settings(max_examples=30, deadline=None)
@given(cx=st.floats(-1, 1), cy=st.floats(-1, 1), r=st.floats(0.05, 1.0))
def test_bump_nonnegative_and_supported(cx, cy, r):
    b = make_bump(np.array([cx, cy]), r)
    rng = np.random.default_rng(0)
    pts = np.array([cx, cy]) + rng.uniform(-2 * r, 2 * r, size=(200, 2))
    vals = b(pts)
    assert np.all(vals >= 0.0)
    outside = np.linalg.norm(pts - [cx, cy], axis=1) >= r
    assert np.all(vals[outside] == 0.0)


def test_default_mollifier_sits_in_the_ball(disk):
    mol = disk.default_mollifier()
    assert np.allclose(mol.center, disk.ball_center)
    assert mol.radius <= disk.ball_radius + 1e-15


def test_cutoff_plateau_covers_domain(disk):
    chi = disk.cutoff
    pts = np.concatenate([disk.boundary_points(64),
                          np.zeros((1, 2)),
                          np.array([[0.7, -0.7]]) / np.sqrt(2)])
    assert np.all(chi(pts) == 1.0)
    far = np.array([[1.5, 0.0], [0.0, -2.0]])
    assert np.all(chi(far) == 0.0)


# -- zero-mean splitting ----------------------------------------------------

def two_square_union():
    a = StarDomain(Box(np.array([-1.0, -0.5]), np.array([0.2, 0.5])),
                   np.array([-0.4, 0.0]), 0.25)
    b = StarDomain(Box(np.array([-0.2, -0.5]), np.array([1.0, 0.5])),
                   np.array([0.4, 0.0]), 0.25)
    bump = make_bump(np.array([0.0, 0.0]), 0.18)
    return LipschitzDomain([a, b], [bump])


def test_split_single_piece_returns_input(disk):
    lip = LipschitzDomain([disk], [])
    grid = Grid.from_domain(disk, 0.02)
    f = make_bump(np.array([0.3, 0.0]), 0.2)(grid.points()) \
        - make_bump(np.array([-0.3, 0.0]), 0.2)(grid.points())
    parts, info = split_zero_mean(f, lip, grid)
    assert len(parts) == 1
    np.testing.assert_array_equal(parts[0], f)


def test_split_two_squares_partitions_exactly():
    lip = two_square_union()
    grid = Grid.box(np.array([-1.0, -0.5]), np.array([1.0, 0.5]), 0.02)
    pts = grid.points()
    f = make_bump(np.array([-0.6, 0.1]), 0.15)(pts) \
        - make_bump(np.array([0.6, -0.1]), 0.15)(pts)
    parts, info = split_zero_mean(f, lip, grid)
    assert len(parts) == 2
    l1 = integrate_values(grid, np.abs(f))
    recon = parts[0] + parts[1]
    assert np.max(np.abs(recon - f)) <= 1e-12 * np.max(np.abs(f))
    for i, part in enumerate(parts):
        assert abs(integrate_values(grid, part)) <= 1e-9 * l1
        outside = ~lip.pieces[i].contains(pts, tol=1e-12)
        assert np.all(part[outside & grid.mask] == 0.0)


def test_split_zero_field():
    lip = two_square_union()
    grid = Grid.box(np.array([-1.0, -0.5]), np.array([1.0, 0.5]), 0.05)
    parts, info = split_zero_mean(np.zeros(grid.shape), lip, grid)
    for part in parts:
        assert np.all(part == 0.0)


def test_split_rejects_nonzero_mean():
    lip = two_square_union()
    grid = Grid.box(np.array([-1.0, -0.5]), np.array([1.0, 0.5]), 0.05)
    f = make_bump(np.array([-0.5, 0.0]), 0.2)(grid.points())
    with pytest.raises(MeanNotZero):
        split_zero_mean(f, lip, grid)


def test_split_rejects_support_outside_union():
    lip = two_square_union()
    grid = Grid.box(np.array([-1.5, -0.5]), np.array([1.0, 0.5]), 0.05)
    pts = grid.points()
    f = make_bump(np.array([-1.3, 0.0]), 0.1)(pts) \
        - make_bump(np.array([0.5, 0.0]), 0.1)(pts)
    with pytest.raises(SupportViolation):
        split_zero_mean(f, lip, grid)


# -- config loading ---------------------------------------------------------

def test_domain_from_config_disk():
    dom = domain_from_config({
        "dim": 2,
        "shape": {"kind": "disk", "center": [0.0, 0.0], "radius": 1.0},
        "ball": {"center": [0.0, 0.0], "radius": 0.35},
    })
    assert isinstance(dom, StarDomain)
    assert dom.dim == 2
    assert star_check(dom).ok


def test_domain_from_config_rejects_unknown_kind():
    with pytest.raises(InvalidDomain):
        domain_from_config({
            "dim": 2,
            "shape": {"kind": "torus", "center": [0, 0], "radius": 1.0},
            "ball": {"center": [0, 0], "radius": 0.3},
        })


def test_mollifier_from_config_override():
    cfg = {
        "dim": 2,
        "shape": {"kind": "disk", "center": [0.0, 0.0], "radius": 1.0},
        "ball": {"center": [0.0, 0.0], "radius": 0.35},
        "mollifier": {"center": [0.1, 0.0], "radius": 0.2},
    }
    dom = domain_from_config(cfg)
    mol = mollifier_from_config(cfg, dom)
    assert np.allclose(mol.center, [0.1, 0.0])
    assert mol.radius == 0.2
