"""Kernel evaluations: G, its gradient, the omega matrix, the homogeneous
splitting K1/K2, the psi machinery H and K_j, and the empirical bounds."""

import numpy as np
import pytest

from bogovskii.domain import Ball, StarDomain, make_bump
from bogovskii.errors import NonZeroMeanPsi, SingularPoint
from bogovskii.kernel import (KernelConfig, PsiDerivative, eval_G, eval_K,
                              eval_K1, eval_K2, eval_K_parts, eval_K_t,
                              eval_gradG, eval_H, eval_omega,
                              kernel_bounds_report, spherical_average_K1)

# G at x = (0.3, 0), y = (-0.2, 0.1) for the bump of radius 0.4 at the
# origin; frozen from a composite Simpson oracle with 1e6 panels over s
G_FIXTURE_X = np.array([0.3, 0.0])
G_FIXTURE_Y = np.array([-0.2, 0.1])
G_FIXTURE = np.array([0.039495161254678425, -0.0078990322509356718])

# omega entries at (0.5, 0.1) for the bump of radius 0.35 at the origin,
# frozen from per-entry adaptive dblquad over the support disk
OMEGA_FIXTURE_POINT = np.array([0.5, 0.1])
OMEGA_FIXTURE = np.array([[0.90471487144552953, 0.16863119643563726],
                          [0.16863119643563726, 0.095285128554470563]])


@pytest.fixture(scope="module")
def mol04():
    return make_bump(np.zeros(2), 0.4)


# -- G ----------------------------------------------------------------------

def test_eval_g_matches_simpson_oracle(mol04):
    g = eval_G(G_FIXTURE_X, G_FIXTURE_Y, mol04)
    rel = np.max(np.abs(g - G_FIXTURE)) / np.max(np.abs(G_FIXTURE))
    assert rel <= 1e-6


def test_eval_g_vanishes_beyond_reach(mol04):
    y = np.array([-0.2, 0.1])
    far = y + np.array([3.0, 0.0])
    assert np.all(eval_G(far, y, mol04) == 0.0)


def test_eval_g_vanishes_on_dead_ray(mol04):
    # the ray from y through x points away from the support and never meets it
    y = np.array([0.6, 0.0])
    x = np.array([0.9, 0.0])
    assert np.all(eval_G(x, y, mol04) == 0.0)


def test_eval_g_singular_point(mol04):
    with pytest.raises(SingularPoint):
        eval_G(np.array([0.1, 0.2]), np.array([0.1, 0.2]), mol04)


def test_eval_g_quadrature_refinement_is_converged(mol04):
    rng = np.random.default_rng(8)
    xs = rng.uniform(-0.5, 0.5, size=(12, 2))
    ys = xs + rng.uniform(0.05, 0.4, size=(12, 1)) * _unit(rng, 12)
    base = eval_G(xs, ys, mol04)
    fine = eval_G(xs, ys, mol04,
                  KernelConfig(s_quad_points=16, s_panels_log=32))
    scale = np.max(np.abs(base))
    assert np.max(np.abs(fine - base)) <= 1e-6 * scale


def _unit(rng, m):
    v = rng.normal(size=(m, 2))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# -- gradient of G ----------------------------------------------------------

def test_eval_gradg_matches_central_differences(mol04):
    x = np.array([0.25, 0.05])
    y = np.array([-0.05, 0.0])
    step = 1e-5
    g = eval_gradG(x, y, mol04)
    fd = np.zeros((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        fd[:, j] = (eval_G(x + e, y, mol04) - eval_G(x - e, y, mol04)) / (2 * step)
    assert np.max(np.abs(g - fd)) <= 1e-4 * np.max(np.abs(fd))


def test_eval_gradg_growth_no_faster_than_rho_minus_n(mol04):
    y = np.array([-0.1, 0.05])
    e = np.array([0.8, 0.6])
    e = e / np.linalg.norm(e)
    rhos = np.array([0.2, 0.1, 0.05])
    mags = []
    for rho in rhos:
        g = eval_gradG(y + rho * e, y, mol04)
        mags.append(np.max(np.abs(g)))
    slope = np.polyfit(np.log(rhos), np.log(mags), 1)[0]
    assert slope >= -(2 + 0.3)


def test_eval_gradg_vanishes_beyond_reach(mol04):
    y = np.array([0.0, 0.1])
    x = y + np.array([0.0, 2.5])
    assert np.all(eval_gradG(x, y, mol04) == 0.0)


# -- omega matrix -----------------------------------------------------------

def test_omega_matches_dblquad_fixture(disk_mol):
    w = eval_omega(OMEGA_FIXTURE_POINT, disk_mol)
    assert np.max(np.abs(w - OMEGA_FIXTURE)) <= 1e-10


def test_omega_trace_is_one_everywhere(disk_mol):
    pts = np.array([[0.0, 0.0], [0.3, -0.2], [0.9, 0.4], [2.0, 1.0],
                    [-3.0, 0.5]])
    w = eval_omega(pts, disk_mol)
    tr = np.trace(w, axis1=-2, axis2=-1)
    assert np.max(np.abs(tr - 1.0)) <= 1e-9


def test_omega_symmetric(disk_mol):
    pts = np.array([[0.4, 0.1], [-0.7, 0.6], [1.5, -0.3]])
    w = eval_omega(pts, disk_mol)
    assert np.max(np.abs(w - np.swapaxes(w, -1, -2))) <= 1e-12


def test_omega_far_field_rank_one(disk_mol):
    """From far away the support is a point source: omega approaches the
    outer product of the direction toward the mollifier center."""
    x = np.array([40.0, -30.0])
    sig = (disk_mol.center - x) / np.linalg.norm(disk_mol.center - x)
    w = eval_omega(x, disk_mol)
    assert np.max(np.abs(w - np.outer(sig, sig))) <= 1e-3


def test_omega_trace_one_3d():
    mol = make_bump(np.zeros(3), 0.3)
    w = eval_omega(np.array([0.2, -0.1, 0.4]), mol)
    assert abs(np.trace(w) - 1.0) <= 1e-6
    assert np.max(np.abs(w - w.T)) <= 1e-12


# -- K1 homogeneity and cancellation ----------------------------------------

def test_k1_homogeneity(disk, disk_mol):
    rng = np.random.default_rng(17)
    m = 40
    y = rng.uniform(-0.6, 0.6, size=(m, 2))
    z = rng.uniform(0.3, 1.0, size=(m, 1)) * _unit(rng, m)
    base = eval_K1(y, z, disk_mol, disk.cutoff)
    for lam in (0.5, 2.0, 10.0):
        scaled = eval_K1(y, lam * z, disk_mol, disk.cutoff) * lam ** 2
        diff = np.abs(scaled - base)
        assert np.all(diff <= 1e-10 * np.maximum(np.abs(base), 1e-12))


def test_k1_spherical_average_cancels(disk, disk_mol):
    rng = np.random.default_rng(23)
    dirs = _unit(rng, 128)
    for y in rng.uniform(-0.7, 0.7, size=(10, 2)):
        avg = spherical_average_K1(y, disk_mol, disk.cutoff)
        k1 = eval_K1(np.broadcast_to(y, (128, 2)), dirs, disk_mol, disk.cutoff)
        scale = 1.0 + np.max(np.abs(k1))
        assert np.max(np.abs(avg)) <= 1e-8 * scale


def test_k1_zero_where_cutoff_vanishes(disk, disk_mol):
    y = np.array([1.5, 0.0])
    assert disk.cutoff(y[None, :])[0] == 0.0
    k1 = eval_K1(y, np.array([0.3, 0.1]), disk_mol, disk.cutoff)
    assert np.all(k1 == 0.0)


def test_k1_rejects_zero_z(disk, disk_mol):
    with pytest.raises(SingularPoint):
        eval_K1(np.zeros(2), np.zeros(2), disk_mol, disk.cutoff)


def test_k_equals_k1_minus_k2(disk, disk_mol):
    rng = np.random.default_rng(31)
    m = 30
    y = rng.uniform(-0.5, 0.5, size=(m, 2))
    z = rng.uniform(0.01, 0.3, size=(m, 1)) * _unit(rng, m)
    k = eval_K(y, z, disk_mol, disk.cutoff)
    k1 = eval_K1(y, z, disk_mol, disk.cutoff)
    k2 = eval_K2(y, z, disk_mol, disk.cutoff)
    scale = np.max(np.abs(k1), axis=(-2, -1), keepdims=True)
    assert np.max(np.abs(k - (k1 - k2)) / np.maximum(scale, 1e-12)) <= 1e-8


def test_k1_homogeneity_3d():
    dom = StarDomain(Ball(np.zeros(3), 1.0), np.zeros(3), 0.3)
    mol = dom.default_mollifier()
    rng = np.random.default_rng(41)
    y = rng.uniform(-0.4, 0.4, size=(5, 3))
    z = rng.normal(size=(5, 3))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    base = eval_K1(y, z, mol, dom.cutoff)
    scaled = eval_K1(y, 2.0 * z, mol, dom.cutoff) * 2.0 ** 3
    assert np.all(np.abs(scaled - base)
                  <= 1e-10 * np.maximum(np.abs(base), 1e-12))


# -- psi kernels: H splitting and K_j pieces --------------------------------

def _psi_cases(mol):
    return [PsiDerivative(mol, "x_omega", 1, i=0),
            PsiDerivative(mol, "omega", 0)]


def test_h_splits_additively(disk, disk_mol):
    rng = np.random.default_rng(53)
    m = 25
    x = rng.uniform(-0.5, 0.5, size=(m, 2))
    y = x + rng.uniform(0.05, 0.5, size=(m, 1)) * _unit(rng, m)
    for psi in _psi_cases(disk_mol):
        full = eval_H(psi, disk_mol, x, y, disk.cutoff)
        near = eval_H(psi, disk_mol, x, y, disk.cutoff, s_range=(0.0, 0.5))
        far = eval_H(psi, disk_mol, x, y, disk.cutoff, s_range=(0.5, 1.0))
        scale = np.max(np.abs(full))
        assert np.max(np.abs(near + far - full)) <= 1e-8 * max(scale, 1e-12)


def test_k_t_equals_sum_of_parts(disk, disk_mol):
    rng = np.random.default_rng(59)
    m = 25
    x = rng.uniform(-0.5, 0.5, size=(m, 2))
    z = rng.uniform(0.05, 0.5, size=(m, 1)) * _unit(rng, m)
    for psi in _psi_cases(disk_mol):
        kt = eval_K_t(psi, disk_mol, x, z, disk.cutoff)
        parts = eval_K_parts(psi, disk_mol, x, z, disk.cutoff)
        total = sum(parts)
        scale = np.max(np.abs(kt))
        assert np.max(np.abs(total - kt)) <= 1e-8 * max(scale, 1e-12)


def test_k_parts_decay_exponents(disk, disk_mol):
    """K_j trades singularity for decay: |K_j| ~ rho^(j-n) along a ray."""
    psi = PsiDerivative(disk_mol, "omega", 0)
    x = np.array([0.1, 0.0])
    e = np.array([-1.0, -0.2])
    e = e / np.linalg.norm(e)
    rhos = np.geomspace(0.05, 0.5, 8)
    mags = np.zeros((2, rhos.size))
    for k, rho in enumerate(rhos):
        parts = eval_K_parts(psi, disk_mol, x, rho * e, disk.cutoff)
        for j in range(2):
            mags[j, k] = abs(float(parts[j]))
    for j in range(2):
        slope = np.polyfit(np.log(rhos), np.log(mags[j]), 1)[0]
        assert abs(slope - (j - 2)) <= 0.15


def test_nonzero_mean_psi_rejected(disk, disk_mol):
    with pytest.raises(NonZeroMeanPsi):
        eval_H(disk_mol, disk_mol, np.array([0.1, 0.0]),
               np.array([0.4, 0.1]), disk.cutoff)


# -- empirical bounds report ------------------------------------------------

def test_kernel_bounds_report_contents(disk, disk_mol):
    rep = kernel_bounds_report(disk, disk_mol, n_samples=2000, seed=9)
    assert np.isfinite(rep["C_size"]) and rep["C_size"] > 0
    assert np.isfinite(rep["C_smooth"]) and rep["C_smooth"] > 0
    assert rep["max_cancellation_defect"] <= 1e-8
    assert rep["max_abs_beyond_support_diameter"] == 0.0
    assert rep["samples"] == 2000
