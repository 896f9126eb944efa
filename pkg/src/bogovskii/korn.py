"""Strain tensors and the reconstruction of a full gradient from its
symmetric part.

The representation writes d_j u_i minus its mollified mean as a sum of
transposed-kernel singular integrals applied to strain entries plus
pointwise omega terms:

    R(i,j)(y) = sum_k [ T*_kj(eps_ik) + T*_kk(eps_ij) - T*_ki(eps_jk) ](y)
              + sum_k [ w_kj(y) eps_ik(y) + w_kk(y) eps_ij(y)
                        - w_ki(y) eps_jk(y) ]

with T* g(y) = pv of chi(y) chi(x) dG_k/dx_j(x, y) g(x) dx, the kernel
transposed in its arguments relative to the decomposition operator.

Numerically each pair T*_kj(g) + w_kj g is evaluated as one absolutely
convergent integral of kernel times (g(x) - g(y)): the pv of the bare
kernel over the domain is exactly -w_kj(y), because the kernel vanishes
whenever x sits on the boundary, so subtracting g(y) absorbs the omega
term and removes the principal-value limit at the same time.  The mean
term is taken in the integration-by-parts form so only u itself is ever
sampled.
"""

import numpy as np
from dataclasses import dataclass

from . import _speed
from .kernel import KernelConfig
from .norms import MaximalConfig, hp_quasinorm
from .quadrature import (Grid, GridField, collar_nodes, fd_gradient,
                         gauss_rule, gauss_on)
from .reports import SweepReport


def _as_cfg(cfg):
    return cfg if cfg is not None else KernelConfig()


@dataclass
class StrainField:
    """Symmetric gradient of a vector field, with a reference to its source."""

    eps: GridField
    source: GridField = None

    def entry(self, i, j):
        return self.eps.values[..., i, j]


def strain(u):
    """Symmetrized fd gradient of a vector GridField."""
    grid = u.grid
    grad, codes = fd_gradient(grid, u.values)
    eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    sf = StrainField(eps=GridField(grid, eps), source=u)
    sf.stencils = codes
    return sf


def _fd_hessian(u_fn, pts, step):
    """H[p, i, k, j] = d2 u_i / dx_k dx_j by central differences."""
    pts = np.asarray(pts, dtype=float)
    P, n = pts.shape
    probe = u_fn(pts)
    m = probe.shape[-1]
    H = np.zeros((P, m, n, n))
    for k in range(n):
        for j in range(k, n):
            if k == j:
                ek = np.zeros(n)
                ek[k] = step
                val = (u_fn(pts + ek) - 2.0 * probe + u_fn(pts - ek)) / step ** 2
            else:
                ek = np.zeros(n)
                ej = np.zeros(n)
                ek[k] = step
                ej[j] = step
                val = (u_fn(pts + ek + ej) - u_fn(pts + ek - ej)
                       - u_fn(pts - ek + ej) + u_fn(pts - ek - ej)) / (4.0 * step ** 2)
            H[:, :, k, j] = val
            H[:, :, j, k] = val
    return H


def _fd_jacobian(u_fn, pts, step):
    """J[p, i, k] = d u_i / dx_k by central differences."""
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[-1]
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        cols.append((u_fn(pts + e) - u_fn(pts - e)) / (2.0 * step))
    return np.stack(cols, axis=-1)


def second_derivative_identity_check(u, points, mode="closed", step=0.01):
    """Max defect of d2u_i/dx_k dx_j = eps_ik,j + eps_ij,k - eps_jk,i.

    mode "closed" uses the field's hess() and forms the strain
    derivatives from it algebraically, so the defect sits at rounding
    level and validates the index combination itself.  mode "fd" keeps
    the two sides independent: the left side is direct second-difference
    stencils on u, the right side differentiates fd-built strain entries
    by nested first differences, so the stencils do not collapse into
    each other and the defect is honest discretization error, O(step^2).
    """
    pts = np.asarray(points, dtype=float)
    if mode == "closed":
        H = u.hess(pts)
        # eps_ab,c = (H[a,b,c] + H[b,a,c]) / 2
        eps_d = 0.5 * (H + np.swapaxes(H, 1, 2))
    elif mode == "fd":
        fn = u.u if hasattr(u, "u") else u
        H = _fd_hessian(fn, pts, step)
        P, m, n, _ = H.shape

        def eps_at(q):
            J = _fd_jacobian(fn, q, step)
            return 0.5 * (J + np.swapaxes(J, -1, -2))

        eps_d = np.zeros_like(H)
        for c in range(n):
            e = np.zeros(n)
            e[c] = step
            eps_d[..., c] = (eps_at(pts + e) - eps_at(pts - e)) / (2.0 * step)
    else:
        raise ValueError("mode must be 'closed' or 'fd'")
    lhs = H
    rhs = np.zeros_like(H)
    P, m, n, _ = H.shape
    for i in range(m):
        for k in range(n):
            for j in range(n):
                rhs[:, i, k, j] = (eps_d[:, i, k, j] + eps_d[:, i, j, k]
                                   - eps_d[:, j, k, i])
    return float(np.max(np.abs(lhs - rhs)))


def omega_mean(u, mol, mode="by_parts", n_quad=160, grad=None):
    """Mollified gradient mean (d_j u_i)_w = integral of (d_j u_i) w dx.

    mode "by_parts" evaluates -integral u_i dw/dx_j, sampling only u; it
    accepts a vector GridField (interpolated) or a callable.  mode
    "direct" needs grad (callable returning the Jacobian) and integrates
    it against w; the two agree to quadrature precision on smooth fields.
    """
    dim = mol.center.size
    lo = mol.center - mol.radius
    rules = [gauss_on(lo[a], lo[a] + 2.0 * mol.radius, n_quad) for a in range(dim)]
    meshes = np.meshgrid(*(r[0] for r in rules), indexing="ij")
    wts = np.ones_like(meshes[0])
    for a in range(dim):
        shape = [1] * dim
        shape[a] = -1
        wts = wts * rules[a][1].reshape(shape)
    pts = np.stack([m.ravel() for m in meshes], axis=-1)
    w = wts.ravel()
    if mode == "by_parts":
        if isinstance(u, GridField):
            uv = u.grid.interp(u.values, pts)
        else:
            uv = u(pts)
        dw = mol.grad(pts)
        return -np.einsum("p,pi,pj->ij", w, uv, dw)
    if mode == "direct":
        if grad is None:
            raise ValueError("direct mode needs the Jacobian callable")
        wv = mol(pts)
        g = grad(pts)
        return np.einsum("p,pij->ij", w * wv, g)
    raise ValueError("mode must be 'by_parts' or 'direct'")


def _strain_pairs(n):
    return [(a, b) for a in range(n) for b in range(a, n)]


def korn_representation(u, dom, mol=None, cutoff=None, cfg=None, *,
                        points=None, eps_cells=(8, 4), quad_points=24,
                        collar_ang=32, collar_rad=16):
    """Reconstruct d_j u_i - (d_j u_i)_w from the strain of u.

    Each assembly pair T*_kj(g) + w_kj g(y) is evaluated in subtracted
    form: since the pv of the bare kernel over the domain is exactly
    -w_kj(y) (divergence theorem against the kernel, which vanishes for
    x on the boundary), the pair equals the absolutely convergent
    integral of dG_k/dx_j(x, y) (g(x) - g(y)) dx.  That drops the
    eps -> 0 limit entirely: the near field is a plain polar quadrature
    over the whole exclusion square, and no omega matrix is needed.
    eps_cells gives the exclusion sizes (in cells) the estimate is
    computed at; the spread across them is the reported defect.  The
    largest size is the returned value: cell midpoint sums lose accuracy
    right next to the exclusion, so pushing the boundary out hands that
    region to the collar rule, which resolves it properly.

    Returns a matrix GridField R; meta carries the constant mean-term
    matrix (by-parts form), the level-consistency defect, and the
    plateau mask marking where the identity is claimed.
    """
    grid = u.grid
    n = grid.dim
    mol = mol if mol is not None else dom.default_mollifier()
    cutoff = cutoff if cutoff is not None else dom.cutoff
    cfg = _as_cfg(cfg)

    sf = strain(u)
    eps = sf.eps.values
    pairs = _strain_pairs(n)
    idx = {}
    for d, (a, b) in enumerate(pairs):
        idx[(a, b)] = d
        idx[(b, a)] = d

    vol = grid.vol.reshape(-1)
    eps_flat = eps.reshape(-1, n, n)
    # strain channels plus a unit channel used for the g(y) subtraction
    dens_all = np.stack([eps_flat[:, a, b] * vol for a, b in pairs] + [vol],
                        axis=0)
    live = np.flatnonzero(vol > 0.0)
    all_pts = grid.points().reshape(-1, n)
    nodes = np.ascontiguousarray(all_pts[live])
    dens = np.ascontiguousarray(dens_all[:, live])
    chi_nodes = cutoff(nodes)
    D = len(pairs)

    if points is None:
        out_idx = np.arange(all_pts.shape[0])
    else:
        out_idx = np.asarray(points, dtype=np.int64).reshape(-1)
    ys = np.ascontiguousarray(all_pts[out_idx])
    chi_out = cutoff(ys)
    P = ys.shape[0]
    eps_out = eps_flat[out_idx]

    factors = sorted((int(m) for m in eps_cells), reverse=True)
    eps_list = [(m + 0.5) * grid.h for m in factors]
    thresh = np.asarray(eps_list, dtype=float)
    glx, glw = gauss_rule(quad_points)
    cw = np.asarray(mol.center, dtype=float)
    r2 = mol.radius ** 2

    levels = np.zeros((len(factors), P, D, n, n))
    if nodes.shape[0] and P:
        rings = np.zeros((P, len(factors), D + 1, n, n))
        _speed.bucket_grad_sums(ys, nodes, dens, chi_out, chi_nodes, True,
                                cw, r2, mol.norm_const, glx, glw, thresh, rings)
        csum = np.cumsum(rings, axis=1)
        for k in range(len(factors)):
            for d, (pa, pb) in enumerate(pairs):
                levels[k][:, d] = (csum[:, k, d]
                                   - eps_out[:, pa, pb, None, None]
                                   * csum[:, k, D])

    for k, a in enumerate(eps_list):
        off, wts = collar_nodes(n, a, 0.0, n_ang=collar_ang, n_rad=collar_rad)
        K = off.shape[0]
        if K == 0 or P == 0:
            continue
        chunk = max(1, int(4e6) // K)
        for s in range(0, P, chunk):
            blk = ys[s:s + chunk]
            B = blk.shape[0]
            xsc = (blk[:, None, :] + off[None, :, :]).reshape(-1, n)
            eps_x = grid.interp(eps, xsc).reshape(B, K, n, n)
            eps_x -= eps_out[s:s + chunk, None]
            chx = cutoff(xsc)
            mats = np.zeros((B * K, n, n))
            _speed.gradG_pairs(xsc, np.repeat(blk, K, axis=0), cw, r2,
                               mol.norm_const, glx, glw, mats)
            base_w = chx * np.tile(wts, B) * np.repeat(chi_out[s:s + chunk], K)
            for d, (pa, pb) in enumerate(pairs):
                w_all = base_w * eps_x[:, :, pa, pb].reshape(-1)
                levels[k][s:s + chunk, d] += (
                    mats * w_all[:, None, None]).reshape(B, K, n, n).sum(axis=1)

    S = levels[0]
    pv_defect = 0.0
    if len(factors) > 1:
        pv_defect = float(np.max(np.abs(levels[1:] - levels[:1])))

    R = np.zeros((P, n, n))
    for i in range(n):
        for j in range(n):
            acc = np.zeros(P)
            for k in range(n):
                acc += S[:, idx[(i, k)], k, j]
                acc += S[:, idx[(i, j)], k, k]
                acc -= S[:, idx[(j, k)], k, i]
            R[:, i, j] = acc

    mean_term = omega_mean(u, mol)

    out_vals = np.zeros((all_pts.shape[0], n, n))
    out_vals[out_idx] = R
    gf = GridField(grid, out_vals.reshape(grid.shape + (n, n)))
    plateau = np.zeros(all_pts.shape[0], dtype=bool)
    plateau[out_idx] = chi_out >= 1.0 - 1e-12
    gf.meta = {
        "mean_term": mean_term,
        "pv_defect": pv_defect,
        "evaluated_nodes": out_idx,
        "plateau_mask": plateau.reshape(grid.shape),
        "eps_cells": factors,
        "quad_points": quad_points,
    }
    return gf


def korn_ratio_sweep(family, p, dom, cfg=None, *, h=0.02, pad=None,
                     maximal_cfg=None):
    """Per-member ratio hp(grad u) / (hp(eps) + hp(u)) on a padded box.

    Each member must expose name, u(pts) and grad(pts); fields are sampled
    on the bounding box of the domain padded by the maximal-function reach
    (the analytic extension plays the role of the restriction-space
    extension).  Returns a SweepReport with the per-member table.
    """
    members = list(family)
    if not members:
        return SweepReport(kind="korn", parameter=p, rows=[], status="skipped",
                           meta={"reason": "empty family"})
    mc = maximal_cfg if maximal_cfg is not None else MaximalConfig()
    if pad is None:
        pad = max(mc.t_levels) * mc.profile(dom.dim).radius
    lo, hi = dom.bbox()
    grid = Grid.box(np.asarray(lo) - pad, np.asarray(hi) + pad, h)
    pts = grid.points()

    rows = []
    for mem in members:
        G = mem.grad(pts)
        U = mem.u(pts)
        E = 0.5 * (G + np.swapaxes(G, -1, -2))
        num = hp_quasinorm(G, grid, p, mc, enforce_margin=False)
        den = (hp_quasinorm(E, grid, p, mc, enforce_margin=False)
               + hp_quasinorm(U, grid, p, mc, enforce_margin=False))
        rows.append({
            "member": mem.name,
            "hp_grad": num,
            "hp_eps_plus_u": den,
            "ratio": num / den if den > 0 else float("inf"),
        })
    return SweepReport.from_rows("korn", p, rows, h=h, pad=pad)
