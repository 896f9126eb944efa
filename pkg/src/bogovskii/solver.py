"""Bogovskii operator on grids: u = Bf, the gradient decomposition, and the
Lipschitz-domain extension.

The apply path is matrix-free: for each output node we integrate the ray
kernel against f over the support nodes of f, with a polar patch replacing
the grid sum inside a small excluded square around the singularity.  The
gradient path computes the principal value of the T part by ring-binned
grid sums at several exclusion radii plus corner corrections, then
Richardson-extrapolates in the exclusion radius; the omega part is a plain
multiplication by eval_omega.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _speed
from .domain import LipschitzDomain, make_bump, split_zero_mean
from .errors import MeanNotZero, SingularPoint, SupportViolation
from .kernel import KernelConfig, eval_G, eval_omega
from .norms import bmo_norm, holder_norm
from .quadrature import GridField, collar_nodes, fd_gradient, gauss_rule
from .reports import SweepReport

_MEAN_TOL = 1e-8


def _as_cfg(cfg):
    return cfg if cfg is not None else KernelConfig()


def _flat_points(grid):
    return grid.points().reshape(-1, grid.dim)


def _contains_with_tol(dom, pts, tol, dim):
    """Inside the domain closure, with tol of slack along each axis."""
    inside = dom.contains(pts)
    if tol > 0.0:
        for ax in range(dim):
            for sgn in (-tol, tol):
                q = pts.copy()
                q[:, ax] += sgn
                inside |= dom.contains(q)
    return inside


def _check_input(f, dom, fix_mean, mean_tol):
    """Mean and support preconditions; returns (values, mean, L1 mass)."""
    grid = f.grid
    vals = np.asarray(f.values, dtype=float)
    if vals.shape != grid.shape:
        raise ValueError("f must be a scalar field on its grid")
    vol = grid.vol
    mass = float(np.sum(np.abs(vals) * vol))
    mean = float(np.sum(vals * vol))
    flat = vals.reshape(-1)
    nz = np.flatnonzero(flat)
    if nz.size:
        pts = _flat_points(grid)[nz]
        tol = 0.75 * grid.h * math.sqrt(grid.dim)
        ok = _contains_with_tol(dom, pts, tol, grid.dim)
        if not np.all(ok):
            bad = pts[~ok][int(np.argmax(np.abs(flat[nz][~ok])))]
            raise SupportViolation(
                "f is nonzero at %s, outside the domain closure"
                % np.array2string(bad, precision=4)
            )
    if abs(mean) > mean_tol * max(mass, 1e-300) and not fix_mean:
        raise MeanNotZero(
            "mean(f) = %.3e exceeds %.1e * ||f||_1; pass fix_mean=True to subtract it"
            % (mean, mean_tol)
        )
    return vals, mean, mass


def _subtract_mean(vals, grid, mol, mean):
    """Remove the mean against the mollifier bump (unit mass, support in Omega)."""
    w = mol(_flat_points(grid)).reshape(grid.shape)
    return vals - mean * w


def _near_support(grid, live_mask, cells):
    """Flat mask of nodes within ``cells`` grid cells of a live node."""
    from scipy import ndimage

    structure = np.ones((3,) * grid.dim, dtype=bool)
    near = ndimage.binary_dilation(live_mask, structure=structure,
                                   iterations=int(cells))
    return near.reshape(-1)


def _extrapolate_eps(arrs, eps_list):
    """Extrapolate truncated pv integrals to exclusion radius zero.

    arrs[k] is the integral over |z| > eps_list[k].  Models the truncation
    as a polynomial in eps and eliminates the eps^1..eps^(L-1) terms
    exactly at the given radii (they need not share a common ratio).
    Returns (best, defect); the defect is how much the last level changed
    the answer, a cheap reliability indicator.
    """
    def weights(eps):
        L = len(eps)
        M = np.vander(np.asarray(eps, dtype=float), N=L, increasing=True)
        e0 = np.zeros(L)
        e0[0] = 1.0
        return np.linalg.solve(M.T, e0)

    w = weights(eps_list)
    best = sum(w[k] * np.asarray(arrs[k], dtype=float) for k in range(len(arrs)))
    if len(arrs) >= 3:
        wp = weights(eps_list[:-1])
        prev = sum(wp[k] * np.asarray(arrs[k], dtype=float)
                   for k in range(len(arrs) - 1))
        defect = float(np.max(np.abs(best - prev))) if np.size(best) else 0.0
    else:
        defect = float("nan")
    return best, defect


def bogovskii_apply(f, dom, mol=None, cfg=None, *, fix_mean=False,
                    mean_tol=_MEAN_TOL, points=None, method="fast",
                    excl_cells=3, quad_points=12):
    """u(x) = integral of G(x, .) f over the domain, on the grid of f.

    f must have (numerically) zero mean and support inside the domain
    closure; pass fix_mean=True to subtract the mean against the mollifier
    bump instead of raising.  points restricts evaluation to a subset of
    output nodes (flat indices into the grid); the returned field is zero
    elsewhere and carries the evaluated index set in meta.

    method "fast" is the compiled pair sum with a polar patch near the
    diagonal; "reference" loops over nodes calling eval_G directly (slow,
    kept for cross-checking the fast path).
    """
    grid = f.grid
    mol = mol if mol is not None else dom.default_mollifier()
    cfg = _as_cfg(cfg)
    vals, mean, mass = _check_input(f, dom, fix_mean, mean_tol)
    if fix_mean and abs(mean) > mean_tol * max(mass, 1e-300):
        vals = _subtract_mean(vals, grid, mol, mean)
        mean_after = float(np.sum(vals * grid.vol))
    else:
        mean_after = mean

    flat = vals.reshape(-1)
    live = np.flatnonzero(flat)
    all_pts = _flat_points(grid)
    nodes = np.ascontiguousarray(all_pts[live])
    fw = flat[live] * grid.vol.reshape(-1)[live]

    if points is None:
        out_idx = np.arange(all_pts.shape[0])
    else:
        out_idx = np.asarray(points, dtype=np.int64).reshape(-1)
    xs = np.ascontiguousarray(all_pts[out_idx])

    u = np.zeros((all_pts.shape[0], grid.dim))
    cw = np.asarray(mol.center, dtype=float)
    if nodes.shape[0] > 0 and xs.shape[0] > 0:
        if method == "reference":
            uo = np.zeros((xs.shape[0], grid.dim))
            for p in range(xs.shape[0]):
                acc = np.zeros(grid.dim)
                for m in range(nodes.shape[0]):
                    try:
                        acc += eval_G(xs[p], nodes[m], mol, cfg) * fw[m]
                    except SingularPoint:
                        # diagonal cell; its contribution is O(h^n log h)
                        continue
                uo[p] = acc
            u[out_idx] = uo
        else:
            glx, glw = gauss_rule(quad_points)
            excl_half = (excl_cells + 0.5) * grid.h
            uo = np.zeros((xs.shape[0], grid.dim))
            _speed.bog_apply_sum(xs, nodes, fw, cw, mol.radius ** 2,
                                 mol.norm_const, glx, glw, excl_half, uo)
            # the patch only matters where f is live inside the excluded
            # square; restrict to those rows and chunk the interpolation
            off, wts = collar_nodes(grid.dim, excl_half, 0.0)
            near = _near_support(grid, vals != 0.0, excl_cells + 1)
            prows = np.flatnonzero(near[out_idx])
            chunk = max(1, int(4e6) // max(off.shape[0], 1))
            for s in range(0, prows.size, chunk):
                rows = prows[s:s + chunk]
                blk = np.ascontiguousarray(xs[rows])
                fpatch = grid.interp(vals, blk[:, None, :] + off[None, :, :])
                if not np.any(fpatch):
                    continue
                tmp = np.zeros((blk.shape[0], grid.dim))
                _speed.bog_patch_sum(blk, off, wts, fpatch, cw,
                                     mol.radius ** 2, mol.norm_const,
                                     glx, glw, tmp)
                uo[rows] += tmp
            u[out_idx] = uo

    out = GridField(grid, u.reshape(grid.shape + (grid.dim,)), support_flag=True)
    out.meta = {
        "mean_of_f": mean,
        "mean_after_fix": mean_after,
        "evaluated_nodes": out_idx,
        "excl_cells": excl_cells,
        "quad_points": quad_points,
        "method": method,
    }
    return out


def gradient_decomposition(f, dom, mol=None, cutoff=None, cfg=None, *,
                           fix_mean=False, mean_tol=_MEAN_TOL, points=None,
                           eps_cells=(8, 4, 2), quad_points=24):
    """Matrix field with entries T_ij f + omega_ij f, equal to d_j u_i.

    T_ij is the principal value of chi(x) chi(y) dG_i/dx_j against f.  The
    pv is computed by excluding squares of half-width (m + 1/2) h for each
    m in eps_cells, adding the corner regions between the square and its
    inscribed disk by a polar rule, and Richardson-extrapolating the disk
    radius to zero.  The claim domain is the chi == 1 plateau; other nodes
    are computed anyway but flagged off in meta["plateau_mask"].
    """
    grid = f.grid
    n = grid.dim
    mol = mol if mol is not None else dom.default_mollifier()
    cutoff = cutoff if cutoff is not None else dom.cutoff
    cfg = _as_cfg(cfg)
    vals, mean, mass = _check_input(f, dom, fix_mean, mean_tol)
    if fix_mean and abs(mean) > mean_tol * max(mass, 1e-300):
        vals = _subtract_mean(vals, grid, mol, mean)

    factors = tuple(int(m) for m in eps_cells)
    if len(factors) < 2 or any(factors[i] <= factors[i + 1]
                               for i in range(len(factors) - 1)):
        raise ValueError("eps_cells must be strictly decreasing, two or more levels")

    flat = vals.reshape(-1)
    live = np.flatnonzero(flat)
    all_pts = _flat_points(grid)
    nodes = np.ascontiguousarray(all_pts[live])
    dens = (flat[live] * grid.vol.reshape(-1)[live])[None, :]
    chi_nodes = cutoff(nodes)

    if points is None:
        out_idx = np.arange(all_pts.shape[0])
    else:
        out_idx = np.asarray(points, dtype=np.int64).reshape(-1)
    xs = np.ascontiguousarray(all_pts[out_idx])
    chi_out = cutoff(xs)

    glx, glw = gauss_rule(quad_points)
    cw = np.asarray(mol.center, dtype=float)
    r2 = mol.radius ** 2

    eps_list = [(m + 0.5) * grid.h for m in factors]
    thresh = np.asarray(eps_list, dtype=float)

    P = xs.shape[0]
    levels = np.zeros((len(factors), P, n, n))
    if nodes.shape[0] > 0 and P > 0:
        rings = np.zeros((P, len(factors), 1, n, n))
        _speed.bucket_grad_sums(xs, nodes, dens, chi_out, chi_nodes, False,
                                cw, r2, mol.norm_const, glx, glw, thresh, rings)
        csum = np.cumsum(rings[:, :, 0], axis=1)
        for k in range(len(factors)):
            levels[k] = csum[:, k]

    # corner corrections: square minus inscribed disk, evaluated pointwise;
    # rows far from supp f interpolate f to zero, so skip them up front
    near = _near_support(grid, vals != 0.0, factors[0] + 1)
    prows = np.flatnonzero(near[out_idx])
    for k, a in enumerate(eps_list):
        off, wts = collar_nodes(n, a, a)
        if off.shape[0] == 0 or prows.size == 0:
            continue
        K = off.shape[0]
        chunk = max(1, int(4e6) // K)
        for s in range(0, prows.size, chunk):
            rows = prows[s:s + chunk]
            blk = xs[rows]
            B = blk.shape[0]
            ys = (blk[:, None, :] + off[None, :, :]).reshape(-1, n)
            fy = grid.interp(vals, ys)
            if not np.any(fy):
                continue
            chy = cutoff(ys)
            mats = np.zeros((B * K, n, n))
            _speed.gradG_pairs(np.repeat(blk, K, axis=0), ys, cw, r2,
                               mol.norm_const, glx, glw, mats)
            w_all = fy * chy * np.tile(wts, B) * np.repeat(chi_out[rows], K)
            levels[k][rows] += (mats * w_all[:, None, None]).reshape(B, K, n, n).sum(axis=1)

    T_best, pv_defect = _extrapolate_eps(list(levels), eps_list)

    omega = eval_omega(xs, mol, cfg)
    full = T_best + omega * flat[out_idx][:, None, None]

    out_vals = np.zeros((all_pts.shape[0], n, n))
    out_vals[out_idx] = full
    gf = GridField(grid, out_vals.reshape(grid.shape + (n, n)))
    plateau = np.zeros(all_pts.shape[0], dtype=bool)
    plateau[out_idx] = chi_out >= 1.0 - 1e-12
    gf.meta = {
        "pv_defect": pv_defect,
        "evaluated_nodes": out_idx,
        "plateau_mask": plateau.reshape(grid.shape),
        "eps_cells": factors,
        "quad_points": quad_points,
        "mean_of_f": mean,
    }
    return gf


@dataclass
class SolveResult:
    """Solution bundle: u, its gradient, the divergence residual, and the
    diagnostics accumulated along the way."""

    u: GridField
    grad_u: GridField
    div_residual: GridField
    diagnostics: dict = field(default_factory=dict)


def _fd_divergence(grid, uv):
    """Trace of the fd gradient of a vector field, plus a full-stencil mask."""
    grad, codes = fd_gradient(grid, uv)
    div = np.trace(grad, axis1=-2, axis2=-1)
    ok = np.all(codes != 0, axis=(-2, -1))
    return div, ok, grad


def solve_star(f, dom, mol=None, cfg=None, *, fix_mean=False, points=None,
               excl_cells=3, quad_points=12):
    """bogovskii_apply plus fd gradient and divergence residual, bundled."""
    u = bogovskii_apply(f, dom, mol, cfg, fix_mean=fix_mean, points=points,
                        excl_cells=excl_cells, quad_points=quad_points)
    grid = f.grid
    div, ok, grad = _fd_divergence(grid, u.values)
    res = np.where(ok, div - f.values, 0.0)
    inner = grid.interior_mask(1) & ok
    diag = {
        "mean_of_f": u.meta["mean_of_f"],
        "max_abs_residual": float(np.max(np.abs(res[inner]))) if np.any(inner) else 0.0,
        "quadrature": {"excl_cells": excl_cells, "quad_points": quad_points},
    }
    return SolveResult(
        u=u,
        grad_u=GridField(grid, grad),
        div_residual=GridField(grid, res),
        diagnostics=diag,
    )


def solve_lipschitz(f, lip, cfg=None, *, fix_mean=False, points=None,
                    excl_cells=3, quad_points=12):
    """Solve div u = f on a union of star-shaped pieces.

    Splits f into zero-mean parts supported on the members, applies the
    operator per piece with that piece's own mollifier, and sums the
    extensions by zero.  Per-piece means and the split reconstruction
    defect land in diagnostics.
    """
    if not isinstance(lip, LipschitzDomain):
        raise TypeError("solve_lipschitz needs a LipschitzDomain")
    grid = f.grid
    cfg = _as_cfg(cfg)
    vals, mean, mass = _check_input(f, lip, fix_mean, _MEAN_TOL)
    if fix_mean and abs(mean) > _MEAN_TOL * max(mass, 1e-300):
        vals = _subtract_mean(vals, grid, lip.pieces[0].default_mollifier(), mean)
        f = GridField(grid, vals, support_flag=f.support_flag)

    parts, split_info = split_zero_mean(vals, lip, grid)
    all_pts = _flat_points(grid)
    usum = np.zeros(grid.shape + (grid.dim,))
    piece_means = []
    for piece, part in zip(lip.pieces, parts):
        piece_means.append(float(np.sum(part * grid.vol)))
        part_mass = float(np.sum(np.abs(part) * grid.vol))
        if part_mass <= 1e-13 * max(mass, 1.0):
            # the split left nothing on this piece beyond rounding
            continue
        live = np.flatnonzero(piece.contains(all_pts))
        if points is not None:
            live = np.intersect1d(live, np.asarray(points, dtype=np.int64))
        up = bogovskii_apply(GridField(grid, part), piece,
                             piece.default_mollifier(), cfg, mean_tol=1e-6,
                             points=live, excl_cells=excl_cells,
                             quad_points=quad_points)
        usum += up.values
    u = GridField(grid, usum, support_flag=True)
    div, ok, grad = _fd_divergence(grid, usum)
    res = np.where(ok, div - vals, 0.0)
    recon = sum(parts)
    return SolveResult(
        u=u,
        grad_u=GridField(grid, grad),
        div_residual=GridField(grid, res),
        diagnostics={
            "mean_of_f": mean,
            "piece_means": piece_means,
            "split_defect": float(np.max(np.abs(recon - vals))),
            "split_info": split_info,
            "n_pieces": len(lip.pieces),
        },
    )


def counterexample_p1(delta_list, grid):
    """Failure of the p = 1 gradient bound on the unit disk.

    phi(z) = Re log(1+z) and psi(z) = Im log(1+z).  For each delta the
    input f is an L1-normalized bump at -1 + delta of radius delta / 2;
    the ratio |int phi f| / (sup|psi| ||f||_1) grows like |log delta|,
    which a uniform p = 1 bound would cap.
    """
    deltas = [float(d) for d in delta_list]
    if any(not 0.0 < d < 0.5 for d in deltas):
        raise ValueError("deltas must lie in (0, 0.5)")
    if any(deltas[i + 1] >= deltas[i] for i in range(len(deltas) - 1)):
        raise ValueError("deltas must be strictly decreasing")

    pts = grid.masked_points()
    psi = np.arctan2(pts[:, 1], 1.0 + pts[:, 0])
    psi_sup = float(np.max(np.abs(psi)))

    nq_r, nq_t = 48, 64
    gr, wr = gauss_rule(nq_r)
    rows = []
    ratios = []
    for d in deltas:
        c = np.array([-1.0 + d, 0.0])
        rad = d / 2.0
        bump = make_bump(c, rad)
        rr = 0.5 * (gr + 1.0) * rad
        wrr = 0.5 * rad * wr
        th = (np.arange(nq_t) + 0.5) * (2.0 * math.pi / nq_t)
        R, T = np.meshgrid(rr, th, indexing="ij")
        X = c[0] + R * np.cos(T)
        Y = c[1] + R * np.sin(T)
        W = (wrr[:, None] * (2.0 * math.pi / nq_t)) * R
        fv = bump(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(R.shape)
        fmass = float(np.sum(fv * W))
        phi = 0.5 * np.log((1.0 + X) ** 2 + Y ** 2)
        pairing = float(np.sum(phi * fv * W)) / fmass
        ratio = abs(pairing) / psi_sup
        ratios.append(ratio)
        rows.append({"delta": d, "ratio": ratio, "pairing": pairing})
    increments = [ratios[i + 1] - ratios[i] for i in range(len(ratios) - 1)]
    return {
        "rows": rows,
        "deltas": deltas,
        "ratios": ratios,
        "increments": increments,
        "psi_sup": psi_sup,
    }


def lipschitz_ratio_sweep(family, alpha, dom, mol=None, cutoff=None, cfg=None, *,
                          use_bmo=False, points=None, eps_cells=(8, 4, 2),
                          quad_points=24):
    """Holder (or bmo) operator-norm ratios over a family of inputs.

    For each member (name, GridField) the decomposition entries are
    computed and the ratio norm(Tf + omega f) / norm(f) recorded, with the
    entrywise max over matrix entries upstairs.  An empty family reports
    status "skipped" rather than raising.
    """
    members = list(family)
    kind = "bmo" if use_bmo else "lambda_alpha"
    usable = []
    rows = []
    for name, f in members:
        if not np.any(f.values):
            rows.append({"member": name, "ratio": "skipped",
                         "note": "identically zero input"})
            continue
        usable.append((name, f))
    if not usable:
        return SweepReport(kind=kind, parameter=alpha, rows=rows,
                           status="skipped",
                           meta={"reason": "no nonzero member"})

    def norm_of(values, grid):
        if use_bmo:
            return bmo_norm(values, grid)
        return holder_norm(values, grid, alpha)[2]

    for name, f in usable:
        gd = gradient_decomposition(f, dom, mol, cutoff, cfg, points=points,
                                    eps_cells=eps_cells, quad_points=quad_points)
        denom = norm_of(f.values, f.grid)
        num = 0.0
        for i in range(f.grid.dim):
            for j in range(f.grid.dim):
                num = max(num, norm_of(gd.values[..., i, j], f.grid))
        rows.append({"member": name, "num": num, "denom": denom,
                     "ratio": num / denom if denom > 0 else float("inf")})
    return SweepReport.from_rows(kind, alpha, rows)
