"""Grids, masked quadrature, principal values, and finite differences.

Grids are cell-centered lattices over a bounding box.  Cells straddling the
domain boundary carry clipped volumes estimated by subcell sampling, so
masked midpoint sums integrate to the analytic domain measure to O(h^2).

Principal values are computed per truncation level as

    grid sum outside an exact cell-union square around x
    + polar quadrature of the square-minus-disk collar down to radius eps

followed by Richardson extrapolation across decreasing eps levels.  The
excluded region at every level is the exact eps-disk, which preserves the
symmetric-limit structure; the collar's outer boundary coincides with cell
edges so the grid and polar pieces tile the plane without mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import ndimage

from .errors import ExtrapolationDiverged


@lru_cache(maxsize=64)
def gauss_rule(n):
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    x, w = leggauss(n)
    return x, w


def gauss_on(a, b, n):
    x, w = gauss_rule(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def log_graded_nodes(lo, hi, panels, q):
    """Composite Gauss rule on [lo, hi] with geometrically graded panels at lo."""
    if not (0 < lo < hi):
        raise ValueError("log grading needs 0 < lo < hi")
    edges = lo * (hi / lo) ** (np.arange(panels + 1) / panels)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_on(a, b, q)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# grid


class Grid:
    """Cell-centered lattice with a membership mask and clipped cell volumes."""

    def __init__(self, lo, h, shape, mask, vol, domain=None):
        self.lo = np.asarray(lo, dtype=float)
        self.h = float(h)
        self.shape = tuple(shape)
        self.dim = len(self.shape)
        self.mask = mask
        self.vol = vol
        self.domain = domain
        self.axes = tuple(
            self.lo[a] + (np.arange(self.shape[a]) + 0.5) * self.h for a in range(self.dim)
        )
        self._pts = None

    @classmethod
    def from_domain(cls, domain, h, pad=0.0):
        """Masked grid covering the domain's bounding box plus padding."""
        lo, hi = domain.bbox()
        lo = np.asarray(lo, float) - pad
        hi = np.asarray(hi, float) + pad
        shape = tuple(int(np.ceil((hi[a] - lo[a]) / h - 1e-12)) for a in range(lo.size))
        grid = cls(lo, h, shape, None, None, domain=domain)
        grid._build_mask(domain)
        return grid

    @classmethod
    def box(cls, lo, hi, h):
        """Unmasked grid over a box; every cell has full volume."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        shape = tuple(int(np.ceil((hi[a] - lo[a]) / h - 1e-12)) for a in range(lo.size))
        mask = np.ones(shape, dtype=bool)
        vol = np.full(shape, h ** len(shape))
        return cls(lo, h, shape, mask, vol)

    def _build_mask(self, domain):
        pts = self.points()
        center_in = domain.contains(pts)
        # classify by cell corners: cells with all corners and the center on
        # one side are taken as fully inside / outside
        corner_axes = tuple(self.lo[a] + np.arange(self.shape[a] + 1) * self.h
                            for a in range(self.dim))
        cg = np.stack(np.meshgrid(*corner_axes, indexing="ij"), axis=-1)
        corner_in = domain.contains(cg)
        if self.dim == 2:
            c00 = corner_in[:-1, :-1]
            c01 = corner_in[:-1, 1:]
            c10 = corner_in[1:, :-1]
            c11 = corner_in[1:, 1:]
            n_in = (c00.astype(np.int8) + c01 + c10 + c11)
            all_in = (n_in == 4) & center_in
            any_in = (n_in > 0) | center_in
        else:
            n_in = np.zeros(self.shape, dtype=np.int8)
            for dx in (slice(None, -1), slice(1, None)):
                for dy in (slice(None, -1), slice(1, None)):
                    for dz in (slice(None, -1), slice(1, None)):
                        n_in += corner_in[dx, dy, dz]
            all_in = (n_in == 8) & center_in
            any_in = (n_in > 0) | center_in
        frac = np.where(all_in, 1.0, 0.0)
        straddle = any_in & ~all_in
        idx = np.argwhere(straddle)
        if idx.size:
            offs = self._subcell_offsets()
            centers = self.lo + (idx + 0.5) * self.h
            sub = centers[:, None, :] + offs[None, :, :] * self.h
            inside = domain.contains(sub)
            frac[tuple(idx.T)] = inside.mean(axis=1)
        self.vol = frac * self.h ** self.dim
        self.mask = frac > 0.0

    def _subcell_offsets(self):
        if self.dim == 2:
            # 3x3 lattice plus the center: the 10-point cell sample
            g = (np.arange(3) - 1.0) / 3.0
            offs = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
            return np.concatenate([offs, np.zeros((1, 2))], axis=0)
        g = (np.arange(3) - 1.0) / 3.0
        return np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)

    def points(self):
        if self._pts is None:
            mesh = np.meshgrid(*self.axes, indexing="ij")
            self._pts = np.stack(mesh, axis=-1)
        return self._pts

    def masked_points(self):
        return self.points()[self.mask]

    def interior_mask(self, margin):
        """Mask eroded by ``margin`` cells (box edges count as outside)."""
        if margin <= 0:
            return self.mask.copy()
        structure = ndimage.generate_binary_structure(self.dim, self.dim)
        return ndimage.binary_erosion(self.mask, structure=structure,
                                      iterations=int(margin), border_value=0)

    def index_of(self, x):
        """Indices of the cell whose center is nearest to x."""
        x = np.asarray(x, dtype=float)
        idx = np.round((x - self.lo) / self.h - 0.5).astype(int)
        return tuple(np.clip(idx[a], 0, self.shape[a] - 1) for a in range(self.dim))

    def node_at(self, x):
        idx = self.index_of(x)
        return self.lo + (np.asarray(idx) + 0.5) * self.h, idx

    def interp(self, values, pts):
        """Multilinear interpolation of node values at arbitrary points."""
        values = np.asarray(values)
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, self.dim)
        u = (flat - self.lo) / self.h - 0.5
        i0 = np.floor(u).astype(int)
        frac = u - i0
        comp_shape = values.shape[self.dim:]
        out = np.zeros((flat.shape[0],) + comp_shape)
        for corner in range(2 ** self.dim):
            w = np.ones(flat.shape[0])
            idx = []
            for a in range(self.dim):
                bit = (corner >> a) & 1
                ia = np.clip(i0[:, a] + bit, 0, self.shape[a] - 1)
                w = w * np.where(bit, frac[:, a], 1.0 - frac[:, a])
                # points outside the box interpolate to zero
                w = w * ((u[:, a] >= -0.5) & (u[:, a] <= self.shape[a] - 0.5))
                idx.append(ia)
            out += w.reshape(-1, *([1] * len(comp_shape))) * values[tuple(idx)]
        return out.reshape(pts.shape[:-1] + comp_shape)


@dataclass
class GridField:
    """Values on grid nodes; support_flag asserts zeros off the mask."""

    grid: Grid
    values: np.ndarray
    support_flag: bool = False

    @classmethod
    def from_function(cls, grid, fn, support=False):
        vals = fn(grid.points())
        if support:
            vals = np.where(grid.mask[(...,) + (None,) * (vals.ndim - grid.dim)]
                            if vals.ndim > grid.dim else grid.mask, vals, 0.0)
        return cls(grid=grid, values=np.asarray(vals, dtype=float), support_flag=support)


def integrate_values(grid, values):
    """Masked midpoint sum with clipped boundary-cell volumes."""
    return float(np.sum(np.asarray(values) * grid.vol))


def integrate(field):
    return integrate_values(field.grid, field.values)


# ---------------------------------------------------------------------------
# finite differences


def fd_gradient(grid, values):
    """Gradient by centered differences, one-sided at mask and box edges.

    Parameters
    ----------
    grid : Grid
    values : ndarray
        Shape ``grid.shape`` (scalar) or ``grid.shape + (m,)`` (vector).

    Returns
    -------
    grad : ndarray
        ``grid.shape + (dim,)`` for scalar input, ``grid.shape + (m, dim)``
        for vector input, with component (i, j) holding d u_i / d x_j.
    stencils : ndarray of int8
        Per node and axis: +2 centered, +1 forward, -1 backward, 0 none.
    """
    values = np.asarray(values, dtype=float)
    scalar = values.ndim == grid.dim
    comps = (1,) if scalar else values.shape[grid.dim:]
    vals = values.reshape(grid.shape + (-1,))
    dim = grid.dim
    grad = np.zeros(grid.shape + (vals.shape[-1], dim))
    sten = np.zeros(grid.shape + (dim,), dtype=np.int8)
    mask = grid.mask
    for a in range(dim):
        plus = np.zeros_like(mask)
        minus = np.zeros_like(mask)
        src = [slice(None)] * dim
        dst = [slice(None)] * dim
        src[a] = slice(1, None)
        dst[a] = slice(None, -1)
        plus[tuple(dst)] = mask[tuple(src)]
        minus[tuple(src)] = mask[tuple(dst)]
        vp = np.zeros_like(vals)
        vm = np.zeros_like(vals)
        vp[tuple(dst)] = vals[tuple(src)]
        vm[tuple(src)] = vals[tuple(dst)]
        both = mask & plus & minus
        fwd = mask & plus & ~minus
        bwd = mask & minus & ~plus
        g = np.zeros_like(vals)
        g[both] = (vp[both] - vm[both]) / (2.0 * grid.h)
        g[fwd] = (vp[fwd] - vals[fwd]) / grid.h
        g[bwd] = (vals[bwd] - vm[bwd]) / grid.h
        grad[..., a] = g
        sten[..., a][both] = 2
        sten[..., a][fwd] = 1
        sten[..., a][bwd] = -1
    if scalar:
        grad = grad.reshape(grid.shape + (dim,))
    else:
        grad = grad.reshape(grid.shape + comps + (dim,))
    return grad, sten


# ---------------------------------------------------------------------------
# polar patches


def _face_dirs(dim):
    if dim == 2:
        return [0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi]
    eye = np.eye(3)
    return [eye[0], -eye[0], eye[1], -eye[1], eye[2], -eye[2]]


def collar_nodes(dim, a, eps, n_ang=16, n_rad=10):
    """Quadrature for the square/cube collar {eps <= |z|, |z|_inf <= a}.

    Returns offsets (P, dim) and weights (P,) such that
    sum w * g(z) approximates the integral of g over the collar.
    With eps = 0 the rule covers the whole square/cube.
    """
    offs, wts = [], []
    if dim == 2:
        for th_c in _face_dirs(2):
            th, w_th = gauss_on(th_c - 0.25 * np.pi, th_c + 0.25 * np.pi, n_ang)
            rmax = a / np.cos(th - th_c)
            for t, wt, rm in zip(th, w_th, rmax):
                lo = min(eps, rm)
                r, w_r = gauss_on(lo, rm, n_rad)
                offs.append(np.stack([r * np.cos(t), r * np.sin(t)], axis=-1))
                wts.append(wt * w_r * r)
        return np.concatenate(offs), np.concatenate(wts)
    for nhat in _face_dirs(3):
        nhat = np.asarray(nhat, float)
        t1 = np.zeros(3)
        t1[(int(np.argmax(np.abs(nhat))) + 1) % 3] = 1.0
        t2 = np.cross(nhat, t1)
        u, wu = gauss_on(-a, a, n_ang)
        v, wv = gauss_on(-a, a, n_ang)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        ww = np.outer(wu, wv)
        p = a * nhat[None, :] + uu.reshape(-1, 1) * t1 + vv.reshape(-1, 1) * t2
        pn = np.linalg.norm(p, axis=-1)
        dod = a * ww.ravel() / pn ** 3  # solid-angle element of the face patch
        sig = p / pn[:, None]
        for k in range(p.shape[0]):
            lo = min(eps, pn[k])
            r, w_r = gauss_on(lo, pn[k], n_rad)
            offs.append(r[:, None] * sig[k][None, :])
            wts.append(dod[k] * w_r * r ** 2)
    return np.concatenate(offs), np.concatenate(wts)


# ---------------------------------------------------------------------------
# principal values


@dataclass
class PVResult:
    value: np.ndarray
    defect: float
    levels: np.ndarray = field(repr=False)
    eps_levels: tuple = ()


def _richardson(levels, ratio):
    tab = [np.asarray(levels, dtype=float)]
    m = len(levels)
    for order in range(1, m):
        prev = tab[-1]
        fac = ratio ** order
        tab.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
    return tab


def pv_integral(grid, density, x, kernel, eps_levels, n_ang=16, n_rad=10):
    """Principal value of kernel*density over the grid, extrapolated in eps.

    Parameters
    ----------
    grid : Grid
    density : ndarray
        Node values of the density (zero off its support).
    x : array_like
        Singular point; must coincide with a grid node.
    kernel : callable
        Maps points (..., dim) to kernel values; trailing component axes
        are carried through.
    eps_levels : sequence of float
        Strictly decreasing truncation radii, smallest >= 2h.

    Returns
    -------
    PVResult
    """
    eps_levels = tuple(float(e) for e in eps_levels)
    if len(eps_levels) < 2:
        raise ValueError("need at least two eps levels")
    if any(b >= a for a, b in zip(eps_levels, eps_levels[1:])):
        raise ValueError("eps levels must be strictly decreasing")
    if eps_levels[-1] < 2.0 * grid.h - 1e-12:
        raise ValueError("smallest eps must be at least 2h")
    x = np.asarray(x, dtype=float)
    node, _ = grid.node_at(x)
    if np.max(np.abs(node - x)) > 1e-9 * grid.h:
        raise ValueError("pv singular point must sit on a grid node")

    pts = grid.points()
    cheb = np.max(np.abs(pts - x), axis=-1)
    sums = []
    ms = [int(np.ceil(e / grid.h - 1e-12)) for e in eps_levels]
    # evaluate the kernel once on every node the widest level integrates
    live = grid.mask & (cheb > (min(ms) + 0.5) * grid.h)
    kv = kernel(pts[live])
    comp_shape = kv.shape[1:]
    weighted = kv * (np.asarray(density)[live] * grid.vol[live]).reshape(
        (-1,) + (1,) * len(comp_shape))
    cheb_live = cheb[live]
    for m in ms:
        sel = cheb_live > (m + 0.5) * grid.h
        sums.append(weighted[sel].sum(axis=0))

    levels = []
    for e, m, s in zip(eps_levels, ms, sums):
        a = (m + 0.5) * grid.h
        offs, w = collar_nodes(grid.dim, a, e, n_ang=n_ang, n_rad=n_rad)
        ppts = x + offs
        dens = grid.interp(density, ppts)
        kcol = kernel(ppts)
        patch = np.sum(
            kcol * (w * dens).reshape((-1,) + (1,) * len(comp_shape)), axis=0)
        levels.append(s + patch)
    levels = np.stack(levels, axis=0)

    diffs = np.linalg.norm((levels[1:] - levels[:-1]).reshape(len(levels) - 1, -1), axis=1)
    if len(diffs) >= 2:
        scale = diffs[0] + 1e-30
        if np.any(diffs[1:] > 10.0 * scale + 1e-14):
            raise ExtrapolationDiverged(
                f"pv level differences grew: {diffs.tolist()}")
    ratio = eps_levels[0] / eps_levels[1]
    tab = _richardson(levels, ratio)
    value = tab[-1][-1]
    prev = tab[-2][-1]
    defect = float(np.max(np.abs(value - prev)))
    return PVResult(value=value, defect=defect, levels=levels, eps_levels=eps_levels)
