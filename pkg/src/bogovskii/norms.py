"""Size measurement for grid fields: Lebesgue, local Hardy, Hoelder, bmo.

The local Hardy quasinorm runs a smooth local maximal function over a
ladder of scales; the discrete smoothing kernels are renormalized to unit
mass at every scale, so constants survive refinement and the zero-scale
limit returns |f| itself.

Matrix fields aggregate per entry: p-th power sums for the Lebesgue and
Hardy scales, entrywise maximum for Hoelder and bmo.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from .errors import OutOfRegime, PaddingRequired

_SUPPORT_TOL = 1e-13


def _entry_fields(values, dim):
    """Split (..., extra) grid values into a list of scalar fields."""
    values = np.asarray(values, dtype=float)
    if values.ndim == dim:
        return [values]
    lead = values.shape[:dim]
    return [c for c in values.reshape(lead + (-1,)).transpose(
        (dim,) + tuple(range(dim)))]


def lp_norm(values, grid, p):
    """(integral |f|^p)^(1/p) with cell volumes; a quasinorm for p < 1."""
    if p <= 0:
        raise ValueError("p must be positive")
    fields = _entry_fields(values, grid.dim)
    total = 0.0
    for f in fields:
        total += float(np.sum(np.abs(f) ** p * grid.vol))
    return total ** (1.0 / p)


@dataclass
class MaximalConfig:
    """Smoothing profile and scale ladder for the local maximal function.

    The profile is a unit-mass mollifier phi; scales default to the dyadic
    ladder 2^-k, k = 0..8 (all within the local regime t <= 1; append
    larger levels for the global variant).  The smallest default scale
    falls below one grid step at usual resolutions, where the discrete
    kernel degenerates to the identity and the ladder bottoms out at |f|.
    """

    test_function: object = None     # Mollifier; None -> unit bump at 0
    t_levels: tuple = tuple(2.0 ** -k for k in range(9))
    support_tol: float = _SUPPORT_TOL

    def profile(self, dim):
        if self.test_function is not None:
            return self.test_function
        from .domain import make_bump
        return make_bump(np.zeros(dim), 1.0)


def _level_kernel(phi, t, h, dim):
    """Discrete smoothing kernel at scale t, renormalized to unit mass."""
    m = int(np.floor(t * phi.radius / h + 1e-12))
    axes = [np.arange(-m, m + 1) * h for _ in range(dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    ker = phi(phi.center + mesh / t)
    s = ker.sum()
    if s <= 0.0:
        ker = np.zeros_like(ker)
        ker[(m,) * dim] = 1.0
        return ker
    return ker / s


def local_maximal(values, grid, cfg=None, enforce_margin=True):
    """Pointwise max over scales of the smoothed field |phi_t * f|.

    enforce_margin=False skips the support check, for fields that fill the
    box by design (analytic extensions compared on a common box); the
    convolution then treats everything outside the box as zero.

    Raises
    ------
    PaddingRequired
        If f has support within t_max of the box faces: the convolution
        would read values from outside the box, silently treated as zero.
    """
    cfg = cfg or MaximalConfig()
    dim = grid.dim
    fields = _entry_fields(values, dim)
    phi = cfg.profile(dim)
    levels = sorted(cfg.t_levels)
    margin = int(np.floor(levels[-1] * phi.radius / grid.h + 1e-12))
    if margin > 0 and enforce_margin:
        crop = np.ones(grid.shape, dtype=bool)
        core = tuple(slice(margin, s - margin) for s in grid.shape)
        crop[core] = False
        vmax = max(float(np.max(np.abs(f))) for f in fields)
        for f in fields:
            if np.any(np.abs(f[crop]) > cfg.support_tol * max(vmax, 1.0)):
                raise PaddingRequired(
                    f"support within {levels[-1] * phi.radius:.3g} of the box "
                    "faces; build the grid with padding at least that wide")
    out = []
    for f in fields:
        m = np.abs(f).copy()
        for t in levels:
            ker = _level_kernel(phi, t, grid.h, dim)
            if ker.shape == (1,) * dim:
                continue
            if ker.size > 1024:
                sm = fftconvolve(f, ker, mode="same")
            else:
                sm = ndimage.convolve(f, ker, mode="constant", cval=0.0)
            np.maximum(m, np.abs(sm), out=m)
        out.append(m)
    if len(out) == 1:
        return out[0]
    return np.stack(out, axis=-1)


def hp_quasinorm(values, grid, p, cfg=None, enforce_margin=True):
    """Local Hardy quasinorm: Lp of the local maximal function.

    The natural regime is n/(n+1) < p <= 1; outside it the value is still
    computed but an OutOfRegime warning is issued.
    """
    dim = grid.dim
    lo = dim / (dim + 1.0)
    if not lo < p <= 1.0:
        warnings.warn(
            f"p={p} outside the local Hardy regime ({lo:.3g}, 1]",
            OutOfRegime, stacklevel=2)
    m = local_maximal(values, grid, cfg, enforce_margin=enforce_margin)
    return lp_norm(m, grid, p)


def holder_seminorm(values, grid, alpha, max_offset=4, n_long=4000, seed=1234):
    """sup |f(x) - f(y)| / |x - y|^alpha over grid node pairs.

    Every pair within max_offset steps is checked exactly through array
    shifts; longer separations are covered by a seeded sample of pairs
    with log-uniform distances.  Only in-mask nodes participate.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    values = np.asarray(values, dtype=float)
    dim = grid.dim
    if values.shape != grid.shape:
        raise ValueError("holder_seminorm expects a scalar field")
    best = 0.0
    offs = _short_offsets(dim, max_offset)
    for off in offs:
        dist = np.linalg.norm(off) * grid.h
        src = tuple(slice(max(o, 0), s + min(o, 0))
                    for o, s in zip(off, grid.shape))
        dst = tuple(slice(max(-o, 0), s + min(-o, 0))
                    for o, s in zip(off, grid.shape))
        both = grid.mask[src] & grid.mask[dst]
        if not np.any(both):
            continue
        diff = np.abs(values[src] - values[dst])[both]
        best = max(best, float(diff.max()) / dist ** alpha)
    pts = grid.masked_points()
    vals = values[grid.mask]
    rng = np.random.default_rng(seed)
    m = pts.shape[0]
    if m > 1 and n_long > 0:
        i = rng.integers(0, m, size=n_long)
        j = rng.integers(0, m, size=n_long)
        keep = i != j
        i, j = i[keep], j[keep]
        d = np.linalg.norm(pts[i] - pts[j], axis=-1)
        ratio = np.abs(vals[i] - vals[j]) / d ** alpha
        if ratio.size:
            best = max(best, float(ratio.max()))
    return best


def _short_offsets(dim, max_offset):
    rng = range(-max_offset, max_offset + 1)
    out = []
    if dim == 2:
        for a in rng:
            for b in rng:
                off = (a, b)
                if off > (0, 0) and a * a + b * b <= max_offset ** 2:
                    out.append(off)
    else:
        for a in rng:
            for b in rng:
                for c in rng:
                    off = (a, b, c)
                    if off > (0, 0, 0) and a*a + b*b + c*c <= max_offset ** 2:
                        out.append(off)
    return out


def holder_norm(values, grid, alpha, **kw):
    """Entrywise-max Hoelder data: (sup |f|, seminorm, their sum)."""
    fields = _entry_fields(values, grid.dim)
    semi = max(holder_seminorm(f, grid, alpha, **kw) for f in fields)
    sup = max(float(np.max(np.abs(f[grid.mask]))) for f in fields)
    return sup, semi, sup + semi


def bmo_norm(values, grid, n_centers=160, seed=1234, small_scale=None):
    """Two-regime bmo norm on grid cubes.

    Cubes of side up to 2 measure mean oscillation; larger cubes measure
    the plain mean of |f|.  Cube sides run over a dyadic ladder; centers
    are a seeded node sample per scale.  Entrywise max for matrix fields.
    """
    dim = grid.dim
    fields = _entry_fields(values, dim)
    rng = np.random.default_rng(seed)
    nmax = max(grid.shape)
    halves = []
    k = 1
    while k <= nmax:
        halves.append(k)
        k *= 2
    idx_all = np.argwhere(grid.mask)
    best = 0.0
    for half in halves:
        side = (2 * half + 1) * grid.h
        osc_regime = side <= 2.0 if small_scale is None else side <= small_scale
        take = min(n_centers, idx_all.shape[0])
        sel = idx_all[rng.choice(idx_all.shape[0], size=take, replace=False)]
        for c in sel:
            window = tuple(slice(max(ci - half, 0), min(ci + half + 1, s))
                           for ci, s in zip(c, grid.shape))
            wmask = grid.mask[window]
            cnt = int(wmask.sum())
            if cnt == 0:
                continue
            for f in fields:
                w = f[window][wmask]
                if osc_regime:
                    mu = w.mean()
                    cand = float(np.abs(w - mu).mean())
                else:
                    cand = float(np.abs(w).mean())
                if cand > best:
                    best = cand
    return best


def lipschitz_ratio_sweep(family, alpha, dom, mol=None, cutoff=None, cfg=None,
                          **kw):
    """Holder/bmo operator-norm ratio sweep; see solver.lipschitz_ratio_sweep.

    Lives logically with the norm estimators but needs the decomposition
    machinery, so the implementation sits in the solver module.
    """
    from .solver import lipschitz_ratio_sweep as impl

    return impl(family, alpha, dom, mol=mol, cutoff=cutoff, cfg=cfg, **kw)
