"""Catalog of analytic inputs: named closed-form fields for the CLI and
the sweep families used by the verification drivers.

Scalar entries are callables pts -> values with .name and .params; vector
families expose u / grad / hess closed forms so oracles never have to
differentiate numerically.
"""

import math

import numpy as np

from .domain import make_bump
from .quadrature import GridField


# ---------------------------------------------------------------------------
# scalar catalog


class AnalyticInput:
    """Closed-form scalar field with a parseable identity."""

    def __init__(self, name, fn, params):
        self.name = name
        self._fn = fn
        self.params = dict(params)

    def __call__(self, pts):
        return self._fn(np.asarray(pts, dtype=float))

    def sample(self, grid, support=True):
        vals = self(grid.points())
        if support:
            vals = np.where(grid.mask, vals, 0.0)
        return GridField(grid, vals, support_flag=support)


def _mk_dipole(dim=2, x1=0.3, y1=0.0, z1=0.0, r1=0.2,
               x2=-0.3, y2=0.0, z2=0.0, r2=0.2):
    c1 = np.array([x1, y1, z1][:int(dim)])
    c2 = np.array([x2, y2, z2][:int(dim)])
    b1 = make_bump(c1, r1)
    b2 = make_bump(c2, r2)
    return lambda pts: b1(pts) - b2(pts)


def _mk_holder(dim=2, alpha=0.5, x=0.0, y=0.0, z=0.0, radius=0.6):
    c = np.array([x, y, z][:int(dim)])
    cut = make_bump(c, radius)
    scale = float(cut(c[None])[0])

    def fn(pts):
        d = np.linalg.norm(np.asarray(pts) - c, axis=-1)
        return d ** alpha * cut(pts) / scale

    return fn


def _mk_trig_scalar(dim=2, kx=2.0, ky=1.0, kz=0.0, phase=0.0, amp=1.0):
    k = np.array([kx, ky, kz][:int(dim)])

    def fn(pts):
        return amp * np.sin(np.asarray(pts) @ k + phase)

    return fn


def _mk_log_probe(dim=2, x=-1.0, y=0.0, z=0.0):
    c = np.array([x, y, z][:int(dim)])

    def fn(pts):
        d = np.linalg.norm(np.asarray(pts) - c, axis=-1)
        return np.log(np.maximum(d, 1e-300))

    return fn


def _mk_atom(dim=2, x=0.0, y=0.0, z=0.0, rho=0.2, p=1.0):
    c = np.array([x, y, z][:int(dim)])
    half = rho / 4.0
    e = np.zeros(int(dim))
    e[0] = rho / 4.0
    b1 = make_bump(c + e, half)
    b2 = make_bump(c - e, half)
    peak = float(b1((c + e)[None])[0])
    amp = rho ** (-int(dim) / p) / peak

    def fn(pts):
        return amp * (b1(pts) - b2(pts))

    return fn


CATALOG = {
    "dipole": _mk_dipole,
    "holder-bump": _mk_holder,
    "trig": _mk_trig_scalar,
    "log-probe": _mk_log_probe,
    "atom": _mk_atom,
}


def parse_analytic(text):
    """Parse "name" or "name:key=val,key=val" into an AnalyticInput."""
    name, _, tail = text.partition(":")
    name = name.strip()
    if name not in CATALOG:
        raise ValueError(
            "unknown analytic input %r (have: %s)" % (name, ", ".join(sorted(CATALOG))))
    params = {}
    if tail.strip():
        for item in tail.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError("bad parameter %r in %r" % (item, text))
            key = key.strip()
            try:
                params[key] = float(val)
            except ValueError:
                params[key] = val.strip()
    fn = CATALOG[name](**params)
    return AnalyticInput(name, fn, params)


# ---------------------------------------------------------------------------
# sweep families (scalar inputs)


def dipole_family(grid, dom, n=20, seed=42, r_lo=0.05, r_hi=0.4):
    """Zero-mean dipoles spanning radii r_lo..r_hi and positions."""
    rng = np.random.default_rng(seed)
    lo, hi = dom.bbox()
    span = float(np.min(hi - lo)) / 2.0
    center = 0.5 * (np.asarray(lo) + np.asarray(hi))
    out = []
    for i in range(n):
        r = math.exp(rng.uniform(math.log(r_lo), math.log(r_hi)))
        # both bumps inside: centers within span - r - offset margin
        room = span - 2.2 * r
        for _ in range(100):
            c = center + rng.uniform(-room, room, size=grid.dim)
            d = rng.normal(size=grid.dim)
            d *= 1.1 * r / np.linalg.norm(d)
            if np.all(dom.contains(np.stack([c + d, c - d]), tol=-1.05 * r)):
                break
        b1 = make_bump(c + d, r)
        b2 = make_bump(c - d, r)
        pts = grid.points()
        vals = b1(pts) - b2(pts)
        out.append(("dipole-%02d-r%.3f" % (i, r),
                    GridField(grid, vals, support_flag=True)))
    return out


def holder_family(grid, dom, alpha, n=10, seed=7, radius=0.45):
    """Mean-corrected Holder bumps |x - x_i|^alpha at scattered centers."""
    rng = np.random.default_rng(seed)
    lo, hi = dom.bbox()
    center = 0.5 * (np.asarray(lo) + np.asarray(hi))
    span = float(np.min(hi - lo)) / 2.0
    room = max(span - radius - 0.05, 0.05)
    corr = make_bump(center, 0.9 * span)
    pts = grid.points()
    corr_vals = corr(pts)
    # normalize by the discrete mass so the corrected mean is exactly zero
    corr_vals = corr_vals / float(np.sum(corr_vals * grid.vol))
    out = []
    for i in range(n):
        for _ in range(100):
            c = center + rng.uniform(-room, room, size=grid.dim)
            if dom.contains(c[None], tol=-radius)[0]:
                break
        fn = _mk_holder(dim=grid.dim, alpha=alpha, **dict(zip("xyz", c)))
        vals = fn(pts)
        mean = float(np.sum(vals * grid.vol))
        vals = vals - mean * corr_vals
        out.append(("holder-%02d-a%.2f" % (i, alpha),
                    GridField(grid, vals, support_flag=True)))
    return out


def atom_family(grid, dom, p, scales=(0.05, 0.1, 0.2, 0.4), seed=11):
    """Zero-mean atoms, one per scale, sup-normalized like rho^(-n/p)."""
    rng = np.random.default_rng(seed)
    lo, hi = dom.bbox()
    center = 0.5 * (np.asarray(lo) + np.asarray(hi))
    pts = grid.points()
    out = []
    for rho in scales:
        c = center + rng.uniform(-0.2, 0.2, size=grid.dim)
        fn = _mk_atom(dim=grid.dim, rho=rho, p=p, **dict(zip("xyz", c)))
        out.append(("atom-rho%.3f" % rho,
                    GridField(grid, fn(pts), support_flag=True)))
    return out


# ---------------------------------------------------------------------------
# vector families (korn)


class TrigVector:
    """u_i(x) = sum_m A[m, i] sin(k_m . x + phase_m), entire in x."""

    def __init__(self, name, ks, phases, amps):
        self.name = name
        self.ks = np.asarray(ks, dtype=float)
        self.phases = np.asarray(phases, dtype=float)
        self.amps = np.asarray(amps, dtype=float)

    def u(self, pts):
        pts = np.asarray(pts, dtype=float)
        arg = pts @ self.ks.T + self.phases
        return np.sin(arg) @ self.amps

    def grad(self, pts):
        pts = np.asarray(pts, dtype=float)
        arg = pts @ self.ks.T + self.phases
        cos = np.cos(arg)
        return np.einsum("...m,mi,mj->...ij", cos, self.amps, self.ks)

    def hess(self, pts):
        pts = np.asarray(pts, dtype=float)
        arg = pts @ self.ks.T + self.phases
        sin = np.sin(arg)
        return -np.einsum("...m,mi,mk,mj->...ikj", sin, self.amps,
                          self.ks, self.ks)


class PolyVector:
    """Vector field with polynomial components given by exponent tuples."""

    def __init__(self, name, exponents, coefs):
        self.name = name
        self.exponents = np.asarray(exponents, dtype=int)
        self.coefs = np.asarray(coefs, dtype=float)

    def _mono(self, pts, exps):
        out = np.ones(np.asarray(pts).shape[:-1])
        for a, e in enumerate(exps):
            if e:
                out = out * np.asarray(pts)[..., a] ** e
        return out

    def u(self, pts):
        pts = np.asarray(pts, dtype=float)
        vals = np.stack([self._mono(pts, e) for e in self.exponents], axis=-1)
        return vals @ self.coefs

    def grad(self, pts):
        pts = np.asarray(pts, dtype=float)
        dim = pts.shape[-1]
        cols = []
        for e in self.exponents:
            row = []
            for j in range(dim):
                if e[j] == 0:
                    row.append(np.zeros(pts.shape[:-1]))
                else:
                    de = e.copy()
                    de[j] -= 1
                    row.append(e[j] * self._mono(pts, de))
            cols.append(np.stack(row, axis=-1))
        dm = np.stack(cols, axis=0)
        return np.einsum("m...j,mi->...ij", dm, self.coefs)

    def hess(self, pts):
        pts = np.asarray(pts, dtype=float)
        dim = pts.shape[-1]
        mats = []
        for e in self.exponents:
            mat = np.zeros(pts.shape[:-1] + (dim, dim))
            for k in range(dim):
                if e[k] == 0:
                    continue
                for j in range(dim):
                    de = e.copy()
                    de[k] -= 1
                    if de[j] == 0:
                        continue
                    dde = de.copy()
                    dde[j] -= 1
                    mat[..., k, j] = e[k] * de[j] * self._mono(pts, dde)
            mats.append(mat)
        dm = np.stack(mats, axis=0)
        return np.einsum("m...kj,mi->...ikj", dm, self.coefs)


class RigidMotion:
    """u(x) = a + W x with W skew; the strain kernel."""

    def __init__(self, name, a, W):
        self.name = name
        self.a = np.asarray(a, dtype=float)
        self.W = np.asarray(W, dtype=float)
        if not np.allclose(self.W, -self.W.T):
            raise ValueError("W must be skew-symmetric")

    def u(self, pts):
        return np.asarray(pts, dtype=float) @ self.W.T + self.a

    def grad(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(self.W, pts.shape[:-1] + self.W.shape).copy()

    def hess(self, pts):
        pts = np.asarray(pts, dtype=float)
        n = pts.shape[-1]
        return np.zeros(pts.shape[:-1] + (n, n, n))


def trig_vector_family(n_members, dim=2, seed=42, max_k=4, modes=3):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_members):
        ks = np.zeros((modes, dim))
        while np.any(np.all(ks == 0, axis=1)):
            ks = rng.integers(-max_k, max_k + 1, size=(modes, dim)).astype(float)
        phases = rng.uniform(0.0, 2.0 * math.pi, size=modes)
        amps = rng.normal(size=(modes, dim))
        out.append(TrigVector("trig-%02d" % i, ks, phases, amps))
    return out


def cubic_vector_family(n_members, dim=2, seed=42):
    rng = np.random.default_rng(seed)
    exps = []
    for total in range(4):
        if dim == 2:
            exps += [[a, total - a] for a in range(total + 1)]
        else:
            exps += [[a, b, total - a - b] for a in range(total + 1)
                     for b in range(total + 1 - a)]
    exps = np.asarray(exps, dtype=int)
    out = []
    for i in range(n_members):
        coefs = rng.normal(size=(exps.shape[0], dim))
        out.append(PolyVector("cubic-%02d" % i, exps, coefs))
    return out


def korn_family(n_members=20, dim=2, seed=42, trig_fraction=0.7):
    """Seeded mix of trig and random cubic vector fields."""
    n_trig = int(round(trig_fraction * n_members))
    trig = trig_vector_family(n_trig, dim=dim, seed=seed)
    cubic = cubic_vector_family(n_members - n_trig, dim=dim, seed=seed + 1)
    return trig + cubic


def rigid_motion(dim=2, seed=3):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(dim, dim))
    W = 0.5 * (W - W.T)
    return RigidMotion("rigid", rng.normal(size=dim), W)
