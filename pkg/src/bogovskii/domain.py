"""Star-shaped domains, mollifiers, cutoffs, and zero-mean decompositions.

A star domain is a bounded shape star-shaped with respect to a ball B.
The mollifier omega lives in B and normalizes to unit integral; the cutoff
chi is identically 1 on the closed domain and vanishes outside the bounding
ball inflated by 20 percent.  Lipschitz domains are finite unions of star
pieces chained by overlap bumps, used to transfer mean-zero mass piece to
piece.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import InvalidDomain, MeanNotZero, SupportViolation

_TMIN = 1e-13  # below this 1 - |z|^2 is treated as outside the bump support


def _expstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, strictly monotone between."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    out[t >= 1.0] = 1.0
    mid = (t > 0.0) & (t < 1.0)
    if np.any(mid):
        tm = t[mid]
        a = np.exp(-1.0 / tm)
        b = np.exp(-1.0 / (1.0 - tm))
        out[mid] = a / (a + b)
    return out


def _as_points(x, dim):
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != dim:
        raise ValueError(f"expected points with last axis {dim}, got {pts.shape}")
    return pts


# ---------------------------------------------------------------------------
# shapes


class Ball:
    """Closed ball (disk in 2d)."""

    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise InvalidDomain("ball radius must be positive")
        self.dim = self.center.size

    def contains(self, pts, tol=0.0):
        pts = _as_points(pts, self.dim)
        d = np.linalg.norm(pts - self.center, axis=-1)
        return d <= self.radius + tol

    def boundary_points(self, m):
        if self.dim == 2:
            th = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
            return self.center + self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
        return self.center + self.radius * _sphere_directions(m)

    def diameter(self):
        return 2.0 * self.radius

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def max_dist_from(self, p):
        return float(np.linalg.norm(np.asarray(p, float) - self.center) + self.radius)

    def profile(self, pts, taper):
        d = np.linalg.norm(_as_points(pts, self.dim) - self.center, axis=-1)
        return _expstep((self.radius - d) / taper)


class Ellipsoid:
    """Axis-aligned ellipse / ellipsoid."""

    kind = "ellipsoid"

    def __init__(self, center, semiaxes):
        self.center = np.asarray(center, dtype=float)
        self.semiaxes = np.asarray(semiaxes, dtype=float)
        if np.any(self.semiaxes <= 0):
            raise InvalidDomain("ellipsoid semiaxes must be positive")
        if self.center.size != self.semiaxes.size:
            raise InvalidDomain("center and semiaxes dimension mismatch")
        self.dim = self.center.size

    def _q(self, pts):
        z = (_as_points(pts, self.dim) - self.center) / self.semiaxes
        return np.sum(z * z, axis=-1)

    def contains(self, pts, tol=0.0):
        # tol is a length; convert through the smallest semiaxis
        return self._q(pts) <= (1.0 + tol / np.min(self.semiaxes)) ** 2

    def boundary_points(self, m):
        if self.dim == 2:
            th = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
            u = np.stack([np.cos(th), np.sin(th)], axis=-1)
        else:
            u = _sphere_directions(m)
        return self.center + u * self.semiaxes

    def diameter(self):
        return 2.0 * float(np.max(self.semiaxes))

    def bbox(self):
        return self.center - self.semiaxes, self.center + self.semiaxes

    def max_dist_from(self, p):
        b = self.boundary_points(8192)
        d = np.linalg.norm(b - np.asarray(p, float), axis=-1)
        return float(np.max(d) * (1.0 + 1e-9))

    def profile(self, pts, taper):
        scale = float(np.min(self.semiaxes))
        return _expstep((1.0 - np.sqrt(np.maximum(self._q(pts), 0.0))) * scale / taper)


class Box:
    """Axis-aligned rectangle / box given by two corners."""

    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise InvalidDomain("box corners must satisfy lo < hi componentwise")
        self.dim = self.lo.size

    def contains(self, pts, tol=0.0):
        pts = _as_points(pts, self.dim)
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=-1)

    def boundary_points(self, m):
        side = self.hi - self.lo
        if self.dim == 2:
            per = 2.0 * float(np.sum(side))
            s = np.linspace(0.0, per, m, endpoint=False)
            pts = np.empty((m, 2))
            w, h = side
            for i, si in enumerate(s):
                if si < w:
                    pts[i] = (self.lo[0] + si, self.lo[1])
                elif si < w + h:
                    pts[i] = (self.hi[0], self.lo[1] + si - w)
                elif si < 2 * w + h:
                    pts[i] = (self.hi[0] - (si - w - h), self.hi[1])
                else:
                    pts[i] = (self.lo[0], self.hi[1] - (si - 2 * w - h))
            return pts
        # 3d: sample all six faces on a per-face lattice
        k = max(2, int(np.sqrt(m / 6)))
        out = []
        for ax in range(3):
            u, v = [a for a in range(3) if a != ax]
            gu = np.linspace(self.lo[u], self.hi[u], k)
            gv = np.linspace(self.lo[v], self.hi[v], k)
            uu, vv = np.meshgrid(gu, gv, indexing="ij")
            for val in (self.lo[ax], self.hi[ax]):
                f = np.empty((k * k, 3))
                f[:, ax] = val
                f[:, u] = uu.ravel()
                f[:, v] = vv.ravel()
                out.append(f)
        return np.concatenate(out, axis=0)

    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def max_dist_from(self, p):
        p = np.asarray(p, float)
        far = np.where(np.abs(p - self.lo) > np.abs(p - self.hi), self.lo, self.hi)
        return float(np.linalg.norm(far - p))

    def profile(self, pts, taper):
        pts = _as_points(pts, self.dim)
        inner = np.minimum(pts - self.lo, self.hi - pts)
        return _expstep(np.min(inner, axis=-1) / taper)


class StarPolygon:
    """Simple 2d polygon given by ordered vertices."""

    kind = "star_polygon"

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InvalidDomain("polygon needs at least three 2d vertices")
        self.vertices = v
        self.dim = 2

    def contains(self, pts, tol=0.0):
        pts = _as_points(pts, 2)
        flat = pts.reshape(-1, 2)
        v = self.vertices
        nv = v.shape[0]
        x, y = flat[:, 0], flat[:, 1]
        inside = np.zeros(flat.shape[0], dtype=bool)
        for i in range(nv):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % nv]
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < np.where(crosses, xint, np.inf))
        if tol > 0:
            near = self._boundary_dist(flat) <= tol
            inside |= near
        return inside.reshape(pts.shape[:-1])

    def _boundary_dist(self, flat):
        v = self.vertices
        nv = v.shape[0]
        best = np.full(flat.shape[0], np.inf)
        for i in range(nv):
            a, b = v[i], v[(i + 1) % nv]
            ab = b - a
            t = np.clip(((flat - a) @ ab) / (ab @ ab), 0.0, 1.0)
            proj = a + t[:, None] * ab
            best = np.minimum(best, np.linalg.norm(flat - proj, axis=-1))
        return best

    def boundary_points(self, m):
        v = self.vertices
        nv = v.shape[0]
        seg = np.array([np.linalg.norm(v[(i + 1) % nv] - v[i]) for i in range(nv)])
        per = float(seg.sum())
        s = np.linspace(0.0, per, m, endpoint=False)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        idx = np.searchsorted(cum, s, side="right") - 1
        idx = np.clip(idx, 0, nv - 1)
        local = (s - cum[idx]) / seg[idx]
        a = v[idx]
        b = v[(idx + 1) % nv]
        return a + local[:, None] * (b - a)

    def diameter(self):
        v = self.vertices
        d = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
        return float(np.max(d))

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def max_dist_from(self, p):
        return float(np.max(np.linalg.norm(self.vertices - np.asarray(p, float), axis=-1)))

    def profile(self, pts, taper):
        pts = _as_points(pts, 2)
        flat = pts.reshape(-1, 2)
        inside = self.contains(flat)
        d = np.where(inside, self._boundary_dist(flat), 0.0)
        return _expstep(d / taper).reshape(pts.shape[:-1])


def _sphere_directions(m):
    """Golden-spiral directions on the unit 2-sphere."""
    i = np.arange(m, dtype=float) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / m)
    theta = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.stack(
        [np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=-1
    )


# ---------------------------------------------------------------------------
# mollifier

_RADIAL_MASS = {}


def _unit_bump_mass(dim):
    """Integral of exp(-1/(1-|z|^2)) over the unit ball in R^dim."""
    if dim not in _RADIAL_MASS:
        def radial(r):
            t = 1.0 - r * r
            return np.exp(-1.0 / t) * r ** (dim - 1) if t > _TMIN else 0.0

        surf = 2.0 * np.pi if dim == 2 else 4.0 * np.pi
        val, _ = quad(radial, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
        _RADIAL_MASS[dim] = surf * val
    return _RADIAL_MASS[dim]


@dataclass
class Mollifier:
    """Normalized smooth bump supported in the closed ball B(center, radius)."""

    center: np.ndarray
    radius: float
    norm_const: float

    @property
    def dim(self):
        return self.center.size

    def __call__(self, pts):
        pts = _as_points(pts, self.dim)
        z = (pts - self.center) / self.radius
        t = 1.0 - np.sum(z * z, axis=-1)
        out = np.zeros(t.shape)
        ok = t > _TMIN
        if np.any(ok):
            out[ok] = self.norm_const * np.exp(-1.0 / t[ok])
        return out

    def grad(self, pts):
        pts = _as_points(pts, self.dim)
        delta = pts - self.center
        t = 1.0 - np.sum((delta / self.radius) ** 2, axis=-1)
        out = np.zeros(pts.shape)
        ok = t > _TMIN
        if np.any(ok):
            val = self.norm_const * np.exp(-1.0 / t[ok])
            coef = -2.0 * val / (self.radius ** 2 * t[ok] ** 2)
            out[ok] = coef[..., None] * delta[ok]
        return out

    def reach(self, y):
        """Largest |w - y| over w in the support ball."""
        y = np.asarray(y, dtype=float)
        return np.linalg.norm(y - self.center, axis=-1) + self.radius

    def ray_interval(self, base, direction):
        """Parameter interval {r : base + r*direction in supp omega}.

        Returns (r_lo, r_hi) arrays; empty intervals come back with
        r_lo > r_hi.  Vectorized over leading axes of base/direction.
        """
        base = np.asarray(base, dtype=float)
        direction = np.asarray(direction, dtype=float)
        p = base - self.center
        a = np.sum(direction * direction, axis=-1)
        b = 2.0 * np.sum(p * direction, axis=-1)
        c = np.sum(p * p, axis=-1) - self.radius ** 2
        disc = b * b - 4.0 * a * c
        bad = (disc <= 0.0) | (a <= 0.0)
        sq = np.sqrt(np.maximum(disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r_lo = np.where(bad, 1.0, (-b - sq) / (2.0 * a))
            r_hi = np.where(bad, 0.0, (-b + sq) / (2.0 * a))
        return r_lo, r_hi


def make_bump(center, radius):
    """Build the normalized mollifier c*exp(-1/(1-|x-c|^2/r^2)) on B(c, r).

    Parameters
    ----------
    center : array_like
        Ball center.
    radius : float
        Ball radius, must be positive.

    Returns
    -------
    Mollifier
        Bump with unit integral (normalization from the cached radial mass).
    """
    center = np.asarray(center, dtype=float)
    radius = float(radius)
    if radius <= 0 or not np.all(np.isfinite(center)):
        raise InvalidDomain("bump needs a finite center and positive radius")
    dim = center.size
    if dim not in (2, 3):
        raise InvalidDomain("only dimensions 2 and 3 are supported")
    norm_const = 1.0 / (radius ** dim * _unit_bump_mass(dim))
    return Mollifier(center=center, radius=radius, norm_const=norm_const)


# ---------------------------------------------------------------------------
# cutoff


@dataclass
class Cutoff:
    """Smooth chi with chi = 1 exactly on the closed domain, 0 outside B-tilde."""

    center: np.ndarray
    r_plateau: float
    r_outer: float

    def __call__(self, pts):
        pts = _as_points(pts, self.center.size)
        d = np.linalg.norm(pts - self.center, axis=-1)
        s = (self.r_outer - d) / (self.r_outer - self.r_plateau)
        return _expstep(s)

    @property
    def support_diameter(self):
        return 2.0 * self.r_outer


# ---------------------------------------------------------------------------
# star domain


class StarDomain:
    """Bounded shape star-shaped with respect to a ball."""

    def __init__(self, shape, ball_center, ball_radius, inflate=1.2):
        self.shape = shape
        self.ball_center = np.asarray(ball_center, dtype=float)
        self.ball_radius = float(ball_radius)
        self.dim = shape.dim
        if self.ball_radius <= 0:
            raise InvalidDomain("star ball radius must be positive")
        if self.ball_center.size != self.dim:
            raise InvalidDomain("star ball center dimension mismatch")
        ball_rim = Ball(self.ball_center, self.ball_radius).boundary_points(64)
        if not np.all(shape.contains(ball_rim, tol=1e-12)):
            raise InvalidDomain("star ball is not contained in the shape")
        lo, hi = shape.bbox()
        self._bbox = (lo, hi)
        self.diameter = shape.diameter()
        center = 0.5 * (lo + hi)
        r_plateau = shape.max_dist_from(center)
        self.cutoff = Cutoff(center=center, r_plateau=r_plateau, r_outer=inflate * r_plateau)
        self.support_diameter = self.cutoff.support_diameter

    def contains(self, pts, tol=0.0):
        return self.shape.contains(pts, tol=tol)

    def boundary_points(self, m):
        return self.shape.boundary_points(m)

    def bbox(self):
        return self._bbox

    def default_mollifier(self, shrink=1.0):
        return make_bump(self.ball_center, self.ball_radius * shrink)


@dataclass
class StarCheckReport:
    ok: bool
    checked_segments: int
    violations: list = field(default_factory=list)


def star_check(domain, n_boundary=256, n_ball=32, n_seg=64, slack=1e-12, rng=None):
    """Sampled verification that the domain is star-shaped w.r.t. its ball.

    Walks segments from sampled ball points to sampled boundary points and
    tests membership of interior samples with a small boundary slack.

    Returns
    -------
    StarCheckReport
        ``ok`` is False when any sampled segment leaves the domain;
        each violation records (ball point, boundary point, t, segment point).
    """
    rng = np.random.default_rng(0 if rng is None else rng)
    q = domain.boundary_points(n_boundary)
    rim = Ball(domain.ball_center, domain.ball_radius).boundary_points(max(n_ball - 1, 1))
    b = np.concatenate([rim, domain.ball_center[None, :]], axis=0)
    t = (np.arange(1, n_seg + 1) - 0.5) / n_seg
    violations = []
    for bi in b:
        # points bi + t (q - bi), all boundary targets at once
        seg = bi[None, None, :] + t[None, :, None] * (q[:, None, :] - bi[None, None, :])
        ok = domain.contains(seg.reshape(-1, domain.dim), tol=slack).reshape(seg.shape[:2])
        bad = np.argwhere(~ok)
        for iq, it in bad[:16]:
            violations.append((bi.copy(), q[iq].copy(), float(t[it]), seg[iq, it].copy()))
    return StarCheckReport(ok=not violations, checked_segments=b.shape[0] * q.shape[0],
                           violations=violations)


# ---------------------------------------------------------------------------
# lipschitz unions


class LipschitzDomain:
    """Finite union of star pieces chained by overlap bumps.

    Pieces are ordered; bump i sits inside the overlap of pieces i and i+1
    and carries transferred mean-zero mass during decomposition.
    """

    def __init__(self, pieces, overlap_bumps):
        if len(pieces) < 1:
            raise InvalidDomain("need at least one piece")
        if len(overlap_bumps) != len(pieces) - 1:
            raise InvalidDomain("need exactly len(pieces)-1 overlap bumps")
        self.pieces = list(pieces)
        self.overlap_bumps = list(overlap_bumps)
        self.dim = pieces[0].dim
        for i, bump in enumerate(self.overlap_bumps):
            rim = Ball(bump.center, bump.radius).boundary_points(64)
            for piece in (self.pieces[i], self.pieces[i + 1]):
                if not np.all(piece.contains(rim, tol=1e-12)):
                    raise InvalidDomain(
                        f"overlap bump {i} is not inside pieces {i} and {i + 1}"
                    )

    def contains(self, pts, tol=0.0):
        out = self.pieces[0].contains(pts, tol=tol)
        for piece in self.pieces[1:]:
            out = out | piece.contains(pts, tol=tol)
        return out

    def bbox(self):
        los, his = zip(*(p.bbox() for p in self.pieces))
        return np.min(los, axis=0), np.max(his, axis=0)

    def partition_weights(self, pts, taper=None):
        """Normalized partition of unity subordinate to the pieces.

        Returns an array (npieces, ...) with sum exactly 1 on the union
        (up to rounding) and 0 outside.
        """
        if taper is None:
            taper = 0.2 * min(p.diameter for p in self.pieces)
        w = np.stack([p.shape.profile(pts, taper) for p in self.pieces], axis=0)
        total = np.sum(w, axis=0)
        inside = self.contains(pts)
        # pieces cover the union, but a sampled profile can vanish at the
        # seam of indicator fallbacks; fall back to plain membership there
        flat = (total <= 0.0) & inside
        if np.any(flat):
            memb = np.stack([p.contains(pts) for p in self.pieces], axis=0)
            w = np.where(flat[None, ...], memb.astype(float), w)
            total = np.sum(w, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            eta = np.where(total[None, ...] > 0.0, w / total[None, ...], 0.0)
        return eta


def split_zero_mean(values, lip, grid, tol_mean=1e-10, tol_support=0.0):
    """Split a zero-mean field on a union into per-piece zero-mean fields.

    Parameters
    ----------
    values : ndarray
        Field sampled on ``grid`` nodes, supported in the union.
    lip : LipschitzDomain
    grid : Grid
        Quadrature grid covering the union.
    tol_mean : float
        Allowed |integral of f| relative to the L1 norm.

    Returns
    -------
    parts : list of ndarray
        One field per piece: supported in the piece, grid mean zero to
        rounding, summing pointwise to the input.
    info : dict
        Transfer coefficients and per-piece grid means.

    Raises
    ------
    MeanNotZero, SupportViolation
    """
    from .quadrature import integrate_values

    values = np.asarray(values, dtype=float)
    pts = grid.points()
    l1 = integrate_values(grid, np.abs(values))
    total = integrate_values(grid, values)
    if l1 > 0 and abs(total) > tol_mean * l1:
        raise MeanNotZero(f"grid mean {total:.3e} exceeds {tol_mean:.1e} * ||f||_1")
    outside = ~lip.contains(pts, tol=tol_support + 1e-12)
    if np.any((values != 0.0) & outside & grid.mask):
        raise SupportViolation("field is nonzero outside the union")

    eta = lip.partition_weights(pts)
    g = [values * eta[i] for i in range(len(lip.pieces))]
    means = np.array([integrate_values(grid, gi) for gi in g])
    theta = [b(pts) for b in lip.overlap_bumps]
    theta_mass = np.array([integrate_values(grid, th) for th in theta])
    if np.any(theta_mass <= 0):
        raise InvalidDomain("an overlap bump has no mass on this grid")

    cum = np.cumsum(means)
    # normalize by the grid mass of each bump so piece means vanish exactly
    c = cum[:-1] / theta_mass
    parts = []
    m = len(lip.pieces)
    for i in range(m):
        fi = g[i].copy()
        if i > 0:
            fi = fi + c[i - 1] * theta[i - 1]
        if i < m - 1:
            fi = fi - c[i] * theta[i]
        parts.append(fi)
    piece_means = np.array([integrate_values(grid, fi) for fi in parts])
    info = {"transfer": c, "piece_means": piece_means, "l1": l1}
    return parts, info


# ---------------------------------------------------------------------------
# config


_SHAPE_KINDS = {
    "disk": "ball", "ball": "ball",
    "ellipse": "ellipsoid", "ellipsoid": "ellipsoid",
    "rectangle": "box", "box": "box",
    "star_polygon": "star_polygon",
}


def _shape_from_config(cfg, dim):
    kind = _SHAPE_KINDS.get(cfg.get("kind"))
    if kind is None:
        raise InvalidDomain(f"unknown shape kind {cfg.get('kind')!r}")
    if kind == "ball":
        return Ball(cfg["center"], cfg["radius"])
    if kind == "ellipsoid":
        return Ellipsoid(cfg["center"], cfg["semiaxes"])
    if kind == "box":
        return Box(cfg["lo"], cfg["hi"])
    if dim != 2:
        raise InvalidDomain("star_polygon shapes are 2d only")
    return StarPolygon(cfg["vertices"])


def _star_from_config(cfg):
    dim = int(cfg["dim"])
    shape = _shape_from_config(cfg["shape"], dim)
    ball = cfg["ball"]
    return StarDomain(shape, ball["center"], ball["radius"])


def domain_from_config(cfg):
    """Build a StarDomain or LipschitzDomain from a config dict or JSON path."""
    if isinstance(cfg, (str, bytes)):
        with open(cfg) as fh:
            cfg = json.load(fh)
    if "pieces" in cfg:
        pieces = [_star_from_config(p) for p in cfg["pieces"]]
        bumps = [make_bump(b["center"], b["radius"]) for b in cfg.get("overlap_bumps", [])]
        return LipschitzDomain(pieces, bumps)
    return _star_from_config(cfg)


def mollifier_from_config(cfg, domain):
    """Mollifier from the optional config block, defaulting to the star ball."""
    if isinstance(cfg, dict) and "mollifier" in cfg:
        m = cfg["mollifier"]
        return make_bump(m["center"], m["radius"])
    return domain.default_mollifier()
