"""Compiled inner loops for grid sums against the solution-operator kernels.

Everything here is deterministic by construction: parallel loops run only
over independent output rows, every reduction inside a row is a serial loop
in fixed order, and fastmath stays off.  Results are bit-identical for any
thread count.

The chord geometry is shared by all kernels: a ray base + r*dir meets the
mollifier ball on an interval found from one quadratic, the integrand is a
smooth bump slice on that interval, and a single Gauss panel integrates it.
Panel order is a caller choice (speed/accuracy knob); the reference rules
live in the kernel module.
"""

import math

import numpy as np
from numba import njit, prange

_TMIN = 1e-13


@njit(cache=True, parallel=True, fastmath=False)
def bog_apply_sum(xs, nodes, fw, cw, r2, nrm, glx, glw, excl_half, out):
    """u(x_p) = sum_m G(x_p, y_m) fw_m, skipping |x - y|_inf <= excl_half.

    fw carries density times cell volume; cw/r2/nrm are the mollifier ball
    center, squared radius and normalization.
    """
    npts, dim = xs.shape
    nsrc = nodes.shape[0]
    nq = glx.shape[0]
    for p in prange(npts):
        acc = np.zeros(dim)
        for m in range(nsrc):
            cheb = 0.0
            for d in range(dim):
                ad = abs(xs[p, d] - nodes[m, d])
                if ad > cheb:
                    cheb = ad
            if cheb <= excl_half:
                continue
            a = 0.0
            b = 0.0
            c = -r2
            for d in range(dim):
                zd = xs[p, d] - nodes[m, d]
                bd = nodes[m, d] - cw[d]
                a += zd * zd
                b += 2.0 * zd * bd
                c += bd * bd
            if a <= 0.0:
                continue
            disc = b * b - 4.0 * a * c
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            lo = (-b - sq) / (2.0 * a)
            hi = (-b + sq) / (2.0 * a)
            if lo < 1.0:
                lo = 1.0
            if hi <= lo + 1e-15:
                continue
            mid = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            integ = 0.0
            for q in range(nq):
                r = mid + half * glx[q]
                dsq = 0.0
                for d in range(dim):
                    wd = nodes[m, d] + r * (xs[p, d] - nodes[m, d]) - cw[d]
                    dsq += wd * wd
                t = 1.0 - dsq / r2
                if t > _TMIN:
                    integ += glw[q] * r ** (dim - 1) * nrm * math.exp(-1.0 / t)
            cf = fw[m] * integ * half
            for d in range(dim):
                acc[d] += (xs[p, d] - nodes[m, d]) * cf
        for d in range(dim):
            out[p, d] = acc[d]


@njit(cache=True, parallel=True, fastmath=False)
def bog_patch_sum(xs, off, wts, fvals, cw, r2, nrm, glx, glw, out):
    """Near-field correction: polar nodes y = x + off replace the skipped cells.

    fvals[p, c] is the density interpolated at x_p + off_c; wts carries the
    polar quadrature weight (jacobian included).
    """
    npts, dim = xs.shape
    ncol = off.shape[0]
    nq = glx.shape[0]
    for p in prange(npts):
        acc = np.zeros(dim)
        for cidx in range(ncol):
            fv = fvals[p, cidx]
            if fv == 0.0:
                continue
            a = 0.0
            b = 0.0
            c = -r2
            for d in range(dim):
                zd = -off[cidx, d]
                bd = xs[p, d] + off[cidx, d] - cw[d]
                a += zd * zd
                b += 2.0 * zd * bd
                c += bd * bd
            if a <= 0.0:
                continue
            disc = b * b - 4.0 * a * c
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            lo = (-b - sq) / (2.0 * a)
            hi = (-b + sq) / (2.0 * a)
            if lo < 1.0:
                lo = 1.0
            if hi <= lo + 1e-15:
                continue
            mid = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            integ = 0.0
            for q in range(nq):
                r = mid + half * glx[q]
                dsq = 0.0
                for d in range(dim):
                    wd = xs[p, d] + (1.0 - r) * off[cidx, d] - cw[d]
                    dsq += wd * wd
                t = 1.0 - dsq / r2
                if t > _TMIN:
                    integ += glw[q] * r ** (dim - 1) * nrm * math.exp(-1.0 / t)
            cf = fv * wts[cidx] * integ * half
            for d in range(dim):
                acc[d] -= off[cidx, d] * cf
        for d in range(dim):
            out[p, d] += acc[d]


@njit(cache=True, parallel=True, fastmath=False)
def gradG_pairs(xs, ys, cw, r2, nrm, glx, glw, out):
    """dG_i/dx_j(x_p, y_p) for paired point arrays; out has shape (P, dim, dim)."""
    npts, dim = xs.shape
    nq = glx.shape[0]
    for p in prange(npts):
        bvec = np.zeros(dim)
        for i in range(dim):
            for j in range(dim):
                out[p, i, j] = 0.0
        a = 0.0
        b = 0.0
        c = -r2
        for d in range(dim):
            zd = xs[p, d] - ys[p, d]
            bd = ys[p, d] - cw[d]
            a += zd * zd
            b += 2.0 * zd * bd
            c += bd * bd
        if a <= 0.0:
            continue
        disc = b * b - 4.0 * a * c
        if disc <= 0.0:
            continue
        sq = math.sqrt(disc)
        lo = (-b - sq) / (2.0 * a)
        hi = (-b + sq) / (2.0 * a)
        if lo < 1.0:
            lo = 1.0
        if hi <= lo + 1e-15:
            continue
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        aval = 0.0
        for q in range(nq):
            r = mid + half * glx[q]
            dsq = 0.0
            for d in range(dim):
                wd = ys[p, d] + r * (xs[p, d] - ys[p, d]) - cw[d]
                dsq += wd * wd
            t = 1.0 - dsq / r2
            if t > _TMIN:
                val = nrm * math.exp(-1.0 / t)
                rp = r ** (dim - 1)
                aval += glw[q] * rp * val
                coef = -2.0 * val / (r2 * t * t) * glw[q] * rp * r
                for d in range(dim):
                    wd = ys[p, d] + r * (xs[p, d] - ys[p, d]) - cw[d]
                    bvec[d] += coef * wd
        aval *= half
        for i in range(dim):
            zi = xs[p, i] - ys[p, i]
            for j in range(dim):
                v = zi * bvec[j] * half
                if i == j:
                    v += aval
                out[p, i, j] = v
    return out


@njit(cache=True, parallel=True, fastmath=False)
def bucket_grad_sums(outs, nodes, dens, chi_out, chi_nodes, base_is_output,
                     cw, r2, nrm, glx, glw, thresh, rings):
    """Ring-partitioned grid sums of chi chi gradG against several densities.

    For each output row p the pairs are binned by the first (widest) cutoff
    threshold they clear; cumulative sums over rings then give every
    truncation level at once.  dens is (D, M) with cell volume already
    folded in; thresh is strictly decreasing; rings has shape
    (P, L, D, dim, dim) and must come in zeroed.

    base_is_output selects the transposed orientation: the ray base of the
    kernel is the output point (integration over the first argument) rather
    than the integration node.
    """
    npts, dim = outs.shape
    nsrc = nodes.shape[0]
    nq = glx.shape[0]
    nlev = thresh.shape[0]
    nden = dens.shape[0]
    for p in prange(npts):
        cxp = chi_out[p]
        if cxp == 0.0:
            continue
        bvec = np.zeros(dim)
        zvec = np.zeros(dim)
        base = np.zeros(dim)
        mat = np.zeros((dim, dim))
        for m in range(nsrc):
            chin = chi_nodes[m]
            if chin == 0.0:
                continue
            cheb = 0.0
            for d in range(dim):
                ad = abs(outs[p, d] - nodes[m, d])
                if ad > cheb:
                    cheb = ad
            if cheb <= thresh[nlev - 1]:
                continue
            ring = -1
            for l in range(nlev):
                if cheb > thresh[l]:
                    ring = l
                    break
            if base_is_output:
                for d in range(dim):
                    base[d] = outs[p, d]
                    zvec[d] = nodes[m, d] - outs[p, d]
            else:
                for d in range(dim):
                    base[d] = nodes[m, d]
                    zvec[d] = outs[p, d] - nodes[m, d]
            a = 0.0
            b = 0.0
            c = -r2
            for d in range(dim):
                a += zvec[d] * zvec[d]
                b += 2.0 * zvec[d] * (base[d] - cw[d])
                c += (base[d] - cw[d]) * (base[d] - cw[d])
            if a <= 0.0:
                continue
            disc = b * b - 4.0 * a * c
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            lo = (-b - sq) / (2.0 * a)
            hi = (-b + sq) / (2.0 * a)
            if lo < 1.0:
                lo = 1.0
            if hi <= lo + 1e-15:
                continue
            mid = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            aval = 0.0
            for d in range(dim):
                bvec[d] = 0.0
            for q in range(nq):
                r = mid + half * glx[q]
                dsq = 0.0
                for d in range(dim):
                    wd = base[d] + r * zvec[d] - cw[d]
                    dsq += wd * wd
                t = 1.0 - dsq / r2
                if t > _TMIN:
                    val = nrm * math.exp(-1.0 / t)
                    rp = r ** (dim - 1)
                    aval += glw[q] * rp * val
                    coef = -2.0 * val / (r2 * t * t) * glw[q] * rp * r
                    for d in range(dim):
                        bvec[d] += coef * (base[d] + r * zvec[d] - cw[d])
            aval *= half
            cc = cxp * chin
            for i in range(dim):
                for j in range(dim):
                    v = zvec[i] * bvec[j] * half
                    if i == j:
                        v += aval
                    mat[i, j] = v * cc
            for dd in range(nden):
                g = dens[dd, m]
                if g == 0.0:
                    continue
                for i in range(dim):
                    for j in range(dim):
                        rings[p, ring, dd, i, j] += mat[i, j] * g
    return rings
