"""Command line front end: wires domain configs, the analytic input
catalog, and the experiment drivers to CSV/JSON artifacts.

Every run writes its tables plus a manifest.json recording the semantic
config, its hash, the library version and the tolerances in force.  The
thread count is deliberately absent from the manifest: identical configs
must produce byte-identical outputs at any parallelism, so it cannot
leak into the artifacts.  Exit status is 0 when all checks pass, 2 when
a numerical check fails, 1 on bad input (message names the field).
"""

import argparse
import json
import os
import sys

import numpy as np

from .domain import (Ball, LipschitzDomain, StarDomain, domain_from_config,
                     mollifier_from_config)
from .errors import InvalidDomain, MeanNotZero, SupportViolation
from .inputs import (atom_family, cubic_vector_family, dipole_family,
                     holder_family, korn_family, parse_analytic, rigid_motion,
                     trig_vector_family)
from .kernel import kernel_bounds_report
from .korn import korn_ratio_sweep
from .norms import (MaximalConfig, bmo_norm, holder_norm, hp_quasinorm,
                    lp_norm)
from .quadrature import Grid, GridField
from .reports import write_csv, write_manifest
from .solver import (counterexample_p1, lipschitz_ratio_sweep, solve_lipschitz,
                     solve_star)

_CANCEL_TOL = 1e-8
_RESIDUAL_TOL = 2e-2
_SPREAD_MAX = 50.0
_PSI_SUP_CAP = np.pi / 2.0 + 1e-6


class InputError(Exception):
    """Bad flag or config content; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    # argparse reserves status 2 for usage errors, but here 2 means a
    # numerical check failed, so usage problems exit 1 like other input
    # errors.
    def error(self, message):
        self.exit(1, "%s: error: %s\n" % (self.prog, message))


def _positive(name, value):
    if not value > 0:
        raise InputError("%s must be positive, got %g" % (name, value))
    return value


def _float_list(name, text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError("%s must be comma-separated numbers, got %r"
                         % (name, text))
    if not vals:
        raise InputError("%s is empty" % name)
    return vals


def _load_domain(path):
    if path is None:
        raise InputError("--domain is required")
    if not os.path.exists(path):
        raise InputError("domain config %s does not exist" % path)
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as e:
        raise InputError("domain config %s is not valid JSON: %s" % (path, e))
    try:
        dom = domain_from_config(cfg)
    except KeyError as e:
        raise InputError("domain config %s is missing field %s" % (path, e))
    except InvalidDomain as e:
        raise InputError("domain config %s: %s" % (path, e))
    return cfg, dom


def _load_f(text, grid, dom):
    """Named analytic input, or a CSV previously emitted on the same grid."""
    if text.endswith(".csv"):
        if not os.path.exists(text):
            raise InputError("input csv %s does not exist" % text)
        data = np.genfromtxt(text, delimiter=",", names=True)
        need = ["x", "y", "z"][:grid.dim] + ["value"]
        have = list(data.dtype.names or [])
        if [c for c in need if c not in have]:
            raise InputError("input csv %s needs columns %s, has %s"
                             % (text, ",".join(need), ",".join(have)))
        coords = np.stack([np.atleast_1d(data[c]) for c in need[:-1]], axis=-1)
        idx = np.round((coords - grid.lo) / grid.h - 0.5).astype(int)
        recon = grid.lo + (idx + 0.5) * grid.h
        if (np.max(np.abs(recon - coords)) > 1e-8 * max(grid.h, 1.0)
                or np.any(idx < 0) or np.any(idx >= np.array(grid.shape))):
            raise InputError("input csv %s nodes do not lie on the h=%g grid"
                             % (text, grid.h))
        vals = np.zeros(grid.shape)
        vals[tuple(idx.T)] = np.atleast_1d(data["value"])
        return GridField(grid, np.where(grid.mask, vals, 0.0),
                         support_flag=True)
    try:
        inp = parse_analytic(text)
    except ValueError as e:
        raise InputError(str(e))
    return inp.sample(grid)


def _vector_family(text, include_rigid=False):
    name, _, count = text.partition(":")
    try:
        n = int(count) if count else 20
    except ValueError:
        raise InputError("family count must be an integer, got %r" % count)
    makers = {"trig": trig_vector_family, "cubic": cubic_vector_family,
              "korn": korn_family}
    if name not in makers:
        raise InputError("unknown vector family %r (have: %s)"
                         % (name, ", ".join(sorted(makers))))
    fam = makers[name](n)
    if include_rigid:
        fam = fam + [rigid_motion()]
    return fam


def _out_paths(out, default_name):
    """Split --out into (artifact path, manifest path).

    A path ending in .csv or .json is taken as the artifact file itself;
    anything else is a directory that receives default_name.
    """
    out = out or "."
    root, ext = os.path.splitext(out)
    if ext in (".csv", ".json"):
        d = os.path.dirname(out) or "."
        os.makedirs(d, exist_ok=True)
        return out, os.path.join(d, "manifest.json")
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, default_name), os.path.join(out, "manifest.json")


def _coord_columns(grid):
    return ["x", "y", "z"][:grid.dim]


def _field_csv(path, grid, named_arrays):
    """Write flat per-node rows: coordinates then the named value columns.

    Only nodes with positive clipped volume are emitted, in row-major
    order, so the file is independent of the thread count.
    """
    pts = grid.points().reshape(-1, grid.dim)
    live = np.flatnonzero(grid.vol.reshape(-1) > 0.0)
    cols = _coord_columns(grid)
    rows = []
    for i in live:
        row = dict(zip(cols, pts[i]))
        for name, arr in named_arrays:
            row[name] = float(arr[i])
        rows.append(row)
    write_csv(path, rows, columns=cols + [n for n, _ in named_arrays])


def _unit_disk():
    return StarDomain(Ball(np.zeros(2), 1.0), np.zeros(2), 0.35)


# ---------------------------------------------------------------------------
# drivers; each returns a list of failed-check messages (empty = success)


def _run_solve(args):
    cfg_dict, dom = _load_domain(args.domain)
    _positive("--h", args.h)
    grid = Grid.from_domain(dom, args.h)
    f = _load_f(args.f, grid, dom)
    points = None
    if args.subsample:
        rng = np.random.default_rng(args.seed)
        live = np.flatnonzero(grid.vol.reshape(-1) > 0.0)
        points = np.sort(rng.choice(live, size=min(args.subsample, live.size),
                                    replace=False))
    try:
        if isinstance(dom, LipschitzDomain):
            res = solve_lipschitz(f, dom, fix_mean=args.fix_mean,
                                  points=points)
        else:
            res = solve_star(f, dom, fix_mean=args.fix_mean, points=points)
    except (MeanNotZero, SupportViolation) as e:
        raise InputError("--f: %s" % e)

    n = grid.dim
    os.makedirs(args.out, exist_ok=True)
    uv = res.u.values.reshape(-1, n)
    _field_csv(os.path.join(args.out, "u.csv"), grid,
               [("u_%d" % i, uv[:, i]) for i in range(n)])
    diag = dict(res.diagnostics)
    if points is None:
        gv = res.grad_u.values.reshape(-1, n, n)
        _field_csv(os.path.join(args.out, "grad_u.csv"), grid,
                   [("g_%d%d" % (i, j), gv[:, i, j])
                    for i in range(n) for j in range(n)])
        _field_csv(os.path.join(args.out, "residual.csv"), grid,
                   [("residual", res.div_residual.values.reshape(-1))])
        for p in _float_list("--p-list", args.p_list):
            den = lp_norm(f.values, grid, p)
            diag.setdefault("lp_ratios", {})["%g" % p] = (
                lp_norm(res.grad_u.values, grid, p) / den if den > 0
                else float("inf"))
    else:
        diag["subsample"] = int(points.size)

    fmax = float(np.max(np.abs(f.values)))
    interior = grid.interior_mask(1)
    resid = float(np.max(np.abs(res.div_residual.values[interior]))) \
        if points is None and np.any(interior) else None
    diag["h"] = args.h
    diag["max_abs_f"] = fmax
    if resid is not None:
        diag["max_abs_residual_interior"] = resid
    with open(os.path.join(args.out, "diagnostics.json"), "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    write_manifest(os.path.join(args.out, "manifest.json"),
                   {"command": "solve", "domain": cfg_dict, "f": args.f,
                    "h": args.h, "p_list": args.p_list, "seed": args.seed,
                    "fix_mean": args.fix_mean, "subsample": args.subsample},
                   tolerances={"residual_rel": args.residual_tol})
    fails = []
    if resid is not None and fmax > 0 and resid > args.residual_tol * fmax:
        fails.append("interior divergence residual %.3e exceeds %g * max|f| "
                     "= %.3e" % (resid, args.residual_tol,
                                 args.residual_tol * fmax))
    return fails


def _run_kernel_check(args):
    cfg_dict, dom = _load_domain(args.domain)
    if isinstance(dom, LipschitzDomain):
        raise InputError("--domain: kernel-check needs a star-shaped domain, "
                         "not a piecewise one")
    mol = mollifier_from_config(cfg_dict, dom)
    rep = kernel_bounds_report(dom, mol, n_samples=args.samples,
                               seed=args.seed)
    path, mpath = _out_paths(args.out, "kernel_check.json")
    with open(path, "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    write_manifest(mpath,
                   {"command": "kernel-check", "domain": cfg_dict,
                    "samples": args.samples, "seed": args.seed},
                   tolerances={"cancellation": _CANCEL_TOL})
    fails = []
    if rep["max_cancellation_defect"] > _CANCEL_TOL:
        fails.append("spherical cancellation defect %.3e exceeds %g"
                     % (rep["max_cancellation_defect"], _CANCEL_TOL))
    return fails


def _run_norms(args):
    if args.norm in ("hp", "lp") and args.p is None:
        raise InputError("--p is required for --norm %s" % args.norm)
    if args.norm == "holder" and args.alpha is None:
        raise InputError("--alpha is required for --norm holder")
    _positive("--h", args.h)
    if args.domain:
        cfg_dict, dom = _load_domain(args.domain)
        lo, hi = dom.bbox()
    else:
        cfg_dict = None
        lo, hi = -np.ones(args.dim), np.ones(args.dim)
    mc = MaximalConfig()
    pad = max(mc.t_levels) * mc.profile(len(np.atleast_1d(lo))).radius
    grid = Grid.box(np.asarray(lo) - pad, np.asarray(hi) + pad, args.h)
    if args.f.endswith(".csv"):
        raise InputError("--f: norms takes a named analytic input; "
                         "run solve for csv data")
    try:
        inp = parse_analytic(args.f)
    except ValueError as e:
        raise InputError(str(e))
    vals = inp(grid.points())

    detail = {}
    if args.norm == "hp":
        # values live on a padded box, restriction-space semantics
        value = hp_quasinorm(vals, grid, args.p, mc, enforce_margin=False)
    elif args.norm == "lp":
        value = lp_norm(vals, grid, args.p)
    elif args.norm == "holder":
        sup, semi, value = holder_norm(vals, grid, args.alpha)
        detail = {"sup": sup, "seminorm": semi}
    else:
        value = bmo_norm(vals, grid)

    path, mpath = _out_paths(args.out, "norms.json")
    doc = {"f": args.f, "norm": args.norm, "value": value, "h": args.h,
           "p": args.p, "alpha": args.alpha,
           "grid_shape": list(grid.shape), **detail}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    write_manifest(mpath,
                   {"command": "norms", "f": args.f, "norm": args.norm,
                    "p": args.p, "alpha": args.alpha, "h": args.h,
                    "domain": cfg_dict})
    return []


def _run_korn(args):
    cfg_dict, dom = _load_domain(args.domain)
    _positive("--h", args.h)
    lo = dom.dim / (dom.dim + 1.0)
    if not lo < args.p <= 1.0:
        raise InputError("--p must lie in (%g, 1], got %g" % (lo, args.p))
    fam = _vector_family(args.family, include_rigid=args.include_rigid)
    rep = korn_ratio_sweep(fam, args.p, dom, h=args.h)
    path, mpath = _out_paths(args.out, "korn.csv")
    write_csv(path, rep.rows,
              columns=["member", "hp_grad", "hp_eps_plus_u", "ratio"])
    write_manifest(mpath,
                   {"command": "korn", "domain": cfg_dict, "p": args.p,
                    "family": args.family, "h": args.h,
                    "include_rigid": args.include_rigid},
                   tolerances={"spread_max": _SPREAD_MAX},
                   extra={"sup_ratio": rep.sup_ratio,
                          "min_ratio": rep.min_ratio, "status": rep.status})
    fails = []
    if rep.status == "ok":
        if not np.isfinite(rep.sup_ratio):
            fails.append("a korn ratio came out non-finite")
        elif rep.spread() > _SPREAD_MAX:
            fails.append("korn ratio spread %.3g exceeds %g"
                         % (rep.spread(), _SPREAD_MAX))
    return fails


def _run_counterexample(args):
    deltas = _float_list("--deltas", args.deltas)
    _positive("--h", args.h)
    grid = Grid.from_domain(_unit_disk(), args.h)
    try:
        out = counterexample_p1(deltas, grid)
    except ValueError as e:
        raise InputError("--deltas: %s" % e)
    path, mpath = _out_paths(args.out, "counterexample.csv")
    write_csv(path, out["rows"], columns=["delta", "ratio", "pairing"])
    write_manifest(mpath,
                   {"command": "counterexample", "deltas": args.deltas,
                    "h": args.h},
                   tolerances={"psi_sup_cap": _PSI_SUP_CAP},
                   extra={"psi_sup": out["psi_sup"]})
    fails = []
    r = out["ratios"]
    if any(r[i + 1] <= r[i] for i in range(len(r) - 1)):
        fails.append("counterexample ratios are not strictly increasing")
    if out["psi_sup"] > _PSI_SUP_CAP:
        fails.append("sup|psi| = %.8f exceeds pi/2 cap" % out["psi_sup"])
    return fails


def _run_sweep(args):
    cfg_dict, dom = _load_domain(args.domain)
    _positive("--h", args.h)
    grid = Grid.from_domain(dom, args.h)

    if args.kind in ("holder", "bmo"):
        alpha = args.alpha if args.alpha is not None else 0.5
        fam = holder_family(grid, dom, alpha, n=args.members)
        rep = lipschitz_ratio_sweep(fam, alpha, dom,
                                    use_bmo=args.kind == "bmo")
        rows, parameter = rep.rows, alpha
        sup_ratio, min_ratio, status = rep.sup_ratio, rep.min_ratio, rep.status
    else:
        p = args.p if args.p is not None else (2.0 if args.kind == "lp" else 1.0)
        if args.kind == "lp":
            fam = dipole_family(grid, dom, n=args.members)
        else:
            fam = atom_family(grid, dom, p)
        rows = []
        for name, f in fam:
            # family members are zero-mean analytically; the sampled grid
            # mean is O(h^2) and gets projected out
            sol = solve_star(f, dom, fix_mean=True)
            if args.kind == "lp":
                num = lp_norm(sol.grad_u.values, grid, p)
                den = lp_norm(f.values, grid, p)
            else:
                num = hp_quasinorm(sol.grad_u.values, grid, p,
                                   enforce_margin=False)
                den = hp_quasinorm(f.values, grid, p, enforce_margin=False)
            rows.append({"member": name, "numerator": num, "denominator": den,
                         "ratio": num / den if den > 0 else float("inf")})
        parameter = p
        finite = [r["ratio"] for r in rows if np.isfinite(r["ratio"])]
        sup_ratio = max(finite) if finite else float("nan")
        min_ratio = min(finite) if finite else float("nan")
        status = "ok" if rows else "skipped"

    path, mpath = _out_paths(args.out, "sweep_%s.csv" % args.kind)
    write_csv(path, rows)
    write_manifest(mpath,
                   {"command": "sweep", "kind": args.kind, "domain": cfg_dict,
                    "parameter": parameter, "members": args.members,
                    "h": args.h, "seed": args.seed},
                   tolerances={"spread_max": _SPREAD_MAX},
                   extra={"sup_ratio": sup_ratio, "min_ratio": min_ratio,
                          "status": status})
    fails = []
    if status == "ok" and rows:
        if not (np.isfinite(sup_ratio) and min_ratio > 0):
            fails.append("a %s ratio came out non-finite" % args.kind)
        elif sup_ratio / min_ratio > _SPREAD_MAX:
            fails.append("%s ratio spread %.3g exceeds %g"
                         % (args.kind, sup_ratio / min_ratio, _SPREAD_MAX))
    return fails


# ---------------------------------------------------------------------------
# wiring


def _parser():
    p = _Parser(prog="bogovskii",
                description="Bogovskii operator drivers: solve div u = f, "
                            "check kernel identities, estimate norms, run "
                            "ratio sweeps.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, domain=True):
        if domain:
            sp.add_argument("--domain", required=True,
                            help="domain config JSON path")
        sp.add_argument("--out", default=".",
                        help="output directory, or a .csv/.json file path")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (BOGOVSKII_THREADS overrides)")

    sp = sub.add_parser("solve", help="solve div u = f with zero boundary")
    common(sp)
    sp.add_argument("--f", required=True,
                    help="named analytic input (e.g. dipole:r1=0.2) or a "
                         "value csv on the same grid")
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--p-list", default="2",
                    help="comma list of p for gradient Lp ratios")
    sp.add_argument("--fix-mean", action="store_true",
                    help="project the input onto zero mean first")
    sp.add_argument("--subsample", type=int, default=0,
                    help="evaluate u at this many random nodes only")
    sp.add_argument("--residual-tol", type=float, default=_RESIDUAL_TOL)
    sp.set_defaults(driver=_run_solve)

    sp = sub.add_parser("kernel-check",
                        help="empirical kernel bounds and cancellation")
    common(sp)
    sp.add_argument("--samples", type=int, default=10000)
    sp.set_defaults(driver=_run_kernel_check)

    sp = sub.add_parser("norms", help="norm estimates for a named input")
    common(sp, domain=False)
    sp.add_argument("--domain", default=None,
                    help="optional domain config for the sampling box")
    sp.add_argument("--f", required=True)
    sp.add_argument("--norm", required=True,
                    choices=["hp", "lp", "holder", "bmo"])
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--dim", type=int, default=2, choices=[2, 3])
    sp.set_defaults(driver=_run_norms)

    sp = sub.add_parser("korn", help="Korn ratio sweep over a vector family")
    common(sp)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--family", default="trig:20",
                    help="trig:N, cubic:N or korn:N")
    sp.add_argument("--h", type=float, default=0.02)
    sp.add_argument("--include-rigid", action="store_true",
                    help="append a rigid motion to the family")
    sp.set_defaults(driver=_run_korn)

    sp = sub.add_parser("counterexample",
                        help="p = 1 failure: log-growing ratio on the disk")
    common(sp, domain=False)
    sp.add_argument("--deltas", default="0.2,0.1,0.05,0.025,0.0125")
    sp.add_argument("--h", type=float, default=0.01)
    sp.set_defaults(driver=_run_counterexample)

    sp = sub.add_parser("sweep", help="operator-norm ratio sweeps")
    common(sp)
    sp.add_argument("--kind", required=True,
                    choices=["holder", "bmo", "lp", "hp"])
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--members", type=int, default=10)
    sp.add_argument("--h", type=float, default=0.02)
    sp.set_defaults(driver=_run_sweep)
    return p


def _set_threads(args):
    val = os.environ.get("BOGOVSKII_THREADS")
    if val is None and getattr(args, "threads", None) is not None:
        val = args.threads
    if val is None:
        return
    try:
        k = int(val)
    except (TypeError, ValueError):
        raise InputError("BOGOVSKII_THREADS/--threads must be an integer, "
                         "got %r" % val)
    import numba
    numba.set_num_threads(max(1, min(k, numba.config.NUMBA_NUM_THREADS)))


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        _set_threads(args)
        fails = args.driver(args)
    except InputError as e:
        print("error: %s" % e, file=sys.stderr)
        return 1
    for msg in fails:
        print("check failed: %s" % msg, file=sys.stderr)
    return 2 if fails else 0


if __name__ == "__main__":
    sys.exit(main())
