"""Command-line interface: ``cncdir <subcommand> ...``.

Subcommands: density-grid, sample, fit, lr, moments, bench, ingest.
Exit codes: 0 success, 2 domain/input errors, 3 convergence failures.
Series defaults can be overridden with CNCDIR_TOL / CNCDIR_MAXITER or
``--tol`` / ``--maxiter``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .bench import (
    BenchStratum,
    FitOptions,
    GRID_SIZES,
    aggregate_speedup,
    results_to_json,
    results_to_markdown,
    run_grid,
    grid_strata,
)
from .errors import (
    DomainError,
    EmptyAfterFilter,
    IterationCap,
    MassZero,
    NoConvergence,
    NonConvergence,
    ParseError,
    SingularInformation,
)
from .inference import (
    Dataset2D,
    ModelSpec,
    fit_ml,
    ingest_square_csv,
    lr_battery,
    select_model,
)
from .models import (
    CNcDirParams,
    DirParams,
    Kb2Params,
    NcDirParams,
    cncdir_logpdf,
    dir_logpdf,
    kb2_logpdf,
    ncdir_logpdf,
    params_from_json,
    params_to_json,
)
from .moments import cncdir_mixed_moment, cncdir_moment_11, cncdir_moment_series_oracle
from .sampling import make_rng, sample_cncdir, sample_dirichlet, sample_ncdir
from .specfun import SeriesControl

__all__ = ["main", "build_parser", "DEFAULT_PARAMS"]

# fitted values for the longleaf pine locations, used when --params is omitted
DEFAULT_PARAMS = {
    "dir": DirParams([1.2671, 1.3594, 1.2818]),
    "kb2": Kb2Params([1.2810, 1.3748, 1.2543], 0.1884),
    "ncdir": NcDirParams([1.0, 1.0, 1.0], [3.0478, 3.4644, 3.1084]),
    "cncdir": CNcDirParams([1.0, 1.0, 1.0], [42.7802, 48.7569, 44.1538]),
}

_LOGPDF = {
    "dir": lambda p, x, ctl: dir_logpdf(p, x),
    "kb2": kb2_logpdf,
    "ncdir": ncdir_logpdf,
    "cncdir": cncdir_logpdf,
}


class _UsageError(Exception):
    pass


def _ctl(args):
    return SeriesControl.from_env(tol=args.tol, maxiter=args.maxiter)


def _meta(args, **extra):
    ctl = _ctl(args)
    out = {"tool": "cncdir", "version": __version__, "command": args.command,
           "tol": ctl.tol, "maxiter": ctl.maxiter}
    out.update(extra)
    return out


def _header_lines(meta):
    return "".join(f"# {k}: {v}\n" for k, v in meta.items())


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_text(path, text):
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def _load_params(args, family):
    if not args.params:
        return DEFAULT_PARAMS[family]
    text = args.params
    if not text.lstrip().startswith("{"):
        with open(text) as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"cannot parse parameter JSON: {exc}") from None
    return params_from_json(obj, family=family)


def _read_simplex_csv(path):
    """Two-column CSV of simplex points; boundary points are rejected with row numbers."""
    with open(path, newline="") as fh:
        text = fh.read()
    rows = []
    header_done = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].strip().startswith("#") or not "".join(row).strip():
            continue
        try:
            x1, x2 = float(row[0]), float(row[1])
        except (ValueError, IndexError):
            if not rows and not header_done:
                header_done = True
                continue
            raise ParseError(f"row {lineno}: expected two numeric columns", row=lineno) from None
        if not (x1 > 0 and x2 > 0 and x1 + x2 < 1):
            raise DomainError(f"row {lineno}: point ({x1}, {x2}) is not inside the open simplex")
        rows.append((x1, x2))
    if not rows:
        raise EmptyAfterFilter(f"no data rows in {path}")
    return Dataset2D(np.array(rows))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_density_grid(args):
    family = args.model
    p = _load_params(args, family)
    ctl = _ctl(args)
    h = args.step
    if not 0 < h < 0.5:
        raise DomainError("--step must lie in (0, 0.5)")
    m = int(round(1.0 / h))
    c = (np.arange(m) + 0.5) * h
    X1, X2 = np.meshgrid(c, c, indexing="ij")
    keep = X1 + X2 < 1.0 - 1e-12
    pts = np.column_stack([X1[keep], X2[keep]])
    f = _LOGPDF[family]
    flagged = 0
    try:
        vals = np.exp(f(p, pts, ctl))
    except NonConvergence:
        vals = np.empty(pts.shape[0])
        for i, x in enumerate(pts):
            try:
                vals[i] = math.exp(f(p, x, ctl))
            except NonConvergence:
                vals[i] = math.nan
                flagged += 1
    meta = _meta(args, model=family, step=h, params=json.dumps(params_to_json(p)))
    fh, close = _open_out(args.out)
    try:
        fh.write(_header_lines(meta))
        fh.write("x1,x2,pdf\n")
        for (x1, x2), v in zip(pts, vals):
            fh.write(f"{x1:.10g},{x2:.10g},{'nonconvergence' if math.isnan(v) else repr(float(v))}\n")
    finally:
        if close:
            fh.close()
    if flagged:
        print(f"warning: series did not converge at {flagged} grid points", file=sys.stderr)
    return 0


def cmd_sample(args):
    family = args.model
    if family == "kb2":
        raise DomainError("no sampler is provided for the Kummer-Beta model")
    p = _load_params(args, family)
    rng = make_rng(args.seed)
    if family == "dir":
        X = sample_dirichlet(p, rng, args.n)
    elif family == "ncdir":
        X = sample_ncdir(p, rng, args.n)
    else:
        X = sample_cncdir(p, rng, args.n, args.representation, _ctl(args))
    meta = _meta(args, model=family, seed=args.seed, n=args.n,
                 representation=args.representation, params=json.dumps(params_to_json(p)))
    fh, close = _open_out(args.out)
    try:
        fh.write(_header_lines(meta))
        fh.write(",".join(f"x{i + 1}" for i in range(X.shape[1])) + "\n")
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    finally:
        if close:
            fh.close()
    return 0


def _fit_options(args):
    return FitOptions(n_starts=args.starts, seed=args.seed, ctl=_ctl(args))


def cmd_fit(args):
    data = _read_simplex_csv(args.data)
    model = ModelSpec(args.model, args.constrain or frozenset())
    rep = fit_ml(model, data, _fit_options(args))
    out = rep.to_json(meta=_meta(args, data=args.data, n=data.n))
    _write_text(args.out, json.dumps(out, indent=2) + "\n")
    return 0


def _lr_markdown(reports, chosen):
    lines = [
        "| hypothesis | l0 | l1 | w | df | p |",
        "|---|---|---|---|---|---|",
    ]
    for r in reports:
        p = "<.0001" if r.p_value < 1e-4 else f"{r.p_value:.4f}"
        lines.append(f"| {r.model.label()} | {r.l0:.4f} | {r.l1:.4f} | {r.w:.4f} | {r.df} | {p} |")
    lines.append("")
    lines.append(f"Selected model: {chosen.label()}")
    return "\n".join(lines) + "\n"


def cmd_lr(args):
    data = _read_simplex_csv(args.data)
    reports = lr_battery(args.model, data, _fit_options(args))
    chosen = select_model(reports, args.level)
    if args.format == "md":
        text = _header_lines(_meta(args, data=args.data, n=data.n)) + _lr_markdown(reports, chosen)
    else:
        text = json.dumps(
            {
                "meta": _meta(args, data=args.data, n=data.n),
                "tests": [r.to_json() for r in reports],
                "unconstrained": reports[0].unconstrained.to_json(),
                "constrained": [r.constrained.to_json(lr={"w": r.w, "df": r.df, "p": r.p_value})
                                for r in reports],
                "selected": {"family": chosen.family,
                             "constraints": [f"a{i}" for i in sorted(chosen.constraints)]},
            },
            indent=2,
        ) + "\n"
    _write_text(args.out, text)
    return 0


def cmd_moments(args):
    p = _load_params(args, "cncdir")
    ctl = _ctl(args)
    try:
        r = tuple(int(v) for v in args.order.split(","))
    except ValueError:
        raise DomainError("--order must look like r1,r2") from None
    if len(r) != 2:
        raise DomainError("--order must look like r1,r2")
    closed = cncdir_mixed_moment(p, r, ctl)
    oracle, tail = cncdir_moment_series_oracle(p, r, args.truncation, ctl)
    out = {"meta": _meta(args, params=params_to_json(p), order=list(r)),
           "closed_form": closed, "oracle": oracle, "oracle_tail_mass": tail}
    if r == (1, 1):
        a, b = cncdir_moment_11(p, ctl)
        out["three_term_11"] = a
        out["reduced_11"] = b
    _write_text(args.out, json.dumps(out, indent=2) + "\n")
    return 0


def cmd_bench(args):
    if args.grid == "standard":
        strata = grid_strata(tuple(args.sizes), args.reps)
    else:
        with open(args.grid) as fh:
            spec = json.load(fh)
        items = spec["strata"] if isinstance(spec, dict) else spec
        strata = [BenchStratum(s["alpha"], s["lambda"], s["N"], s.get("n", args.reps)) for s in items]
    opts = FitOptions(n_starts=args.starts, compute_se=False, ctl=_ctl(args))

    def progress(res):
        s = res.stratum
        print(f"N={s.N} alpha={s.alpha} lambda={s.lam}: ratio {res.speedup_ratio:.1f}, "
              f"p={res.p_value:.2e}", file=sys.stderr)

    results = run_grid(args.seed, opts, strata=strata, progress=progress)
    meta = _meta(args, seed=args.seed, reps=args.reps, starts=args.starts)
    if args.out and args.out.endswith(".md") or args.format == "md":
        text = _header_lines(meta) + results_to_markdown(results)
    else:
        text = results_to_json(results, **meta) + "\n"
    _write_text(args.out, text)
    return 0


def cmd_ingest(args):
    bbox = tuple(float(v) for v in args.bbox.split(",")) if args.bbox else None
    data = ingest_square_csv(args.input, transform=not args.no_transform, bbox=bbox)
    meta = _meta(args, input=args.input, n=data.n, dropped_lower=data.n_dropped_lower,
                 dropped_boundary=data.n_dropped_boundary)
    fh, close = _open_out(args.out)
    try:
        fh.write(_header_lines(meta))
        fh.write("x1,x2\n")
        for x1, x2 in data.points:
            fh.write(f"{float(x1)!r},{float(x2)!r}\n")
    finally:
        if close:
            fh.close()
    print(f"retained {data.n} points; dropped {data.n_dropped_lower} below the diagonal "
          f"and {data.n_dropped_boundary} on the boundary", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="cncdir", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"cncdir {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="series tolerance (default 1e-10)")
    common.add_argument("--maxiter", type=int, default=None, help="series term budget (default 2000)")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    sub = ap.add_subparsers(dest="command", required=True)
    models = ["dir", "kb2", "ncdir", "cncdir"]

    p = sub.add_parser("density-grid", parents=[common], help="density values on a lattice over the simplex")
    p.add_argument("--model", choices=models, default="cncdir")
    p.add_argument("--params", help="parameter JSON file or inline JSON")
    p.add_argument("--step", type=float, default=1 / 200)
    p.set_defaults(func=cmd_density_grid)

    p = sub.add_parser("sample", parents=[common], help="draw random points")
    p.add_argument("--model", choices=["dir", "ncdir", "cncdir"], default="cncdir")
    p.add_argument("--params")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--representation", choices=["mixture", "composition"], default="mixture")
    p.set_defaults(func=cmd_sample)

    for name, func, helptext in (("fit", cmd_fit, "maximum-likelihood fit"),
                                 ("lr", cmd_lr, "likelihood-ratio battery")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--model", choices=models, required=True)
        p.add_argument("--data", required=True, help="CSV with columns x1, x2")
        p.add_argument("--starts", type=int, default=8)
        p.add_argument("--seed", type=int, default=20240611)
        if name == "fit":
            p.add_argument("--constrain", default=None, help='shapes pinned to 1, e.g. "a1,a2,a3"')
        else:
            p.add_argument("--level", type=float, default=0.05)
            p.add_argument("--format", choices=["json", "md"], default="json")
        p.set_defaults(func=func)

    p = sub.add_parser("moments", parents=[common], help="mixed raw moments of the bivariate CNcDir")
    p.add_argument("--params")
    p.add_argument("--order", default="1,1")
    p.add_argument("--truncation", type=int, default=150)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("bench", parents=[common], help="CNcDir vs NcDir fitting-time study")
    p.add_argument("--grid", default="standard", help='"standard" or a JSON file of strata')
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--sizes", type=int, nargs="+", default=list(GRID_SIZES))
    p.add_argument("--starts", type=int, default=2)
    p.add_argument("--format", choices=["json", "md"], default="json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ingest", parents=[common], help="map square-domain points into the simplex")
    p.add_argument("--input", required=True)
    p.add_argument("--bbox", default=None, help="xmin,xmax,ymin,ymax of the original window")
    p.add_argument("--no-transform", action="store_true")
    p.set_defaults(func=cmd_ingest)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NonConvergence, NoConvergence, IterationCap, SingularInformation) as exc:
        where = ""
        if getattr(exc, "index", None) is not None:
            where = f" at observation {exc.index}"
        level = getattr(exc, "level", None)
        print(f"error: {exc}{where}" + (f" [{level}]" if level else ""), file=sys.stderr)
        return 3
    except (DomainError, ParseError, EmptyAfterFilter, MassZero, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
