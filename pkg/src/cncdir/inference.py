"""Maximum-likelihood fitting and likelihood-ratio tests for the bivariate
Dirichlet, Kummer-Beta, NcDir and CNcDir models.

Parameters are named ``alpha1..alpha3``, ``lambda1..lambda3`` and
``delta``.  A :class:`ModelSpec` pins any subset of the shapes to 1.  Fits
run Nelder-Mead from several dispersed starts in a log-reparameterized
space; standard errors come from a central-difference observed
information matrix on the original scale.
"""

from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import (
    CNcDirError,
    DomainError,
    EmptyAfterFilter,
    NoConvergence,
    NonConvergence,
    ParseError,
)
from .models import (
    CNcDirParams,
    DirParams,
    Kb2Params,
    NcDirParams,
    _check_simplex,
)
from .specfun import (
    _ctl,
    chi2_sf,
    log_hyp0f1_columns,
    log_hyp0f1_scalar,
    log_hyp1f1,
    log_psi2_3,
)

__all__ = [
    "FAMILIES",
    "Dataset2D",
    "ModelSpec",
    "FitOptions",
    "FitReport",
    "LrReport",
    "HYPOTHESES",
    "param_names",
    "loglik",
    "fit_ml",
    "lr_test",
    "lr_battery",
    "select_model",
    "ingest_square_csv",
    "parse_constraints",
]

FAMILIES = ("dir", "kb2", "ncdir", "cncdir")
_ALIASES = {"dir2": "dir", "kb": "kb2", "ncdir2": "ncdir", "cncdir2": "cncdir"}
_LAMBDA_FLOOR = 1e-8


def _family(name):
    f = name.lower()
    f = _ALIASES.get(f, f)
    if f not in FAMILIES:
        raise DomainError(f"unknown model family {name!r}; expected one of {FAMILIES}")
    return f


def param_names(family):
    family = _family(family)
    names = ["alpha1", "alpha2", "alpha3"]
    if family == "kb2":
        names.append("delta")
    elif family in ("ncdir", "cncdir"):
        names += ["lambda1", "lambda2", "lambda3"]
    return names


# ---------------------------------------------------------------------------
# Data and model description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset2D:
    """Observations in the open bivariate simplex, one row (x1, x2) each."""

    points: np.ndarray
    n_dropped_lower: int = 0
    n_dropped_boundary: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise DomainError("a dataset needs at least one (x1, x2) row")
        _check_simplex(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.shape[0]

    def full(self):
        """(n, 3) array with the implicit third coordinate appended."""
        return np.column_stack([self.points, 1.0 - self.points.sum(axis=1)])


def parse_constraints(text):
    """Parse "a1,a2,a3" / "alpha1,alpha3" / "1,2" into shape indices {1, 2, 3}."""
    if text is None:
        return frozenset()
    if isinstance(text, (set, frozenset, list, tuple)):
        items = list(text)
    else:
        items = [t for t in re.split(r"[,\s]+", str(text).strip()) if t]
    out = set()
    for t in items:
        m = re.fullmatch(r"(?:a|alpha)?([123])", str(t).strip().lower())
        if not m:
            raise DomainError(f"cannot parse constraint {t!r}; use a1, a2, a3")
        out.add(int(m.group(1)))
    return frozenset(out)


@dataclass(frozen=True)
class ModelSpec:
    """A family plus the set of shape indices (1-based) pinned to 1."""

    family: str
    constraints: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "family", _family(self.family))
        object.__setattr__(self, "constraints", parse_constraints(self.constraints))

    @property
    def names(self):
        return param_names(self.family)

    @property
    def free_names(self):
        pinned = {f"alpha{i}" for i in self.constraints}
        return [n for n in self.names if n not in pinned]

    @property
    def n_free(self):
        return len(self.free_names)

    def label(self):
        if not self.constraints:
            return f"{self.family}: unconstrained"
        idx = sorted(self.constraints)
        return f"{self.family}: " + "=".join(f"alpha{i}" for i in idx) + "=1"


# (label, constraints) of the four null hypotheses of the standard battery
HYPOTHESES = (
    frozenset({1, 2, 3}),
    frozenset({1, 2}),
    frozenset({1, 3}),
    frozenset({2, 3}),
)


# ---------------------------------------------------------------------------
# Log-likelihoods
# ---------------------------------------------------------------------------

def _as_vector(family, params):
    """Full parameter vector in ``param_names`` order."""
    names = param_names(family)
    if isinstance(params, dict):
        try:
            return np.array([float(params[k]) for k in names])
        except KeyError as exc:
            raise DomainError(f"missing parameter {exc.args[0]!r}") from None
    if isinstance(params, (DirParams, Kb2Params, NcDirParams)):
        if isinstance(params, Kb2Params):
            return np.append(params.alpha, params.delta)
        if isinstance(params, NcDirParams):
            return np.concatenate([params.alpha, params.lam])
        return np.array(params.alpha, dtype=float)
    v = np.asarray(params, dtype=float).ravel()
    if v.size != len(names):
        raise DomainError(f"{family} needs {len(names)} parameters, got {v.size}")
    return v


def _vector_to_params(family, v):
    if family == "dir":
        return DirParams(v[:3])
    if family == "kb2":
        return Kb2Params(v[:3], v[3])
    if family == "ncdir":
        return NcDirParams(v[:3], v[3:])
    return CNcDirParams(v[:3], v[3:])


class _Data:
    """Sufficient pieces of a dataset reused across likelihood evaluations."""

    def __init__(self, data):
        X = data.full()
        self.X = X
        self.X4 = X / 4.0
        self.n = X.shape[0]
        self.sumlog = [float(v) for v in np.log(X).sum(axis=0)]
        self.sum12 = float((X[:, 0] + X[:, 1]).sum())


def _loglik_vector(family, v, d, ctl):
    vals = v.tolist()
    a1, a2, a3 = vals[:3]
    if not (a1 > 0 and a2 > 0 and a3 > 0) or not all(map(math.isfinite, vals)):
        raise DomainError("shape parameters must be positive")
    ap = a1 + a2 + a3
    s1, s2, s3 = d.sumlog
    lg = math.lgamma
    ll = d.n * (lg(ap) - lg(a1) - lg(a2) - lg(a3)) + (a1 - 1.0) * s1 + (a2 - 1.0) * s2 + (a3 - 1.0) * s3
    if family == "dir":
        return ll
    if family == "kb2":
        delta = v[3]
        return ll - delta * d.sum12 - d.n * log_hyp1f1(a1 + a2, ap, -delta, ctl)
    lam = v[3:]
    if min(vals[3:]) < 0:
        raise DomainError("non-centrality parameters must be nonnegative")
    lp = vals[3] + vals[4] + vals[5]
    if family == "ncdir":
        X = d.X
        psi = log_psi2_3(
            ap, a1, a2, a3,
            lam[0] * X[:, 0] / 2.0, lam[1] * X[:, 1] / 2.0, lam[2] * X[:, 2] / 2.0, ctl,
        )
        return ll - d.n * lp / 2.0 + float(np.sum(psi))
    pert = log_hyp0f1_columns(v[:3], lam * d.X4, ctl)
    norm = log_hyp0f1_scalar(ap, lp / 4.0, ctl)
    return ll + float(pert.sum()) - d.n * norm


def loglik(model, params, data, ctl=None):
    """Log-likelihood of ``params`` for ``model`` on ``data``.

    ``params`` may be a parameter object, a dict keyed by parameter name or
    a full vector in :func:`param_names` order.  A NonConvergence raised
    by a series carries the offending observation index.
    """
    if isinstance(model, str):
        model = ModelSpec(model)
    if not isinstance(data, Dataset2D):
        data = Dataset2D(data)
    v = _as_vector(model.family, params)
    return float(_loglik_vector(model.family, v, _Data(data), _ctl(ctl)))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    n_starts: dispersed starting points (the best-scoring grid centre is
    always one of them); extra_starts: additional full parameter dicts;
    fatol_rel: simplex function-value spread relative to |loglik|;
    maxiter: Nelder-Mead iterations per start.
    """

    n_starts: int = 8
    maxiter: int = 5000
    fatol_rel: float = 1e-8
    xatol: float = 1e-6
    seed: int = 20240611
    polish: bool = True
    compute_se: bool = True
    ctl: object = None
    extra_starts: tuple = ()


@dataclass
class FitReport:
    family: str
    constraints: frozenset
    estimates: dict
    std_errors: dict | None
    loglik: float
    converged: bool
    n_evals: int
    starts_used: int
    message: str = ""

    @property
    def model(self):
        return ModelSpec(self.family, self.constraints)

    def params(self):
        return _vector_to_params(self.family, _as_vector(self.family, self.estimates))

    def to_json(self, **extra):
        out = {
            "family": self.family,
            "constraints": [f"a{i}" for i in sorted(self.constraints)],
            "estimates": {k: float(v) for k, v in self.estimates.items()},
            "std_errors": None
            if self.std_errors is None
            else {k: float(v) for k, v in self.std_errors.items()},
            "loglik": float(self.loglik),
            "converged": bool(self.converged),
            "n_evals": int(self.n_evals),
            "starts_used": int(self.starts_used),
        }
        if self.message:
            out["message"] = self.message
        # flat keys so the report doubles as a parameter file
        out["alpha"] = [self.estimates[f"alpha{i}"] for i in (1, 2, 3)]
        if "delta" in self.estimates:
            out["delta"] = self.estimates["delta"]
        if "lambda1" in self.estimates:
            out["lambda"] = [self.estimates[f"lambda{i}"] for i in (1, 2, 3)]
        out.update(extra)
        return out


class _Objective:
    """Negative log-likelihood in the transformed space of free parameters."""

    def __init__(self, model, d, ctl):
        self.model = model
        self.d = d
        self.ctl = ctl
        self.names = model.names
        self.free = model.free_names
        self.idx = [self.names.index(k) for k in self.free]
        self.logged = [not k.startswith("delta") for k in self.free]
        # (position, logged, floor) for each free parameter
        self.plan = [
            (i, lg, _LAMBDA_FLOOR if k.startswith("lambda") else 0.0)
            for k, i, lg in zip(self.free, self.idx, self.logged)
        ]
        self.n_evals = 0

    def full(self, theta):
        v = [1.0] * len(self.names)
        for (i, logged, floor), t in zip(self.plan, theta.tolist()):
            v[i] = max(math.exp(min(t, 700.0)), floor) if logged else t
        return np.array(v)

    def to_theta(self, v):
        th = []
        for k, i in enumerate(self.idx):
            if self.logged[k]:
                th.append(math.log(max(v[i], _LAMBDA_FLOOR)))
            else:
                th.append(v[i])
        return np.array(th)

    def value(self, v):
        self.n_evals += 1
        try:
            with np.errstate(all="ignore"):
                ll = _loglik_vector(self.model.family, v, self.d, self.ctl)
        except (NonConvergence, DomainError, FloatingPointError, OverflowError):
            return math.inf
        return -ll if math.isfinite(ll) else math.inf

    def __call__(self, theta):
        return self.value(self.full(theta))


def _mom_alpha(X):
    """Dirichlet method-of-moments shapes."""
    m = X.mean(axis=0)
    v = X.var(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = m * (1 - m) / v - 1.0
    s = s[np.isfinite(s) & (s > 0)]
    ap = float(np.median(s)) if s.size else 3.0
    return np.clip(m * ap, 0.05, 50.0), m


def _center(obj, d):
    """Best parameter vector on a small grid built around moment estimates."""
    alpha, m = _mom_alpha(d.X)
    family = obj.model.family
    cands = []
    if family == "dir":
        cands = [alpha]
    elif family == "kb2":
        cands = [np.append(alpha, dl) for dl in (-2.0, 0.0, 2.0)]
    else:
        for s in (0.25, 0.5, 1.0):
            for c in (0.3, 3.0, 30.0, 150.0):
                cands.append(np.concatenate([alpha * s, c * m]))
    best, bestf = None, math.inf
    for v in cands:
        v = v.copy()
        for i in obj.model.constraints:
            v[i - 1] = 1.0
        f = obj.value(v)
        if f < bestf or best is None:
            best, bestf = v, f
    return best


def _nelder_mead(obj, theta0, opts, scale):
    f0 = obj(theta0)
    fatol = opts.fatol_rel * max(1.0, abs(f0) if math.isfinite(f0) else 1.0)
    k = theta0.size
    simplex = np.vstack([theta0] + [theta0 + np.eye(k)[i] * scale for i in range(k)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            obj,
            theta0,
            method="Nelder-Mead",
            options={
                "maxiter": opts.maxiter,
                "maxfev": 4 * opts.maxiter,
                "xatol": opts.xatol,
                "fatol": fatol,
                "initial_simplex": simplex,
                "adaptive": k > 4,
            },
        )
    return res


def _observed_information(obj, v, names_free):
    """Central-difference negative Hessian of the loglik on the original scale."""
    idx = obj.idx
    k = len(idx)
    h = np.array([max(1e-4, 1e-4 * abs(v[i])) for i in idx])
    for m, i in enumerate(idx):
        if not names_free[m].startswith("delta"):
            # keep positive parameters positive
            h[m] = min(h[m], 0.5 * v[i])

    def f(step):
        w = v.copy()
        for m, i in enumerate(idx):
            w[i] += step[m]
        return -obj.value(w)

    f0 = f(np.zeros(k))
    H = np.empty((k, k))
    for a in range(k):
        ea = np.zeros(k)
        ea[a] = h[a]
        H[a, a] = (f(ea) - 2 * f0 + f(-ea)) / h[a] ** 2
        for b in range(a):
            eb = np.zeros(k)
            eb[b] = h[b]
            H[a, b] = H[b, a] = (f(ea + eb) - f(ea - eb) - f(-ea + eb) + f(-ea - eb)) / (
                4 * h[a] * h[b]
            )
    return -H


def fit_ml(model, data, opts=None):
    """Maximum-likelihood fit; returns a :class:`FitReport`.

    Raises :class:`NoConvergence` when no start reaches the tolerance.  A
    non positive-definite observed information leaves ``std_errors`` as
    ``None`` with an explanatory ``message``.
    """
    opts = opts or FitOptions()
    if isinstance(model, str):
        model = ModelSpec(model)
    if not isinstance(data, Dataset2D):
        data = Dataset2D(data)
    ctl = _ctl(opts.ctl)
    d = _Data(data)
    obj = _Objective(model, d, ctl)
    rng = np.random.default_rng(opts.seed)

    k = len(obj.free)
    if k == 0:
        # every parameter pinned: nothing to optimize
        v = obj.full(np.empty(0))
        f = obj.value(v)
        if not math.isfinite(f):
            raise NoConvergence(f"log-likelihood not finite for {model.label()}")
        return FitReport(
            family=model.family, constraints=model.constraints,
            estimates=dict(zip(obj.names, map(float, v))), std_errors={} if opts.compute_se else None,
            loglik=-f, converged=True, n_evals=obj.n_evals, starts_used=0,
            message="no free parameters",
        )
    centre = _center(obj, d)
    starts = [obj.to_theta(centre)]
    for _ in range(max(0, opts.n_starts - 1)):
        th = starts[0].copy()
        for m in range(k):
            if obj.logged[m]:
                th[m] += rng.uniform(math.log(0.25), math.log(4.0))
            else:
                th[m] += rng.uniform(-2.0, 2.0)
        starts.append(th)
    for extra in opts.extra_starts:
        v = _as_vector(model.family, extra).copy()
        for i in model.constraints:
            v[i - 1] = 1.0
        starts.insert(0, obj.to_theta(v))

    results = []
    for th in starts:
        if not math.isfinite(obj(th)):
            continue
        results.append(_nelder_mead(obj, th, opts, 0.5))
    if not results:
        raise NoConvergence("the log-likelihood is not finite at any starting point")
    best = min(results, key=lambda r: r.fun)
    any_ok = any(r.success for r in results)
    if opts.polish:
        res = _nelder_mead(obj, best.x, opts, 0.05)
        if res.fun <= best.fun:
            best = res
            any_ok = any_ok or res.success
    if not any_ok or not math.isfinite(best.fun):
        raise NoConvergence(f"no start converged for {model.label()}")

    v = obj.full(best.x)
    fbest = best.fun
    # lambda components sitting on the floor: snap to zero if that costs nothing
    message = []
    snapped = []
    for m, name in enumerate(obj.free):
        i = obj.idx[m]
        if name.startswith("lambda") and v[i] <= 1e-4:
            w = v.copy()
            w[i] = 0.0
            fz = obj.value(w)
            if fz <= fbest + 1e-6:
                v, fbest = w, min(fz, fbest)
                snapped.append(name)
    if snapped:
        message.append("snapped to zero: " + ", ".join(snapped))

    estimates = dict(zip(obj.names, map(float, v)))
    std_errors = None
    if opts.compute_se:
        interior = [m for m, name in enumerate(obj.free) if name not in snapped]
        sub = _Objective(model, d, ctl)
        sub.idx = [obj.idx[m] for m in interior]
        names_free = [obj.free[m] for m in interior]
        if sub.idx:
            info = _observed_information(sub, v, names_free)
            obj.n_evals += sub.n_evals
            try:
                if not np.all(np.isfinite(info)):
                    raise np.linalg.LinAlgError("non-finite information")
                np.linalg.cholesky(info)
                cov = np.linalg.inv(info)
                se = np.sqrt(np.diag(cov))
                std_errors = dict(zip(names_free, map(float, se)))
            except np.linalg.LinAlgError:
                message.append("observed information not positive definite; standard errors omitted")
    return FitReport(
        family=model.family,
        constraints=model.constraints,
        estimates=estimates,
        std_errors=std_errors,
        loglik=-fbest,
        converged=True,
        n_evals=obj.n_evals,
        starts_used=len(results),
        message="; ".join(message),
    )


# ---------------------------------------------------------------------------
# Likelihood-ratio tests and model selection
# ---------------------------------------------------------------------------

@dataclass
class LrReport:
    model: ModelSpec
    w: float
    df: int
    p_value: float
    l0: float
    l1: float
    constrained: FitReport | None = field(default=None, repr=False)
    unconstrained: FitReport | None = field(default=None, repr=False)
    optimization_warning: bool = False

    def to_json(self):
        return {
            "family": self.model.family,
            "constraints": [f"a{i}" for i in sorted(self.model.constraints)],
            "l0": self.l0,
            "l1": self.l1,
            "w": self.w,
            "df": self.df,
            "p": self.p_value,
            "optimization_warning": self.optimization_warning,
        }


def _lr_from_fits(model, f0, f1):
    raw = -2.0 * (f0.loglik - f1.loglik)
    slack = 1e-6 * max(1.0, abs(f1.loglik))
    w = max(raw, 0.0)
    df = len(model.constraints)
    return LrReport(
        model=model,
        w=w,
        df=df,
        p_value=chi2_sf(w, df),
        l0=f0.loglik,
        l1=f1.loglik,
        constrained=f0,
        unconstrained=f1,
        optimization_warning=raw < -slack,
    )


def lr_test(model, data, opts=None, unconstrained=None):
    """LR test of the pinned shapes in ``model`` against the free model.

    The unconstrained fit is started from the constrained optimum as well
    as its own dispersed starts, so that l1 >= l0 up to optimizer slack.
    """
    opts = opts or FitOptions()
    if not model.constraints:
        raise DomainError("lr_test needs at least one pinned shape")
    f0 = fit_ml(model, data, opts)
    if unconstrained is None:
        full = ModelSpec(model.family)
        unconstrained = fit_ml(
            full, data, replace(opts, extra_starts=tuple(opts.extra_starts) + (f0.estimates,))
        )
    return _lr_from_fits(model, f0, unconstrained)


def lr_battery(family, data, opts=None, hypotheses=HYPOTHESES):
    """Run the standard four-hypothesis battery for one family."""
    opts = opts or FitOptions()
    constrained = [fit_ml(ModelSpec(family, h), data, opts) for h in hypotheses]
    f1 = fit_ml(
        ModelSpec(family),
        data,
        replace(opts, extra_starts=tuple(opts.extra_starts) + tuple(f.estimates for f in constrained)),
    )
    return [_lr_from_fits(ModelSpec(family, h), f0, f1) for h, f0 in zip(hypotheses, constrained)]


def select_model(reports, level=0.05):
    """Fewest-parameter non-rejected hypothesis, ties broken by highest p.

    If every hypothesis is rejected the unconstrained model is returned.
    """
    if not reports:
        raise DomainError("select_model needs at least one report")
    kept = [r for r in reports if r.p_value >= level]
    if not kept:
        return ModelSpec(reports[0].model.family)
    best = max(kept, key=lambda r: (r.df, r.p_value))
    return best.model


# ---------------------------------------------------------------------------
# Data ingestion
# ---------------------------------------------------------------------------

_BBOX = re.compile(r"#\s*bbox\s*[:=]?\s*(.*)", re.IGNORECASE)


def ingest_square_csv(path_or_text, transform=True, bbox=None):
    """Read a two-column CSV of points in the unit square.

    A comment line ``# bbox: xmin, xmax, ymin, ymax`` (or the ``bbox``
    argument) rescales coordinates to [0, 1]^2.  With ``transform`` only
    points strictly above the anti-diagonal (x + y > 1) are kept and mapped
    by (x, y) -> (1 - y, 1 - x) into the simplex; points on the boundary of
    the resulting simplex are dropped and counted.
    """
    if hasattr(path_or_text, "read"):
        text = path_or_text.read()
    elif isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text, newline="") as fh:
            text = fh.read()
    rows = []
    header_seen = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip():
            continue
        first = row[0].strip()
        if first.startswith("#"):
            m = _BBOX.match(",".join(row).strip())
            if m and bbox is None:
                vals = [v for v in re.split(r"[,\s]+", m.group(1).strip()) if v]
                try:
                    bbox = tuple(float(v) for v in vals)
                except ValueError:
                    raise ParseError(f"bad bbox line at row {lineno}", row=lineno) from None
            continue
        if len(row) < 2:
            raise ParseError(f"row {lineno}: expected two columns", row=lineno)
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            if not rows and not header_seen:
                header_seen = True
                continue
            raise ParseError(f"row {lineno}: non-numeric value", row=lineno) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError(f"row {lineno}: non-finite value", row=lineno)
        rows.append((lineno, x, y))
    if not rows:
        raise EmptyAfterFilter("no data rows found")
    arr = np.array([(x, y) for _, x, y in rows])
    if bbox is not None:
        if len(bbox) != 4 or bbox[1] <= bbox[0] or bbox[3] <= bbox[2]:
            raise ParseError("bbox must be xmin, xmax, ymin, ymax with positive extents")
        arr[:, 0] = (arr[:, 0] - bbox[0]) / (bbox[1] - bbox[0])
        arr[:, 1] = (arr[:, 1] - bbox[2]) / (bbox[3] - bbox[2])
    outside = np.flatnonzero(np.any((arr < 0) | (arr > 1), axis=1))
    if outside.size:
        raise ParseError(f"row {rows[outside[0]][0]}: point outside [0, 1]^2", row=rows[outside[0]][0])
    n_lower = 0
    if transform:
        upper = arr.sum(axis=1) > 1.0
        n_lower = int((~upper).sum())
        arr = arr[upper]
        arr = np.column_stack([1.0 - arr[:, 1], 1.0 - arr[:, 0]])
    inside = np.all(arr > 0, axis=1) & (arr.sum(axis=1) < 1.0)
    n_boundary = int((~inside).sum())
    arr = arr[inside]
    if arr.shape[0] == 0:
        raise EmptyAfterFilter("no points left inside the simplex after filtering")
    return Dataset2D(arr, n_dropped_lower=n_lower, n_dropped_boundary=n_boundary)
