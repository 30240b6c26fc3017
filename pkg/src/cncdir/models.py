"""Parameter types and densities on the open unit simplex.

Families: Dirichlet, bivariate Kummer-Beta (KB2), non-central chi-squared,
non-central Dirichlet (NcDir) and conditional non-central Dirichlet
(CNcDir).  Each non-central density comes in a closed (perturbation) form,
used in production, and a mixture-series form kept as an oracle.

Points are arrays of the first D coordinates; the last coordinate
``1 - sum(x)`` is implicit.  Every evaluator accepts one point of shape
``(D,)`` or a batch of shape ``(n, D)`` and returns a float or an array.
Component indices in structural operations are 0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError
from .mixture_weight import MwParams, mw_logpmf
from .specfun import _ctl, hyp1f1, hyp0f1, log_hyp0f1, log_hyp0f1_columns, log_hyp1f1, log_psi2_3

__all__ = [
    "SimplexPoint",
    "DirParams",
    "Kb2Params",
    "NcChisqParams",
    "NcDirParams",
    "CNcDirParams",
    "VertexLimit",
    "dir_logpdf",
    "dir_mixed_moment",
    "dir_vertex_limits",
    "kb2_logpdf",
    "kb2_logpdf_mixture",
    "kb2_vertex_limits",
    "ncchisq_logpdf",
    "ncdir_logpdf",
    "ncdir_logpdf_mixture",
    "ncdir_vertex_limits",
    "cncdir_logpdf",
    "cncdir_logpdf_mixture",
    "cncdir_vertex_limits",
    "cncdir_aggregate",
    "cncdir_marginal",
    "cncdir_component_sum",
    "cncdir_normalized_conditional",
    "params_to_json",
    "params_from_json",
    "VERTICES",
]


def _vec(values, name, positive=True):
    arr = np.array(values, dtype=float).ravel()
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be a nonempty vector of finite reals")
    if positive and np.any(arr <= 0):
        raise DomainError(f"{name} entries must be positive")
    if not positive and np.any(arr < 0):
        raise DomainError(f"{name} entries must be nonnegative")
    arr.setflags(write=False)
    return arr


class _Params:
    """Immutable parameter container with value equality."""

    __slots__ = ()

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @classmethod
    def _fields(cls):
        return [f for k in reversed(cls.__mro__) for f in getattr(k, "__slots__", ())]

    def _key(self):
        return tuple(tuple(getattr(self, f)) if np.ndim(getattr(self, f)) else getattr(self, f)
                     for f in self._fields())

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__, self._key()))

    def __repr__(self):
        body = ", ".join(f"{f}={np.asarray(getattr(self, f)).tolist()}" for f in self._fields())
        return f"{type(self).__name__}({body})"

    @property
    def D(self):
        return self.alpha.size - 1

    @property
    def alpha_plus(self):
        return float(self.alpha.sum())


class DirParams(_Params):
    __slots__ = ("alpha",)

    def __init__(self, alpha):
        a = _vec(alpha, "alpha")
        if a.size < 2:
            raise DomainError("alpha needs at least two entries")
        object.__setattr__(self, "alpha", a)


class Kb2Params(_Params):
    __slots__ = ("alpha", "delta")

    def __init__(self, alpha, delta):
        a = _vec(alpha, "alpha")
        if a.size != 3:
            raise DomainError("KB2 is bivariate: alpha needs 3 entries")
        if not math.isfinite(delta):
            raise DomainError("delta must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "delta", float(delta))


class NcChisqParams(_Params):
    __slots__ = ("g", "lam")

    def __init__(self, g, lam):
        if not (g >= 0 and lam >= 0) or (g == 0 and lam == 0):
            raise DomainError("need g >= 0, lambda >= 0 and not both zero")
        object.__setattr__(self, "g", float(g))
        object.__setattr__(self, "lam", float(lam))


class NcDirParams(_Params):
    __slots__ = ("alpha", "lam")

    def __init__(self, alpha, lam):
        a = _vec(alpha, "alpha")
        l = _vec(lam, "lambda", positive=False)
        if a.size < 2 or a.size != l.size:
            raise DomainError("alpha and lambda must have the same length >= 2")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "lam", l)

    @property
    def lam_plus(self):
        return float(self.lam.sum())


class CNcDirParams(NcDirParams):
    __slots__ = ()

    def mw(self):
        """The mixing Mixture Weight law."""
        return MwParams(self.alpha_plus, self.lam)


class SimplexPoint:
    """A point of the open unit simplex given by its first D coordinates."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        c = np.array(coords, dtype=float).ravel()
        _check_simplex(c[None, :])
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __setattr__(self, name, value):
        raise AttributeError("SimplexPoint is immutable")

    @property
    def D(self):
        return self.coords.size

    def full(self):
        """All D+1 coordinates including the implicit last one."""
        return np.append(self.coords, 1.0 - self.coords.sum())

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __repr__(self):
        return f"SimplexPoint({self.coords.tolist()})"


def _check_simplex(x):
    rest = 1.0 - x.sum(axis=1)
    ok = np.all((x > 0) & (x < 1), axis=1) & (rest > 0)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise DomainError(f"point {bad} is outside the open unit simplex: {x[bad].tolist()}")


def _points(x, D):
    """(n, D+1) array of full coordinates and a flag for scalar input."""
    arr = np.asarray(x.coords if isinstance(x, SimplexPoint) else x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != D:
        raise DomainError(f"points must have {D} coordinates, got shape {np.shape(x)}")
    _check_simplex(arr)
    full = np.empty((arr.shape[0], D + 1))
    full[:, :D] = arr
    full[:, D] = 1.0 - arr.sum(axis=1)
    return full, single


def _out(values, single):
    return float(values[0]) if single else values


# ---------------------------------------------------------------------------
# Dirichlet
# ---------------------------------------------------------------------------

def _dir_logpdf_full(alpha, X):
    return (
        gammaln(alpha.sum())
        - gammaln(alpha).sum()
        + (np.log(X) * (alpha - 1.0)).sum(axis=1)
    )


def dir_logpdf(p, x):
    """Dirichlet log-density."""
    X, single = _points(x, p.D)
    return _out(_dir_logpdf_full(p.alpha, X), single)


def dir_mixed_moment(p, r1, r2):
    """E[X1^r1 X2^r2] = (a1)_{r1} (a2)_{r2} / (a+)_{r1+r2} for the bivariate Dirichlet."""
    if p.D != 2:
        raise DomainError("dir_mixed_moment is bivariate (D = 2)")
    a1, a2 = p.alpha[:2]
    ap = p.alpha_plus
    lg = (
        gammaln(a1 + r1) - gammaln(a1)
        + gammaln(a2 + r2) - gammaln(a2)
        - gammaln(ap + r1 + r2) + gammaln(ap)
    )
    return float(np.exp(lg))


# ---------------------------------------------------------------------------
# Vertex limits
# ---------------------------------------------------------------------------

# vertices of the bivariate simplex in order: x1 -> 1, x2 -> 1, origin
VERTICES = ((1.0, 0.0), (0.0, 1.0), (0.0, 0.0))


@dataclass(frozen=True)
class VertexLimit:
    """Limit of a bivariate density at a vertex.

    ``kind`` is one of ``"finite"``, ``"infinite"``, ``"zero"`` or
    ``"nonexistent"`` (the limit depends on the direction of approach);
    ``value`` is set only for finite limits.
    """

    kind: str
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("finite", "infinite", "zero", "nonexistent"):
            raise DomainError(f"unknown vertex limit kind {self.kind!r}")
        if self.kind == "finite" and not (self.value is not None and self.value > 0):
            raise DomainError("a finite vertex limit must be positive")


def _vertex_cases(alpha, finite_value):
    """Case analysis on the two shapes that vanish at each vertex.

    ``finite_value(i)`` gives the limit at vertex i when both other shapes are 1.
    """
    out = []
    for i in range(3):
        j, k = [m for m in range(3) if m != i]
        s = alpha[j] + alpha[k]
        if s < 2:
            out.append(VertexLimit("infinite"))
        elif s > 2:
            out.append(VertexLimit("zero"))
        elif alpha[j] == 1 and alpha[k] == 1:
            out.append(VertexLimit("finite", float(finite_value(i))))
        else:
            out.append(VertexLimit("nonexistent"))
    return tuple(out)


def _bivariate(p):
    if p.D != 2:
        raise DomainError("vertex limits are defined for the bivariate case (D = 2)")


def dir_vertex_limits(p):
    _bivariate(p)
    a = p.alpha
    return _vertex_cases(a, lambda i: a[i] * (a[i] + 1.0))


def kb2_vertex_limits(p, ctl=None):
    a, d = p.alpha, p.delta

    def val(i):
        if i < 2:
            return a[i] * (a[i] + 1.0) * math.exp(-d) / hyp1f1(a[i] + 1.0, a[i] + 2.0, -d, ctl)
        return a[2] * (a[2] + 1.0) / hyp1f1(2.0, 2.0 + a[2], -d, ctl)

    return _vertex_cases(a, val)


def ncdir_vertex_limits(p):
    _bivariate(p)
    a, l = p.alpha, p.lam

    def val(i):
        j, k = [m for m in range(3) if m != i]
        return math.exp(-(l[j] + l[k]) / 2.0) * ((l[i] / 2.0) ** 2 + (a[i] + 1.0) * (a[i] + l[i]))

    return _vertex_cases(a, val)


def cncdir_vertex_limits(p, ctl=None):
    _bivariate(p)
    a, l = p.alpha, p.lam
    lp = p.lam_plus

    def val(i):
        return a[i] * (a[i] + 1.0) * hyp0f1(a[i], l[i] / 4.0, ctl) / hyp0f1(a[i] + 2.0, lp / 4.0, ctl)

    return _vertex_cases(a, val)


# ---------------------------------------------------------------------------
# Kummer-Beta
# ---------------------------------------------------------------------------

def kb2_logpdf(p, x, ctl=None):
    """Bivariate Kummer-Beta: Dirichlet perturbed by exp(-(x1+x2) delta)."""
    X, single = _points(x, 2)
    a = p.alpha
    out = (
        _dir_logpdf_full(a, X)
        - (X[:, 0] + X[:, 1]) * p.delta
        - log_hyp1f1(a[0] + a[1], a.sum(), -p.delta, _ctl(ctl))
    )
    return _out(out, single)


def kb2_logpdf_mixture(p, x, trunc=200, ctl=None, return_tail=False):
    """KB2 density as a weighted series of Dirichlet(a1, a2, a3 + j) densities.

    The weights (a3)_j/(a+)_j delta^j/j! are normalized by 1F1(a3; a+; delta);
    they alternate in sign when delta < 0.
    """
    X, single = _points(x, 2)
    a = p.alpha
    ap = a.sum()
    d = p.delta
    j = np.arange(trunc, dtype=float)
    logabs = gammaln(a[2] + j) - gammaln(a[2]) - gammaln(ap + j) + gammaln(ap) - gammaln(j + 1)
    if d != 0:
        logabs = logabs + j * math.log(abs(d))
        sign = np.where((d < 0) & (j % 2 == 1), -1.0, 1.0)
    else:
        logabs = np.where(j == 0, 0.0, -np.inf)
        sign = np.ones_like(j)
    # log Dir(x; a1, a2, a3 + j) for every point and j
    shapes = np.empty((trunc, 3))
    shapes[:, :2] = a[:2]
    shapes[:, 2] = a[2] + j
    logdir = (
        (gammaln(shapes.sum(axis=1)) - gammaln(shapes).sum(axis=1))[None, :]
        + np.log(X) @ (shapes - 1.0).T
    )
    logt = logabs[None, :] + logdir
    m = logt.max(axis=1, keepdims=True)
    series = (sign[None, :] * np.exp(logt - m)).sum(axis=1)
    norm = hyp1f1(a[2], ap, d, ctl)
    out = np.log(series) + m[:, 0] - math.log(norm)
    if return_tail:
        tail = np.exp(logt[:, -1] - m[:, 0]) / np.abs(series)
        return _out(out, single), _out(tail, single)
    return _out(out, single)


# ---------------------------------------------------------------------------
# Non-central chi-squared
# ---------------------------------------------------------------------------

def ncchisq_logpdf(p, y, ctl=None):
    """Log-density of the non-central chi-squared as a Poisson(lam/2) mixture
    of chi-squared densities with g + 2i degrees of freedom."""
    from .specfun import _log_positive_series

    ctl = _ctl(ctl)
    y = np.asarray(y, dtype=float)
    single = y.ndim == 0
    y = np.atleast_1d(y).ravel()
    if np.any(y <= 0):
        raise DomainError("y must be positive")
    g, lam = p.g, p.lam
    i0 = 0 if g > 0 else 1
    h = g / 2.0 + i0
    # first term: Poisson(i0; lam/2) * chi2_{g + 2 i0}(y)
    first = (
        -lam / 2.0
        + (i0 * math.log(lam / 2.0) if i0 else 0.0)
        - math.lgamma(i0 + 1)
        + (h - 1.0) * np.log(y)
        - y / 2.0
        - h * math.log(2.0)
        - math.lgamma(h)
    )
    if lam == 0:
        return _out(first, single)
    lhalf = math.log(lam / 2.0)
    ly = np.log(y / 2.0)

    def log_ratio(k):
        i = i0 + k
        return lhalf - np.log(i + 1) + ly - np.log(g / 2.0 + i)

    j0 = 2 * math.sqrt(lam * y.max() / 4.0) + 30
    out = first + _log_positive_series(log_ratio, y.size, j0, ctl, "ncchisq")
    return _out(out, single)


# ---------------------------------------------------------------------------
# Non-central Dirichlet
# ---------------------------------------------------------------------------

def ncdir_logpdf(p, x, ctl=None):
    """Bivariate NcDir: Dirichlet times exp(-lam+/2) Psi_2^(3)."""
    if p.D != 2:
        raise DomainError("the closed NcDir density is implemented for D = 2; use ncdir_logpdf_mixture")
    X, single = _points(x, 2)
    a, l = p.alpha, p.lam
    out = (
        _dir_logpdf_full(a, X)
        - p.lam_plus / 2.0
        + log_psi2_3(
            a.sum(), a[0], a[1], a[2],
            l[0] * X[:, 0] / 2.0, l[1] * X[:, 1] / 2.0, l[2] * X[:, 2] / 2.0,
            _ctl(ctl),
        )
    )
    return _out(out, single)


def _count_grid(sizes):
    grids = np.meshgrid(*[np.arange(k, dtype=float) for k in sizes], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _mixture_over_grid(log_weights, J, alpha, X, return_tail, sizes):
    """log sum_j w_j Dir(x; alpha + j) for each row of X."""
    shapes = alpha[None, :] + J
    lg = gammaln(shapes.sum(axis=1)) - gammaln(shapes).sum(axis=1) + log_weights
    logX = np.log(X)
    n = X.shape[0]
    out = np.empty(n)
    tail = np.empty(n)
    edge = np.zeros(J.shape[0], dtype=bool)
    for d, k in enumerate(sizes):
        if k > 1:
            edge |= J[:, d] == k - 1
    step = max(1, int(4e6 // max(J.shape[0], 1)))
    for start in range(0, n, step):
        sl = slice(start, start + step)
        logt = lg[None, :] + logX[sl] @ (shapes - 1.0).T
        out[sl] = logsumexp(logt, axis=1)
        if return_tail:
            tail[sl] = np.exp(logsumexp(np.where(edge, logt, -np.inf), axis=1) - out[sl]) if edge.any() else 0.0
    return out, tail


def _sizes(trunc, lam):
    if np.ndim(trunc) == 0:
        sizes = [int(trunc)] * lam.size
    else:
        sizes = [int(t) for t in trunc]
    # components with lambda = 0 contribute only j = 0
    return [1 if l == 0 else k for k, l in zip(sizes, lam)]


def ncdir_logpdf_mixture(p, x, trunc=80, return_tail=False):
    """NcDir density as Poisson(lam/2)-weighted Dirichlet(alpha + j) densities.

    Any D; ``trunc`` terms per index (int or per-component sequence).  With
    ``return_tail`` the relative mass of the truncation boundary is returned
    alongside the values.
    """
    X, single = _points(x, p.D)
    sizes = _sizes(trunc, p.lam)
    J = _count_grid(sizes)
    l = p.lam
    with np.errstate(divide="ignore"):
        ll = np.where(l > 0, np.log(np.where(l > 0, l, 1.0) / 2.0), 0.0)
    logw = (J * ll[None, :] - gammaln(J + 1)).sum(axis=1) - p.lam_plus / 2.0
    out, tail = _mixture_over_grid(logw, J, p.alpha, X, return_tail, sizes)
    if return_tail:
        return _out(out, single), _out(tail, single)
    return _out(out, single)


# ---------------------------------------------------------------------------
# Conditional non-central Dirichlet
# ---------------------------------------------------------------------------

def cncdir_logpdf(p, x, ctl=None):
    """CNcDir density: Dirichlet times a product of 0F1 factors.

    f(x) = Dir(x; alpha) prod_i 0F1(;alpha_i; lam_i x_i / 4) / 0F1(;alpha+; lam+/4),
    where the product includes the implicit last coordinate.
    """
    ctl = _ctl(ctl)
    X, single = _points(x, p.D)
    a, l = p.alpha, p.lam
    pert = log_hyp0f1_columns(a, l[None, :] * X / 4.0, ctl).sum(axis=1)
    out = _dir_logpdf_full(a, X) + pert - log_hyp0f1(p.alpha_plus, p.lam_plus / 4.0, ctl)
    return _out(out, single)


def cncdir_logpdf_mixture(p, x, trunc=80, ctl=None, return_tail=False):
    """CNcDir density as a Mixture-Weight-weighted series of Dirichlet(alpha + j)."""
    X, single = _points(x, p.D)
    sizes = _sizes(trunc, p.lam)
    J = _count_grid(sizes)
    logw = mw_logpmf(p.mw(), J, ctl, strict=False)
    out, tail = _mixture_over_grid(np.atleast_1d(logw), J, p.alpha, X, return_tail, sizes)
    if return_tail:
        return _out(out, single), _out(tail, single)
    return _out(out, single)


# ---------------------------------------------------------------------------
# Structural operations
# ---------------------------------------------------------------------------

def cncdir_aggregate(p, partition):
    """Block-sum shapes and non-centralities over a partition of 0..D.

    ``partition`` is a sequence of disjoint index collections covering all
    D+1 components; the last block becomes the implicit last component.
    """
    blocks = [sorted(int(i) for i in b) for b in partition]
    flat = [i for b in blocks for i in b]
    if len(blocks) < 2 or any(len(b) == 0 for b in blocks):
        raise DomainError("partition needs at least two nonempty blocks")
    if sorted(flat) != list(range(p.D + 1)):
        raise DomainError(f"partition must cover 0..{p.D} exactly once")
    alpha = [p.alpha[b].sum() for b in blocks]
    lam = [p.lam[b].sum() for b in blocks]
    return type(p)(alpha, lam)


def cncdir_marginal(p, indices):
    """Law of the components ``indices`` (0-based, at most D of them)."""
    idx = [int(i) for i in indices]
    if not 1 <= len(idx) <= p.D or len(set(idx)) != len(idx):
        raise DomainError("marginal needs between 1 and D distinct indices")
    rest = [i for i in range(p.D + 1) if i not in idx]
    return cncdir_aggregate(p, [[i] for i in idx] + [rest])


def cncdir_component_sum(p):
    """Law of X_1 + ... + X_D (a D = 1 member of the family)."""
    return cncdir_aggregate(p, [list(range(p.D)), [p.D]])


def cncdir_normalized_conditional(p, fixed):
    """Parameters of the remaining components given the first k, renormalized.

    Given x_1..x_k the vector (x_{k+1}, ..., x_D) / (1 - x_1 - ... - x_k)
    is CNcDir with shapes alpha_{k+1..D+1} and non-centralities scaled by
    1 - x_1 - ... - x_k.
    """
    fixed = np.atleast_1d(np.asarray(fixed, dtype=float))
    k = fixed.size
    if not 1 <= k <= p.D - 1:
        raise DomainError(f"can condition on 1..{p.D - 1} coordinates")
    if np.any(fixed <= 0) or fixed.sum() >= 1:
        raise DomainError("fixed coordinates must be positive with sum < 1")
    scale = 1.0 - fixed.sum()
    return type(p)(p.alpha[k:], p.lam[k:] * scale)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def params_to_json(p, **extra):
    """JSON-ready dict {"alpha": [...], "lambda": [...], "delta": ...}."""
    out = {}
    if isinstance(p, NcChisqParams):
        out = {"g": p.g, "lambda": p.lam}
    else:
        out["alpha"] = p.alpha.tolist()
        if isinstance(p, NcDirParams):
            out["lambda"] = p.lam.tolist()
        if isinstance(p, Kb2Params):
            out["delta"] = p.delta
    out.update(extra)
    return out


_FAMILIES = {"dir": DirParams, "kb2": Kb2Params, "ncdir": NcDirParams, "cncdir": CNcDirParams}


def params_from_json(obj, family=None):
    """Build a parameter object from a dict or JSON string.

    Also accepts a fit report, whose ``estimates`` use the same keys.  The
    family is taken from ``family`` or the object's ``"family"`` key, and
    otherwise inferred (lambda present means CNcDir).
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    family = family or obj.get("family")
    body = obj
    if "alpha" not in obj and "estimates" in obj:
        est = obj["estimates"]
        body = {"alpha": [est[k] for k in sorted(est) if k.startswith("alpha")]}
        lam = [est[k] for k in sorted(est) if k.startswith("lambda")]
        if lam:
            body["lambda"] = lam
        if "delta" in est:
            body["delta"] = est["delta"]
    if family is None:
        family = "kb2" if "delta" in body else ("cncdir" if "lambda" in body else "dir")
    family = family.lower()
    if family not in _FAMILIES:
        raise DomainError(f"unknown family {family!r}")
    if "alpha" not in body:
        raise DomainError("parameters need an 'alpha' entry")
    if family == "dir":
        return DirParams(body["alpha"])
    if family == "kb2":
        return Kb2Params(body["alpha"], body.get("delta", 0.0))
    return _FAMILIES[family](body["alpha"], body.get("lambda", [0.0] * len(body["alpha"])))
