"""Special functions: Pochhammer symbols, hypergeometric series, Humbert's
three-variable Psi_2 and the regularized upper incomplete gamma function.

Two families of evaluators live here.

* Scalar reference routines (:func:`genhypergeo`, :func:`psi2_3`) that sum
  the defining series term by term, report how many terms were used and
  whether the tolerance was met.
* Vectorised log-space kernels (:func:`log_hyp0f1`, :func:`log_hyp1f1`,
  :func:`log_psi2_3`) used by densities and likelihoods.  These accept
  numpy arrays, never overflow for the argument ranges met in practice and
  raise :class:`~cncdir.errors.NonConvergence` instead of truncating.

All series stop on the relative rule ``|term| <= tol * |partial sum|``
once the terms have started to decrease; ``tol = 0`` keeps going until
the new term no longer changes the partial sum.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError, NonConvergence, CNcDirError

__all__ = [
    "SeriesControl",
    "SeriesResult",
    "DEFAULT_CONTROL",
    "pochhammer",
    "log_pochhammer",
    "poch_sum_split",
    "genhypergeo",
    "hyp0f1",
    "hyp1f1",
    "kummer_transform_check",
    "f01_recurrence_check",
    "psi2_3",
    "log_hyp0f1",
    "log_hyp1f1",
    "log_hyp0f1_columns",
    "log_psi2_3",
    "regularized_gamma_upper",
    "chi2_sf",
]

_EPS = np.finfo(float).eps
# chunk size (columns) for the vectorised kernels; bounds peak memory
_CHUNK = 20000


@dataclass(frozen=True)
class SeriesControl:
    """Tolerance and term budget for every infinite-series evaluation."""

    tol: float = 1e-10
    maxiter: int = 2000

    def __post_init__(self):
        if not (self.tol >= 0.0):
            raise DomainError(f"tol must be >= 0, got {self.tol}")
        if int(self.maxiter) != self.maxiter or self.maxiter < 1:
            raise DomainError(f"maxiter must be a positive integer, got {self.maxiter}")

    @classmethod
    def from_env(cls, tol=None, maxiter=None):
        """Defaults overridden by ``CNCDIR_TOL`` / ``CNCDIR_MAXITER``, then by arguments."""
        if tol is None:
            tol = float(os.environ.get("CNCDIR_TOL", cls.tol))
        if maxiter is None:
            maxiter = int(os.environ.get("CNCDIR_MAXITER", cls.maxiter))
        return cls(tol=tol, maxiter=maxiter)

    @property
    def effective_tol(self):
        # tol == 0 means "until the partial sum stops changing"
        return self.tol if self.tol > 0 else _EPS / 2


DEFAULT_CONTROL = SeriesControl()


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms_used: int
    converged: bool
    trace: tuple | None = field(default=None, compare=False)

    def __float__(self):
        return float(self.value)


def _ctl(ctl):
    return DEFAULT_CONTROL if ctl is None else ctl


# ---------------------------------------------------------------------------
# Pochhammer symbols
# ---------------------------------------------------------------------------

def log_pochhammer(a, l):
    """log (a)_l = log Gamma(a + l) - log Gamma(a), for a > 0."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise DomainError("log_pochhammer requires a > 0")
    out = gammaln(a + l) - gammaln(a)
    return out if np.ndim(out) else float(out)


def pochhammer(a, l):
    """Ascending factorial (a)_l = a (a+1) ... (a+l-1); (a)_0 = 1.

    Small ``l`` uses the direct product, large ``l`` goes through log-gamma.
    """
    if int(l) != l or l < 0:
        raise DomainError(f"l must be a nonnegative integer, got {l}")
    l = int(l)
    if np.ndim(a) == 0 and l <= 150:
        out = 1.0
        for i in range(l):
            out *= a + i
        return float(out)
    return np.exp(log_pochhammer(a, l))


def poch_sum_split(a, l1, l2):
    """(a)_{l1+l2} evaluated as (a)_{l1} (a + l1)_{l2}."""
    return pochhammer(a, l1) * pochhammer(a + l1, l2)


# ---------------------------------------------------------------------------
# Scalar generalized hypergeometric series
# ---------------------------------------------------------------------------

def _is_nonpositive_int(v):
    return v <= 0 and float(v).is_integer()


def genhypergeo(upper, lower, x, ctl=None, kummer=True):
    """Partial sums of pFq(upper; lower; x).

    Returns a :class:`SeriesResult`; ``converged`` is False when the term
    budget ran out first (callers decide whether to escalate).  For 1F1
    with ``x < 0`` Kummer's transformation is applied first (unless
    ``kummer=False``) to avoid the cancellation of the alternating series.
    """
    ctl = _ctl(ctl)
    upper = [float(u) for u in np.atleast_1d(upper)] if np.size(upper) else []
    lower = [float(b) for b in np.atleast_1d(lower)] if np.size(lower) else []
    x = float(x)
    for b in lower:
        if _is_nonpositive_int(b):
            raise DomainError(f"lower parameter {b} is a nonpositive integer")
    if kummer and len(upper) == 1 and len(lower) == 1 and x < 0.0:
        a, b = upper[0], lower[0]
        inner = genhypergeo([b - a], [b], -x, ctl, kummer=False)
        return SeriesResult(math.exp(x) * inner.value, inner.terms_used, inner.converged)

    tol = ctl.effective_tol
    total = 1.0
    term = 1.0
    prev_abs = 1.0
    for i in range(ctl.maxiter):
        ratio = x / (i + 1)
        for u in upper:
            ratio *= u + i
        for b in lower:
            ratio /= b + i
        term *= ratio
        new = total + term
        if term == 0.0:
            return SeriesResult(new, i + 1, True)
        decreasing = abs(term) <= prev_abs
        if decreasing and abs(new - total) <= tol * abs(new):
            return SeriesResult(new, i + 1, True)
        total = new
        prev_abs = abs(term)
    return SeriesResult(total, ctl.maxiter, False)


def hyp0f1(b, x, ctl=None):
    """0F1(;b;x) as a float; raises NonConvergence on an exhausted budget."""
    res = genhypergeo([], [b], x, ctl)
    if not res.converged:
        raise NonConvergence(f"0F1({b}; {x}) did not converge", level="0F1")
    return res.value


def hyp1f1(a, b, x, ctl=None):
    """Kummer's function 1F1(a;b;x) as a float."""
    res = genhypergeo([a], [b], x, ctl)
    if not res.converged:
        raise NonConvergence(f"1F1({a}; {b}; {x}) did not converge", level="1F1")
    return res.value


def kummer_transform_check(a, b, x, ctl=None):
    """Both sides of 1F1(a;b;x) = e^x 1F1(b-a;b;-x), each summed directly.

    Neither side uses the automatic transformation, so the two values come
    from independent series; keep |x| moderate since one side alternates.
    """
    if b <= 0:
        raise DomainError("b must be positive")
    sides = []
    for aa, xx in ((a, x), (b - a, -x)):
        res = genhypergeo([aa], [b], xx, ctl, kummer=False)
        if not res.converged:
            raise NonConvergence(f"1F1({aa}; {b}; {xx}) did not converge", level="1F1")
        sides.append(res.value)
    return sides[0], math.exp(x) * sides[1]


def f01_recurrence_check(b, x, ctl=None):
    """Return (0F1(b;x), 0F1(b+1;x), 0F1(b+2;x)) after checking
    0F1(b;x) = 0F1(b+1;x) + x / (b (b+1)) 0F1(b+2;x)."""
    if b <= 0:
        raise DomainError("b must be positive")
    if x < 0:
        raise DomainError("x must be nonnegative")
    f0, f1, f2 = (hyp0f1(b + k, x, ctl) for k in range(3))
    rhs = f1 + x / (b * (b + 1.0)) * f2
    tol = _ctl(ctl).effective_tol
    if abs(f0 - rhs) > max(1e-12, 100 * tol) * abs(f0):
        raise CNcDirError(f"0F1 recurrence violated at b={b}, x={x}: {f0} vs {rhs}")
    return f0, f1, f2


# ---------------------------------------------------------------------------
# Humbert Psi_2 in three variables: nested scalar routine
# ---------------------------------------------------------------------------

def _psi2_inner(a, b2, b3, x2, x3, ctl):
    """Psi_2(a; b2, b3; x2, x3) as a sum over j2 of weighted 1F1 values."""
    tol = ctl.effective_tol
    first = genhypergeo([a], [b3], x3, ctl)
    if not first.converged:
        raise NonConvergence("1F1 level did not converge", level="psi2_3/1F1")
    total = first.value
    coef = 1.0
    prev = abs(total)
    s, l2 = a, b2
    for m in range(1, ctl.maxiter + 1):
        coef *= (s / l2) * x2 / m
        f = genhypergeo([s + 1], [b3], x3, ctl)
        if not f.converged:
            raise NonConvergence("1F1 level did not converge", level="psi2_3/1F1")
        fac = coef * f.value
        series = total + fac
        if fac == 0.0 or (abs(fac) <= prev and abs(series - total) <= tol * abs(series)):
            return series
        prev = abs(fac)
        total = series
        s += 1.0
        l2 += 1.0
    raise NonConvergence("inner Psi_2 series did not converge", level="psi2_3/inner")


def psi2_3(a, b1, b2, b3, x1, x2, x3, ctl=None, debug=False):
    """Psi_2^(3)(a; b1, b2, b3; x1, x2, x3) by the nested-series scheme.

    The outer sum runs over j1 with coefficients updated multiplicatively,
    each outer term multiplies a two-variable Psi_2 which is itself a sum
    over j2 of Kummer functions 1F1(a + j1 + j2; b3; x3).  With
    ``debug=True`` the returned result carries the outer increments in
    ``trace``.  NonConvergence at any level is raised with ``level`` set.
    """
    ctl = _ctl(ctl)
    for b in (b1, b2, b3):
        if b <= 0:
            raise DomainError("Psi_2 lower parameters must be positive")
    if a <= 0:
        raise DomainError("Psi_2 upper parameter must be positive")
    if min(x1, x2, x3) < 0:
        raise DomainError("Psi_2 arguments must be nonnegative")
    tol = ctl.effective_tol
    temp = _psi2_inner(a, b2, b3, x2, x3, ctl)
    trace = [temp] if debug else None
    coef = 1.0
    s, l1 = float(a), float(b1)
    prev = abs(temp)
    for n in range(1, ctl.maxiter + 1):
        coef *= (s / l1) * x1 / n
        fac = coef * _psi2_inner(a + n, b2, b3, x2, x3, ctl) if coef != 0.0 else 0.0
        series = temp + fac
        if debug:
            trace.append(fac)
        if fac == 0.0 or (abs(fac) <= prev and abs(series - temp) <= tol * abs(series)):
            return SeriesResult(series, n + 1, True, tuple(trace) if debug else None)
        prev = abs(fac)
        temp = series
        s += 1.0
        l1 += 1.0
    raise NonConvergence("outer Psi_2^(3) series did not converge", level="psi2_3/outer")


# ---------------------------------------------------------------------------
# Vectorised log-space kernels
# ---------------------------------------------------------------------------

def _logsumexp0(a):
    """log sum exp over axis 0 of a 2-D array whose first row may be 0."""
    m = a.max(axis=0)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.log(np.exp(a - m).sum(axis=0)) + m


def _log_positive_series(log_ratio, n, j0, ctl, level):
    """log sum_j t_j with t_0 = 1 and log(t_{j+1}/t_j) = log_ratio(j).

    ``log_ratio`` maps a column vector of term indices (J, 1) to an array
    broadcastable to (J, n).  The block of terms grows until every column
    has a last term that is both decreasing and below ``tol`` relative to
    the running sum.
    """
    tol = math.log(ctl.effective_tol)
    J = max(8, min(int(j0), ctl.maxiter))
    while True:
        lr = np.broadcast_to(log_ratio(np.arange(J, dtype=float)[:, None]), (J, n))
        logt = np.empty((J + 1, n))
        logt[0] = 0.0
        np.cumsum(lr, axis=0, out=logt[1:])
        total = _logsumexp0(logt)
        # last term small relative to the sum and still shrinking
        last = logt[-1]
        ok = ((last - total <= tol) & (lr[-1] < 0)) | np.isneginf(last)
        if ok.all():
            return total
        if J >= ctl.maxiter:
            bad = int(np.flatnonzero(~ok)[0])
            raise NonConvergence(
                f"{level} series did not converge within {ctl.maxiter} terms",
                level=level,
                index=bad,
            )
        J = min(2 * J, ctl.maxiter)


def _chunked(fn, n, *arrays):
    if n <= _CHUNK:
        return fn(*arrays)
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        sl = slice(start, start + _CHUNK)
        try:
            out[sl] = fn(*(arr[sl] for arr in arrays))
        except NonConvergence as exc:
            if exc.index is not None:
                exc.index += start
            raise
    return out


def log_hyp0f1(b, x, ctl=None):
    """log 0F1(;b;x) for b > 0 and x >= 0, broadcasting over arrays."""
    ctl = _ctl(ctl)
    b, x = np.broadcast_arrays(np.asarray(b, dtype=float), np.asarray(x, dtype=float))
    shape = b.shape
    b = b.ravel()
    x = x.ravel()
    if np.any(b <= 0):
        raise DomainError("0F1 lower parameter must be positive")
    if np.any(x < 0):
        raise DomainError("log_hyp0f1 requires x >= 0")

    def run(b, x):
        with np.errstate(divide="ignore"):
            lx = np.log(x)
        # log(b + j) + log(j + 1) only for the distinct b values
        ub, inv = np.unique(b, return_inverse=True)

        def log_ratio(j):
            c = np.log(ub[None, :] + j) + np.log1p(j)
            return lx - (c if ub.size == 1 else c[:, inv])

        j0 = 3.0 * np.sqrt(x.max(initial=0.0)) + 12
        return _log_positive_series(log_ratio, b.size, j0, ctl, "0F1")

    out = _chunked(run, b.size, b, x).reshape(shape)
    return out if out.ndim else float(out)


# below this argument every 0F1 term fits comfortably in double range
_DIRECT_MAX = 1.0e4


@functools.lru_cache(maxsize=64)
def _index_column(J):
    j = np.arange(J, dtype=float)[:, None]
    j.flags.writeable = False
    return j


def _hyp0f1_columns_direct(b, x, xmax, ctl):
    """Plain-space partial sums for moderate arguments; None if the budget runs out."""
    tol = ctl.effective_tol
    bmin = float(b.min())
    J = max(8, min(int(3.0 * math.sqrt(xmax) + 12), ctl.maxiter))
    while True:
        j = _index_column(J)
        rc = 1.0 / ((b + j) * (j + 1.0))
        terms = np.cumprod(x * rc[:, None, :], axis=0)
        last = terms[-1]
        total = terms.sum(axis=0)
        total += 1.0
        # consecutive terms have ratio x / ((b + j)(j + 1)), so the tail
        # is decreasing once that is below one for the largest x
        decreasing = xmax <= (bmin + J - 1.0) * J
        if decreasing and (last.max() <= tol or (last <= tol * total).all()):
            return np.log(total)
        if J >= ctl.maxiter:
            return None
        J = min(2 * J, ctl.maxiter)


def log_hyp0f1_scalar(b, x, ctl=None):
    """log 0F1(;b;x) for scalar b > 0, x >= 0 by a plain loop with rescaling."""
    ctl = _ctl(ctl)
    if b <= 0 or x < 0:
        raise DomainError("need b > 0 and x >= 0")
    tol = ctl.effective_tol
    total, term, shift = 1.0, 1.0, 0.0
    for i in range(ctl.maxiter):
        new_term = term * x / ((b + i) * (i + 1.0))
        total += new_term
        if new_term <= tol * total and new_term <= term:
            return math.log(total) + shift
        term = new_term
        if total > 1e250:
            total /= 1e250
            term /= 1e250
            shift += 250.0 * math.log(10.0)
    raise NonConvergence(f"0F1({b}; {x}) did not converge", level="0F1")


def log_hyp0f1_columns(b, x, ctl=None):
    """log 0F1(;b_k; x[i, k]) for a vector ``b`` of m positive shapes and an
    (n, m) array ``x >= 0`` (one shape per column).

    Lean variant of :func:`log_hyp0f1` for the density hot path.
    """
    ctl = _ctl(ctl)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    n, m = x.shape
    xmax = x.max(initial=0.0)
    if xmax <= _DIRECT_MAX:
        out = _hyp0f1_columns_direct(b, x, xmax, ctl)
        if out is not None:
            return out
    tol = math.log(ctl.effective_tol)
    with np.errstate(divide="ignore"):
        lx = np.log(x)
    J = max(8, min(int(3.0 * math.sqrt(x.max(initial=0.0)) + 12), ctl.maxiter))
    while True:
        j = np.arange(J, dtype=float)[:, None]
        c = np.log(b[None, :] + j) + np.log1p(j)
        logt = np.empty((J + 1, n, m))
        logt[0] = 0.0
        np.cumsum(lx[None, :, :] - c[:, None, :], axis=0, out=logt[1:])
        mx = logt.max(axis=0)
        total = np.log(np.exp(logt - mx).sum(axis=0)) + mx
        last = logt[-1]
        ok = ((last - total <= tol) & (last <= logt[-2])) | np.isneginf(last)
        if ok.all():
            return total
        if J >= ctl.maxiter:
            bad = np.argwhere(~ok)[0]
            raise NonConvergence(
                f"0F1 series did not converge within {ctl.maxiter} terms", level="0F1", index=int(bad[0])
            )
        J = min(2 * J, ctl.maxiter)


def log_hyp1f1(a, b, x, ctl=None):
    """log 1F1(a;b;x) for a, b > 0, broadcasting over arrays.

    Negative arguments are mapped through Kummer's transformation
    1F1(a;b;x) = e^x 1F1(b-a;b;-x) when b - a >= 0 (all terms then
    positive) and otherwise only below x = -30; the remaining cases fall
    back to the scalar series and require a positive result.
    """
    ctl = _ctl(ctl)
    a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, x)))
    shape = a.shape
    a, b, x = a.ravel(), b.ravel(), x.ravel()
    if np.any(b <= 0) or np.any(a <= 0):
        raise DomainError("log_hyp1f1 requires a > 0 and b > 0")
    out = np.empty(a.size)
    shift = np.zeros(a.size)
    aa = a.copy()
    xx = x.copy()
    neg = x < 0
    kummer = neg & ((b - a >= 0) | (x < -30))
    shift[kummer] = x[kummer]
    aa[kummer] = b[kummer] - a[kummer]
    xx[kummer] = -x[kummer]
    direct = ~neg | kummer
    # kummer with b - a == 0 gives 1F1(0; b; .) = 1
    zero_a = direct & (aa == 0)
    out[zero_a] = 0.0
    pos = direct & (aa > 0)
    if np.any(pos):
        ap, bp, xp = aa[pos], b[pos], xx[pos]

        def run(ap, bp, xp):
            with np.errstate(divide="ignore"):
                lx = np.log(xp)

            def log_ratio(j):
                return np.log(ap + j) - np.log(bp + j) + lx - np.log1p(j)

            j0 = 2.0 * xp.max(initial=0.0) + 10 * np.sqrt(xp.max(initial=0.0)) + 30
            return _log_positive_series(log_ratio, ap.size, j0, ctl, "1F1")

        out[pos] = _chunked(run, ap.size, ap, bp, xp)
    rest = direct & (aa < 0)
    rest |= ~direct
    for i in np.flatnonzero(rest):
        # polynomial or mildly alternating series: scalar path
        val = hyp1f1(aa[i], b[i], xx[i], ctl)
        if val <= 0:
            raise DomainError("1F1 is not positive; log undefined")
        out[i] = math.log(val)
    out = (out + shift).reshape(shape)
    return out if out.ndim else float(out)


def log_psi2_3(a, b1, b2, b3, x1, x2, x3, ctl=None):
    """log Psi_2^(3)(a; b1, b2, b3; x1, x2, x3), vectorised over x arrays.

    Same nested decomposition as :func:`psi2_3`: an outer sum over j1, an
    inner sum over j2 and Kummer functions 1F1(a + j1 + j2; b3; x3) at the
    innermost level.  The coefficients (a)_{j1+j2}/((b1)_{j1} (b2)_{j2}
    j1! j2!) come from prefix sums of logs, so a whole (j1, j2) block is
    formed at once; each level keeps its own stopping check and the block
    is enlarged until all three pass.  Shapes ``a, b1, b2, b3`` are
    scalars; ``x1, x2, x3`` broadcast together.
    """
    ctl = _ctl(ctl)
    if a <= 0 or min(b1, b2, b3) <= 0:
        raise DomainError("Psi_2 parameters must be positive")
    x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x3)))
    shape = x1.shape
    x1, x2, x3 = x1.ravel(), x2.ravel(), x3.ravel()
    if min(x1.min(initial=0), x2.min(initial=0), x3.min(initial=0)) < 0:
        raise DomainError("Psi_2 arguments must be nonnegative")
    args = (float(a), float(b1), float(b2), float(b3))
    # largest arguments first, so each block's truncation fits its own points
    order = np.argsort(-(np.maximum(x1, x2) + x3 / 2), kind="stable")
    x1, x2, x3 = x1[order], x2[order], x3[order]
    vals = np.empty(x1.size)
    start = 0
    while start < x1.size:
        big = float(max(x1[start], x2[start]) + x3[start] / 2)
        K = _start_terms(big)
        chunk = max(1, int(3e6 // (K * K)))
        sl = slice(start, start + chunk)
        try:
            vals[sl] = _log_psi2_3_block(*args, x1[sl], x2[sl], x3[sl], ctl)
        except NonConvergence as exc:
            if exc.index is not None:
                exc.index = int(order[exc.index + start])
            raise
        start += chunk
    out = np.empty_like(vals)
    out[order] = vals
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def _start_terms(y):
    return int(2 * y + 4 * math.sqrt(y) + 12)


def _first_bad(ok):
    return int(np.flatnonzero(~ok)[0])


def _log_poch_prefix(c, K):
    """Array P with P[t] = log (c)_t for t = 0..K."""
    out = np.zeros(K + 1)
    np.cumsum(np.log(c + np.arange(K, dtype=float)), out=out[1:])
    return out


def _log_powers(lx, K):
    """(K, n) array of j * log x with the j = 0 row exactly 0."""
    j = np.arange(K, dtype=float)[:, None]
    with np.errstate(invalid="ignore"):
        out = j * lx[None, :]
    out[0] = 0.0
    return out


def _log_1f1_series_rows(a, b3, x3, K, ctl):
    """Rows k = 0..K-1 of log 1F1(a + k; b3; x3) summed as series."""
    tol = math.log(ctl.effective_tol)
    with np.errstate(divide="ignore"):
        lx = np.log(x3)
    xm = float(x3.max(initial=0.0))
    J = max(8, min(_start_terms(xm + math.sqrt(K * xm)), ctl.maxiter))
    k = np.arange(K)
    while True:
        Pa = _log_poch_prefix(a, K + J)
        Pb = _log_poch_prefix(b3, J)
        lf = gammaln(np.arange(J) + 1.0)
        idx = k[:, None] + np.arange(J)[None, :]
        coef = Pa[idx] - Pa[k][:, None] - Pb[None, :J] - lf[None, :]
        logt = coef[:, :, None] + _log_powers(lx, J)[None, :, :]
        m = logt.max(axis=1)
        total = np.log(np.exp(logt - m[:, None, :]).sum(axis=1)) + m
        last, prev = logt[:, -1, :], logt[:, -2, :]
        ok = ((last - total <= tol) & (last <= prev)) | np.isneginf(last)
        if ok.all():
            return total
        if J >= ctl.maxiter:
            raise NonConvergence(
                "1F1 level of Psi_2 did not converge",
                level="psi2_3/1F1",
                index=int(np.flatnonzero(~ok.all(axis=0))[0]),
            )
        J = min(2 * J, ctl.maxiter)


def _log_1f1_table(a, b3, x3, K, ctl):
    """Rows k = 0..K-1 of log 1F1(a + k; b3; x3) for every column of x3.

    The first two rows are summed as series; the rest follow from the
    contiguous relation
        (a+k) M(a+k+1) = (2(a+k) - b3 + x) M(a+k) + (b3 - a - k) M(a+k-1),
    run forward on ratios.  For x >= 0, M is the dominant solution as the
    upper parameter grows, so the forward direction is stable.
    """
    head = _log_1f1_series_rows(a, b3, x3, min(K, 2), ctl)
    if K <= 2:
        return head
    out = np.empty((K, x3.size))
    out[:2] = head
    r = np.exp(head[1] - head[0])
    for k in range(1, K - 1):
        ak = a + k
        r = ((2.0 * ak - b3 + x3) + (b3 - ak) / r) / ak
        out[k + 1] = out[k] + np.log(r)
    return out


def _log_psi2_3_block(a, b1, b2, b3, x1, x2, x3, ctl):
    tol = math.log(ctl.effective_tol)
    with np.errstate(divide="ignore"):
        lx1, lx2 = np.log(x1), np.log(x2)
    K1 = _start_terms(float(x1.max(initial=0.0)) + float(x3.max(initial=0.0)) / 2)
    K2 = _start_terms(float(x2.max(initial=0.0)) + float(x3.max(initial=0.0)) / 2)
    table = None
    while True:
        if table is None or table.shape[0] < K1 + K2:
            table = _log_1f1_table(a, b3, x3, K1 + K2, ctl)
        Pa = _log_poch_prefix(a, K1 + K2)
        c1 = -_log_poch_prefix(b1, K1)[:K1] - gammaln(np.arange(K1) + 1.0)
        c2 = -_log_poch_prefix(b2, K2)[:K2] - gammaln(np.arange(K2) + 1.0)
        s = np.arange(K1)[:, None] + np.arange(K2)[None, :]
        coef = Pa[s] + c1[:, None] + c2[None, :]
        # terms[j1, j2, i]
        terms = (
            coef[:, :, None]
            + _log_powers(lx1, K1)[:, None, :]
            + _log_powers(lx2, K2)[None, :, :]
            + table[s]
        )
        # each j1 row is scaled by its own maximum so that rows far below
        # the peak keep a finite log sum
        rm = terms.max(axis=1)
        rm = np.where(np.isfinite(rm), rm, 0.0)
        with np.errstate(divide="ignore"):
            row_log = np.log(np.exp(terms - rm[:, None, :]).sum(axis=1)) + rm
        m = row_log.max(axis=0)
        m = np.where(np.isfinite(m), m, 0.0)
        total = np.log(np.exp(row_log - m).sum(axis=0)) + m
        # inner level: last j2 term small within its own row and decreasing
        last, prev = terms[:, -1, :], terms[:, -2, :]
        with np.errstate(invalid="ignore"):
            inner_ok = (((last - row_log <= tol) & (last <= prev)) | np.isneginf(last)).all(axis=0)
        # outer level: last j1 row small relative to the total and decreasing
        lrow, prow = row_log[-1], row_log[-2]
        outer_ok = ((lrow - total <= tol) & (lrow <= prow)) | np.isneginf(lrow)
        if inner_ok.all() and outer_ok.all():
            return total
        if not inner_ok.all():
            if K2 >= ctl.maxiter:
                raise NonConvergence(
                    "inner Psi_2 series did not converge", level="psi2_3/inner", index=_first_bad(inner_ok)
                )
            K2 = min(2 * K2, ctl.maxiter)
        if not outer_ok.all():
            if K1 >= ctl.maxiter:
                raise NonConvergence(
                    "outer Psi_2^(3) series did not converge", level="psi2_3/outer", index=_first_bad(outer_ok)
                )
            K1 = min(2 * K1, ctl.maxiter)


# ---------------------------------------------------------------------------
# Incomplete gamma
# ---------------------------------------------------------------------------

def _gamma_p_series(s, x):
    term = 1.0 / s
    total = term
    ap = s
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _gamma_q_contfrac(s, x):
    # modified Lentz evaluation of the continued fraction for Q(s, x)
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


def regularized_gamma_upper(s, x):
    """Q(s, x) = Gamma(s, x) / Gamma(s).

    Power series for x < s + 1, continued fraction otherwise.
    """
    if s <= 0:
        raise DomainError("s must be positive")
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < s + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_p_series(s, x)))
    return min(1.0, max(0.0, _gamma_q_contfrac(s, x)))


def chi2_sf(w, df):
    """Chi-squared survival function P(W > w) via Q(df/2, w/2)."""
    return regularized_gamma_upper(df / 2.0, max(w, 0.0) / 2.0)
