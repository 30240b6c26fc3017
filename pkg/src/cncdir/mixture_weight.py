"""The Mixture Weight (MW) discrete law on count vectors.

MW^{D+1}(alpha_plus, lambda) has pmf

    P(N = j) = (lambda_1/4)^{j_1}/j_1! ... (lambda_{D+1}/4)^{j_{D+1}}/j_{D+1}!
               / ((alpha_plus)_{j+} 0F1(;alpha_plus; lambda_plus/4))

and is the mixing distribution behind the conditional non-central
Dirichlet.  Components with lambda_i = 0 are pinned to zero counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, IterationCap, MassZero
from .specfun import log_hyp0f1, _ctl

__all__ = [
    "MwParams",
    "MultinomialParams",
    "mw_logpmf",
    "mw_marginal_logpmf",
    "mw_conditional_params",
    "mw_sum_logpmf",
    "mw_sum_log_masses",
    "mw_conditional_multinomial",
    "multinomial_logpmf",
    "mw_sample",
]


@dataclass(frozen=True)
class MwParams:
    alpha_plus: float
    lam: tuple

    def __init__(self, alpha_plus, lam):
        lam = tuple(float(v) for v in np.atleast_1d(lam))
        if not alpha_plus > 0:
            raise DomainError("alpha_plus must be positive")
        if len(lam) < 1 or min(lam) < 0 or not all(math.isfinite(v) for v in lam):
            raise DomainError("lambda entries must be finite and nonnegative")
        object.__setattr__(self, "alpha_plus", float(alpha_plus))
        object.__setattr__(self, "lam", lam)

    @property
    def lam_array(self):
        return np.asarray(self.lam)

    @property
    def lam_plus(self):
        return float(sum(self.lam))

    @property
    def size(self):
        return len(self.lam)


@dataclass(frozen=True)
class MultinomialParams:
    """Multinomial(n, probs) over D cells plus an implicit remainder cell."""

    n: int
    probs: tuple
    remainder: float


def _log_norm(p, ctl):
    return log_hyp0f1(p.alpha_plus, p.lam_plus / 4.0, ctl)


def _counts(j, size):
    j = np.asarray(j)
    if j.shape[-1:] != (size,):
        raise DomainError(f"count vectors must have {size} entries")
    if np.any(j < 0) or np.any(j != np.floor(j)):
        raise DomainError("counts must be nonnegative integers")
    return j.astype(float)


def _log_weights(lam, j):
    # sum_i j_i log(lam_i/4) - log j_i!, with lam_i = 0 forcing j_i = 0
    zero = lam == 0
    loglam = np.log(np.where(zero, 1.0, lam)) - math.log(4.0)
    out = np.where(j > 0, j * loglam, 0.0) - gammaln(j + 1)
    bad = np.any(zero & (j > 0), axis=-1)
    return out.sum(axis=-1), bad


def mw_logpmf(p, j, ctl=None, strict=True):
    """Joint log-pmf at count vector(s) ``j`` (shape (..., D+1)).

    A count j_i > 0 on a component with lambda_i = 0 has zero mass: it
    raises :class:`MassZero` when ``strict`` and gives ``-inf`` otherwise.
    """
    ctl = _ctl(ctl)
    j = _counts(j, p.size)
    lw, bad = _log_weights(p.lam_array, j)
    jp = j.sum(axis=-1)
    out = lw - (gammaln(p.alpha_plus + jp) - gammaln(p.alpha_plus)) - _log_norm(p, ctl)
    if np.any(bad):
        if strict:
            raise MassZero("positive count on a component with lambda = 0")
        out = np.where(bad, -np.inf, out)
    return out if np.ndim(out) else float(out)


def mw_marginal_logpmf(p, m, j, ctl=None, strict=True):
    """Log-pmf of the first ``m`` components at counts ``j`` (shape (..., m))."""
    ctl = _ctl(ctl)
    if not 1 <= m <= p.size:
        raise DomainError(f"m must lie in 1..{p.size}")
    j = _counts(j, m)
    lam = p.lam_array
    lw, bad = _log_weights(lam[:m], j)
    jp = j.sum(axis=-1)
    rest = max(float(lam[m:].sum()), 0.0)
    out = (
        lw
        - (gammaln(p.alpha_plus + jp) - gammaln(p.alpha_plus))
        + log_hyp0f1(p.alpha_plus + jp, np.full_like(jp, rest / 4.0), ctl)
        - _log_norm(p, ctl)
    )
    if np.any(bad):
        if strict:
            raise MassZero("positive count on a component with lambda = 0")
        out = np.where(bad, -np.inf, out)
    return out if np.ndim(out) else float(out)


def mw_conditional_params(p, given):
    """Law of the first components given the last ``len(given)`` counts.

    Returns MwParams(alpha_plus + sum(given), lambda_1..lambda_m).
    """
    given = np.atleast_1d(np.asarray(given))
    k = given.size
    if not 1 <= k < p.size:
        raise DomainError("must condition on between 1 and D components")
    _counts(given, k)
    lam = p.lam_array
    if np.any((lam[p.size - k :] == 0) & (given > 0)):
        raise MassZero("conditioning event has probability zero")
    return MwParams(p.alpha_plus + float(given.sum()), lam[: p.size - k])


def mw_sum_logpmf(p, s, ctl=None):
    """Log-pmf of N+ = sum of components, itself MW^1(alpha_plus, lambda_plus)."""
    ctl = _ctl(ctl)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s != np.floor(s)):
        raise DomainError("s must be a nonnegative integer")
    lp = p.lam_plus
    if lp == 0:
        out = np.where(s == 0, 0.0, -np.inf)
    else:
        out = (
            s * math.log(lp / 4.0)
            - gammaln(s + 1)
            - (gammaln(p.alpha_plus + s) - gammaln(p.alpha_plus))
            - _log_norm(p, ctl)
        )
    return out if np.ndim(out) else float(out)


def mw_conditional_multinomial(p, n_plus):
    """Multinomial law of the first D counts given N+ = n_plus."""
    if n_plus < 0 or int(n_plus) != n_plus:
        raise DomainError("n_plus must be a nonnegative integer")
    lp = p.lam_plus
    D = p.size - 1
    if lp == 0:
        if n_plus > 0:
            raise DomainError("lambda_plus = 0 makes N+ > 0 impossible")
        return MultinomialParams(0, (0.0,) * D, 1.0)
    probs = tuple(v / lp for v in p.lam[:D])
    return MultinomialParams(int(n_plus), probs, p.lam[D] / lp)


def multinomial_logpmf(mp, j):
    """Log-pmf of a full count vector (D+1 entries) under MultinomialParams."""
    j = np.asarray(j, dtype=float)
    pr = np.append(np.asarray(mp.probs, dtype=float), mp.remainder)
    if np.any(j.sum(axis=-1) != mp.n):
        return -np.inf
    with np.errstate(divide="ignore"):
        lp = np.log(pr)
    terms = np.where(j > 0, j * lp, 0.0)
    out = gammaln(mp.n + 1) - gammaln(j + 1).sum(axis=-1) + terms.sum(axis=-1)
    return out if np.ndim(out) else float(out)


def mw_sum_log_masses(p, ctl=None, cap=10**6):
    """Log masses of N+ for s = 0, 1, ... until the remaining tail is negligible.

    Masses are accumulated with compensated (Kahan) summation; the walk
    stops once the terms decrease and fall below 1e-17 of the running
    total.  Raises :class:`IterationCap` after ``cap`` terms.
    """
    ctl = _ctl(ctl)
    lp = p.lam_plus
    if lp == 0:
        return np.zeros(1)
    lognorm = _log_norm(p, ctl)
    loglam = math.log(lp / 4.0)
    logs = []
    cur = -lognorm
    total = 0.0
    comp = 0.0
    s = 0
    while True:
        logs.append(cur)
        mass = math.exp(cur)
        y = mass - comp
        t = total + y
        comp = (t - total) - y
        total = t
        # next log mass via the multiplicative recursion
        nxt = cur + loglam - math.log(s + 1) - math.log(p.alpha_plus + s)
        if nxt < cur and math.exp(nxt) <= 1e-17 * total:
            break
        cur = nxt
        s += 1
        if s >= cap:
            raise IterationCap(f"N+ mass accumulation exceeded {cap} terms")
    return np.asarray(logs)


def mw_sample(p, rng, size=None, ctl=None, cap=10**6):
    """Draw count vectors from MW by inverse transform on N+ then binomial splitting.

    Returns an integer array of shape ``(D+1,)`` or ``(size, D+1)``.
    """
    shape = () if size is None else (int(size),)
    n = 1 if size is None else int(size)
    logm = mw_sum_log_masses(p, ctl, cap)
    masses = np.exp(logm - logm.max())
    cdf = np.cumsum(masses)
    cdf /= cdf[-1]
    u = rng.random(n)
    nplus = np.searchsorted(cdf, u, side="left").astype(np.int64)
    nplus = np.minimum(nplus, cdf.size - 1)
    lam = p.lam_array
    lp = p.lam_plus
    out = np.zeros((n, p.size), dtype=np.int64)
    if lp > 0:
        remaining = nplus.copy()
        left = lp
        for i in range(p.size - 1):
            q = min(1.0, lam[i] / left) if left > 0 else 0.0
            draw = rng.binomial(remaining, q) if q > 0 else np.zeros(n, dtype=np.int64)
            out[:, i] = draw
            remaining -= draw
            left -= lam[i]
        out[:, -1] = remaining
    return out.reshape(shape + (p.size,))
