"""Mixed raw moments E[X1^r1 X2^r2] of the bivariate CNcDir law.

The production path is a doubly finite sum of 0F1 ratios.  Two series
oracles back it: the Mixture-Weight expectation of Dirichlet moments and a
form built from 1F2 functions.  ``cncdir_moment_11`` gives the (1, 1)
moment in a three-term form and a reduced two-term form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError
from .mixture_weight import mw_logpmf
from .models import CNcDirParams, cncdir_marginal
from .specfun import _ctl, genhypergeo, hyp0f1, log_hyp0f1

__all__ = [
    "MomentOrder",
    "cncdir_mixed_moment",
    "cncdir_moment_series_oracle",
    "cncdir_moment_hyp1f2_oracle",
    "cncdir_moment_11",
    "ljunggren_identity_check",
]


@dataclass(frozen=True)
class MomentOrder:
    r1: int
    r2: int

    def __post_init__(self):
        for r in (self.r1, self.r2):
            if int(r) != r or r < 0:
                raise DomainError("moment orders must be nonnegative integers")

    @property
    def r_plus(self):
        return self.r1 + self.r2


def _order(r):
    if isinstance(r, MomentOrder):
        return r
    return MomentOrder(*r)


def _lpoch(a, l):
    return gammaln(a + l) - gammaln(a)


def _bivariate_params(p):
    if p.D == 2:
        return p
    if p.D < 2:
        raise DomainError("mixed moments need at least two components")
    return cncdir_marginal(p, [0, 1])


def _lbinom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def cncdir_mixed_moment(p, r, ctl=None):
    """Closed-form E[X1^r1 X2^r2] for CNcDir parameters (bivariate marginal if D > 2).

    Sum over j1 <= r1, j2 <= r2 of binomial-weighted (lam/4) powers over
    Pochhammer symbols times 0F1(a+ + r+ + j+; lam+/4) / 0F1(a+; lam+/4),
    accumulated in log space.
    """
    ctl = _ctl(ctl)
    r = _order(r)
    q = _bivariate_params(p)
    a1, a2 = q.alpha[:2]
    l1, l2 = q.lam[:2]
    ap = q.alpha_plus
    lp = q.lam_plus
    rp = r.r_plus
    pre = _lpoch(a1, r.r1) + _lpoch(a2, r.r2) - _lpoch(ap, rp)
    j1, j2 = np.meshgrid(np.arange(r.r1 + 1.0), np.arange(r.r2 + 1.0), indexing="ij")
    j1, j2 = j1.ravel(), j2.ravel()
    keep = ((l1 > 0) | (j1 == 0)) & ((l2 > 0) | (j2 == 0))
    j1, j2 = j1[keep], j2[keep]
    with np.errstate(divide="ignore"):
        ll1 = math.log(l1 / 4.0) if l1 > 0 else 0.0
        ll2 = math.log(l2 / 4.0) if l2 > 0 else 0.0
    jp = j1 + j2
    logt = (
        _lbinom(r.r1, j1) + _lbinom(r.r2, j2)
        + j1 * ll1 + j2 * ll2
        - _lpoch(a1, j1) - _lpoch(a2, j2) - _lpoch(ap + rp, jp)
        + log_hyp0f1(ap + rp + jp, np.full_like(jp, lp / 4.0), ctl)
    )
    return float(np.exp(pre + logsumexp(logt) - log_hyp0f1(ap, lp / 4.0, ctl)))


def cncdir_moment_series_oracle(p, r, truncation=150, ctl=None):
    """Mixture-Weight expectation of Dirichlet(alpha + N) moments, j+ <= truncation.

    Returns ``(value, tail)`` where ``tail`` is the MW probability mass
    beyond the truncation (the neglected terms are bounded by it since
    each Dirichlet moment is below 1).
    """
    if truncation < 1:
        raise DomainError("truncation must be >= 1")
    r = _order(r)
    q = _bivariate_params(p)
    ctl = _ctl(ctl)
    mw = q.mw()
    a = q.alpha
    total = 0.0
    mass = 0.0
    for s in range(truncation + 1):
        j1, j2 = np.meshgrid(np.arange(s + 1.0), np.arange(s + 1.0), indexing="ij")
        ok = (j1 + j2) <= s
        j1, j2 = j1[ok], j2[ok]
        J = np.stack([j1, j2, s - j1 - j2], axis=1)
        logw = mw_logpmf(mw, J, ctl, strict=False)
        live = np.isfinite(logw)
        if not np.any(live):
            continue
        J, logw = J[live], logw[live]
        b1, b2 = a[0] + J[:, 0], a[1] + J[:, 1]
        bp = q.alpha_plus + s
        logm = _lpoch(b1, r.r1) + _lpoch(b2, r.r2) - _lpoch(bp, r.r_plus)
        total += math.fsum(np.exp(logw + logm))
        mass += math.fsum(np.exp(logw))
    tail = max(0.0, 1.0 - mass)
    return total, tail


def cncdir_moment_hyp1f2_oracle(p, r, truncation=150, ctl=None):
    """Second oracle: a double series over (j2, j3) of 1F2 functions.

    E = (a1)_{r1}(a2)_{r2}/(a+)_{r+} sum_{j2, j3} (a2 + r2)_{j2} / ((a2)_{j2} (a+ + r+)_{j2+j3})
        (lam2/4)^{j2}/j2! (lam3/4)^{j3}/j3! 1F2(a1 + r1; a1, a+ + r+ + j2 + j3; lam1/4)
        / 0F1(a+; lam+/4)
    """
    r = _order(r)
    q = _bivariate_params(p)
    ctl = _ctl(ctl)
    a1, a2, a3 = q.alpha
    l1, l2, l3 = q.lam
    ap = q.alpha_plus
    rp = r.r_plus
    pre = _lpoch(a1, r.r1) + _lpoch(a2, r.r2) - _lpoch(ap, rp)
    tol = ctl.effective_tol
    total = 0.0
    prev_row = math.inf
    for j2 in range(truncation + 1):
        if l2 == 0 and j2 > 0:
            break
        row = 0.0
        prev = math.inf
        for j3 in range(truncation + 1):
            if l3 == 0 and j3 > 0:
                break
            lt = (
                _lpoch(a2 + r.r2, j2) - _lpoch(a2, j2) - _lpoch(ap + rp, j2 + j3)
                + (j2 * math.log(l2 / 4.0) if j2 else 0.0) - math.lgamma(j2 + 1)
                + (j3 * math.log(l3 / 4.0) if j3 else 0.0) - math.lgamma(j3 + 1)
            )
            f = genhypergeo([a1 + r.r1], [a1, ap + rp + j2 + j3], l1 / 4.0, ctl).value
            t = math.exp(lt) * f
            row += t
            if t <= tol * row and t <= prev:
                break
            prev = t
        total += row
        if row <= tol * total and row <= prev_row:
            break
        prev_row = row
    return float(math.exp(pre) * total / hyp0f1(ap, q.lam_plus / 4.0, ctl))


def cncdir_moment_11(p, ctl=None):
    """E[X1 X2] in the three-term form (A) and the reduced two-term form (B)."""
    ctl = _ctl(ctl)
    q = _bivariate_params(p)
    a1, a2 = q.alpha[:2]
    l1, l2 = q.lam[:2]
    ap = q.alpha_plus
    lp = q.lam_plus
    x = lp / 4.0
    base = hyp0f1(ap, x, ctl)
    R = {k: hyp0f1(ap + k, x, ctl) / base for k in (2, 3, 4)}
    poch2 = ap * (ap + 1.0)
    poch3 = poch2 * (ap + 2.0)
    poch4 = poch3 * (ap + 3.0)
    A = (
        a1 * a2 / poch2 * R[2]
        + (a1 * l2 / 4.0 + a2 * l1 / 4.0) / poch3 * R[3]
        + (l1 / 4.0) * (l2 / 4.0) / poch4 * R[4]
    )
    if lp > 0:
        c = l1 * l2 / (4.0 * lp)
        B = (a1 * a2 + c) / poch2 * R[2] + (
            a1 * l2 / 4.0 + a2 * l1 / 4.0 - c * (ap + 2.0)
        ) / poch3 * R[3]
    else:
        B = a1 * a2 / poch2
    return float(A), float(B)


def ljunggren_identity_check(alpha, n, x, y):
    """Both sides of
    sum_k C(alpha+k, k) C(n, k) (x-y)^{n-k} y^k = sum_k C(alpha, k) C(n, k) x^{n-k} y^k.
    """
    if int(alpha) != alpha or alpha < 0 or int(n) != n or n < 0:
        raise DomainError("alpha and n must be nonnegative integers")
    alpha, n = int(alpha), int(n)
    lhs = math.fsum(
        math.comb(alpha + k, k) * math.comb(n, k) * (x - y) ** (n - k) * y**k for k in range(n + 1)
    )
    rhs = math.fsum(
        math.comb(alpha, k) * math.comb(n, k) * x ** (n - k) * y**k for k in range(n + 1)
    )
    return lhs, rhs
