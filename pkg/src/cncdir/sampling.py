"""Exact samplers for chi-squared, non-central chi-squared, Dirichlet,
non-central Dirichlet and conditional non-central Dirichlet laws.

All samplers draw from a :class:`numpy.random.Generator`; ``make_rng``
builds one from an integer seed and ``spawn_rngs`` derives independent
streams for parallel work.  Every sampler takes ``size`` (``None`` for a
single draw) and returns numpy arrays; simplex draws return the first D
coordinates, like the density functions expect.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .mixture_weight import mw_sample
from .models import CNcDirParams, DirParams, NcChisqParams, NcDirParams

__all__ = [
    "make_rng",
    "spawn_rngs",
    "sample_chisq",
    "sample_poisson",
    "sample_ncchisq",
    "sample_dirichlet",
    "sample_ncdir",
    "sample_cncdir_mixture",
    "sample_cncdir_composition",
    "sample_cncdir",
]


def make_rng(seed=None):
    """PCG64-backed Generator; identical seeds give identical streams."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rngs(seed, k):
    """``k`` independent generators derived from one master seed."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(k)]


def _shape(size):
    return () if size is None else (int(size),)


def sample_chisq(g, rng, size=None):
    """Chi-squared draws with ``g`` degrees of freedom (Gamma(g/2, scale 2))."""
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0):
        raise DomainError("degrees of freedom must be positive")
    return 2.0 * rng.standard_gamma(g / 2.0, size=size)


def sample_poisson(mean, rng, size=None):
    mean = np.asarray(mean, dtype=float)
    if np.any(mean < 0):
        raise DomainError("Poisson mean must be nonnegative")
    return rng.poisson(mean, size=size)


def _sum_of_chisq2(counts, rng):
    """For each count m, the sum of m independent chi-squared(2) draws."""
    counts = np.asarray(counts, dtype=np.int64)
    flat = counts.ravel()
    total = int(flat.sum())
    out = np.zeros(flat.size)
    if total:
        draws = 2.0 * rng.standard_exponential(total)
        owner = np.repeat(np.arange(flat.size), flat)
        out = np.bincount(owner, weights=draws, minlength=flat.size)
    return out.reshape(counts.shape)


def sample_ncchisq(p, rng, size=None):
    """Non-central chi-squared: chi2_g plus M chi2_2 terms, M ~ Poisson(lam/2)."""
    if not isinstance(p, NcChisqParams):
        p = NcChisqParams(*p)
    shape = _shape(size)
    m = rng.poisson(p.lam / 2.0, size=shape)
    base = sample_chisq(p.g, rng, size=shape) if p.g > 0 else np.zeros(shape)
    out = base + _sum_of_chisq2(m, rng)
    return out if shape else float(out)


def _normalize(Y):
    X = Y / Y.sum(axis=-1, keepdims=True)
    return X[..., :-1]


def sample_dirichlet(p, rng, size=None):
    """Normalized independent chi-squared(2 alpha_i) variables."""
    shape = _shape(size)
    Y = sample_chisq(2.0 * p.alpha, rng, size=shape + (p.D + 1,))
    return _normalize(Y)


def sample_ncdir(p, rng, size=None):
    """Normalized independent non-central chi-squared(2 alpha_i, lam_i) variables."""
    shape = _shape(size)
    full = shape + (p.D + 1,)
    Y = sample_chisq(2.0 * p.alpha, rng, size=full)
    M = rng.poisson(p.lam / 2.0, size=full)
    Y = Y + _sum_of_chisq2(M, rng)
    return _normalize(Y)


def sample_cncdir_mixture(p, rng, size=None, ctl=None, return_counts=False):
    """Draw N from the Mixture Weight law, then Dirichlet(alpha + N)."""
    shape = _shape(size)
    N = mw_sample(p.mw(), rng, size=size, ctl=ctl)
    Y = sample_chisq(2.0 * (p.alpha + N), rng, size=shape + (p.D + 1,))
    X = _normalize(Y)
    return (X, N) if return_counts else X


def sample_cncdir_composition(p, rng, size=None, ctl=None, return_parts=False):
    """Composition form: Z'_i = chi2_{2 alpha_i} + sum of N_i chi2_2 terms, normalized.

    With ``return_parts`` also returns the counts N and the totals Z'+.
    """
    shape = _shape(size)
    N = mw_sample(p.mw(), rng, size=size, ctl=ctl)
    Z = sample_chisq(2.0 * p.alpha, rng, size=shape + (p.D + 1,))
    Z = Z + _sum_of_chisq2(N, rng)
    X = _normalize(Z)
    if return_parts:
        return X, N, Z.sum(axis=-1)
    return X


def sample_cncdir(p, rng, size=None, representation="mixture", ctl=None):
    if representation == "mixture":
        return sample_cncdir_mixture(p, rng, size, ctl)
    if representation == "composition":
        return sample_cncdir_composition(p, rng, size, ctl)
    raise DomainError(f"unknown representation {representation!r}")
