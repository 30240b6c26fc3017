"""Tests for the random samplers."""

import math

import numpy as np
import pytest
from scipy import stats

from cncdir.errors import DomainError
from cncdir.models import CNcDirParams, DirParams, NcChisqParams, NcDirParams, cncdir_logpdf, ncdir_logpdf
from cncdir.sampling import (
    make_rng,
    sample_chisq,
    sample_cncdir,
    sample_cncdir_composition,
    sample_cncdir_mixture,
    sample_dirichlet,
    sample_ncchisq,
    sample_ncdir,
    sample_poisson,
    spawn_rngs,
)

KS_LEVEL = 1e-3


def strip_integral(f, t=1.0, n=100):
    """Gauss-Legendre integral of vectorized f over {x1 < t} of the simplex."""
    z, w = np.polynomial.legendre.leggauss(n)
    z, w = (z + 1) / 2, w / 2
    U, V = np.meshgrid(t * z, z, indexing="ij")
    W = np.outer(w, w) * t * (1 - U)
    pts = np.column_stack([U.ravel(), ((1 - U) * V).ravel()])
    return float((f(pts) * W.ravel()).sum())


class TestRng:
    def test_reproducible(self):
        assert make_rng(4).random() == make_rng(4).random()
        g = make_rng(1)
        assert make_rng(g) is g

    def test_spawned_streams_differ(self):
        a, b = spawn_rngs(9, 2)
        assert a.random() != b.random()
        assert spawn_rngs(9, 2)[1].random() == spawn_rngs(9, 2)[1].random()


class TestScalarSamplers:
    def test_chisq(self):
        x = sample_chisq(3.5, make_rng(0), 20_000)
        assert stats.kstest(x, stats.chi2(3.5).cdf).pvalue > KS_LEVEL

    def test_poisson_and_validation(self):
        assert sample_poisson(0.0, make_rng(0), 4).sum() == 0
        with pytest.raises(DomainError):
            sample_poisson(-1.0, make_rng(0))
        with pytest.raises(DomainError):
            sample_chisq(0.0, make_rng(0))

    @pytest.mark.parametrize("g,lam", [(2.0, 5.0), (0.7, 30.0)])
    def test_ncchisq(self, g, lam):
        x = sample_ncchisq(NcChisqParams(g, lam), make_rng(1), 20_000)
        assert stats.kstest(x, stats.ncx2(g, lam).cdf).pvalue > KS_LEVEL

    def test_ncchisq_zero_dof_has_atom(self):
        x = sample_ncchisq(NcChisqParams(0.0, 2.0), make_rng(3), 20_000)
        assert np.mean(x == 0) == pytest.approx(math.exp(-1.0), abs=0.015)


class TestSimplexSamplers:
    def test_dirichlet_marginals(self):
        p = DirParams([0.6, 1.7, 2.4])
        x = sample_dirichlet(p, make_rng(2), 20_000)
        assert x.shape == (20_000, 2)
        for i in range(2):
            beta = stats.beta(p.alpha[i], p.alpha_plus - p.alpha[i])
            assert stats.kstest(x[:, i], beta.cdf).pvalue > KS_LEVEL

    def test_ncdir_against_independent_route(self):
        p = NcDirParams([0.8, 1.2, 2.0], [4.0, 0.5, 9.0])
        x = sample_ncdir(p, make_rng(4), 20_000)
        rng = np.random.default_rng(5)
        y = np.column_stack([stats.ncx2.rvs(2 * a, l, size=20_000, random_state=rng) for a, l in zip(p.alpha, p.lam)])
        y = y / y.sum(axis=1, keepdims=True)
        for i in range(2):
            assert stats.ks_2samp(x[:, i], y[:, i]).pvalue > KS_LEVEL

    def test_ncdir_mean_matches_density(self):
        p = NcDirParams([1.0, 1.0, 1.0], [3.0, 1.0, 5.0])
        x = sample_ncdir(p, make_rng(6), 40_000)
        ref = strip_integral(lambda x: x[:, 0] * np.exp(ncdir_logpdf(p, x)))
        se = x[:, 0].std() / math.sqrt(x.shape[0])
        assert abs(x[:, 0].mean() - ref) < 4 * se

    def test_cncdir_representations_agree(self):
        p = CNcDirParams([1.0, 1.0, 1.0], [42.78, 48.76, 44.15])
        a = sample_cncdir(p, make_rng(7), 20_000, "mixture")
        b = sample_cncdir(p, make_rng(8), 20_000, "composition")
        for i in range(2):
            assert stats.ks_2samp(a[:, i], b[:, i]).pvalue > KS_LEVEL

    def test_cncdir_marginal_matches_density(self):
        p = CNcDirParams([1.4, 0.8, 1.1], [10.0, 3.0, 6.0])
        x = sample_cncdir_mixture(p, make_rng(9), 20_000)

        def cdf(t):
            return strip_integral(lambda x: np.exp(cncdir_logpdf(p, x)), t)

        qs = np.quantile(x[:, 0], [0.25, 0.5, 0.75])
        for q, level in zip(qs, (0.25, 0.5, 0.75)):
            assert cdf(q) == pytest.approx(level, abs=0.015)

    def test_composition_total_is_chi_squared(self):
        p = CNcDirParams([0.7, 1.3, 2.0], [5.0, 2.0, 8.0])
        _, N, Zp = sample_cncdir_composition(p, make_rng(10), 20_000, return_parts=True)
        u = stats.gamma.cdf(Zp / 2.0, p.alpha_plus + N.sum(axis=1))
        assert stats.kstest(u, "uniform").pvalue > KS_LEVEL

    def test_zero_lambda_gives_dirichlet(self):
        a = [0.9, 1.6, 2.2]
        x = sample_cncdir(CNcDirParams(a, [0, 0, 0]), make_rng(11), 20_000)
        y = sample_dirichlet(DirParams(a), make_rng(12), 20_000)
        for i in range(2):
            assert stats.ks_2samp(x[:, i], y[:, i]).pvalue > KS_LEVEL

    def test_shapes_and_seeds(self):
        p = CNcDirParams([1, 1, 1], [1, 2, 3])
        assert sample_cncdir(p, make_rng(0)).shape == (2,)
        np.testing.assert_array_equal(sample_cncdir(p, make_rng(3), 5), sample_cncdir(p, make_rng(3), 5))
        x, n = sample_cncdir_mixture(p, make_rng(0), 10, return_counts=True)
        assert x.shape == (10, 2) and n.shape == (10, 3)
        assert np.all(x > 0) and np.all(x.sum(axis=1) < 1)
        with pytest.raises(DomainError):
            sample_cncdir(p, make_rng(0), 3, "other")
