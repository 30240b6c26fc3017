"""Tests for likelihoods, ML fitting, LR tests, model selection and ingestion."""

import math

import numpy as np
import pytest
from scipy import optimize, stats
from scipy.special import digamma

from cncdir.errors import DomainError, EmptyAfterFilter, NoConvergence, ParseError
from cncdir.inference import (
    HYPOTHESES,
    Dataset2D,
    FitOptions,
    LrReport,
    ModelSpec,
    fit_ml,
    ingest_square_csv,
    loglik,
    lr_battery,
    lr_test,
    param_names,
    parse_constraints,
    select_model,
)
from cncdir.models import (
    CNcDirParams,
    DirParams,
    Kb2Params,
    NcDirParams,
    cncdir_logpdf,
    dir_logpdf,
    kb2_logpdf,
    ncdir_logpdf,
)
from cncdir.sampling import make_rng, sample_cncdir_mixture, sample_dirichlet

FAST = FitOptions(n_starts=2, compute_se=False)


@pytest.fixture(scope="module")
def dir_data():
    return Dataset2D(sample_dirichlet(DirParams([1.27, 1.36, 1.28]), make_rng(31), 400))


@pytest.fixture(scope="module")
def cncdir_data():
    p = CNcDirParams([1, 1, 1], [42.7802, 48.7569, 44.1538])
    return Dataset2D(sample_cncdir_mixture(p, make_rng(32), 346))


class TestModelSpec:
    def test_parse_constraints(self):
        assert parse_constraints("a1,a2,a3") == {1, 2, 3}
        assert parse_constraints("alpha1 alpha3") == {1, 3}
        assert parse_constraints(None) == frozenset()
        with pytest.raises(DomainError):
            parse_constraints("a4")

    def test_names(self):
        assert param_names("kb2")[-1] == "delta"
        spec = ModelSpec("CNcDir2", "a1,a2")
        assert spec.family == "cncdir"
        assert spec.free_names == ["alpha3", "lambda1", "lambda2", "lambda3"]
        assert "alpha1=alpha2=1" in spec.label()
        with pytest.raises(DomainError):
            ModelSpec("beta")

    def test_dataset_validation(self):
        with pytest.raises(DomainError):
            Dataset2D([[0.5, 0.5]])
        d = Dataset2D([[0.2, 0.3]])
        np.testing.assert_allclose(d.full(), [[0.2, 0.3, 0.5]])


class TestLoglik:
    @pytest.mark.parametrize(
        "family,params,logpdf",
        [
            ("dir", DirParams([1.2, 0.7, 2.0]), lambda p, x: dir_logpdf(p, x)),
            ("kb2", Kb2Params([1.2, 0.7, 2.0], -1.3), kb2_logpdf),
            ("ncdir", NcDirParams([1.2, 0.7, 2.0], [3.0, 0.0, 6.0]), ncdir_logpdf),
            ("cncdir", CNcDirParams([1.2, 0.7, 2.0], [30.0, 4.0, 0.0]), cncdir_logpdf),
        ],
    )
    def test_matches_sum_of_logpdf(self, family, params, logpdf, dir_data):
        ref = float(np.sum(logpdf(params, dir_data.points)))
        assert loglik(family, params, dir_data) == pytest.approx(ref, rel=1e-11)

    def test_dict_and_vector_inputs(self, dir_data):
        p = CNcDirParams([1, 2, 1], [3, 4, 5])
        d = {"alpha1": 1, "alpha2": 2, "alpha3": 1, "lambda1": 3, "lambda2": 4, "lambda3": 5}
        assert loglik("cncdir", d, dir_data) == loglik("cncdir", p, dir_data)
        assert loglik("cncdir", [1, 2, 1, 3, 4, 5], dir_data) == loglik("cncdir", p, dir_data)
        with pytest.raises(DomainError):
            loglik("cncdir", {"alpha1": 1}, dir_data)


class TestFit:
    def test_dirichlet_matches_generic_optimizer(self, dir_data):
        rep = fit_ml("dir", dir_data)
        X = dir_data.full()

        def nll(t):
            return -stats.dirichlet.logpdf(X.T, np.exp(t)).sum()

        ref = optimize.minimize(nll, np.zeros(3), method="BFGS").x
        got = [rep.estimates[f"alpha{i}"] for i in (1, 2, 3)]
        np.testing.assert_allclose(got, np.exp(ref), rtol=1e-4)
        assert rep.std_errors is not None
        assert all(v > 0 for v in rep.std_errors.values())

    def test_dirichlet_score_vanishes(self, dir_data):
        rep = fit_ml("dir", dir_data)
        a = np.array([rep.estimates[f"alpha{i}"] for i in (1, 2, 3)])
        score = digamma(a.sum()) - digamma(a) + np.log(dir_data.full()).mean(axis=0)
        np.testing.assert_allclose(score, 0.0, atol=1e-5)

    def test_kb2_not_worse_than_dirichlet(self, dir_data):
        d = fit_ml("dir", dir_data, FAST)
        k = fit_ml("kb2", dir_data, FAST)
        assert k.loglik >= d.loglik - 1e-6

    def test_constraints_pinned(self, cncdir_data):
        rep = fit_ml(ModelSpec("cncdir", "a1,a2,a3"), cncdir_data)
        assert all(rep.estimates[f"alpha{i}"] == 1.0 for i in (1, 2, 3))
        assert set(rep.std_errors) == {"lambda1", "lambda2", "lambda3"}

    def test_cncdir_recovers_parameters(self, cncdir_data):
        rep = fit_ml(ModelSpec("cncdir", "a1,a2,a3"), cncdir_data)
        truth = (42.7802, 48.7569, 44.1538)
        for i, t in enumerate(truth, start=1):
            est, se = rep.estimates[f"lambda{i}"], rep.std_errors[f"lambda{i}"]
            assert abs(est - t) < 3.5 * se

    def test_zero_lambda_snaps(self):
        data = Dataset2D(sample_dirichlet(DirParams([2.0, 2.0, 2.0]), make_rng(7), 150))
        rep = fit_ml(ModelSpec("cncdir", "a1,a2,a3"), data, FAST)
        assert rep.loglik >= loglik("cncdir", CNcDirParams([1, 1, 1], [1e-3] * 3), data)

    def test_report_json_is_parameter_file(self, cncdir_data):
        rep = fit_ml(ModelSpec("cncdir", "a1,a2,a3"), cncdir_data, FAST)
        js = rep.to_json()
        assert js["alpha"] == [1.0, 1.0, 1.0]
        assert rep.params() == CNcDirParams(js["alpha"], js["lambda"])

    def test_infinite_everywhere_raises(self, monkeypatch, dir_data):
        import cncdir.inference as inf

        monkeypatch.setattr(inf._Objective, "value", lambda self, v: math.inf)
        with pytest.raises(NoConvergence):
            inf.fit_ml("dir", dir_data, FAST)


class TestLikelihoodRatio:
    def test_lr_nonnegative_and_chi_squared(self, cncdir_data):
        r = lr_test(ModelSpec("cncdir", "a1,a2,a3"), cncdir_data, FAST)
        assert r.w >= 0 and r.df == 3
        assert r.p_value == pytest.approx(stats.chi2.sf(r.w, 3), rel=1e-9)
        assert r.l1 >= r.l0 - 1e-6

    def test_battery_shares_unconstrained_fit(self, dir_data):
        reps = lr_battery("dir", dir_data, FAST)
        assert [r.model.constraints for r in reps] == list(HYPOTHESES)
        assert len({r.l1 for r in reps}) == 1
        assert [r.df for r in reps] == [3, 2, 2, 2]

    def test_rejects_empty_constraints(self, dir_data):
        with pytest.raises(DomainError):
            lr_test(ModelSpec("dir"), dir_data)


def _lr(constraints, p):
    return LrReport(ModelSpec("cncdir", constraints), 1.0, len(constraints), p, -1.0, 0.0)


class TestSelection:
    def test_fewest_parameters_wins(self):
        reps = [_lr({1, 2, 3}, 0.3), _lr({1, 2}, 0.9), _lr({1, 3}, 0.2), _lr({2, 3}, 0.01)]
        assert select_model(reps).constraints == {1, 2, 3}

    def test_ties_broken_by_p(self):
        reps = [_lr({1, 2, 3}, 0.01), _lr({1, 2}, 0.2), _lr({1, 3}, 0.6), _lr({2, 3}, 0.01)]
        assert select_model(reps).constraints == {1, 3}

    def test_all_rejected_gives_full_model(self):
        reps = [_lr(h, 0.001) for h in HYPOTHESES]
        assert select_model(reps) == ModelSpec("cncdir")

    def test_empty(self):
        with pytest.raises(DomainError):
            select_model([])


class TestIngest:
    def test_transform_and_counts(self):
        text = "x,y\n0.9,0.8\n0.2,0.1\n0.5,0.5\n1.0,0.3\n0.7,0.6\n"
        d = ingest_square_csv(text)
        np.testing.assert_allclose(d.points, [[0.2, 0.1], [0.4, 0.3]])
        assert d.n_dropped_lower == 2
        assert d.n_dropped_boundary == 1

    def test_bbox_rescaling(self):
        text = "# bbox: 0, 200, 0, 200\n180,160\n20,20\n"
        d = ingest_square_csv(text)
        np.testing.assert_allclose(d.points, [[0.2, 0.1]])

    def test_without_transform(self):
        d = ingest_square_csv("0.1,0.2\n0.3,0.3\n", transform=False)
        assert d.n == 2

    def test_errors(self, tmp_path):
        with pytest.raises(ParseError) as info:
            ingest_square_csv("x,y\n0.9,0.8\n0.7,abc\n")
        assert info.value.row == 3
        with pytest.raises(ParseError):
            ingest_square_csv("0.9,1.8\n0.1,0.2\n")
        with pytest.raises(EmptyAfterFilter):
            ingest_square_csv("0.1,0.2\n0.3,0.3\n")
        f = tmp_path / "pts.csv"
        f.write_text("0.9,0.8\n")
        assert ingest_square_csv(str(f)).n == 1
