"""PDR/FDR accounting, batch runs, CV link choice, real-data workflow."""

import math

import numpy as np
import pytest

import ebicglm.experiments as exp_mod
from ebicglm import (
    Dataset,
    FoldTooSmall,
    InvalidArgs,
    ModelIndex,
    PathEmpty,
    SimDesign,
    TrueModel,
    cv_select_link,
    pdr_fdr,
    real_data_workflow,
    run_simulation_batch,
)


class TestPdrFdr:
    def test_spec_counts(self):
        r = pdr_fdr({1, 2, 3}, {1, 2, 4})
        assert r.pdr == pytest.approx(2 / 3)
        assert r.fdr == pytest.approx(1 / 3)

    def test_perfect_selection(self):
        r = pdr_fdr({5, 9}, {5, 9})
        assert (r.pdr, r.fdr) == (1.0, 0.0)

    def test_empty_selection_convention(self):
        r = pdr_fdr(set(), {1, 2})
        assert (r.pdr, r.fdr) == (0.0, 0.0)

    def test_accepts_model_index_and_true_model(self):
        tm = TrueModel(support=(0, 3), beta=np.zeros(5))
        r = pdr_fdr(ModelIndex((0, 1)), tm)
        assert r.pdr == pytest.approx(0.5)
        assert r.fdr == pytest.approx(0.5)

    def test_empty_truth_rejected(self):
        with pytest.raises(InvalidArgs):
            pdr_fdr({1}, set())

    def test_perfect_iff_equal(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            s = set(rng.choice(20, size=rng.integers(0, 6), replace=False).tolist())
            t = set(rng.choice(20, size=rng.integers(1, 6), replace=False).tolist())
            r = pdr_fdr(s, t)
            assert (r.pdr == 1.0 and r.fdr == 0.0) == (s == t)
            assert 0.0 <= r.pdr <= 1.0 and 0.0 <= r.fdr <= 1.0


def _small_design():
    # miniature Setting-1 layout so batch tests stay fast
    return SimDesign("S1", n=60, pn=48, p0n=4, rho=0.0, L=10, q=15)


class TestSimulationBatch:
    def test_deterministic_and_thread_invariant(self):
        design = _small_design()
        a = run_simulation_batch(design, 6, seed=11, threads=1)
        b = run_simulation_batch(design, 6, seed=11, threads=2)
        assert a.to_tsv() == b.to_tsv()
        assert a.replicate_metrics == b.replicate_metrics

    def test_single_replicate_dispersion_not_applicable(self):
        design = _small_design()
        s = run_simulation_batch(design, 1, seed=3)
        for c in s.cells:
            assert math.isnan(c.se_pdr) and math.isnan(c.se_fdr)
        assert "NA" in s.to_tsv()

    def test_dispersion_column_is_sample_sd(self):
        design = _small_design()
        s = run_simulation_batch(design, 8, seed=2)
        for gi, cell in enumerate(s.cells):
            pdrs = np.array([m[gi].pdr for _, m in s.replicate_metrics])
            assert cell.se_pdr == pytest.approx(pdrs.std(ddof=1), rel=1e-12)

    def test_tsv_shape(self):
        design = _small_design()
        s = run_simulation_batch(design, 3, seed=5)
        lines = s.to_tsv().strip().split("\n")
        assert lines[0].split("\t") == [
            "setting", "rho", "n", "gamma", "mean_pdr", "se_pdr",
            "mean_fdr", "se_fdr", "n_reps", "n_failed",
        ]
        assert len(lines) == 5  # header + four gammas

    def test_failed_replicates_counted_not_dropped(self, monkeypatch):
        design = _small_design()
        real = exp_mod.select_pipeline

        def flaky(lf, data, config, true_support_size=None):
            if flaky.calls == 1:
                flaky.calls += 1
                raise PathEmpty("synthetic failure")
            flaky.calls += 1
            return real(lf, data, config, true_support_size=true_support_size)

        flaky.calls = 0
        monkeypatch.setattr(exp_mod, "select_pipeline", flaky)
        s = run_simulation_batch(design, 4, seed=9, threads=1)
        assert s.n_failed == 1
        assert s.failures[0][0] == 1  # replicate id
        assert "PathEmpty" in s.failures[0][1]
        assert all(c.n_reps == 3 for c in s.cells)

    def test_invalid_replicates(self):
        with pytest.raises(InvalidArgs):
            run_simulation_batch(_small_design(), 0)


def _binary_data(n=48, p=4, coef=2.5, seed=0, dominant=1):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    eta = coef * X[:, dominant]
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return Dataset(y, X)


class TestCvSelectLink:
    def test_fold_assignment_is_partition(self):
        data = _binary_data(n=41)
        report = cv_select_link(data, ["logit", "probit"], path_length=2, folds=5, seed=1)
        assign = report.fold_assignment
        assert assign.shape == (41,)
        assert set(np.unique(assign)) <= set(range(5))
        # stratified: each class spread across folds with sizes within 1
        for cls in (0.0, 1.0):
            counts = np.bincount(assign[data.y == cls], minlength=5)
            assert counts.max() - counts.min() <= 1

    def test_chooses_generating_link_often_enough_to_run(self):
        data = _binary_data(n=80, coef=3.0, seed=4)
        report = cv_select_link(
            data, ["logit", "probit", "cloglog"], path_length=2, folds=4, seed=2
        )
        assert report.chosen in report.link_names
        assert len(report.criteria) == 3
        assert all(np.isfinite(v) for v in report.criteria)

    def test_tie_goes_to_first_input_link(self):
        # pure-noise covariates and a BIC-heavy gamma leave the intercept-only
        # model for every link, so the held-out criteria tie exactly
        rng = np.random.default_rng(6)
        y = np.array([0.0, 1.0] * 10)
        X = rng.standard_normal((20, 2)) * 1e-6
        data = Dataset(y, X)
        report = cv_select_link(
            data, ["probit", "logit"], path_length=1, folds=4, seed=0, gamma_spec=5.0
        )
        spread = max(report.criteria) - min(report.criteria)
        assert spread < 1e-9
        assert report.chosen == "probit"

    def test_leave_one_out_boundary(self):
        data = _binary_data(n=12, p=2, seed=8)
        report = cv_select_link(data, ["logit"], path_length=1, folds=12, seed=0)
        assert report.folds == 12
        assert np.isfinite(report.criteria[0])

    def test_too_many_folds(self):
        data = _binary_data(n=10, p=2)
        with pytest.raises(FoldTooSmall):
            cv_select_link(data, ["logit"], folds=11)
        with pytest.raises(InvalidArgs):
            cv_select_link(data, ["logit"], folds=1)

    def test_deterministic_across_threads(self):
        data = _binary_data(n=60, seed=3)
        a = cv_select_link(data, ["logit", "cloglog"], path_length=2, folds=4, seed=5, threads=1)
        b = cv_select_link(data, ["logit", "cloglog"], path_length=2, folds=4, seed=5, threads=2)
        assert a.criteria == b.criteria and a.chosen == b.chosen


class TestRealDataWorkflow:
    def test_dominant_predictor_always_selected(self):
        data = _binary_data(n=90, p=6, coef=4.0, seed=12, dominant=2)
        report = real_data_workflow(
            data, ["logit", "cloglog"], path_steps=4, cv_folds=4, cv_path_length=2, seed=0
        )
        assert report.chosen_link in ("logit", "cloglog")
        for final in report.finals:
            assert final.model_indices, f"{final.link} selected nothing"
            assert 2 in final.model_indices
            assert np.isfinite(final.log_lik)
        for link, ranking in report.rankings.items():
            assert ranking[0] == 2

    def test_requires_binary_response(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.poisson(3.0, size=30).astype(float), rng.standard_normal((30, 3)))
        from ebicglm import DataError

        with pytest.raises(DataError):
            real_data_workflow(data, ["logit"], path_steps=2, cv_folds=3)
