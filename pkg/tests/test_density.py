"""Conditional density estimator tests."""

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wpultr.core import CLICK, REL, FeatureKind, FeatureSchema, FeatureSpec, ValidationError
from wpultr.density import (
    ConditionalEstimator,
    FitHyper,
    HeadKind,
    fit,
    fit_estimators,
    log_prob,
    mask_input,
)
from wpultr.preprocess import ColumnLayout, DesignMatrix, fit_transforms

FAST = FitHyper(hidden=(8,), max_epochs=100, full_batch=True, seed=0)


def continuous_design(n=400, seed=0, noise=0.1):
    """CLICK ~ Bernoulli(sigmoid(2 r)), x = r + noise, u independent."""
    rng = np.random.default_rng(seed)
    schema = FeatureSchema((FeatureSpec("x", FeatureKind.CONTINUOUS),
                            FeatureSpec("u", FeatureKind.CONTINUOUS)))
    layout = ColumnLayout.build(schema, {})
    rel = rng.normal(size=n)
    clicks = (rng.random(n) < 1 / (1 + np.exp(-2 * rel))).astype(float)
    x = rel + noise * rng.normal(size=n)
    u = rng.normal(size=n)
    return DesignMatrix(np.column_stack([clicks, rel, x, u]), layout)


class TestMasking:
    def test_mask_input(self):
        layout = continuous_design().layout
        row = np.array([1.0, 2.0, 3.0, 4.0])
        assert mask_input(row, [REL, "u"], layout).tolist() == [0.0, 2.0, 0.0, 4.0]

    @settings(max_examples=25, deadline=None)
    @given(arrays(np.float64, 4, elements=st.floats(-5, 5)))
    def test_non_parents_do_not_matter(self, noise):
        Z = continuous_design(n=60)
        est = ConditionalEstimator("x", [REL], HeadKind.GAUSSIAN, Z.layout, hidden=(6,), seed=1)
        row = Z.values[0]
        moved = row.copy()
        moved[[0, 2, 3]] += noise[[0, 2, 3]]
        value = row[2]
        assert est.log_prob_array(row, [value])[0] == est.log_prob_array(moved, [value])[0]

    def test_parent_changes_density(self):
        Z = continuous_design(n=60)
        est = ConditionalEstimator("x", [REL], HeadKind.GAUSSIAN, Z.layout, hidden=(6,), seed=1)
        row = Z.values[0]
        moved = row.copy()
        moved[1] += 3.0
        assert est.log_prob_array(row, [row[2]])[0] != est.log_prob_array(moved, [row[2]])[0]


def linear_gaussian_design(n=5000, seed=0):
    """x = 2 r + Normal(0, 0.5²)."""
    rng = np.random.default_rng(seed)
    schema = FeatureSchema((FeatureSpec("x", FeatureKind.CONTINUOUS),))
    rel = rng.normal(size=n)
    x = 2.0 * rel + 0.5 * rng.normal(size=n)
    return DesignMatrix(np.column_stack([np.zeros(n), rel, x]), ColumnLayout.build(schema, {}))


def categorical_design(table, n=5000, seed=0):
    """Binary REL bin picks a row of ``table``; m is drawn from that row."""
    rng = np.random.default_rng(seed)
    schema = FeatureSchema((FeatureSpec("m", FeatureKind.CATEGORICAL, len(table[0])),))
    layout = ColumnLayout.build(schema, {"m": 2})
    rel = rng.integers(0, 2, size=n).astype(float)
    codes = np.array([rng.choice(len(table[0]), p=table[int(r)]) for r in rel])
    values = np.column_stack([np.zeros(n), rel, codes, -codes]).astype(float)
    return DesignMatrix(values, layout, {"m": codes}, cardinalities={"m": len(table[0])})


class TestFit:
    def test_gaussian_learns_conditional(self):
        Z = continuous_design()
        est, report = fit(Z, "x", [REL], hyper=FAST)
        assert report.trace[-1] > report.trace[0]
        assert est.predict(Z.values[:50])["sd"].mean() < 0.5
        assert est.parent_set == (REL,)
        assert report.final_loglik == pytest.approx(est.mean_log_likelihood(Z).item())

    def test_linear_gaussian_slope_and_spread(self):
        Z = linear_gaussian_design()
        est, _ = fit(Z, "x", [REL], hyper=FitHyper(hidden=(16,), max_epochs=300,
                                                   full_batch=True, seed=0))
        grid = np.zeros((21, 3))
        grid[:, 1] = np.linspace(-1.5, 1.5, 21)
        predicted = est.predict(grid)
        slope = np.polyfit(grid[:, 1], predicted["mean"], 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)
        assert np.all((predicted["sd"] >= 0.4) & (predicted["sd"] <= 0.6))

    def test_categorical_recovers_table(self):
        table = ((0.6, 0.3, 0.1), (0.1, 0.3, 0.6))
        Z = categorical_design(table)
        est, _ = fit(Z, "m", [REL], hyper=FitHyper(hidden=(8,), max_epochs=200,
                                                   full_batch=True, seed=0))
        rows = np.zeros((2, Z.layout.width))
        rows[:, 1] = [0.0, 1.0]
        np.testing.assert_allclose(est.predict(rows)["probs"], np.array(table), atol=0.05)

    def test_parameter_gradient_matches_finite_differences(self):
        Z = continuous_design(n=80)
        est = ConditionalEstimator("x", [REL, "u"], HeadKind.GAUSSIAN, Z.layout,
                                   hidden=(6,), seed=4)
        loglik = est.mean_log_likelihood(Z)
        grads = torch.autograd.grad(loglik, list(est.parameters()))
        rng = np.random.default_rng(1)
        eps = 1e-6
        for _ in range(10):
            k = int(rng.integers(len(grads)))
            param = list(est.parameters())[k]
            flat = int(rng.integers(param.numel()))
            if grads[k].reshape(-1)[flat] == 0.0:
                continue  # masked first-layer column
            with torch.no_grad():
                param.view(-1)[flat] += eps
                up = est.mean_log_likelihood(Z).item()
                param.view(-1)[flat] -= 2 * eps
                down = est.mean_log_likelihood(Z).item()
                param.view(-1)[flat] += eps
            numeric = (up - down) / (2 * eps)
            analytic = grads[k].reshape(-1)[flat].item()
            assert abs(analytic - numeric) <= 1e-4 * max(abs(analytic), abs(numeric), 1e-3)

    def test_input_gradient_matches_finite_differences(self):
        Z = continuous_design(n=12)
        est = ConditionalEstimator(CLICK, [REL, "x"], HeadKind.BERNOULLI, Z.layout,
                                   hidden=(5,), seed=2)
        clicks = torch.as_tensor(Z.column(CLICK), dtype=torch.float64)
        inputs = torch.as_tensor(Z.values, dtype=torch.float64).requires_grad_(True)
        assert torch.autograd.gradcheck(
            lambda z: est.log_prob_tensor(z, clicks).mean(), (inputs,), eps=1e-6, atol=1e-8,
            rtol=1e-4,
        )

    def test_full_batch_trace_nondecreasing(self):
        Z = continuous_design()
        _, report = fit(Z, "x", [REL], hyper=FAST)
        assert all(b >= a - 1e-9 for a, b in zip(report.trace, report.trace[1:]))

    def test_empty_parent_set_is_marginal(self):
        Z = continuous_design()
        est, _ = fit(Z, "x", [], hyper=FAST)
        means = est.predict(Z.values[:20])["mean"]
        assert np.ptp(means) == 0.0

    def test_bernoulli_click_head(self):
        Z = continuous_design()
        est, _ = fit(Z, CLICK, [REL], HeadKind.BERNOULLI, FAST)
        rows = np.zeros((2, 4))
        rows[:, 1] = [-2.0, 2.0]
        low, high = est.predict(rows)["p"]
        assert high > low

    def test_minibatch_is_seeded(self):
        Z = continuous_design()
        hyper = FitHyper(hidden=(8,), max_epochs=3, batch_size=64, seed=5)
        _, a = fit(Z, "x", [REL], hyper=hyper)
        _, b = fit(Z, "x", [REL], hyper=hyper)
        assert a.trace == b.trace
        assert a.epochs == 3

    def test_zero_epochs(self):
        Z = continuous_design()
        _, report = fit(Z, "x", [REL], hyper=FitHyper(max_epochs=0))
        assert report.epochs == 0 and report.trace == []

    def test_errors(self):
        Z = continuous_design()
        with pytest.raises(ValidationError):
            fit(Z, "x", ["x", REL], hyper=FAST)
        with pytest.raises(ValidationError):
            fit(continuous_design(n=30), "x", [REL], hyper=FAST)
        with pytest.raises(ValidationError):
            fit(Z, "x", [REL], HeadKind.BERNOULLI, FAST)
        with pytest.raises(ValidationError):
            fit(Z, CLICK, [REL], HeadKind.GAUSSIAN, FAST)
        with pytest.raises(ValidationError):
            fit(Z, "x", [REL], HeadKind.CATEGORICAL, FAST)
        with pytest.raises(ValidationError):
            FitHyper(lr=0)


class TestDiscreteTargets:
    def design(self, simulated):
        log, _ = simulated
        return fit_transforms(log).apply(log)

    def test_categorical_media(self, simulated):
        Z = self.design(simulated)
        est, _ = fit(Z, "media", [REL], hyper=FAST)
        assert est.head is HeadKind.CATEGORICAL
        assert est.cardinality == 3
        probs = est.predict(Z.values[:10])["probs"]
        assert probs.shape == (10, 3)
        assert probs.sum(axis=1) == pytest.approx(np.ones(10))
        with pytest.raises(ValidationError):
            log_prob(est, Z.values[0])
        code = int(Z.codes["media"][0])
        assert log_prob(est, Z.values[0], code) == pytest.approx(np.log(probs[0, code]))

    def test_gaussian_on_categorical_rejected(self, simulated):
        Z = self.design(simulated)
        with pytest.raises(ValidationError):
            fit(Z, "media", [REL], HeadKind.GAUSSIAN, FAST)

    def test_ordinal_as_categorical(self, simulated):
        Z = self.design(simulated)
        est, _ = fit(Z, "position", [REL], HeadKind.CATEGORICAL, FAST)
        assert est.cardinality == 5
        assert est.code_offset == 1
        assert est.target_values(Z).min() == 0

    def test_level_missing_from_fitting_sample(self, simulated):
        Z = self.design(simulated)
        codes = Z.codes["media"]
        sample = Z.subset(np.flatnonzero(codes != codes.max()))
        est, _ = fit(sample, "media", [REL], hyper=FAST)
        assert est.cardinality == 3
        logp = est.log_prob_matrix(Z)
        assert logp.shape == (Z.n_rows,)
        assert np.isfinite(logp).all()

    def test_ordinal_default_is_gaussian(self, simulated):
        Z = self.design(simulated)
        est, _ = fit(Z, "position", [REL], hyper=FAST)
        assert est.head is HeadKind.GAUSSIAN


class TestSerialization:
    def test_roundtrip_preserves_likelihood(self):
        Z = continuous_design()
        est, _ = fit(Z, "x", [REL], hyper=FAST)
        again = ConditionalEstimator.from_dict(est.to_dict())
        assert np.allclose(again.log_prob_matrix(Z), est.log_prob_matrix(Z))
        assert np.array_equal(again.reference, est.reference)
        assert repr(again) == "ConditionalEstimator(p(x | REL), head=gaussian)"


def test_fit_estimators_parallel_matches_serial():
    Z = continuous_design()
    targets = {"x": [REL], "u": []}
    serial = fit_estimators(Z, targets, FAST, jobs=1)
    parallel = fit_estimators(Z, targets, FAST, jobs=2)
    assert sorted(serial) == ["u", "x"]
    for name in targets:
        assert parallel[name][1].final_loglik == pytest.approx(serial[name][1].final_loglik)
