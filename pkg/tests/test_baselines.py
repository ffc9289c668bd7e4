"""Naive and inverse-propensity baseline tests."""

import math

import numpy as np
import pytest
import torch

from tests.conftest import SCHEMA, make_record
from wpultr.baselines import (
    BatchSampler,
    PropensityTable,
    RankingModel,
    TrainHyper,
    estimate_propensity,
    pointwise_loss,
    train_ipw,
    train_naive,
)
from wpultr.core import EstimationError, ValidationError, group_queries

FAST = TrainHyper(steps=150, batch_size=16, lr=1e-2, hidden=(8,), seed=0)


def clicks_log(clicks_by_position):
    """One query per column of clicks; ``clicks_by_position[k]`` lists clicks at rank k + 1."""
    n_queries = len(clicks_by_position[0])
    records = [
        make_record(f"q{q}", f"q{q}-d{k}", rank=k + 1, click=clicks_by_position[k][q],
                    features=(float(-k), float(q % 2)))
        for q in range(n_queries)
        for k in range(len(clicks_by_position))
    ]
    return group_queries(records, SCHEMA)


class TestPropensity:
    def test_monotone_projection(self):
        log = clicks_log([
            [1, 1, 1, 1, 0, 0, 0, 0],
            [1, 1, 0, 0, 0, 0, 0, 0],
            [1, 1, 1, 0, 0, 0, 0, 0],
        ])
        table = estimate_propensity(log)
        assert table.values == pytest.approx((1.0, 0.625, 0.625))
        assert table.propensity(1) == 1.0
        assert table.click_weights(log)[:3].tolist() == pytest.approx([1.0, 1.6, 1.6])

    def test_halving_ctr(self):
        log = clicks_log([
            [1, 1, 1, 1, 1, 1, 1, 1],
            [1, 1, 1, 1, 0, 0, 0, 0],
            [1, 1, 0, 0, 0, 0, 0, 0],
        ])
        assert estimate_propensity(log).values == pytest.approx((1.0, 0.5, 0.25))

    def test_uniform_ctr(self):
        log = clicks_log([[1, 0, 1, 0]] * 3)
        assert estimate_propensity(log).values == pytest.approx((1.0, 1.0, 1.0))

    def test_floor(self):
        log = clicks_log([[1, 1], [0, 0], [0, 0]])
        assert estimate_propensity(log, floor=0.05).values == pytest.approx((1.0, 0.05, 0.05))

    def test_no_clicks_at_top(self):
        with pytest.raises(EstimationError):
            estimate_propensity(clicks_log([[0, 0], [1, 0]]))

    def test_gap_in_positions(self):
        records = [make_record("q", "a", rank=1, click=1), make_record("q", "b", rank=3)]
        with pytest.raises(ValidationError):
            estimate_propensity(group_queries(records, SCHEMA))

    def test_table_validation(self):
        with pytest.raises(ValidationError):
            PropensityTable((1.0, 0.0))
        with pytest.raises(ValidationError):
            PropensityTable.identity(2).propensity(3)
        assert PropensityTable.identity(3).to_dict() == {
            "position": [1, 2, 3], "propensity": [1.0, 1.0, 1.0]
        }

    def test_simulated_propensities_decrease(self, simulated):
        log, _ = simulated
        values = estimate_propensity(log).values
        assert list(values) == sorted(values, reverse=True)
        assert values[0] == 1.0


class TestPointwise:
    def test_loss_at_zero_scores(self):
        clicks = torch.tensor([1.0, 0.0, 1.0], dtype=torch.float64)
        loss = pointwise_loss(torch.zeros(3, dtype=torch.float64), clicks, torch.ones(3, dtype=torch.float64))
        assert float(loss) == pytest.approx(math.log(2))

    def test_click_weights_scale_positive_term(self):
        scores = torch.zeros(2, dtype=torch.float64)
        clicks = torch.tensor([1.0, 1.0], dtype=torch.float64)
        loss = pointwise_loss(scores, clicks, torch.tensor([2.0, 2.0], dtype=torch.float64))
        assert float(loss) == pytest.approx(2 * math.log(2))

    def test_batch_sampler_covers_rows(self):
        sampler = BatchSampler(10, 5, seed=0)
        seen = torch.cat([sampler.next(), sampler.next()]).tolist()
        assert sorted(seen) == list(range(10))
        assert len(BatchSampler(3, 10, seed=0).next()) == 3


class TestTraining:
    def test_naive_loss_decreases(self, simulated):
        log, _ = simulated
        trace: list[float] = []
        model = train_naive(log, FAST, trace=trace)
        assert len(trace) == FAST.steps
        assert np.mean(trace[-10:]) < np.mean(trace[:10])
        assert model.score_log(log).shape == (len(log),)

    def test_naive_is_seeded(self, simulated):
        log, _ = simulated
        a = train_naive(log, FAST).score_log(log)
        b = train_naive(log, FAST).score_log(log)
        assert np.array_equal(a, b)

    def test_zero_steps_returns_initial_model(self, simulated):
        log, _ = simulated
        hyper = TrainHyper(steps=0, hidden=(8,), seed=3)
        model = train_naive(log, hyper)
        fresh = RankingModel(log.doc_feature_dim, (8,), seed=3)
        assert np.array_equal(model.score_log(log), fresh.score_log(log))

    def test_ipw_with_identity_matches_naive(self, simulated):
        log, _ = simulated
        identity = PropensityTable.identity(max(r.rank_position for r in log.records))
        a = train_ipw(log, identity, FAST).score_log(log)
        b = train_naive(log, FAST).score_log(log)
        assert np.allclose(a, b)

    def test_ipw_trains(self, simulated):
        log, _ = simulated
        trace: list[float] = []
        train_ipw(log, estimate_propensity(log), FAST, trace=trace)
        assert len(trace) == FAST.steps and all(np.isfinite(trace))


class TestRankingModel:
    def test_save_load(self, tmp_path, simulated):
        log, _ = simulated
        model = train_naive(log, FAST)
        model.save(tmp_path / "ranker.json")
        loaded = RankingModel.load(tmp_path / "ranker.json")
        assert np.array_equal(loaded.score_log(log), model.score_log(log))
        assert np.array_equal(model.copy().score_log(log), model.score_log(log))

    def test_feature_dimension_checked(self, tiny_log):
        with pytest.raises(ValidationError):
            RankingModel(5, (4,)).score_log(tiny_log)

    def test_hyper_validation(self):
        with pytest.raises(ValidationError):
            TrainHyper(propensity_floor=0)
        with pytest.raises(ValidationError):
            TrainHyper(batch_size=0)
