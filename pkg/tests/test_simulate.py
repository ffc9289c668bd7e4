"""Click simulator and frequency bucket tests."""

import numpy as np
import pytest

from wpultr.core import CLICK, REL, ValidationError, validate_log
from wpultr.simulate import (
    ClickCoefficients,
    ScmConfig,
    assign_frequency_buckets,
    generate,
    ground_truth_graph,
    pos_score,
    relevance_only_click_rate,
)


class TestGenerate:
    def test_log_is_valid(self, simulated, small_config):
        log, truth = simulated
        assert len(log) == small_config.n_queries * small_config.docs_per_query
        assert validate_log(log) == []
        assert log.has_grades and log.has_logged_scores
        assert log.doc_feature_dim == small_config.doc_feature_dim
        assert truth.click_probabilities.shape == (len(log),)

    def test_deterministic(self, small_config):
        a, _ = generate(small_config)
        b, _ = generate(small_config)
        assert a.records == b.records

    def test_jobs_do_not_change_output(self, small_config):
        serial, _ = generate(small_config)
        parallel, _ = generate(small_config, jobs=4)
        assert serial.records == parallel.records

    def test_seed_changes_output(self, small_config):
        from dataclasses import replace
        a, _ = generate(small_config)
        b, _ = generate(replace(small_config, seed=small_config.seed + 1))
        assert a.records != b.records

    def test_ranks_follow_logged_scores(self, simulated):
        log, _ = simulated
        for ranked in log.ranked_lists():
            scores = [r.logged_score for r in ranked]
            assert scores == sorted(scores, reverse=True)
            assert [r.rank_position for r in ranked] == list(range(1, len(ranked) + 1))

    def test_max_height_is_page_maximum(self, simulated):
        log, _ = simulated
        for _, records in log.groups():
            top = max(r.sepp_values["height"] for r in records)
            assert all(r.sepp_values["max_height"] == top for r in records)

    def test_truth_aligned_with_log(self, simulated):
        log, truth = simulated
        assert truth.true_relevance.tolist() == [r.true_relevance for r in log.records]

    def test_empty(self):
        log, truth = generate(ScmConfig(n_queries=0))
        assert len(log) == 0
        assert truth.expected_click_rate() == 0.0

    def test_sessions(self):
        log, _ = generate(ScmConfig(n_queries=30, docs_per_query=3, sessions_zipf=2.0,
                                    max_sessions=4, seed=2))
        sessions = {r.session_id for r in log.records}
        assert max(sessions) <= 3
        assert validate_log(log) == []

    def test_relevance_only_rate_matches_simulation(self):
        config = ScmConfig(
            n_queries=4000, docs_per_query=5, seed=5,
            click_coeffs=ClickCoefficients(b_pos=0.0, d_media=(0.0, 0.0, 0.0), e_height=0.0),
        )
        log, truth = generate(config)
        expected = relevance_only_click_rate(config)
        assert truth.expected_click_rate() == pytest.approx(expected, abs=0.01)
        observed = np.mean([r.click for r in log.records])
        assert observed == pytest.approx(expected, abs=0.02)

    def test_relevance_only_rate_needs_sepp_free_click(self, small_config):
        with pytest.raises(ValidationError):
            relevance_only_click_rate(small_config)


class TestScmConfig:
    def test_bad_prior(self):
        with pytest.raises(ValidationError):
            ScmConfig(relevance_prior=(0.5, 0.5, 0.5, 0.0, 0.0))

    def test_bad_media_rows(self):
        with pytest.raises(ValidationError):
            ScmConfig(media_given_score=((1.0, 0.0, 0.0),) * 4)

    def test_coefficients_from_mapping(self):
        config = ScmConfig(click_coeffs={"b_pos": 0.0})
        assert config.click_coeffs.b_pos == 0.0

    def test_d_media_length(self):
        with pytest.raises(ValidationError):
            ScmConfig(click_coeffs=ClickCoefficients(d_media=(0.0, 1.0)))


class TestGroundTruthGraph:
    def test_default_edges(self):
        graph = ground_truth_graph(ScmConfig())
        assert graph.edge_strings() == {
            "REL→CLICK", "REL→position", "REL→media", "media→height",
            "height→max_height", "position→CLICK", "media→CLICK",
        }

    def test_height_edge_when_it_matters(self):
        config = ScmConfig(click_coeffs=ClickCoefficients(e_height=0.5))
        assert ground_truth_graph(config).has_directed("height", CLICK)

    def test_no_sepp_edges_into_click(self):
        config = ScmConfig(click_coeffs=ClickCoefficients(b_pos=0.0, d_media=(0.3, 0.3, 0.3)))
        assert ground_truth_graph(config).parents(CLICK) == (REL,)


def test_pos_score():
    assert pos_score(1) == pytest.approx(1.0)
    assert pos_score([1, 3]).tolist() == pytest.approx([1.0, 0.5])


class TestBuckets:
    def test_frequency_order(self, tiny_log):
        from tests.conftest import SCHEMA, make_record
        from wpultr.core import group_queries

        records = list(tiny_log.records) + [
            make_record("q2", "extra", rank=1, session=1, features=(0.0, 0.0))
        ]
        log = assign_frequency_buckets(group_queries(records, SCHEMA), n_buckets=3)
        bucket = {r.query_id: r.query_frequency_bucket for r in log.records}
        # q2 has the most impressions; the rest tie and fall back to query_id order
        assert bucket == {"q2": 0, "q0": 1, "q1": 2}

    def test_more_buckets_than_queries(self, tiny_log):
        log = assign_frequency_buckets(tiny_log, n_buckets=10)
        assert sorted({r.query_frequency_bucket for r in log.records}) == [0, 3, 6]

    def test_bad_bucket_count(self, tiny_log):
        with pytest.raises(ValidationError):
            assign_frequency_buckets(tiny_log, n_buckets=11)
