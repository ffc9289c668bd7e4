"""Ranking metrics, metric reports and re-rank position analysis."""

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tests.conftest import SCHEMA, make_log, make_record
from wpultr.core import ValidationError
from wpultr.core.models import group_queries
from wpultr.eval import (
    EvalConfig,
    MetricReport,
    bucket_report,
    dcg_at_k,
    err_at_k,
    evaluate_rankings,
    kendall_tau,
    logged_orders,
    metric_report,
    ndcg_at_k,
    rank_log,
    rank_query,
    rerank_position_analysis,
    score_orders,
    write_position_analysis,
)

grade_lists = st.lists(st.integers(0, 4), min_size=1, max_size=12)


def bucketed_log(buckets=(1, 7)):
    """One three-document query per bucket, grades 2, 1, 0 by displayed rank."""
    records = []
    for q, bucket in enumerate(buckets):
        for k in range(3):
            records.append(make_record(
                query_id=f"q{q}", doc_id=f"q{q}-d{k}", rank=k + 1, grade=2 - k,
                bucket=bucket, score=float(3 - k), features=(float(3 - k), 0.0),
            ))
    return group_queries(records, SCHEMA)


# =============================================================================
# METRICS
# =============================================================================


class TestMetrics:
    def test_dcg(self):
        assert dcg_at_k([3, 2, 0], 2) == pytest.approx(7 + 3 / math.log2(3))
        assert dcg_at_k([3, 2, 0], 1) == 7.0
        assert dcg_at_k([0, 0], 2) == 0.0

    def test_hand_computed_values(self):
        assert dcg_at_k([4, 0, 1], 3) == pytest.approx(15.5)
        assert err_at_k([0], 1) == 0.0
        assert err_at_k([4], 1) == pytest.approx(0.9375)
        assert err_at_k([4, 4], 2) == pytest.approx(0.966796875)
        assert ndcg_at_k([0, 4], 2) == pytest.approx(0.63093, abs=1e-5)
        assert kendall_tau([1, 2, 3], [1, 1, 2]) == pytest.approx(2 / math.sqrt(6))

    def test_cutoff_past_list_end(self):
        assert dcg_at_k([1], 10) == dcg_at_k([1], 1)

    def test_err(self):
        assert err_at_k([4, 0], 1) == pytest.approx(15 / 16)
        assert err_at_k([2, 2], 2) == pytest.approx(3 / 16 + (13 / 16) * (3 / 16) / 2)

    def test_ndcg(self):
        assert ndcg_at_k([3, 2, 1], 3) == pytest.approx(1.0)
        assert ndcg_at_k([0, 3], 2) == pytest.approx((7 / math.log2(3)) / 7)
        assert ndcg_at_k([0, 0, 0], 3) == 1.0

    def test_bad_cutoff(self):
        with pytest.raises(ValidationError):
            dcg_at_k([1, 2], 0)

    @given(grade_lists, st.integers(1, 12))
    def test_ndcg_in_unit_interval(self, grades, k):
        assert 0.0 <= ndcg_at_k(grades, k) <= 1.0 + 1e-12

    @given(grade_lists, st.integers(1, 11))
    def test_dcg_nondecreasing_in_cutoff(self, grades, k):
        assert dcg_at_k(grades, k + 1) >= dcg_at_k(grades, k)

    def test_kendall_tau(self):
        assert kendall_tau([3, 2, 1], [2, 1, 0]) == pytest.approx(1.0)
        assert kendall_tau([1, 2, 3], [2, 1, 0]) == pytest.approx(-1.0)
        assert kendall_tau([1, 1, 1], [2, 1, 0]) == 0.0

    def test_kendall_tau_errors(self):
        with pytest.raises(ValidationError):
            kendall_tau([1.0], [1])
        with pytest.raises(ValidationError):
            kendall_tau([1.0, 2.0], [1])

    def test_rank_query_ties_break_by_doc_id(self):
        ranked = rank_query("q", ["b", "a", "c"], [1.0, 1.0, 2.0], [0, 1, 2])
        assert ranked.doc_ids == ("c", "a", "b")
        assert ranked.grades == (2, 1, 0)

    def test_rank_query_length_mismatch(self):
        with pytest.raises(ValidationError):
            rank_query("q", ["a", "b"], [1.0], [0, 1])


# =============================================================================
# REPORTS
# =============================================================================


class TestRankLog:
    def test_rank_by_scores(self):
        log = make_log()
        queries = rank_log(log, [-r.logged_score for r in log.records])
        assert [q.query_id for q in queries] == ["q0", "q1", "q2"]
        assert queries[0].doc_ids == ("q0-d2", "q0-d1", "q0-d0")
        assert queries[0].grades == (1, 2, 3)

    def test_repeated_document_counts_once(self):
        records = [
            make_record(doc_id="a", rank=1, grade=3, session=0),
            make_record(doc_id="b", rank=2, grade=0, session=0),
            make_record(doc_id="b", rank=1, grade=0, session=1),
            make_record(doc_id="a", rank=2, grade=3, session=1),
        ]
        log = group_queries(records, SCHEMA)
        (query,) = rank_log(log, [2.0, 1.0, 9.0, 0.0])
        assert query.doc_ids == ("a", "b")

    def test_needs_grades(self):
        with pytest.raises(ValidationError):
            rank_log(make_log(graded=False), np.zeros(9))

    def test_score_count(self):
        with pytest.raises(ValidationError):
            rank_log(make_log(), np.zeros(8))


class TestMetricReport:
    def test_rows(self):
        log = make_log()
        queries = rank_log(log, [r.logged_score for r in log.records])
        report = metric_report(queries, "naive", cutoffs=(1, 3))
        assert len(report) == 7
        ndcg = report.get("naive", "ndcg", 3)
        assert ndcg.mean == pytest.approx(1.0)
        assert ndcg.sd == pytest.approx(0.0)
        assert ndcg.n_queries == 3
        tau = report.get("naive", "tau")
        assert tau.mean == pytest.approx(1.0)
        assert report.get("naive", "ndcg", 5) is None

    def test_sd_uses_sample_formula(self):
        good = rank_query("a", ["x", "y"], [2.0, 1.0], [1, 0])
        bad = rank_query("b", ["x", "y"], [2.0, 1.0], [0, 1])
        row = metric_report([good, bad], "m", cutoffs=(1,)).get("m", "dcg", 1)
        assert row.mean == pytest.approx(0.5)
        assert row.sd == pytest.approx(np.std([1.0, 0.0], ddof=1))

    def test_empty(self):
        assert len(metric_report([], "m")) == 0

    def test_csv(self, tmp_path):
        log = make_log()
        report = evaluate_rankings(log, [r.logged_score for r in log.records], "naive")
        report.to_csv(tmp_path / "metrics.csv")
        frame = pd.read_csv(tmp_path / "metrics.csv")
        assert list(frame.columns) == ["method", "metric", "cutoff", "partition", "mean", "sd",
                                       "n_queries"]
        again = MetricReport.from_csv(tmp_path / "metrics.csv")
        assert again.get("naive", "err", 10).mean == pytest.approx(
            report.get("naive", "err", 10).mean)

    def test_from_csv_missing_column(self, tmp_path):
        path = tmp_path / "metrics.csv"
        path.write_text("method,metric\nnaive,dcg\n", encoding="utf-8")
        with pytest.raises(ValidationError):
            MetricReport.from_csv(path)


class TestBuckets:
    def test_high_and_tail(self):
        log = bucketed_log()
        report = evaluate_rankings(log, [r.logged_score for r in log.records], "m",
                                   EvalConfig(cutoffs=(1,)))
        assert report.partitions == {"all", "high", "tail"}
        assert report.get("m", "dcg", 1, "high").n_queries == 1
        assert report.get("m", "dcg", 1, "all").n_queries == 2

    def test_empty_partition_is_absent(self):
        log = bucketed_log(buckets=(0, 4))
        report = evaluate_rankings(log, [r.logged_score for r in log.records], "m")
        assert report.partitions == {"all", "high"}

    def test_no_buckets_means_overall_only(self):
        log = make_log()
        report = evaluate_rankings(log, [r.logged_score for r in log.records], "m")
        assert report.partitions == {"all"}

    def test_bucket_report_needs_buckets(self):
        log = make_log()
        queries = rank_log(log, [r.logged_score for r in log.records])
        with pytest.raises(ValidationError):
            bucket_report(queries, "m")

    def test_eval_config(self):
        assert EvalConfig().cutoffs == (1, 3, 5, 10)
        with pytest.raises(ValidationError):
            EvalConfig(cutoffs=(0,))
        with pytest.raises(ValidationError):
            EvalConfig(holdout_fraction=1.0)


# =============================================================================
# RE-RANK POSITIONS
# =============================================================================


class TestRerank:
    def test_landing_positions(self):
        original = {"q1": ["a", "b", "c"], "q2": ["a", "b", "c"]}
        new = {"q1": ["c", "a", "b"], "q2": ["a", "b", "c"]}
        frame = rerank_position_analysis(original, new)
        assert frame["orig_pos"].tolist() == [1, 2, 3]
        assert frame["mean_new_pos"].tolist() == pytest.approx([1.5, 2.5, 2.0])
        assert frame["sd"].tolist() == pytest.approx([0.5, 0.5, 1.0])

    def test_max_pos(self):
        frame = rerank_position_analysis({"q": ["a", "b", "c"]}, {"q": ["c", "b", "a"]}, max_pos=2)
        assert frame["orig_pos"].tolist() == [1, 2]
        assert frame["mean_new_pos"].tolist() == [3.0, 2.0]

    def test_identity(self):
        orders = {"q": ["a", "b"]}
        frame = rerank_position_analysis(orders, orders)
        assert frame["mean_new_pos"].tolist() == [1.0, 2.0]
        assert frame["sd"].tolist() == [0.0, 0.0]

    def test_full_reversal(self):
        docs = [f"d{k}" for k in range(10)]
        frame = rerank_position_analysis({"q": docs}, {"q": docs[::-1]})
        assert frame["mean_new_pos"].tolist() == [11.0 - k for k in range(1, 11)]

    def test_random_permutations_average_to_the_middle(self):
        rng = np.random.default_rng(4)
        docs = [f"d{k}" for k in range(10)]
        n = 2000
        original = {f"q{i}": docs for i in range(n)}
        shuffled = {f"q{i}": list(rng.permutation(docs)) for i in range(n)}
        frame = rerank_position_analysis(original, shuffled)
        standard_error = frame["sd"] / math.sqrt(n)
        assert ((frame["mean_new_pos"] - 5.5).abs() <= 4 * standard_error).all()

    def test_mismatched_documents(self):
        with pytest.raises(ValidationError):
            rerank_position_analysis({"q": ["a", "b"]}, {"q": ["a", "c"]})
        with pytest.raises(ValidationError):
            rerank_position_analysis({"q": ["a"]}, {"r": ["a"]})

    def test_orders_from_log(self):
        log = make_log()
        logged = logged_orders(log)
        assert logged["q0"] == ["q0-d0", "q0-d1", "q0-d2"]
        flipped = score_orders(log, [-r.logged_score for r in log.records])
        assert flipped["q0"] == ["q0-d2", "q0-d1", "q0-d0"]
        frame = rerank_position_analysis(logged, flipped)
        assert frame["mean_new_pos"].tolist() == [3.0, 2.0, 1.0]

    def test_write(self, tmp_path):
        frame = rerank_position_analysis({"q": ["a", "b"]}, {"q": ["b", "a"]})
        write_position_analysis(frame, tmp_path / "positions.csv", method="bal")
        written = pd.read_csv(tmp_path / "positions.csv")
        assert list(written.columns) == ["orig_pos", "mean_new_pos", "sd", "method"]
        assert set(written["method"]) == {"bal"}
