"""Shared fixtures: tiny hand-built logs and small simulated ones."""

import numpy as np
import pytest

from wpultr.core.models import (
    FeatureKind,
    FeatureSchema,
    FeatureSpec,
    ImpressionRecord,
    group_queries,
)
from wpultr.simulate import ScmConfig, generate

SCHEMA = FeatureSchema((
    FeatureSpec("position", FeatureKind.ORDINAL, 3),
    FeatureSpec("media", FeatureKind.CATEGORICAL, 2),
    FeatureSpec("height", FeatureKind.CONTINUOUS),
))


def make_record(query_id="q1", doc_id="d1", rank=1, click=0, media=0, height=1.0,
                grade=None, bucket=None, session=0, score=None, features=(0.0, 0.0)):
    return ImpressionRecord(
        query_id=query_id,
        doc_id=doc_id,
        rank_position=rank,
        sepp_values={"position": rank, "media": media, "height": height},
        doc_features=features,
        click=click,
        true_relevance=grade,
        query_frequency_bucket=bucket,
        session_id=session,
        logged_score=score,
    )


def make_log(n_queries=3, docs=3, graded=True, scored=True):
    records = []
    for q in range(n_queries):
        for k in range(docs):
            records.append(make_record(
                query_id=f"q{q}",
                doc_id=f"q{q}-d{k}",
                rank=k + 1,
                click=int(k == q % docs),
                media=k % 2,
                height=1.0 + 0.5 * k,
                grade=(docs - k) % 5 if graded else None,
                score=float(docs - k) if scored else None,
                features=(float(docs - k), float(k % 2)),
            ))
    return group_queries(records, SCHEMA)


@pytest.fixture
def schema():
    return SCHEMA


@pytest.fixture
def tiny_log():
    return make_log()


@pytest.fixture(scope="session")
def small_config():
    return ScmConfig(n_queries=60, docs_per_query=5, seed=11, n_distractors=2)


@pytest.fixture(scope="session")
def simulated(small_config):
    """(log, truth) for 300 impressions; shared, never mutated."""
    return generate(small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
