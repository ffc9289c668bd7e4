"""
Structural causal model for synthetic whole-page click logs.

Sampling order per query:
    true grade r  ->  logged score r̂ = r + noise  ->  rank by r̂
    ->  media type | bin(r̂)  ->  height | media  ->  max height of the page
    ->  click ~ Bernoulli(sigmoid(a*r + b*pos_score(rank) + d[media] + e*height_z + b0))

Each query draws from its own generator spawned from the run seed, so parallel
generation reproduces the serial output exactly.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit
from tqdm import tqdm

from wpultr.core.errors import ValidationError
from wpultr.core.graph import CausalGraph, Edge
from wpultr.core.models import (
    CLICK,
    REL,
    ClickLog,
    FeatureKind,
    FeatureSchema,
    FeatureSpec,
    ImpressionRecord,
    group_queries,
    quantize,
)

logger = logging.getLogger(__name__)

N_GRADES = 5
N_SCORE_BINS = 5
MEDIA_TYPES = ("text", "image", "video")
POSITION, MEDIA, HEIGHT, MAX_HEIGHT = "position", "media", "height", "max_height"
SUM_TOL = 1e-9


def pos_score(rank) -> np.ndarray:
    """Fixed exposure curve 1 / log2(rank + 1)."""
    return 1.0 / np.log2(np.asarray(rank, dtype=np.float64) + 1.0)


@dataclass(frozen=True)
class ClickCoefficients:
    """Coefficients of the click logit."""
    a_rel: float = 0.8
    b_pos: float = 1.5
    d_media: tuple[float, ...] = (0.0, 0.4, 0.8)
    e_height: float = 0.0
    b0: float = -3.0

    def __post_init__(self):
        object.__setattr__(self, "d_media", tuple(float(v) for v in self.d_media))

    @property
    def sepp_free(self) -> bool:
        return self.b_pos == 0 and self.e_height == 0 and len(set(self.d_media)) <= 1


@dataclass(frozen=True)
class ScmConfig:
    """Configuration of the click simulator."""
    n_queries: int = 2000
    docs_per_query: int = 10
    relevance_prior: tuple[float, ...] = (0.3, 0.3, 0.2, 0.12, 0.08)
    score_noise_sd: float = 1.0
    media_given_score: tuple[tuple[float, ...], ...] = (
        (0.70, 0.20, 0.10),
        (0.55, 0.30, 0.15),
        (0.40, 0.35, 0.25),
        (0.25, 0.40, 0.35),
        (0.10, 0.45, 0.45),
    )
    height_given_media: tuple[tuple[float, float], ...] = ((1.0, 0.25), (2.0, 0.4), (3.0, 0.5))
    click_coeffs: ClickCoefficients = field(default_factory=ClickCoefficients)
    seed: int = 0
    n_distractors: int = 4
    feature_noise_sd: float = 0.5
    media_feature_strength: float = 0.5
    sessions_zipf: float | None = None
    max_sessions: int = 20

    def __post_init__(self):
        object.__setattr__(self, "relevance_prior", tuple(float(p) for p in self.relevance_prior))
        object.__setattr__(
            self, "media_given_score", tuple(tuple(float(p) for p in row) for row in self.media_given_score)
        )
        object.__setattr__(
            self, "height_given_media", tuple((float(m), float(s)) for m, s in self.height_given_media)
        )
        if isinstance(self.click_coeffs, dict):
            object.__setattr__(self, "click_coeffs", ClickCoefficients(**self.click_coeffs))
        self._validate()

    def _validate(self) -> None:
        if self.n_queries < 0:
            raise ValidationError("scm.n_queries must be >= 0")
        if self.docs_per_query < 1:
            raise ValidationError("scm.docs_per_query must be >= 1")
        prior = np.asarray(self.relevance_prior)
        if prior.shape != (N_GRADES,) or (prior < 0).any() or abs(prior.sum() - 1.0) > SUM_TOL:
            raise ValidationError("scm.relevance_prior must be 5 probabilities summing to 1")
        if self.score_noise_sd < 0 or self.feature_noise_sd < 0:
            raise ValidationError("scm standard deviations must be >= 0")
        n_media = self.n_media
        if n_media < 2:
            raise ValidationError("scm.height_given_media needs at least 2 media types")
        if any(sd < 0 for _, sd in self.height_given_media):
            raise ValidationError("scm.height_given_media standard deviations must be >= 0")
        rows = np.asarray(self.media_given_score)
        if rows.shape != (N_SCORE_BINS, n_media):
            raise ValidationError(
                f"scm.media_given_score must be {N_SCORE_BINS}x{n_media}, got {rows.shape}"
            )
        if (rows < 0).any() or (np.abs(rows.sum(axis=1) - 1.0) > SUM_TOL).any():
            raise ValidationError("scm.media_given_score rows must be probability vectors")
        if len(self.click_coeffs.d_media) != n_media:
            raise ValidationError("scm.click_coeffs.d_media needs one entry per media type")
        if self.n_distractors < 0:
            raise ValidationError("scm.n_distractors must be >= 0")
        if self.sessions_zipf is not None and self.sessions_zipf <= 1:
            raise ValidationError("scm.sessions_zipf must be > 1")
        if self.max_sessions < 1:
            raise ValidationError("scm.max_sessions must be >= 1")

    @property
    def n_media(self) -> int:
        return len(self.height_given_media)

    @property
    def doc_feature_dim(self) -> int:
        return 1 + self.n_media + self.n_distractors

    def schema(self) -> FeatureSchema:
        return FeatureSchema((
            FeatureSpec(POSITION, FeatureKind.ORDINAL, max(2, self.docs_per_query)),
            FeatureSpec(MEDIA, FeatureKind.CATEGORICAL, self.n_media),
            FeatureSpec(HEIGHT, FeatureKind.CONTINUOUS),
            FeatureSpec(MAX_HEIGHT, FeatureKind.CONTINUOUS),
        ))


@dataclass
class GroundTruth:
    """The generating graph and per-record oracle quantities, aligned to log order."""
    graph: CausalGraph
    true_relevance: np.ndarray
    click_probabilities: np.ndarray
    click_function: str
    score_bin_edges: np.ndarray
    height_mean: float
    height_sd: float

    def expected_click_rate(self) -> float:
        if self.click_probabilities.size == 0:
            return 0.0
        return float(self.click_probabilities.mean())


def ground_truth_graph(config: ScmConfig) -> CausalGraph:
    """
    The DAG that generated the data.

    REL→CLICK, REL→position and height→max_height are always present; the
    remaining edges appear only when the corresponding parameter lets the
    parent change the child's distribution.
    """
    coeffs = config.click_coeffs
    edges = {Edge(REL, CLICK), Edge(REL, POSITION), Edge(HEIGHT, MAX_HEIGHT)}
    if len(set(config.media_given_score)) > 1:
        edges.add(Edge(REL, MEDIA))
    if len(set(config.height_given_media)) > 1:
        edges.add(Edge(MEDIA, HEIGHT))
    if coeffs.b_pos != 0:
        edges.add(Edge(POSITION, CLICK))
    if len(set(coeffs.d_media)) > 1:
        edges.add(Edge(MEDIA, CLICK))
    if coeffs.e_height != 0:
        edges.add(Edge(HEIGHT, CLICK))
    return CausalGraph((REL, CLICK, POSITION, MEDIA, HEIGHT, MAX_HEIGHT), edges)


def relevance_only_click_rate(config: ScmConfig) -> float:
    """Closed-form population click rate when no SEPP feature affects clicks."""
    coeffs = config.click_coeffs
    if not coeffs.sepp_free:
        raise ValidationError("closed-form click rate needs zero SEPP click coefficients")
    grades = np.arange(N_GRADES, dtype=np.float64)
    d0 = coeffs.d_media[0] if coeffs.d_media else 0.0
    logits = coeffs.a_rel * grades + d0 + coeffs.b0
    return float(np.dot(np.asarray(config.relevance_prior), expit(logits)))


@dataclass
class _QueryDraw:
    rng: np.random.Generator
    n_sessions: int
    grades: np.ndarray
    scores: np.ndarray
    ranks: np.ndarray = None
    media: np.ndarray = None
    heights: np.ndarray = None
    doc_features: np.ndarray = None


def _width(n: int) -> int:
    return max(5, len(str(max(n - 1, 0))))


class _Generator:
    """Runs the three sampling phases over all queries."""

    def __init__(self, config: ScmConfig, jobs: int = 1, progress: bool = False):
        self.config = config
        self.jobs = max(1, int(jobs))
        self.progress = progress

    def _map(self, fn, items: Sequence, desc: str) -> list:
        if self.jobs == 1:
            return [fn(item) for item in tqdm(items, desc=desc, disable=not self.progress)]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(tqdm(pool.map(fn, items), total=len(items), desc=desc,
                             disable=not self.progress))

    def _relevance(self, rng: np.random.Generator) -> _QueryDraw:
        cfg = self.config
        n_sessions = 1
        if cfg.sessions_zipf is not None:
            n_sessions = int(min(cfg.max_sessions, rng.zipf(cfg.sessions_zipf)))
        grades = rng.choice(N_GRADES, size=cfg.docs_per_query, p=np.asarray(cfg.relevance_prior))
        noise = rng.normal(0.0, cfg.score_noise_sd, size=cfg.docs_per_query)
        scores = np.array([quantize(v) for v in grades + noise])
        return _QueryDraw(rng, n_sessions, grades.astype(np.int64), scores)

    def _presentation(self, draw: _QueryDraw, edges: np.ndarray) -> _QueryDraw:
        cfg, rng = self.config, draw.rng
        n = cfg.docs_per_query
        order = np.lexsort((np.arange(n), -draw.scores))
        ranks = np.empty(n, dtype=np.int64)
        ranks[order] = np.arange(1, n + 1)

        bins = np.searchsorted(edges, draw.scores, side="right")
        cumulative = np.cumsum(np.asarray(cfg.media_given_score)[bins], axis=1)
        u = rng.random(n)
        media = np.minimum((u[:, None] >= cumulative).sum(axis=1), cfg.n_media - 1)

        params = np.asarray(cfg.height_given_media)
        heights = rng.normal(params[media, 0], params[media, 1])
        heights = np.array([quantize(v) for v in heights])

        one_hot = np.eye(cfg.n_media)[media] * cfg.media_feature_strength
        features = np.column_stack([
            draw.scores + rng.normal(0.0, cfg.feature_noise_sd, size=n),
            one_hot + rng.normal(0.0, cfg.feature_noise_sd, size=(n, cfg.n_media)),
            rng.normal(0.0, 1.0, size=(n, cfg.n_distractors)),
        ])
        draw.ranks, draw.media, draw.heights = ranks, media, heights
        draw.doc_features = np.vectorize(quantize)(features) if features.size else features
        return draw

    def run(self) -> tuple[ClickLog, GroundTruth]:
        cfg = self.config
        coeffs = cfg.click_coeffs
        schema = cfg.schema()
        graph = ground_truth_graph(cfg)
        children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_queries)
        rngs = [np.random.default_rng(child) for child in children]

        draws = self._map(self._relevance, rngs, "relevance")
        if draws:
            all_scores = np.concatenate([d.scores for d in draws])
            edges = np.quantile(all_scores, np.linspace(0, 1, N_SCORE_BINS + 1)[1:-1])
        else:
            edges = np.zeros(N_SCORE_BINS - 1)
        draws = self._map(lambda d: self._presentation(d, edges), draws, "presentation")

        if draws:
            weights = np.concatenate([np.full(cfg.docs_per_query, d.n_sessions) for d in draws])
            heights = np.concatenate([d.heights for d in draws])
            height_mean = float(np.average(heights, weights=weights))
            height_sd = float(np.sqrt(np.average((heights - height_mean) ** 2, weights=weights)))
        else:
            height_mean, height_sd = 0.0, 0.0

        width = _width(cfg.n_queries)
        doc_width = max(2, len(str(cfg.docs_per_query - 1)))
        d_media = np.asarray(coeffs.d_media)

        def emit(item):
            qi, draw = item
            query_id = f"q{qi:0{width}d}"
            height_z = (draw.heights - height_mean) / height_sd if height_sd > 0 else 0.0 * draw.heights
            logits = (coeffs.a_rel * draw.grades + coeffs.b_pos * pos_score(draw.ranks)
                      + d_media[draw.media] + coeffs.e_height * height_z + coeffs.b0)
            probs = expit(logits)
            max_height = float(draw.heights.max())
            clicks = draw.rng.random((draw.n_sessions, cfg.docs_per_query)) < probs
            records, oracle = [], []
            by_rank = np.argsort(draw.ranks)
            for session in range(draw.n_sessions):
                for j in by_rank:
                    records.append(ImpressionRecord(
                        query_id=query_id,
                        doc_id=f"{query_id}-d{j:0{doc_width}d}",
                        rank_position=int(draw.ranks[j]),
                        sepp_values={
                            POSITION: int(draw.ranks[j]),
                            MEDIA: int(draw.media[j]),
                            HEIGHT: float(draw.heights[j]),
                            MAX_HEIGHT: max_height,
                        },
                        doc_features=tuple(float(v) for v in draw.doc_features[j]),
                        click=int(clicks[session, j]),
                        true_relevance=int(draw.grades[j]),
                        session_id=session,
                        logged_score=float(draw.scores[j]),
                    ))
                    oracle.append(float(probs[j]))
            return records, oracle

        emitted = self._map(emit, list(enumerate(draws)), "clicks")
        records = [r for chunk, _ in emitted for r in chunk]
        probabilities = np.array([p for _, chunk in emitted for p in chunk], dtype=np.float64)
        log = group_queries(records, schema, doc_feature_dim=cfg.doc_feature_dim)
        truth = GroundTruth(
            graph=graph,
            true_relevance=np.array([r.true_relevance for r in records], dtype=np.int64),
            click_probabilities=probabilities,
            click_function=(
                f"sigmoid({coeffs.a_rel}*r + {coeffs.b_pos}/log2(rank+1) + d_media[media] "
                f"+ {coeffs.e_height}*height_z + {coeffs.b0}), d_media={list(coeffs.d_media)}"
            ),
            score_bin_edges=edges,
            height_mean=height_mean,
            height_sd=height_sd,
        )
        logger.info("Simulated %d impressions over %d queries", len(log), cfg.n_queries)
        return log, truth


def generate(config: ScmConfig, jobs: int = 1, progress: bool = False) -> tuple[ClickLog, GroundTruth]:
    """
    Simulate a biased click log and its ground truth.

    Deterministic in ``config.seed``; ``jobs`` only changes wall time.
    ``max_height`` is a per-page constant: every impression of a query
    carries the largest height over that query's displayed list.
    """
    return _Generator(config, jobs, progress).run()
