"""
The full training loop: naive warm start, periodic causal discovery,
influence-estimator refits, reweighted click-head updates and blocked
ranker updates.

Method variants differ only in how the graph is obtained and which SEPP
features take part:

    bal      discovered graph over every SEPP feature
    pb-bal   predefined graph REL→position→CLICK, REL→CLICK
    fb-bal   fully biased graph: REL→x and x→CLICK for every feature x
    bal-pos  discovery restricted to position
    bal-mm   discovery restricted to the media type
"""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from wpultr import __version__
from wpultr.baselines.naive import BatchSampler, train_pointwise
from wpultr.baselines.ranker import RankingModel, TrainHyper
from wpultr.causal.biases import BiasReport, classify_biases
from wpultr.causal.discovery import CausalConfig, discover_graph, sample_rows
from wpultr.causal.snapshots import SNAPSHOT_FILE, SnapshotStream, graph_snapshot
from wpultr.core.errors import ValidationError
from wpultr.core.graph import CausalGraph, Edge
from wpultr.core.models import CLICK, REL, ClickLog
from wpultr.density.estimator import ConditionalEstimator, FitHyper, HeadKind, fit
from wpultr.preprocess.transform import DesignMatrix, FittedTransforms, PreprocessConfig, fit_transforms
from wpultr.unbias.loss import BLOCKING_MODES, blocked_update, update_click_head
from wpultr.unbias.weights import DEFAULT_CLIP, WeightVector, feature_weights, total_weight

logger = logging.getLogger(__name__)

POSITION = "position"
MEDIA = "media"

BAL_METHODS = ("bal", "pb-bal", "fb-bal", "bal-pos", "bal-mm")
GRAPH_MODES = ("discover", "predefined", "fully-biased")


@dataclass(frozen=True)
class BalConfig:
    """Settings of the debiasing loop (the ``unbias`` config section plus sub-sections)."""
    steps: int = 2000
    batch_size: int = 256
    lr_click: float = 1e-3
    lr_rank: float = 1e-3
    discovery_period: int = 500
    discovery_sample: int = 2000
    clip: tuple[float, float] = DEFAULT_CLIP
    warm_start_steps: int | None = None
    hidden: tuple[int, ...] = (64, 64)
    blocking: str = "reference"
    graph_mode: str = "discover"
    sepp_nodes: tuple[str, ...] | None = None
    seed: int = 0
    jobs: int = 1
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    causal: CausalConfig = field(default_factory=CausalConfig)
    density: FitHyper = field(default_factory=FitHyper)

    def __post_init__(self):
        object.__setattr__(self, "clip", tuple(float(c) for c in self.clip))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.sepp_nodes is not None:
            object.__setattr__(self, "sepp_nodes", tuple(self.sepp_nodes))
        if self.discovery_period < 1:
            raise ValidationError("unbias.discovery_period must be >= 1")
        low, high = self.clip
        if not 0 < low <= 1 <= high:
            raise ValidationError(f"unbias.clip must satisfy 0 < low <= 1 <= high, got {self.clip}")
        if self.steps < 0 or self.batch_size < 2:
            raise ValidationError("unbias.steps must be >= 0 and batch_size >= 2")
        if self.warm_start_steps is not None and not 0 <= self.warm_start_steps <= self.steps:
            raise ValidationError("unbias.warm_start_steps must be within [0, steps]")
        if self.blocking not in BLOCKING_MODES:
            raise ValidationError(f"unbias.blocking must be one of {BLOCKING_MODES}")
        if self.graph_mode not in GRAPH_MODES:
            raise ValidationError(f"unbias.graph_mode must be one of {GRAPH_MODES}")

    @property
    def warm_steps(self) -> int:
        if self.warm_start_steps is not None:
            return self.warm_start_steps
        return self.steps // 10

    def to_dict(self) -> dict:
        data = asdict(self)
        data["clip"] = list(self.clip)
        data["hidden"] = list(self.hidden)
        data["sepp_nodes"] = None if self.sepp_nodes is None else list(self.sepp_nodes)
        return data


def config_for_method(method: str, config: BalConfig) -> BalConfig:
    """The BalConfig a BAL method variant runs with."""
    if method == "bal":
        return config
    if method == "pb-bal":
        return replace(config, graph_mode="predefined")
    if method == "fb-bal":
        return replace(config, graph_mode="fully-biased")
    if method == "bal-pos":
        return replace(config, sepp_nodes=(POSITION,))
    if method == "bal-mm":
        return replace(config, sepp_nodes=(MEDIA,))
    raise ValidationError(f"unknown BAL method {method!r}; expected one of {BAL_METHODS}")


def predefined_graph(nodes: Sequence[str]) -> CausalGraph:
    """REL→position, position→CLICK, REL→CLICK."""
    if POSITION not in nodes:
        raise ValidationError("the predefined graph needs a position feature")
    return CausalGraph(tuple(nodes), {Edge(REL, POSITION), Edge(POSITION, CLICK), Edge(REL, CLICK)})


def fully_biased_graph(nodes: Sequence[str]) -> CausalGraph:
    """REL→x and x→CLICK for every SEPP feature x, plus REL→CLICK."""
    edges = {Edge(REL, CLICK)}
    for x in nodes:
        if x not in (REL, CLICK):
            edges |= {Edge(REL, x), Edge(x, CLICK)}
    return CausalGraph(tuple(nodes), edges)


@dataclass
class RunArtifacts:
    """Everything a training run leaves behind besides the ranker."""
    snapshots: SnapshotStream = field(default_factory=SnapshotStream)
    weight_stats: list[dict] = field(default_factory=list)
    losses: list[dict] = field(default_factory=list)
    click_head: ConditionalEstimator | None = None
    transforms: FittedTransforms | None = None
    bias_report: BiasReport | None = None
    graph: CausalGraph | None = None
    config: dict = field(default_factory=dict)
    method: str = "bal"
    started: str = ""
    finished: str = ""

    def metadata(self, command: str = "train") -> dict:
        return {
            "package": "wpultr",
            "version": __version__,
            "command": command,
            "method": self.method,
            "started": self.started,
            "finished": self.finished,
            "snapshots": [{"step": s, "time": t} for s, t in self.snapshots.timestamps],
        }

    def write(self, out_dir: str | Path, ranker: RankingModel | None = None,
              command: str = "train") -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if self.snapshots.lines:
            text = "".join(line + "\n" for line in self.snapshots.lines)
            (out / SNAPSHOT_FILE).write_text(text, encoding="utf-8")
        if self.weight_stats:
            pd.DataFrame(self.weight_stats).to_csv(
                out / "weights_stats.csv", index=False, float_format="%.9g", lineterminator="\n"
            )
        pd.DataFrame(self.losses, columns=["step", "phase", "loss"]).to_csv(
            out / "loss.csv", index=False, float_format="%.9g", lineterminator="\n"
        )
        if ranker is not None:
            ranker.save(out / "ranker.json")
        if self.click_head is not None:
            _write_json(out / "click_head.json", self.click_head.to_dict())
        if self.transforms is not None:
            self.transforms.save(out / "transforms.json")
        if self.bias_report is not None:
            _write_json(out / "bias_report.json", self.bias_report.to_dict())
        if self.graph is not None:
            _write_json(out / "graph.json", self.graph.to_dict())
        if self.config:
            _write_json(out / "config.json", self.config)
        _write_json(out / "metadata.json", self.metadata(command))
        return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class BalTrainer:
    """Runs one debiasing training loop over a click log."""

    def __init__(self, log: ClickLog, config: BalConfig, progress: bool = False):
        if config.sepp_nodes is not None:
            unknown = set(config.sepp_nodes) - set(log.schema.names)
            if unknown:
                raise ValidationError(f"SEPP feature(s) {sorted(unknown)} not in the log schema")
            log = log.restrict_schema(config.sepp_nodes)
        if len(log) < 2:
            raise ValidationError("training needs at least 2 impressions")
        self.log = log
        self.config = config
        self.progress = progress
        self.transforms = fit_transforms(log, replace(config.preprocess, seed=config.seed))
        self.use_logged = log.has_logged_scores
        if not self.use_logged:
            logger.info("Log has no logged scores; REL follows the ranker being trained")
        placeholder = np.zeros(len(log))
        self.Z = self.transforms.apply(log, None if self.use_logged else placeholder)

        self.ranker = RankingModel(log.doc_feature_dim, config.hidden, config.seed)
        self.rank_optimizer = torch.optim.Adam(self.ranker.parameters(), lr=config.lr_rank)
        self.artifacts = RunArtifacts(transforms=self.transforms)

        self.graph: CausalGraph | None = None
        self.influence: dict[str, ConditionalEstimator] = {}
        self.click_head: ConditionalEstimator | None = None
        self.click_optimizer: torch.optim.Optimizer | None = None

    # ------------------------------------------------------------------

    def _design(self, rows=None) -> DesignMatrix:
        Z = self.Z if rows is None else self.Z.subset(rows)
        if self.use_logged:
            return Z
        return Z.with_rel(self.ranker.score(Z.doc_features))

    def _graph_for(self, Z: DesignMatrix, step: int) -> CausalGraph:
        nodes = Z.layout.node_names
        if self.config.graph_mode == "predefined":
            return predefined_graph(nodes)
        if self.config.graph_mode == "fully-biased":
            return fully_biased_graph(nodes)
        causal = replace(
            self.config.causal,
            discovery_sample=self.config.discovery_sample,
            seed=self.config.seed + step,
        )
        return discover_graph(Z, causal, strict=False, jobs=self.config.jobs).graph

    def refresh(self, step: int) -> None:
        """Re-learn the graph and refit estimators on a fresh discovery sample."""
        Z_all = self._design()
        graph = self._graph_for(Z_all, step)
        graph_snapshot(graph, step, self.artifacts.snapshots)
        report = classify_biases(graph)
        sample = sample_rows(Z_all, self.config.discovery_sample, self.config.seed + step)
        density = replace(self.config.density, seed=self.config.seed + step)

        self.influence = {}
        for x in report.confounded_features:
            est, _ = fit(sample, x, graph.parents(x), None, density)
            self.influence[x] = est
        logger.info("Step %d: graph %s; reweighting %s", step,
                    ", ".join(sorted(graph.edge_strings())),
                    ", ".join(report.confounded_features) or "nothing")

        click_parents = graph.parents(CLICK)
        if self.click_head is None or set(click_parents) != set(self.click_head.parent_set):
            head_sample = sample.with_rel(self.ranker.score(sample.doc_features))
            self.click_head, _ = fit(head_sample, CLICK, click_parents, HeadKind.BERNOULLI, density)
            self.click_optimizer = torch.optim.Adam(
                self.click_head.parameters(), lr=self.config.lr_click
            )
            logger.info("Step %d: click head refit on parents %s", step, ", ".join(click_parents))
        self.click_head.reference = sample.values.mean(axis=0)

        self.graph = graph
        self.artifacts.graph = graph
        self.artifacts.bias_report = report

    def batch_weights(self, Z: DesignMatrix) -> WeightVector:
        vectors = [feature_weights(self.influence[x], Z, self.config.clip)
                   for x in sorted(self.influence)]
        return total_weight(vectors, self.config.clip, n=Z.n_rows)

    def run(self) -> tuple[RankingModel, RunArtifacts]:
        config = self.config
        self.artifacts.started = _now()
        warm = config.warm_steps
        warm_trace: list[float] = []
        warm_hyper = TrainHyper(
            steps=warm, batch_size=config.batch_size, lr=config.lr_rank,
            hidden=config.hidden, seed=config.seed,
        )
        train_pointwise(self.log, np.ones(len(self.log)), warm_hyper, model=self.ranker,
                        progress=self.progress, trace=warm_trace, desc="warm start")
        self.artifacts.losses.extend(
            {"step": i, "phase": "warm", "loss": v} for i, v in enumerate(warm_trace)
        )

        sampler = BatchSampler(len(self.log), config.batch_size, config.seed + 1)
        for step in tqdm(range(warm, config.steps), desc="bal", disable=not self.progress):
            if (step - warm) % config.discovery_period == 0:
                self.refresh(step)
            rows = sampler.next()
            Z = self._design(rows.numpy())
            weights = self.batch_weights(Z)
            rel = self.ranker.score(Z.doc_features)
            click_loss = update_click_head(self.click_head, Z, weights, self.click_optimizer, rel)
            blocked = blocked_update(self.ranker, self.click_head, Z, weights, config.lr_rank,
                                     config.blocking, self.rank_optimizer)
            self.artifacts.weight_stats.append({"step": step, **weights.stats()})
            self.artifacts.losses.append({"step": step, "phase": "click", "loss": click_loss})
            self.artifacts.losses.append({"step": step, "phase": "rank", "loss": blocked.loss})

        self.artifacts.click_head = self.click_head
        self.artifacts.config = config.to_dict()
        self.artifacts.finished = _now()
        return self.ranker, self.artifacts


def train_bal(
    log: ClickLog, config: BalConfig | None = None, progress: bool = False
) -> tuple[RankingModel, RunArtifacts]:
    """Train a ranker with causal reweighting and gradient blocking."""
    config = config or BalConfig()
    logger.info("Training BAL (%s graph): %d steps, %d warm", config.graph_mode,
                config.steps, config.warm_steps)
    return BalTrainer(log, config, progress).run()
