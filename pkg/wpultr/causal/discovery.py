"""End-to-end causal discovery on a design matrix: skeleton, orientation, bias report."""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from wpultr.causal.biases import BiasReport, classify_biases
from wpultr.causal.kci import DEFAULT_CAP
from wpultr.causal.orient import BackgroundKnowledge, orient
from wpultr.causal.pc import Skeleton, pc_skeleton
from wpultr.core.errors import ValidationError
from wpultr.core.graph import CausalGraph
from wpultr.core.models import CLICK, REL
from wpultr.preprocess.transform import DesignMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CausalConfig:
    """Discovery settings (the ``causal`` config section)."""
    alpha: float = 0.05
    cap: int = DEFAULT_CAP
    discovery_sample: int = 2000
    max_cond_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValidationError(f"causal.alpha must be in (0, 1), got {self.alpha}")
        if self.cap < 20:
            raise ValidationError("causal.cap must be >= 20")
        if self.discovery_sample < 20:
            raise ValidationError("causal.discovery_sample must be >= 20")


@dataclass(frozen=True)
class DiscoveryResult:
    graph: CausalGraph
    skeleton: Skeleton
    biases: BiasReport
    n_rows: int


def sample_rows(Z: DesignMatrix, size: int, seed: int) -> DesignMatrix:
    """Seeded subsample that does not depend on the incoming row order."""
    order = np.lexsort(Z.values.T[::-1])
    if Z.n_rows <= size:
        return Z.subset(order)
    rng = np.random.default_rng(seed)
    return Z.subset(order[np.sort(rng.choice(Z.n_rows, size=size, replace=False))])


def discover_graph(
    Z: DesignMatrix,
    config: CausalConfig | None = None,
    nodes: Sequence[str] | None = None,
    bk: BackgroundKnowledge | None = None,
    strict: bool = True,
    jobs: int = 1,
) -> DiscoveryResult:
    """
    Learn the click graph over ``nodes`` (default: every layout node).

    Rows are subsampled to ``config.discovery_sample``. Background knowledge
    defaults to the ULTR constraints.
    """
    config = config or CausalConfig()
    nodes = tuple(nodes) if nodes is not None else Z.layout.node_names
    for required in (REL, CLICK):
        if required not in nodes:
            raise ValidationError(f"discovery needs the {required} node")
    sample = sample_rows(Z, config.discovery_sample, config.seed)
    logger.info("Discovering over %s on %d rows", ", ".join(nodes), sample.n_rows)

    skeleton = pc_skeleton(
        sample, nodes,
        alpha=config.alpha, cap=config.cap, seed=config.seed,
        jobs=jobs, max_cond_size=config.max_cond_size,
    )
    graph = orient(skeleton, bk=bk, strict=strict)
    report = classify_biases(graph)
    if report.undirected:
        logger.info("Undirected edges left out of reweighting: %s", ", ".join(report.undirected))
    logger.info("Discovered %s", ", ".join(sorted(graph.edge_strings())) or "no edges")
    return DiscoveryResult(graph, skeleton, report, sample.n_rows)
