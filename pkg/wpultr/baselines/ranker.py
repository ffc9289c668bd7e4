"""Feed-forward ranking model f(q, d; Θ) over document features."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from wpultr.core.errors import ValidationError
from wpultr.core.mlp import MLP, as_tensor
from wpultr.core.models import ClickLog


@dataclass(frozen=True)
class TrainHyper:
    """Shared trainer settings (the ``baselines`` config section)."""
    steps: int = 2000
    batch_size: int = 256
    lr: float = 1e-3
    hidden: tuple[int, ...] = (64, 64)
    propensity_floor: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.steps < 0:
            raise ValidationError("baselines.steps must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("baselines.batch_size must be >= 1")
        if self.lr < 0:
            raise ValidationError("baselines.lr must be >= 0")
        if not 0 < self.propensity_floor <= 1:
            raise ValidationError("baselines.propensity_floor must be in (0, 1]")


class RankingModel:
    """Scores r̂ = f(q, d; Θ); documents are ranked by descending score."""

    def __init__(self, n_features: int, hidden: Sequence[int] = (64, 64), seed: int = 0):
        self.n_features = int(n_features)
        self.net = MLP(self.n_features, hidden, 1, seed=seed)

    def parameters(self) -> list[torch.nn.Parameter]:
        return list(self.net.parameters())

    def score_tensor(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features)[:, 0]

    def score(self, features) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64).reshape(-1, self.n_features)
        with torch.no_grad():
            return self.score_tensor(as_tensor(features)).numpy()

    def score_log(self, log: ClickLog) -> np.ndarray:
        """One score per record, in log order."""
        if log.doc_feature_dim != self.n_features:
            raise ValidationError(
                f"model expects {self.n_features} document features, log has {log.doc_feature_dim}"
            )
        return self.score([r.doc_features for r in log.records])

    def copy(self) -> "RankingModel":
        return RankingModel.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "net": self.net.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "RankingModel":
        net = MLP.from_dict(data["net"])
        model = cls(data["n_features"], net.sizes[1:-1])
        model.net = net
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RankingModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
