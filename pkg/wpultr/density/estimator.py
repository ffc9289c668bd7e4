"""
Masked-input conditional estimators p(target | parents).

Each estimator is an MLP over the full design row with every non-parent
column masked out, topped by a head matched to the target's type: gaussian
(mean, log-sd) for continuous and Bradley-Terry ordinal scores, categorical
logits for categorical codes, one bernoulli logit for clicks.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum as PyEnum
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from wpultr.core.errors import ValidationError
from wpultr.core.mlp import DTYPE, MLP, as_tensor
from wpultr.core.models import CLICK, FeatureKind
from wpultr.preprocess.transform import ColumnLayout, DesignMatrix

logger = logging.getLogger(__name__)

MIN_ROWS = 50
LOG_SD_BOUNDS = (-12.0, 12.0)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class HeadKind(PyEnum):
    """Output distribution of an estimator."""
    GAUSSIAN = "gaussian"
    CATEGORICAL = "categorical"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class FitHyper:
    """Optimizer settings (the ``density`` config section)."""
    hidden: tuple[int, ...] = (32, 32)
    lr: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 200
    grad_tol: float = 1e-6
    full_batch: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.lr <= 0:
            raise ValidationError("density.lr must be positive")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValidationError("density.batch_size must be >= 1 and max_epochs >= 0")


@dataclass
class FitReport:
    """Outcome of one fit; ``trace`` holds the mean log-likelihood after each epoch."""
    final_loglik: float
    epochs: int
    grad_norm: float
    trace: list[float] = field(default_factory=list)


def target_kind(Z: DesignMatrix, target: str) -> FeatureKind | None:
    """Declared kind of a design-matrix node; None for CLICK."""
    if target == CLICK:
        return None
    idx = Z.layout.indices([target])
    if len(idx) > 1 or "[" in Z.layout.columns[idx[0]]:
        return FeatureKind.CATEGORICAL
    if target in Z.codes:
        return FeatureKind.ORDINAL
    return FeatureKind.CONTINUOUS


def default_head(Z: DesignMatrix, target: str) -> HeadKind:
    kind = target_kind(Z, target)
    if kind is None:
        return HeadKind.BERNOULLI
    if kind is FeatureKind.CATEGORICAL:
        return HeadKind.CATEGORICAL
    return HeadKind.GAUSSIAN


def mask_input(row, parent_set: Sequence[str], layout: ColumnLayout) -> np.ndarray:
    """Copy of ``row`` with every non-parent column set to 0."""
    row = np.asarray(row, dtype=np.float64)
    mask = layout.mask(parent_set)
    return np.where(mask, row, 0.0)


class ConditionalEstimator:
    """A fitted (or freshly initialized) conditional distribution."""

    def __init__(
        self,
        target: str,
        parent_set: Sequence[str],
        head: HeadKind,
        layout: ColumnLayout,
        hidden: Sequence[int] = (32, 32),
        cardinality: int = 0,
        code_offset: int = 0,
        seed: int = 0,
        reference: Sequence[float] | None = None,
    ):
        self.target = target
        self.parent_set = tuple(n for n in layout.node_names if n in set(parent_set))
        self.head = HeadKind(head)
        self.layout = layout
        self.cardinality = int(cardinality)
        self.code_offset = int(code_offset)
        out_dim = {HeadKind.GAUSSIAN: 2, HeadKind.BERNOULLI: 1}.get(self.head, self.cardinality)
        self.net = MLP(layout.width, hidden, out_dim, layout.mask(self.parent_set), seed)
        self.reference = (
            np.zeros(layout.width) if reference is None else np.asarray(reference, dtype=np.float64)
        )

    def __repr__(self) -> str:
        parents = ", ".join(self.parent_set) or "∅"
        return f"ConditionalEstimator(p({self.target} | {parents}), head={self.head.value})"

    def parameters(self):
        return self.net.parameters()

    def target_values(self, Z: DesignMatrix) -> np.ndarray:
        """The observed target per row: codes for categorical heads, the column otherwise."""
        if self.head is HeadKind.CATEGORICAL:
            return Z.codes[self.target].astype(np.float64) - self.code_offset
        return Z.column(self.target)

    # ------------------------------------------------------------------
    # Likelihood
    # ------------------------------------------------------------------

    def log_prob_tensor(self, inputs: torch.Tensor, values: torch.Tensor) -> torch.Tensor:
        """Per-row log p(value | masked inputs); differentiable in inputs and parameters."""
        out = self.net(inputs)
        if self.head is HeadKind.GAUSSIAN:
            mean = out[:, 0]
            log_sd = out[:, 1].clamp(*LOG_SD_BOUNDS)
            return -0.5 * ((values - mean) * torch.exp(-log_sd)) ** 2 - log_sd - _HALF_LOG_2PI
        if self.head is HeadKind.BERNOULLI:
            logit = out[:, 0]
            return -F.binary_cross_entropy_with_logits(logit, values, reduction="none")
        log_probs = torch.log_softmax(out, dim=1)
        return log_probs.gather(1, values.long().unsqueeze(1)).squeeze(1)

    def log_prob_array(self, inputs, values) -> np.ndarray:
        inputs = as_tensor(np.atleast_2d(inputs))
        with torch.no_grad():
            return self.log_prob_tensor(inputs, as_tensor(np.atleast_1d(values))).numpy()

    def log_prob_matrix(self, Z: DesignMatrix) -> np.ndarray:
        return self.log_prob_array(Z.values, self.target_values(Z))

    def mean_log_likelihood(self, Z: DesignMatrix) -> torch.Tensor:
        """Mean log-likelihood over Z as a differentiable scalar."""
        values = as_tensor(self.target_values(Z))
        return self.log_prob_tensor(as_tensor(Z.values), values).mean()

    def predict(self, inputs) -> dict[str, np.ndarray]:
        """Distribution parameters per row."""
        with torch.no_grad():
            out = self.net(as_tensor(np.atleast_2d(inputs)))
        if self.head is HeadKind.GAUSSIAN:
            log_sd = out[:, 1].clamp(*LOG_SD_BOUNDS)
            return {"mean": out[:, 0].numpy(), "sd": torch.exp(log_sd).numpy()}
        if self.head is HeadKind.BERNOULLI:
            return {"p": torch.sigmoid(out[:, 0]).numpy()}
        return {"probs": torch.softmax(out, dim=1).numpy()}

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "parent_set": list(self.parent_set),
            "head": self.head.value,
            "cardinality": self.cardinality,
            "code_offset": self.code_offset,
            "layout": self.layout.to_dict(),
            "reference": [float(v) for v in self.reference],
            "net": self.net.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConditionalEstimator":
        net = MLP.from_dict(data["net"])
        est = cls(
            data["target"],
            data["parent_set"],
            HeadKind(data["head"]),
            ColumnLayout.from_dict(data["layout"]),
            hidden=net.sizes[1:-1],
            cardinality=data.get("cardinality", 0),
            code_offset=data.get("code_offset", 0),
            reference=data.get("reference"),
        )
        est.net = net
        return est


def log_prob(est: ConditionalEstimator, row, value=None) -> float:
    """
    Log density or mass of one row's target value.

    ``value`` defaults to the target column of ``row``; categorical targets
    need it passed explicitly (the row holds an embedding, not the code).
    """
    row = np.asarray(row, dtype=np.float64)
    if value is None:
        if est.head is HeadKind.CATEGORICAL:
            raise ValidationError(f"log_prob for categorical {est.target} needs the class code")
        value = row[est.layout.indices([est.target])[0]]
    else:
        value = value - est.code_offset if est.head is HeadKind.CATEGORICAL else value
    return float(est.log_prob_array(row, [value])[0])


def _check_head(Z: DesignMatrix, target: str, head: HeadKind) -> tuple[int, int]:
    kind = target_kind(Z, target)
    if head is HeadKind.BERNOULLI:
        if kind is not None:
            raise ValidationError(f"bernoulli head needs the CLICK target, got {target}")
        return 0, 0
    if kind is None:
        raise ValidationError(f"{target} is binary; use the bernoulli head")
    if head is HeadKind.CATEGORICAL:
        if kind is FeatureKind.CONTINUOUS:
            raise ValidationError(f"categorical head on continuous feature {target}")
        offset = 1 if kind is FeatureKind.ORDINAL else 0
        # levels absent from a fitting sample still need a logit
        observed = int(Z.codes[target].max()) + 1 - offset
        return max(Z.cardinalities.get(target, 0), observed), offset
    if kind is FeatureKind.CATEGORICAL:
        raise ValidationError(f"gaussian head on categorical feature {target}")
    return 0, 0


def fit(
    Z: DesignMatrix,
    target: str,
    parent_set: Sequence[str],
    head: HeadKind | str | None = None,
    hyper: FitHyper | None = None,
    cardinality: int | None = None,
) -> tuple[ConditionalEstimator, FitReport]:
    """
    Maximize the mean log-likelihood of ``target`` given ``parent_set``.

    Mini-batch mode uses Adam on seeded shuffles. Full-batch mode takes one
    L-BFGS iteration with a strong-Wolfe line search per epoch, so the trace
    does not decrease. Both stop early once the full-data gradient norm drops
    below ``hyper.grad_tol``.

    Raises:
        ValidationError: Fewer than 50 rows, target among its parents, or a
            head that does not fit the target's type.
    """
    hyper = hyper or FitHyper()
    head = default_head(Z, target) if head is None else HeadKind(head)
    if target in set(parent_set):
        raise ValidationError(f"{target} cannot be its own parent")
    if Z.n_rows < MIN_ROWS:
        raise ValidationError(f"fitting p({target} | ·) needs at least {MIN_ROWS} rows, got {Z.n_rows}")
    card, offset = _check_head(Z, target, head)
    if cardinality is not None:
        card = int(cardinality)

    est = ConditionalEstimator(
        target, parent_set, head, Z.layout, hyper.hidden, card, offset, hyper.seed,
        reference=Z.values.mean(axis=0),
    )
    inputs = as_tensor(Z.values)
    values = as_tensor(est.target_values(Z))
    params = list(est.parameters())
    n = Z.n_rows

    def full_objective() -> torch.Tensor:
        return -est.log_prob_tensor(inputs, values).mean()

    def grad_norm() -> float:
        grads = torch.autograd.grad(full_objective(), params)
        return float(torch.sqrt(sum((g ** 2).sum() for g in grads)))

    trace: list[float] = []
    epochs = 0
    norm = grad_norm()
    if hyper.full_batch:
        optimizer = torch.optim.LBFGS(params, lr=1.0, max_iter=1, line_search_fn="strong_wolfe")

        def closure():
            optimizer.zero_grad()
            loss = full_objective()
            loss.backward()
            return loss
    else:
        optimizer = torch.optim.Adam(params, lr=hyper.lr)
        generator = torch.Generator().manual_seed(hyper.seed)

    while epochs < hyper.max_epochs and norm >= hyper.grad_tol:
        if hyper.full_batch:
            optimizer.step(closure)
        else:
            order = torch.randperm(n, generator=generator)
            for start in range(0, n, hyper.batch_size):
                idx = order[start:start + hyper.batch_size]
                optimizer.zero_grad()
                loss = -est.log_prob_tensor(inputs[idx], values[idx]).mean()
                loss.backward()
                optimizer.step()
        epochs += 1
        with torch.no_grad():
            trace.append(-float(full_objective()))
        norm = grad_norm()

    with torch.no_grad():
        final = -float(full_objective())
    logger.debug("Fitted %r: loglik %.4f after %d epochs", est, final, epochs)
    return est, FitReport(final, epochs, norm, trace)


def fit_estimators(
    Z: DesignMatrix,
    targets: dict[str, Sequence[str]],
    hyper: FitHyper | None = None,
    heads: dict[str, HeadKind] | None = None,
    jobs: int = 1,
) -> dict[str, tuple[ConditionalEstimator, FitReport]]:
    """Fit one estimator per ``target -> parents`` entry; estimators share only Z."""
    heads = heads or {}
    names = sorted(targets)

    def run(name: str):
        return fit(Z, name, targets[name], heads.get(name), hyper)

    if jobs > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, names))
    else:
        results = [run(name) for name in names]
    return dict(zip(names, results))
