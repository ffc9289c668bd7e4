"""Feed-forward tanh network shared by density estimators and rankers."""

import math
from typing import Sequence

import numpy as np
import torch
from torch import nn

DTYPE = torch.float64


def as_tensor(values) -> torch.Tensor:
    if isinstance(values, torch.Tensor):
        return values.to(DTYPE)
    return torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE)


class MLP(nn.Module):
    """
    Fully connected network with tanh hidden layers and a linear output.

    An optional boolean ``input_mask`` zeroes masked inputs and the matching
    first-layer weight columns, so masked columns never reach the output and
    never receive gradient.
    """

    def __init__(
        self,
        in_dim: int,
        hidden: Sequence[int] = (32, 32),
        out_dim: int = 1,
        input_mask: Sequence[bool] | None = None,
        seed: int = 0,
    ):
        super().__init__()
        self.sizes = [int(in_dim), *(int(h) for h in hidden), int(out_dim)]
        generator = torch.Generator().manual_seed(int(seed))

        mask = torch.ones(in_dim, dtype=torch.bool)
        if input_mask is not None:
            mask = torch.as_tensor(list(input_mask), dtype=torch.bool)
            if mask.numel() != in_dim:
                raise ValueError(f"input mask has {mask.numel()} entries, expected {in_dim}")
        self.register_buffer("input_mask", mask)

        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            scale = 1.0 / math.sqrt(max(fan_in, 1))
            weight = torch.randn(fan_out, fan_in, generator=generator, dtype=DTYPE) * scale
            self.weights.append(nn.Parameter(weight))
            self.biases.append(nn.Parameter(torch.zeros(fan_out, dtype=DTYPE)))
        with torch.no_grad():
            self.weights[0].mul_(self._mask_row())

    def _mask_row(self) -> torch.Tensor:
        return self.input_mask.to(DTYPE).unsqueeze(0)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.where(self.input_mask, x, torch.zeros((), dtype=DTYPE))
        last = len(self.weights) - 1
        for i, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            if i == 0:
                weight = weight * self._mask_row()
            h = h @ weight.T + bias
            if i < last:
                h = torch.tanh(h)
        return h

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "activation": "tanh",
            "input_mask": [bool(v) for v in self.input_mask.tolist()],
            "weights": [w.detach().tolist() for w in self.weights],
            "biases": [b.detach().tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MLP":
        sizes = data["sizes"]
        net = cls(sizes[0], sizes[1:-1], sizes[-1], input_mask=data.get("input_mask"))
        with torch.no_grad():
            for param, values in zip(net.weights, data["weights"]):
                param.copy_(torch.as_tensor(values, dtype=DTYPE).reshape(param.shape))
            for param, values in zip(net.biases, data["biases"]):
                param.copy_(torch.as_tensor(values, dtype=DTYPE).reshape(param.shape))
        return net
