"""Z-scoring for continuous SEPP features."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Standardizer:
    """Population mean and sd; a zero sd maps every value to 0."""
    mean: float
    sd: float

    @classmethod
    def fit(cls, values) -> "Standardizer":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return cls(0.0, 0.0)
        if np.ptp(values) == 0:
            return cls(float(values[0]), 0.0)
        return cls(float(values.mean()), float(values.std()))

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.sd <= 0:
            return np.zeros_like(values)
        return (values - self.mean) / self.sd

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd}

    @classmethod
    def from_dict(cls, data: dict) -> "Standardizer":
        return cls(float(data["mean"]), float(data["sd"]))
