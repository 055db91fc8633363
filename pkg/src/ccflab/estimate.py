"""Result containers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_samples: int
    n_discarded: int = 0
    seed: int | None = None
    method: str = ""

    def __post_init__(self):
        if not (self.stderr >= 0 or math.isnan(self.stderr)):
            raise ValueError("stderr must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentReport:
    """Checkpointed statistic with a verdict against a declared criterion."""

    name: str
    checkpoints: list = field(default_factory=list)  # (N, statistic, (lo, hi))
    verdict: bool | None = None
    criterion: str = ""
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add(self, n, stat, ci=(math.nan, math.nan)):
        if self.checkpoints and n < self.checkpoints[-1][0]:
            raise ValueError("checkpoints must be monotone in N")
        self.checkpoints.append((n, stat, tuple(ci)))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "checkpoints": [[n, s, list(ci)] for n, s, ci in self.checkpoints],
            "verdict": self.verdict,
            "criterion": self.criterion,
            "config": self.config,
            "extra": self.extra,
        }
