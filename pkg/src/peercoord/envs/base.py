"""Shared environment surface consumed by rollout verification and reasoners."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..errors import OutOfRangeAction


@dataclass(frozen=True)
class ActionSpace:
    low: float
    high: float
    discrete: bool = False

    def __post_init__(self):
        if self.high <= self.low:
            raise ValueError(f"empty action space [{self.low}, {self.high}]")

    def contains(self, action) -> bool:
        if self.discrete:
            return isinstance(action, (int,)) and self.low <= action <= self.high
        return self.low <= action <= self.high

    def clamp(self, action):
        if self.discrete:
            return int(min(max(round(action), self.low), self.high))
        return float(min(max(action, self.low), self.high))

    def require(self, action):
        if not self.contains(action):
            raise OutOfRangeAction(f"action {action!r} outside [{self.low}, {self.high}]")
        return action


@dataclass(frozen=True)
class EnvironmentSpec:
    """Objective, ranges, constraint sets, and reward parameters of a domain."""

    objective: str
    action_space: ActionSpace
    observation_bounds: Mapping[str, tuple]
    strict_rules: tuple
    viability_rules: tuple
    reward_params: Mapping[str, float] = field(default_factory=dict)
    targets: Mapping[str, float] = field(default_factory=dict)
