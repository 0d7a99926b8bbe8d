"""Pluggable per-agent reasoning interface.

Every implementation supplies the five decision operations (propose own
action, propose neighbor actions, predict the next observation, assess a
proposal conflict, revise the strategy). The framework additionally calls two
hooks with safe defaults: `revise_action` for the conservative retreat
between rollout attempts and `trend_action` to express the aggregate
neighborhood trend in action units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from ..meanfield import MeanFieldStats, PartitionedStats
from ..negotiation import ConfidenceWeights


@dataclass(frozen=True)
class Strategy:
    """Long-horizon plan (parameter set + directives) plus spatial context."""

    temporal_params: Mapping[str, float]
    temporal_directives: tuple = ()
    spatial_directives: tuple = ()
    field_summary: PartitionedStats | None = None
    param_bounds: Mapping[str, tuple] = field(default_factory=dict)

    def param(self, name: str) -> float:
        return self.temporal_params[name]

    def with_params(self, **updates) -> "Strategy":
        params = dict(self.temporal_params)
        for name, value in updates.items():
            lo, hi = self.param_bounds.get(name, (-float("inf"), float("inf")))
            params[name] = min(max(value, lo), hi)
        return Strategy(
            temporal_params=params,
            temporal_directives=self.temporal_directives,
            spatial_directives=self.spatial_directives,
            field_summary=self.field_summary,
            param_bounds=self.param_bounds,
        )

    def with_spatial(self, directives: tuple, summary: PartitionedStats | None) -> "Strategy":
        return Strategy(
            temporal_params=self.temporal_params,
            temporal_directives=self.temporal_directives,
            spatial_directives=directives,
            field_summary=summary,
            param_bounds=self.param_bounds,
        )


@dataclass(frozen=True)
class ConflictAssessment:
    deal: bool
    weights: ConfidenceWeights | None
    updated_spatial: Strategy | None
    rationale: str = ""

    def __post_init__(self):
        if not self.deal and self.weights is None:
            raise ValueError("conflicting assessments must carry confidence weights")


def conflict_weights(merged: MeanFieldStats | None) -> ConfidenceWeights:
    """Default trust split when proposals conflict.

    Own action keeps 0.6. The remaining 0.4 is split by how noisy the
    aggregate field looks: high variance moves trust from the statistical
    trend toward the neighbors' concrete proposals.
    """
    if merged is None or merged.is_empty:
        noise = 0.0
    else:
        v = merged.max_var
        noise = v / (1.0 + v)
    return ConfidenceWeights(0.6, 0.4 * noise, 0.4 * (1.0 - noise))


class Reasoner:
    """Interface; concrete reasoners are deterministic or LLM-backed."""

    def propose_action(self, obs, strategy: Strategy, mf: PartitionedStats | None):
        raise NotImplementedError

    def propose_neighbor_actions(self, obs, strategy: Strategy, self_action) -> dict:
        raise NotImplementedError

    def predict_next_observation(self, obs, joint_actions: Mapping):
        raise NotImplementedError

    def assess_conflict(
        self, own, neighbor_proposals: list, mf: PartitionedStats, strategy: Strategy
    ) -> ConflictAssessment:
        raise NotImplementedError

    def revise_strategy(self, strategy: Strategy, signal) -> Strategy:
        raise NotImplementedError

    # --- framework hooks ---

    def revise_action(self, action, verdict, attempt: int):
        """More conservative variant of a rejected action; default keeps it."""
        return action

    def trend_action(self, obs, merged: MeanFieldStats | None):
        """Aggregate-field trend in action units; None means no opinion."""
        return None
