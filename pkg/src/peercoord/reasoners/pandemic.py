"""Deterministic pandemic reasoner: threshold regulation policy."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Mapping

from ..envs.pandemic import CONTACT_SCALE, PandemicEnv, PandemicObservation
from ..meanfield import MeanFieldStats, PartitionedStats
from ..negotiation import ConsensusConfig, check_consensus, consensus_delta
from .base import ConflictAssessment, Reasoner, Strategy, conflict_weights

DEFAULT_THRESHOLDS = {"escalate_at": 0.01, "deescalate_at": 0.001}
THRESHOLD_BOUNDS = {"escalate_at": (0.0005, 0.1), "deescalate_at": (0.00005, 0.01)}


def default_pandemic_strategy() -> Strategy:
    return Strategy(
        temporal_params=dict(DEFAULT_THRESHOLDS),
        temporal_directives=(
            "tighten one level while local infections cross the alert fraction",
            "relax once infections fall low enough",
        ),
        spatial_directives=("align regulation with neighboring facilities",),
        param_bounds=dict(THRESHOLD_BOUNDS),
    )


def _policy_level(current: int, fraction: float, escalate_at: float, deescalate_at: float) -> int:
    if fraction == 0.0:
        return 0
    if fraction > escalate_at:
        return min(4, current + 1)
    if fraction < deescalate_at:
        return max(0, current - 1)
    return current


class PandemicReasoner(Reasoner):
    """One-level-at-a-time escalation on the locally observed infected fraction."""

    def __init__(self, env: PandemicEnv, consensus: ConsensusConfig, neighbor_ids=()):
        self.env = env
        self.consensus = consensus
        self.neighbor_ids = tuple(sorted(neighbor_ids))

    def propose_action(self, obs: PandemicObservation, strategy: Strategy, mf=None) -> int:
        return _policy_level(
            obs.level,
            obs.infected_fraction,
            strategy.param("escalate_at"),
            strategy.param("deescalate_at"),
        )

    def propose_neighbor_actions(
        self, obs: PandemicObservation, strategy: Strategy, self_action: int
    ) -> dict:
        # alignment: suggest the level this node chose for itself
        return {m: int(self_action) for m in self.neighbor_ids}

    def predict_next_observation(
        self, obs: PandemicObservation, joint_actions: Mapping
    ) -> PandemicObservation:
        """Local compartment update; unseen neighbor pressure enters as zero."""
        p = self.env.params
        level = int(joint_actions.get(obs.agent, obs.level))
        contact = CONTACT_SCALE[level]
        pop = max(obs.population, 1.0)
        prob = 1.0 - math.exp(-p.transmission_rate * contact * obs.infected / pop)
        new_inf = obs.susceptible * prob
        exits_i = obs.infected * p.infectious_exit
        to_critical = exits_i * p.critical_fraction
        exits_c = obs.critical * p.critical_exit
        deaths = exits_c * p.death_fraction
        return replace(
            obs,
            day=obs.day + 1,
            susceptible=obs.susceptible - new_inf,
            infected=obs.infected + new_inf - exits_i,
            critical=obs.critical + to_critical - exits_c,
            dead=obs.dead + deaths,
            recovered=obs.recovered + (exits_i - to_critical) + (exits_c - deaths),
            level=level,
        )

    def assess_conflict(
        self, own, neighbor_proposals: list, mf: PartitionedStats, strategy: Strategy
    ) -> ConflictAssessment:
        delta = consensus_delta(self.consensus)
        if check_consensus(own, neighbor_proposals, delta):
            return ConflictAssessment(True, None, None, "levels agree")
        merged = mf.merged if mf is not None else None
        weights = conflict_weights(merged)
        summary = (
            "aggregate infection unavailable"
            if merged is None or merged.is_empty
            else f"aggregate infected fraction {merged.mean[0]:.4f}"
        )
        updated = strategy.with_spatial(strategy.spatial_directives[:1] + (summary,), mf)
        return ConflictAssessment(False, weights, updated, "regulation levels diverge")

    def revise_strategy(self, strategy: Strategy, signal) -> Strategy:
        cap = 0.5 * (signal.drift / 2.0)
        if cap == 0.0:
            return strategy
        text = " ".join(signal.semantic).lower()
        escalate = strategy.param("escalate_at")
        if "rising" in text:
            return strategy.with_params(escalate_at=escalate * (1.0 - cap))
        if "falling" in text:
            return strategy.with_params(escalate_at=escalate * (1.0 + cap))
        return strategy

    # --- framework hooks ---

    def revise_action(self, action: int, verdict, attempt: int) -> int:
        # conservative retreat for an epidemic: tighten regulation
        return min(4, int(action) + 1)

    def trend_action(self, obs: PandemicObservation, merged: MeanFieldStats | None):
        if merged is None or merged.is_empty:
            return None
        return _policy_level(
            obs.level,
            float(merged.mean[0]),
            DEFAULT_THRESHOLDS["escalate_at"],
            DEFAULT_THRESHOLDS["deescalate_at"],
        )
