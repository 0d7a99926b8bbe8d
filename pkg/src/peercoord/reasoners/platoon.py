"""Deterministic platoon reasoners: proportional gap/speed controller."""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping

import numpy as np

from ..envs.platoon import PlatoonEnv, PlatoonObservation, safe_approach
from ..meanfield import MeanFieldStats, PartitionedStats
from ..negotiation import ConsensusConfig, check_consensus, consensus_delta
from .base import ConflictAssessment, Reasoner, Strategy, conflict_weights

DEFAULT_GAINS = {"headway_gain": 0.2, "velocity_gain": 0.5}
GAIN_BOUNDS = {"headway_gain": (0.02, 0.6), "velocity_gain": (0.05, 1.2)}


def default_platoon_strategy() -> Strategy:
    return Strategy(
        temporal_params=dict(DEFAULT_GAINS),
        temporal_directives=(
            "close toward the 20 m gap, then hold it",
            "match the target cruise speed",
        ),
        spatial_directives=("follow the aggregate speed trend when uncertain",),
        param_bounds=dict(GAIN_BOUNDS),
    )


class PlatoonReasoner(Reasoner):
    """Proportional controller on the locally observed predecessor gap."""

    def __init__(self, env: PlatoonEnv, consensus: ConsensusConfig):
        self.env = env
        self.consensus = consensus

    # --- decision operations ---

    def propose_action(self, obs: PlatoonObservation, strategy: Strategy, mf=None) -> float:
        p = self.env.params
        k_h = strategy.param("headway_gain")
        k_v = strategy.param("velocity_gain")
        if obs.pred_headway is None:
            accel = k_v * (p.target_velocity - obs.velocity)
        else:
            accel = k_h * (obs.pred_headway - p.target_headway) + k_v * (
                obs.pred_velocity - obs.velocity
            )
            accel = safe_approach(
                accel, obs.pred_headway, obs.velocity, obs.pred_velocity, p
            )
        return self.env.action_space.clamp(accel)

    FEEDFORWARD = 0.5  # share of own planned action passed to the follower

    def propose_neighbor_actions(
        self, obs: PlatoonObservation, strategy: Strategy, self_action: float
    ) -> dict:
        """Controller output from each neighbor's observed slice.

        The follower's gap to this vehicle is visible, so its full controller
        applies, anticipatively biased by this vehicle's own planned action;
        for the predecessor only the speed term is computable.
        """
        p = self.env.params
        k_h = strategy.param("headway_gain")
        k_v = strategy.param("velocity_gain")
        out: dict = {}
        if obs.pred_id is not None:
            out[obs.pred_id] = self.env.action_space.clamp(
                k_v * (p.target_velocity - obs.pred_velocity)
            )
        if obs.foll_id is not None:
            accel = (
                k_h * (obs.foll_headway - p.target_headway)
                + k_v * (obs.velocity - obs.foll_velocity)
                + self.FEEDFORWARD * self_action
            )
            accel = safe_approach(
                accel, obs.foll_headway, obs.foll_velocity, obs.velocity, p
            )
            out[obs.foll_id] = self.env.action_space.clamp(accel)
        return out

    def predict_next_observation(
        self, obs: PlatoonObservation, joint_actions: Mapping
    ) -> PlatoonObservation:
        """Constant-acceleration update of the locally visible slice."""
        p = self.env.params
        dt = p.dt
        a_self = float(joint_actions.get(obs.agent, 0.0))
        new = replace(
            obs,
            step=obs.step + 1,
            velocity=float(np.clip(obs.velocity + a_self * dt, 0.0, p.v_max)),
        )
        if obs.pred_id is not None:
            a_pred = float(joint_actions.get(obs.pred_id, 0.0))
            new = replace(
                new,
                pred_velocity=float(np.clip(obs.pred_velocity + a_pred * dt, 0.0, p.v_max)),
                pred_headway=obs.pred_headway
                + (obs.pred_velocity - obs.velocity) * dt
                + 0.5 * (a_pred - a_self) * dt**2,
            )
        if obs.foll_id is not None:
            a_foll = float(joint_actions.get(obs.foll_id, 0.0))
            new = replace(
                new,
                foll_velocity=float(np.clip(obs.foll_velocity + a_foll * dt, 0.0, p.v_max)),
                foll_headway=obs.foll_headway
                + (obs.velocity - obs.foll_velocity) * dt
                + 0.5 * (a_self - a_foll) * dt**2,
            )
        return new

    def assess_conflict(
        self, own, neighbor_proposals: list, mf: PartitionedStats, strategy: Strategy
    ) -> ConflictAssessment:
        delta = consensus_delta(self.consensus)
        if check_consensus(own, neighbor_proposals, delta):
            return ConflictAssessment(True, None, None, "within tolerance")
        merged = mf.merged if mf is not None else None
        weights = conflict_weights(merged)
        summary = (
            "aggregate speed unavailable"
            if merged is None or merged.is_empty
            else f"aggregate speed {merged.mean[0]:.2f} m/s, variance {merged.max_var:.3f}"
        )
        updated = strategy.with_spatial(
            strategy.spatial_directives[:1] + (summary,), mf
        )
        return ConflictAssessment(
            False, weights, updated,
            "actions diverge beyond tolerance; lean on neighbors when the field is noisy",
        )

    def revise_strategy(self, strategy: Strategy, signal) -> Strategy:
        """Gain adjustment bounded by the drift-scaled relative cap."""
        cap = 0.5 * (signal.drift / 2.0)
        if cap == 0.0:
            return strategy
        text = " ".join(signal.semantic).lower()
        k_h = strategy.param("headway_gain")
        if "oscillation" in text:
            return strategy.with_params(headway_gain=k_h * (1.0 - cap))
        if "lag" in text or "deviation" in text:
            return strategy.with_params(headway_gain=k_h * (1.0 + cap))
        return strategy

    # --- framework hooks ---

    def revise_action(self, action: float, verdict, attempt: int) -> float:
        # conservative retreat: shrink toward zero acceleration
        return action * 0.7

    def trend_action(self, obs: PlatoonObservation, merged: MeanFieldStats | None):
        """Acceleration implied by tracking the aggregate mean speed."""
        if merged is None or merged.is_empty:
            return None
        k_v = DEFAULT_GAINS["velocity_gain"]
        return self.env.action_space.clamp(k_v * (float(merged.mean[0]) - obs.velocity))


class ScriptedLeadReasoner(PlatoonReasoner):
    """Lead vehicle: proposes its scripted profile action, never revises."""

    def __init__(self, env: PlatoonEnv, consensus: ConsensusConfig):
        super().__init__(env, consensus)
        self.current_step = 0

    def propose_action(self, obs: PlatoonObservation, strategy: Strategy, mf=None) -> float:
        return self.env.action_space.clamp(self.env.leader_action(self.current_step))

    def revise_action(self, action: float, verdict, attempt: int) -> float:
        return action  # the plan is fixed

    def revise_strategy(self, strategy: Strategy, signal) -> Strategy:
        return strategy
