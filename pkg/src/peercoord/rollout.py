"""Proposal construction and rollout-simulated verification.

A candidate proposal (own action plus suggested neighbor actions) is checked
by projecting it forward: the current step must satisfy the full constraint
set, while the k projected steps only need to clear the relaxed
minimum-viability set. Rewards beyond the immediate step collapse to binary
viability indicators, so the cumulative score favors candidates that stay
feasible longest.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Any, Mapping

from .errors import (
    EmptyTrajectory,
    NoCandidate,
    PredictionFailure,
    ReasonerFailure,
)
from .topology import AgentId


class Urgency(str, enum.Enum):
    NORMAL = "Normal"
    WARNING = "Warning"
    URGENT = "Urgent"


@dataclass(frozen=True)
class ConstraintVerdict:
    passed: bool
    violated_step: int | None = None
    violated_rule: str | None = None

    def __post_init__(self):
        if self.passed and (self.violated_step is not None or self.violated_rule is not None):
            raise ValueError("passing verdict must not carry violation fields")
        if not self.passed and (self.violated_step is None or self.violated_rule is None):
            raise ValueError("failing verdict must name the step and rule")


@dataclass(frozen=True)
class Trajectory:
    """Ordered (observation, action, reward) triples; index 0 is the real step."""

    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise EmptyTrajectory("trajectory needs at least the immediate step")

    @property
    def rewards(self) -> list[float]:
        return [s[2] for s in self.steps]


@dataclass(frozen=True)
class RolloutConfig:
    horizon: int = 2
    discount: float = 0.9
    max_attempts: int = 10
    # optional per-rule relaxed thresholds forwarded to the environment's
    # minimum-viability check, e.g. {"min_headway": 1.0}
    viability_overrides: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {self.horizon}")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        if self.max_attempts < 1:
            raise ValueError(f"max_attempts must be >= 1, got {self.max_attempts}")


@dataclass(frozen=True)
class Proposal:
    proposer: AgentId
    observation_snapshot: Any
    self_action: Any
    neighbor_actions: Mapping[AgentId, Any]
    rollout_reward: float = 0.0
    round: int = 0
    urgency: Urgency = Urgency.NORMAL
    trajectory: Trajectory | None = None
    verdict: ConstraintVerdict | None = None

    def action_map(self) -> dict[AgentId, Any]:
        """All actions this proposal takes a position on, keyed by agent."""
        out = {self.proposer: self.self_action}
        out.update(self.neighbor_actions)
        return out


@dataclass(frozen=True)
class AttemptRecord:
    attempt: int
    action: Any
    passed: bool
    violated_step: int | None
    violated_rule: str | None
    reward: float
    guard_met: bool


def cumulative_reward(traj: Trajectory, gamma: float) -> float:
    """Discounted sum over the trajectory: sum_i gamma^i * r_i."""
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    total = 0.0
    for i, r in enumerate(traj.rewards):
        total += (gamma**i) * r
    if not math.isfinite(total):
        raise ValueError(f"non-finite cumulative reward {total}")
    return total


def verify_rollout(
    candidate: Proposal,
    model,
    reasoner,
    cfg: RolloutConfig,
    strategy=None,
    mf=None,
) -> tuple[Trajectory, ConstraintVerdict]:
    """Project a candidate k steps ahead and check it.

    The current step is held to the full constraint set; each projected step
    only to the minimum-viability set. The immediate reward is the
    environment reward of the first predicted observation (how good the
    action's direct consequence looks); projected rewards are binary
    viability indicators. The trajectory is truncated at the first violation.
    """
    obs = candidate.observation_snapshot
    joint = candidate.action_map()
    try:
        next_obs = reasoner.predict_next_observation(obs, joint)
    except PredictionFailure:
        raise
    except Exception as exc:  # reasoner bugs surface as prediction failures
        raise PredictionFailure(str(exc)) from exc

    r0 = model.reward_obs(next_obs)
    steps = [(obs, candidate.self_action, r0)]

    rule = model.check_strict(obs)
    if rule is not None:
        return Trajectory(tuple(steps)), ConstraintVerdict(False, 0, rule)

    cur_obs = next_obs
    for i in range(1, cfg.horizon + 1):
        rule = model.check_viability(cur_obs, cfg.viability_overrides)
        viable = rule is None
        if strategy is not None:
            action_i = reasoner.propose_action(cur_obs, strategy, mf)
        else:
            action_i = candidate.self_action
        steps.append((cur_obs, action_i, 1.0 if viable else 0.0))
        if not viable:
            return Trajectory(tuple(steps)), ConstraintVerdict(False, i, rule)
        if i < cfg.horizon:
            nb = reasoner.propose_neighbor_actions(cur_obs, strategy, action_i)
            try:
                cur_obs = reasoner.predict_next_observation(
                    cur_obs, {candidate.proposer: action_i, **nb}
                )
            except PredictionFailure:
                raise
            except Exception as exc:
                raise PredictionFailure(str(exc)) from exc
    return Trajectory(tuple(steps)), ConstraintVerdict(True)


def generate_proposal(
    agent: AgentId,
    obs,
    strategy,
    mf,
    reasoner,
    model,
    cfg: RolloutConfig,
    round_index: int = 0,
    initial_action=None,
    prev_immediate_reward: float | None = None,
    attempt_log: list | None = None,
) -> Proposal:
    """Search up to max_attempts candidate actions, rollout-verifying each.

    The first fully verified candidate is returned immediately; otherwise the
    best-by-cumulative-reward attempt wins. Each failed attempt asks the
    reasoner for a more conservative revision of the action. The
    non-decreasing immediate-reward guard is best effort: attempts violating
    it are flagged in the attempt log but still usable.
    """
    best: Proposal | None = None
    action = None
    verdict: ConstraintVerdict | None = None
    for att in range(cfg.max_attempts):
        try:
            if att == 0 and initial_action is not None:
                action = initial_action
            elif action is None:
                action = reasoner.propose_action(obs, strategy, mf)
            else:
                action = reasoner.revise_action(action, verdict, att)
            neighbor_actions = reasoner.propose_neighbor_actions(obs, strategy, action)
            candidate = Proposal(
                proposer=agent,
                observation_snapshot=obs,
                self_action=action,
                neighbor_actions=dict(neighbor_actions),
                round=round_index,
                urgency=model.urgency(obs),
            )
            traj, verdict = verify_rollout(candidate, model, reasoner, cfg, strategy, mf)
        except (ReasonerFailure, PredictionFailure):
            verdict = ConstraintVerdict(False, 0, "reasoner-failure")
            continue
        reward = cumulative_reward(traj, cfg.discount)
        candidate = replace(candidate, rollout_reward=reward, trajectory=traj, verdict=verdict)
        guard_met = (
            prev_immediate_reward is None
            or traj.rewards[0] >= prev_immediate_reward - 1e-12
        )
        if attempt_log is not None:
            attempt_log.append(
                AttemptRecord(
                    attempt=att,
                    action=action,
                    passed=verdict.passed,
                    violated_step=verdict.violated_step,
                    violated_rule=verdict.violated_rule,
                    reward=reward,
                    guard_met=guard_met,
                )
            )
        if verdict.passed:
            return candidate
        if best is None or reward > best.rollout_reward:
            best = candidate
    if best is None:
        raise NoCandidate(f"agent {agent}: no usable candidate in {cfg.max_attempts} attempts")
    return best
