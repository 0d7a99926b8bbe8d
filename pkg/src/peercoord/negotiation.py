"""Multi-round negotiation: exchange, merge, consensus, regeneration.

Each round every agent broadcasts its proposal together with per-subgroup
weighted statistics, merges what it receives, checks local consensus against
a tolerance proportional to the action range, and, if out of tolerance,
blends a new candidate from its own action, the neighbors' suggestions, and
the aggregate trend, re-verifying it through the rollout path. The best
proposal from the previous round always stays in the candidate set, which
makes per-agent proposal quality non-decreasing across rounds; the loop
halts on global consensus or after the round cap.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .errors import (
    AllZeroConfidence,
    DiscreteDomain,
    IncomparableProposals,
    NoCandidate,
    PredictionFailure,
    ReasonerFailure,
    WeightsNotNormalized,
)
from .meanfield import MeanFieldStats, PartitionedStats, empty_stats, merge, welford_update
from .rollout import Proposal, RolloutConfig, generate_proposal
from .topology import AgentId, SubgroupPartition, Topology


@dataclass(frozen=True)
class ConsensusConfig:
    epsilon: float = 0.02
    action_min: float = -2.5
    action_max: float = 2.5
    discrete: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.discrete and self.action_max <= self.action_min:
            raise ValueError("continuous domains need action_max > action_min")


@dataclass(frozen=True)
class ConfidenceWeights:
    my_weight: float
    neighbor_weight: float
    unobservable_weight: float

    def __post_init__(self):
        vals = (self.my_weight, self.neighbor_weight, self.unobservable_weight)
        if any(v < 0 for v in vals):
            raise WeightsNotNormalized(f"negative weight in {vals}")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise WeightsNotNormalized(f"weights {vals} sum to {sum(vals)}")

    @staticmethod
    def normalized(my: float, neighbor: float, unobservable: float) -> "ConfidenceWeights":
        total = my + neighbor + unobservable
        if total <= 0:
            raise WeightsNotNormalized("weights sum to zero")
        return ConfidenceWeights(my / total, neighbor / total, unobservable / total)


DEFAULT_WEIGHTS = ConfidenceWeights(0.6, 0.4, 0.0)


def consensus_delta(cfg: ConsensusConfig) -> float:
    """Tolerance proportional to the action range; exact agreement when discrete."""
    if cfg.discrete:
        return 0.0
    return cfg.epsilon * (cfg.action_max - cfg.action_min)


def _component_agrees(a, b, delta: float) -> bool:
    if delta == 0.0:
        return a == b
    return abs(a - b) < delta


def check_consensus(own: Proposal, neighbors: list, delta: float) -> bool:
    """True iff every action component shared with every neighbor is within delta.

    Zero delta demands exact agreement (the discrete rule).
    """
    own_map = own.action_map()
    for other in neighbors:
        other_map = other.action_map()
        shared = sorted(set(own_map) & set(other_map))
        if not shared:
            raise IncomparableProposals(
                f"proposals of {own.proposer} and {other.proposer} share no components"
            )
        for q in shared:
            if not _component_agrees(own_map[q], other_map[q], delta):
                return False
    return True


def blend_candidate(
    weights: ConfidenceWeights,
    own_action: float,
    neighbor_action: float,
    unobservable_trend: float,
    cfg: ConsensusConfig,
) -> float:
    """Convex combination of own, neighbor-suggested, and trend actions, clamped."""
    if cfg.discrete:
        raise DiscreteDomain("discrete domains select by max weight instead of blending")
    blended = (
        weights.my_weight * own_action
        + weights.neighbor_weight * neighbor_action
        + weights.unobservable_weight * unobservable_trend
    )
    return min(max(blended, cfg.action_min), cfg.action_max)


def select_discrete_candidate(
    weights: ConfidenceWeights, own_action, neighbor_action, unobservable_trend
):
    """Discrete analogue of blending: take the action of the heaviest source."""
    ranked = (
        (weights.my_weight, 0, own_action),
        (weights.neighbor_weight, 1, neighbor_action),
        (weights.unobservable_weight, 2, unobservable_trend),
    )
    best = max(ranked, key=lambda item: (item[0], -item[1]))
    return best[2]


def softmax(values: list) -> list:
    arr = np.asarray(values, dtype=float)
    arr = arr - arr.max()
    ex = np.exp(arr)
    return (ex / ex.sum()).tolist()


def finalize_decision(
    own: Proposal, neighbor_proposals: list, confidences: list, cfg: ConsensusConfig
):
    """Confidence-weighted final action.

    Continuous domains take the confidence-normalized mean of the own action
    and each neighbor's action suggested for this agent; discrete domains take
    the highest-confidence action, ties broken by lowest proposer id.
    """
    if len(confidences) != 1 + len(neighbor_proposals):
        raise ValueError("need one confidence per candidate proposal")
    if any(c < 0 for c in confidences):
        raise ValueError("confidences must be non-negative")
    if all(c == 0 for c in confidences):
        raise AllZeroConfidence("no positive confidence")
    actions = [own.self_action] + [
        p.neighbor_actions.get(own.proposer, p.self_action) for p in neighbor_proposals
    ]
    proposers = [own.proposer] + [p.proposer for p in neighbor_proposals]
    if cfg.discrete:
        top = max(confidences)
        tied = [i for i, c in enumerate(confidences) if c == top]
        winner = min(tied, key=lambda i: proposers[i])
        return actions[winner]
    total = sum(confidences)
    blended = sum(c * a for c, a in zip(confidences, actions)) / total
    return min(max(blended, cfg.action_min), cfg.action_max)


# --- message wire format ---

@dataclass(frozen=True)
class Message:
    """One broadcast: proposal summary, sender state, per-subgroup statistics."""

    sender: AgentId
    round_index: int
    proposal: Proposal
    own_state: np.ndarray
    subgroup_stats: tuple
    receiver_group: int | None

    def encode(self) -> bytes:
        """Canonical wire form; size depends on degree and state dim, never on N."""
        parts = [struct.pack("<IIdB", self.sender, self.round_index,
                             self.proposal.rollout_reward,
                             {"Normal": 0, "Warning": 1, "Urgent": 2}[self.proposal.urgency.value])]
        parts.append(struct.pack("<d", float(self.proposal.self_action)))
        nb = sorted(self.proposal.neighbor_actions.items())
        parts.append(struct.pack("<I", len(nb)))
        for m, a in nb:
            parts.append(struct.pack("<Id", m, float(a)))
        state = np.atleast_1d(np.asarray(self.own_state, dtype=float))
        parts.append(struct.pack(f"<I{len(state)}d", len(state), *state.tolist()))
        parts.append(struct.pack("<B", len(self.subgroup_stats)))
        for st in self.subgroup_stats:
            parts.append(st.to_wire())
        parts.append(struct.pack("<b", -1 if self.receiver_group is None else self.receiver_group))
        return b"".join(parts)

    def stats_payload_sizes(self) -> list:
        return [len(st.to_wire()) for st in self.subgroup_stats]


# --- per-negotiation agent context ---

@dataclass
class NegotiationAgent:
    """Working state of one agent for a single negotiation (one time step)."""

    agent_id: AgentId
    reasoner: Any
    strategy: Any
    observation: Any
    model: Any
    partition: SubgroupPartition
    rollout_cfg: RolloutConfig
    own_state: np.ndarray = None
    observed_states: dict = field(default_factory=dict)
    proposal: Proposal | None = None
    subgroup_stats: list = field(default_factory=list)
    field_stats: MeanFieldStats | None = None
    conf_weights: ConfidenceWeights | None = None
    prev_immediate_reward: float | None = None
    attempt_records: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def partitioned(self) -> PartitionedStats:
        groups = self.partition.groups
        return PartitionedStats(
            tuple((len(g), st) for g, st in zip(groups, self.subgroup_stats))
        )


@dataclass
class RoundResult:
    proposal: Proposal
    merged: PartitionedStats
    consensus: bool


@dataclass
class NegotiationRecord:
    time_step: int
    per_round: list
    rounds_used: int = 0
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "time_step": self.time_step,
            "rounds_used": self.rounds_used,
            "converged": self.converged,
            "per_round": self.per_round,
        }


@dataclass
class NegotiationOutcome:
    final_actions: dict
    record: NegotiationRecord


def _init_agent(agent: NegotiationAgent, round0_log: dict, comm=None) -> None:
    """Initial proposal plus subgroup statistics from directly observed states."""
    agent.own_state = agent.model.mf_state(agent.observation)
    agent.observed_states = agent.model.observed_neighbor_states(agent.observation)
    dim = len(agent.own_state)
    agent.subgroup_stats = []
    for group in agent.partition.groups:
        acc = empty_stats(dim)
        for m in sorted(group):
            s = agent.observed_states.get(m)
            if s is not None:
                acc = welford_update(acc, s, 1.0)
        agent.subgroup_stats.append(acc)
    agent.field_stats = welford_update(
        _merge_all(agent.subgroup_stats, dim), agent.own_state, 1.0
    )
    attempts: list = []
    try:
        agent.proposal = generate_proposal(
            agent.agent_id,
            agent.observation,
            agent.strategy,
            agent.partitioned(),
            agent.reasoner,
            agent.model,
            agent.rollout_cfg,
            round_index=0,
            prev_immediate_reward=agent.prev_immediate_reward,
            attempt_log=attempts,
        )
    except (ReasonerFailure, PredictionFailure, NoCandidate) as exc:
        agent.failures.append(f"init: {exc}")
        neutral = agent.model.neutral_action(agent.observation)
        agent.proposal = Proposal(
            proposer=agent.agent_id,
            observation_snapshot=agent.observation,
            self_action=neutral,
            neighbor_actions={},
            rollout_reward=-math.inf,
            round=0,
        )
    agent.attempt_records.extend(attempts)
    if comm is not None:
        comm.record_reasoner_calls(agent.agent_id, max(1, len(attempts)))
    round0_log[agent.agent_id] = agent.proposal


def _merge_all(stats_list: list, dim: int) -> MeanFieldStats:
    acc = empty_stats(dim)
    for st in stats_list:
        acc = merge(acc, st)
    return acc


def _relay_scale(round_index: int) -> float:
    """Weight discount for relayed aggregates.

    Chosen so that on tree topologies the states newly reached at round r
    carry weight 1/(r+1), the inverse of their hop distance; aggregates mix
    hops, so intermediate weights are approximate.
    """
    return round_index / (round_index + 1.0)


def run_round(
    agents: Mapping[AgentId, NegotiationAgent],
    topology: Topology,
    round_index: int,
    cfg: ConsensusConfig,
    comm=None,
) -> dict:
    """One barrier-synchronized round. Returns per-agent RoundResult."""
    ids = sorted(agents)
    participating = set(ids)
    delta = consensus_delta(cfg)

    # phase 1: broadcast proposal + per-subgroup statistics to every neighbor
    inbox: dict[AgentId, dict[AgentId, Message]] = {n: {} for n in ids}
    for n in ids:
        agent = agents[n]
        groups = agent.partition.groups
        for receiver in topology.neighbors(n):
            if receiver not in participating:
                continue
            rcv_group = None
            for gi, g in enumerate(groups):
                if receiver in g:
                    rcv_group = gi
                    break
            msg = Message(
                sender=n,
                round_index=round_index,
                proposal=agent.proposal,
                own_state=agent.own_state,
                subgroup_stats=tuple(agent.subgroup_stats),
                receiver_group=rcv_group,
            )
            inbox[receiver][n] = msg
            if comm is not None:
                encoded = msg.encode()
                comm.record_message(n, receiver, len(encoded), msg.stats_payload_sizes())

    # phase 2: rebuild subgroup statistics from received state + relayed aggregates
    scale = _relay_scale(round_index)
    for n in ids:
        agent = agents[n]
        dim = len(agent.own_state)
        new_stats = []
        for group in agent.partition.groups:
            acc = empty_stats(dim)
            for m in sorted(group):
                msg = inbox[n].get(m)
                if msg is None:
                    s = agent.observed_states.get(m)
                    if s is not None:
                        acc = welford_update(acc, s, topology.weight(n, m))
                    continue
                acc = welford_update(acc, msg.own_state, topology.weight(n, m))
                relayed = msg.subgroup_stats
                if len(relayed) >= 2 and msg.receiver_group is not None:
                    away = [st for gi, st in enumerate(relayed) if gi != msg.receiver_group]
                else:
                    away = list(relayed)
                beyond = _merge_all(away, dim)
                if not beyond.is_empty:
                    acc = merge(acc, beyond.scaled(scale))
            new_stats.append(acc)
        agent.subgroup_stats = new_stats
        agent.field_stats = welford_update(_merge_all(new_stats, dim), agent.own_state, 1.0)

    # phase 3: local consensus
    flags: dict[AgentId, bool] = {}
    for n in ids:
        received = [inbox[n][m].proposal for m in sorted(inbox[n])]
        flags[n] = (
            True
            if not received
            else check_consensus(agents[n].proposal, received, delta)
        )

    # phase 4: non-consenting agents blend and re-verify, retaining the round best
    results: dict[AgentId, RoundResult] = {}
    for n in ids:
        agent = agents[n]
        if not flags[n]:
            received = [inbox[n][m].proposal for m in sorted(inbox[n])]
            try:
                _regenerate(agent, received, cfg, round_index, comm)
            except (ReasonerFailure, PredictionFailure, NoCandidate) as exc:
                agent.failures.append(f"round {round_index}: {exc}")
        results[n] = RoundResult(agent.proposal, agent.partitioned(), flags[n])
    return results


def _regenerate(
    agent: NegotiationAgent,
    received: list,
    cfg: ConsensusConfig,
    round_index: int,
    comm=None,
) -> None:
    own = agent.proposal
    partitioned = agent.partitioned()
    assessment = agent.reasoner.assess_conflict(own, received, partitioned, agent.strategy)
    if comm is not None:
        comm.record_reasoner_calls(agent.agent_id, 1)
    if assessment.deal:
        return
    agent.conf_weights = assessment.weights
    if assessment.updated_spatial is not None:
        agent.strategy = assessment.updated_spatial

    # confidence-weighted mean of what neighbors suggested for this agent
    suggestions = [
        (p.rollout_reward, p.neighbor_actions[agent.agent_id])
        for p in received
        if agent.agent_id in p.neighbor_actions
    ]
    if suggestions:
        soft = softmax([r for r, _ in suggestions])
        if cfg.discrete:
            by_action: dict = {}
            for w, (_r, a) in zip(soft, suggestions):
                by_action[a] = by_action.get(a, 0.0) + w
            top = max(by_action.values())
            neighbor_action = max(a for a, w in by_action.items() if w == top)
        else:
            neighbor_action = sum(w * a for w, (_r, a) in zip(soft, suggestions))
    else:
        neighbor_action = own.self_action

    trend = agent.reasoner.trend_action(agent.observation, agent.field_stats)
    if trend is None:
        trend = own.self_action

    weights = assessment.weights
    if cfg.discrete:
        seed_action = select_discrete_candidate(
            weights, own.self_action, neighbor_action, trend
        )
    else:
        seed_action = blend_candidate(
            weights, own.self_action, neighbor_action, trend, cfg
        )

    attempts: list = []
    candidate = generate_proposal(
        agent.agent_id,
        agent.observation,
        agent.strategy,
        partitioned,
        agent.reasoner,
        agent.model,
        agent.rollout_cfg,
        round_index=round_index,
        initial_action=seed_action,
        prev_immediate_reward=agent.prev_immediate_reward,
        attempt_log=attempts,
    )
    agent.attempt_records.extend(attempts)
    if comm is not None:
        comm.record_reasoner_calls(agent.agent_id, max(1, len(attempts)))
    # previous best stays in the candidate set: adopt only strict improvements
    if candidate.rollout_reward > own.rollout_reward:
        agent.proposal = replace(candidate, round=round_index)


def negotiate(
    agents: Mapping[AgentId, NegotiationAgent],
    topology: Topology,
    max_rounds: int,
    cfg: ConsensusConfig,
    comm=None,
    time_step: int = 0,
) -> NegotiationOutcome:
    """Run rounds until every agent reports consensus or the cap is hit."""
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")
    ids = sorted(agents)
    round0: dict[AgentId, Proposal] = {}
    for n in ids:
        _init_agent(agents[n], round0, comm)

    per_round = [
        {
            "round": 0,
            "rewards": {n: round0[n].rollout_reward for n in ids},
            "actions": {n: round0[n].self_action for n in ids},
            "consensus": {},
        }
    ]
    rounds_used = 0
    converged = False
    for round_index in range(1, max_rounds + 1):
        if comm is not None:
            comm.note_round()
        results = run_round(agents, topology, round_index, cfg, comm)
        rounds_used = round_index
        per_round.append(
            {
                "round": round_index,
                "rewards": {n: results[n].proposal.rollout_reward for n in ids},
                "actions": {n: results[n].proposal.self_action for n in ids},
                "consensus": {n: results[n].consensus for n in ids},
                "field": {
                    n: _stats_summary(agents[n].field_stats) for n in ids
                },
            }
        )
        if all(results[n].consensus for n in ids):
            converged = True
            break

    final_actions: dict[AgentId, Any] = {}
    for n in ids:
        agent = agents[n]
        nb_ids = [m for m in topology.neighbors(n) if m in agents]
        nb_props = [agents[m].proposal for m in nb_ids]
        rewards = [agent.proposal.rollout_reward] + [p.rollout_reward for p in nb_props]
        soft = softmax(rewards)
        cw = agent.conf_weights or DEFAULT_WEIGHTS
        if nb_props:
            confidences = [soft[0] * cw.my_weight] + [
                s * cw.neighbor_weight / len(nb_props) for s in soft[1:]
            ]
        else:
            confidences = [1.0]
        action = finalize_decision(agent.proposal, nb_props, confidences, cfg)
        if cfg.discrete:
            action = int(action)
        final_actions[n] = action

    record = NegotiationRecord(
        time_step=time_step,
        per_round=per_round,
        rounds_used=rounds_used,
        converged=converged,
    )
    return NegotiationOutcome(final_actions=final_actions, record=record)


def _stats_summary(stats: MeanFieldStats | None) -> dict:
    if stats is None or stats.is_empty:
        return {"mean": None, "var": None, "weight": 0.0, "count": 0}
    return {
        "mean": stats.mean.tolist(),
        "var": stats.var.tolist(),
        "weight": stats.weight,
        "count": stats.count,
    }
