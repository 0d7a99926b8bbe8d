"""Decentralized multi-agent coordination framework.

Agents on a peer graph propose rollout-verified joint actions, negotiate
over multiple rounds using weighted neighborhood statistics, and revise
their strategies when rewards decline, scaled by scene drift. Ships two
self-contained surrogate domains: a kinematic vehicle platoon and a
graph-coupled epidemic.
"""

from .config import RunConfig, load_config
from .harness import EpisodeResult, replay_metrics, run_episode, run_suite
from .meanfield import (
    BoundParams,
    MeanFieldStats,
    PartitionedStats,
    aggregate,
    empty_stats,
    error_bounds,
    merge,
    variance_decomposition,
    welford_update,
)
from .metrics import PandemicMetrics, PlatoonMetrics
from .negotiation import (
    ConfidenceWeights,
    ConsensusConfig,
    NegotiationOutcome,
    blend_candidate,
    check_consensus,
    consensus_delta,
    finalize_decision,
    negotiate,
)
from .introspection import (
    NormalizationBounds,
    RevisionSignal,
    TransitionVector,
    apply_revision,
    build_transition,
    drift_intensity,
    reflect_trigger,
)
from .rollout import (
    ConstraintVerdict,
    Proposal,
    RolloutConfig,
    Trajectory,
    Urgency,
    cumulative_reward,
    generate_proposal,
    verify_rollout,
)
from .topology import (
    AgentId,
    SubgroupPartition,
    Topology,
    build_topology,
    chain_topology,
    load_topology_config,
    neighbors_and_hops,
    partition_neighborhood,
)

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "load_config",
    "EpisodeResult", "replay_metrics", "run_episode", "run_suite",
    "BoundParams", "MeanFieldStats", "PartitionedStats", "aggregate", "empty_stats",
    "error_bounds", "merge", "variance_decomposition", "welford_update",
    "PandemicMetrics", "PlatoonMetrics",
    "ConfidenceWeights", "ConsensusConfig", "NegotiationOutcome", "blend_candidate",
    "check_consensus", "consensus_delta", "finalize_decision", "negotiate",
    "NormalizationBounds", "RevisionSignal", "TransitionVector", "apply_revision",
    "build_transition", "drift_intensity", "reflect_trigger",
    "ConstraintVerdict", "Proposal", "RolloutConfig", "Trajectory", "Urgency",
    "cumulative_reward", "generate_proposal", "verify_rollout",
    "AgentId", "SubgroupPartition", "Topology", "build_topology", "chain_topology",
    "load_topology_config", "neighbors_and_hops", "partition_neighborhood",
    "__version__",
]
