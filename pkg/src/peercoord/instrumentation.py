"""Communication and compute accounting.

Counts per-agent messages and bytes per negotiation round, and the sizes of
the statistics payloads carried inside messages. The statistics payload is a
fixed-size record per state dimension, so its size must never depend on the
total number of agents; `summarize` asserts exactly that.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field


@dataclass
class AgentComm:
    messages_sent: int = 0
    bytes_sent: int = 0
    reasoner_calls: int = 0


@dataclass
class CommStats:
    per_agent: dict = field(default_factory=dict)
    message_sizes: Counter = field(default_factory=Counter)
    payload_sizes: Counter = field(default_factory=Counter)
    rounds: int = 0
    messages: int = 0
    total_bytes: int = 0

    def _agent(self, agent_id) -> AgentComm:
        if agent_id not in self.per_agent:
            self.per_agent[agent_id] = AgentComm()
        return self.per_agent[agent_id]

    def note_round(self) -> None:
        self.rounds += 1

    def record_message(self, sender, receiver, byte_size: int, payload_sizes=()) -> "CommStats":
        if byte_size < 0:
            raise ValueError(f"negative message size {byte_size}")
        entry = self._agent(sender)
        entry.messages_sent += 1
        entry.bytes_sent += byte_size
        self.messages += 1
        self.total_bytes += byte_size
        self.message_sizes[byte_size] += 1
        for p in payload_sizes:
            self.payload_sizes[p] += 1
        return self

    def record_reasoner_calls(self, agent_id, count: int = 1) -> "CommStats":
        self._agent(agent_id).reasoner_calls += count
        return self

    @property
    def reasoner_calls(self) -> int:
        return sum(a.reasoner_calls for a in self.per_agent.values())


def summarize(stats: CommStats, agent_count: int) -> dict:
    """Per-episode communication report.

    `payload_constant` asserts the fixed-size statistics record: every
    payload seen during the episode has the same byte size regardless of how
    many agents the deployment has.
    """
    distinct_payloads = sorted(stats.payload_sizes)
    report = {
        "agents": agent_count,
        "rounds": stats.rounds,
        "messages": stats.messages,
        "total_bytes": stats.total_bytes,
        "mean_messages_per_agent_per_round": (
            stats.messages / (agent_count * stats.rounds) if stats.rounds else 0.0
        ),
        "mean_bytes_per_agent_per_round": (
            stats.total_bytes / (agent_count * stats.rounds) if stats.rounds else 0.0
        ),
        "message_sizes": sorted(stats.message_sizes),
        "payload_sizes": distinct_payloads,
        "payload_constant": len(distinct_payloads) <= 1,
        "reasoner_calls": stats.reasoner_calls,
    }
    return report
