"""HTTP chat-completion adapter.

Turns the reasoning interface into tagged-section prompts against any
OpenAI-style chat endpoint. Responses are parsed by tag, validated against a
small schema, and retried on malformed output; after the retry budget the
call fails with ReasonerFailure and the caller falls back to its previous
proposal. A transport callable can replace the HTTP layer for offline tests.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from dataclasses import dataclass
from typing import Callable, Mapping

import requests

from ..errors import ReasonerFailure
from ..meanfield import PartitionedStats
from ..negotiation import ConfidenceWeights
from .base import ConflictAssessment, Reasoner, Strategy

log = logging.getLogger(__name__)

API_KEY_ENV = "PEERCOORD_API_KEY"


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str
    model_name: str
    temperature: float = 0.3
    top_p: float = 1.0
    max_retries: int = 3
    timeout: float = 60.0
    max_concurrent: int = 8

    def __post_init__(self):
        if self.max_retries < 1:
            raise ValueError(f"max_retries must be >= 1, got {self.max_retries}")


def _extract_tag(text: str, tag: str) -> str:
    match = re.search(rf"<{tag}>(.*?)</{tag}>", text, re.DOTALL)
    if match is None:
        raise ReasonerFailure(f"missing <{tag}> section")
    return match.group(1).strip()


def _extract_json(text: str, tag: str):
    raw = _extract_tag(text, tag)
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ReasonerFailure(f"<{tag}> is not valid JSON: {exc}") from exc


class LlmReasoner(Reasoner):
    """Chat-completion-backed reasoner with schema-validated tag output."""

    def __init__(
        self,
        cfg: LlmEndpointConfig,
        obs_codec,
        action_space,
        task_description: str,
        agent_name: str,
        transport: Callable[[dict], dict] | None = None,
        transcript: list | None = None,
    ):
        self.cfg = cfg
        self.obs_codec = obs_codec
        self.action_space = action_space
        self.task_description = task_description
        self.agent_name = agent_name
        self.transport = transport
        self.transcript = transcript
        self._semaphore = threading.Semaphore(cfg.max_concurrent)

    # --- transport ---

    def _request(self, prompt: str) -> str:
        payload = {
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": f"You are {self.agent_name}. {self.task_description}"},
                {"role": "user", "content": prompt},
            ],
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
        }
        with self._semaphore:
            if self.transport is not None:
                response = self.transport(payload)
            else:
                key = os.environ.get(API_KEY_ENV, "")
                resp = requests.post(
                    f"{self.cfg.base_url.rstrip('/')}/chat/completions",
                    json=payload,
                    headers={"Authorization": f"Bearer {key}"},
                    timeout=self.cfg.timeout,
                )
                resp.raise_for_status()
                response = resp.json()
        content = response["choices"][0]["message"]["content"]
        if self.transcript is not None:
            self.transcript.append({"request": _redacted(payload), "response": content})
        return content

    def _ask(self, prompt: str, parse: Callable[[str], object]):
        last: Exception | None = None
        for _attempt in range(self.cfg.max_retries):
            try:
                return parse(self._request(prompt))
            except ReasonerFailure as exc:
                last = exc
                log.warning("%s: malformed reply (%s), retrying", self.agent_name, exc)
            except (requests.RequestException, KeyError, IndexError, TypeError) as exc:
                last = exc
                log.warning("%s: transport failure (%s), retrying", self.agent_name, exc)
        raise ReasonerFailure(f"{self.agent_name}: giving up after "
                              f"{self.cfg.max_retries} attempts: {last}")

    # --- decision operations ---

    def propose_action(self, obs, strategy: Strategy, mf=None):
        prompt = self._proposal_prompt(obs, strategy, mf)

        def parse(text: str):
            data = _extract_json(text, "output")
            if not isinstance(data, dict) or "self" not in data:
                raise ReasonerFailure("output must be an object with a 'self' action")
            return self._coerce_action(data["self"])

        return self._ask(prompt, parse)

    def propose_neighbor_actions(self, obs, strategy: Strategy, self_action) -> dict:
        prompt = (
            f"{self._context_block(obs, strategy, None)}\n"
            f"Your own action is {self_action}. Suggest one cooperative action per "
            "observable neighbor.\n"
            'Reply with <output>{"neighbors": {"<agent index>": <action>}}</output>.'
        )

        def parse(text: str):
            data = _extract_json(text, "output")
            nbrs = data.get("neighbors") if isinstance(data, dict) else None
            if not isinstance(nbrs, dict):
                raise ReasonerFailure("output must carry a 'neighbors' object")
            return {int(k): self._coerce_action(v) for k, v in nbrs.items()}

        return self._ask(prompt, parse)

    def predict_next_observation(self, obs, joint_actions: Mapping):
        prompt = (
            f"{self._context_block(obs, None, None)}\n"
            f"Joint actions: {json.dumps({str(k): v for k, v in sorted(joint_actions.items())})}\n"
            "Simulate one time step of the domain dynamics.\n"
            "Reply with <prediction>{...the next observation object...}</prediction>."
        )

        def parse(text: str):
            data = _extract_json(text, "prediction")
            try:
                return self.obs_codec.from_dict(data)
            except (TypeError, KeyError, ValueError) as exc:
                raise ReasonerFailure(f"prediction does not match the observation schema: {exc}")

        return self._ask(prompt, parse)

    def assess_conflict(self, own, neighbor_proposals, mf, strategy) -> ConflictAssessment:
        lines = [
            f"Your proposal: {json.dumps(_action_map_json(own))}",
            "Neighbor proposals: "
            + json.dumps([_action_map_json(p) for p in neighbor_proposals]),
        ]
        prompt = (
            f"{self._context_block(own.observation_snapshot, strategy, mf)}\n"
            + "\n".join(lines)
            + "\nDecide whether these conflict. Reply with\n"
            "<deal>True|False</deal>\n"
            '<insights>{"my_weight": x, "neighbor_weight": y, "unobservable_weight": z}</insights>\n'
            "<spatial-strategy>one-line updated spatial directive</spatial-strategy>"
        )

        def parse(text: str) -> ConflictAssessment:
            deal_raw = _extract_tag(text, "deal").lower()
            if deal_raw not in ("true", "false"):
                raise ReasonerFailure(f"<deal> must be True or False, got {deal_raw!r}")
            if deal_raw == "true":
                return ConflictAssessment(True, None, None, "model judged no conflict")
            data = _extract_json(text, "insights")
            try:
                weights = ConfidenceWeights.normalized(
                    float(data["my_weight"]),
                    float(data["neighbor_weight"]),
                    float(data["unobservable_weight"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ReasonerFailure(f"bad weights: {exc}")
            directive = _extract_tag(text, "spatial-strategy")
            updated = strategy.with_spatial((directive,), mf)
            return ConflictAssessment(False, weights, updated, "model judged conflict")

        return self._ask(prompt, parse)

    def revise_strategy(self, strategy: Strategy, signal) -> Strategy:
        cap = 0.5 * (signal.drift / 2.0)
        prompt = (
            f"Current plan parameters: {json.dumps(dict(strategy.temporal_params))}\n"
            f"Diagnosis: {'; '.join(signal.semantic)}\n"
            f"Revise the parameters, changing each by no more than {cap:.0%} relative.\n"
            'Reply with <temporal-strategy>{"<param>": <value>}</temporal-strategy>.'
        )

        def parse(text: str) -> Strategy:
            data = _extract_json(text, "temporal-strategy")
            if not isinstance(data, dict):
                raise ReasonerFailure("temporal-strategy must be a parameter object")
            updates = {}
            for name, value in data.items():
                if name not in strategy.temporal_params:
                    raise ReasonerFailure(f"unknown parameter {name!r}")
                old = strategy.temporal_params[name]
                value = float(value)
                if old != 0 and abs(value - old) > cap * abs(old) + 1e-12:
                    value = old * (1.0 + cap if value > old else 1.0 - cap)
                updates[name] = value
            return strategy.with_params(**updates)

        if cap == 0.0:
            return strategy
        return self._ask(prompt, parse)

    # --- prompt assembly ---

    def _context_block(self, obs, strategy, mf) -> str:
        lines = [f"Observation: {json.dumps(self.obs_codec.to_dict(obs))}"]
        if strategy is not None:
            lines.append(f"Plan parameters: {json.dumps(dict(strategy.temporal_params))}")
            lines.append("Directives: " + "; ".join(
                strategy.temporal_directives + strategy.spatial_directives))
        if mf is not None:
            merged = mf.merged if isinstance(mf, PartitionedStats) else mf
            if merged is not None and not merged.is_empty:
                lines.append(
                    f"Aggregate neighborhood state: mean {merged.mean.tolist()}, "
                    f"variance {merged.var.tolist()}, weight {merged.weight:.3f}"
                )
        return "\n".join(lines)

    def _proposal_prompt(self, obs, strategy, mf) -> str:
        return (
            f"{self._context_block(obs, strategy, mf)}\n"
            "Pick the most advantageous action for yourself; state its urgency "
            "(Normal, Warning, Urgent); verify it mentally over the next two steps.\n"
            "Reply with\n<analysis>...</analysis>\n<proposal>...</proposal>\n"
            '<output>{"self": <action>, "urgency": "Normal"}</output>'
        )

    def _coerce_action(self, value):
        if self.action_space.discrete:
            action = int(value)
        else:
            action = float(value)
        if not self.action_space.contains(action):
            action = self.action_space.clamp(action)
        return action


def _action_map_json(proposal) -> dict:
    return {str(k): v for k, v in sorted(proposal.action_map().items())}


def _redacted(payload: dict) -> dict:
    clean = json.loads(json.dumps(payload))
    clean.pop("api_key", None)
    return clean


class ObsCodec:
    """to_dict/from_dict pair for a domain observation type."""

    def __init__(self, obs_type):
        self.obs_type = obs_type

    def to_dict(self, obs) -> dict:
        return obs.to_dict()

    def from_dict(self, data: Mapping):
        return self.obs_type.from_dict(dict(data))
