"""Run configuration, validation, and the scenario registry."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError

PLATOON = "platoon"
PANDEMIC = "pandemic"

SCENARIOS = {
    "cpp-catchup": {"domain": PLATOON, "profile": "catch-up"},
    "cpp-slowdown": {"domain": PLATOON, "profile": "slow-down"},
    "pc-helsinki": {"domain": PANDEMIC, "city_config": "pc_helsinki.json"},
    "pc-hongkong": {"domain": PANDEMIC, "city_config": "pc_hongkong.json"},
    "pc-newyork": {"domain": PANDEMIC, "city_config": "pc_newyork.json"},
}

DEFAULT_STEPS = 120
DEFAULT_EPSILON = {PLATOON: 0.02, PANDEMIC: 0.0}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    reasoner: str = "heuristic"
    agent_count: int | None = None
    steps: int | None = None
    rollout_horizon: int = 2
    max_rounds: int = 3
    max_attempts: int = 10
    epsilon: float | None = None
    gamma: float = 0.9
    decision_interval: int = 1
    seed: int = 0
    pandemic_mode: str = "expected-value"
    instrumentation: bool = True
    output_dir: str | None = None
    topology_file: str | None = None
    llm_base_url: str | None = None
    llm_model: str | None = None
    llm_temperature: float = 0.3
    llm_top_p: float = 1.0
    llm_max_retries: int = 3

    @property
    def domain(self) -> str:
        return SCENARIOS[self.scenario]["domain"]

    @property
    def effective_steps(self) -> int:
        return self.steps if self.steps is not None else DEFAULT_STEPS

    @property
    def effective_epsilon(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return DEFAULT_EPSILON[self.domain]

    def to_dict(self) -> dict:
        return asdict(self)


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.scenario not in SCENARIOS:
        raise ValidationError("scenario", f"unknown scenario {cfg.scenario!r}; "
                              f"known: {sorted(SCENARIOS)}")
    if cfg.reasoner not in ("heuristic", "llm"):
        raise ValidationError("reasoner", f"must be 'heuristic' or 'llm', got {cfg.reasoner!r}")
    if cfg.decision_interval < 1:
        raise ValidationError("decision_interval", "must be >= 1")
    if cfg.steps is not None and cfg.steps < 1:
        raise ValidationError("steps", "must be >= 1")
    if cfg.agent_count is not None and cfg.agent_count < 2:
        raise ValidationError("agent_count", "must be >= 2")
    if cfg.rollout_horizon < 0:
        raise ValidationError("rollout_horizon", "must be >= 0")
    if cfg.max_rounds < 1:
        raise ValidationError("max_rounds", "must be >= 1")
    if cfg.max_attempts < 1:
        raise ValidationError("max_attempts", "must be >= 1")
    if cfg.epsilon is not None and cfg.epsilon < 0:
        raise ValidationError("epsilon", "must be >= 0")
    if not (0.0 < cfg.gamma <= 1.0):
        raise ValidationError("gamma", "must be in (0, 1]")
    if cfg.pandemic_mode not in ("expected-value", "stochastic"):
        raise ValidationError("pandemic_mode", "must be 'expected-value' or 'stochastic'")
    if cfg.reasoner == "llm" and not (cfg.llm_base_url and cfg.llm_model):
        raise ValidationError("llm_base_url", "llm reasoner needs llm_base_url and llm_model")
    if cfg.llm_max_retries < 1:
        raise ValidationError("llm_max_retries", "must be >= 1")
    return cfg


def from_dict(data: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValidationError(unknown[0], "unknown field")
    if "scenario" not in data:
        raise ValidationError("scenario", "required field missing")
    return validate(RunConfig(**data))


def load_config(path: str | Path) -> RunConfig:
    """Read a JSON config file, filling framework defaults."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    return from_dict(data)


def packaged_config_path(name: str) -> Path:
    return Path(resources.files("peercoord") / "configs" / name)


def load_city_config(scenario: str) -> dict:
    name = SCENARIOS[scenario]["city_config"]
    return json.loads(packaged_config_path(name).read_text())
