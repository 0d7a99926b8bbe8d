"""Episode orchestration: negotiation epochs, execution, reflection, logging.

Every `decision_interval` steps the agents run a full negotiation and cache
the agreed actions; between epochs the cached actions are replayed through
the per-step safety layer (platoon emergency braking). Reflection runs at
decision epochs only, where rewards attributable to the negotiated actions
exist. With deterministic reasoners and a fixed seed the whole pipeline is
reproducible bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import PANDEMIC, PLATOON, RunConfig, load_city_config, validate
from .envs.pandemic import EXPECTED, PandemicEnv, PandemicParams, split_population
from .envs.platoon import (
    CATCH_UP,
    SLOW_DOWN,
    PlatoonEnv,
    PlatoonParams,
    safe_approach,
    safety_override,
)
from .errors import EnvironmentFailure, IncompleteLog, ValidationError
from .instrumentation import CommStats, summarize
from .introspection import (
    NormalizationBounds,
    RevisionSignal,
    apply_revision,
    build_transition,
    drift_intensity,
    reflect_trigger,
)
from .metrics import (
    PandemicMetrics,
    PlatoonMetrics,
    compute_pandemic_metrics,
    compute_platoon_metrics,
)
from .negotiation import ConsensusConfig, NegotiationAgent, negotiate
from .reasoners.llm import LlmEndpointConfig, LlmReasoner, ObsCodec
from .reasoners.pandemic import PandemicReasoner, default_pandemic_strategy
from .reasoners.platoon import (
    PlatoonReasoner,
    ScriptedLeadReasoner,
    default_platoon_strategy,
)
from .rollout import RolloutConfig
from .runlog import RunLog, pandemic_arrays, platoon_arrays
from .topology import Topology, build_topology, chain_topology


@dataclass
class EpisodeResult:
    log: RunLog
    metrics: PlatoonMetrics | PandemicMetrics
    comm: CommStats

    @property
    def summary(self) -> dict:
        return self.log.summary


class _Runtime:
    """Scenario bindings: environment, topology, per-agent reasoners/strategies."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.consensus: ConsensusConfig
        self.rollout_cfg = RolloutConfig(
            horizon=cfg.rollout_horizon,
            discount=cfg.gamma,
            max_attempts=cfg.max_attempts,
        )
        if cfg.domain == PLATOON:
            self._init_platoon()
        else:
            self._init_pandemic()
        self.strategies = {n: self.default_strategy() for n in range(self.agent_count)}
        self.prev_immediate: dict[int, float | None] = {
            n: None for n in range(self.agent_count)
        }

    # --- scenario wiring ---

    def _init_platoon(self):
        cfg = self.cfg
        self.agent_count = cfg.agent_count or 8
        self.env = PlatoonEnv(
            scenario=CATCH_UP if cfg.scenario == "cpp-catchup" else SLOW_DOWN,
            vehicle_count=self.agent_count,
            params=PlatoonParams(),
        )
        self.topology = chain_topology(self.agent_count)
        self.consensus = ConsensusConfig(
            epsilon=cfg.effective_epsilon,
            action_min=self.env.params.accel_low,
            action_max=self.env.params.accel_high,
            discrete=False,
        )
        from .topology import partition_neighborhood

        self.partitions = {
            n: partition_neighborhood(self.topology, n, "directional")
            for n in range(self.agent_count)
        }
        self.reasoners = {}
        for n in range(self.agent_count):
            if cfg.reasoner == "llm" and n > 0:
                self.reasoners[n] = self._llm_reasoner(n)
            elif n == 0:
                self.reasoners[n] = ScriptedLeadReasoner(self.env, self.consensus)
            else:
                self.reasoners[n] = PlatoonReasoner(self.env, self.consensus)
        self.default_strategy = default_platoon_strategy

    def _init_pandemic(self):
        cfg = self.cfg
        if cfg.topology_file:
            import json

            city = json.loads(Path(cfg.topology_file).read_text())
        else:
            city = load_city_config(cfg.scenario)
        roles = {int(n["id"]): n["role"] for n in city["nodes"]}
        self.roles = roles
        self.agent_count = len(roles)
        edges = [tuple(e) for e in city["edges"]]
        self.topology = build_topology(self.agent_count, edges)
        limit = city.get("max_diameter")
        if limit is not None and self.topology.diameter() > limit:
            raise ValidationError("topology", f"diameter exceeds {limit}")
        home = next(i for i, r in roles.items() if r == "Home")
        seed_node = next(i for i, r in roles.items() if r == city.get("seed_role", "Retail"))
        populations = split_population(int(city["population"]), self.agent_count, home)
        self.env = PandemicEnv(
            topology=self.topology,
            populations=populations,
            params=PandemicParams(),
            seed_node=seed_node,
            initial_infected=float(city.get("initial_infected", 5)),
            mode=cfg.pandemic_mode if cfg.pandemic_mode else EXPECTED,
        )
        self.consensus = ConsensusConfig(
            epsilon=cfg.effective_epsilon, action_min=0, action_max=4, discrete=True
        )
        from .topology import partition_neighborhood

        self.partitions = {
            n: partition_neighborhood(self.topology, n, "none")
            for n in range(self.agent_count)
        }
        self.reasoners = {}
        for n in range(self.agent_count):
            if cfg.reasoner == "llm":
                self.reasoners[n] = self._llm_reasoner(n)
            else:
                self.reasoners[n] = PandemicReasoner(
                    self.env, self.consensus, self.topology.neighbors(n)
                )
        self.default_strategy = default_pandemic_strategy

    def _llm_reasoner(self, n: int) -> LlmReasoner:
        cfg = self.cfg
        if cfg.domain == PLATOON:
            from .envs.platoon import PlatoonObservation

            codec = ObsCodec(PlatoonObservation)
            task = "cooperative platoon speed/gap control"
        else:
            from .envs.pandemic import PandemicObservation

            codec = ObsCodec(PandemicObservation)
            task = "coordinated epidemic regulation"
        endpoint = LlmEndpointConfig(
            base_url=cfg.llm_base_url,
            model_name=cfg.llm_model,
            temperature=cfg.llm_temperature,
            top_p=cfg.llm_top_p,
            max_retries=cfg.llm_max_retries,
        )
        return LlmReasoner(
            endpoint, codec, self.env.action_space, task, f"agent-{n}"
        )


def run_episode(cfg: RunConfig) -> EpisodeResult:
    """Run one full episode and return its log, metrics, and comm counters."""
    validate(cfg)
    runtime = _Runtime(cfg)
    comm = CommStats() if cfg.instrumentation else None
    log = RunLog({"config": cfg.to_dict()})
    rng = np.random.default_rng(cfg.seed)
    if cfg.domain == PLATOON:
        result = _run_platoon(cfg, runtime, comm, log)
    else:
        result = _run_pandemic(cfg, runtime, comm, log, rng)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        result.log.write(out / f"{cfg.scenario}-seed{cfg.seed}.jsonl")
    return result


def _reflect(
    runtime: _Runtime,
    agent_ids: Iterable[int],
    t: int,
    epoch_rewards: dict,
    obs_vecs: dict,
    act_vecs: dict,
    current_rewards: dict,
    log: RunLog,
) -> None:
    """Reward-decline triggered, drift-scaled strategy revision at an epoch."""
    for n in agent_ids:
        history = epoch_rewards[n]
        r_cur = current_rewards[n]
        if history and reflect_trigger(history[-1], r_cur) and len(obs_vecs[n]) >= 3:
            o0, o1, o2 = obs_vecs[n][-3], obs_vecs[n][-2], obs_vecs[n][-1]
            a0, a1 = act_vecs[n][-2], act_vecs[n][-1]
            bounds = NormalizationBounds(
                observation=runtime.obs_bounds[n],
                action=runtime.env.action_bounds(),
            )
            prev_t = build_transition(o0, o1, a0, bounds)
            cur_t = build_transition(o1, o2, a1, bounds)
            drift = drift_intensity(prev_t, cur_t)
            semantic = runtime.diagnose(n)
            signal = RevisionSignal(tuple(semantic), drift, t)
            before = dict(runtime.strategies[n].temporal_params)
            runtime.strategies[n] = apply_revision(
                runtime.strategies[n], signal, runtime.reasoners[n]
            )
            log.append(
                {
                    "type": "revision",
                    "t": t,
                    "agent": n,
                    "drift": drift,
                    "semantic": list(semantic),
                    "reward_prev": history[-1],
                    "reward_cur": r_cur,
                    "params_before": before,
                    "params_after": dict(runtime.strategies[n].temporal_params),
                }
            )
        history.append(r_cur)


def _negotiation_contexts(runtime: _Runtime, observations: dict) -> dict:
    agents = {}
    for n in sorted(observations):
        agents[n] = NegotiationAgent(
            agent_id=n,
            reasoner=runtime.reasoners[n],
            strategy=runtime.strategies[n],
            observation=observations[n],
            model=runtime.env,
            partition=runtime.partitions[n],
            rollout_cfg=runtime.rollout_cfg,
            prev_immediate_reward=runtime.prev_immediate[n],
        )
    return agents


def _after_negotiation(runtime: _Runtime, agents: dict) -> None:
    for n, agent in agents.items():
        runtime.strategies[n] = agent.strategy
        if agent.proposal is not None and agent.proposal.trajectory is not None:
            runtime.prev_immediate[n] = agent.proposal.trajectory.rewards[0]


def _run_platoon(cfg: RunConfig, runtime: _Runtime, comm, log: RunLog) -> EpisodeResult:
    env: PlatoonEnv = runtime.env
    steps = cfg.effective_steps
    state = env.initial_state()
    n_agents = runtime.agent_count
    followers = list(range(1, n_agents))

    # fixed per-agent observation bounds for transition normalization
    runtime.obs_bounds = {
        n: env.obs_vector_bounds(env.observe(state, n)) for n in range(n_agents)
    }
    last_actions: dict[int, list[float]] = {n: [] for n in range(n_agents)}

    def diagnose(n: int) -> list[str]:
        acts = last_actions[n][-2:]
        if len(acts) == 2 and acts[0] * acts[1] < 0 and min(abs(a) for a in acts) > 0.1:
            return ["oscillation around the gap target"]
        return ["tracking deviation persists"]

    runtime.diagnose = diagnose

    cached: dict[int, float] = {}
    epoch_rewards: dict[int, list[float]] = {n: [] for n in range(n_agents)}
    obs_vecs: dict[int, list[np.ndarray]] = {n: [] for n in range(n_agents)}
    act_vecs: dict[int, list[np.ndarray]] = {n: [] for n in range(n_agents)}
    negotiations = 0
    collisions = 0

    def execution_layer(n: int, obs, at_epoch: bool) -> tuple[float, bool]:
        """Per-step execution layer under the cached strategic plan.

        The negotiated acceleration executes at its decision epoch. Between
        epochs the lightweight domain controller keeps tracking the plan's
        targets with the agent's current strategy gains; emergency braking
        below the safety gap always has the last word.
        """
        p = env.params
        h = obs.pred_headway
        if at_epoch:
            planned = cached.get(n, 0.0)
        elif h is not None:
            gains = runtime.strategies[n].temporal_params
            planned = env.action_space.clamp(
                gains["headway_gain"] * (h - p.target_headway)
                + gains["velocity_gain"] * (obs.pred_velocity - obs.velocity)
            )
        else:
            planned = cached.get(n, 0.0)
        if h is not None:
            planned = env.action_space.clamp(
                safe_approach(planned, h, obs.velocity, obs.pred_velocity, p)
            )
        action, emergency = safety_override(obs, planned, p)
        return action, emergency

    try:
        for t in range(steps):
            observations = {n: env.observe(state, n) for n in range(n_agents)}
            for n in range(n_agents):
                obs_vecs[n].append(env.obs_vector(observations[n]))
            lead = runtime.reasoners[0]
            if isinstance(lead, ScriptedLeadReasoner):
                lead.current_step = t

            if t % cfg.decision_interval == 0:
                current_rewards = {
                    n: env.evaluate_obs(observations[n])[0] for n in followers
                }
                _reflect(
                    runtime, followers, t, epoch_rewards, obs_vecs, act_vecs,
                    current_rewards, log,
                )
                agents = _negotiation_contexts(runtime, observations)
                outcome = negotiate(
                    agents, runtime.topology, cfg.max_rounds, runtime.consensus,
                    comm, time_step=t,
                )
                _after_negotiation(runtime, agents)
                cached = outcome.final_actions
                negotiations += 1
                log.append(
                    {
                        "type": "negotiation",
                        "t": t,
                        **outcome.record.to_dict(),
                        "final_actions": outcome.final_actions,
                    }
                )

            at_epoch = t % cfg.decision_interval == 0
            executed: dict[int, float] = {}
            overrides: dict[int, bool] = {}
            for n in followers:
                action, overridden = execution_layer(n, observations[n], at_epoch)
                executed[n] = action
                overrides[n] = overridden
            executed[0] = env.leader_action(t)

            state = env.step(state, executed)
            for n in range(n_agents):
                last_actions[n].append(executed[n])
                act_vecs[n].append(np.array([executed[n]]))

            rewards = {}
            collided = []
            for n in followers:
                reward, verdict = env.evaluate(state, n)
                rewards[n] = reward
                if not verdict.passed:
                    collided.append(n)
            collisions += len(collided)
            log.append(
                {
                    "type": "step",
                    "t": t,
                    "actions": executed,
                    "overrides": overrides,
                    "rewards": rewards,
                    "collisions": collided,
                    "headways": [state.headway(n) for n in followers],
                    "velocities": [float(state.velocities[n]) for n in followers],
                    "leader_velocity": float(state.velocities[0]),
                }
            )
    except Exception as exc:
        log.finish({"aborted": True, "error": str(exc)})
        raise EnvironmentFailure(str(exc)) from exc

    headways, velocities, leader = platoon_arrays(log)
    metrics = compute_platoon_metrics(
        headways, velocities, leader, env.params.target_headway
    )
    comm_report = summarize(comm, n_agents) if comm else None
    log.finish(
        {
            "metrics": metrics.to_dict(),
            "comm": comm_report,
            "negotiations": negotiations,
            "collisions": collisions,
            "steps": steps,
        }
    )
    return EpisodeResult(log, metrics, comm)


def _run_pandemic(cfg: RunConfig, runtime: _Runtime, comm, log: RunLog,
                  rng: np.random.Generator) -> EpisodeResult:
    env: PandemicEnv = runtime.env
    steps = cfg.effective_steps
    state = env.initial_state()
    n_agents = runtime.agent_count
    ids = list(range(n_agents))

    runtime.obs_bounds = {
        n: env.obs_vector_bounds(env.observe(state, n)) for n in ids
    }
    infected_prev_epoch = {n: float(state.infected[n]) for n in ids}

    def diagnose(n: int) -> list[str]:
        cur = float(state.infected[n])
        if cur > infected_prev_epoch[n]:
            return ["infections rising locally"]
        return ["infections falling locally"]

    runtime.diagnose = diagnose

    log.append(
        {
            "type": "init",
            "day": 0,
            "new_infections": float(state.infected.sum()),
            "infected_total": float(state.infected.sum()),
            "critical_total": float(state.critical.sum()),
            "dead_total": float(state.dead.sum()),
            "levels": state.levels.tolist(),
        }
    )

    cached: dict[int, int] = {}
    epoch_rewards: dict[int, list[float]] = {n: [] for n in ids}
    obs_vecs: dict[int, list[np.ndarray]] = {n: [] for n in ids}
    act_vecs: dict[int, list[np.ndarray]] = {n: [] for n in ids}
    negotiations = 0
    breaches = 0

    try:
        for t in range(steps):
            observations = {n: env.observe(state, n) for n in ids}
            for n in ids:
                obs_vecs[n].append(env.obs_vector(observations[n]))

            if t % cfg.decision_interval == 0:
                current_rewards = {n: env.evaluate_obs(observations[n])[0] for n in ids}
                _reflect(
                    runtime, ids, t, epoch_rewards, obs_vecs, act_vecs,
                    current_rewards, log,
                )
                infected_prev_epoch = {n: float(state.infected[n]) for n in ids}
                agents = _negotiation_contexts(runtime, observations)
                outcome = negotiate(
                    agents, runtime.topology, cfg.max_rounds, runtime.consensus,
                    comm, time_step=t,
                )
                _after_negotiation(runtime, agents)
                cached = {n: int(a) for n, a in outcome.final_actions.items()}
                negotiations += 1
                log.append(
                    {
                        "type": "negotiation",
                        "t": t,
                        **outcome.record.to_dict(),
                        "final_actions": cached,
                    }
                )

            state = env.step(state, cached, mode=cfg.pandemic_mode, rng=rng)
            for n in ids:
                act_vecs[n].append(np.array([float(cached.get(n, 0))]))

            rewards = {}
            breached = []
            for n in ids:
                reward, verdict = env.evaluate(state, n)
                rewards[n] = reward
                if not verdict.passed:
                    breached.append(n)
            breaches += len(breached)
            log.append(
                {
                    "type": "step",
                    "t": t,
                    "day": state.day,
                    "actions": cached,
                    "rewards": rewards,
                    "capacity_breaches": breached,
                    "new_infections": float(state.last_new_infections.sum()),
                    "infected_total": float(state.infected.sum()),
                    "critical_total": float(state.critical.sum()),
                    "dead_total": float(state.dead.sum()),
                    "infected": state.infected.tolist(),
                    "levels": state.levels.tolist(),
                }
            )
    except Exception as exc:
        log.finish({"aborted": True, "error": str(exc)})
        raise EnvironmentFailure(str(exc)) from exc

    new_inf, infected, criticals, final_deaths = pandemic_arrays(log)
    metrics = compute_pandemic_metrics(
        new_inf, infected, criticals, final_deaths, float(env.populations.sum())
    )
    comm_report = summarize(comm, n_agents) if comm else None
    log.finish(
        {
            "metrics": metrics.to_dict(),
            "comm": comm_report,
            "negotiations": negotiations,
            "capacity_breaches": breaches,
            "steps": steps,
        }
    )
    return EpisodeResult(log, metrics, comm)


def replay_metrics(source: str | Path | RunLog):
    """Recompute metrics from a finished log; must match the live values."""
    log = source if isinstance(source, RunLog) else RunLog.read(source)
    if log.summary is None or log.summary.get("aborted"):
        raise IncompleteLog("cannot replay an aborted or unfinished log")
    if "metrics" not in log.summary:
        raise IncompleteLog("summary carries no metrics")
    scenario = log.header["config"]["scenario"]
    domain = PLATOON if scenario.startswith("cpp") else PANDEMIC
    if domain == PLATOON:
        headways, velocities, leader = platoon_arrays(log)
        target = 20.0
        return compute_platoon_metrics(headways, velocities, leader, target)
    new_inf, infected, criticals, final_deaths = pandemic_arrays(log)
    population = _population_of(log)
    return compute_pandemic_metrics(new_inf, infected, criticals, final_deaths, population)


def _population_of(log: RunLog) -> float:
    scenario = log.header["config"]["scenario"]
    city = load_city_config(scenario)
    return float(city["population"])


def run_suite(scenarios: Iterable[str], seeds: Iterable[int],
              overrides: dict | None = None) -> tuple[list[dict], str]:
    """Aggregate mean and standard deviation per metric across seeds.

    Returns (rows, csv text); failed runs are recorded, not fatal.
    """
    scenarios = list(scenarios)
    seeds = list(seeds)
    if not scenarios or not seeds:
        raise ValidationError("suite", "need at least one scenario and one seed")
    rows = []
    for scenario in scenarios:
        metric_values: dict[str, list[float]] = {}
        comm_values: dict[str, list[float]] = {}
        failures = 0
        for seed in seeds:
            cfg = validate(RunConfig(scenario=scenario, seed=seed, **(overrides or {})))
            try:
                result = run_episode(cfg)
            except Exception:
                failures += 1
                continue
            for key, value in result.metrics.to_dict().items():
                metric_values.setdefault(key, []).append(float(value))
            report = result.summary.get("comm") or {}
            for key in ("mean_bytes_per_agent_per_round", "mean_messages_per_agent_per_round"):
                if key in report:
                    comm_values.setdefault(key, []).append(float(report[key]))
        row: dict = {"scenario": scenario, "seeds": len(seeds), "failures": failures}
        for key, values in sorted(metric_values.items()):
            row[f"{key}_mean"] = float(np.mean(values)) if values else math.nan
            row[f"{key}_std"] = float(np.std(values)) if values else math.nan
        for key, values in sorted(comm_values.items()):
            row[f"{key}_mean"] = float(np.mean(values)) if values else math.nan
        rows.append(row)

    fieldnames: list[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return rows, buffer.getvalue()
