"""Kinematic single-lane platoon surrogate.

Replaces the external traffic simulator with transparent constant-
acceleration kinematics so every number in the pipeline is oracle-checkable.
Vehicle 0 is the scripted lead vehicle: it participates in message passing
like any agent but its executed acceleration always comes from the scenario
profile. Headway is the bumper gap to the predecessor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from ..errors import OutOfRangeAction, UnknownAgent
from ..rollout import ConstraintVerdict, Urgency
from ..topology import AgentId
from .base import ActionSpace, EnvironmentSpec

CATCH_UP = "catch-up"
SLOW_DOWN = "slow-down"


@dataclass(frozen=True)
class PlatoonParams:
    dt: float = 0.5
    v_max: float = 30.0
    accel_low: float = -2.5
    accel_high: float = 2.5
    target_headway: float = 20.0
    target_velocity: float = 15.0
    min_headway: float = 1.0
    safety_headway: float = 5.0
    headway_weight: float = 1.0
    velocity_weight: float = 1.0
    max_observable_headway: float = 100.0


@dataclass(frozen=True)
class PlatoonState:
    """Bumper positions (front to back, strictly decreasing) and velocities."""

    positions: np.ndarray
    velocities: np.ndarray
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "velocities", np.asarray(self.velocities, dtype=float))

    @property
    def vehicle_count(self) -> int:
        return len(self.positions)

    def headway(self, n: int) -> float:
        """Gap to the predecessor; vehicle 0 has none."""
        return float(self.positions[n - 1] - self.positions[n])


@dataclass(frozen=True)
class PlatoonObservation:
    """Local slice: own velocity plus immediately adjacent gaps/velocities."""

    agent: AgentId
    step: int
    velocity: float
    pred_headway: float | None = None
    pred_velocity: float | None = None
    foll_headway: float | None = None
    foll_velocity: float | None = None

    @property
    def pred_id(self) -> AgentId | None:
        return self.agent - 1 if self.pred_headway is not None else None

    @property
    def foll_id(self) -> AgentId | None:
        return self.agent + 1 if self.foll_headway is not None else None

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "step": self.step,
            "velocity": self.velocity,
            "pred_headway": self.pred_headway,
            "pred_velocity": self.pred_velocity,
            "foll_headway": self.foll_headway,
            "foll_velocity": self.foll_velocity,
        }

    @staticmethod
    def from_dict(data: Mapping) -> "PlatoonObservation":
        return PlatoonObservation(**data)


def leader_profile(scenario: str, t: int, params: PlatoonParams | None = None) -> float:
    """Scripted lead acceleration at time step t.

    catch-up ramps 12 -> 15 m/s at +1.5 m/s^2 (2 s), then cruises;
    slow-down ramps 20 -> 15 m/s at -1.0 m/s^2 (5 s), then cruises.
    """
    params = params or PlatoonParams()
    seconds = t * params.dt
    if scenario == CATCH_UP:
        return 1.5 if seconds < 2.0 else 0.0
    if scenario == SLOW_DOWN:
        return -1.0 if seconds < 5.0 else 0.0
    raise ValueError(f"unknown scenario {scenario!r}")


def initial_platoon_state(scenario: str, vehicle_count: int = 8,
                          params: PlatoonParams | None = None) -> PlatoonState:
    """All gaps at the target headway; initial speed set by the scenario."""
    params = params or PlatoonParams()
    v0 = 12.0 if scenario == CATCH_UP else 20.0
    gap = params.target_headway
    positions = np.array([gap * (vehicle_count - 1 - i) for i in range(vehicle_count)])
    velocities = np.full(vehicle_count, v0)
    return PlatoonState(positions, velocities, 0)


class PlatoonEnv:
    """State transitions plus the observation-level surface used by rollouts."""

    name = "platoon"
    discrete = False

    def __init__(self, scenario: str = CATCH_UP, vehicle_count: int = 8,
                 params: PlatoonParams | None = None):
        if scenario not in (CATCH_UP, SLOW_DOWN):
            raise ValueError(f"unknown scenario {scenario!r}")
        self.scenario = scenario
        self.vehicle_count = vehicle_count
        self.params = params or PlatoonParams()
        self.action_space = ActionSpace(self.params.accel_low, self.params.accel_high)

    @property
    def spec(self) -> EnvironmentSpec:
        p = self.params
        return EnvironmentSpec(
            objective=(
                f"hold {p.target_headway} m headway and {p.target_velocity} m/s "
                "across the platoon without collisions"
            ),
            action_space=self.action_space,
            observation_bounds={
                "velocity": (0.0, p.v_max),
                "headway": (0.0, p.max_observable_headway),
            },
            strict_rules=("headway", "speed"),
            viability_rules=("headway",),
            reward_params={"alpha": p.headway_weight, "beta": p.velocity_weight},
            targets={"headway": p.target_headway, "velocity": p.target_velocity},
        )

    # --- state level ---

    def initial_state(self) -> PlatoonState:
        return initial_platoon_state(self.scenario, self.vehicle_count, self.params)

    def leader_action(self, t: int) -> float:
        return leader_profile(self.scenario, t, self.params)

    def step(self, state: PlatoonState, actions: Mapping[AgentId, float]) -> PlatoonState:
        """v' = clamp(v + a dt, 0, v_max); x' = x + v dt + a dt^2 / 2.

        Vehicle 0 follows the scenario profile regardless of `actions`.
        """
        p = self.params
        accel = np.zeros(state.vehicle_count)
        accel[0] = self.leader_action(state.step)
        for n in range(1, state.vehicle_count):
            a = actions.get(n, 0.0)
            if not self.action_space.contains(a):
                raise OutOfRangeAction(f"vehicle {n}: acceleration {a}")
            accel[n] = a
        velocities = np.clip(state.velocities + accel * p.dt, 0.0, p.v_max)
        positions = state.positions + state.velocities * p.dt + 0.5 * accel * p.dt**2
        return PlatoonState(positions, velocities, state.step + 1)

    def observe(self, state: PlatoonState, n: AgentId) -> PlatoonObservation:
        if not (0 <= n < state.vehicle_count):
            raise UnknownAgent(f"vehicle {n}")
        obs = PlatoonObservation(
            agent=n, step=state.step, velocity=float(state.velocities[n])
        )
        if n > 0:
            obs = replace(
                obs,
                pred_headway=state.headway(n),
                pred_velocity=float(state.velocities[n - 1]),
            )
        if n < state.vehicle_count - 1:
            obs = replace(
                obs,
                foll_headway=state.headway(n + 1),
                foll_velocity=float(state.velocities[n + 1]),
            )
        return obs

    def evaluate(self, state: PlatoonState, n: AgentId) -> tuple[float, ConstraintVerdict]:
        return self.evaluate_obs(self.observe(state, n))

    # --- observation level ---

    def reward_obs(self, obs: PlatoonObservation) -> float:
        p = self.params
        reward = -p.velocity_weight * abs(obs.velocity - p.target_velocity)
        if obs.pred_headway is not None:
            reward -= p.headway_weight * abs(obs.pred_headway - p.target_headway)
        return reward

    def evaluate_obs(self, obs: PlatoonObservation) -> tuple[float, ConstraintVerdict]:
        rule = self.check_strict(obs)
        verdict = (
            ConstraintVerdict(True) if rule is None else ConstraintVerdict(False, 0, rule)
        )
        return self.reward_obs(obs), verdict

    def check_strict(self, obs: PlatoonObservation, overrides=None) -> str | None:
        rule = self.check_viability(obs, overrides)
        if rule is not None:
            return rule
        if not (0.0 <= obs.velocity <= self.params.v_max):
            return "speed"
        return None

    def check_viability(self, obs: PlatoonObservation, overrides=None) -> str | None:
        min_headway = self.params.min_headway
        if overrides and "min_headway" in overrides:
            min_headway = overrides["min_headway"]
        if obs.pred_headway is not None and obs.pred_headway <= min_headway:
            return "headway"
        return None

    def urgency(self, obs: PlatoonObservation) -> Urgency:
        if obs.pred_headway is None:
            return Urgency.NORMAL
        if obs.pred_headway < self.params.safety_headway:
            return Urgency.URGENT
        if abs(obs.pred_headway - self.params.target_headway) > 10.0:
            return Urgency.WARNING
        return Urgency.NORMAL

    def neutral_action(self, obs: PlatoonObservation) -> float:
        return 0.0

    # --- negotiation support ---

    def mf_state(self, obs: PlatoonObservation) -> np.ndarray:
        return np.array([obs.velocity])

    def observed_neighbor_states(self, obs: PlatoonObservation) -> dict[AgentId, np.ndarray]:
        out: dict[AgentId, np.ndarray] = {}
        if obs.pred_id is not None:
            out[obs.pred_id] = np.array([obs.pred_velocity])
        if obs.foll_id is not None:
            out[obs.foll_id] = np.array([obs.foll_velocity])
        return out

    # --- introspection support ---

    def obs_vector(self, obs: PlatoonObservation) -> np.ndarray:
        parts = [obs.velocity]
        if obs.pred_headway is not None:
            parts += [obs.pred_headway, obs.pred_velocity]
        if obs.foll_headway is not None:
            parts += [obs.foll_headway, obs.foll_velocity]
        return np.array(parts)

    def obs_vector_bounds(self, obs: PlatoonObservation) -> tuple:
        p = self.params
        vel = (0.0, p.v_max)
        gap = (0.0, p.max_observable_headway)
        bounds = [vel]
        if obs.pred_headway is not None:
            bounds += [gap, vel]
        if obs.foll_headway is not None:
            bounds += [gap, vel]
        return tuple(bounds)

    def action_bounds(self) -> tuple:
        return ((self.params.accel_low, self.params.accel_high),)


def platoon_step(state: PlatoonState, actions: Mapping[AgentId, float], scenario: str,
                 params: PlatoonParams | None = None) -> PlatoonState:
    return PlatoonEnv(scenario, state.vehicle_count, params).step(state, actions)


def platoon_observe(state: PlatoonState, n: AgentId,
                    params: PlatoonParams | None = None) -> PlatoonObservation:
    return PlatoonEnv(CATCH_UP, state.vehicle_count, params).observe(state, n)


def platoon_evaluate(state: PlatoonState, n: AgentId,
                     params: PlatoonParams | None = None) -> tuple[float, ConstraintVerdict]:
    return PlatoonEnv(CATCH_UP, state.vehicle_count, params).evaluate(state, n)


def safe_approach(accel: float, headway: float | None, own_velocity: float,
                  pred_velocity: float, params: PlatoonParams | None = None) -> float:
    """Brake fully once the approach leaves the guaranteed-stopping envelope.

    Worst case the predecessor also brakes to a stop, so the gap consumed is
    the stopping-distance difference (v^2 - v_pred^2) / 2a; braking starts
    when that exceeds the available margin above the safety gap, checked
    with a 10% speed margin for reaction lag.
    """
    p = params or PlatoonParams()
    if headway is None or own_velocity <= pred_velocity:
        return accel
    margin = max(0.0, headway - p.safety_headway)
    if own_velocity**2 - pred_velocity**2 > 2.0 * p.accel_high * margin * 0.81:
        return p.accel_low
    return accel


def safety_override(obs: PlatoonObservation, planned: float,
                    params: PlatoonParams | None = None) -> tuple[float, bool]:
    """Emergency braking below the safety gap.

    Deceleration grows proportionally with the intrusion below the threshold
    and saturates at full braking once the gap reaches the midpoint between
    the threshold and the collision bound; above the threshold the planned
    action passes through untouched. A plan already braking harder than the
    emergency value is never weakened.
    """
    p = params or PlatoonParams()
    h = obs.pred_headway
    if h is None or h >= p.safety_headway:
        return planned, False
    gain = p.accel_high / ((p.safety_headway - p.min_headway) / 2.0)
    braking = max(p.accel_low, -gain * (p.safety_headway - h))
    return min(planned, braking), True
