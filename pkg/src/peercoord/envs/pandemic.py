"""Graph-coupled compartment epidemic surrogate.

Replaces the external pandemic simulator with a transparent
Susceptible/Infected/Critical/Dead/Recovered model on the city graph. Each
node is one facility-type agent choosing a regulation level in {0..4} that
scales its contact rate. Infection pressure couples across edges; per-node
compartment totals are conserved exactly in expected-value mode and by
construction in stochastic mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import InvalidLevel, UnknownAgent
from ..rollout import ConstraintVerdict, Urgency
from ..topology import AgentId, Topology
from .base import ActionSpace, EnvironmentSpec

EXPECTED = "expected-value"
STOCHASTIC = "stochastic"

CONTACT_SCALE = (1.0, 0.8, 0.5, 0.25, 0.0)
LEVELS = tuple(range(5))


@dataclass(frozen=True)
class PandemicParams:
    transmission_rate: float = 0.3      # per-day base rate at level 0
    coupling: float = 0.2               # neighbor infection pressure factor
    infectious_exit: float = 1.0 / 7.0  # daily leave rate from Infected
    critical_fraction: float = 0.05     # share of I-exits that turn Critical
    critical_exit: float = 1.0 / 7.0    # daily leave rate from Critical
    death_fraction: float = 0.2         # share of C-exits that die
    level_cost_weight: float = 0.05     # eta in the reward
    capacity_fraction: float = 0.02     # hospital capacity per node
    extinction_threshold: float = 0.5   # expected-value mass below this folds to R
    escalate_at: float = 0.01           # policy: infected fraction to tighten
    deescalate_at: float = 0.001        # policy: infected fraction to relax

    def capacity(self, population: float) -> float:
        return max(1.0, round(self.capacity_fraction * population))


@dataclass(frozen=True)
class PandemicState:
    susceptible: np.ndarray
    infected: np.ndarray
    critical: np.ndarray
    dead: np.ndarray
    recovered: np.ndarray
    levels: np.ndarray
    day: int = 0
    last_new_infections: np.ndarray | None = None

    def __post_init__(self):
        for name in ("susceptible", "infected", "critical", "dead", "recovered"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "levels", np.asarray(self.levels, dtype=int))
        if self.last_new_infections is None:
            object.__setattr__(
                self, "last_new_infections", np.zeros_like(self.susceptible)
            )

    @property
    def node_count(self) -> int:
        return len(self.susceptible)

    @property
    def populations(self) -> np.ndarray:
        return self.susceptible + self.infected + self.critical + self.dead + self.recovered


@dataclass(frozen=True)
class PandemicObservation:
    """Own node only: compartment counts, regulation level, population."""

    agent: AgentId
    day: int
    susceptible: float
    infected: float
    critical: float
    dead: float
    recovered: float
    level: int
    population: float

    @property
    def infected_fraction(self) -> float:
        return self.infected / self.population if self.population > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "day": self.day,
            "susceptible": self.susceptible,
            "infected": self.infected,
            "critical": self.critical,
            "dead": self.dead,
            "recovered": self.recovered,
            "level": self.level,
            "population": self.population,
        }

    @staticmethod
    def from_dict(data: Mapping) -> "PandemicObservation":
        return PandemicObservation(**data)


def split_population(total: int, node_count: int, home_node: int = 0) -> np.ndarray:
    """Even split with the remainder assigned to the Home node."""
    base = total // node_count
    pops = np.full(node_count, float(base))
    pops[home_node] += total - base * node_count
    return pops


class PandemicEnv:
    name = "pandemic"
    discrete = True

    def __init__(
        self,
        topology: Topology,
        populations: np.ndarray,
        params: PandemicParams | None = None,
        seed_node: int = 4,
        initial_infected: float = 5.0,
        mode: str = EXPECTED,
    ):
        if mode not in (EXPECTED, STOCHASTIC):
            raise ValueError(f"unknown mode {mode!r}")
        self.topology = topology
        self.populations = np.asarray(populations, dtype=float)
        self.params = params or PandemicParams()
        self.seed_node = seed_node
        self.initial_infected = initial_infected
        self.mode = mode
        self.action_space = ActionSpace(0, 4, discrete=True)

    @property
    def spec(self) -> EnvironmentSpec:
        p = self.params
        return EnvironmentSpec(
            objective=(
                "suppress infections with the lightest regulation that keeps "
                "critical cases within hospital capacity"
            ),
            action_space=self.action_space,
            observation_bounds={"compartment": (0.0, float(self.populations.max()))},
            strict_rules=("hospital_capacity",),
            viability_rules=("hospital_capacity",),
            reward_params={"eta": p.level_cost_weight},
            targets={"infected_fraction": 0.0},
        )

    # --- state level ---

    def initial_state(self) -> PandemicState:
        n = self.topology.agent_count
        seed = min(self.initial_infected, self.populations[self.seed_node])
        susceptible = self.populations.copy()
        infected = np.zeros(n)
        susceptible[self.seed_node] -= seed
        infected[self.seed_node] = seed
        return PandemicState(
            susceptible=susceptible,
            infected=infected,
            critical=np.zeros(n),
            dead=np.zeros(n),
            recovered=np.zeros(n),
            levels=np.zeros(n, dtype=int),
            day=0,
        )

    def step(
        self,
        state: PandemicState,
        levels: Mapping[AgentId, int],
        mode: str | None = None,
        rng: np.random.Generator | None = None,
    ) -> PandemicState:
        """One day of disease dynamics under the given regulation levels.

        Per node: pressure = I + coupling * sum of neighbor I; infection
        probability 1 - exp(-rate * contact(level) * pressure / population);
        draws are binomial in stochastic mode and exact expectations in
        expected-value mode.
        """
        p = self.params
        mode = mode or self.mode
        if mode == STOCHASTIC and rng is None:
            raise ValueError("stochastic mode needs an rng")
        n = state.node_count
        new_levels = np.array(
            [int(levels.get(i, state.levels[i])) for i in range(n)], dtype=int
        )
        if np.any((new_levels < 0) | (new_levels > 4)):
            bad = new_levels[(new_levels < 0) | (new_levels > 4)][0]
            raise InvalidLevel(f"regulation level {bad} outside {{0..4}}")

        pressure = state.infected.copy()
        for i in range(n):
            for j in self.topology.neighbors(i):
                pressure[i] += p.coupling * state.infected[j]
        contact = np.array([CONTACT_SCALE[lv] for lv in new_levels])
        pops = self.populations
        prob = 1.0 - np.exp(-p.transmission_rate * contact * pressure / np.maximum(pops, 1.0))

        if mode == EXPECTED:
            new_inf = state.susceptible * prob
            exits_i = state.infected * p.infectious_exit
            to_critical = exits_i * p.critical_fraction
            to_recovered_i = exits_i - to_critical
            exits_c = state.critical * p.critical_exit
            deaths = exits_c * p.death_fraction
            to_recovered_c = exits_c - deaths
        else:
            s_int = np.floor(state.susceptible).astype(int)
            i_int = np.floor(state.infected).astype(int)
            c_int = np.floor(state.critical).astype(int)
            new_inf = rng.binomial(s_int, prob).astype(float)
            exits_i = rng.binomial(i_int, min(1.0, p.infectious_exit)).astype(float)
            to_critical = rng.binomial(exits_i.astype(int), p.critical_fraction).astype(float)
            to_recovered_i = exits_i - to_critical
            exits_c = rng.binomial(c_int, min(1.0, p.critical_exit)).astype(float)
            deaths = rng.binomial(exits_c.astype(int), p.death_fraction).astype(float)
            to_recovered_c = exits_c - deaths

        susceptible = state.susceptible - new_inf
        infected = state.infected + new_inf - exits_i
        critical = state.critical + to_critical - exits_c
        dead = state.dead + deaths
        recovered = state.recovered + to_recovered_i + to_recovered_c

        if mode == EXPECTED:
            # sub-person residue cannot go extinct exponentially; fold it out
            for arr in (infected, critical):
                tiny = (arr > 0) & (arr < p.extinction_threshold)
                recovered[tiny] += arr[tiny]
                arr[tiny] = 0.0

        return PandemicState(
            susceptible=susceptible,
            infected=infected,
            critical=critical,
            dead=dead,
            recovered=recovered,
            levels=new_levels,
            day=state.day + 1,
            last_new_infections=new_inf,
        )

    def observe(self, state: PandemicState, n: AgentId) -> PandemicObservation:
        if not (0 <= n < state.node_count):
            raise UnknownAgent(f"node {n}")
        return PandemicObservation(
            agent=n,
            day=state.day,
            susceptible=float(state.susceptible[n]),
            infected=float(state.infected[n]),
            critical=float(state.critical[n]),
            dead=float(state.dead[n]),
            recovered=float(state.recovered[n]),
            level=int(state.levels[n]),
            population=float(self.populations[n]),
        )

    def evaluate(self, state: PandemicState, n: AgentId) -> tuple[float, ConstraintVerdict]:
        return self.evaluate_obs(self.observe(state, n))

    # --- observation level ---

    def reward_obs(self, obs: PandemicObservation) -> float:
        p = self.params
        return -(obs.infected_fraction + p.level_cost_weight * obs.level / 4.0)

    def evaluate_obs(self, obs: PandemicObservation) -> tuple[float, ConstraintVerdict]:
        rule = self.check_viability(obs)
        verdict = (
            ConstraintVerdict(True) if rule is None else ConstraintVerdict(False, 0, rule)
        )
        return self.reward_obs(obs), verdict

    def check_strict(self, obs: PandemicObservation, overrides=None) -> str | None:
        return self.check_viability(obs, overrides)

    def check_viability(self, obs: PandemicObservation, overrides=None) -> str | None:
        capacity = self.params.capacity(obs.population)
        if overrides and "capacity" in overrides:
            capacity = overrides["capacity"]
        if obs.critical > capacity:
            return "hospital_capacity"
        return None

    def urgency(self, obs: PandemicObservation) -> Urgency:
        capacity = self.params.capacity(obs.population)
        if obs.critical >= 0.8 * capacity:
            return Urgency.URGENT
        if obs.infected_fraction > self.params.escalate_at:
            return Urgency.WARNING
        return Urgency.NORMAL

    def neutral_action(self, obs: PandemicObservation) -> int:
        return obs.level

    # --- negotiation support ---

    def mf_state(self, obs: PandemicObservation) -> np.ndarray:
        return np.array([obs.infected_fraction])

    def observed_neighbor_states(self, obs: PandemicObservation) -> dict[AgentId, np.ndarray]:
        return {}  # neighbor compartments are not observable

    # --- introspection support ---

    def obs_vector(self, obs: PandemicObservation) -> np.ndarray:
        return np.array(
            [obs.susceptible, obs.infected, obs.critical, obs.dead, obs.recovered,
             float(obs.level)]
        )

    def obs_vector_bounds(self, obs: PandemicObservation) -> tuple:
        pop = (0.0, obs.population)
        return (pop, pop, pop, pop, pop, (0.0, 4.0))

    def action_bounds(self) -> tuple:
        return ((0.0, 4.0),)


def pandemic_step(
    state: PandemicState,
    levels: Mapping[AgentId, int],
    topology: Topology,
    mode: str = EXPECTED,
    params: PandemicParams | None = None,
    rng: np.random.Generator | None = None,
) -> PandemicState:
    env = PandemicEnv(topology, state.populations, params, mode=mode)
    return env.step(state, levels, mode=mode, rng=rng)


def pandemic_observe(
    state: PandemicState, n: AgentId, topology: Topology,
    params: PandemicParams | None = None,
) -> PandemicObservation:
    return PandemicEnv(topology, state.populations, params).observe(state, n)


def pandemic_evaluate(
    state: PandemicState, n: AgentId, topology: Topology,
    params: PandemicParams | None = None,
) -> tuple[float, ConstraintVerdict]:
    return PandemicEnv(topology, state.populations, params).evaluate(state, n)
