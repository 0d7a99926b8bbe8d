from .base import ActionSpace, EnvironmentSpec
from .pandemic import (
    EXPECTED,
    STOCHASTIC,
    PandemicEnv,
    PandemicObservation,
    PandemicParams,
    PandemicState,
    pandemic_evaluate,
    pandemic_observe,
    pandemic_step,
    split_population,
)
from .platoon import (
    CATCH_UP,
    SLOW_DOWN,
    PlatoonEnv,
    PlatoonObservation,
    PlatoonParams,
    PlatoonState,
    initial_platoon_state,
    leader_profile,
    platoon_evaluate,
    platoon_observe,
    platoon_step,
    safety_override,
)

__all__ = [
    "ActionSpace", "EnvironmentSpec",
    "EXPECTED", "STOCHASTIC", "PandemicEnv", "PandemicObservation", "PandemicParams",
    "PandemicState", "pandemic_evaluate", "pandemic_observe", "pandemic_step",
    "split_population",
    "CATCH_UP", "SLOW_DOWN", "PlatoonEnv", "PlatoonObservation", "PlatoonParams",
    "PlatoonState", "initial_platoon_state", "leader_profile", "platoon_evaluate",
    "platoon_observe", "platoon_step", "safety_override",
]
