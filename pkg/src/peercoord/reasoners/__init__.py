from .base import ConflictAssessment, Reasoner, Strategy, conflict_weights
from .llm import API_KEY_ENV, LlmEndpointConfig, LlmReasoner, ObsCodec
from .pandemic import PandemicReasoner, default_pandemic_strategy
from .platoon import PlatoonReasoner, ScriptedLeadReasoner, default_platoon_strategy

__all__ = [
    "ConflictAssessment", "Reasoner", "Strategy", "conflict_weights",
    "API_KEY_ENV", "LlmEndpointConfig", "LlmReasoner", "ObsCodec",
    "PandemicReasoner", "default_pandemic_strategy",
    "PlatoonReasoner", "ScriptedLeadReasoner", "default_platoon_strategy",
]
