"""Exception hierarchy shared across the framework."""


class PeercoordError(Exception):
    """Base class for all framework errors."""


# --- topology ---

class DisconnectedGraph(PeercoordError):
    pass


class SelfLoop(PeercoordError):
    pass


class NonPositiveWeight(PeercoordError):
    pass


class UnknownAgent(PeercoordError):
    pass


class SchemeInapplicable(PeercoordError):
    pass


# --- weighted statistics ---

class EmptyInput(PeercoordError):
    pass


class LengthMismatch(PeercoordError):
    pass


class InvalidParams(PeercoordError):
    pass


class EmptyPartition(PeercoordError):
    pass


# --- rollout / proposals ---

class EmptyTrajectory(PeercoordError):
    pass


class PredictionFailure(PeercoordError):
    pass


class NoCandidate(PeercoordError):
    pass


# --- negotiation ---

class IncomparableProposals(PeercoordError):
    pass


class WeightsNotNormalized(PeercoordError):
    pass


class DiscreteDomain(PeercoordError):
    pass


class AllZeroConfidence(PeercoordError):
    pass


# --- introspection ---

class BoundsMismatch(PeercoordError):
    pass


class DimensionMismatch(PeercoordError):
    pass


# --- reasoners ---

class ReasonerFailure(PeercoordError):
    pass


# --- environments ---

class OutOfRangeAction(PeercoordError):
    pass


class InvalidLevel(PeercoordError):
    pass


# EnvironmentError is a Python builtin (alias of OSError), so the
# environment-abort error carries a distinct name.
class EnvironmentFailure(PeercoordError):
    pass


# --- harness / logs ---

class ConfigError(PeercoordError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    """Config validation failure; `field` holds the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class IncompleteLog(PeercoordError):
    pass
