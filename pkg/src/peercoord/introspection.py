"""Drift-aware reflection: transition vectors, drift intensity, revision.

A transition is summarized as the min-max normalized observation change
concatenated with the normalized action. Scene drift is one minus the cosine
similarity of two consecutive transitions; it scales how far a strategy
revision may move parameters. Reflection only triggers on a strict reward
decline between steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import BoundsMismatch, DimensionMismatch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalizationBounds:
    """Per-component (min, max) ranges for observations and actions."""

    observation: tuple
    action: tuple

    def __post_init__(self):
        for lo, hi in tuple(self.observation) + tuple(self.action):
            if hi <= lo:
                raise ValueError(f"bad bound ({lo}, {hi})")


@dataclass(frozen=True)
class TransitionVector:
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))
        if np.any((self.components < -1e-12) | (self.components > 1 + 1e-12)):
            raise ValueError("transition components must lie in [0, 1]")


@dataclass(frozen=True)
class RevisionSignal:
    semantic: tuple
    drift: float
    triggered_at: int

    def __post_init__(self):
        if not (0.0 <= self.drift <= 2.0):
            raise ValueError(f"drift must be in [0, 2], got {self.drift}")


def build_transition(obs_t, obs_t1, action, bounds: NormalizationBounds) -> TransitionVector:
    """Concatenate the normalized observation delta with the normalized action.

    Delta components are |o_{t+1} - o_t| / (max - min), so an unchanged
    observation maps to zero while the action keeps its position in range
    (midpoint maps to 0.5). Out-of-range inputs are clamped with a warning.
    """
    o0 = np.atleast_1d(np.asarray(obs_t, dtype=float))
    o1 = np.atleast_1d(np.asarray(obs_t1, dtype=float))
    a = np.atleast_1d(np.asarray(action, dtype=float))
    if len(o0) != len(bounds.observation) or len(o0) != len(o1):
        raise BoundsMismatch(
            f"observation dim {len(o0)}/{len(o1)} vs {len(bounds.observation)} bounds"
        )
    if len(a) != len(bounds.action):
        raise BoundsMismatch(f"action dim {len(a)} vs {len(bounds.action)} bounds")
    parts = []
    for x0, x1, (lo, hi) in zip(o0, o1, bounds.observation):
        c0, c1 = _clamped(x0, lo, hi), _clamped(x1, lo, hi)
        parts.append(abs(c1 - c0) / (hi - lo))
    for x, (lo, hi) in zip(a, bounds.action):
        parts.append((_clamped(x, lo, hi) - lo) / (hi - lo))
    return TransitionVector(np.array(parts))


def _clamped(x: float, lo: float, hi: float) -> float:
    if x < lo or x > hi:
        log.warning("component %s outside [%s, %s]; clamping", x, lo, hi)
        return min(max(x, lo), hi)
    return x


def drift_intensity(prev, cur) -> float:
    """1 - cosine(prev, cur), in [0, 2].

    Degenerate norms: both zero means a consistent standstill (0); exactly
    one zero is maximal ambiguity without evidence of reversal (1).
    """
    a = np.asarray(getattr(prev, "components", prev), dtype=float)
    b = np.asarray(getattr(cur, "components", cur), dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 and nb == 0.0:
        return 0.0
    if na == 0.0 or nb == 0.0:
        return 1.0
    cos = float(np.dot(a, b) / (na * nb))
    return float(np.clip(1.0 - cos, 0.0, 2.0))


def reflect_trigger(reward_prev: float, reward_cur: float) -> bool:
    """Reflection starts only on a strict decline."""
    return reward_cur < reward_prev


def revision_cap(drift: float) -> float:
    """Largest relative parameter change a revision may apply."""
    return 0.5 * (drift / 2.0)


def apply_revision(strategy, signal: RevisionSignal, reasoner):
    """Delegate to the reasoner; zero drift or a failing reasoner leave it be."""
    if signal.drift == 0.0:
        return strategy
    try:
        return reasoner.revise_strategy(strategy, signal)
    except Exception as exc:
        log.warning("strategy revision failed (%s); keeping previous strategy", exc)
        return strategy
