"""Evaluation metrics computed from logged trajectories.

Platoon: RMSE of headway/velocity against the target gap and the lead
vehicle's instantaneous speed, over all follower-step pairs; SD is the time
average of the per-step cross-vehicle standard deviation. Pandemic:
population-normalized cumulative/peak infection and deaths, plus the day
span from first infection to the start of the final infection-free stretch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompleteLog


@dataclass(frozen=True)
class PlatoonMetrics:
    rmse_h: float
    rmse_v: float
    sd_h: float
    sd_v: float

    def to_dict(self) -> dict:
        return {"rmse_h": self.rmse_h, "rmse_v": self.rmse_v,
                "sd_h": self.sd_h, "sd_v": self.sd_v}


@dataclass(frozen=True)
class PandemicMetrics:
    infection_normalized: float
    peak_infection: float
    deaths_normalized: float
    duration: int

    def to_dict(self) -> dict:
        return {
            "infection_normalized": self.infection_normalized,
            "peak_infection": self.peak_infection,
            "deaths_normalized": self.deaths_normalized,
            "duration": self.duration,
        }


def compute_platoon_metrics(
    headways, velocities, leader_velocities, target_headway: float = 20.0
) -> PlatoonMetrics:
    """Exact metric formulas over a [steps x followers] trajectory.

    `headways`/`velocities` hold one row per logged step and one column per
    follower; `leader_velocities` holds the lead vehicle's speed per step.
    """
    h = np.asarray(headways, dtype=float)
    v = np.asarray(velocities, dtype=float)
    vl = np.asarray(leader_velocities, dtype=float)
    if h.ndim != 2 or h.size == 0:
        raise IncompleteLog("headway log must be a non-empty steps x followers array")
    if h.shape != v.shape or len(vl) != h.shape[0]:
        raise IncompleteLog(
            f"inconsistent log shapes: {h.shape}, {v.shape}, {vl.shape}"
        )
    rmse_h = float(np.sqrt(np.mean((h - target_headway) ** 2)))
    rmse_v = float(np.sqrt(np.mean((v - vl[:, None]) ** 2)))
    sd_h = float(np.mean(np.std(h, axis=1)))
    sd_v = float(np.mean(np.std(v, axis=1)))
    return PlatoonMetrics(rmse_h, rmse_v, sd_h, sd_v)


def pandemic_duration(active) -> int:
    """Days from the first active day to the last, per the containment rule.

    `active` is the per-day total of infected plus critical cases. The end
    day is the earliest day after which the total stays zero forever (the
    last active day); with no infection ever the duration is zero. An
    epidemic still active on the final logged day yields that day as the end.
    """
    active = np.asarray(active, dtype=float)
    nonzero = np.flatnonzero(active > 0)
    if len(nonzero) == 0:
        return 0
    t_start = int(nonzero[0])
    t_end = int(nonzero[-1])
    return t_end - t_start


def compute_pandemic_metrics(
    new_infections, infected, criticals, final_deaths: float, population: float
) -> PandemicMetrics:
    """Normalized totals plus duration from per-day series."""
    new_inf = np.asarray(new_infections, dtype=float)
    infected = np.asarray(infected, dtype=float)
    criticals = np.asarray(criticals, dtype=float)
    if infected.size == 0 or infected.shape != criticals.shape:
        raise IncompleteLog("need aligned non-empty infected/critical series")
    if population <= 0:
        raise IncompleteLog(f"population must be positive, got {population}")
    return PandemicMetrics(
        infection_normalized=float(new_inf.sum() / population),
        peak_infection=float(infected.max() / population),
        deaths_normalized=float(final_deaths / population),
        duration=pandemic_duration(infected + criticals),
    )
