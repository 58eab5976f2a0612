"""
Energy-theft scenarios applied to genuine daily profiles.

    h1  alpha * m_t                     (alpha drawn once per profile)
    h2  beta_t * m_t                    (beta_t drawn per reading)
    h3  0 on [t_i, t_f], m_t elsewhere
    h4  mean(m)
    h5  beta_t * mean(m)
    h6  m_{49-t}                        (the day read backwards)

alpha and beta_t are Uniform(0.1, 0.8).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from ..utils.common import READINGS_PER_DAY
from ..utils.errors import InvalidScenarioError
from .readings import DailyProfile

logger = logging.getLogger(__name__)

BETA_LOW, BETA_HIGH = 0.1, 0.8
# h3 window: start in [1, 42], at least 6 slots (3 hours) long
H3_LAST_START = 42
H3_MIN_LENGTH = 6


class TheftKind(str, Enum):
    H1 = "h1"
    H2 = "h2"
    H3 = "h3"
    H4 = "h4"
    H5 = "h5"
    H6 = "h6"


@dataclass(frozen=True)
class TheftScenario:
    kind: TheftKind
    alpha: Optional[float] = None
    interval: Optional[tuple[int, int]] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", TheftKind(self.kind))
        except ValueError as e:
            raise InvalidScenarioError(f"Unknown theft scenario: {self.kind}") from e
        if self.alpha is not None and not 0.0 < self.alpha <= 1.0:
            raise InvalidScenarioError(f"h1 alpha must be in (0, 1], got {self.alpha}")
        if self.interval is not None:
            t_i, t_f = (int(t) for t in self.interval)
            if not 1 <= t_i <= t_f <= READINGS_PER_DAY:
                raise InvalidScenarioError(
                    f"h3 interval must satisfy 1 <= t_i <= t_f <= {READINGS_PER_DAY}, got ({t_i}, {t_f})"
                )
            object.__setattr__(self, "interval", (t_i, t_f))

    def describe(self) -> str:
        if self.kind is TheftKind.H1 and self.alpha is not None:
            return f"h1(alpha={self.alpha:.4f})"
        if self.kind is TheftKind.H3 and self.interval is not None:
            return f"h3({self.interval[0]}-{self.interval[1]})"
        return self.kind.value


def sample_scenario(kind: Union[TheftKind, str], rng: np.random.Generator) -> TheftScenario:
    """Draw the per-profile parameters (h1 alpha, h3 window) for a scenario kind."""
    kind = TheftKind(kind)
    if kind is TheftKind.H1:
        return TheftScenario(kind, alpha=float(rng.uniform(BETA_LOW, BETA_HIGH)))
    if kind is TheftKind.H3:
        t_i = int(rng.integers(1, H3_LAST_START + 1))
        length = int(rng.integers(H3_MIN_LENGTH, READINGS_PER_DAY - t_i + 2))
        return TheftScenario(kind, interval=(t_i, t_i + length - 1))
    return TheftScenario(kind)


def apply_to_readings(readings: np.ndarray, scenario: TheftScenario, rng: np.random.Generator) -> np.ndarray:
    """Apply a scenario to one 48-reading array; missing parameters are drawn from rng."""
    m = np.asarray(readings, dtype=np.float64)
    kind = scenario.kind
    if (kind is TheftKind.H1 and scenario.alpha is None) or (kind is TheftKind.H3 and scenario.interval is None):
        scenario = sample_scenario(kind, rng)

    if kind is TheftKind.H1:
        return scenario.alpha * m
    if kind is TheftKind.H2:
        return rng.uniform(BETA_LOW, BETA_HIGH, size=m.shape) * m
    if kind is TheftKind.H3:
        t_i, t_f = scenario.interval
        out = m.copy()
        out[t_i - 1:t_f] = 0.0
        return out
    if kind is TheftKind.H4:
        return np.full_like(m, m.mean())
    if kind is TheftKind.H5:
        return rng.uniform(BETA_LOW, BETA_HIGH, size=m.shape) * m.mean()
    return m[::-1].copy()


def apply_theft_scenario(profile: DailyProfile, scenario: TheftScenario, rng: np.random.Generator) -> DailyProfile:
    """
    Return the theft version of a genuine profile.

    Args:
        profile: Source meter-day
        scenario: Scenario kind plus optional fixed alpha / window
        rng: Generator for beta_t draws and any missing parameters

    Returns:
        New profile with the same meter id and day
    """
    return DailyProfile(
        meter_id=profile.meter_id,
        day=profile.day,
        readings=apply_to_readings(profile.readings, scenario, rng),
    )
