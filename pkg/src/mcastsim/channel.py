"""Fading-gain generation and coherence-interval policies.

All gains are dimensionless channel power gains with unit mean.  Draws are
pure functions of the supplied generator, so per-worker streams stay
independent and every realization is reproducible from its seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelRealization",
    "CoherencePolicy",
    "coherence_interval",
    "draw_chisquare_gains",
    "draw_interuser_gains",
    "draw_rayleigh_gains",
    "draw_realization",
]

# The scaled policy evaluates log log on max(N*G, _LOGLOG_FLOOR) so it stays
# positive and finite for small populations.
_LOGLOG_FLOOR = 16


@dataclass(frozen=True)
class CoherencePolicy:
    """Slot-length policy: a fixed duration, or one shrinking slowly with
    the total user population (value / log log max(N*G, 16))."""

    mode: str          # "fixed" or "scaled"
    value: float       # Tc itself, or the scale constant

    def __post_init__(self):
        if self.mode not in ("fixed", "scaled"):
            raise ValueError(f"unknown coherence mode {self.mode!r}")
        if not self.value > 0:
            raise ValueError("coherence parameter must be positive")

    @classmethod
    def fixed(cls, tc: float) -> "CoherencePolicy":
        return cls("fixed", float(tc))

    @classmethod
    def scaled(cls, c: float) -> "CoherencePolicy":
        return cls("scaled", float(c))


@dataclass(frozen=True)
class ChannelRealization:
    """One slot's power gains: per-group base-station gains, plus the
    inter-user gain matrix when user cooperation is in play."""

    bs_gains: tuple[np.ndarray, ...]
    interuser_gains: np.ndarray | None = None

    def __post_init__(self):
        if not self.bs_gains:
            raise ValueError("need at least one group of gains")
        n = self.bs_gains[0].size
        for g in self.bs_gains:
            if g.size != n or np.any(g < 0):
                raise ValueError("groups must share a size and gains must be nonnegative")
        if self.interuser_gains is not None:
            m = self.interuser_gains
            if m.shape != (n, n) or np.any(m < 0):
                raise ValueError("inter-user matrix must be n x n and nonnegative")


def coherence_interval(policy: CoherencePolicy, n_users: int, n_groups: int = 1) -> float:
    """Slot duration for ``n_groups`` groups of ``n_users`` each."""
    if n_users < 1 or n_groups < 1:
        raise ValueError("n_users and n_groups must be at least 1")
    if policy.mode == "fixed":
        return policy.value
    population = max(n_users * n_groups, _LOGLOG_FLOOR)
    return policy.value / math.log(math.log(population))


def draw_rayleigh_gains(n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. Rayleigh-fading power gains, i.e. unit-mean exponentials."""
    if n < 1:
        raise ValueError("need at least one gain")
    return rng.exponential(1.0, n)


def draw_chisquare_gains(n: int, antennas: int, rng: np.random.Generator) -> np.ndarray:
    """n effective power gains for a transmitter splitting power equally
    over ``antennas`` antennas: the mean of that many unit exponentials.

    With a single antenna this consumes the generator exactly like
    draw_rayleigh_gains and returns the identical stream.
    """
    if n < 1:
        raise ValueError("need at least one gain")
    if antennas < 1:
        raise ValueError("need at least one antenna")
    return rng.exponential(1.0, (n, antennas)).mean(axis=1)


def draw_interuser_gains(n: int, rng: np.random.Generator) -> np.ndarray:
    """n x n matrix of i.i.d. unit-mean exponential gains between users.

    Entry (i, j) is the gain from user i transmitting to user j; (i, j) and
    (j, i) are independent.  The diagonal is zeroed and never consumed.
    """
    if n < 2:
        raise ValueError("inter-user gains need at least two users")
    gains = rng.exponential(1.0, (n, n))
    np.fill_diagonal(gains, 0.0)
    return gains


def draw_realization(
    n_users: int,
    rng: np.random.Generator,
    n_groups: int = 1,
    antennas: int = 1,
    with_interuser: bool = False,
) -> ChannelRealization:
    """One slot's worth of fresh gains for every group (and the inter-user
    matrix when requested)."""
    groups = tuple(draw_chisquare_gains(n_users, antennas, rng) for _ in range(n_groups))
    inter = draw_interuser_gains(n_users, rng) if with_interuser else None
    return ChannelRealization(groups, inter)
