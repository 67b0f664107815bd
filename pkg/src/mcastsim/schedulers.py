"""Per-slot scheduling decisions for every scheme.

The fixed-fraction scheduler keys the rate to the gain at the ascending
position N - N/alpha + 1, so exactly N/alpha users decode.  The
retransmission scheme accumulates mutual information across attempts until
the slowest user crosses the rate target.  The cooperative scheme serves
the stronger half first and lets it relay to the weaker half.

Decisions are pure functions of the gains; ties are broken toward the
lowest user/group index so floating-point coincidences stay reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "CAP_VIOLATION",
    "CONTINUE",
    "CoopDecision",
    "IrState",
    "IrStateError",
    "SUCCESS",
    "SchedulerDecision",
    "cooperative_schedule",
    "ir_advance",
    "multigroup_cooperative_schedule",
    "multigroup_static_schedule",
    "static_schedule",
]

CONTINUE = "continue"
SUCCESS = "success"
CAP_VIOLATION = "cap-violation"


class IrStateError(RuntimeError):
    """An accumulation state that already stopped was advanced again."""


@dataclass(frozen=True)
class SchedulerDecision:
    group: int
    target_position: int            # 1-based position in the ascending gain order
    decodable_set: frozenset[int]
    rate: float                     # nats per channel use


@dataclass(frozen=True)
class CoopDecision:
    stage1_rate: float
    stage2_rate: float
    effective_rate: float
    first_half_set: frozenset[int]


@dataclass(frozen=True)
class IrState:
    """Per-user mutual information accumulated so far, in nats per channel
    use, plus the attempt counter and stopping parameters."""

    accumulated_mi: tuple[float, ...]
    attempts: int
    rate_target: float
    attempt_cap: int | None = None

    @classmethod
    def fresh(cls, n_users: int, rate_target: float, attempt_cap: int | None = None) -> "IrState":
        if n_users < 1:
            raise ValueError("need at least one user")
        if not rate_target > 0:
            raise ValueError("rate target must be positive")
        if attempt_cap is not None and attempt_cap < 1:
            raise ValueError("attempt cap must be at least 1")
        return cls((0.0,) * n_users, 0, float(rate_target), attempt_cap)

    @property
    def verdict(self) -> str:
        if self.attempts >= 1 and min(self.accumulated_mi) > self.rate_target:
            return SUCCESS
        if self.attempt_cap is not None and self.attempts >= self.attempt_cap:
            return CAP_VIOLATION
        return CONTINUE


def _as_gains(gains: Sequence[float]) -> np.ndarray:
    g = np.asarray(gains, dtype=float)
    if g.ndim != 1 or g.size < 1:
        raise ValueError("gains must be a nonempty vector")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite and nonnegative")
    return g


def _descending_order(gains: np.ndarray) -> np.ndarray:
    # sort by gain descending, ties by lowest user index
    return np.lexsort((np.arange(gains.size), -gains))


def static_schedule(gains: Sequence[float], alpha: int, power: float) -> SchedulerDecision:
    """Rate the slot for the user at ascending position N - N/alpha + 1;
    everyone at or above that gain decodes."""
    g = _as_gains(gains)
    n = g.size
    if alpha < 1 or alpha > n or n % alpha != 0:
        raise ValueError(f"alpha={alpha} must divide the user count {n}")
    if not power > 0:
        raise ValueError("power must be positive")
    share = n // alpha
    order = _descending_order(g)
    target = order[share - 1]
    return SchedulerDecision(
        group=0,
        target_position=n - share + 1,
        decodable_set=frozenset(int(i) for i in order[:share]),
        rate=float(np.log1p(power * g[target])),
    )


def multigroup_static_schedule(
    all_gains: Sequence[Sequence[float]], alpha: int, power: float
) -> SchedulerDecision:
    """Fixed-fraction decision for the group whose scheduled order
    statistic is largest this slot."""
    decisions = [static_schedule(g, alpha, power) for g in all_gains]
    best = max(range(len(decisions)), key=lambda i: decisions[i].rate)
    chosen = decisions[best]
    return SchedulerDecision(
        group=best,
        target_position=chosen.target_position,
        decodable_set=chosen.decodable_set,
        rate=chosen.rate,
    )


def ir_advance(
    state: IrState, gains: Sequence[float], power: float
) -> tuple[IrState, str]:
    """One more transmission attempt: every user's accumulated mutual
    information grows by log(1 + gain * P); stop once the slowest user
    clears the target, or the attempt cap is hit."""
    if state.verdict != CONTINUE:
        raise IrStateError(f"state already stopped with verdict {state.verdict!r}")
    g = _as_gains(gains)
    if g.size != len(state.accumulated_mi):
        raise ValueError("gain vector size does not match the user count")
    if not power > 0:
        raise ValueError("power must be positive")
    acc = np.asarray(state.accumulated_mi) + np.log1p(power * g)
    advanced = IrState(
        tuple(float(v) for v in acc),
        state.attempts + 1,
        state.rate_target,
        state.attempt_cap,
    )
    return advanced, advanced.verdict


def cooperative_schedule(
    bs_gains: Sequence[float], interuser_gains: np.ndarray, power: float
) -> CoopDecision:
    """Two-stage decision: stage 1 reaches the top half at the median-user
    rate; stage 2 has that half relay with power P/(N/2) each, rated for
    the worst remaining user; the packet moves at the lesser stage rate."""
    g = _as_gains(bs_gains)
    n = g.size
    if n < 2 or n % 2 != 0:
        raise ValueError("cooperation needs an even number of users, at least 2")
    if not power > 0:
        raise ValueError("power must be positive")
    u = np.asarray(interuser_gains, dtype=float)
    if u.shape != (n, n):
        raise ValueError("inter-user gain matrix must be n x n")
    if np.any(u < 0):
        raise ValueError("inter-user gains must be nonnegative")
    half = n // 2
    order = _descending_order(g)
    first_half = order[:half]
    rest = order[half:]
    rs1 = float(np.log1p(power * g[order[half - 1]]))
    received = u[np.ix_(first_half, rest)].sum(axis=0) / half
    rs2 = float(np.log1p(power * received.min()))
    return CoopDecision(
        stage1_rate=rs1,
        stage2_rate=rs2,
        effective_rate=min(rs1, rs2),
        first_half_set=frozenset(int(i) for i in first_half),
    )


def multigroup_cooperative_schedule(
    bs_gains_per_group: Sequence[Sequence[float]],
    interuser_per_group: Sequence[np.ndarray],
    power: float,
) -> tuple[CoopDecision, int]:
    """Cooperative decision for the group offering the largest
    (N/2) * min(stage rates) this slot."""
    if len(bs_gains_per_group) != len(interuser_per_group) or not bs_gains_per_group:
        raise ValueError("need matching, nonempty per-group gain lists")
    decisions = [
        cooperative_schedule(b, u, power)
        for b, u in zip(bs_gains_per_group, interuser_per_group)
    ]
    half = np.asarray(bs_gains_per_group[0]).size // 2
    best = max(range(len(decisions)), key=lambda i: half * decisions[i].effective_rate)
    return decisions[best], best
