"""Head-of-line transmission delay under the coupled-queue model.

A tagged packet sits at the head of the alpha coupled queues that jointly
cover all users of its group.  Each slot the server picks one of the
Q = G * C(N, N/alpha) queues uniformly; only picks landing on a coupled
queue advance the packet, by Tc times that slot's service rate.  The
packet is delivered once every coupled queue has drained its copy.

The uniform pick is simulated with geometric gaps between hits, so a run
costs O(number of hits) regardless of how large Q grows; the slot count
returned is distributed exactly as the slot-by-slot Bernoulli process.
Gap, queue-index and rate draws happen unconditionally on every hit, which
keeps paired-seed runs coupled (e.g. raising P can only remove slots).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mcastsim import channel, schedulers

__all__ = [
    "RateModel",
    "TaggedPacketState",
    "ir_renewal_cycle",
    "tagged_delay_coop",
    "tagged_delay_ir",
    "tagged_delay_static",
]


@dataclass(frozen=True)
class RateModel:
    """Where per-hit service rates come from: fresh fading pushed through
    the scheduler, or a memoryless server with mean 1/mu."""

    kind: str                 # "empirical" or "exponential"
    mu: float | None = None

    def __post_init__(self):
        if self.kind not in ("empirical", "exponential"):
            raise ValueError(f"unknown rate model {self.kind!r}")
        if self.kind == "exponential" and not (self.mu is not None and self.mu > 0):
            raise ValueError("exponential server needs mu > 0")

    @classmethod
    def empirical(cls) -> "RateModel":
        return cls("empirical")

    @classmethod
    def exponential_server(cls, mu: float) -> "RateModel":
        return cls("exponential", float(mu))


@dataclass
class TaggedPacketState:
    """Residual nats owed by each coupled queue, plus elapsed slots and the
    size of the queue universe the server picks from."""

    residual: list[float]
    slots_elapsed: int = 0
    queue_universe: int = 1

    @property
    def done(self) -> bool:
        return all(r <= 0.0 for r in self.residual)


def _validate_common(n_users, n_groups, power, packet_nats, coherence_interval):
    if n_users < 1 or n_groups < 1:
        raise ValueError("n_users and n_groups must be at least 1")
    if not power > 0:
        raise ValueError("power must be positive")
    if not packet_nats > 0:
        raise ValueError("packet size must be positive")
    if not coherence_interval > 0:
        raise ValueError("coherence interval must be positive")


def tagged_delay_static(
    n_users: int,
    n_groups: int,
    alpha: int,
    power: float,
    packet_nats: float,
    coherence_interval: float,
    model: RateModel,
    rng: np.random.Generator,
) -> int:
    """Slots until a tagged packet leaves all alpha coupled queues under
    the fixed-fraction scheduler's queue layout."""
    _validate_common(n_users, n_groups, power, packet_nats, coherence_interval)
    if alpha < 1 or alpha > n_users or n_users % alpha != 0:
        raise ValueError(f"alpha={alpha} must divide the user count {n_users}")
    q_total = n_groups * math.comb(n_users, n_users // alpha)
    p_hit = alpha / q_total
    state = TaggedPacketState([packet_nats] * alpha, 0, q_total)
    pending = alpha
    while pending:
        state.slots_elapsed += int(rng.geometric(p_hit))
        i = int(rng.integers(alpha))
        if model.kind == "exponential":
            rate = rng.exponential(1.0 / model.mu)
        elif n_groups == 1:
            rate = schedulers.static_schedule(
                rng.exponential(1.0, n_users), alpha, power
            ).rate
        else:
            rate = schedulers.multigroup_static_schedule(
                rng.exponential(1.0, (n_groups, n_users)), alpha, power
            ).rate
        if state.residual[i] > 0.0:
            state.residual[i] -= coherence_interval * rate
            if state.residual[i] <= 0.0:
                pending -= 1
    return state.slots_elapsed


def tagged_delay_ir(
    n_users: int,
    power: float,
    rate_target: float,
    attempt_cap: int | None,
    rng: np.random.Generator,
) -> int:
    """Transmission attempts until every user has accumulated the rate
    target, or the attempt cap stops the codeword."""
    attempts, _ = ir_renewal_cycle(n_users, power, rate_target, attempt_cap, rng)
    return attempts


def ir_renewal_cycle(
    n_users: int,
    power: float,
    rate_target: float,
    attempt_cap: int | None,
    rng: np.random.Generator,
) -> tuple[int, bool]:
    """One renewal cycle of the retransmission scheme: (attempts, decoded)."""
    state = schedulers.IrState.fresh(n_users, rate_target, attempt_cap)
    while True:
        gains = rng.exponential(1.0, n_users)
        state, verdict = schedulers.ir_advance(state, gains, power)
        if verdict != schedulers.CONTINUE:
            return state.attempts, verdict == schedulers.SUCCESS


def tagged_delay_coop(
    n_users: int,
    n_groups: int,
    power: float,
    packet_nats: float,
    coherence_interval: float,
    rng: np.random.Generator,
) -> int:
    """Slots until a cooperative transmission delivers the packet to all
    users of the tagged group.

    A slot reaches every user of the group it serves, so the group keeps a
    single queue; with G groups the tagged one is served with probability
    1/G per slot (group symmetry), simulated as geometric gaps.
    """
    _validate_common(n_users, n_groups, power, packet_nats, coherence_interval)
    if n_users % 2 != 0 or n_users < 2:
        raise ValueError("cooperation needs an even number of users, at least 2")
    slots = 0
    remaining = packet_nats
    while remaining > 0.0:
        slots += int(rng.geometric(1.0 / n_groups))
        bs = rng.exponential(1.0, n_users)
        iu = channel.draw_interuser_gains(n_users, rng)
        decision = schedulers.cooperative_schedule(bs, iu, power)
        remaining -= coherence_interval * decision.effective_rate
    return slots
