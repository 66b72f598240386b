"""Bottleneck queue models: synchronized tail drop and a PIE-style AQM.

Both models are consulted once per round with the aggregate window, and
answer with the set of flows that must reduce at the start of the next round.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .core import Scenario


def queue_and_rtt(total_cwnd: float, scenario: Scenario) -> tuple[float, float, float]:
    """Queue backlog, RTT and link utilization for an aggregate window.

    Below one BDP the link idles and the RTT stays at its base value.
    """
    if total_cwnd < 0:
        raise ValueError("total window must be non-negative")
    bdp = scenario.bdp_pkts
    queue = max(0.0, total_cwnd - bdp)
    rtt = scenario.base_rtt + queue / scenario.capacity_pkts
    utilization = min(1.0, total_cwnd / bdp) if bdp > 0 else 1.0
    return queue, rtt, utilization


@dataclass(frozen=True)
class LossEvent:
    """Flows that reduce in the next round, and per-flow loss counts behind them."""

    reduce: frozenset
    losses: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class LossPolicy:
    """How many packets a tail-drop congestion event discards.

    ``fixed`` pins the count. With ``fixed=None`` the count is
    ``max(1, round(sum_a + overshoot))``: the packets already over the buffer
    plus one round of aggregate growth before the first response arrives.
    """

    fixed: Optional[int] = 2

    def __post_init__(self):
        if self.fixed is not None and self.fixed < 1:
            raise ValueError("losses per event must be >= 1")

    def count(self, sum_a: float, overshoot: float) -> int:
        if self.fixed is not None:
            return self.fixed
        return max(1, round(sum_a + overshoot))


@dataclass(frozen=True)
class TailDropState:
    buffer_pkts: float
    sync: str = "all"  # "all" | "probabilistic"
    policy: LossPolicy = field(default_factory=LossPolicy)

    def __post_init__(self):
        if not self.buffer_pkts >= 1:
            raise ValueError("tail-drop buffer must hold at least 1 packet")
        if self.sync not in ("all", "probabilistic"):
            raise ValueError(f"unknown sync mode {self.sync!r}")


def taildrop_check(
    queue: float,
    state: TailDropState,
    rates: Sequence[float],
    sum_a: float = 0.0,
    rng: Optional[random.Random] = None,
) -> Optional[LossEvent]:
    if queue <= state.buffer_pkts:
        return None
    n = len(rates)
    if state.sync == "all":
        return LossEvent(frozenset(range(n)), tuple((i, 1) for i in range(n)))
    if rng is None:
        raise ValueError("probabilistic hits need an rng")
    losses = state.policy.count(sum_a, queue - state.buffer_pkts)
    counts = [0] * n
    total = sum(rates)
    for _ in range(losses):
        u = rng.random() * total
        acc = 0.0
        for i, r in enumerate(rates):
            acc += r
            if u < acc:
                break
        counts[i] += 1
    hit = tuple((i, c) for i, c in enumerate(counts) if c)
    return LossEvent(frozenset(i for i, _ in hit), hit)


@dataclass(frozen=True)
class PieState:
    """PIE controller state. Gains are per second of queueing-delay error."""

    drop_prob: float = 0.0
    target_delay: float = 0.015
    update_interval: float = 0.015
    alpha: float = 0.125
    beta: float = 1.25
    last_qdelay: float = 0.0

    def __post_init__(self):
        if not self.target_delay > 0:
            raise ValueError("PIE target delay must be positive")
        if not self.update_interval > 0:
            raise ValueError("PIE update interval must be positive")
        if not 0 <= self.drop_prob <= 1:
            raise ValueError("PIE drop probability must lie in [0, 1]")


def pie_update(state: PieState, qdelay: float) -> PieState:
    if qdelay < 0:
        raise ValueError("queueing delay must be non-negative")
    p = (
        state.drop_prob
        + state.alpha * (qdelay - state.target_delay)
        + state.beta * (qdelay - state.last_qdelay)
    )
    return replace(state, drop_prob=min(1.0, max(0.0, p)), last_qdelay=qdelay)


def round_mark_prob(p: float, cwnd: float) -> float:
    """Chance that at least one of a window's packets is marked."""
    return 1.0 - (1.0 - p) ** cwnd


def pie_mark(
    state: PieState,
    cwnds: Sequence[float],
    rng: random.Random,
    eligible: Optional[Sequence[bool]] = None,
) -> set[int]:
    """Flows marked this round; ineligible flows (already reacting) are skipped."""
    p = state.drop_prob
    marked = set()
    if p <= 0:
        return marked
    for i, w in enumerate(cwnds):
        if eligible is not None and not eligible[i]:
            continue
        if p >= 1 or rng.random() < round_mark_prob(p, w):
            marked.add(i)
    return marked


class TailDrop:
    """Tail-drop bottleneck bound to one simulation run."""

    kind = "taildrop"

    def __init__(self, state: TailDropState, sum_a: float):
        self.state = state
        self.sum_a = sum_a

    @property
    def stochastic(self) -> bool:
        return self.state.sync == "probabilistic"

    def observe(self, t, rtt, queue, cwnds, rates, reduced, scenario, rng) -> Optional[LossEvent]:
        return taildrop_check(queue, self.state, rates, self.sum_a, rng)


class Pie:
    """PIE bottleneck bound to one simulation run.

    The controller runs on its own clock: every ``update_interval`` of
    simulated time that elapses within a round triggers one update with the
    queueing delay of that round.
    """

    kind = "pie"
    stochastic = True

    def __init__(self, state: PieState):
        self.state = state
        self._next_update = state.update_interval

    def observe(self, t, rtt, queue, cwnds, rates, reduced, scenario, rng) -> Optional[LossEvent]:
        qdelay = queue / scenario.capacity_pkts
        end = t + rtt
        while self._next_update <= end:
            self.state = pie_update(self.state, qdelay)
            self._next_update += self.state.update_interval
        marked = pie_mark(self.state, cwnds, rng, eligible=[not r for r in reduced])
        if not marked:
            return None
        return LossEvent(frozenset(marked), tuple((i, 1) for i in sorted(marked)))
