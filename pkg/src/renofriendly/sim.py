"""Round-based fluid simulator for AIMD flows sharing one bottleneck.

One step is one round trip. Windows are real-valued. A congestion signal seen
in round ``j`` makes the flow reduce at the start of round ``j + 1`` instead of
growing, so the peak window is itself a round's window and a converged
synchronized cycle of ``J`` rounds holds ``J - 1`` additive increases.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO

import numpy as np

from .bottleneck import LossPolicy, Pie, PieState, TailDrop, TailDropState, queue_and_rtt
from .core import (
    BufferPolicy,
    CycleStats,
    FlowGroup,
    LinkConfig,
    RoundRecord,
    Scenario,
    ScenarioError,
    validate_scenario,
)

log = logging.getLogger(__name__)


class CycleError(RuntimeError):
    pass


@dataclass(frozen=True)
class BottleneckSpec:
    """Which queue sits at the bottleneck, with its parameters."""

    aqm: str = "taildrop"  # "taildrop" | "pie"
    sync: str = "all"  # tail drop only: "all" | "probabilistic"
    losses_per_event: Optional[int] = 2  # None -> derived from growth + overshoot
    pie: PieState = field(default_factory=PieState)

    def __post_init__(self):
        if self.aqm not in ("taildrop", "pie"):
            raise ScenarioError(f"unknown aqm {self.aqm!r}")
        if self.sync not in ("all", "probabilistic"):
            raise ScenarioError(f"unknown sync mode {self.sync!r}")

    @property
    def stochastic(self) -> bool:
        return self.aqm == "pie" or self.sync == "probabilistic"

    def build(self, scenario: Scenario):
        if self.aqm == "pie":
            return Pie(self.pie)
        state = TailDropState(scenario.buffer_pkts, self.sync, LossPolicy(self.losses_per_event))
        return TailDrop(state, sum(f.a for f in scenario.flows))


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario
    bottleneck: BottleneckSpec = field(default_factory=BottleneckSpec)
    max_rounds: int = 200_000
    epsilon: float = 1e-9
    warmup_events: int = 20
    seed: int = 0
    measure_time: float = 0.0
    initial_cwnd: Optional[tuple[float, ...]] = None
    max_period: int = 16

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ScenarioError("max_rounds must be >= 1")
        if not self.epsilon > 0:
            raise ScenarioError("convergence epsilon must be positive")
        if self.measure_time < 0:
            raise ScenarioError("measure_time must be non-negative")
        if self.initial_cwnd is not None:
            if len(self.initial_cwnd) != self.scenario.n_flows:
                raise ScenarioError("initial_cwnd needs one window per flow")
            if any(not w > 0 for w in self.initial_cwnd):
                raise ScenarioError("initial windows must be positive")


@dataclass
class Trace:
    scenario: Scenario
    records: list[RoundRecord]
    events: list[int]
    stochastic: bool
    converged: bool
    period: int = 0
    converged_event: Optional[int] = None
    measure_start_round: Optional[int] = None

    @property
    def n_rounds(self) -> int:
        return len(self.records)

    @property
    def end_time(self) -> float:
        last = self.records[-1]
        return last.t_start + last.rtt

    @property
    def measure_start_time(self) -> float:
        if self.measure_start_round is None or self.measure_start_round >= self.n_rounds:
            return self.end_time
        return self.records[self.measure_start_round].t_start

    def cwnd_matrix(self) -> np.ndarray:
        return np.array([r.cwnd for r in self.records])

    def time_edges(self) -> np.ndarray:
        t = np.array([r.t_start for r in self.records] + [self.end_time])
        return t

    def cumulative_packets(self) -> np.ndarray:
        """Packets delivered per flow by each round boundary, shape (rounds + 1, flows)."""
        w = self.cwnd_matrix()
        out = np.zeros((w.shape[0] + 1, w.shape[1]))
        np.cumsum(w, axis=0, out=out[1:])
        return out

    def totals(self) -> tuple[np.ndarray, float]:
        """Per-flow packets delivered and total simulated time."""
        return self.cumulative_packets()[-1], self.end_time


def step_round(
    cwnd: Sequence[float],
    reduce: frozenset,
    scenario: Scenario,
    bottleneck,
    j: int,
    t: float,
    rng: Optional[random.Random] = None,
) -> tuple[RoundRecord, frozenset]:
    """Advance one round trip.

    Flows in ``reduce`` apply their decrease, the rest grow by their increase.
    Returns the round's record and the flows to reduce in the following round.
    """
    flows = scenario.flows
    new = []
    reduced = []
    for f, w in zip(flows, cwnd):
        if f.flow_id in reduce:
            new.append(f.b * w)
            reduced.append(True)
        else:
            new.append(w + f.a)
            reduced.append(False)
    return observe_round(new, reduced, scenario, bottleneck, j, t, rng)


def observe_round(cwnd, reduced, scenario, bottleneck, j, t, rng):
    queue, rtt, _ = queue_and_rtt(sum(cwnd), scenario)
    rates = tuple(w / rtt for w in cwnd)
    ev = bottleneck.observe(t, rtt, queue, cwnd, rates, reduced, scenario, rng)
    rec = RoundRecord(
        j=j,
        t_start=t,
        cwnd=tuple(cwnd),
        queue=queue,
        rtt=rtt,
        rate=rates,
        reduced=tuple(reduced),
        event=ev is not None,
        loss_events=ev.losses if ev is not None else (),
    )
    return rec, (ev.reduce if ev is not None else frozenset())


def _close(x: Sequence[float], y: Sequence[float], eps: float) -> bool:
    return all(abs(a - b) <= eps * max(abs(a), abs(b)) for a, b in zip(x, y))


def run(config: SimConfig) -> Trace:
    """Simulate until the sawtooth has converged (or warm-up is over), then measure.

    Deterministic runs converge when the windows at a congestion event repeat
    those ``p <= max_period`` events earlier within ``epsilon``. Stochastic runs
    discard ``warmup_events`` events instead. ``measure_time`` seconds are then
    simulated on top. Hitting ``max_rounds`` first is reported through
    ``Trace.converged`` and measurement starts from there.
    """
    sc = config.scenario
    bn = config.bottleneck.build(sc)
    stochastic = config.bottleneck.stochastic
    rng = random.Random(config.seed)
    cwnd = list(config.initial_cwnd or [1.0] * sc.n_flows)

    trace = Trace(sc, [], [], stochastic, converged=False)
    rec, reduce = observe_round(cwnd, [False] * sc.n_flows, sc, bn, 0, 0.0, rng)
    t = rec.rtt
    trace.records.append(rec)
    if rec.event:
        trace.events.append(0)

    measure_end = None
    j = 0
    while True:
        if measure_end is not None and t >= measure_end:
            break
        if measure_end is None and j + 1 >= config.max_rounds:
            log.info("no convergence within %d rounds", config.max_rounds)
            trace.measure_start_round = j + 1
            measure_end = t + config.measure_time
            if config.measure_time == 0:
                break
            continue
        j += 1
        rec, reduce = step_round(rec.cwnd, reduce, sc, bn, j, t, rng)
        trace.records.append(rec)
        t += rec.rtt
        if not rec.event:
            continue
        trace.events.append(j)
        if measure_end is not None:
            continue
        if stochastic:
            if len(trace.events) > config.warmup_events:
                trace.converged = True
                trace.converged_event = len(trace.events) - 1
        else:
            period = _period(trace, config)
            if period:
                trace.converged = True
                trace.period = period
                trace.converged_event = len(trace.events) - 1
        if trace.converged:
            trace.measure_start_round = j + 1
            measure_end = t + config.measure_time
            if config.measure_time == 0:
                break
    return trace


def _period(trace: Trace, config: SimConfig) -> int:
    ev = trace.events
    cur = trace.records[ev[-1]].cwnd
    for p in range(1, min(config.max_period, len(ev) - 1) + 1):
        if _close(cur, trace.records[ev[-1 - p]].cwnd, config.epsilon):
            return p
    return 0


def _cycle(trace: Trace, start_event: int, end_event: int) -> CycleStats:
    """Rounds strictly after event round ``start_event`` up to and including ``end_event``."""
    recs = trace.records[start_event + 1 : end_event + 1]
    n = trace.scenario.n_flows
    packets = tuple(sum(r.cwnd[i] for r in recs) for i in range(n))
    duration = sum(r.rtt for r in recs)
    fair = trace.scenario.capacity_pkts / n
    return CycleStats(
        J=end_event - start_event,
        peak_window=trace.records[end_event].cwnd,
        packets_per_cycle=packets,
        cycle_duration=duration,
        normalized_rate=tuple(p / duration / fair for p in packets),
        start_round=start_event + 1,
    )


def detect_cycle(trace: Trace) -> list[CycleStats]:
    """Sawtooth cycles of a trace.

    For a converged deterministic trace this is the single repeating cycle (one
    full period, which may span several congestion events). Otherwise every
    cycle between consecutive events after warm-up is returned.
    """
    ev = trace.events
    if len(ev) < 2:
        raise CycleError("no complete cycle observed")
    if not trace.stochastic:
        if trace.converged:
            k = trace.converged_event
            p = trace.period
        else:
            k, p = len(ev) - 1, 1
        return [_cycle(trace, ev[k - p], ev[k])]
    first = trace.converged_event if trace.converged_event is not None else 0
    cycles = [_cycle(trace, ev[i], ev[i + 1]) for i in range(first, len(ev) - 1)]
    if not cycles:
        raise CycleError("no complete cycle observed")
    return cycles


def normalized_rates(
    trace: Trace,
    interval: float = 1.0,
    count: Optional[int] = None,
    start: Optional[float] = None,
    n_flows: Optional[int] = None,
) -> np.ndarray:
    """Per-interval throughput of every flow relative to a 1/N share of capacity.

    Each round's window is delivered uniformly over the round. Returns an array
    of shape (samples, flows).
    """
    if not interval > 0:
        raise ValueError("sample interval must be positive")
    start = trace.measure_start_time if start is None else start
    available = int(math.floor((trace.end_time - start) / interval + 1e-9))
    if count is None:
        count = available
    elif count > available:
        raise ValueError(f"trace holds {available} samples after t={start:.3f}s, {count} requested")
    n = n_flows or trace.scenario.n_flows
    edges = trace.time_edges()
    cum = trace.cumulative_packets()
    bins = start + interval * np.arange(count + 1)
    delivered = np.column_stack([np.interp(bins, edges, cum[:, i]) for i in range(cum.shape[1])])
    per_interval = np.diff(delivered, axis=0) / interval
    return per_interval / (trace.scenario.capacity_pkts / n)


TRACE_COLUMNS = ["round", "t_start_s", "flow_id", "cca", "cwnd_pkts", "queue_pkts", "rtt_s", "rate_pps", "reduced"]


def write_trace_csv(trace: Trace, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    flows = trace.scenario.flows
    for r in trace.records:
        for f in flows:
            i = f.flow_id
            w.writerow([r.j, repr(r.t_start), i, f.kind.value, repr(r.cwnd[i]), repr(r.queue),
                        repr(r.rtt), repr(r.rate[i]), int(r.reduced[i])])


def sync_fixed_point(scenario: Scenario) -> Optional[tuple[int, tuple[float, ...]]]:
    """Constant-period synchronized orbit for the scenario's tail-drop threshold, if any.

    With all flows reducing together, an orbit in which every cycle has the
    same ``m`` increases has peaks ``m * a_i / (1 - b_i)``. It exists when the
    summed peak lies in ``(BDP + B, BDP + B + sum(a)]``.
    """
    k = sum(f.a / (1 - f.b) for f in scenario.flows)
    growth = sum(f.a for f in scenario.flows)
    T = scenario.overflow_pkts
    m = math.floor(T / k) + 1
    if m * k - growth <= T < m * k:
        return m, tuple(m * f.a / (1 - f.b) for f in scenario.flows)
    return None


def sync_aligned_buffer(link: LinkConfig, groups: Sequence[FlowGroup]) -> LinkConfig:
    """Adjust the buffer so a constant-period synchronized orbit exists.

    Round-granular event detection only admits such an orbit for some buffer
    depths; otherwise the cycle length alternates and per-cycle throughputs
    drift apart at the 1e-4 level. The returned buffer is the closest depth
    that centres the overflow threshold between two whole-round cycles.
    """
    sc = validate_scenario(link, groups)
    k = sum(f.a / (1 - f.b) for f in sc.flows)
    growth = sum(f.a for f in sc.flows)
    m = max(1, round((sc.overflow_pkts + growth / 2) / k))
    packets = m * k - growth / 2 - sc.bdp_pkts
    while packets < 1:
        m += 1
        packets = m * k - growth / 2 - sc.bdp_pkts
    return LinkConfig(link.capacity_bps, link.base_rtt, link.mss, BufferPolicy.by_packets(packets))
