"""Shared domain types: AIMD parameters, links, buffers, flows and per-round records.

Internal units are segments (packets) and seconds. Bits and bytes only appear
on :class:`LinkConfig` and :class:`BufferPolicy`, which are the config boundary.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Real
from typing import Optional, Sequence, Union

Number = Union[int, float, Fraction]


class ScenarioError(ValueError):
    """A scenario, link or flow definition violates its invariants."""


class CcaKind(str, Enum):
    RENO = "reno"
    CRENO = "creno"


RENO_A = Fraction(1)
RENO_B = Fraction(1, 2)


@dataclass(frozen=True)
class AimdParams:
    """Additive increase ``a`` (segments per RTT) and multiplicative decrease ``b``."""

    a: Number
    b: Number

    def __post_init__(self):
        if not isinstance(self.a, Real) or not self.a > 0:
            raise ScenarioError(f"additive increase must be positive, got a={self.a}")
        if not isinstance(self.b, Real) or not 0 < self.b < 1:
            raise ScenarioError(f"decrease factor out of range (0, 1): b={self.b}")

    @classmethod
    def reno(cls) -> "AimdParams":
        return cls(RENO_A, RENO_B)


@dataclass(frozen=True)
class BufferPolicy:
    """Bottleneck buffer depth, given either as a time horizon or a packet count.

    A time horizon ``h`` sizes the buffer as ``C * h / 8`` bytes for link rate
    ``C`` in b/s, converted to whole packets (floor, at least one).
    """

    horizon: Optional[float] = None
    packets: Optional[float] = None

    def __post_init__(self):
        if (self.horizon is None) == (self.packets is None):
            raise ScenarioError("buffer needs exactly one of a time horizon or a packet count")
        if self.horizon is not None and not self.horizon > 0:
            raise ScenarioError(f"buffer horizon must be positive, got {self.horizon}")
        if self.packets is not None and not self.packets >= 1:
            raise ScenarioError(f"buffer must hold at least 1 packet, got {self.packets}")

    @classmethod
    def by_time(cls, horizon: float) -> "BufferPolicy":
        return cls(horizon=horizon)

    @classmethod
    def by_packets(cls, count: float) -> "BufferPolicy":
        return cls(packets=count)

    def size_bytes(self, capacity_bps: float, mss: int) -> float:
        if self.horizon is not None:
            return capacity_bps * self.horizon / 8
        return self.packets * mss

    def size_pkts(self, capacity_bps: float, mss: int) -> float:
        if self.horizon is not None:
            return float(max(1, math.floor(self.size_bytes(capacity_bps, mss) / mss)))
        return float(self.packets)


@dataclass(frozen=True)
class LinkConfig:
    capacity_bps: float
    base_rtt: float
    mss: int = 1500
    buffer: BufferPolicy = field(default_factory=lambda: BufferPolicy.by_time(0.025))

    def __post_init__(self):
        if not self.capacity_bps > 0:
            raise ScenarioError(f"capacity must be positive, got {self.capacity_bps} b/s")
        if not self.base_rtt > 0:
            raise ScenarioError(f"base RTT must be positive, got {self.base_rtt} s")
        if not (isinstance(self.mss, int) and self.mss > 0):
            raise ScenarioError(f"segment size must be a positive integer, got {self.mss}")

    @property
    def capacity_pkts(self) -> float:
        return capacity_pkts(self)

    @property
    def bdp_pkts(self) -> float:
        return self.capacity_pkts * self.base_rtt

    @property
    def buffer_pkts(self) -> float:
        return self.buffer.size_pkts(self.capacity_bps, self.mss)


def capacity_pkts(link: LinkConfig) -> float:
    """Link rate in segments per second."""
    return link.capacity_bps / (8 * link.mss)


@dataclass(frozen=True)
class FlowGroup:
    """``count`` identical flows of one congestion control."""

    kind: CcaKind
    params: AimdParams
    count: int = 1
    tag: str = ""

    def __post_init__(self):
        if not (isinstance(self.count, int) and self.count >= 1):
            raise ScenarioError(f"flow group count must be a positive integer, got {self.count}")
        if self.kind is CcaKind.RENO and (self.params.a != RENO_A or self.params.b != RENO_B):
            raise ScenarioError(
                f"a Reno flow must use a=1, b=1/2, got a={self.params.a}, b={self.params.b}"
            )

    @property
    def label(self) -> str:
        return self.tag or self.kind.value


@dataclass(frozen=True)
class FlowSpec:
    """One expanded flow: its group index and AIMD pair as floats."""

    flow_id: int
    group: int
    kind: CcaKind
    a: float
    b: float


@dataclass(frozen=True)
class Scenario:
    """A validated link plus flow groups with derived quantities precomputed."""

    link: LinkConfig
    groups: tuple[FlowGroup, ...]
    capacity_pkts: float
    bdp_pkts: float
    buffer_pkts: float
    flows: tuple[FlowSpec, ...]

    @property
    def n_flows(self) -> int:
        return len(self.flows)

    @property
    def base_rtt(self) -> float:
        return self.link.base_rtt

    @property
    def overflow_pkts(self) -> float:
        """Total window at which the tail-drop buffer overflows (BDP + B)."""
        return self.bdp_pkts + self.buffer_pkts

    def group_members(self, group: int) -> list[int]:
        return [f.flow_id for f in self.flows if f.group == group]


def validate_scenario(link: LinkConfig, groups: Sequence[FlowGroup]) -> Scenario:
    if not isinstance(link, LinkConfig):
        raise ScenarioError("link must be a LinkConfig")
    groups = tuple(groups)
    if not groups:
        raise ScenarioError("at least one flow is required")
    flows = []
    for g, group in enumerate(groups):
        for _ in range(group.count):
            flows.append(
                FlowSpec(len(flows), g, group.kind, float(group.params.a), float(group.params.b))
            )
    return Scenario(
        link=link,
        groups=groups,
        capacity_pkts=link.capacity_pkts,
        bdp_pkts=link.bdp_pkts,
        buffer_pkts=link.buffer_pkts,
        flows=tuple(flows),
    )


@dataclass
class FlowState:
    kind: CcaKind
    params: AimdParams
    cwnd: float
    pending_reduction: bool = False


@dataclass(frozen=True)
class RoundRecord:
    """Everything observed in round ``j``.

    ``reduced[i]`` is true when flow ``i`` applied a multiplicative decrease at
    the start of this round; ``event`` when the bottleneck signalled congestion
    during it (the matching reductions show up in round ``j + 1``).
    """

    j: int
    t_start: float
    cwnd: tuple[float, ...]
    queue: float
    rtt: float
    rate: tuple[float, ...]
    reduced: tuple[bool, ...]
    event: bool = False
    loss_events: tuple[tuple[int, int], ...] = ()

    @property
    def total_cwnd(self) -> float:
        return sum(self.cwnd)


@dataclass(frozen=True)
class CycleStats:
    """One sawtooth cycle: the rounds after one congestion event up to and including the next."""

    J: int
    peak_window: tuple[float, ...]
    packets_per_cycle: tuple[float, ...]
    cycle_duration: float
    normalized_rate: tuple[float, ...]
    start_round: int = 0


def derive_seed(master: int, *coords) -> int:
    """Stable 63-bit seed for a (master seed, coordinates) pair, independent of run order."""
    key = repr((int(master),) + tuple(coords)).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1
