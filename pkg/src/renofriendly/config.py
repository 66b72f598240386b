"""TOML scenario and grid configuration.

A config file is one TOML document::

    name = "creno-vs-reno"     # optional scenario id
    seed = 1                   # master seed

    [link]
    capacity_mbps = 40.0
    base_rtt_ms = 10.0
    mss = 1500
    buffer_ms = 25.0           # or buffer_pkts = 83
    align_buffer = false       # nudge the buffer so a whole-round synchronized cycle exists

    [bottleneck]
    aqm = "taildrop"           # "taildrop" | "pie"
    sync = "all"               # "all" | "probabilistic" (tail drop only)
    losses_per_event = 2       # integer, or "auto"

    [bottleneck.pie]
    target_ms = 15.0
    update_ms = 15.0
    alpha = 0.125
    beta = 1.25

    [[flows]]
    cca = "reno"
    count = 1

    [[flows]]
    cca = "creno"
    b = 0.7                    # a defaults to the Reno-friendly increase for b
    count = 1
    tag = "A"                  # optional group label

    [measurement]
    interval_s = 1.0
    samples = 250
    warmup_events = 20
    max_rounds = 200000

    [chain]
    quantum = 1.0
    min_path_prob = 1e-12

    [grid]                     # only read by the grid runner
    link_mbps = [4, 12, 40, 120, 200]
    base_rtt_ms = [5, 10, 20, 50, 100]
    buffer_ms = [25]
    combinations = [[1, 1]]    # flow counts per [[flows]] group, one entry per cell
    max_cells = 10000
    workers = 1

``a`` and ``b`` also accept strings such as ``"9/17"`` for exact values.
Unknown keys are rejected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bottleneck import PieState
from .core import AimdParams, BufferPolicy, CcaKind, FlowGroup, LinkConfig, RENO_A, RENO_B, ScenarioError
from .friendliness import as_ratio, reno_friendly_ai
from .sim import BottleneckSpec

DEFAULT_LINK_MBPS = (4.0, 12.0, 40.0, 120.0, 200.0)
DEFAULT_RTT_MS = (5.0, 10.0, 20.0, 50.0, 100.0)


class ConfigError(ScenarioError):
    pass


@dataclass(frozen=True)
class Measurement:
    interval_s: float = 1.0
    samples: int = 250
    warmup_events: int = 20
    max_rounds: int = 200_000

    def __post_init__(self):
        if not self.interval_s > 0:
            raise ConfigError("measurement.interval_s must be positive")
        if not (isinstance(self.samples, int) and self.samples >= 1):
            raise ConfigError("measurement.samples must be an integer >= 1")
        if self.warmup_events < 0:
            raise ConfigError("measurement.warmup_events must be >= 0")
        if self.max_rounds < 1:
            raise ConfigError("measurement.max_rounds must be >= 1")

    @property
    def duration(self) -> float:
        return self.samples * self.interval_s


@dataclass(frozen=True)
class ChainSettings:
    quantum: float = 1.0
    min_path_prob: float = 1e-12


@dataclass(frozen=True)
class ScenarioConfig:
    link: LinkConfig
    groups: tuple[FlowGroup, ...]
    bottleneck: BottleneckSpec = field(default_factory=BottleneckSpec)
    measurement: Measurement = field(default_factory=Measurement)
    chain: ChainSettings = field(default_factory=ChainSettings)
    seed: int = 0
    name: str = "s0"
    align_buffer: bool = False

    def __post_init__(self):
        if not self.groups:
            raise ConfigError("at least one flow group is required")

    @property
    def n_flows(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def link_mbps(self) -> float:
        return self.link.capacity_bps / 1e6

    @property
    def buffer_ms(self) -> float:
        return self.link.buffer.size_bytes(self.link.capacity_bps, self.link.mss) * 8 / self.link.capacity_bps * 1e3


@dataclass(frozen=True)
class GridConfig:
    template: ScenarioConfig
    link_mbps: tuple[float, ...] = DEFAULT_LINK_MBPS
    base_rtt_ms: tuple[float, ...] = DEFAULT_RTT_MS
    buffer_ms: tuple[float, ...] = (25.0,)
    combinations: tuple[tuple[int, ...], ...] = ((1, 1),)
    max_cells: int = 10_000
    workers: int = 1

    def __post_init__(self):
        for axis in ("link_mbps", "base_rtt_ms", "buffer_ms", "combinations"):
            if not getattr(self, axis):
                raise ConfigError(f"grid axis {axis!r} is empty")
        n = len(self.link_mbps) * len(self.base_rtt_ms) * len(self.buffer_ms) * len(self.combinations)
        if n > self.max_cells:
            raise ConfigError(f"grid has {n} cells, above max_cells={self.max_cells}")
        for combo in self.combinations:
            if len(combo) != len(self.template.groups):
                raise ConfigError(
                    f"combination {list(combo)} needs one count per flow group ({len(self.template.groups)})"
                )

    @property
    def n_cells(self) -> int:
        return len(self.link_mbps) * len(self.base_rtt_ms) * len(self.buffer_ms) * len(self.combinations)


def _take(table: dict, allowed: dict[str, Any], where: str) -> dict:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return {k: table.get(k, default) for k, default in allowed.items()}


def _number(value, where: str) -> Union[int, float, Fraction]:
    if isinstance(value, bool):
        raise ConfigError(f"{where} must be a number")
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError:
            raise ConfigError(f"{where}: cannot parse {value!r} as a number") from None
    if isinstance(value, (int, float)):
        return value
    raise ConfigError(f"{where} must be a number")


def parse_link(t: dict) -> tuple[LinkConfig, bool]:
    t = _take(
        t,
        {"capacity_mbps": 40.0, "base_rtt_ms": 10.0, "mss": 1500, "buffer_ms": None,
         "buffer_pkts": None, "align_buffer": False},
        "[link]",
    )
    if t["buffer_ms"] is not None and t["buffer_pkts"] is not None:
        raise ConfigError("[link] takes buffer_ms or buffer_pkts, not both")
    if t["buffer_pkts"] is not None:
        buffer = BufferPolicy.by_packets(float(_number(t["buffer_pkts"], "link.buffer_pkts")))
    else:
        ms = 25.0 if t["buffer_ms"] is None else float(_number(t["buffer_ms"], "link.buffer_ms"))
        buffer = BufferPolicy.by_time(ms / 1e3)
    link = LinkConfig(
        capacity_bps=float(_number(t["capacity_mbps"], "link.capacity_mbps")) * 1e6,
        base_rtt=float(_number(t["base_rtt_ms"], "link.base_rtt_ms")) / 1e3,
        mss=t["mss"],
        buffer=buffer,
    )
    return link, bool(t["align_buffer"])


def parse_bottleneck(t: dict) -> BottleneckSpec:
    t = _take(t, {"aqm": "taildrop", "sync": "all", "losses_per_event": 2, "pie": {}}, "[bottleneck]")
    p = _take(
        t["pie"], {"target_ms": 15.0, "update_ms": 15.0, "alpha": 0.125, "beta": 1.25}, "[bottleneck.pie]"
    )
    losses = t["losses_per_event"]
    if losses == "auto":
        losses = None
    elif not (isinstance(losses, int) and not isinstance(losses, bool) and losses >= 1):
        raise ConfigError('bottleneck.losses_per_event must be an integer >= 1 or "auto"')
    pie = PieState(
        target_delay=float(p["target_ms"]) / 1e3,
        update_interval=float(p["update_ms"]) / 1e3,
        alpha=float(p["alpha"]),
        beta=float(p["beta"]),
    )
    return BottleneckSpec(aqm=t["aqm"], sync=t["sync"], losses_per_event=losses, pie=pie)


def parse_flow(t: dict, i: int) -> FlowGroup:
    where = f"[[flows]] #{i + 1}"
    t = _take(t, {"cca": None, "a": None, "b": None, "count": 1, "tag": ""}, where)
    try:
        kind = CcaKind(t["cca"])
    except ValueError:
        raise ConfigError(f"{where}: cca must be one of {[k.value for k in CcaKind]}") from None
    if kind is CcaKind.RENO:
        a = RENO_A if t["a"] is None else as_ratio(_number(t["a"], f"{where} a"))
        b = RENO_B if t["b"] is None else as_ratio(_number(t["b"], f"{where} b"))
    else:
        b = as_ratio(_number(0.7 if t["b"] is None else t["b"], f"{where} b"))
        if not 0 < b < 1:
            raise ConfigError(f"{where}: decrease factor out of range (0, 1): b={b}")
        a = reno_friendly_ai(b) if t["a"] is None else as_ratio(_number(t["a"], f"{where} a"))
    return FlowGroup(kind, AimdParams(a, b), t["count"], str(t["tag"]))


def parse_scenario(doc: dict) -> ScenarioConfig:
    doc = dict(doc)
    doc.pop("grid", None)
    d = _take(
        doc,
        {"name": "s0", "seed": 0, "link": {}, "bottleneck": {}, "flows": None, "measurement": {}, "chain": {}},
        "top level",
    )
    if not d["flows"]:
        raise ConfigError("at least one [[flows]] group is required")
    link, align = parse_link(d["link"])
    m = _take(d["measurement"], {"interval_s": 1.0, "samples": 250, "warmup_events": 20, "max_rounds": 200_000},
              "[measurement]")
    c = _take(d["chain"], {"quantum": 1.0, "min_path_prob": 1e-12}, "[chain]")
    return ScenarioConfig(
        link=link,
        groups=tuple(parse_flow(f, i) for i, f in enumerate(d["flows"])),
        bottleneck=parse_bottleneck(d["bottleneck"]),
        measurement=Measurement(float(m["interval_s"]), m["samples"], m["warmup_events"], m["max_rounds"]),
        chain=ChainSettings(float(c["quantum"]), float(c["min_path_prob"])),
        seed=int(d["seed"]),
        name=str(d["name"]),
        align_buffer=align,
    )


def parse_grid(doc: dict) -> GridConfig:
    template = parse_scenario(doc)
    g = _take(
        doc.get("grid", {}),
        {"link_mbps": list(DEFAULT_LINK_MBPS), "base_rtt_ms": list(DEFAULT_RTT_MS), "buffer_ms": None,
         "combinations": None, "max_cells": 10_000, "workers": 1},
        "[grid]",
    )
    buffer_ms = g["buffer_ms"] if g["buffer_ms"] is not None else [template.buffer_ms]
    combos = g["combinations"] if g["combinations"] is not None else [[grp.count for grp in template.groups]]
    return GridConfig(
        template=template,
        link_mbps=tuple(float(x) for x in g["link_mbps"]),
        base_rtt_ms=tuple(float(x) for x in g["base_rtt_ms"]),
        buffer_ms=tuple(float(x) for x in buffer_ms),
        combinations=tuple(tuple(int(n) for n in c) for c in combos),
        max_cells=int(g["max_cells"]),
        workers=int(g["workers"]),
    )


def load_document(path: Union[str, Path]) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    return parse_scenario(load_document(path))


def load_grid(path: Union[str, Path]) -> GridConfig:
    return parse_grid(load_document(path))


def with_cell(template: ScenarioConfig, link_mbps: float, rtt_ms: float, buffer_ms: float,
              counts: tuple[int, ...], seed: int, name: str) -> ScenarioConfig:
    link = LinkConfig(link_mbps * 1e6, rtt_ms / 1e3, template.link.mss, BufferPolicy.by_time(buffer_ms / 1e3))
    groups = tuple(replace(g, count=n) for g, n in zip(template.groups, counts))
    return replace(template, link=link, groups=groups, seed=seed, name=name)
