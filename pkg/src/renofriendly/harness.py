"""Scenario and grid runners producing P1/mean/P99 normalized-rate summaries."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from itertools import product
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .config import GridConfig, ScenarioConfig, with_cell
from .core import LinkConfig, Scenario, derive_seed, validate_scenario
from .sim import SimConfig, Trace, normalized_rates, run, sync_aligned_buffer

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "scenario_id", "link_mbps", "base_rtt_ms", "buffer_ms", "aqm", "flow_group", "cca",
    "n_flows", "p1", "mean", "p99", "samples", "error",
]


@dataclass(frozen=True)
class StatsSummary:
    """One flow group's normalized-rate distribution in one scenario.

    ``samples`` counts per-flow samples; percentiles and the mean pool the
    samples of every flow in the group.
    """

    scenario_id: str
    link_mbps: float
    base_rtt_ms: float
    buffer_ms: float
    aqm: str
    flow_group: str
    cca: str
    n_flows: int
    p1: float
    mean: float
    p99: float
    samples: int
    error: str = ""

    @property
    def ordered(self) -> bool:
        tol = 1e-12 * max(1.0, abs(self.mean))
        return self.p1 <= self.mean + tol and self.mean <= self.p99 + tol


@dataclass
class ScenarioResult:
    summaries: list[StatsSummary]
    trace: Optional[Trace]
    samples: Optional[np.ndarray]  # (samples, flows)
    converged: bool


def buffer_from_horizon(link: LinkConfig, horizon: float) -> tuple[float, int]:
    """Buffer for a worst-case RTT ``horizon``: C * horizon / 8 bytes, in whole packets (min 1)."""
    if not horizon > 0:
        raise ValueError("buffer horizon must be positive")
    size = link.capacity_bps * horizon / 8
    return size, max(1, math.floor(size / link.mss))


def nearest_rank(sorted_samples: np.ndarray, pct: float) -> float:
    n = len(sorted_samples)
    rank = max(1, math.ceil(pct / 100 * n))
    return float(sorted_samples[rank - 1])


def summarize(samples: np.ndarray) -> tuple[float, float, float]:
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    return nearest_rank(s, 1), float(s.mean()), nearest_rank(s, 99)


def scenario_of(cfg: ScenarioConfig) -> Scenario:
    link = cfg.link
    if cfg.align_buffer:
        link = sync_aligned_buffer(link, cfg.groups)
    return validate_scenario(link, cfg.groups)


def _base_fields(cfg: ScenarioConfig) -> dict:
    return dict(
        scenario_id=cfg.name,
        link_mbps=cfg.link_mbps,
        base_rtt_ms=cfg.link.base_rtt * 1e3,
        buffer_ms=cfg.buffer_ms,
        aqm=cfg.bottleneck.aqm,
    )


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Simulate, skip warm-up, sample per-interval normalized rates and summarize per group."""
    sc = scenario_of(cfg)
    meas = cfg.measurement
    trace = run(
        SimConfig(
            sc,
            cfg.bottleneck,
            max_rounds=meas.max_rounds,
            warmup_events=meas.warmup_events,
            seed=cfg.seed,
            measure_time=meas.duration,
        )
    )
    samples = normalized_rates(trace, interval=meas.interval_s, count=meas.samples)
    error = "" if trace.converged else f"no convergence within {meas.max_rounds} rounds"
    rows = []
    for g, group in enumerate(sc.groups):
        p1, mean, p99 = summarize(samples[:, sc.group_members(g)])
        row = StatsSummary(
            **_base_fields(cfg),
            flow_group=group.label,
            cca=group.kind.value,
            n_flows=group.count,
            p1=p1,
            mean=mean,
            p99=p99,
            samples=samples.shape[0],
            error=error,
        )
        if not row.ordered:
            row = StatsSummary(**{**asdict(row), "error": (error + "; " if error else "") + "P1 <= mean <= P99 violated"})
        rows.append(row)
    return ScenarioResult(rows, trace, samples, trace.converged)


def grid_cells(grid: GridConfig) -> list[ScenarioConfig]:
    """Every cell of the grid as a scenario, each with a seed derived from its coordinates."""
    cells = []
    t = grid.template
    for link, rtt, buf, combo in product(grid.link_mbps, grid.base_rtt_ms, grid.buffer_ms, grid.combinations):
        name = f"{link:g}M_{rtt:g}ms_{buf:g}ms_" + "-".join(
            f"{g.label}{n}" for g, n in zip(t.groups, combo)
        )
        seed = derive_seed(t.seed, link, rtt, buf, tuple(combo))
        cells.append((t, link, rtt, buf, tuple(combo), seed, name))
    return cells


def _error_rows(cell, message: str) -> list[StatsSummary]:
    t, link, rtt, buf, combo, _, name = cell
    return [
        StatsSummary(name, link, rtt, buf, t.bottleneck.aqm, g.label, g.kind.value, n,
                     math.nan, math.nan, math.nan, 0, message)
        for g, n in zip(t.groups, combo)
    ]


def run_cell(cell) -> list[StatsSummary]:
    try:
        cfg = with_cell(*cell)
        return run_scenario(cfg).summaries
    except Exception as e:  # isolate per-cell failures
        log.warning("cell %s failed: %s", cell[-1], e)
        return _error_rows(cell, f"{type(e).__name__}: {e}")


def run_grid(grid: GridConfig, workers: Optional[int] = None, order: Optional[Sequence[int]] = None) -> list[StatsSummary]:
    """One summary row per cell and flow group, in grid order regardless of execution order."""
    cells = grid_cells(grid)
    order = list(order) if order is not None else list(range(len(cells)))
    workers = grid.workers if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            done = dict(zip(order, ex.map(run_cell, [cells[i] for i in order])))
    else:
        done = {i: run_cell(cells[i]) for i in order}
    return [row for i in range(len(cells)) for row in done[i]]


def write_summary_csv(rows: Iterable[StatsSummary], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, c) for c in SUMMARY_COLUMNS)])


def read_summary_csv(fh: TextIO) -> list[StatsSummary]:
    types = {f.name: f.type for f in fields(StatsSummary)}
    out = []
    for rec in csv.DictReader(fh):
        kw = {}
        for k, v in rec.items():
            if types[k] == "float":
                kw[k] = float(v)
            elif types[k] == "int":
                kw[k] = int(v)
            else:
                kw[k] = v
        out.append(StatsSummary(**kw))
    return out
