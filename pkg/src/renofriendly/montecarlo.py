"""Seeded Monte-Carlo runs of the stochastic simulator with 95% confidence intervals."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO, Union

import numpy as np
from scipy import stats

from .core import Scenario, derive_seed
from .sim import BottleneckSpec, SimConfig, normalized_rates, run


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def overlaps(self, other: "Estimate") -> bool:
        return self.low <= other.high and other.low <= self.high

    def contains(self, x: float) -> bool:
        return self.low <= x <= self.high


def estimate(samples: Sequence[float], level: float = 0.95) -> Estimate:
    """Student-t interval for the mean of independent per-seed values."""
    x = np.asarray(samples, dtype=float)
    m = float(x.mean())
    if len(x) < 2:
        return Estimate(m, 0.0)
    se = float(x.std(ddof=1)) / np.sqrt(len(x))
    return Estimate(m, float(stats.t.ppf(0.5 + level / 2, len(x) - 1)) * se)


@dataclass
class MonteCarloResult:
    seeds: list[int]
    per_seed: np.ndarray  # (seeds, flows) mean normalized rate
    flows: list[Estimate]

    def rate_ratio(self, i: int, j: int) -> Estimate:
        return estimate(self.per_seed[:, i] / self.per_seed[:, j])

    def group_means(self, scenario: Scenario) -> list[Estimate]:
        return [
            estimate(self.per_seed[:, scenario.group_members(g)].mean(axis=1))
            for g in range(len(scenario.groups))
        ]

    def group_ratio(self, scenario: Scenario, g: int, h: int) -> Estimate:
        a = self.per_seed[:, scenario.group_members(g)].mean(axis=1)
        b = self.per_seed[:, scenario.group_members(h)].mean(axis=1)
        return estimate(a / b)


def _one(args) -> np.ndarray:
    scenario, bottleneck, seed, duration, interval, warmup_events, max_rounds = args
    cfg = SimConfig(
        scenario,
        bottleneck,
        seed=seed,
        measure_time=duration,
        warmup_events=warmup_events,
        max_rounds=max_rounds,
    )
    trace = run(cfg)
    count = int(np.floor(duration / interval + 1e-9))
    return normalized_rates(trace, interval=interval, count=count).mean(axis=0)


def monte_carlo(
    scenario: Scenario,
    bottleneck: BottleneckSpec,
    seeds: Union[int, Sequence[int]] = 10,
    duration: float = 250.0,
    interval: float = 1.0,
    master_seed: int = 0,
    warmup_events: int = 20,
    max_rounds: int = 200_000,
    workers: Optional[int] = 1,
) -> MonteCarloResult:
    """Per-flow mean normalized rates across independent seeded runs.

    ``seeds`` is either an explicit list or a count, in which case seeds are
    derived from ``master_seed``. Each run discards ``warmup_events`` events,
    then samples ``duration`` seconds at ``interval``.
    """
    if isinstance(seeds, int):
        seeds = [derive_seed(master_seed, "mc", k) for k in range(seeds)]
    seeds = list(seeds)
    jobs = [(scenario, bottleneck, s, duration, interval, warmup_events, max_rounds) for s in seeds]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_one, jobs))
    else:
        rows = [_one(j) for j in jobs]
    per_seed = np.vstack(rows)
    return MonteCarloResult(seeds, per_seed, [estimate(per_seed[:, i]) for i in range(per_seed.shape[1])])


def write_per_seed_csv(result: MonteCarloResult, scenario: Scenario, fh: TextIO) -> None:
    """One row per seed and flow: the flow's mean normalized rate in that run."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["seed", "flow", "cca", "mean_normalized_rate"])
    for seed, row in zip(result.seeds, result.per_seed):
        for f in scenario.flows:
            w.writerow([seed, f.flow_id, f.kind.value, repr(float(row[f.flow_id]))])
