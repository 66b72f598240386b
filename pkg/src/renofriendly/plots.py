"""SVG figures: sawtooth traces and P1/mean/P99 whisker summaries."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import StatsSummary  # noqa: E402
from .sim import Trace  # noqa: E402

plt.rcParams["svg.hashsalt"] = "renofriendly"
_SVG_META = {"Date": None}


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, format="svg", metadata=_SVG_META)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e
    finally:
        plt.close(fig)
    return path


def _window(trace: Trace, cycles: int) -> slice:
    start = trace.measure_start_round
    if start is None or start >= trace.n_rounds:
        start = 0
    ev = [e for e in trace.events if e >= start]
    if len(ev) > cycles:
        return slice(ev[0], ev[cycles] + 1)
    return slice(start, trace.n_rounds)


def plot_sawtooth(trace: Trace, path: Path, cycles: int = 2, title: Optional[str] = None) -> Path:
    """Windows and queue against rounds (left); rates and RTT against time (right)."""
    if trace is None or trace.n_rounds == 0:
        raise ValueError("nothing to plot")
    recs = trace.records[_window(trace, cycles)]
    j = np.array([r.j for r in recs])
    t = np.array([r.t_start for r in recs])
    t = (t - t[0]) * 1e3
    w = np.array([r.cwnd for r in recs])
    rate = np.array([r.rate for r in recs])
    rtt = np.array([r.rtt for r in recs]) * 1e3
    queue = np.array([r.queue for r in recs])

    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4.2))
    for f in trace.scenario.flows:
        label = f"{f.kind.value} {f.flow_id}"
        left.step(j, w[:, f.flow_id], where="post", label=label)
        right.step(t, rate[:, f.flow_id], where="post", label=label)
    left.plot(j, queue, color="grey", lw=0.8, ls="--", label="queue")
    left.set_xlabel("round")
    left.set_ylabel("cwnd [pkt]")
    left.legend(fontsize=8)
    right.set_xlabel("time [ms]")
    right.set_ylabel("rate [pkt/s]")
    rax = right.twinx()
    rax.step(t, rtt, where="post", color="black", lw=0.8, ls=":", label="RTT")
    rax.set_ylabel("RTT [ms]")
    right.legend(fontsize=8, loc="lower left")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_whiskers(rows: Sequence[StatsSummary], path: Path, title: Optional[str] = None) -> Path:
    """One cluster per scenario, one whisker (P1..P99 with the mean marked) per flow group."""
    rows = [r for r in rows if not math.isnan(r.mean)]
    if not rows:
        raise ValueError("nothing to plot")
    cells = list(dict.fromkeys(r.scenario_id for r in rows))
    groups = list(dict.fromkeys(r.flow_group for r in rows))
    by = defaultdict(dict)
    for r in rows:
        by[r.scenario_id][r.flow_group] = r
    width = 0.8 / len(groups)
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(cells) * len(groups) + 2), 4.2))
    for k, g in enumerate(groups):
        xs, mean, lo, hi = [], [], [], []
        for i, c in enumerate(cells):
            if g in by[c]:
                r = by[c][g]
                xs.append(i - 0.4 + width * (k + 0.5))
                mean.append(r.mean)
                lo.append(r.mean - r.p1)
                hi.append(r.p99 - r.mean)
        ax.errorbar(xs, mean, yerr=[lo, hi], fmt="o", ms=4, capsize=3, label=g)
    ax.axhline(1.0, color="grey", lw=0.6)
    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels(cells, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("normalized flow rate")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, Path(path))


def render_plots(
    traces: Mapping[str, Trace],
    summaries: Sequence[StatsSummary],
    outdir,
) -> list[Path]:
    outdir = Path(outdir)
    if not traces and not summaries:
        raise ValueError("nothing to plot")
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create {outdir}: {e}") from e
    out = []
    for name, trace in traces.items():
        out.append(plot_sawtooth(trace, outdir / f"{name}_sawtooth.svg", title=name))
    if summaries:
        out.append(plot_whiskers(summaries, outdir / "summary_whiskers.svg"))
    return out
