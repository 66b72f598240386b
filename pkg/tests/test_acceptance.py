"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (with the measured values) that is
printed in the terminal summary, then asserts.
"""

import io
import statistics
import time
from dataclasses import replace
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest

from renofriendly.bottleneck import LossPolicy
from renofriendly.chain import build_chain, stationary
from renofriendly.cli import main
from renofriendly.config import load_grid, load_scenario
from renofriendly.core import validate_scenario
from renofriendly.friendliness import reno_friendly_ai
from renofriendly.harness import run_grid, run_scenario, scenario_of
from renofriendly.montecarlo import monte_carlo
from renofriendly.sim import SimConfig, detect_cycle, normalized_rates, run, sync_aligned_buffer

from helpers import RENO, creno, link

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def cli_timed(argv, reps=50):
    """Output of one invocation and the median in-process wall time (ms) over ``reps``."""
    out = io.StringIO()
    main(argv, out=out)
    times = []
    for _ in range(reps):
        t = time.perf_counter()
        main(argv, out=io.StringIO())
        times.append(time.perf_counter() - t)
    return out.getvalue(), statistics.median(times) * 1e3


def sync_equality(cfg):
    """Converged cycle stats and sampled means for a synchronized scenario config."""
    res = run_scenario(cfg)
    cyc = detect_cycle(res.trace)[0]
    sums = cyc.packets_per_cycle
    rel = abs(sums[0] - sums[1]) / max(sums)
    means = [r.mean for r in res.summaries]
    return res, cyc, rel, means


def test_criterion_1_formula_exactness(criterion):
    out7, ms7 = cli_timed(["ai-factor", "--b", "0.7"])
    out5, ms5 = cli_timed(["ai-factor", "--b", "0.5"])
    ok = out7 == "9/17 (≈ 0.5294)\n" and out5 == "1\n" and max(ms7, ms5) < 1.0
    criterion(1, "ai-factor exact 9/17 and 1, < 1 ms", ok,
              f"b=0.7 -> {out7.strip()!r} ({ms7:.3f} ms); b=0.5 -> {out5.strip()!r} ({ms5:.3f} ms)")
    assert ok


def test_criterion_2_probability_calculus(criterion):
    out1, ms1 = cli_timed(["probs", "--rates", "17,15", "--losses", "1"])
    out2, ms2 = cli_timed(["probs", "--rates", "17,15", "--losses", "2"])
    want1 = ["flow 0: 17/32", "flow 1: 15/32"]
    want2 = ["{0}: 289/1024", "{0,1}: 510/1024", "{1}: 225/1024"]
    ok = all(w in out1 for w in want1) and all(w in out2 for w in want2) and max(ms1, ms2) < 1.0
    criterion(2, "probs 17/32, 15/32 and 289/510/225 over 1024, < 1 ms", ok,
              f"L=1 {ms1:.3f} ms, L=2 {ms2:.3f} ms")
    assert ok


def test_criterion_3_synchronized_equality(criterion):
    t = time.perf_counter()
    res, cyc, rel, means = sync_equality(load_scenario(CONFIGS / "sync_1v1.toml"))
    elapsed = time.perf_counter() - t
    ratio = cyc.peak_window[1] / cyc.peak_window[0]
    ok = (
        res.converged
        and rel < 1e-6
        and all(abs(m - 1) <= 0.01 for m in means)
        and abs(ratio - 15 / 17) <= 1e-6
        and elapsed < 1.0
    )
    criterion(3, "sync 1v1 equal window sums, means 1.00, peak ratio 15/17, < 1 s", ok,
              f"sum rel diff {rel:.2e}; means {means[0]:.5f}/{means[1]:.5f}; "
              f"peak ratio err {abs(ratio - 15 / 17):.2e}; {elapsed:.2f} s")
    assert ok


def test_criterion_4_sweep_and_perturbation(criterion):
    t = time.perf_counter()
    base = load_scenario(CONFIGS / "sync_1v1.toml")
    details, ok = [], True
    for b in ("0.55", "0.6", "0.7", "0.8", "0.9"):
        groups = (RENO, creno(F(b)))
        cfg = replace(base, groups=groups, align_buffer=True)
        res, cyc, rel, means = sync_equality(cfg)
        good = res.converged and rel < 1e-6 and all(abs(m - 1) <= 0.01 for m in means)
        a_c = reno_friendly_ai(F(b))
        flips = []
        for scale in (F(4, 5), F(6, 5)):
            # same buffer as the unperturbed case so only a_c changes
            lk = sync_aligned_buffer(base.link, groups)
            pert = replace(base, link=lk, groups=(RENO, creno(F(b), a=a_c * scale)))
            m = [r.mean for r in run_scenario(pert).summaries]
            flips.append(m[1] < m[0] if scale < 1 else m[1] > m[0])
        good = good and all(flips)
        ok = ok and good
        details.append(f"b={b}: rel {rel:.1e}, means {means[0]:.4f}/{means[1]:.4f}, flips {flips}")
    elapsed = time.perf_counter() - t
    ok = ok and elapsed < 10.0
    criterion(4, "sweep b_c in {0.55..0.9} equal; +-20% a_c flips order, < 10 s", ok,
              "; ".join(details) + f"; {elapsed:.2f} s")
    assert ok


def test_criterion_5_shallow_buffer_ratio(criterion):
    t = time.perf_counter()
    deep = run_scenario(load_scenario(CONFIGS / "sync_1v1.toml")).summaries
    shallow = run_scenario(load_scenario(CONFIGS / "shallow_1v1.toml")).summaries
    elapsed = time.perf_counter() - t
    r_deep = deep[1].mean / deep[0].mean
    r_shallow = shallow[1].mean / shallow[0].mean
    ok = (
        shallow[0].mean < 1
        and shallow[1].mean < 1
        and abs(r_shallow - r_deep) / r_deep <= 0.02
        and elapsed < 1.0
    )
    criterion(5, "shallow buffer: both means < 1, ratio within 2% of deep, < 1 s", ok,
              f"shallow means {shallow[0].mean:.4f}/{shallow[1].mean:.4f}; ratio {r_shallow:.5f} "
              f"vs deep {r_deep:.5f}; {elapsed:.2f} s")
    assert ok


def test_criterion_6_rate_monotone_in_cycle(criterion):
    t = time.perf_counter()
    cfg = load_scenario(CONFIGS / "sync_1v1.toml")
    tr = run(SimConfig(scenario_of(cfg), cfg.bottleneck))
    cyc = detect_cycle(tr)[0]
    recs = tr.records[cyc.start_round : cyc.start_round + cyc.J]
    rates = [r.rate[1] for r in recs]
    windows = [r.cwnd[1] for r in recs]
    elapsed = time.perf_counter() - t
    worst = max(b - a for a, b in zip(rates, rates[1:]))
    ok = (
        worst <= 0
        and all(b > a for a, b in zip(windows, windows[1:]))
        and elapsed < 1.0
    )
    criterion(6, "C-Reno rate non-increasing while its window grows, < 1 s", ok,
              f"{len(rates)} rounds, largest step {worst:.3e} pkt/s; {elapsed:.2f} s")
    assert ok


def test_criterion_7_probabilistic_bias(criterion):
    t = time.perf_counter()
    cfg = load_scenario(CONFIGS / "probabilistic_1v1.toml")
    sc = scenario_of(cfg)
    policy = LossPolicy(cfg.bottleneck.losses_per_event)
    # quantization band: the chain at three grid spacings
    chain_ratios = [stationary(build_chain(sc, policy, quantum=q)).rate_ratio(1, 0) for q in (1.0, 0.5, 0.25)]
    lo, hi = min(chain_ratios), max(chain_ratios)
    mc = monte_carlo(sc, cfg.bottleneck, seeds=10, duration=cfg.measurement.duration,
                     master_seed=cfg.seed, warmup_events=cfg.measurement.warmup_events)
    r = mc.group_ratio(sc, 1, 0)
    elapsed = time.perf_counter() - t
    ok = (
        all(0 < x - 1 <= 0.10 for x in chain_ratios)
        and 0 < r.mean - 1 <= 0.10
        and r.low <= hi and lo <= r.high
        and elapsed < 120
    )
    criterion(7, "chain and 10x250 Monte-Carlo: C-Reno ahead by (0, 10%], intervals overlap, < 2 min", ok,
              f"chain ratio {chain_ratios[0]:.4f} (band [{lo:.4f}, {hi:.4f}] over quanta 1/0.5/0.25); "
              f"MC {r.mean:.4f} [{r.low:.4f}, {r.high:.4f}]; {elapsed:.1f} s")
    assert ok


def test_criterion_8_pie_roughness(criterion):
    t = time.perf_counter()
    rows = run_grid(load_grid(CONFIGS / "grid_pie.toml"))
    elapsed = time.perf_counter() - t
    ok = elapsed < 300 and len(rows) == 8
    parts = []
    for i in range(0, len(rows), 2):
        a, b = rows[i], rows[i + 1]
        for r in (a, b):
            ok = ok and r.error == "" and abs(r.mean - 1) <= 0.15 and r.p1 < r.mean < r.p99
        bias = "A(C-Reno) ahead" if a.mean > b.mean else "B(Reno) ahead"
        parts.append(f"{a.scenario_id.split('_')[-1]}: A {a.mean:.3f} [{a.p1:.2f},{a.p99:.2f}] "
                     f"B {b.mean:.3f} [{b.p1:.2f},{b.p99:.2f}] {bias}")
    criterion(8, "PIE 1:1, 2:8, 5:5, 8:2 means within 15%, P1 < mean < P99, < 5 min", ok,
              "; ".join(parts) + f"; {elapsed:.1f} s")
    assert ok


def test_criterion_9_determinism(criterion, tmp_path):
    runs = {
        "trace": lambda d: ["simulate", "--config", str(CONFIGS / "sync_1v1.toml"), "--trace-csv", str(d / "trace.csv")],
        "shallow": lambda d: ["simulate", "--config", str(CONFIGS / "shallow_1v1.toml"), "--trace-csv", str(d / "shallow.csv")],
        "chain": lambda d: ["chain", "--config", str(CONFIGS / "probabilistic_1v1.toml"),
                            "--states-csv", str(d / "states.csv"), "--summary-csv", str(d / "chain.csv")],
        "mc": lambda d: ["mc", "--config", str(CONFIGS / "probabilistic_1v1.toml"), "--seeds", "10",
                         "--out", str(d / "mc.csv")],
        "pie grid": lambda d: ["grid", "--config", str(CONFIGS / "grid_pie.toml"), "--out", str(d / "pie.csv")],
    }
    for rep in ("a", "b"):
        d = tmp_path / rep
        d.mkdir()
        for make in runs.values():
            assert main(make(d), out=io.StringIO()) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = {f: (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files}
    ok = len(files) == 6 and all(same.values())
    criterion(9, "same master seed gives byte-identical CSVs", ok,
              ", ".join(f"{f} {'identical' if v else 'DIFFERS'}" for f, v in same.items()))
    assert ok
