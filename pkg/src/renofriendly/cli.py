"""Command line front end.

    renofriendly ai-factor --b 0.7
    renofriendly probs --rates 17,15 --losses 2
    renofriendly simulate --config scenario.toml [--trace-csv trace.csv] [--svg outdir]
    renofriendly grid --config grid.toml --out summary.csv [--svg outdir]
    renofriendly chain --config scenario.toml [--states-csv p] [--summary-csv p]
    renofriendly mc --config scenario.toml --seeds 10 [--out per_seed.csv]
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from functools import lru_cache

from . import friendliness as fr


def _pct(x: Fraction) -> str:
    return f"{float(x) * 100:.2f}%"


def cmd_ai_factor(args, out) -> int:
    a = fr.ai_factor(args.a_r, args.b_r, args.b)
    if args.json:
        print(json.dumps({"b_c": str(fr.as_ratio(args.b)), "a_c": str(a), "value": float(a)}), file=out)
    elif a.denominator == 1:
        print(a, file=out)
    else:
        print(f"{a} (≈ {float(a):.4f})", file=out)
    return 0


def _key(k) -> str:
    if isinstance(k, frozenset):
        return "{" + ",".join(str(i) for i in sorted(k)) + "}"
    if isinstance(k, tuple):
        return "(" + ",".join(str(i) for i in k) + ")"
    return str(k)


def cmd_probs(args, out) -> int:
    rates = [fr.as_ratio(r) for r in args.rates.split(",")]
    single = fr.single_loss_hit_probs(rates)
    res = fr.multi_loss_outcome_probs(single, args.losses)
    # common denominator (sum of rates)^L, when the rates are integers
    denom = None
    if all(r.denominator == 1 for r in rates):
        denom = int(sum(rates)) ** args.losses

    def over(p: Fraction) -> str:
        if denom is None or denom % p.denominator:
            return str(p)
        return f"{p.numerator * (denom // p.denominator)}/{denom}"

    if args.json:
        payload = {
            "single": {_key(k): str(v) for k, v in single.items()},
            "losses": args.losses,
            "hit_sets": {_key(k): str(v) for k, v in res.marginal.items()},
        }
        if res.sequences is not None:
            payload["sequences"] = {_key(k): str(v) for k, v in res.sequences.items()}
        print(json.dumps(payload), file=out)
        return 0
    print("single loss, P(flow hit):", file=out)
    for k, v in single.items():
        print(f"  flow {k}: {v}  ({_pct(v)})", file=out)
    if res.sequences is not None and args.losses > 1:
        print(f"{args.losses} losses, P(sequence):", file=out)
        for k, v in res.sequences.items():
            print(f"  {_key(k)}: {over(v)}  ({_pct(v)})", file=out)
    print(f"{args.losses} losses, P(exactly these flows hit):", file=out)
    for k, v in sorted(res.marginal.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
        print(f"  {_key(k)}: {over(v)}  ({_pct(v)})", file=out)
    return 0


def _load_scenario(args):
    from .config import load_scenario

    cfg = load_scenario(args.config)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    return cfg


def _print_rows(rows, args, out) -> None:
    from dataclasses import asdict

    if args.json:
        print(json.dumps([asdict(r) for r in rows]), file=out)
        return
    for r in rows:
        err = f"  [{r.error}]" if r.error else ""
        print(
            f"{r.scenario_id:<28} {r.flow_group:<8} n={r.n_flows:<3} "
            f"P1={r.p1:.3f} mean={r.mean:.3f} P99={r.p99:.3f} samples={r.samples}{err}",
            file=out,
        )


def cmd_simulate(args, out) -> int:
    from .harness import run_scenario
    from .sim import write_trace_csv

    cfg = _load_scenario(args)
    res = run_scenario(cfg)
    if args.trace_csv:
        with open(args.trace_csv, "w", newline="") as fh:
            write_trace_csv(res.trace, fh)
    if args.svg:
        from .plots import render_plots

        render_plots({cfg.name: res.trace}, res.summaries, args.svg)
    _print_rows(res.summaries, args, out)
    return 0


def cmd_grid(args, out) -> int:
    from dataclasses import replace

    from .config import load_grid
    from .harness import run_grid, write_summary_csv

    grid = load_grid(args.config)
    if args.seed is not None:
        grid = replace(grid, template=replace(grid.template, seed=args.seed))
    rows = run_grid(grid, workers=args.workers)
    with open(args.out, "w", newline="") as fh:
        write_summary_csv(rows, fh)
    if args.svg:
        from .plots import render_plots

        render_plots({}, rows, args.svg)
    _print_rows(rows, args, out)
    return 0


def cmd_chain(args, out) -> int:
    from .bottleneck import LossPolicy
    from .chain import build_chain, stationary, write_state_csv, write_summary_csv
    from .harness import scenario_of

    cfg = _load_scenario(args)
    if cfg.bottleneck.aqm != "taildrop":
        raise SystemExit("chain: the exact chain models a tail-drop bottleneck only")
    sc = scenario_of(cfg)
    quantum = args.quantum or cfg.chain.quantum
    chain = build_chain(
        sc,
        LossPolicy(cfg.bottleneck.losses_per_event),
        quantum=quantum,
        sync=cfg.bottleneck.sync,
        min_path_prob=cfg.chain.min_path_prob,
    )
    res = stationary(chain)
    if args.states_csv:
        with open(args.states_csv, "w", newline="") as fh:
            write_state_csv(res, quantum, fh)
    if args.summary_csv:
        with open(args.summary_csv, "w", newline="") as fh:
            write_summary_csv(res, sc, fh)
    if args.json:
        print(json.dumps({
            "states": chain.n_states,
            "recurrent_states": res.recurrent_states,
            "residual": res.residual,
            "pruned_mass": res.pruned_mass,
            "flows": [
                {"flow": f.flow_id, "cca": f.kind.value, "long_run_rate": float(res.throughput[f.flow_id]),
                 "ratio_to_fair": float(res.ratio_to_fair[f.flow_id])}
                for f in sc.flows
            ],
        }), file=out)
        return 0
    print(f"states={chain.n_states} recurrent={res.recurrent_states} residual={res.residual:.2e} "
          f"pruned_mass={res.pruned_mass:.2e}", file=out)
    for f in sc.flows:
        i = f.flow_id
        print(f"  flow {i} {f.kind.value:<6} rate={res.throughput[i]:.3f} pkt/s  ratio_to_fair={res.ratio_to_fair[i]:.4f}",
              file=out)
    return 0


def cmd_mc(args, out) -> int:
    from .harness import scenario_of
    from .montecarlo import monte_carlo, write_per_seed_csv

    cfg = _load_scenario(args)
    sc = scenario_of(cfg)
    res = monte_carlo(
        sc,
        cfg.bottleneck,
        seeds=args.seeds,
        duration=cfg.measurement.duration,
        interval=cfg.measurement.interval_s,
        master_seed=cfg.seed,
        warmup_events=cfg.measurement.warmup_events,
        max_rounds=cfg.measurement.max_rounds,
        workers=args.workers,
    )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_per_seed_csv(res, sc, fh)
    groups = res.group_means(sc)
    if args.json:
        print(json.dumps({
            "seeds": len(res.seeds),
            "groups": [
                {"flow_group": g.label, "cca": g.kind.value, "mean": e.mean, "ci95": [e.low, e.high]}
                for g, e in zip(sc.groups, groups)
            ],
        }), file=out)
        return 0
    print(f"{len(res.seeds)} seeds x {cfg.measurement.samples} samples", file=out)
    for g, e in zip(sc.groups, groups):
        print(f"  {g.label:<8} mean={e.mean:.4f}  95% CI [{e.low:.4f}, {e.high:.4f}]", file=out)
    if len(sc.groups) == 2:
        r = res.group_ratio(sc, 1, 0)
        print(f"  ratio {sc.groups[1].label}/{sc.groups[0].label} = {r.mean:.4f}  95% CI [{r.low:.4f}, {r.high:.4f}]",
              file=out)
    return 0


@lru_cache(maxsize=None)
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="renofriendly", description="AIMD Reno-friendliness toolkit")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ai-factor", help="Reno-friendly additive increase for a decrease factor")
    s.add_argument("--b", required=True, type=fr.as_ratio, help="decrease factor b_c, e.g. 0.7 or 7/10")
    s.add_argument("--a-r", type=fr.as_ratio, default=Fraction(1), help="reference increase (default 1)")
    s.add_argument("--b-r", type=fr.as_ratio, default=Fraction(1, 2), help="reference decrease (default 1/2)")
    s.set_defaults(func=cmd_ai_factor)

    s = sub.add_parser("probs", help="loss-hit probabilities at a congestion event")
    s.add_argument("--rates", required=True, help="comma-separated per-flow packet rates")
    s.add_argument("--losses", type=int, default=1)
    s.set_defaults(func=cmd_probs)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--trace-csv")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("grid", help="sweep a scenario grid")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--svg")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("chain", help="exact Markov chain for probabilistic tail-drop hits")
    s.add_argument("--config", required=True)
    s.add_argument("--quantum", type=float, default=None)
    s.add_argument("--states-csv")
    s.add_argument("--summary-csv")
    s.set_defaults(func=cmd_chain)

    s = sub.add_parser("mc", help="seeded Monte-Carlo with 95%% confidence intervals")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--out", help="per-seed CSV")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_mc)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, out)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
