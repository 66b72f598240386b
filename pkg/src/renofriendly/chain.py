"""Exact Markov chain over congestion events at a tail-drop bottleneck.

A state is the vector of windows at a congestion event, quantized to a grid
of ``quantum`` segments. From each state the chain enumerates which flows get
hit (losses drawn with replacement in proportion to each flow's rate at the
event), applies the reductions, and grows the windows deterministically until
the buffer overflows again. Long-run rates come from renewal-reward: expected
packets per transition over expected time per transition under the stationary
distribution.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, TextIO

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .bottleneck import LossPolicy
from .core import Scenario, ScenarioError
from .friendliness import multi_loss_outcome_probs, single_loss_hit_probs

MAX_CHAIN_FLOWS = 4


class ChainError(RuntimeError):
    pass


@dataclass(frozen=True)
class Transition:
    target: int
    prob: Fraction
    hit: frozenset
    packets: tuple[float, ...]
    duration: float


@dataclass
class EventChain:
    scenario: Scenario
    quantum: float
    sync: str
    states: list[tuple[int, ...]] = field(default_factory=list)
    transitions: list[list[Transition]] = field(default_factory=list)
    initial: int = 0
    pruned: list[float] = field(default_factory=list)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def windows(self, state: int) -> np.ndarray:
        return np.array(self.states[state], dtype=float) * self.quantum

    def transition_matrix(self) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for s, outs in enumerate(self.transitions):
            for tr in outs:
                rows.append(s)
                cols.append(tr.target)
                vals.append(float(tr.prob))
        n = self.n_states
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _grow_to_overflow(y: np.ndarray, a: np.ndarray, T: float) -> int:
    """Rounds of growth after ``y`` until the aggregate window first exceeds ``T``."""
    total, growth = y.sum(), a.sum()
    if total > T:
        return 0
    m = int(math.floor((T - total) / growth)) + 1
    while m > 0 and total + (m - 1) * growth > T:
        m -= 1
    while total + m * growth <= T:
        m += 1
    return m


def _cycle_time(total: float, growth: float, m: int, sc: Scenario) -> float:
    """Sum of round RTTs for aggregate windows total, total + growth, ..., total + m*growth."""
    n = m + 1
    bdp = sc.bdp_pkts
    k0 = max(0, math.ceil((bdp - total) / growth))
    if k0 > m:
        queued = 0.0
    else:
        cnt = m - k0 + 1
        queued = cnt * (total - bdp) + growth * (k0 + m) * cnt / 2
    return n * sc.base_rtt + queued / sc.capacity_pkts


def build_chain(
    scenario: Scenario,
    policy: Optional[LossPolicy] = None,
    quantum: float = 1.0,
    sync: str = "probabilistic",
    cap: int = 1_000_000,
    min_path_prob: float = 1e-12,
) -> EventChain:
    """Enumerate the event chain reachable from the first overflow of a cold start.

    The reachable set is unbounded in principle (a flow that keeps escaping
    losses keeps growing), so states are explored best-first by the
    probability of their likeliest path from the start, and states below
    ``min_path_prob`` are cut. Transitions into cut states are dropped and each
    state's remaining outgoing mass is renormalized exactly; the largest mass
    dropped from each state is kept in ``EventChain.pruned``.
    """
    n = scenario.n_flows
    if n > MAX_CHAIN_FLOWS:
        raise ScenarioError(f"exact chain supports at most {MAX_CHAIN_FLOWS} flows, got {n}")
    if not quantum > 0:
        raise ScenarioError("quantum must be positive")
    if sync not in ("all", "probabilistic"):
        raise ScenarioError(f"unknown sync mode {sync!r}")
    policy = policy or LossPolicy()
    a = np.array([f.a for f in scenario.flows])
    b = np.array([f.b for f in scenario.flows])
    growth = float(a.sum())
    T = scenario.overflow_pkts
    everyone = frozenset(range(n))

    def quantize(x: np.ndarray) -> tuple[int, ...]:
        return tuple(max(1, int(round(v / quantum))) for v in x)

    def outgoing(ks):
        x = np.array(ks, dtype=float) * quantum
        if sync == "all":
            outcomes = {everyone: Fraction(1)}
        else:
            losses = policy.count(growth, float(x.sum()) - T)
            outcomes = multi_loss_outcome_probs(single_loss_hit_probs(list(ks)), losses).marginal
        out = []
        for hit, p in outcomes.items():
            mask = np.array([i in hit for i in range(n)])
            y = np.where(mask, b * x, x + a)
            m = _grow_to_overflow(y, a, T)
            packets = tuple((m + 1) * y + a * m * (m + 1) / 2)
            duration = _cycle_time(float(y.sum()), growth, m, scenario)
            out.append((quantize(y + m * a), p, hit, packets, duration))
        return out

    start = np.ones(n)
    first = quantize(start + _grow_to_overflow(start, a, T) * a)
    best = {first: 1.0}
    expanded: dict[tuple[int, ...], list] = {}
    heap = [(-1.0, first)]
    while heap:
        negp, ks = heapq.heappop(heap)
        if ks in expanded or -negp < best[ks]:
            continue
        if len(expanded) >= cap:
            raise ChainError(f"state space exceeds cap of {cap} states")
        expanded[ks] = outs = outgoing(ks)
        for target, p, *_ in outs:
            pp = -negp * float(p)
            if pp >= min_path_prob and pp > best.get(target, 0.0) and target not in expanded:
                best[target] = pp
                heapq.heappush(heap, (-pp, target))

    chain = EventChain(scenario, quantum, sync)
    chain.states = list(expanded)
    index = {ks: i for i, ks in enumerate(chain.states)}
    chain.initial = index[first]
    for ks in chain.states:
        kept = [o for o in expanded[ks] if o[0] in index]
        mass = sum((o[1] for o in kept), Fraction(0))
        chain.pruned.append(float(1 - mass))
        chain.transitions.append(
            [Transition(index[t], p / mass, hit, pk, d) for t, p, hit, pk, d in kept]
        )
    return chain


@dataclass
class StationaryResult:
    states: list[tuple[int, ...]]
    probabilities: np.ndarray
    throughput: np.ndarray  # segments per second, per flow
    ratio_to_fair: np.ndarray
    residual: float
    iterations: int
    recurrent_states: int
    closed_classes: int
    pruned_mass: float  # stationary-weighted outgoing mass cut by build_chain

    def rate_ratio(self, i: int, j: int) -> float:
        return float(self.throughput[i] / self.throughput[j])


def recurrent_class(P: sparse.csr_matrix) -> tuple[np.ndarray, int]:
    """States of the largest closed communicating class, and how many closed classes exist."""
    ncomp, labels = connected_components(P, directed=True, connection="strong")
    coo = P.tocoo()
    leaks = np.zeros(ncomp, dtype=bool)
    crossing = labels[coo.row] != labels[coo.col]
    leaks[labels[coo.row[crossing]]] = True
    closed = [c for c in range(ncomp) if not leaks[c]]
    sizes = np.bincount(labels, minlength=ncomp)
    best = max(closed, key=lambda c: (sizes[c], -c))
    return np.flatnonzero(labels == best), len(closed)


def stationary(chain: EventChain, tol: float = 1e-12, max_iter: int = 5_000_000) -> StationaryResult:
    """Stationary distribution by (lazy) power iteration, and renewal-reward rates."""
    P = chain.transition_matrix()
    members, nclosed = recurrent_class(P)
    Q = P[members][:, members].tocsr()
    # lazy chain: same fixed point, no periodicity trouble
    QT = Q.T.tocsr()
    k = len(members)
    pi = np.full(k, 1.0 / k)
    residual = np.inf
    it = 0
    while it < max_iter:
        nxt = QT @ pi
        residual = float(np.abs(nxt - pi).sum())
        if residual < tol:
            break
        pi = 0.5 * (pi + nxt)
        pi /= pi.sum()
        it += 1
    else:
        raise ChainError(f"power iteration did not reach residual {tol} in {max_iter} iterations")

    n = chain.scenario.n_flows
    reward = np.zeros((k, n))
    duration = np.zeros(k)
    for i, s in enumerate(members):
        for tr in chain.transitions[s]:
            p = float(tr.prob)
            reward[i] += p * np.asarray(tr.packets)
            duration[i] += p * tr.duration
    throughput = (pi @ reward) / (pi @ duration)
    pruned = float(pi @ np.asarray(chain.pruned)[members]) if chain.pruned else 0.0
    fair = chain.scenario.capacity_pkts / n
    probs = np.zeros(chain.n_states)
    probs[members] = pi
    return StationaryResult(
        states=chain.states,
        probabilities=probs,
        throughput=throughput,
        ratio_to_fair=throughput / fair,
        residual=residual,
        iterations=it,
        recurrent_states=k,
        closed_classes=nclosed,
        pruned_mass=pruned,
    )


def write_state_csv(result: StationaryResult, quantum: float, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["state", "probability"])
    for state, p in zip(result.states, result.probabilities):
        if p > 0:
            label = ";".join(repr(k * quantum) for k in state)
            w.writerow([label, repr(float(p))])


def write_summary_csv(result: StationaryResult, scenario: Scenario, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["flow", "cca", "long_run_rate", "ratio_to_fair"])
    for f in scenario.flows:
        i = f.flow_id
        w.writerow([i, f.kind.value, repr(float(result.throughput[i])), repr(float(result.ratio_to_fair[i]))])
