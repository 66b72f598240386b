"""Closed-form AIMD friendliness relations and loss-hit probability calculus.

Everything here works in exact rational arithmetic. Float arguments are
converted through their shortest decimal repr, so ``0.7`` becomes ``7/10``
rather than the nearest binary fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from math import prod
from typing import Hashable, Iterable, Mapping, Optional, Sequence, Union

from .core import AimdParams, RENO_A, RENO_B

Rational = Union[int, float, str, Fraction]

# sequences are only enumerated below this many outcomes
MAX_SEQUENCES = 200_000


def as_ratio(x: Rational) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _check_b(*bs: Fraction) -> None:
    for b in bs:
        if not 0 < b < 1:
            raise ValueError(f"decrease factor out of range (0, 1): {b}")


def steady_state_peak(params: AimdParams, J: int) -> Fraction:
    """Peak window of a converged sawtooth with ``J`` rounds per cycle: a*J / (1 - b)."""
    if J < 1:
        raise ValueError("cycle must have >=1 round")
    a, b = as_ratio(params.a), as_ratio(params.b)
    return a * J / (1 - b)


def cycle_rounds(params: AimdParams, peak: Rational) -> Fraction:
    """Inverse of :func:`steady_state_peak`; may be fractional."""
    a, b = as_ratio(params.a), as_ratio(params.b)
    return as_ratio(peak) * (1 - b) / a


def peak_window_ratio(b_r: Rational, b_c: Rational) -> Fraction:
    """Ratio of peak windows (c over r) for equal per-cycle throughput."""
    b_r, b_c = as_ratio(b_r), as_ratio(b_c)
    _check_b(b_r, b_c)
    return (1 + b_r) / (1 + b_c)


def peak_rate_ratio(b_r: Rational, b_c: Rational) -> Fraction:
    """Ratio of packet rates (r over c) when both flows sit at their peak."""
    b_r, b_c = as_ratio(b_r), as_ratio(b_c)
    _check_b(b_r, b_c)
    return (1 + b_c) / (1 + b_r)


def ai_factor(a_r: Rational, b_r: Rational, b_c: Rational) -> Fraction:
    """Additive increase that makes an AIMD(a_c, b_c) flow match an AIMD(a_r, b_r) flow."""
    a_r, b_r, b_c = as_ratio(a_r), as_ratio(b_r), as_ratio(b_c)
    if not a_r > 0:
        raise ValueError(f"additive increase must be positive: {a_r}")
    _check_b(b_r, b_c)
    return a_r * (1 - b_c) / (1 + b_c) * (1 + b_r) / (1 - b_r)


def reno_friendly_ai(b_c: Rational) -> Fraction:
    """Additive increase for decrease factor ``b_c`` that competes equally with Reno."""
    b_c = as_ratio(b_c)
    _check_b(b_c)
    return 3 * (1 - b_c) / (1 + b_c)


def aggregate_queue_growth(params: Iterable[AimdParams]) -> Fraction:
    """Segments per RTT by which the shared queue grows between responses."""
    return sum((as_ratio(p.a) for p in params), Fraction(0))


def reno_params() -> AimdParams:
    return AimdParams(RENO_A, RENO_B)


def creno_params(b_c: Rational = Fraction(7, 10)) -> AimdParams:
    b_c = as_ratio(b_c)
    return AimdParams(reno_friendly_ai(b_c), b_c)


class HitDistribution(Mapping):
    """Exact probability mass over outcomes of a congestion event.

    Keys are flow indices (single loss), ordered tuples of flow indices (loss
    sequences) or frozensets (which flows were hit at least once).
    """

    def __init__(self, probs: Mapping[Hashable, Fraction]):
        probs = {k: as_ratio(v) for k, v in probs.items()}
        for k, v in probs.items():
            if not 0 <= v <= 1:
                raise ValueError(f"probability of {k!r} outside [0, 1]: {v}")
        total = sum(probs.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")
        self._probs = probs

    def __getitem__(self, key):
        return self._probs[key]

    def __iter__(self):
        return iter(self._probs)

    def __len__(self):
        return len(self._probs)

    def __repr__(self):
        body = ", ".join(f"{k!r}: {v}" for k, v in self._probs.items())
        return f"HitDistribution({{{body}}})"

    def total(self) -> Fraction:
        return sum(self._probs.values(), Fraction(0))


def single_loss_hit_probs(rates: Sequence[Rational]) -> HitDistribution:
    """Probability that a single loss lands on each flow: proportional to its packet rate."""
    rs = [as_ratio(r) for r in rates]
    if not rs:
        raise ValueError("need at least one flow rate")
    for i, r in enumerate(rs):
        if not r > 0:
            raise ValueError(f"flow {i} rate must be positive, got {r}")
    total = sum(rs, Fraction(0))
    return HitDistribution({i: r / total for i, r in enumerate(rs)})


@dataclass(frozen=True)
class MultiLossOutcome:
    """``sequences`` is None when there are too many to enumerate."""

    losses: int
    sequences: Optional[HitDistribution]
    marginal: HitDistribution


def hit_set_probs(single: Mapping[int, Fraction], losses: int) -> dict[frozenset, Fraction]:
    """P(exactly the flows in H are hit) for ``losses`` independent draws.

    Inclusion-exclusion over subsets of H, so cost is independent of ``losses``.
    """
    flows = sorted(single)
    out = {}
    for k in range(1, len(flows) + 1):
        for hit in combinations(flows, k):
            p = Fraction(0)
            for j in range(1, k + 1):
                sign = 1 if (k - j) % 2 == 0 else -1
                for sub in combinations(hit, j):
                    p += sign * sum((single[i] for i in sub), Fraction(0)) ** losses
            if p:
                out[frozenset(hit)] = p
    return out


def multi_loss_outcome_probs(single: Mapping[int, Fraction], losses: int) -> MultiLossOutcome:
    """Distribution of ``losses`` independent hits, drawn with replacement at fixed rates.

    A flow hit several times still only reduces once, so the marginal over hit
    sets is what drives the window dynamics.
    """
    if losses < 1:
        raise ValueError("loss count must be >= 1")
    probs = {i: as_ratio(p) for i, p in single.items()}
    flows = sorted(probs)
    sequences = None
    if len(flows) ** losses <= MAX_SEQUENCES:
        seq = {}
        for s in product(flows, repeat=losses):
            p = prod((probs[i] for i in s), start=Fraction(1))
            if p:
                seq[s] = p
        sequences = HitDistribution(seq)
    return MultiLossOutcome(losses, sequences, HitDistribution(hit_set_probs(probs, losses)))
