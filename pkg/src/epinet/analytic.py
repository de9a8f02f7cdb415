"""Semi-analytic one-round drift of a policy maker's credence.

A policy maker's expected belief after a round is approximated as
``B' = Y_P * Y_S * B``: scientists push it up by ``Y_S >= 1`` and the
selective-sharing propagandist pulls it down by ``Y_P <= 1``. The binomial
tail sums behind ``Y_P`` are evaluated in log space with compensated
summation, so they stay accurate out to n = 1000 and beyond.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

KNIFE_EDGE_TOL = 1e-9


class DegenerateSpuriousRate(ValueError):
    """P(x < n/2) underflows to zero, so spurious-draw statistics are undefined."""


class Drift(str, enum.Enum):
    PROPAGANDIST_WINS = "propagandist_wins"
    SCIENTISTS_WIN = "scientists_win"
    KNIFE_EDGE = "knife_edge"


def _check_eps(epsilon: float, allow_zero: bool = False) -> None:
    lo_ok = epsilon >= 0.0 if allow_zero else epsilon > 0.0
    if not (lo_ok and epsilon < 0.5):
        raise ValueError(f"epsilon out of range: {epsilon!r}")


def _spurious_log_weights(n: int, epsilon: float) -> list[float]:
    """log P(x = i) under Binomial(n, 0.5 + eps) for every i < n/2."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _check_eps(epsilon, allow_zero=True)
    lp = math.log(0.5 + epsilon)
    lq = math.log(0.5 - epsilon)
    cutoff = (n + 1) // 2  # i < n/2  <=>  i <= ceil(n/2) - 1
    out, c = [], 1
    for i in range(cutoff):
        out.append(math.log(c) + i * lp + (n - i) * lq)
        c = c * (n - i) // (i + 1)  # exact C(n, i + 1)
    return out


def _normalised(log_w: list[float]) -> tuple[float, list[float]]:
    top = max(log_w)
    return top, [math.exp(w - top) for w in log_w]


def log_p_spurious(n: int, epsilon: float) -> float:
    top, w = _normalised(_spurious_log_weights(n, epsilon))
    return top + math.log(math.fsum(w))


def p_spurious(n: int, epsilon: float) -> float:
    """P(x < n/2) for x ~ Binomial(n, 0.5 + eps): the chance one study misleads."""
    return math.exp(log_p_spurious(n, epsilon))


def spurious_rate_z(n: int, epsilon: float, K: int) -> float:
    """Expected number of spurious results per round if all K scientists test B."""
    return p_spurious(n, epsilon) * K


def spurious_expectation(n: int, epsilon: float) -> float:
    """E[x | x < n/2], the typical success count of a spurious study."""
    if p_spurious(n, epsilon) == 0.0:
        raise DegenerateSpuriousRate(f"P(x < n/2) underflows for n={n}, epsilon={epsilon}")
    _, w = _normalised(_spurious_log_weights(n, epsilon))
    return math.fsum(i * wi for i, wi in enumerate(w)) / math.fsum(w)


def _log_base(epsilon: float) -> float:
    return math.log((1 - 2 * epsilon) / (1 + 2 * epsilon))


def _log_X(n: int, epsilon: float) -> float:
    _check_eps(epsilon, allow_zero=True)
    return 2 * n * epsilon * _log_base(epsilon)


def _log_X_tilde(n: int, epsilon: float) -> float:
    _check_eps(epsilon, allow_zero=True)
    return (2 * spurious_expectation(n, epsilon) - n) * _log_base(epsilon)


def factor_X(n: int, epsilon: float) -> float:
    """Odds factor of theory A after an expected-value study: ((1-2e)/(1+2e))^(2ne)."""
    return math.exp(_log_X(n, epsilon))


def factor_X_tilde(n: int, epsilon: float) -> float:
    """Same odds factor for an average spurious study; always > 1."""
    try:
        return math.exp(_log_X_tilde(n, epsilon))
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class AnalyticParams:
    n: int
    epsilon: float
    K: int
    k: int
    r: float
    B_t: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        _check_eps(self.epsilon)
        if self.K < 0 or self.k < 0:
            raise ValueError("K and k must be non-negative")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must lie in [0, 1], got {self.r}")
        if not 0.0 <= self.B_t <= 1.0:
            raise ValueError(f"B_t must lie in [0, 1], got {self.B_t}")


def _log_pull(B_t: float, log_factor: float, exponent: float) -> float:
    """log of (B_t + (1 - B_t) * factor) ** -exponent, safe at B_t in {0, 1}."""
    if exponent == 0.0 or B_t == 1.0:
        return 0.0
    log_b = math.log(B_t) if B_t > 0.0 else -math.inf
    return -exponent * float(np.logaddexp(log_b, math.log1p(-B_t) + log_factor))


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def y_s(p: AnalyticParams) -> float:
    return _exp(_log_pull(p.B_t, _log_X(p.n, p.epsilon), p.r * p.k))


def y_p(p: AnalyticParams) -> float:
    if p.r == 0.0 or p.K == 0:
        return 1.0
    z = spurious_rate_z(p.n, p.epsilon, p.K)
    if z == 0.0:
        raise DegenerateSpuriousRate(f"P(x < n/2) underflows for n={p.n}, epsilon={p.epsilon}")
    return _exp(_log_pull(p.B_t, _log_X_tilde(p.n, p.epsilon), p.r * z))


def log_drift(p: AnalyticParams) -> float:
    """log(Y_S * Y_P), summed in log space so extreme pulls cannot overflow."""
    log_s = _log_pull(p.B_t, _log_X(p.n, p.epsilon), p.r * p.k)
    if p.r == 0.0 or p.K == 0:
        return log_s
    z = spurious_rate_z(p.n, p.epsilon, p.K)
    if z == 0.0:
        raise DegenerateSpuriousRate(f"P(x < n/2) underflows for n={p.n}, epsilon={p.epsilon}")
    return log_s + _log_pull(p.B_t, _log_X_tilde(p.n, p.epsilon), p.r * z)


def predict_drift(p: AnalyticParams) -> Drift:
    """Which side wins the round on average, from the sign of Y_S * Y_P - 1."""
    product = _exp(log_drift(p))
    if abs(product - 1.0) <= KNIFE_EDGE_TOL:
        return Drift.KNIFE_EDGE
    return Drift.SCIENTISTS_WIN if product > 1.0 else Drift.PROPAGANDIST_WINS


def fit_spurious_expectation(n_values: Iterable[int], epsilon: float) -> tuple[float, float]:
    """Least-squares line ``intercept + slope * n`` through the exact E[x | x < n/2]."""
    ns = sorted(set(int(n) for n in n_values))
    if len(ns) < 2:
        raise ValueError("a linear fit needs at least two distinct n values")
    ys = [spurious_expectation(n, epsilon) for n in ns]
    slope, intercept = np.polyfit(np.array(ns, dtype=float), np.array(ys), 1)
    return float(intercept), float(slope)


def expected_policy_posterior(
    n: int,
    epsilon: float,
    on_b: Sequence[bool],
    listens_to: Iterable[int],
    prior: float,
    selective_sharing: bool = True,
    dedup: bool = False,
) -> float:
    """Exact E[policy credence after one round] by enumerating every joint outcome.

    ``on_b[j]`` says whether scientist j tests arm B this round. Only those
    scientists' (n + 1)^m joint outcomes are enumerated; arm-A pulls carry no
    information. The propagandist, if present, forwards every result with
    fewer than n/2 successes.
    """
    _check_eps(epsilon)
    testers = [j for j, b in enumerate(on_b) if b]
    heard = set(listens_to)
    p = 0.5 + epsilon
    pmf = [math.comb(n, x) * p**x * (1 - p) ** (n - x) for x in range(n + 1)]
    ratio = p / (1 - p)
    prior_odds = prior / (1 - prior)
    total = []
    for outcome in itertools.product(range(n + 1), repeat=len(testers)):
        weight = math.prod(pmf[x] for x in outcome)
        exponent = 0
        for j, x in zip(testers, outcome):
            net = 2 * x - n
            if j in heard:
                exponent += net
            if selective_sharing and 2 * x < n and not (dedup and j in heard):
                exponent += net
        odds = prior_odds * ratio**exponent
        total.append(weight * odds / (1 + odds))
    return math.fsum(total)
