"""Evidence, credences and network structure for the two-armed bandit model.

Arm A is the well-understood action (success rate 0.5). Arm B succeeds with
probability 0.5 + epsilon in the world, and agents are unsure whether it is
0.5 + epsilon or 0.5 - epsilon. Credences are the probability that arm B is
the better one and are carried as log-odds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class Arm(str, enum.Enum):
    A = "A"
    B = "B"


class Favors(str, enum.Enum):
    A = "A"
    B = "B"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class EffectSize:
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon!r}")

    @property
    def p_good(self) -> float:
        return 0.5 + self.epsilon

    @property
    def p_bad(self) -> float:
        return 0.5 - self.epsilon

    @property
    def log_ratio(self) -> float:
        """ln((0.5 + eps) / (0.5 - eps)), the weight of one net success on arm B."""
        return math.log(self.p_good / self.p_bad)


def logit(p: float) -> float:
    if p == 0.0:
        return -math.inf
    if p == 1.0:
        return math.inf
    return math.log(p) - math.log1p(-p)


def expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@dataclass(frozen=True)
class Credence:
    """Probability that theory B is correct, stored as log-odds.

    Log-odds of -inf / +inf represent exact 0 / 1 and absorb any finite update.
    """

    log_odds: float

    @classmethod
    def from_probability(cls, p: float) -> "Credence":
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"credence must lie in [0, 1], got {p!r}")
        return cls(logit(p))

    @property
    def value(self) -> float:
        return expit(self.log_odds)

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class StudyResult:
    """One study: ``successes`` out of ``trials`` pulls of ``arm``.

    ``producer`` is the id of the scientist who ran the study, or None for
    studies run by a curation agent.
    """

    arm: Arm
    trials: int
    successes: int
    producer: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.successes <= self.trials:
            raise ValueError(
                f"successes must lie in [0, {self.trials}], got {self.successes}"
            )

    @property
    def net_successes(self) -> int:
        """2s - n; the exponent of the likelihood ratio."""
        return 2 * self.successes - self.trials


def log_likelihood_ratio(result: StudyResult, effect: EffectSize) -> float:
    if result.arm is Arm.A:
        return 0.0
    return result.net_successes * effect.log_ratio


def likelihood_ratio(result: StudyResult, effect: EffectSize) -> float:
    """P(result | arm B good) / P(result | arm B bad). Arm-A results give exactly 1."""
    if result.arm is Arm.A:
        return 1.0
    return (effect.p_good / effect.p_bad) ** result.net_successes


def update_credence(
    prior: Credence, results: Iterable[StudyResult], effect: EffectSize
) -> Credence:
    lo = prior.log_odds
    if math.isinf(lo):
        return prior
    # fsum keeps batch and sequential updates in agreement
    return Credence(math.fsum([lo] + [log_likelihood_ratio(r, effect) for r in results]))


def draw_study(
    arm: Arm,
    trials: int,
    effect: EffectSize,
    rng: np.random.Generator,
    producer: int | None = None,
) -> StudyResult:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    p = effect.p_good if arm is Arm.B else 0.5
    return StudyResult(arm, trials, int(rng.binomial(trials, p)), producer)


def favors(result: StudyResult) -> Favors:
    if result.arm is Arm.A:
        return Favors.NEUTRAL
    d = result.net_successes
    if d < 0:
        return Favors.A
    if d > 0:
        return Favors.B
    return Favors.NEUTRAL


class NetworkKind(str, enum.Enum):
    CYCLE = "cycle"
    COMPLETE = "complete"


@dataclass(frozen=True)
class NetworkTopology:
    kind: NetworkKind
    num_scientists: int
    edges: frozenset[frozenset[int]]

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for e in self.edges if i in e for j in e if j != i)

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def adjacency_matrix(self) -> np.ndarray:
        K = self.num_scientists
        adj = np.zeros((K, K), dtype=bool)
        for e in self.edges:
            i, j = tuple(e)
            adj[i, j] = adj[j, i] = True
        return adj


MIN_SCIENTISTS = {NetworkKind.CYCLE: 3, NetworkKind.COMPLETE: 2}


def build_network(kind: NetworkKind | str, K: int) -> NetworkTopology:
    """Ring or complete graph over scientists ``0..K-1``.

    Cycles need K >= 3. A complete network of two scientists (a single edge)
    is allowed so community-budget splits down to two labs can be simulated.
    """
    kind = NetworkKind(kind)
    if K < MIN_SCIENTISTS[kind]:
        raise ValueError(f"{kind.value} network needs K >= {MIN_SCIENTISTS[kind]}, got {K}")
    if kind is NetworkKind.CYCLE:
        edges = {frozenset((i, (i + 1) % K)) for i in range(K)}
    else:
        edges = {frozenset((i, j)) for i in range(K) for j in range(i + 1, K)}
    return NetworkTopology(kind, K, frozenset(edges))
