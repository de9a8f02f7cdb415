"""Agent behaviours: scientists' action choice, policy makers, propagandists, journalists."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .core import (
    Arm,
    Credence,
    EffectSize,
    Favors,
    StudyResult,
    favors,
    update_credence,
)


class ListenerPattern(str, enum.Enum):
    RANDOM_DISTINCT = "random_distinct"
    SHARED_PREFIX = "shared_prefix"


class JournalistMode(str, enum.Enum):
    FAIR = "fair"
    RANDOM = "random"
    ALL = "all"


@dataclass(frozen=True)
class NoCuration:
    name = "none"


@dataclass(frozen=True)
class SelectiveSharing:
    name = "selective_sharing"


@dataclass(frozen=True)
class BiasedProduction:
    """Propagandist with ``resources`` pulls per round, run as studies of ``study_size``."""

    resources: int
    study_size: int
    name = "biased_production"

    def __post_init__(self):
        if not 1 <= self.study_size <= self.resources:
            raise ValueError(
                f"biased production needs 1 <= study_size <= resources, "
                f"got study_size={self.study_size}, resources={self.resources}"
            )

    @property
    def num_studies(self) -> int:
        return self.resources // self.study_size


@dataclass(frozen=True)
class Journalist:
    mode: JournalistMode
    name = "journalist"

    def __post_init__(self):
        object.__setattr__(self, "mode", JournalistMode(self.mode))


Curation = Union[NoCuration, SelectiveSharing, BiasedProduction, Journalist]


@dataclass
class Scientist:
    id: int
    credence: Credence


@dataclass
class PolicyMaker:
    id: int
    credence: Credence
    listens_to: frozenset[int] = field(default_factory=frozenset)


@dataclass(frozen=True)
class JournalistMemory:
    """Most recent result the fair journalist reported for each side."""

    last_A: StudyResult | None = None
    last_B: StudyResult | None = None

    def __post_init__(self):
        if self.last_A is not None and favors(self.last_A) is not Favors.A:
            raise ValueError("last_A must favor A")
        if self.last_B is not None and favors(self.last_B) is not Favors.B:
            raise ValueError("last_B must favor B")


def select_action(credence: Credence | float) -> Arm:
    """Arm B only for credence strictly above one half; ties stay with A."""
    if isinstance(credence, Credence):
        return Arm.B if credence.log_odds > 0 else Arm.A
    return Arm.B if credence > 0.5 else Arm.A


def selective_share(round_results: Sequence[StudyResult]) -> list[StudyResult]:
    return [r for r in round_results if favors(r) is Favors.A]


def published_spurious(
    mode: BiasedProduction, effect: EffectSize, rng: np.random.Generator
) -> np.ndarray:
    """Success counts of the propagandist studies that get published this round.

    Leftover pulls (resources mod study_size) are not used.
    """
    s = rng.binomial(mode.study_size, effect.p_good, size=mode.num_studies)
    return s[2 * s < mode.study_size]


def biased_production_round(
    mode: BiasedProduction, effect: EffectSize, rng: np.random.Generator
) -> list[StudyResult]:
    return [
        StudyResult(Arm.B, mode.study_size, int(s))
        for s in published_spurious(mode, effect, rng)
    ]


def journalist_share(
    mode: JournalistMode | str,
    round_results: Sequence[StudyResult],
    memory: JournalistMemory,
    rng: np.random.Generator,
) -> tuple[list[StudyResult], JournalistMemory]:
    mode = JournalistMode(mode)
    results = [r for r in round_results if r.arm is Arm.B]
    if mode is JournalistMode.ALL:
        return results, memory
    if mode is JournalistMode.RANDOM:
        if len(results) <= 2:
            return results, memory
        picks = rng.choice(len(results), size=2, replace=False)
        return [results[i] for i in picks], memory

    for_a = [r for r in results if favors(r) is Favors.A]
    for_b = [r for r in results if favors(r) is Favors.B]
    pick_a = for_a[rng.integers(len(for_a))] if for_a else memory.last_A
    pick_b = for_b[rng.integers(len(for_b))] if for_b else memory.last_B
    shared = [r for r in (pick_a, pick_b) if r is not None]
    return shared, JournalistMemory(pick_a, pick_b)


def assign_listeners(
    K: int,
    k: int,
    pattern: ListenerPattern | str,
    num_policy_makers: int,
    rng: np.random.Generator,
) -> dict[int, frozenset[int]]:
    if not 1 <= k <= K:
        raise ValueError(f"k must lie in [1, K={K}], got {k}")
    pattern = ListenerPattern(pattern)
    if pattern is ListenerPattern.SHARED_PREFIX:
        return {i: frozenset(range(k)) for i in range(num_policy_makers)}
    return {
        i: frozenset(int(j) for j in rng.choice(K, size=k, replace=False))
        for i in range(num_policy_makers)
    }


def policy_update(
    pm: PolicyMaker,
    scientist_results: Mapping[int, StudyResult],
    curated: Sequence[StudyResult],
    dedup: bool,
    effect: EffectSize,
) -> Credence:
    """Posterior of one policy maker after a round.

    Evidence is the results of the scientists ``pm`` listens to plus everything
    curated. With ``dedup`` a curated result already heard from its producer is
    counted once; without it, it is counted twice. Journalist-fed policy makers
    have an empty ``listens_to`` and so see only the curated results.
    """
    heard = [scientist_results[j] for j in sorted(pm.listens_to) if j in scientist_results]
    if dedup:
        heard_from = {j for j in pm.listens_to if j in scientist_results}
        curated = [r for r in curated if r.producer is None or r.producer not in heard_from]
    return update_credence(pm.credence, list(heard) + list(curated), effect)
