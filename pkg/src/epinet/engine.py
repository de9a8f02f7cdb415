"""Round loop, stopping rules and seeded batches of runs."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .agents import (
    BiasedProduction,
    Curation,
    Journalist,
    JournalistMemory,
    ListenerPattern,
    NoCuration,
    SelectiveSharing,
    assign_listeners,
    biased_production_round,
    journalist_share,
    published_spurious,
)
from .core import Arm, EffectSize, NetworkKind, StudyResult, build_network, logit


@dataclass(frozen=True)
class SimConfig:
    K: int
    network: NetworkKind
    n: int
    epsilon: float
    k: int | None = None  # None: listen to every scientist
    num_policy_makers: int = 10
    listener_pattern: ListenerPattern = ListenerPattern.RANDOM_DISTINCT
    curation: Curation = field(default_factory=NoCuration)
    dedup: bool = False
    certainty_threshold: float = 0.99
    max_rounds: int = 1_000_000
    reps: int = 1000
    seed: int = 0
    # test hooks
    initial_scientist_credences: tuple[float, ...] | None = None
    initial_policy_credences: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "network", NetworkKind(self.network))
        object.__setattr__(self, "listener_pattern", ListenerPattern(self.listener_pattern))
        if self.k is None:
            object.__setattr__(self, "k", self.K)
        build_network(self.network, self.K)  # raises on too-small K
        EffectSize(self.epsilon)
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.k > self.K:
            raise ValueError(f"k exceeds K ({self.k} > {self.K})")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.num_policy_makers < 1:
            raise ValueError("num_policy_makers must be >= 1")
        if not 0.0 < self.certainty_threshold < 1.0:
            raise ValueError("certainty_threshold must lie in (0, 1)")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.reps < 0:
            raise ValueError("reps must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        sci = self.initial_scientist_credences
        if sci is not None:
            if len(sci) != self.K or not all(0.0 <= c <= 1.0 for c in sci):
                raise ValueError("initial_scientist_credences needs K values in [0, 1]")
        pm = self.initial_policy_credences
        if pm is not None:
            if len(pm) != self.num_policy_makers or not all(0.0 <= c <= 1.0 for c in pm):
                raise ValueError(
                    "initial_policy_credences needs num_policy_makers values in [0, 1]"
                )

    @property
    def effect(self) -> EffectSize:
        return EffectSize(self.epsilon)


class Consensus(str, enum.Enum):
    TRUE_B = "true_B"
    FALSE_A = "false_A"
    CENSORED = "censored"


@dataclass(frozen=True)
class Streams:
    """Independent generators for scientists' draws and the curation agent.

    Keeping them apart means the scientific trajectory of a seeded run does not
    depend on which curation agent is present.
    """

    science: np.random.Generator
    curation: np.random.Generator

    @classmethod
    def spawn(cls, rng: np.random.Generator) -> "Streams":
        science, curation = rng.spawn(2)
        return cls(science, curation)


@dataclass
class RoundState:
    scientist_log_odds: np.ndarray
    policy_log_odds: np.ndarray
    listeners: np.ndarray  # (policy makers, scientists) 0/1
    memory: JournalistMemory = field(default_factory=JournalistMemory)
    rounds: int = 0
    # the most recent round, for inspection
    on_b: np.ndarray | None = None
    successes: np.ndarray | None = None
    shared: tuple[StudyResult, ...] = ()

    @property
    def scientist_credences(self) -> np.ndarray:
        return _expit(self.scientist_log_odds)

    @property
    def policy_credences(self) -> np.ndarray:
        return _expit(self.policy_log_odds)

    def round_results(self, n: int) -> list[StudyResult]:
        """Arm-B results of the last round, tagged with their producer."""
        if self.on_b is None:
            return []
        return [
            StudyResult(Arm.B, n, int(self.successes[j]), j)
            for j in np.flatnonzero(self.on_b)
        ]


@dataclass(frozen=True)
class RunOutcome:
    consensus: Consensus
    rounds_elapsed: int
    final_scientist_credences: tuple[float, ...]
    final_policy_credences: tuple[float, ...]

    @property
    def mean_policy_credence(self) -> float:
        return math.fsum(self.final_policy_credences) / len(self.final_policy_credences)

    @property
    def mean_scientist_credence(self) -> float:
        return math.fsum(self.final_scientist_credences) / len(self.final_scientist_credences)


def _expit(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def _logit(p) -> np.ndarray:
    return np.array([logit(float(v)) for v in p], dtype=float)


@lru_cache(maxsize=64)
def _closed_neighbourhood(kind: NetworkKind, K: int) -> np.ndarray:
    adj = build_network(kind, K).adjacency_matrix()
    closed = adj.astype(np.int64) + np.eye(K, dtype=np.int64)
    closed.setflags(write=False)
    return closed


def init_run(config: SimConfig, rng: np.random.Generator) -> RoundState:
    """Scientists ~ U(0, 1), policy makers ~ U(0, 0.5), then listener assignment."""
    sci_rng, pm_rng, listen_rng = rng.spawn(3)
    K, P = config.K, config.num_policy_makers
    if config.initial_scientist_credences is not None:
        sci = _logit(config.initial_scientist_credences)
    else:
        sci = _logit(sci_rng.uniform(0.0, 1.0, size=K))
    if config.initial_policy_credences is not None:
        pm = _logit(config.initial_policy_credences)
    else:
        pm = _logit(pm_rng.uniform(0.0, 0.5, size=P))
    listeners = np.zeros((P, K), dtype=np.int64)
    if not isinstance(config.curation, Journalist):
        for i, heard in assign_listeners(K, config.k, config.listener_pattern, P, listen_rng).items():
            listeners[i, sorted(heard)] = 1
    return RoundState(sci, pm, listeners)


def _draw(config: SimConfig, log_odds: np.ndarray, rng: np.random.Generator, size=None):
    on_b = log_odds > 0
    p = np.where(on_b, config.epsilon + 0.5, 0.5)
    shape = p.shape if size is None else (size,) + p.shape
    s = rng.binomial(config.n, p, size=shape)
    d = np.where(on_b, 2 * s - config.n, 0)
    return on_b, s, d


def _policy_evidence(config: SimConfig, listeners, on_b, d, curation_rng):
    """Net successes each policy maker updates on, from listening plus curation.

    ``d`` may carry a leading sample axis. Journalist modes are handled by the
    caller because they return concrete results and touch memory.
    """
    cur = config.curation
    heard = d @ listeners.T
    if isinstance(cur, SelectiveSharing):
        spurious = np.where(d < 0, d, 0)
        if config.dedup:
            return heard + spurious @ (1 - listeners).T
        return heard + spurious.sum(axis=-1, keepdims=True)
    if isinstance(cur, BiasedProduction):
        size = d.shape[:-1]
        if size:
            draws = curation_rng.binomial(
                cur.study_size, config.epsilon + 0.5, size=size + (cur.num_studies,)
            )
            net = np.where(2 * draws < cur.study_size, 2 * draws - cur.study_size, 0)
            return heard + net.sum(axis=-1, keepdims=True)
        pub = published_spurious(cur, config.effect, curation_rng)
        return heard + int((2 * pub - cur.study_size).sum())
    return heard


def step_round(state: RoundState, config: SimConfig, streams: Streams) -> RoundState:
    """One synchronous round.

    Actions are chosen from pre-round credences; every update in the round
    reads the same snapshot of results.
    """
    L = config.effect.log_ratio
    on_b, s, d = _draw(config, state.scientist_log_odds, streams.science)
    closed = _closed_neighbourhood(config.network, config.K)
    sci = state.scientist_log_odds + L * (closed @ d)

    memory = state.memory
    if isinstance(config.curation, Journalist):
        results = [StudyResult(Arm.B, config.n, int(s[j]), int(j)) for j in np.flatnonzero(on_b)]
        shared, memory = journalist_share(
            config.curation.mode, results, memory, streams.curation
        )
        net = sum(r.net_successes for r in shared)
        pm = state.policy_log_odds + L * net
    elif isinstance(config.curation, BiasedProduction):
        shared = biased_production_round(config.curation, config.effect, streams.curation)
        net = sum(r.net_successes for r in shared)
        pm = state.policy_log_odds + L * (state.listeners @ d + net)
    else:
        shared = ()
        if isinstance(config.curation, SelectiveSharing):
            shared = tuple(
                StudyResult(Arm.B, config.n, int(s[j]), int(j))
                for j in np.flatnonzero(d < 0)
            )
        evidence = _policy_evidence(config, state.listeners, on_b, d, streams.curation)
        pm = state.policy_log_odds + L * evidence
    return replace(
        state,
        scientist_log_odds=sci,
        policy_log_odds=pm,
        memory=memory,
        rounds=state.rounds + 1,
        on_b=on_b,
        successes=s,
        shared=tuple(shared),
    )


def _terminal(config: SimConfig, log_odds: np.ndarray) -> Consensus | None:
    if np.all(_expit(log_odds) >= config.certainty_threshold):
        return Consensus.TRUE_B
    if np.all(log_odds <= 0):
        return Consensus.FALSE_A
    return None


def _advance(state: RoundState, config: SimConfig, streams: Streams) -> RoundState:
    """Fast path of repeated ``step_round`` for curation modes without memory.

    Draws from the same streams in the same order as ``step_round``, so both
    produce identical trajectories.
    """
    L = config.effect.log_ratio
    closed = _closed_neighbourhood(config.network, config.K)
    thresh = logit(config.certainty_threshold)
    sci, pm = state.scientist_log_odds, state.policy_log_odds
    listeners = state.listeners
    rounds = state.rounds
    on_b = s = None
    while rounds < config.max_rounds:
        on_b, s, d = _draw(config, sci, streams.science)
        sci = sci + L * (closed @ d)
        pm = pm + L * _policy_evidence(config, listeners, on_b, d, streams.curation)
        rounds += 1
        # cheap pre-check in log-odds space; _terminal confirms exactly
        if (sci.min() >= thresh - 1e-9 or sci.max() <= 0) and _terminal(config, sci):
            break
    return replace(
        state, scientist_log_odds=sci, policy_log_odds=pm, rounds=rounds, on_b=on_b, successes=s
    )


def _outcome(label: Consensus, state: RoundState) -> RunOutcome:
    return RunOutcome(
        label,
        state.rounds,
        tuple(float(c) for c in state.scientist_credences),
        tuple(float(c) for c in state.policy_credences),
    )


def run_simulation(config: SimConfig, rng: np.random.Generator) -> RunOutcome:
    """Iterate rounds until true consensus, false consensus or ``max_rounds``.

    Only true consensus is tested before the first round: an all-A community
    is recognised after one (empty) round.
    """
    init_rng, stream_rng = rng.spawn(2)
    state = init_run(config, init_rng)
    streams = Streams.spawn(stream_rng)
    if _terminal(config, state.scientist_log_odds) is Consensus.TRUE_B:
        return _outcome(Consensus.TRUE_B, state)
    if isinstance(config.curation, Journalist):
        while state.rounds < config.max_rounds:
            state = step_round(state, config, streams)
            label = _terminal(config, state.scientist_log_odds)
            if label is not None:
                return _outcome(label, state)
    else:
        state = _advance(state, config, streams)
        label = _terminal(config, state.scientist_log_odds)
        if label is not None:
            return _outcome(label, state)
    return _outcome(Consensus.CENSORED, state)


def sample_round_policy_credences(
    state: RoundState, config: SimConfig, rng: np.random.Generator, samples: int
) -> np.ndarray:
    """Policy credences after one round from ``state``, for ``samples`` independent rounds.

    Returns an array of shape (samples, policy makers). Journalist modes other
    than ``all`` keep per-round memory or sample results and are not supported.
    """
    cur = config.curation
    if isinstance(cur, Journalist) and cur.mode.value != "all":
        raise NotImplementedError("only the 'all' journalist is memoryless")
    science, curation = rng.spawn(2)
    on_b, s, d = _draw(config, state.scientist_log_odds, science, size=samples)
    if isinstance(cur, Journalist):
        evidence = d.sum(axis=-1, keepdims=True)
    else:
        evidence = _policy_evidence(config, state.listeners, on_b, d, curation)
    return _expit(state.policy_log_odds + config.effect.log_ratio * evidence)


def run_seed(seed: int, index: int) -> int:
    """Seed of run ``index`` in a batch, derived from the batch seed alone."""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RunRecord:
    index: int
    seed: int
    outcome: RunOutcome


@dataclass(frozen=True)
class BatchSummary:
    config: SimConfig
    runs_kept: int
    runs_false_a: int
    runs_censored: int
    mean_policy_credence: float
    stderr: float
    mean_rounds: float
    guard_tripped: bool
    discarded_mean_policy_credence: float
    records: tuple[RunRecord, ...] = ()

    @property
    def runs_discarded(self) -> int:
        return self.runs_false_a + self.runs_censored

    @property
    def discard_fraction(self) -> float:
        total = self.runs_kept + self.runs_discarded
        return self.runs_discarded / total if total else 0.0

    def kept_policy_credences(self) -> np.ndarray:
        return np.array(
            [r.outcome.mean_policy_credence for r in self.records
             if r.outcome.consensus is Consensus.TRUE_B]
        )


def _run_indexed(args: tuple[SimConfig, int]) -> RunRecord:
    config, index = args
    seed = run_seed(config.seed, index)
    return RunRecord(index, seed, run_simulation(config, np.random.default_rng(seed)))


def _mean_and_stderr(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    a = np.array(values)
    if len(a) < 2:
        return float(a.mean()), math.nan
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(len(a)))


ATTEMPT_GUARD = 20


def run_batch(config: SimConfig, threads: int = 1) -> BatchSummary:
    """Run seeded simulations until ``config.reps`` true-consensus runs are kept.

    Runs are numbered 0, 1, 2, ... and run ``i`` is seeded from
    ``run_seed(config.seed, i)``. The summary depends only on the runs up to the
    last kept one, so it is the same for any ``threads``.
    """
    guard = ATTEMPT_GUARD * config.reps
    records: list[RunRecord] = []
    kept = 0
    next_index = 0
    chunk = 8 * max(1, threads)
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        while kept < config.reps and next_index < guard:
            stop = min(next_index + chunk, guard)
            jobs = [(config, i) for i in range(next_index, stop)]
            done = pool.map(_run_indexed, jobs) if pool else map(_run_indexed, jobs)
            for rec in done:
                if kept >= config.reps:
                    break
                records.append(rec)
                kept += rec.outcome.consensus is Consensus.TRUE_B
            next_index = stop
    finally:
        if pool is not None:
            pool.shutdown()

    kept_vals = [r.outcome.mean_policy_credence for r in records
                 if r.outcome.consensus is Consensus.TRUE_B]
    dropped_vals = [r.outcome.mean_policy_credence for r in records
                    if r.outcome.consensus is not Consensus.TRUE_B]
    mean, se = _mean_and_stderr(kept_vals)
    rounds = [r.outcome.rounds_elapsed for r in records if r.outcome.consensus is Consensus.TRUE_B]
    return BatchSummary(
        config=config,
        runs_kept=kept,
        runs_false_a=sum(r.outcome.consensus is Consensus.FALSE_A for r in records),
        runs_censored=sum(r.outcome.consensus is Consensus.CENSORED for r in records),
        mean_policy_credence=mean,
        stderr=se,
        mean_rounds=float(np.mean(rounds)) if rounds else math.nan,
        guard_tripped=kept < config.reps,
        discarded_mean_policy_credence=_mean_and_stderr(dropped_vals)[0],
        records=tuple(records),
    )
