import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epinet.agents import (
    BiasedProduction,
    Journalist,
    NoCuration,
    PolicyMaker,
    SelectiveSharing,
    policy_update,
)
from epinet.analytic import expected_policy_posterior
from epinet.core import Credence, Favors, favors
from epinet.engine import (
    Consensus,
    SimConfig,
    Streams,
    init_run,
    run_batch,
    run_seed,
    run_simulation,
    sample_round_policy_credences,
    step_round,
)


def cfg(**kw):
    base = dict(K=6, network="complete", n=10, epsilon=0.05)
    base.update(kw)
    return SimConfig(**base)


class Forced:
    """Stand-in generator that returns fixed binomial draws."""

    def __init__(self, draws):
        self.draws = np.asarray(draws)

    def binomial(self, n, p, size=None):
        return self.draws.copy()


def streams(seed):
    return Streams.spawn(np.random.default_rng(seed))


class TestSimConfig:
    def test_defaults(self):
        c = cfg()
        assert c.k == c.K
        assert (c.certainty_threshold, c.max_rounds, c.reps, c.num_policy_makers) == (
            0.99, 1_000_000, 1000, 10,
        )
        assert c.dedup is False

    @pytest.mark.parametrize(
        "kw",
        [
            dict(k=7),
            dict(k=0),
            dict(K=2, network="cycle"),
            dict(epsilon=0.5),
            dict(epsilon=0.0),
            dict(certainty_threshold=1.0),
            dict(n=0),
            dict(initial_scientist_credences=(0.5,)),
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            cfg(**kw)

    def test_k_message(self):
        with pytest.raises(ValueError, match="k exceeds K"):
            cfg(K=20, k=25)


class TestInitRun:
    def test_initial_means(self):
        c = cfg(K=5, num_policy_makers=5)
        rng = np.random.default_rng(123)
        sci, pm = [], []
        for _ in range(10_000):
            st_ = init_run(c, rng)
            sci.append(st_.scientist_credences)
            pm.append(st_.policy_credences)
        sci, pm = np.concatenate(sci), np.concatenate(pm)
        assert abs(sci.mean() - 0.5) < 3 * math.sqrt(1 / 12 / sci.size)
        assert abs(pm.mean() - 0.25) < 3 * math.sqrt(0.25 / 12 / pm.size)
        assert pm.max() < 0.5 and pm.min() > 0.0

    def test_deterministic(self):
        a = init_run(cfg(k=3), np.random.default_rng(5))
        b = init_run(cfg(k=3), np.random.default_rng(5))
        assert np.array_equal(a.scientist_log_odds, b.scientist_log_odds)
        assert np.array_equal(a.policy_log_odds, b.policy_log_odds)
        assert np.array_equal(a.listeners, b.listeners)

    def test_listener_sizes(self):
        s = init_run(cfg(k=3), np.random.default_rng(0))
        assert (s.listeners.sum(axis=1) == 3).all()

    def test_journalist_has_no_listeners(self):
        s = init_run(cfg(curation=Journalist("fair")), np.random.default_rng(0))
        assert s.listeners.sum() == 0

    def test_override_immediate_consensus(self):
        c = cfg(initial_scientist_credences=(0.995,) * 6)
        out = run_simulation(c, np.random.default_rng(0))
        assert out.consensus is Consensus.TRUE_B and out.rounds_elapsed == 0


class TestStepRound:
    def test_pooled_update_example(self):
        c = cfg(K=3, n=2, initial_scientist_credences=(0.6,) * 3, num_policy_makers=1)
        s0 = init_run(c, np.random.default_rng(0))
        s1 = step_round(s0, c, Streams(Forced([2, 2, 0]), np.random.default_rng(0)))
        odds = 1.5 * (0.55 / 0.45) ** 2
        assert odds == pytest.approx(2.2407, abs=1e-4)
        np.testing.assert_allclose(s1.scientist_credences, odds / (1 + odds), rtol=1e-12)
        assert s1.scientist_credences[0] == pytest.approx(0.6914, abs=1e-4)
        assert s1.rounds == 1

    def test_all_a_round_is_inert(self):
        c = cfg(initial_scientist_credences=(0.2, 0.3, 0.4, 0.5, 0.1, 0.45),
                curation=SelectiveSharing())
        s0 = init_run(c, np.random.default_rng(0))
        s1 = step_round(s0, c, streams(1))
        assert not s1.on_b.any()
        np.testing.assert_array_equal(s1.scientist_log_odds, s0.scientist_log_odds)
        np.testing.assert_array_equal(s1.policy_log_odds, s0.policy_log_odds)
        assert s1.shared == ()

    def test_cycle_only_hears_neighbours(self):
        c = cfg(K=5, network="cycle", n=4, initial_scientist_credences=(0.6,) * 5)
        s0 = init_run(c, np.random.default_rng(0))
        s1 = step_round(s0, c, Streams(Forced([4, 0, 0, 0, 0]), np.random.default_rng(0)))
        L = c.effect.log_ratio
        base = s0.scientist_log_odds[0]
        # net successes are (+4, -4, -4, -4, -4); each lab sums itself and two neighbours
        want = base + L * np.array([-4, -4, -12, -12, -4])
        np.testing.assert_allclose(s1.scientist_log_odds, want, rtol=1e-12)

    def test_journalist_all_sees_every_result(self):
        c = cfg(curation=Journalist("all"), initial_scientist_credences=(0.6,) * 6)
        s0 = init_run(c, np.random.default_rng(0))
        s1 = step_round(s0, c, streams(2))
        results = s1.round_results(c.n)
        assert list(s1.shared) == results
        net = sum(r.net_successes for r in results)
        np.testing.assert_allclose(
            s1.policy_log_odds, s0.policy_log_odds + c.effect.log_ratio * net, rtol=1e-12
        )

    @pytest.mark.parametrize(
        "curation, dedup",
        [
            (NoCuration(), False),
            (SelectiveSharing(), False),
            (SelectiveSharing(), True),
            (BiasedProduction(30, 3), False),
            (Journalist("fair"), False),
            (Journalist("random"), False),
        ],
    )
    def test_matches_object_level_policy_update(self, curation, dedup):
        c = cfg(K=8, k=3, n=5, curation=curation, dedup=dedup, num_policy_makers=6)
        state = init_run(c, np.random.default_rng(7))
        s = streams(8)
        for _ in range(15):
            nxt = step_round(state, c, s)
            by_producer = {r.producer: r for r in nxt.round_results(c.n)}
            for i in range(c.num_policy_makers):
                heard = frozenset(int(j) for j in np.flatnonzero(state.listeners[i]))
                pm = PolicyMaker(i, Credence(state.policy_log_odds[i]), heard)
                want = policy_update(pm, by_producer, list(nxt.shared), dedup, c.effect)
                assert nxt.policy_log_odds[i] == pytest.approx(want.log_odds, abs=1e-9)
            state = nxt

    def test_selective_stream_only_favors_a(self):
        c = cfg(K=10, n=3, curation=SelectiveSharing(), reps=1)
        state = init_run(c, np.random.default_rng(3))
        s = streams(4)
        for _ in range(40):
            state = step_round(state, c, s)
            assert all(favors(r) is Favors.A for r in state.shared)

    @pytest.mark.parametrize(
        "curation", [NoCuration(), SelectiveSharing(), BiasedProduction(20, 2)]
    )
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_fast_loop_matches_step_round(self, curation, seed):
        c = cfg(K=7, network="cycle", n=3, k=4, curation=curation, dedup=seed == 1)
        out = run_simulation(c, np.random.default_rng(seed))

        init_rng, stream_rng = np.random.default_rng(seed).spawn(2)
        state = init_run(c, init_rng)
        s = Streams.spawn(stream_rng)
        while True:
            state = step_round(state, c, s)
            sci = state.scientist_credences
            if (sci >= c.certainty_threshold).all() or (sci <= 0.5).all():
                break
        assert out.rounds_elapsed == state.rounds
        assert out.final_scientist_credences == tuple(float(x) for x in sci)
        assert out.final_policy_credences == tuple(float(x) for x in state.policy_credences)


class TestRunSimulation:
    def test_all_a_is_false_consensus_after_one_round(self):
        c = cfg(initial_scientist_credences=(0.001,) * 6)
        out = run_simulation(c, np.random.default_rng(0))
        assert out.consensus is Consensus.FALSE_A and out.rounds_elapsed == 1

    def test_already_certain(self):
        c = cfg(initial_scientist_credences=(0.999,) * 6)
        assert run_simulation(c, np.random.default_rng(0)).rounds_elapsed == 0

    def test_easy_regime_finds_truth(self):
        c = SimConfig(K=10, network="complete", n=100, epsilon=0.2)
        outs = [run_simulation(c, np.random.default_rng(run_seed(99, i))) for i in range(200)]
        assert sum(o.consensus is Consensus.TRUE_B for o in outs) >= 190

    def test_censoring(self):
        c = cfg(K=20, network="cycle", n=1, epsilon=0.01, max_rounds=3)
        outs = [run_simulation(c, np.random.default_rng(i)) for i in range(20)]
        assert any(o.consensus is Consensus.CENSORED for o in outs)
        assert all(o.rounds_elapsed <= 3 for o in outs)

    @settings(max_examples=30, deadline=None)
    @given(
        st.integers(0, 2**32 - 1),
        st.sampled_from(["cycle", "complete"]),
        st.integers(3, 8),
        st.integers(1, 5),
    )
    def test_terminal_labels(self, seed, network, K, n):
        c = SimConfig(K=K, network=network, n=n, epsilon=0.1, max_rounds=5000)
        out = run_simulation(c, np.random.default_rng(seed))
        sci = np.array(out.final_scientist_credences)
        if out.consensus is Consensus.TRUE_B:
            assert (sci >= c.certainty_threshold).all()
        elif out.consensus is Consensus.FALSE_A:
            assert (sci <= 0.5).all()
        else:
            assert out.rounds_elapsed == c.max_rounds

    def test_curation_does_not_touch_science(self):
        outs = [
            run_simulation(cfg(k=2, curation=c), np.random.default_rng(4))
            for c in (NoCuration(), SelectiveSharing(), BiasedProduction(10, 1), Journalist("fair"))
        ]
        assert len({o.final_scientist_credences for o in outs}) == 1


class TestRunBatch:
    def test_zero_reps(self):
        s = run_batch(cfg(reps=0))
        assert s.runs_kept == 0 and s.runs_discarded == 0 and s.records == ()
        assert not s.guard_tripped

    def test_easy_regime(self):
        s = run_batch(SimConfig(K=10, network="complete", n=100, epsilon=0.2, reps=1000, seed=3))
        assert s.runs_kept == 1000
        assert s.discard_fraction < 0.05
        assert not s.guard_tripped

    def test_threads_do_not_change_summary(self):
        c = cfg(k=3, reps=12, seed=11, curation=SelectiveSharing())
        a, b = run_batch(c, threads=1), run_batch(c, threads=3)
        assert a == b

    def test_guard_reported(self):
        c = cfg(K=20, network="cycle", n=1, epsilon=0.01, max_rounds=2, reps=2)
        s = run_batch(c)
        assert s.guard_tripped
        assert s.runs_kept + s.runs_discarded == 40

    def test_evidence_alone_helps_policy_makers(self):
        s = run_batch(cfg(k=3, reps=200, seed=5))
        assert s.mean_policy_credence > 0.25

    def test_run_seeds_reproduce_runs(self):
        c = cfg(reps=4, seed=8)
        s = run_batch(c)
        for rec in s.records:
            assert run_simulation(c, np.random.default_rng(rec.seed)) == rec.outcome
            assert rec.seed == run_seed(8, rec.index)


class TestOneRoundSampler:
    @pytest.mark.parametrize("dedup", [False, True])
    def test_matches_enumeration(self, dedup):
        c = SimConfig(
            K=3, network="complete", n=3, epsilon=0.1, k=2, num_policy_makers=1,
            listener_pattern="shared_prefix", curation=SelectiveSharing(), dedup=dedup,
            initial_scientist_credences=(0.7, 0.4, 0.8), initial_policy_credences=(0.3,),
        )
        state = init_run(c, np.random.default_rng(0))
        x = sample_round_policy_credences(state, c, np.random.default_rng(1), 200_000)[:, 0]
        exact = expected_policy_posterior(3, 0.1, [True, False, True], {0, 1}, 0.3, True, dedup)
        assert abs(x.mean() - exact) < 4 * x.std() / math.sqrt(x.size)

    def test_agrees_with_step_round_distribution(self):
        c = cfg(K=4, n=2, k=2, num_policy_makers=1, curation=BiasedProduction(4, 2),
                initial_scientist_credences=(0.6, 0.6, 0.3, 0.7),
                initial_policy_credences=(0.2,))
        state = init_run(c, np.random.default_rng(0))
        fast = sample_round_policy_credences(state, c, np.random.default_rng(1), 50_000)[:, 0]
        s = streams(2)
        slow = np.array([step_round(state, c, s).policy_credences[0] for _ in range(5_000)])
        se = math.sqrt(fast.var() / fast.size + slow.var() / slow.size)
        assert abs(fast.mean() - slow.mean()) < 4 * se
