import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from anytime_pt.anytime import GammaMixtureTarget
from anytime_pt.diagnostics import density_distance, reference_on_grid
from anytime_pt.tempering import (ChainState, PairSchedule, TemperatureLadder, TemperedFamily,
                                  adjacent_pairs, apply_exchange, eligible_pairs,
                                  exchange_accept_prob, global_chain_label, rwm_local_move,
                                  tempered_log_density)

TARGET = GammaMixtureTarget(3.0, 0.15, 20.0, 0.25)
LADDER8 = TemperatureLadder.uniform(8, 0.5)


def test_uniform_ladder_has_cold_chain_last():
    assert LADDER8.exponents == tuple(lam / 8 for lam in range(1, 9))
    assert LADDER8.cold_label == 8 and LADDER8.exponent(8) == 1.0


def test_ladder_copies_repeat_temperatures():
    ladder = TemperatureLadder.uniform(2, 0.5, copies=2)
    assert ladder.exponents == (0.5, 0.5, 1.0, 1.0)


@pytest.mark.parametrize("exps", [(0.5, 0.25), (0.0, 1.0), (0.5, 1.5)])
def test_ladder_validation(exps):
    with pytest.raises(ValueError):
        TemperatureLadder(exps, (1.0, 1.0))


def test_tempered_density_cold_chain_is_target():
    assert tempered_log_density(LADDER8, 8, 2.0, TARGET.log_density) == TARGET.log_density(2.0)


def test_tempered_density_half_exponent_exponential():
    ladder = TemperatureLadder.uniform(4)
    assert tempered_log_density(ladder, 2, 3.0, lambda x: -x) == -1.5


def test_tempered_density_frozen_gamma_value():
    # oracle: log of the scipy mixture density at 2, divided by 8
    got = tempered_log_density(LADDER8, 1, 2.0, TARGET.log_density)
    assert got == pytest.approx(-0.8331268241995573, rel=1e-12)


def test_tempered_density_outside_support():
    assert tempered_log_density(LADDER8, 3, -1.0, TARGET.log_density) == -math.inf


def test_zero_step_is_always_accepted():
    class Zero:
        def standard_normal(self):
            return 0.0

        def random(self):
            return 0.999999

    out = rwm_local_move(ChainState(2.0, 8, 4), LADDER8, 0.5, Zero(), TARGET.log_density)
    assert out == ChainState(2.0, 8, 5)


def test_uniform_target_inside_support_always_accepts():
    ladder = TemperatureLadder.uniform(1)
    log_u = lambda x: 0.0 if 0 < x < 1 else -math.inf
    rng = np.random.default_rng(0)
    state = ChainState(0.5, 1)
    for _ in range(200):
        new = rwm_local_move(state, ladder, 0.01, rng, log_u)
        assert new.value != state.value
        state = new
    assert state.n == 200


def test_rwm_long_run_matches_target():
    rng = np.random.default_rng(4)
    family = TemperedFamily(TARGET.log_density, TemperatureLadder.uniform(1, 0.5))
    x, out = 1.0, np.empty(10**6)
    for n in range(out.size):
        x = family.local_move(0, x, rng)
        out[n] = x
    edges = np.arange(0, 15.25, 0.25)
    tv = density_distance(out[10**4:], edges, reference_on_grid(edges, TARGET.cdf))
    assert tv < 0.02


def test_exchange_same_state_or_same_temperature():
    assert exchange_accept_prob(LADDER8, 3, 4, 1.7, 1.7, TARGET.log_density) == 1.0
    ladder = TemperatureLadder((0.5, 0.5), (1.0, 1.0))
    assert exchange_accept_prob(ladder, 1, 2, 0.4, 6.0, TARGET.log_density) == 1.0


def test_exchange_frozen_gamma_value():
    # oracle: (pi(1)/pi(5))**(1/8) from the scipy mixture, capped at 1
    p = exchange_accept_prob(LADDER8, 7, 8, 1.0, 5.0, TARGET.log_density)
    assert p == pytest.approx(0.9238347657772451, rel=1e-10)


def test_exchange_both_densities_zero():
    assert exchange_accept_prob(LADDER8, 1, 2, -1.0, -2.0, TARGET.log_density) == 0.0


@settings(max_examples=100, deadline=None)
@given(x=st.floats(0.05, 12.0), y=st.floats(0.05, 12.0), lam=st.integers(1, 7))
def test_exchange_ratio_inverts_under_role_swap(x, y, lam):
    lam2 = lam + 1
    f = TARGET.log_density
    log_r = (LADDER8.exponent(lam) - LADDER8.exponent(lam2)) * (f(y) - f(x))
    forward = exchange_accept_prob(LADDER8, lam, lam2, x, y, f)
    backward = exchange_accept_prob(LADDER8, lam, lam2, y, x, f)
    assert forward == pytest.approx(min(1.0, math.exp(log_r)), rel=1e-9)
    assert backward == pytest.approx(min(1.0, math.exp(-log_r)), rel=1e-9)


def test_apply_exchange_accept_and_reject():
    a, b = ChainState(1.0, 1, 3), ChainState(2.0, 2, 7)
    assert apply_exchange((a, b), True) == (ChainState(2.0, 1, 4), ChainState(1.0, 2, 8))
    assert apply_exchange((a, b), False) == (ChainState(1.0, 1, 4), ChainState(2.0, 2, 8))


def test_apply_exchange_twice_restores_values():
    a, b = ChainState(1.0, 1), ChainState(2.0, 2)
    c, d = apply_exchange(apply_exchange((a, b), True), True)
    assert (c.value, d.value) == (1.0, 2.0)


def test_exchange_preserves_product_target_on_discrete_toy():
    """Refresh both chains exactly, then exchange; the product law must survive."""
    rng = np.random.default_rng(2024)
    weights = np.array([0.05, 0.1, 0.2, 0.4, 0.25])
    log_w = np.log(weights)
    ladder = TemperatureLadder((0.5, 1.0), (1.0, 1.0))
    f = lambda s: log_w[int(s)]
    marg = [weights ** b / np.sum(weights ** b) for b in ladder.exponents]
    accept = np.array([[exchange_accept_prob(ladder, 1, 2, s, t, f) for t in range(5)]
                       for s in range(5)])
    n = 10**6
    s = rng.choice(5, n, p=marg[0])
    t = rng.choice(5, n, p=marg[1])
    swap = rng.random(n) < accept[s, t]
    s2, t2 = np.where(swap, t, s), np.where(swap, s, t)
    observed = np.bincount(5 * s2 + t2, minlength=25)
    expected = n * np.outer(marg[0], marg[1]).ravel()
    assert stats.chisquare(observed, expected).pvalue > 0.01
    # an always-swap rule must fail the same test
    wrong = np.bincount(5 * t + s, minlength=25)
    assert stats.chisquare(wrong, expected).pvalue < 1e-6


def test_pair_schedule_alternates():
    sched = PairSchedule()
    assert [sched.next() for _ in range(4)] == ["odd", "even", "odd", "even"]


def test_adjacent_pairs_even_leaves_last_unpaired():
    assert adjacent_pairs(8, "even") == [(2, 3), (4, 5), (6, 7)]


@pytest.mark.parametrize("n, working, parity, expected", [
    (3, {1}, "odd", [(2, 3)]),
    (8, set(), "odd", [(1, 2), (3, 4), (5, 6), (7, 8)]),
    (8, {2}, "odd", [(1, 3), (4, 5), (6, 7)]),
    (2, {1}, "odd", []),
])
def test_eligible_pairs_examples(n, working, parity, expected):
    assert eligible_pairs(n, working, parity) == expected


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 30), data=st.data(), parity=st.sampled_from(["odd", "even"]))
def test_eligible_pairs_never_use_working_chains(n, data, parity):
    working = data.draw(st.sets(st.integers(1, n), max_size=n))
    pairs = eligible_pairs(n, working, parity)
    used = [c for p in pairs for c in p]
    assert not set(used) & working
    assert len(used) == len(set(used))
    assert all(a < b for a, b in pairs)


def test_eligible_pairs_rejects_bad_label():
    with pytest.raises(IndexError):
        eligible_pairs(3, {4}, "odd")


@pytest.mark.parametrize("w, k, K, expected", [(1, 1, 7, 1), (2, 3, 5, 8), (4, 5, 5, 20)])
def test_global_label_examples(w, k, K, expected):
    assert global_chain_label(w, k, K) == expected


@settings(max_examples=50, deadline=None)
@given(W=st.integers(1, 8), K=st.integers(1, 8))
def test_global_label_is_a_bijection(W, K):
    labels = [global_chain_label(w, k, K, W)
              for w, k in itertools.product(range(1, W + 1), range(1, K + 1))]
    assert sorted(labels) == list(range(1, W * K + 1))


def test_global_label_out_of_range():
    with pytest.raises(IndexError):
        global_chain_label(1, 6, 5)
    with pytest.raises(IndexError):
        global_chain_label(5, 1, 5, n_workers=4)


def test_family_cold_chains_are_exponent_one():
    family = TemperedFamily(TARGET.log_density, TemperatureLadder.uniform(4, 0.5, copies=2))
    assert family.cold_chains() == [6, 7]
