import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinmarket.errors import InvalidMagnitude
from twinmarket.replicate import (
    Claim,
    PredictableMagnitudes,
    check_crr_completeness,
    martingale_prob,
    price,
    replicate,
    sign_paths,
    terminal_prices,
    verify_replication,
)


def brute_price(payoff, a, s0, path_mode=False):
    """Average of the payoff over every sign path, one path at a time."""
    total = []
    for idx, signs in enumerate(itertools.product((-1, 1), repeat=len(a))):
        s = s0
        for z, ak in zip(signs, a):
            s *= 1 + z * ak
        total.append(payoff(idx) if path_mode else payoff(s))
    return math.fsum(total) / len(total)


def mags(a, s=0):
    return PredictableMagnitudes(s, s + len(a), np.asarray(a, dtype=float))


class TestMagnitudes:
    def test_validate(self):
        with pytest.raises(InvalidMagnitude):
            mags([0.1, 0.0]).validate()
        with pytest.raises(InvalidMagnitude):
            mags([1.2]).validate()

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            PredictableMagnitudes(0, 3, np.array([0.1]))

    def test_from_mapping(self):
        m = PredictableMagnitudes.from_mapping(-2, 0, {-1: 0.1, 0: 0.2})
        assert m.times.tolist() == [-1, 0]
        assert m.depth == 2


class TestMartingaleProb:
    def test_constant(self):
        assert martingale_prob(mags([0.1] * 4)) == {1: 0.5, 2: 0.5, 3: 0.5, 4: 0.5}

    def test_varying(self):
        assert set(martingale_prob(mags([0.01, 0.3, 0.9])).values()) == {0.5}

    def test_zero(self):
        with pytest.raises(InvalidMagnitude):
            martingale_prob(mags([0.0]))


class TestSignPaths:
    def test_order(self):
        p = sign_paths(2)
        assert p.tolist() == [[-1, -1], [-1, 1], [1, -1], [1, 1]]

    def test_terminal_prices(self):
        np.testing.assert_allclose(terminal_prices(mags([0.1, 0.1]), 100.0), [81, 99, 99, 121])


class TestPrice:
    def test_one_step_call(self):
        assert price(Claim.call(100), mags([0.1]), 100.0) == pytest.approx(5.0, rel=1e-15)

    def test_two_step_call(self):
        assert price(Claim.call(100), mags([0.1, 0.1]), 100.0) == pytest.approx(5.25, rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(
        a=st.lists(st.floats(0.001, 0.999), min_size=1, max_size=10),
        s0=st.floats(0.1, 1e4),
    )
    def test_forward(self, a, s0):
        assert price(Claim.forward(), mags(a), s0) == pytest.approx(s0, rel=1e-12)

    @pytest.mark.parametrize("depth", range(1, 13))
    def test_matches_brute_force(self, depth):
        rng = np.random.default_rng(depth)
        a = rng.uniform(0.005, 0.5, depth)
        k = 100 * (1 + rng.normal(0, 0.1))
        for claim, f in [
            (Claim.call(k), lambda s: max(s - k, 0.0)),
            (Claim.put(k), lambda s: max(k - s, 0.0)),
        ]:
            assert price(claim, mags(a), 100.0) == pytest.approx(brute_price(f, a, 100.0), rel=1e-12)
        table = rng.normal(size=2**depth)
        expect = brute_price(lambda i: table[i], a, 100.0, path_mode=True)
        assert price(Claim.table(table), mags(a), 100.0) == pytest.approx(expect, rel=1e-12, abs=1e-14)

    def test_linearity(self):
        rng = np.random.default_rng(7)
        m = mags(rng.uniform(0.01, 0.4, 8))
        t1, t2 = rng.normal(size=256), rng.normal(size=256)
        lhs = price(Claim.table(2.5 * t1 - 1.5 * t2), m, 50.0)
        rhs = 2.5 * price(Claim.table(t1), m, 50.0) - 1.5 * price(Claim.table(t2), m, 50.0)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-13)

    def test_depth_cap(self):
        with pytest.raises(ValueError):
            price(Claim.forward(), mags([0.1] * 5), 1.0, max_depth=4)

    def test_table_size_checked(self):
        with pytest.raises(ValueError):
            price(Claim.table([1.0, 2.0, 3.0]), mags([0.1]), 1.0)

    def test_empty_horizon(self):
        assert price(Claim.call(90), PredictableMagnitudes(3, 3, np.array([])), 100.0) == 10.0


class TestReplicate:
    def test_one_step(self):
        plan = replicate(Claim.call(100), mags([0.1]), 100.0)
        x, beta, gamma = plan.node(0, 0)
        assert x == pytest.approx(5.0)
        assert gamma == pytest.approx(0.5)
        assert beta == pytest.approx(-45.0)

    def test_two_step_up_node(self):
        plan = replicate(Claim.call(100), mags([0.1, 0.1]), 100.0)
        x_up, _, _ = plan.node(1, 1)
        assert x_up == pytest.approx(10.5)
        assert plan.node(0, 0)[2] == pytest.approx(0.525)

    def test_constant_claim(self):
        m = mags([0.1, 0.2, 0.05])
        plan = replicate(Claim.constant(3.0), m, 100.0, rho=1.02)
        for (t, p), (x, beta, gamma) in plan.nodes.items():
            assert gamma == pytest.approx(0.0, abs=1e-12)
            assert x == pytest.approx(3.0 * 1.02**t, rel=1e-12)
            assert beta * plan.bond[t] == pytest.approx(x, rel=1e-12)
        assert verify_replication(plan, Claim.constant(3.0), m, 100.0, rho=1.02) <= 1e-12

    def test_self_financing_at_every_node(self):
        rng = np.random.default_rng(3)
        m = mags(rng.uniform(0.01, 0.5, 6))
        claim = Claim.table(rng.normal(size=64))
        plan = replicate(claim, m, 80.0, bond_base=1.3, rho=1.05)
        for k in range(m.depth):
            b0, b1 = plan.bond[k], plan.bond[k + 1]
            for p in range(2**k):
                x, beta, gamma = plan.node(k, p)
                for child in (2 * p, 2 * p + 1):
                    dx = plan.wealth[k + 1][child] - x
                    ds = plan.stock[k + 1][child] - plan.stock[k][p]
                    assert dx == pytest.approx(beta * (b1 - b0) + gamma * ds, abs=1e-10)

    def test_rho_invariance(self):
        m = mags([0.1, 0.3, 0.2])
        claim = Claim.call(95)
        base = replicate(claim, m, 100.0)
        for rho, bb in [(1.05, 1.0), (1.1, 2.0)]:
            plan = replicate(claim, m, 100.0, bond_base=bb, rho=rho)
            assert plan.initial_wealth == pytest.approx(base.initial_wealth, rel=1e-13)
            assert plan.wealth[-1] == pytest.approx(base.wealth[-1] * rho**3, rel=1e-13)

    def test_perturbed_hedge_detected(self):
        m = mags([0.1, 0.1])
        claim = Claim.call(100)
        plan = replicate(claim, m, 100.0)
        bad = plan.with_gamma(1, 1, plan.node(1, 1)[2] + 1e-3)
        assert verify_replication(plan, claim, m, 100.0) <= 1e-12
        assert verify_replication(bad, claim, m, 100.0) >= 1e-5

    def test_invalid_magnitude(self):
        with pytest.raises(InvalidMagnitude):
            replicate(Claim.call(1), mags([0.1, 1.0]), 1.0)

    def test_node_bounds(self):
        plan = replicate(Claim.call(100), mags([0.1]), 100.0)
        with pytest.raises(KeyError):
            plan.node(1, 0)
        with pytest.raises(KeyError):
            plan.node(0, 1)

    @pytest.mark.parametrize("depth", [1, 4, 9])
    def test_random_claims(self, depth):
        rng = np.random.default_rng(100 + depth)
        for _ in range(20):
            m = mags(rng.uniform(0.005, 0.9, depth))
            table = rng.normal(scale=10, size=2**depth)
            claim = Claim.table(table)
            plan = replicate(claim, m, 100.0, rho=1.01)
            res = verify_replication(plan, claim, m, 100.0, rho=1.01)
            assert res <= 1e-9 * (1 + np.max(np.abs(table)))


class TestCompleteness:
    def test_pass(self):
        assert check_crr_completeness(mags([0.1, 0.5]))

    def test_fail_at(self):
        v = check_crr_completeness(mags([0.1, 1.2, 0.3], s=-3))
        assert not v
        assert v.first_violation == (-1, 1.2)

    def test_empty(self):
        assert check_crr_completeness(PredictableMagnitudes(0, 0, np.array([]))).passed
