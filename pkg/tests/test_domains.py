import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxtd.domains import DOMAINS, BatteryConfig, battery_transition, build_domain
from proxtd.domains.baird import DASHED, SOLID
from proxtd.domains.battery import (
    BatteryGrid,
    degradation,
    hinge_features,
    price_step,
    price_transition_matrix,
    reward,
)
from proxtd.errors import ActionOutOfBounds, GridInfeasible
from proxtd.mdp import importance_weight, make_rng, true_values

CFG = BatteryConfig()


# ---------------------------------------------------------------- registry


def test_build_domain_registry():
    assert DOMAINS == ("baird", "chain50", "battery")
    with pytest.raises(ValueError):
        build_domain("mountain_car")
    assert build_domain("chain50", bebf_count=5).Phi.shape == (50, 5)


# ---------------------------------------------------------------- star


def test_baird_values_and_weights(problems):
    dom = problems["baird"].domain
    assert not dom.on_policy
    np.testing.assert_array_equal(true_values(dom.mdp, dom.target), np.zeros(7))
    np.testing.assert_array_equal(problems["baird"].exact.b, np.zeros(8))
    rho = [importance_weight(dom.target, dom.behavior, s, a) for s in range(7) for a in (DASHED, SOLID)]
    assert max(rho) == pytest.approx(7.0)
    assert all(importance_weight(dom.target, dom.behavior, s, DASHED) == 0.0 for s in range(7))
    np.testing.assert_allclose(dom.xi, np.full(7, 1 / 7), atol=1e-12)


# ---------------------------------------------------------------- chain


def test_chain_rewards_and_symmetry(problems):
    dom = problems["chain50"].domain
    assert dom.on_policy
    r = dom.mdp.induced(dom.target)[1]
    np.testing.assert_array_equal(np.flatnonzero(r), [9, 40])
    V = true_values(dom.mdp, dom.target)
    # reflection i -> 49 - i maps the reward pair onto itself
    np.testing.assert_allclose(V, V[::-1], atol=1e-10)
    assert dom.info["bebf_built"] == 20


def test_chain_rejects_bad_basis_size():
    with pytest.raises(ValueError):
        build_domain("chain50", bebf_count=0)


# ---------------------------------------------------------------- battery dynamics


def test_idle_action_keeps_capacity():
    x, s, th = battery_transition((0.5, 0.8, 3.25), 0.0, price_draw=0.3, round_draw=0.0)
    assert (x, s) == (0.5, 0.8)
    assert th in CFG.prices


def test_full_charge_clamps_to_new_capacity():
    # round_draw = 0 forces the capacity drop
    x, s, _ = battery_transition((0.0, 1.0, 5.5), 1.0, price_draw=0.0, round_draw=0.0)
    assert (x, s) == (0.9, 0.9)
    x, s, _ = battery_transition((0.0, 1.0, 5.5), 1.0, price_draw=0.0, round_draw=0.999)
    assert (x, s) == (1.0, 1.0)


def test_worn_out_battery_is_replaced():
    assert battery_transition((0.0, 0.1, 1.0), 0.1, price_draw=0.0, round_draw=0.0)[:2] == (0.0, CFG.s0)


def test_battery_transition_errors():
    with pytest.raises(ActionOutOfBounds):
        battery_transition((0.5, 1.0, 3.25), 0.6, 0.0)
    with pytest.raises(ActionOutOfBounds):
        battery_transition((0.5, 1.0, 3.25), -0.7, 0.0)
    with pytest.raises(ActionOutOfBounds):
        battery_transition((0.5, 1.0, 3.25), 0.05, 0.0)
    with pytest.raises(GridInfeasible):
        battery_transition((0.9, 0.8, 3.25), 0.0, 0.0)


@given(st.integers(1, 10), st.data(), st.floats(-3, 3), st.floats(0, 0.999))
@settings(max_examples=60, deadline=None)
def test_transition_stays_on_grid(ks, data, z, u_draw):
    kx = data.draw(st.integers(0, ks))
    ku = data.draw(st.integers(-kx, ks - kx))
    q = data.draw(st.integers(0, len(CFG.prices) - 1))
    x, s, th = battery_transition((kx / 10, ks / 10, CFG.prices[q]), ku / 10, z, u_draw)
    assert 0.0 <= x <= s
    assert s <= ks / 10 or s == CFG.s0  # capacity only shrinks, except on replacement
    assert th in CFG.prices


def test_degradation_examples():
    assert degradation(0.3, 0.0, 1.0, CFG) == 0.0
    # moving inside [0.2 s, 0.8 s] costs eps_d |u|
    assert degradation(0.3, 0.2, 1.0, CFG) == pytest.approx(0.001 * 0.2)
    assert degradation(0.0, 1.0, 1.0, CFG) == pytest.approx(0.001 * (1.0 + 2.0 * 0.2))


def test_reward_signs():
    assert reward(0.0, 0.5, 1.0, 5.5, CFG) < 0  # buying costs money
    sell = reward(0.5, -0.5, 1.0, 10.0, CFG)
    assert sell == pytest.approx(0.5 * 9.0 - 10.0 * degradation(0.5, -0.5, 1.0, CFG))
    assert reward(0.5, 0.0, 1.0, 10.0, CFG) == 0.0


def test_price_matrix_matches_sampler():
    P = price_transition_matrix(CFG)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    assert np.all(P >= 0)
    rng = make_rng(5)
    n = 40_000
    for q, th in enumerate(CFG.prices):
        draws = np.array([price_step(th, z, CFG) for z in rng.standard_normal(n)])
        freq = np.array([np.mean(draws == p) for p in CFG.prices])
        sd = np.sqrt(P[q] * (1 - P[q]) / n)
        assert np.all(np.abs(freq - P[q]) <= 4 * sd + 1.0 / n)


# ---------------------------------------------------------------- battery MDP and features


def test_battery_grid_and_policies(problems):
    dom = problems["battery"].domain
    grid = dom.info["grid"]
    assert isinstance(grid, BatteryGrid)
    assert dom.mdp.n_states == 5 * sum(k + 1 for k in range(1, 11))
    assert dom.mdp.n_actions == 21
    for i in range(dom.mdp.n_states):
        x, s, th = grid.decode(i)
        assert 0.0 <= x <= s and grid.encode((x, s, th)) == i
        avail = np.flatnonzero(dom.mdp.action_mask[i])
        assert grid.action_value(avail[0]) == pytest.approx(-x) and grid.action_value(avail[-1]) == pytest.approx(s - x)
        # behavior is uniform over available actions; target follows the thresholds
        np.testing.assert_allclose(dom.behavior.probs[i, avail], 1.0 / avail.size)
        u = grid.action_value(int(dom.target.probs[i].argmax()))
        expected = s - x if th <= CFG.buy_below else (-x if th >= CFG.sell_above else 0.0)
        assert u == pytest.approx(expected)
    masked = ~dom.mdp.action_mask
    assert np.all(dom.features_sa[masked] == 0)


def test_hinge_features_by_hand():
    f = hinge_features(0.3, 0.5, 1, CFG)
    block = f.size // len(CFG.prices)
    assert block == 33
    assert np.all(f[:block] == 0) and np.all(f[2 * block:] == 0)
    b = f[block:2 * block]
    np.testing.assert_allclose(b[:11], [0.3, 0.2, 0.1] + [0.0] * 8, atol=1e-12)
    np.testing.assert_allclose(b[11:22], [0.5, 0.4, 0.3, 0.2, 0.1] + [0.0] * 6, atol=1e-12)
    np.testing.assert_allclose(b[22:25], [0.8, 0.7, 0.6], atol=1e-12)


def test_battery_features_full_rank(problems):
    Phi = problems["battery"].domain.Phi
    assert np.linalg.matrix_rank(Phi) == Phi.shape[1]
    assert problems["battery"].domain.features.bound >= np.abs(Phi).max()
