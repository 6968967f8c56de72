import numpy as np
import pytest

from sentikit import autograd as ag
from sentikit.autograd import Tensor
from sentikit.corpus import pad_batch
from sentikit.encoder import forward, init_params
from sentikit.errors import ContractError
from sentikit.masker import MaskedExample
from sentikit.objectives import (JointConfig, LossBreakdown, joint_loss,
                                 loss_ap, loss_ap_independent, loss_sw,
                                 loss_wp, target_rows)
from sentikit.selftest import check_gradients

H, V = 8, 12


def head_params(rng, ap_dim=H):
    return {
        "lm_w": ag.parameter(rng.normal(size=(H, V))),
        "lm_b": ag.parameter(rng.normal(size=V)),
        "wp_w": ag.parameter(rng.normal(size=(H, 2))),
        "wp_b": ag.parameter(rng.normal(size=2)),
        "ap_w": ag.parameter(rng.normal(size=(ap_dim, V))),
        "ap_b": ag.parameter(rng.normal(size=V)),
    }


def zero_heads(ap_dim=H):
    return {
        "lm_w": ag.parameter(np.zeros((H, V))),
        "lm_b": ag.parameter(np.zeros(V)),
        "wp_w": ag.parameter(np.zeros((H, 2))),
        "wp_b": ag.parameter(np.zeros(2)),
        "ap_w": ag.parameter(np.zeros((ap_dim, V))),
        "ap_b": ag.parameter(np.zeros(V)),
    }


def states_of(rng, b=2, t=6):
    return ag.parameter(rng.normal(size=(b, t, H)))


class TestWordLoss:
    def test_uniform_head_gives_log_v_per_target(self, rng):
        states = states_of(rng)
        rows = [(0, 1, 3), (0, 2, 7), (1, 1, 0)]
        loss = loss_sw(states, rows, zero_heads(), batch_size=2)
        assert loss.item() == pytest.approx(3 * np.log(V) / 2, rel=1e-12)

    def test_no_rows_is_exact_zero(self, rng):
        loss = loss_sw(states_of(rng), [], zero_heads(), 2)
        assert loss.item() == 0.0

    def test_perfect_head_drives_loss_down(self, rng):
        states = states_of(rng, b=1, t=3)
        heads = zero_heads()
        # bias strongly toward the right answer at every position
        heads["lm_b"] = ag.parameter(np.full(V, -50.0))
        heads["lm_b"].data[4] = 50.0
        loss = loss_sw(states, [(0, 1, 4)], heads, 1)
        assert loss.item() == pytest.approx(0.0, abs=1e-12)


class TestPolarityLoss:
    def test_uniform_head_gives_log_2(self, rng):
        states = states_of(rng)
        rows = [(0, 1, 1), (1, 3, 0)]
        loss = loss_wp(states, rows, zero_heads(), batch_size=2)
        assert loss.item() == pytest.approx(np.log(2.0), rel=1e-12)

    def test_bad_polarity_rejected(self, rng):
        with pytest.raises(ContractError):
            loss_wp(states_of(rng), [(0, 1, 2)], zero_heads(), 2)


class TestPairLoss:
    def test_uniform_head_full_bce(self, rng):
        states = states_of(rng)
        pair_rows = [(0, [1], [2], [3, 7]), (1, [2], [4], [5])]
        loss = loss_ap(states, pair_rows, zero_heads(), 2, V)
        assert loss.item() == pytest.approx(2 * V * np.log(2.0) / 2, rel=1e-12)

    def test_uniform_head_positive_only(self, rng):
        states = states_of(rng)
        pair_rows = [(0, [1], [2], [3, 7]), (1, [2], [4], [5])]
        loss = loss_ap(states, pair_rows, zero_heads(), 2, V, bce="positive_only")
        assert loss.item() == pytest.approx(3 * np.log(2.0) / 2, rel=1e-12)

    def test_positive_only_drops_negative_terms(self, rng):
        states = states_of(rng)
        heads = head_params(rng)
        pair_rows = [(0, [1], [2], [3, 7])]
        full = loss_ap(states, pair_rows, heads, 1, V, bce="full")
        pos = loss_ap(states, pair_rows, heads, 1, V, bce="positive_only")
        assert full.item() > pos.item()

    def test_sent_vector_pairs_share_the_cls_prediction(self, rng):
        states = states_of(rng)
        heads = head_params(rng)
        one = loss_ap(states, [(0, [1], [2], [3, 7])], heads, 1, V)
        two = loss_ap(states, [(0, [1], [2], [3, 7]), (0, [3], [4], [3, 7])],
                      heads, 1, V)
        assert two.item() == pytest.approx(2 * one.item(), rel=1e-12)

    def test_pair_vector_reads_span_states(self, rng):
        states = states_of(rng)
        heads = head_params(rng, ap_dim=2 * H)
        a = loss_ap(states, [(0, [1], [2], [3, 7])], heads, 1, V,
                    mode="pair_vector")
        b = loss_ap(states, [(0, [3], [4], [3, 7])], heads, 1, V,
                    mode="pair_vector")
        assert a.item() != pytest.approx(b.item())

    def test_unknown_modes_rejected(self, rng):
        with pytest.raises(ContractError):
            loss_ap(states_of(rng), [], zero_heads(), 1, V, mode="cls")
        with pytest.raises(ContractError):
            loss_ap(states_of(rng), [], zero_heads(), 1, V, bce="half")

    def test_independent_variant_routes_through_word_head(self, rng):
        states = states_of(rng)
        heads = head_params(rng)
        ex0 = MaskedExample([2, 4, 4, 9], [2, 5, 8, 9], [], [(2, 1)],
                            [[5, 8]], [([1], [2])])
        got = loss_ap_independent(states, [(0, [1], [2], [5, 8])], [ex0],
                                  heads, 1)
        want = loss_sw(states, [(0, 1, 5), (0, 2, 8)], heads, 1)
        assert got.item() == pytest.approx(want.item(), rel=1e-15)


class TestJointLoss:
    def build_batch(self, world, masked_hybrid, n=16):
        examples = [ex for ex in masked_hybrid if ex.ap_targets][:n]
        batch = pad_batch([ex.corrupted for ex in examples])
        return examples, batch

    def test_uniform_model_exact_values(self, world, masked_hybrid, rng):
        examples, batch = self.build_batch(world, masked_hybrid)
        params = init_params(world["enc"], np.random.default_rng(0))
        states = forward(params, world["enc"], batch.ids, batch.attn).states
        bd, total = joint_loss(states, examples, params, len(world["vocab"]))
        B = len(examples)
        Vw = len(world["vocab"])
        assert bd.n_sw > 0 and bd.n_wp > 0 and bd.n_ap > 0
        assert bd.l_sw == pytest.approx(bd.n_sw * np.log(Vw) / B, rel=1e-12)
        assert bd.l_wp == pytest.approx(bd.n_wp * np.log(2.0) / B, rel=1e-12)
        assert bd.l_ap == pytest.approx(bd.n_ap * Vw * np.log(2.0) / B, rel=1e-12)

    def test_total_is_exact_sum_in_graph_and_breakdown(self, world,
                                                       masked_hybrid, rng):
        examples, batch = self.build_batch(world, masked_hybrid)
        params = init_params(world["enc"], np.random.default_rng(0))
        for name in ("lm_w", "wp_w", "ap_w"):
            params[name] = ag.parameter(
                rng.normal(size=params[name].data.shape) * 0.1)
        states = forward(params, world["enc"], batch.ids, batch.attn).states
        bd, total = joint_loss(states, examples, params, len(world["vocab"]))
        assert bd.total == (bd.l_sw + bd.l_wp) + bd.l_ap
        assert float(total.data) == bd.total

    def test_disabled_terms_are_exact_zero(self, world, masked_hybrid):
        examples, batch = self.build_batch(world, masked_hybrid, n=4)
        params = init_params(world["enc"], np.random.default_rng(0))
        states = forward(params, world["enc"], batch.ids, batch.attn).states
        cfg = JointConfig(include_wp=False, include_ap=False)
        bd, _ = joint_loss(states, examples, params, len(world["vocab"]), cfg)
        assert bd.l_wp == 0.0 and bd.l_ap == 0.0
        assert bd.total == bd.l_sw

    def test_ap_i_differs_from_ap(self, world, masked_hybrid, rng):
        examples, batch = self.build_batch(world, masked_hybrid, n=8)
        params = init_params(world["enc"], np.random.default_rng(0))
        for name in ("lm_w", "ap_w"):
            params[name] = ag.parameter(
                rng.normal(size=params[name].data.shape) * 0.1)
        states = forward(params, world["enc"], batch.ids, batch.attn).states
        joint = joint_loss(states, examples, params, len(world["vocab"]),
                           JointConfig(ap_variant="ap"))[0]
        indep = joint_loss(states, examples, params, len(world["vocab"]),
                           JointConfig(ap_variant="ap_i"))[0]
        assert joint.l_ap != pytest.approx(indep.l_ap)
        assert joint.l_sw == indep.l_sw  # the other terms are untouched

    def test_target_rows_flatten_batch_indices(self, masked_hybrid):
        examples = masked_hybrid[:6]
        sw, wp, pairs = target_rows(examples)
        assert len(sw) == sum(len(e.sw_targets) for e in examples)
        assert {b for b, _, _ in sw} <= set(range(6))
        for b, apos, spos, ids in pairs:
            assert ids == sorted(ids)

    def test_empty_batch_rejected(self, rng):
        with pytest.raises(ContractError):
            joint_loss(states_of(rng), [], zero_heads(), V)

    def test_cls_position_target_rejected(self, rng):
        ex = MaskedExample([2, 4], [2, 9], [(0, 2)], [], [])
        with pytest.raises(ContractError):
            joint_loss(states_of(rng, b=1, t=2), [ex], zero_heads(), V)

    def test_losses_are_nonnegative(self, world, masked_hybrid, rng):
        examples, batch = self.build_batch(world, masked_hybrid, n=8)
        params = init_params(world["enc"], np.random.default_rng(1))
        for name in ("lm_w", "lm_b", "wp_w", "wp_b", "ap_w", "ap_b"):
            params[name] = ag.parameter(
                rng.normal(size=params[name].data.shape))
        states = forward(params, world["enc"], batch.ids, batch.attn).states
        for cfg in (JointConfig(), JointConfig(bce="positive_only"),
                    JointConfig(ap_variant="ap_i")):
            bd, _ = joint_loss(states, examples, params, len(world["vocab"]), cfg)
            assert bd.l_sw >= 0 and bd.l_wp >= 0 and bd.l_ap >= 0


class TestBreakdownContract:
    def test_inconsistent_total_rejected(self):
        with pytest.raises(ContractError):
            LossBreakdown(l_sw=1.0, l_wp=1.0, l_ap=1.0, total=2.0)


class TestGradients:
    def test_every_loss_backpropagates_correctly(self, rng):
        states = states_of(rng, b=2, t=5)
        heads = head_params(rng)
        params = dict(heads, states=states)
        sw_rows = [(0, 1, 3), (1, 2, 7)]
        wp_rows = [(0, 2, 1), (1, 1, 0)]
        pair_rows = [(0, [1], [2], [3, 7]), (1, [3], [4], [2])]

        def build():
            s = params["states"]
            return (loss_sw(s, sw_rows, params, 2)
                    + loss_wp(s, wp_rows, params, 2)
                    + loss_ap(s, pair_rows, params, 2, V))

        check_gradients(build, params)

    def test_pair_vector_backpropagates_correctly(self, rng):
        states = states_of(rng, b=2, t=5)
        heads = head_params(rng, ap_dim=2 * H)
        params = dict(heads, states=states)
        pair_rows = [(0, [1, 2], [3], [3, 7]), (1, [3], [4], [2])]

        def build():
            return loss_ap(params["states"], pair_rows, params, 2, V,
                           mode="pair_vector", bce="positive_only")

        check_gradients(build, params)
