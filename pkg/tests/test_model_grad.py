"""Analytic gradients against central finite differences."""

import numpy as np
import pytest

from voicesim import grad_check, init_params, loss_and_grad
from conftest import QUADRANTS, random_repr, tiny_cfg


class TestGradCheck:
    @pytest.mark.parametrize("mode,source,adapter", QUADRANTS)
    def test_all_variants_pass(self, mode, source, adapter):
        cfg = tiny_cfg(
            mode=mode,
            repr_source=source,
            use_adapter=adapter,
            num_layers=2,
            repr_dim=4,
            adapter_dim=3,
            head_hidden=4,
        )
        for seed in range(3):
            rel = grad_check(cfg, seed=seed)
            assert rel <= 1e-4, f"{mode}/{source}/adapter={adapter} seed {seed}: {rel}"

    def test_returns_small_error_not_zero(self):
        # Finite differences cannot be exact; a literally zero max error
        # would indicate a broken comparison.
        rel = grad_check(tiny_cfg(), seed=0)
        assert 0.0 < rel <= 1e-4


class TestLossAndGrad:
    def test_regression_loss_value(self, rng):
        cfg = tiny_cfg()
        params = init_params(cfg, rng)
        rep_t = random_repr(rng, uid="a")
        rep_r = random_repr(rng, uid="b")
        from voicesim import forward

        out = forward(rep_t, rep_r, params, cfg)
        loss, _ = loss_and_grad(rep_t, rep_r, 3.0, params, cfg)
        np.testing.assert_allclose(loss, (out.s_final - 3.0) ** 2, rtol=1e-12)

    def test_classification_loss_is_mean_of_branch_ces(self, rng):
        cfg = tiny_cfg(mode="classification")
        params = init_params(cfg, rng)
        rep_t = random_repr(rng, uid="a")
        rep_r = random_repr(rng, uid="b")
        from voicesim import forward

        out = forward(rep_t, rep_r, params, cfg)
        loss, _ = loss_and_grad(rep_t, rep_r, 2.0, params, cfg)
        want = -0.5 * (np.log(out.s_t[1]) + np.log(out.s_r[1]))
        np.testing.assert_allclose(loss, want, rtol=1e-12)

    def test_classification_rejects_fractional_label(self, rng):
        cfg = tiny_cfg(mode="classification")
        params = init_params(cfg, rng)
        with pytest.raises(Exception, match="label"):
            loss_and_grad(
                random_repr(rng, uid="a"),
                random_repr(rng, uid="b"),
                2.5,
                params,
                cfg,
            )

    def test_uniform_probabilities_give_log4_loss(self, rng):
        # Zero head weights make both branches emit the uniform
        # distribution, so each branch cross-entropy is ln(4).
        cfg = tiny_cfg(mode="classification")
        params = init_params(cfg, rng)
        params.head_w2[:] = 0.0
        params.head_b2[:] = 0.0
        loss, _ = loss_and_grad(
            random_repr(rng, uid="a"), random_repr(rng, uid="b"), 1.0, params, cfg
        )
        np.testing.assert_allclose(loss, np.log(4.0), rtol=1e-12)

    def test_gradient_shapes_mirror_params(self, rng):
        cfg = tiny_cfg()
        params = init_params(cfg, rng)
        _, grads = loss_and_grad(
            random_repr(rng, uid="a"), random_repr(rng, uid="b"), 2.0, params, cfg
        )
        for name, arr in params.items():
            assert getattr(grads, name).shape == arr.shape

    def test_no_adapter_no_adapter_grads(self, rng):
        cfg = tiny_cfg(use_adapter=False)
        params = init_params(cfg, rng)
        _, grads = loss_and_grad(
            random_repr(rng, uid="a"), random_repr(rng, uid="b"), 2.0, params, cfg
        )
        assert grads.adapter_w is None and grads.adapter_b is None

    def test_last_layer_mode_zero_logit_grads(self, rng):
        cfg = tiny_cfg(repr_source="last_layer")
        params = init_params(cfg, rng)
        _, grads = loss_and_grad(
            random_repr(rng, uid="a"), random_repr(rng, uid="b"), 2.0, params, cfg
        )
        np.testing.assert_array_equal(grads.layer_logits, np.zeros(cfg.num_layers))

    def test_perfect_prediction_zero_gradient(self, rng):
        # Feed the model's own output back as the label; the squared
        # error and every gradient vanish.
        cfg = tiny_cfg()
        params = init_params(cfg, rng)
        rep_t = random_repr(rng, uid="a")
        rep_r = random_repr(rng, uid="b")
        from voicesim import forward

        label = forward(rep_t, rep_r, params, cfg).s_final
        loss, grads = loss_and_grad(rep_t, rep_r, label, params, cfg)
        assert loss == 0.0
        for name, g in grads.items():
            np.testing.assert_array_equal(g, np.zeros_like(g), err_msg=name)

    def test_swap_gives_identical_gradients(self, rng):
        # Pair order must not matter for learning either.
        cfg = tiny_cfg()
        params = init_params(cfg, rng)
        rep_t = random_repr(rng, uid="a")
        rep_r = random_repr(rng, uid="b")
        _, fwd = loss_and_grad(rep_t, rep_r, 2.5, params, cfg)
        _, rev = loss_and_grad(rep_r, rep_t, 2.5, params, cfg)
        for (name, a), (_, b) in zip(fwd.items(), rev.items()):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12, err_msg=name)
