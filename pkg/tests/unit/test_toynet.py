#!/usr/bin/env python3
"""
Tests for the toy MLP, teacher training and channel pruning
"""

import numpy as np
import pytest

from svs_refine.benchmark.engine import load_config
from svs_refine.benchmark.toynet import (
    TeacherTask,
    ToyNet,
    gradient_check,
    he_init,
    make_teacher,
    prune_channels,
    random_normal,
)
from svs_refine.exceptions import CheckpointError, PruningError
from svs_refine.tensor_store import Checkpoint
from svs_refine.validation import ValidationError


def _net_with_rows(row_norms, out=2, inputs=3):
    """Two-layer net whose hidden weight rows have the given norms."""
    w0 = np.zeros((len(row_norms), inputs))
    w0[:, 0] = row_norms
    w1 = np.arange(out * len(row_norms), dtype=np.float64).reshape(out, len(row_norms))
    return ToyNet([w0, w1], [np.arange(len(row_norms), dtype=np.float64), np.zeros(out)])


class TestToyNet:
    """Forward and backward passes"""

    def test_shapes(self, rng):
        net = random_normal((4, 5, 3, 2), rng)
        assert net.dims == (4, 5, 3, 2)
        assert net.forward(rng.standard_normal((7, 4))).shape == (7, 2)
        assert net.num_params == 4 * 5 + 5 + 5 * 3 + 3 + 3 * 2 + 2

    def test_leaky_activation(self):
        net = ToyNet([np.eye(2), np.eye(2)], [np.zeros(2), np.zeros(2)])
        np.testing.assert_allclose(net.forward(np.array([[1.0, -1.0]])), [[1.0, -0.2]])

    def test_gradient_check(self, rng):
        net = random_normal((4, 5, 3, 2), rng)
        net.biases = [0.1 * rng.standard_normal(b.shape) for b in net.biases]
        x = rng.standard_normal((8, 4))
        y = rng.standard_normal((8, 2))
        assert gradient_check(net, x, y, probes=10, rng=np.random.default_rng(1)) <= 1e-6

    def test_sgd_step_returns_pre_update_loss(self, rng):
        net = he_init((3, 4, 2), rng)
        x = rng.standard_normal((5, 3))
        y = rng.standard_normal((5, 2))
        before = net.loss(x, y)
        assert net.sgd_step(x, y, lr=0.01) == pytest.approx(before)
        assert net.loss(x, y) < before

    def test_incompatible_layers(self):
        with pytest.raises(ValidationError):
            ToyNet([np.ones((3, 2)), np.ones((2, 4))], [np.zeros(3), np.zeros(2)])
        with pytest.raises(ValidationError):
            ToyNet([np.ones((3, 2))], [np.zeros(2)])

    def test_checkpoint_round_trip(self, rng):
        net = he_init((4, 6, 2), rng)
        ckpt = net.to_checkpoint()
        assert ckpt.names() == [
            "layers.0.bias",
            "layers.0.weight",
            "layers.1.bias",
            "layers.1.weight",
        ]
        back = ToyNet.from_checkpoint(ckpt)
        for a, b in zip(net.weights + net.biases, back.weights + back.biases):
            assert np.array_equal(a, b)

    def test_from_empty_checkpoint(self):
        with pytest.raises(CheckpointError):
            ToyNet.from_checkpoint(Checkpoint.from_tensors([]))


class TestTeacher:
    """Teacher fitting on the synthetic task"""

    def test_deterministic(self):
        a = make_teacher(3, (4, 8, 2), steps=50)
        b = make_teacher(3, (4, 8, 2), steps=50)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_seeds_differ(self):
        a = make_teacher(0, (4, 8, 2), steps=0)
        b = make_teacher(1, (4, 8, 2), steps=0)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_single_layer_teacher(self):
        net = make_teacher(0, (2, 2), steps=10)
        assert net.dims == (2, 2)
        assert prune_channels(net, 0.5).dims == (2, 2)

    def test_training_reduces_loss(self):
        dims = (8, 16, 16, 4)
        task = TeacherTask(0, dims[0], dims[-1])
        initial = task.evaluate(make_teacher(0, dims, steps=0))
        trained = task.evaluate(make_teacher(0, dims, steps=1000))
        assert trained < 0.5 * initial

    @pytest.mark.parametrize(
        "seed, expected", [(0, 0.0354), (1, 0.0358), (2, 0.0364), (3, 0.0342), (4, 0.0354)]
    )
    def test_default_teacher_loss_is_pinned(self, seed, expected):
        cfg = load_config()
        teacher = make_teacher(seed, cfg.dims, cfg.teacher_steps, cfg.teacher_lr, cfg.batch)
        achieved = TeacherTask(seed, cfg.dims[0], cfg.dims[-1]).evaluate(teacher)
        assert achieved == pytest.approx(expected, abs=1e-3)
        assert achieved < 0.04


class TestPruning:
    """Row-norm structured pruning"""

    def test_keeps_largest_rows(self):
        pruned = prune_channels(_net_with_rows([1.0, 3.0, 2.0, 3.0]), 0.5)
        assert pruned.weights[0][:, 0].tolist() == [3.0, 3.0]
        assert pruned.biases[0].tolist() == [1.0, 3.0]
        assert pruned.weights[1].tolist() == [[1.0, 3.0], [5.0, 7.0]]

    def test_ties_go_to_lower_index(self):
        pruned = prune_channels(_net_with_rows([1.0, 1.0, 1.0, 1.0]), 0.5)
        assert pruned.biases[0].tolist() == [0.0, 1.0]

    def test_matches_zeroed_channels(self, rng):
        net = random_normal((5, 8, 6, 3), rng)
        net.biases = [rng.standard_normal(b.shape) for b in net.biases]
        pruned = prune_channels(net, 0.5)

        masked = net.copy()
        for i in range(len(net.weights) - 1):
            norms = np.linalg.norm(net.weights[i], axis=1)
            order = np.lexsort((np.arange(len(norms)), -norms))
            dropped = np.sort(order[pruned.weights[i].shape[0] :])
            masked.weights[i][dropped] = 0.0
            masked.biases[i][dropped] = 0.0
            masked.weights[i + 1][:, dropped] = 0.0
        x = rng.standard_normal((10, 5))
        np.testing.assert_allclose(pruned.forward(x), masked.forward(x), atol=1e-12)

    @pytest.mark.parametrize("sparsity,width", [(0.3, 45), (0.5, 32), (0.7, 20), (0.0, 64)])
    def test_sweep_widths(self, rng, sparsity, width):
        pruned = prune_channels(random_normal((16, 64, 64, 16), rng), sparsity)
        assert pruned.dims == (16, width, width, 16)

    def test_leaves_original_untouched(self, rng):
        net = random_normal((3, 4, 2), rng)
        before = [w.copy() for w in net.weights]
        prune_channels(net, 0.5)
        assert all(np.array_equal(a, b) for a, b in zip(before, net.weights))

    @pytest.mark.parametrize("sparsity", [1.0, -0.1, 1.5])
    def test_invalid_sparsity(self, rng, sparsity):
        with pytest.raises(PruningError):
            prune_channels(random_normal((3, 4, 2), rng), sparsity)
