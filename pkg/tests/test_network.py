import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srmaps.environments import TrainingSet, ground_truth_tp
from srmaps.errors import ConfigError, ShapeError
from srmaps.network import (
    LayeredNetwork,
    TrainConfig,
    cross_entropy,
    forward,
    forward_batch,
    gradients,
    init_network,
    load_network,
    predict_tp_matrix,
    save_network,
    train,
)


def pairs(rows):
    return TrainingSet(np.array(rows, dtype=np.int64).reshape(-1, 2), seed=None)


def dense_forward(net, s):
    """Independent evaluation with an explicit one-hot vector."""
    x = np.zeros(net.input_width)
    x[s] = 1.0
    h = np.maximum(net.W1 @ x + net.b1, 0.0)
    z = net.W2 @ h + net.b2
    e = np.exp(z - z.max())
    return e / e.sum()


class TestInit:
    def test_room_shapes(self):
        net = init_network(100, seed=1)
        assert net.W1.shape == (100, 100) and net.W2.shape == (100, 100)
        assert net.b1.shape == (100,) and net.b2.shape == (100,)

    def test_bottleneck(self):
        net = init_network(40, 20, seed=1)
        assert (net.input_width, net.hidden_width, net.output_width) == (40, 20, 40)

    def test_deterministic(self):
        a, b = init_network(30, seed=9), init_network(30, seed=9)
        for k, v in a.params().items():
            np.testing.assert_array_equal(v, b.params()[k])

    def test_bad_widths(self):
        with pytest.raises(ConfigError):
            init_network(10, 0)
        with pytest.raises(ConfigError):
            init_network(1)


class TestForward:
    def test_zero_params_uniform(self):
        net = LayeredNetwork(np.zeros((4, 7)), np.zeros(4), np.zeros((7, 4)), np.zeros(7))
        np.testing.assert_array_equal(forward(net, 3), np.full(7, 1 / 7))

    @given(st.integers(2, 30), st.integers(1, 20), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_sums_and_dense_oracle(self, n, hidden, seed):
        net = init_network(n, hidden, seed)
        net.b1 += np.random.default_rng(seed).normal(size=hidden)
        out = forward_batch(net, np.arange(n))
        assert np.abs(out.sum(axis=1) - 1).max() <= 1e-12
        for s in range(n):
            np.testing.assert_allclose(out[s], dense_forward(net, s), rtol=1e-12, atol=1e-15)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            forward(init_network(5), 5)


class TestGradients:
    @pytest.mark.parametrize("seed", range(6))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        net = init_network(6, 4, seed)
        net.b1 += rng.normal(scale=0.5, size=4)
        net.b2 += rng.normal(scale=0.5, size=6)
        x = rng.integers(0, 6, size=12)
        y = rng.integers(0, 6, size=12)
        grads = gradients(net, x, y)
        h = 1e-5
        for name, p in net.params().items():
            num = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up = cross_entropy(net, x, y)
                p[idx] = old - h
                down = cross_entropy(net, x, y)
                p[idx] = old
                num[idx] = (up - down) / (2 * h)
            rel = np.linalg.norm(grads[name] - num) / max(np.linalg.norm(grads[name]) + np.linalg.norm(num), 1e-12)
            assert rel < 1e-4, name

    def test_initial_loss_uniform(self):
        net = init_network(25, seed=0, zero_output=True)
        rng = np.random.default_rng(0)
        x, y = rng.integers(0, 25, 50), rng.integers(0, 25, 50)
        assert abs(cross_entropy(net, x, y) - math.log(25)) <= 1e-9

    @given(st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_loss_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        net = init_network(8, 5, seed)
        x, y = rng.integers(0, 8, 16), rng.integers(0, 8, 16)
        assert cross_entropy(net, x, y) >= 0


class TestTrain:
    def test_empty_data_noop(self):
        net = init_network(5, seed=2)
        before = net.copy()
        report = train(net, pairs([]), TrainConfig(epochs=10))
        assert report.epoch_loss == []
        for k, v in net.params().items():
            np.testing.assert_array_equal(v, before.params()[k])

    @pytest.mark.parametrize("optimizer", ["sgd", "adam"])
    def test_single_pair_converges(self, optimizer):
        net = init_network(6, seed=0)
        lr = 0.1 if optimizer == "sgd" else 0.01
        report = train(net, pairs([[2, 4]]), TrainConfig(epochs=2000, batch_size=1, learning_rate=lr, optimizer=optimizer))
        assert forward(net, 2)[4] > 0.99
        if optimizer == "sgd":
            assert all(b <= a + 1e-15 for a, b in zip(report.epoch_loss, report.epoch_loss[1:]))

    def test_deterministic(self, room):
        from srmaps.environments import sample_transition_pairs

        data = sample_transition_pairs(room, 2_000, seed=4)
        cfg = TrainConfig(epochs=3, batch_size=32, seed=4)
        a, b = init_network(100, seed=4), init_network(100, seed=4)
        train(a, data, cfg)
        train(b, data, cfg)
        for k, v in a.params().items():
            assert np.array_equal(v, b.params()[k])

    def test_rejects_out_of_range_pairs(self):
        with pytest.raises(ShapeError):
            train(init_network(4), pairs([[0, 4]]), TrainConfig(epochs=1))

    @pytest.mark.parametrize(
        "kwargs", [dict(epochs=-1), dict(batch_size=0), dict(learning_rate=0.0), dict(optimizer="rmsprop")]
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)


class TestPredict:
    def test_shapes_and_rows(self, room, maze):
        tp = predict_tp_matrix(init_network(100, seed=0), room)
        assert tp.probs.shape == (100, 100)
        assert np.abs(tp.probs.sum(axis=1) - 1).max() <= 1e-12
        tp = predict_tp_matrix(init_network(225, seed=0), maze)
        assert tp.probs.shape == (225, 225)
        np.testing.assert_array_equal(tp.excluded, ~maze.valid_mask)

    def test_width_mismatch(self, room):
        with pytest.raises(ShapeError):
            predict_tp_matrix(init_network(40), room)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        net = init_network(12, 7, seed=3)
        net.b2 += 0.1
        path = tmp_path / "net.npz"
        save_network(net, path, note="x", epochs=5)
        back, meta = load_network(path)
        for k, v in net.params().items():
            assert np.array_equal(v, back.params()[k])
        assert back.seed == 3
        assert meta["note"] == "x" and int(meta["epochs"]) == 5

    def test_seed_none(self, tmp_path):
        net = init_network(4, seed=None)
        net.seed = None
        save_network(net, tmp_path / "n.npz")
        assert load_network(tmp_path / "n.npz")[0].seed is None


@pytest.mark.slow
class TestRoomTraining:
    def test_top_k_support(self, room, trained_room):
        net, _ = trained_room
        tp = predict_tp_matrix(net, room).probs
        hits = 0
        for s in range(room.n_states):
            nbrs = set(room.adjacency[s])
            top = set(np.argsort(-tp[s], kind="stable")[: len(nbrs)])
            hits += top == nbrs
        assert hits / room.n_states >= 0.95

    def test_loss_decreases(self, trained_room):
        _, report = trained_room
        assert report.epoch_loss[-1] < report.epoch_loss[0]

    def test_tv_below_bound(self, room, trained_room):
        net, _ = trained_room
        tp = predict_tp_matrix(net, room)
        truth = ground_truth_tp(room)
        tv = 0.5 * np.abs(tp.probs - truth.probs).sum(axis=1)
        assert tv.mean() < 0.05
