"""Three-layer softmax network mapping a one-hot state to successor
probabilities, trained by mini-batch cross-entropy minimisation.

Two update rules are available: Adam (default) and plain gradient descent.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environments import StateSpace, TrainingSet, TransitionMatrix
from .errors import ConfigError, ShapeError

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class LayeredNetwork:
    """``softmax(W2 relu(W1 x + b1) + b2)`` for one-hot ``x``.

    W1 has shape (hidden, input) and W2 (output, hidden).
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    seed: int | None = None

    @property
    def input_width(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_width(self) -> int:
        return self.W1.shape[0]

    @property
    def output_width(self) -> int:
        return self.W2.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> LayeredNetwork:
        return LayeredNetwork(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(), self.seed)


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_network(
    n_states: int,
    hidden_width: int | None = None,
    seed: int | None = 0,
    output_width: int | None = None,
    zero_output: bool = False,
) -> LayeredNetwork:
    """Glorot-uniform weights, zero biases.

    ``hidden_width`` defaults to ``n_states``; ``output_width`` defaults to
    ``n_states`` (other values are used for action heads). ``zero_output``
    starts W2 at zero so the initial output is uniform.
    """
    hidden_width = n_states if hidden_width is None else hidden_width
    output_width = n_states if output_width is None else output_width
    if n_states < 1 or hidden_width < 1 or output_width < 1:
        raise ConfigError(f"network widths must be positive, got {n_states}/{hidden_width}/{output_width}")
    if n_states < 2 and output_width == n_states:
        raise ConfigError("a successor network needs at least two states")
    rng = np.random.default_rng(seed)
    w1 = _glorot(rng, hidden_width, n_states)
    w2 = _glorot(rng, output_width, hidden_width)
    if zero_output:
        w2[:] = 0.0
    return LayeredNetwork(w1, np.zeros(hidden_width), w2, np.zeros(output_width), seed)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def hidden(net: LayeredNetwork, states) -> np.ndarray:
    return np.maximum(net.W1[:, states].T + net.b1, 0.0)


def logits(net: LayeredNetwork, states) -> np.ndarray:
    """Pre-softmax outputs for a batch of state ids, shape (batch, output)."""
    states = np.atleast_1d(np.asarray(states, dtype=np.int64))
    if states.size and (states.min() < 0 or states.max() >= net.input_width):
        raise IndexError(f"state id out of range [0, {net.input_width})")
    return hidden(net, states) @ net.W2.T + net.b2


def forward(net: LayeredNetwork, state: int) -> np.ndarray:
    """Successor distribution for a single state."""
    return softmax(logits(net, [state]))[0]


def forward_batch(net: LayeredNetwork, states) -> np.ndarray:
    return softmax(logits(net, states))


def cross_entropy(net: LayeredNetwork, inputs, targets) -> float:
    """Mean negative log-likelihood of ``targets`` under the network."""
    z = logits(net, inputs)
    z = z - z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-log_p[np.arange(len(targets)), targets].mean())


def _loss_and_grads(net: LayeredNetwork, inputs: np.ndarray, targets: np.ndarray):
    n = len(inputs)
    rows = np.arange(n)
    pre = net.W1[:, inputs].T + net.b1
    h = np.maximum(pre, 0.0)
    z = h @ net.W2.T + net.b2
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    norm = e.sum(axis=1)
    loss_sum = float(np.sum(np.log(norm) - z[rows, targets]))
    delta = e / norm[:, None]
    delta[rows, targets] -= 1.0
    delta /= n
    dh = delta @ net.W2
    dh[pre <= 0.0] = 0.0
    # one-hot inputs: only the W1 columns that were fed in receive gradient
    onehot = np.zeros((n, net.input_width))
    onehot[rows, inputs] = 1.0
    grads = {"W1": dh.T @ onehot, "b1": dh.sum(axis=0), "W2": delta.T @ h, "b2": delta.sum(axis=0)}
    return loss_sum, grads


def gradients(net: LayeredNetwork, inputs, targets) -> dict[str, np.ndarray]:
    """Gradient of the mean cross-entropy over one batch."""
    inputs = np.asarray(inputs, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    return _loss_and_grads(net, inputs, targets)[1]


OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int | None = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-7

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")


@dataclass
class TrainReport:
    epoch_loss: list[float] = field(default_factory=list)
    duration: float = 0.0

    @property
    def final_loss(self) -> float | None:
        return self.epoch_loss[-1] if self.epoch_loss else None


def _sgd_step(net: LayeredNetwork, cfg: TrainConfig):
    params = net.params()

    def step(grads):
        for name, p in params.items():
            p -= cfg.learning_rate * grads[name]

    return step


def _adam_step(net: LayeredNetwork, cfg: TrainConfig):
    params = net.params()
    m = {k: np.zeros_like(p) for k, p in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    t = 0

    def step(grads):
        nonlocal t
        t += 1
        c1 = 1.0 - cfg.beta1**t
        c2 = 1.0 - cfg.beta2**t
        for name, p in params.items():
            g = grads[name]
            m[name] *= cfg.beta1
            m[name] += (1.0 - cfg.beta1) * g
            v[name] *= cfg.beta2
            v[name] += (1.0 - cfg.beta2) * (g * g)
            p -= cfg.learning_rate * (m[name] / c1) / (np.sqrt(v[name] / c2) + cfg.adam_eps)

    return step


def train(net: LayeredNetwork, data: TrainingSet, cfg: TrainConfig = TrainConfig()) -> TrainReport:
    """Fit ``net`` in place to the one-hot successor labels in ``data``.

    Each epoch visits the pairs in a fresh permutation drawn from a
    generator seeded once with ``cfg.seed``. Reported loss per epoch is the
    sample-weighted mean of the batch losses seen during that epoch.
    """
    start = time.perf_counter()
    report = TrainReport()
    n = len(data)
    if n == 0:
        return report
    x, y = data.inputs, data.targets
    if x.max() >= net.input_width or y.max() >= net.output_width or min(x.min(), y.min()) < 0:
        raise ShapeError("training pairs reference states outside the network width")
    rng = np.random.default_rng(cfg.seed)
    step = _adam_step(net, cfg) if cfg.optimizer == "adam" else _sgd_step(net, cfg)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss_sum, grads = _loss_and_grads(net, x[idx], y[idx])
            total += loss_sum
            step(grads)
        report.epoch_loss.append(total / n)
        if (epoch + 1) % 50 == 0:
            log.debug("epoch %d loss %.5f", epoch + 1, report.epoch_loss[-1])
    report.duration = time.perf_counter() - start
    return report


def predict_tp_matrix(net: LayeredNetwork, space: StateSpace) -> TransitionMatrix:
    """Stack the network's output for every state into a TP matrix.

    Rows of walls and terminal states are filled too but flagged as excluded.
    """
    if net.input_width != space.n_states or net.output_width != space.n_states:
        raise ShapeError(f"network width {net.input_width} does not match {space.n_states} states")
    probs = forward_batch(net, np.arange(space.n_states))
    excluded = ~space.valid_mask | space.terminal_mask
    return TransitionMatrix(probs, excluded=excluded)


def save_network(net: LayeredNetwork, path: str | Path, **metadata) -> None:
    """Write an ``.npz`` checkpoint; float arrays round-trip bit-exactly."""
    extra = {f"meta_{k}": np.asarray(v) for k, v in metadata.items()}
    with open(path, "wb") as fh:
        np.savez(
            fh,
            version=np.int64(CHECKPOINT_VERSION),
            widths=np.array([net.input_width, net.hidden_width, net.output_width], dtype=np.int64),
            seed=np.int64(-1 if net.seed is None else net.seed),
            **net.params(),
            **extra,
        )


def load_network(path: str | Path) -> tuple[LayeredNetwork, dict]:
    with np.load(path) as z:
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        seed = int(z["seed"])
        net = LayeredNetwork(z["W1"], z["b1"], z["W2"], z["b2"], None if seed < 0 else seed)
        meta = {k[5:]: z[k][()] if z[k].ndim == 0 else z[k] for k in z.files if k.startswith("meta_")}
        widths = tuple(int(w) for w in z["widths"])
    if widths != (net.input_width, net.hidden_width, net.output_width):
        raise ValueError(f"checkpoint widths {widths} do not match parameter shapes")
    return net, meta
