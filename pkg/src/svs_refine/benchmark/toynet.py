"""
Small leaky-ReLU MLP with manual backpropagation.

Used by the benchmark engine as a stand-in for a pre-trained generator:
a teacher is fit to a fixed synthetic regression task, channel-pruned, and
the surviving weights are fine-tuned from several initializations.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..constants import BIAS_SUFFIX, DEFAULT_TOY_DIMS, LEAKY_RELU_SLOPE, WEIGHT_SUFFIX
from ..exceptions import CheckpointError, PruningError
from ..tensor_store import Checkpoint, DType, Tensor
from ..validation import ValidationError, validate_dims

logger = logging.getLogger(__name__)

TEACHER_TARGET_LOSS = 1e-3  # early stop; the default budget settles near 0.035
TASK_FEATURES = 64


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((pred - target) ** 2))


@dataclass
class ToyNet:
    """Fully connected net; weights[i] is (out, in), hidden layers use leaky ReLU."""

    weights: list
    biases: list
    slope: float = LEAKY_RELU_SLOPE

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValidationError("Need one bias per weight and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValidationError(
                    f"Layer {i}: weight {w.shape} and bias {b.shape} are incompatible"
                )
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValidationError(
                    f"Layer {i} expects {w.shape[1]} inputs, "
                    f"previous layer gives {self.weights[i - 1].shape[0]}"
                )

    @property
    def dims(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "ToyNet":
        return ToyNet(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.slope
        )

    def _activate(self, z: np.ndarray) -> np.ndarray:
        return np.where(z > 0, z, self.slope * z)

    def _trace(self, x: np.ndarray) -> tuple:
        inputs, pre = [], []
        a = np.asarray(x, dtype=np.float64)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w.T + b
            pre.append(z)
            a = z if i == last else self._activate(z)
        return a, inputs, pre

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self._trace(x)[0]

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        return mse(self.forward(x), y)

    def gradients(self, x: np.ndarray, y: np.ndarray) -> tuple:
        """Return (loss, weight grads, bias grads) of the mean squared error."""
        out, inputs, pre = self._trace(x)
        delta = 2.0 * (out - y) / out.size
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.weights)
        for i in reversed(range(len(self.weights))):
            grad_w[i] = delta.T @ inputs[i]
            grad_b[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i]) * np.where(pre[i - 1] > 0, 1.0, self.slope)
        return mse(out, y), grad_w, grad_b

    def sgd_step(self, x: np.ndarray, y: np.ndarray, lr: float) -> float:
        """One plain SGD update; returns the loss before the update."""
        loss, grad_w, grad_b = self.gradients(x, y)
        for w, b, gw, gb in zip(self.weights, self.biases, grad_w, grad_b):
            w -= lr * gw
            b -= lr * gb
        return loss

    def to_checkpoint(self, dtype: DType = DType.F64) -> Checkpoint:
        tensors = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            tensors.append(Tensor.from_array(f"layers.{i}{WEIGHT_SUFFIX}", w, dtype))
            tensors.append(Tensor.from_array(f"layers.{i}{BIAS_SUFFIX}", b, dtype))
        return Checkpoint.from_tensors(tensors, metadata={"format": "toynet"})

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, slope: float = LEAKY_RELU_SLOPE) -> "ToyNet":
        weights, biases = [], []
        i = 0
        while f"layers.{i}{WEIGHT_SUFFIX}" in ckpt.tensors:
            w_name, b_name = f"layers.{i}{WEIGHT_SUFFIX}", f"layers.{i}{BIAS_SUFFIX}"
            if b_name not in ckpt.tensors:
                raise CheckpointError("Missing bias for toy layer", tensor=b_name)
            weights.append(ckpt.tensors[w_name].to_array())
            biases.append(ckpt.tensors[b_name].to_array())
            i += 1
        if not weights:
            raise CheckpointError("Checkpoint holds no toy network layers")
        return cls(weights, biases, slope)


class TeacherTask:
    """Fixed synthetic regression: y = tanh(x A^T) B^T with seeded A, B."""

    def __init__(self, seed: int, in_dim: int, out_dim: int, features: int = TASK_FEATURES):
        rng = np.random.default_rng([seed, 0])
        self.a = rng.standard_normal((features, in_dim)) / math.sqrt(in_dim)
        self.b = rng.standard_normal((out_dim, features)) / math.sqrt(features)
        self.eval_x = np.random.default_rng([seed, 5]).standard_normal((256, in_dim))

    def targets(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(x @ self.a.T) @ self.b.T

    def evaluate(self, net: ToyNet) -> float:
        return net.loss(self.eval_x, self.targets(self.eval_x))


def random_normal(dims: Sequence[int], rng: np.random.Generator, gain: float = 1.0) -> ToyNet:
    """Unit-normal weights times *gain*, zero biases."""
    dims = validate_dims(dims)
    weights = [gain * rng.standard_normal((o, i)) for i, o in zip(dims[:-1], dims[1:])]
    return ToyNet(weights, [np.zeros(o) for o in dims[1:]])


def he_init(dims: Sequence[int], rng: np.random.Generator) -> ToyNet:
    """Normal weights with std sqrt(2 / fan_in), zero biases."""
    dims = validate_dims(dims)
    weights = [
        rng.standard_normal((o, i)) * math.sqrt(2.0 / i) for i, o in zip(dims[:-1], dims[1:])
    ]
    return ToyNet(weights, [np.zeros(o) for o in dims[1:]])


def make_teacher(
    seed: int,
    dims: Sequence[int] = DEFAULT_TOY_DIMS,
    steps: int = 4000,
    lr: float = 0.05,
    batch: int = 64,
    target_loss: float = TEACHER_TARGET_LOSS,
) -> ToyNet:
    """Train a teacher on the seeded task until its batch MSE drops below target_loss.

    Weights start unit-normal scaled by 1/sqrt(fan_in); biases start small.
    Missing the target within *steps* is logged at INFO, not raised: on the
    default task and budget every seed settles a little above 0.03.
    """
    dims = validate_dims(dims)
    init_rng = np.random.default_rng([seed, 3])
    net = ToyNet(
        [init_rng.standard_normal((o, i)) / math.sqrt(i) for i, o in zip(dims[:-1], dims[1:])],
        [0.1 * init_rng.standard_normal(o) for o in dims[1:]],
    )
    task = TeacherTask(seed, dims[0], dims[-1])
    batch_rng = np.random.default_rng([seed, 4])

    loss = math.inf
    for step in range(steps):
        x = batch_rng.standard_normal((batch, dims[0]))
        loss = net.sgd_step(x, task.targets(x), lr)
        if loss < target_loss:
            logger.debug("Teacher seed %d reached %.3g after %d steps", seed, loss, step)
            break
    else:
        if steps:
            logger.info(
                "Teacher seed %d stopped at loss %.3g after %d steps (target %.0e)",
                seed,
                loss,
                steps,
                target_loss,
            )
    return net


def _kept_channels(w: np.ndarray, keep: int) -> np.ndarray:
    """Indices of the *keep* rows with largest L2 norm, ties to the lower index."""
    norms = np.linalg.norm(w, axis=1)
    order = np.lexsort((np.arange(len(norms)), -norms))
    return np.sort(order[:keep])


def prune_channels(net: ToyNet, sparsity: float) -> ToyNet:
    """Remove a fraction of every hidden layer's channels by row norm."""
    sparsity = float(sparsity)
    if not 0 <= sparsity < 1:
        raise PruningError("Sparsity must lie in [0, 1)", sparsity=sparsity)

    weights = [w.copy() for w in net.weights]
    biases = [b.copy() for b in net.biases]
    for i in range(len(weights) - 1):
        width = net.weights[i].shape[0]
        keep = math.ceil((1.0 - sparsity) * width)
        if keep < 1:
            raise PruningError("Pruning leaves no channels", sparsity=sparsity, layer=i)
        kept = _kept_channels(net.weights[i], keep)
        weights[i] = weights[i][kept]
        biases[i] = biases[i][kept]
        weights[i + 1] = weights[i + 1][:, kept]
    pruned = ToyNet(weights, biases, net.slope)
    logger.debug("Pruned %s to %s at sparsity %.2f", net.dims, pruned.dims, sparsity)
    return pruned


def gradient_check(
    net: ToyNet,
    x: np.ndarray,
    y: np.ndarray,
    probes: int = 10,
    h: float = 1e-5,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative gap between analytic and central-difference gradients.

    The relative gap of one parameter is |g - n| / max(|g|, |n|, 1e-4).
    """
    rng = rng or np.random.default_rng(0)
    _, grad_w, grad_b = net.gradients(x, y)
    params = [*net.weights, *net.biases]
    grads = [*grad_w, *grad_b]
    sizes = np.array([p.size for p in params])
    worst = 0.0
    for _ in range(probes):
        k = int(rng.choice(len(params), p=sizes / sizes.sum()))
        idx = np.unravel_index(int(rng.integers(params[k].size)), params[k].shape)
        original = params[k][idx]
        params[k][idx] = original + h
        up = net.loss(x, y)
        params[k][idx] = original - h
        down = net.loss(x, y)
        params[k][idx] = original
        numeric = (up - down) / (2.0 * h)
        analytic = float(grads[k][idx])
        scale = max(abs(analytic), abs(numeric), 1e-4)
        worst = max(worst, abs(analytic - numeric) / scale)
    return worst
