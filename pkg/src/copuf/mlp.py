"""
From-scratch multilayer perceptron: tanh hidden layers, sigmoid output,
binary cross-entropy loss, adaptive-moment mini-batch gradient descent.

Everything runs on float64 numpy.  A training run is logically
sequential: the mini-batch order is fixed by the config seed, so a run is
reproducible bit for bit on a fixed BLAS configuration.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


def hidden_sizes(l: int) -> tuple[int, int, int]:
    """The three hidden widths (2^(l-1), 2^l, 2^(l-1)) for a size index l."""
    if l < 1:
        raise ValueError(f"size index must be >= 1, got {l}")
    return (2 ** (l - 1), 2 ** l, 2 ** (l - 1))


def choose_l(arch: str, k: int = 0, x: int = 0, y: int = 0, z: int = 0,
             variant: str = "default") -> int:
    """Architecture-specific size index for the hidden layers.

    Defaults follow the strongest published settings; named variants
    expose the alternatives:

    - ``ff``:      k + 1
    - ``mn``:      4 (one main plus three auxiliary chains)
    - ``xor-ff``:  z + k + 1, variant ``"low"`` gives z + k
    - ``oax-ff``:  x + y + z + k + 1, variants ``"low"`` x+y+z+k and
                   ``"xy"`` x + y + k - 1
    - ``ipuf``:    ceil(x/2 + y), variants ``"plus1"`` / ``"minus1"``
    - ``apuf``:    1
    """
    if arch == "apuf":
        return 1
    if arch == "ff":
        return k + 1
    if arch == "mn":
        return 4
    if arch == "xor-ff":
        return {"default": z + k + 1, "low": z + k}[variant]
    if arch == "oax-ff":
        return {
            "default": x + y + z + k + 1,
            "low": x + y + z + k,
            "xy": x + y + k - 1,
        }[variant]
    if arch == "ipuf":
        base = math.ceil(x / 2 + y)
        return {"default": base, "plus1": base + 1, "minus1": base - 1}[variant]
    raise ValueError(f"unknown architecture {arch!r}")


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden: tuple[int, ...]
    epochs: int = 100
    batch_size: int = 20
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    keep_best: bool = True  # retain the best-validation weights

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be positive: {self.hidden}")
        object.__setattr__(self, "hidden", tuple(self.hidden))

    def with_overrides(self, **kw) -> "MlpConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


class MlpModel:
    """Dense network input -> hidden (tanh each) -> 1 (sigmoid)."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(W, dtype=np.float64) for W in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for (Wa, Wb) in zip(self.weights[:-1], self.weights[1:]):
            if Wa.shape[1] != Wb.shape[0]:
                raise ValueError("layer shapes do not chain")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    def copy(self) -> "MlpModel":
        return MlpModel([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def parameters(self):
        for W, b in zip(self.weights, self.biases):
            yield W
            yield b

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Output probabilities, shape (N,)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.weights[0].shape[0]:
            raise ValueError(
                f"feature dim {X.shape[1]} does not match input dim {self.weights[0].shape[0]}"
            )
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ W + b)
        logit = h @ self.weights[-1] + self.biases[-1]
        return _sigmoid(logit[:, 0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Hard decisions; a probability of exactly 0.5 predicts 1."""
        return (self.forward(X) >= 0.5).astype(np.uint8)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_model(cfg: MlpConfig) -> MlpModel:
    """Fan-scaled symmetric uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(cfg.seed)
    dims = (cfg.input_dim,) + cfg.hidden + (1,)
    weights, biases = [], []
    for a, b in zip(dims[:-1], dims[1:]):
        lim = math.sqrt(6.0 / (a + b))
        weights.append(rng.uniform(-lim, lim, (a, b)))
        biases.append(np.zeros(b))
    return MlpModel(weights, biases)


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())


def _forward_cached(model: MlpModel, X: np.ndarray):
    acts = [X]
    h = X
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.tanh(h @ W + b)
        acts.append(h)
    logit = h @ model.weights[-1] + model.biases[-1]
    return _sigmoid(logit[:, 0]), acts


def backprop(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Mean-BCE gradients for every parameter.

    With sigmoid output and cross-entropy loss the output-logit gradient
    is (p - y) / N; hidden deltas follow through the tanh derivatives.
    Returns (loss, [(dW, db), ...]).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    p, acts = _forward_cached(model, X)
    loss = bce_loss(p, y)
    delta = ((p - y) / X.shape[0])[:, None]
    grads = [None] * len(model.weights)
    for li in range(len(model.weights) - 1, -1, -1):
        grads[li] = (acts[li].T @ delta, delta.sum(axis=0))
        if li > 0:
            delta = (delta @ model.weights[li].T) * (1.0 - acts[li] ** 2)
    return loss, grads


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = -1.0
    wall_seconds: float = 0.0


def train_arrays(
    model: MlpModel,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    cfg: MlpConfig,
) -> tuple[MlpModel, TrainHistory]:
    """Adam mini-batch training on feature arrays.

    After every epoch the validation accuracy is computed; with
    ``keep_best`` the parameters with the best validation accuracy seen
    are returned (otherwise the final-epoch parameters).
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64).reshape(-1)
    rng = np.random.default_rng([cfg.seed, 1])
    m = [np.zeros_like(p) for p in model.parameters()]
    v = [np.zeros_like(p) for p in model.parameters()]
    t = 0
    hist = TrainHistory()
    best = model.copy()
    started = time.perf_counter()
    N = X_train.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(N)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, N, cfg.batch_size):
            idx = order[lo: lo + cfg.batch_size]
            loss, grads = backprop(model, X_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            epoch_loss += loss
            n_batches += 1
            t += 1
            bc1 = 1.0 - cfg.beta1 ** t
            bc2 = 1.0 - cfg.beta2 ** t
            pi = 0
            for li, (dW, db) in enumerate(grads):
                for param, g in ((model.weights[li], dW), (model.biases[li], db)):
                    m[pi] = cfg.beta1 * m[pi] + (1 - cfg.beta1) * g
                    v[pi] = cfg.beta2 * v[pi] + (1 - cfg.beta2) * (g * g)
                    param -= cfg.learning_rate * (m[pi] / bc1) / (np.sqrt(v[pi] / bc2) + cfg.eps)
                    pi += 1
        hist.train_loss.append(epoch_loss / max(n_batches, 1))
        val_acc = accuracy(model, X_val, y_val)
        hist.val_accuracy.append(val_acc)
        if val_acc > hist.best_val_accuracy:
            hist.best_val_accuracy = val_acc
            hist.best_epoch = epoch
            best = model.copy()
    hist.wall_seconds = time.perf_counter() - started
    return (best if cfg.keep_best else model), hist


def accuracy(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    """Fraction of rows whose hard decision matches the label."""
    y = np.asarray(y).reshape(-1)
    if y.size == 0:
        raise ValueError("empty evaluation set")
    return float((model.predict(X) == y.astype(np.uint8)).mean())


def gradient_check(model: MlpModel, X: np.ndarray, y: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error between analytic and central finite-difference
    gradients over all parameters, on a small batch."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    _, grads = backprop(model, X, y)
    flat_grads = [g for pair in grads for g in pair]
    worst = 0.0
    for param, analytic in zip(model.parameters(), flat_grads):
        it = np.nditer(param, flags=["multi_index"])
        while not it.finished:
            ix = it.multi_index
            orig = param[ix]
            param[ix] = orig + step
            lo_p = bce_loss(model.forward(X), y)
            param[ix] = orig - step
            lo_m = bce_loss(model.forward(X), y)
            param[ix] = orig
            numeric = (lo_p - lo_m) / (2 * step)
            a = analytic[ix]
            denom = max(abs(a) + abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
            it.iternext()
    return worst
