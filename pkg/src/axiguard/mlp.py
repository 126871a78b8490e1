"""Binary MLP classifier trained from scratch: 2x32 ReLU hidden layers,
sigmoid output, Adam on binary cross-entropy with L2 weight decay."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, NumericError, SchemaError

MODEL_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
_P_CLIP = 1e-12


@dataclass
class MlpModel:
    """Real-valued network; weights[l] has shape (fan_out, fan_in)."""

    weights: list
    biases: list
    prune_masks: Optional[list] = None
    training_meta: dict = field(default_factory=dict)

    @property
    def layer_dims(self) -> list:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.weights[0].shape[1]:
            raise DimensionError(
                f"input dim {X.shape[1]}, model expects "
                f"{self.weights[0].shape[1]}")
        a = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w.T + b, 0.0)
        z = a @ self.weights[-1].T + self.biases[-1]
        return _sigmoid(z[:, 0])

    def weight_l2_norm(self) -> float:
        return float(np.sqrt(sum((w ** 2).sum() for w in self.weights)))

    def to_json(self) -> str:
        doc = {
            "version": MODEL_VERSION,
            "kind": "float",
            "layer_dims": self.layer_dims,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "prune_masks": (None if self.prune_masks is None else
                            [m.astype(int).tolist()
                             for m in self.prune_masks]),
            "training_meta": self.training_meta,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        doc = json.loads(text)
        if doc.get("version") != MODEL_VERSION or doc.get("kind") != "float":
            raise SchemaError("not a supported float model file")
        return cls(
            weights=[np.array(w, dtype=np.float64) for w in doc["weights"]],
            biases=[np.array(b, dtype=np.float64) for b in doc["biases"]],
            prune_masks=(None if doc["prune_masks"] is None else
                         [np.array(m, dtype=bool)
                          for m in doc["prune_masks"]]),
            training_meta=doc["training_meta"])

    def save(self, path: str) -> str:
        with open(path, "w") as f:
            f.write(self.to_json())
        return path

    @classmethod
    def load(cls, path: str) -> "MlpModel":
        with open(path) as f:
            return cls.from_json(f.read())


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_model(input_dim: int, hidden: Sequence[int] = (32, 32),
               seed: int = 0) -> MlpModel:
    """Scaled-uniform fan-in initialization; deterministic per seed."""
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed & 0xFFFF_FFFF, 11])))
    dims = [input_dim, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases,
                    training_meta={"seed": seed, "epochs": 0})


def loss_and_grads(weights: list, biases: list, X: np.ndarray, y: np.ndarray,
                   l2: float):
    """Full forward/backward pass.

    Loss is mean binary cross-entropy plus l2 * sum of squared weights
    (biases unregularized); gradients are exact, which the finite-difference
    suite verifies.
    """
    n = X.shape[0]
    activations = [X]
    a = X
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ w.T + b, 0.0)
        activations.append(a)
    z = a @ weights[-1].T + biases[-1]
    p = _sigmoid(z[:, 0])
    p_safe = np.clip(p, _P_CLIP, 1.0 - _P_CLIP)
    loss = -float(np.mean(y * np.log(p_safe)
                          + (1.0 - y) * np.log(1.0 - p_safe)))
    loss += l2 * float(sum((w ** 2).sum() for w in weights))

    grads_w = [np.zeros_like(w) for w in weights]
    grads_b = [np.zeros_like(b) for b in biases]
    delta = ((p - y) / n)[:, None]
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = delta.T @ activations[layer] + 2.0 * l2 * weights[
            layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer]) * (activations[layer] > 0)
    return loss, grads_w, grads_b


def train(X: np.ndarray, y: np.ndarray, l2: float = 1e-4, epochs: int = 200,
          lr: float = 1e-3, batch_size: int = 64, seed: int = 0,
          hidden: Sequence[int] = (32, 32),
          model: Optional[MlpModel] = None) -> MlpModel:
    """Adam minibatch training; per-epoch loss curve lands in
    training_meta['loss_curve'].  Deterministic per (seed, data, config)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if model is None:
        model = init_model(X.shape[1], hidden=hidden, seed=seed)
    if X.shape[1] != model.weights[0].shape[1]:
        raise DimensionError(
            f"feature dim {X.shape[1]} does not match input layer "
            f"{model.weights[0].shape[1]}")
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    shuffle_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed & 0xFFFF_FFFF, 13])))
    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0
    curve = []
    n = X.shape[0]
    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            loss, gw, gb = loss_and_grads(weights, biases, X[idx], y[idx], l2)
            if not np.isfinite(loss):
                raise NumericError("training loss became non-finite",
                                   epoch=epoch)
            epoch_loss += loss
            batches += 1
            step += 1
            c1 = 1.0 - ADAM_BETA1 ** step
            c2 = 1.0 - ADAM_BETA2 ** step
            for layer in range(len(weights)):
                for g, p, m, v in ((gw[layer], weights[layer], m_w[layer],
                                    v_w[layer]),
                                   (gb[layer], biases[layer], m_b[layer],
                                    v_b[layer])):
                    m *= ADAM_BETA1
                    m += (1.0 - ADAM_BETA1) * g
                    v *= ADAM_BETA2
                    v += (1.0 - ADAM_BETA2) * g * g
                    p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        curve.append(epoch_loss / max(batches, 1))
    meta = {"seed": seed, "epochs": epochs, "lr": lr, "l2": l2,
            "batch_size": batch_size, "loss_curve": curve}
    return MlpModel(weights=weights, biases=biases, training_meta=meta)


def infer(model, v: np.ndarray) -> float:
    """Single-vector score in [0, 1]; pure, bit-stable for fixed inputs."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError("infer expects a single feature vector")
    return float(model.predict_scores(v[None, :])[0])
