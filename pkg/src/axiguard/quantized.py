"""Quantization-aware training and bit-exact fixed-point inference.

The forward pass sees weights snapped to the target fixed-point grid while
Adam updates full-precision shadow weights (straight-through estimator).
Magnitude pruning ramps linearly to the sparsity target by half the epochs,
then the masks freeze.  Deployed inference is integer multiply-accumulate:
weights in the weight format, activations in the activation format, biases
pre-scaled to the accumulator grid, and a 256-entry interpolated sigmoid on
the output.  The int64 accumulator comfortably exceeds the required
2W + log2(fan-in) bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, FormatError, NumericError, SchemaError
from .fixedpoint import (FixedFormat, dequantize, quantize_dequantize,
                         quantize_value, rshift_round_even, sigmoid_lut)
from .mlp import (ADAM_BETA1, ADAM_BETA2, ADAM_EPS, MODEL_VERSION, MlpModel,
                  _sigmoid, init_model)

DEFAULT_ACTIVATION_FORMAT = FixedFormat(16, 8)


def activation_format_for(fmt: FixedFormat) -> FixedFormat:
    """Datapath format implied by a weight quantization level.

    The deployed datapath is twice the weight width with three extra
    integer bits, which lands on <16,8> for the reference <8,5> level and
    shrinks proportionally for narrower levels.
    """
    total = min(2 * fmt.total_bits, 32)
    integer = min(fmt.integer_bits + 3, total)
    return FixedFormat(total, integer)


@dataclass
class QuantizedMlpModel:
    """Same topology as the float model, stored as fixed-point integers.

    Bias codes live on the accumulator grid 2^-(Fw+Fa) so the integer MAC
    can add them directly.
    """

    weight_codes: list
    bias_codes: list
    weight_format: FixedFormat
    activation_format: FixedFormat = DEFAULT_ACTIVATION_FORMAT
    prune_masks: Optional[list] = None
    training_meta: dict = field(default_factory=dict)

    @property
    def layer_dims(self) -> list:
        return [self.weight_codes[0].shape[1]] + [
            w.shape[0] for w in self.weight_codes]

    @property
    def sparsity(self) -> float:
        zeros = sum(int((w == 0).sum()) for w in self.weight_codes)
        total = sum(w.size for w in self.weight_codes)
        return zeros / total

    def float_weights(self) -> list:
        return [dequantize(w, self.weight_format) for w in self.weight_codes]

    def float_biases(self) -> list:
        acc_step = 2.0 ** -(self.weight_format.frac_bits
                            + self.activation_format.frac_bits)
        return [b * acc_step for b in self.bias_codes]

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        """Integer multiply-accumulate path; bit-stable for fixed inputs."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.weight_codes[0].shape[1]:
            raise DimensionError(
                f"input dim {X.shape[1]}, model expects "
                f"{self.weight_codes[0].shape[1]}")
        fw = self.weight_format.frac_bits
        fa = self.activation_format.frac_bits
        a = quantize_value(X, self.activation_format)
        for w, b in zip(self.weight_codes[:-1], self.bias_codes[:-1]):
            acc = a @ w.T + b              # scale 2^-(fw+fa)
            acc = np.maximum(acc, 0)
            a = rshift_round_even(acc, fw)  # back to activation scale
            a = np.clip(a, self.activation_format.code_min,
                        self.activation_format.code_max)
        acc = a @ self.weight_codes[-1].T + self.bias_codes[-1]
        z = acc[:, 0].astype(np.float64) * 2.0 ** -(fw + fa)
        return sigmoid_lut(z)

    def reference_scores(self, X: np.ndarray) -> np.ndarray:
        """Float-arithmetic forward over the dequantized weights; the
        integer path is checked for decision agreement against this."""
        ref = MlpModel(weights=self.float_weights(),
                       biases=self.float_biases())
        return ref.predict_scores(X)

    def to_json(self) -> str:
        doc = {
            "version": MODEL_VERSION,
            "kind": "quantized",
            "layer_dims": self.layer_dims,
            "weight_format": [self.weight_format.total_bits,
                              self.weight_format.integer_bits],
            "activation_format": [self.activation_format.total_bits,
                                  self.activation_format.integer_bits],
            "weight_codes": [w.tolist() for w in self.weight_codes],
            "bias_codes": [b.tolist() for b in self.bias_codes],
            "prune_masks": (None if self.prune_masks is None else
                            [m.astype(int).tolist()
                             for m in self.prune_masks]),
            "sparsity": self.sparsity,
            "training_meta": self.training_meta,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "QuantizedMlpModel":
        doc = json.loads(text)
        if (doc.get("version") != MODEL_VERSION
                or doc.get("kind") != "quantized"):
            raise SchemaError("not a supported quantized model file")
        return cls(
            weight_codes=[np.array(w, dtype=np.int64)
                          for w in doc["weight_codes"]],
            bias_codes=[np.array(b, dtype=np.int64)
                        for b in doc["bias_codes"]],
            weight_format=FixedFormat(*doc["weight_format"]),
            activation_format=FixedFormat(*doc["activation_format"]),
            prune_masks=(None if doc["prune_masks"] is None else
                         [np.array(m, dtype=bool)
                          for m in doc["prune_masks"]]),
            training_meta=doc["training_meta"])

    def save(self, path: str) -> str:
        with open(path, "w") as f:
            f.write(self.to_json())
        return path

    @classmethod
    def load(cls, path: str) -> "QuantizedMlpModel":
        with open(path) as f:
            return cls.from_json(f.read())


def _masks_for_sparsity(weights: list, sparsity: float) -> list:
    """Global magnitude threshold over all weight matrices."""
    if sparsity <= 0.0:
        return [np.ones_like(w, dtype=bool) for w in weights]
    magnitudes = np.concatenate([np.abs(w).ravel() for w in weights])
    k = int(round(sparsity * magnitudes.size))
    k = min(max(k, 0), magnitudes.size - 1)
    threshold = np.partition(magnitudes, k)[k]
    return [np.abs(w) > threshold for w in weights]


def _qat_loss_and_grads(weights: list, biases: list, X: np.ndarray,
                        y: np.ndarray, l2: float, act_fmt: FixedFormat):
    """Forward/backward with activations snapped to the datapath grid.

    The quantizer gradient is a clipped straight-through estimate: identity
    inside the representable range, zero where the value saturated.
    """
    n = X.shape[0]
    a = np.asarray(quantize_dequantize(X, act_fmt))
    activations = [a]
    sat_masks = []
    for w, b in zip(weights[:-1], biases[:-1]):
        z = np.maximum(a @ w.T + b, 0.0)
        a = np.asarray(quantize_dequantize(z, act_fmt))
        sat_masks.append((z > 0.0) & (z < act_fmt.max_value))
        activations.append(a)
    z_out = a @ weights[-1].T + biases[-1]
    p = _sigmoid(z_out[:, 0])
    p_safe = np.clip(p, 1e-12, 1.0 - 1e-12)
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
            delta = (delta @ weights[layer]) * sat_masks[layer - 1]
    return loss, grads_w, grads_b


def train_quantized(X: np.ndarray, y: np.ndarray, fmt: FixedFormat,
                    sparsity_target: float = 0.80, l2: float = 1e-4,
                    epochs: int = 200, lr: float = 1e-3,
                    batch_size: int = 64, seed: int = 0,
                    hidden=(32, 32),
                    activation_format: Optional[FixedFormat] = None
                    ) -> QuantizedMlpModel:
    """Quantization-aware training with in-training magnitude pruning.

    When no activation format is given it follows the weight level via
    `activation_format_for`, so the whole datapath narrows together.
    """
    if activation_format is None:
        activation_format = activation_format_for(fmt)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    model = init_model(X.shape[1], hidden=hidden, seed=seed)
    shadow_w = [w.copy() for w in model.weights]
    shadow_b = [b.copy() for b in model.biases]
    masks = [np.ones_like(w, dtype=bool) for w in shadow_w]
    freeze_epoch = max(1, (epochs + 1) // 2)
    shuffle_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed & 0xFFFF_FFFF, 13])))
    m_w = [np.zeros_like(w) for w in shadow_w]
    v_w = [np.zeros_like(w) for w in shadow_w]
    m_b = [np.zeros_like(b) for b in shadow_b]
    v_b = [np.zeros_like(b) for b in shadow_b]
    step = 0
    curve = []
    n = X.shape[0]
    for epoch in range(epochs):
        if sparsity_target > 0.0:
            if epoch < freeze_epoch:
                ramp = sparsity_target * (epoch + 1) / freeze_epoch
                masks = _masks_for_sparsity(shadow_w, ramp)
            # from freeze_epoch on, masks stay exactly as they were
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            q_w = [np.asarray(dequantize(quantize_value(w, fmt), fmt)) * m
                   for w, m in zip(shadow_w, masks)]
            q_b = [np.asarray(dequantize(quantize_value(b, fmt), fmt))
                   for b in shadow_b]
            loss, gw, gb = _qat_loss_and_grads(q_w, q_b, X[idx], y[idx], l2,
                                               activation_format)
            if not np.isfinite(loss):
                raise NumericError("training loss became non-finite",
                                   epoch=epoch)
            epoch_loss += loss
            batches += 1
            step += 1
            c1 = 1.0 - ADAM_BETA1 ** step
            c2 = 1.0 - ADAM_BETA2 ** step
            for layer in range(len(shadow_w)):
                # straight-through: gradients at the quantized point update
                # the full-precision shadow parameters
                for g, p, m, v in ((gw[layer], shadow_w[layer], m_w[layer],
                                    v_w[layer]),
                                   (gb[layer], shadow_b[layer], m_b[layer],
                                    v_b[layer])):
                    m *= ADAM_BETA1
                    m += (1.0 - ADAM_BETA1) * g
                    v *= ADAM_BETA2
                    v += (1.0 - ADAM_BETA2) * g * g
                    p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        curve.append(epoch_loss / max(batches, 1))
    weight_codes = [np.asarray(quantize_value(w, fmt), dtype=np.int64) * m
                    for w, m in zip(shadow_w, masks)]
    if all(int(np.abs(w).max(initial=0)) == 0 for w in weight_codes):
        raise FormatError(
            f"format {fmt} cannot represent any nonzero trained weight")
    # biases ride on the accumulator grid, which contains the weight grid
    # exactly, so deployment sees the very values training trained against
    acc_fmt = FixedFormat(32, 32 - fmt.frac_bits
                          - activation_format.frac_bits)
    bias_codes = [np.asarray(quantize_value(
        dequantize(quantize_value(b, fmt), fmt), acc_fmt), dtype=np.int64)
        for b in shadow_b]
    meta = {"seed": seed, "epochs": epochs, "lr": lr, "l2": l2,
            "batch_size": batch_size, "sparsity_target": sparsity_target,
            "loss_curve": curve, "freeze_epoch": freeze_epoch}
    return QuantizedMlpModel(
        weight_codes=weight_codes, bias_codes=bias_codes, weight_format=fmt,
        activation_format=activation_format,
        prune_masks=masks if sparsity_target > 0.0 else None,
        training_meta=meta)
