"""Small convolutional classifier, trained from scratch with exact
hand-written gradients (no autodiff).

Architecture: four 3x3 same-padding conv layers (32, 32, 64, 64 filters by
default), ReLU after each, 2x2 max-pooling after the first three, flatten
after the fourth, a 96-unit ReLU dense layer, and six sigmoid output units
trained with mean binary cross-entropy.  A 48x48 input therefore flattens to
6 * 6 * 64 = 2304 values.

Layer functions follow the (out, cache) / (dx, dw, db) convention so each can
be finite-difference checked in isolation.  Tensors are (N, C, H, W) float64.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import MimicLabError

DEFAULT_FILTERS = (32, 32, 64, 64)
DEFAULT_HIDDEN = 96
N_CLASSES = 6

CNN_FORMAT = "fer-cnn"
CNN_VERSION = 1


class BadInputSize(MimicLabError):
    """Input side length must be a positive multiple of 8 (three 2x2 pools)."""


class ShapeMismatch(MimicLabError):
    """A batch whose shape does not match the model."""


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padding 3x3 convolution, stride 1.

    x: (N, C, H, W), w: (F, C, 3, 3), b: (F,) -> out: (N, F, H, W)
    """
    n, c, h, wid = x.shape
    f = w.shape[0]
    if w.shape[1] != c:
        raise ShapeMismatch(f"conv expects {w.shape[1]} input channels, got {c}")
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, f, h, wid))
    for i in range(3):
        for j in range(3):
            patch = xp[:, :, i:i + h, j:j + wid]
            out += np.einsum("nchw,fc->nfhw", patch, w[:, :, i, j], optimize=True)
    out += b[None, :, None, None]
    return out, (x, w)


def conv3x3_backward(dout: np.ndarray, cache):
    x, w = cache
    n, c, h, wid = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for i in range(3):
        for j in range(3):
            patch = xp[:, :, i:i + h, j:j + wid]
            dw[:, :, i, j] = np.einsum("nfhw,nchw->fc", dout, patch, optimize=True)
            dxp[:, :, i:i + h, j:j + wid] += np.einsum(
                "nfhw,fc->nchw", dout, w[:, :, i, j], optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    return dxp[:, :, 1:-1, 1:-1], dw, db


def maxpool2_forward(x: np.ndarray):
    """2x2 max pooling, stride 2.  Ties resolve to the first maximum."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch(f"pooling needs even spatial dims, got {h}x{w}")
    xr = (x.reshape(n, c, h // 2, 2, w // 2, 2)
           .transpose(0, 1, 2, 4, 3, 5)
           .reshape(n, c, h // 2, w // 2, 4))
    arg = xr.argmax(axis=4)
    out = np.take_along_axis(xr, arg[..., None], axis=4)[..., 0]
    return out, (x.shape, arg)


def maxpool2_backward(dout: np.ndarray, cache):
    shape, arg = cache
    n, c, h, w = shape
    dxr = np.zeros((n, c, h // 2, w // 2, 4))
    np.put_along_axis(dxr, arg[..., None], dout[..., None], axis=4)
    return (dxr.reshape(n, c, h // 2, w // 2, 2, 2)
               .transpose(0, 1, 2, 4, 3, 5)
               .reshape(n, c, h, w))


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0.0), x


def relu_backward(dout: np.ndarray, cache):
    return dout * (cache > 0)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x: (N, D), w: (D, M), b: (M,) -> out: (N, M)"""
    if x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"dense expects {w.shape[0]} inputs, got {x.shape[1]}")
    return x @ w + b, (x, w)


def dense_backward(dout: np.ndarray, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_bce_loss(logits: np.ndarray, targets: np.ndarray):
    """Mean binary cross-entropy over every (sample, output) entry, computed
    from logits for numerical stability.  Returns (loss, dlogits)."""
    y = targets.astype(np.float64)
    per = np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits)))
    dlogits = (sigmoid(logits) - y) / logits.size
    return per.mean(), dlogits


@dataclass
class CnnModel:
    input_size: int
    filters: tuple[int, int, int, int]
    hidden: int
    n_classes: int
    params: dict[str, np.ndarray]

    @classmethod
    def build(
        cls,
        input_size: int = 48,
        seed: int = 0,
        filters: tuple[int, int, int, int] = DEFAULT_FILTERS,
        hidden: int = DEFAULT_HIDDEN,
        n_classes: int = N_CLASSES,
    ) -> "CnnModel":
        """He-uniform initialization, deterministic for a fixed seed."""
        if input_size <= 0 or input_size % 8 != 0:
            raise BadInputSize(f"input size must be a positive multiple of 8, "
                               f"got {input_size}")
        rng = np.random.Generator(np.random.PCG64(seed))

        def he(shape, fan_in):
            limit = np.sqrt(6.0 / fan_in)
            return rng.uniform(-limit, limit, size=shape)

        f1, f2, f3, f4 = filters
        spatial = input_size // 8
        flat = spatial * spatial * f4
        params = {
            "w1": he((f1, 1, 3, 3), 9), "b1": np.zeros(f1),
            "w2": he((f2, f1, 3, 3), 9 * f1), "b2": np.zeros(f2),
            "w3": he((f3, f2, 3, 3), 9 * f2), "b3": np.zeros(f3),
            "w4": he((f4, f3, 3, 3), 9 * f3), "b4": np.zeros(f4),
            "w5": he((flat, hidden), flat), "b5": np.zeros(hidden),
            "w6": he((hidden, n_classes), hidden), "b6": np.zeros(n_classes),
        }
        return cls(input_size, tuple(filters), hidden, n_classes, params)

    @property
    def flatten_length(self) -> int:
        spatial = self.input_size // 8
        return spatial * spatial * self.filters[3]

    def _check_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 3:
            x = x[:, None, :, :]
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[2] != self.input_size \
                or x.shape[3] != self.input_size:
            raise ShapeMismatch(
                f"expected (N, 1, {self.input_size}, {self.input_size}) input, "
                f"got {x.shape}")
        return x

    def logits_with_caches(self, x: np.ndarray):
        p = self.params
        caches = {}
        out, caches["c1"] = conv3x3_forward(x, p["w1"], p["b1"])
        out, caches["r1"] = relu_forward(out)
        out, caches["p1"] = maxpool2_forward(out)
        out, caches["c2"] = conv3x3_forward(out, p["w2"], p["b2"])
        out, caches["r2"] = relu_forward(out)
        out, caches["p2"] = maxpool2_forward(out)
        out, caches["c3"] = conv3x3_forward(out, p["w3"], p["b3"])
        out, caches["r3"] = relu_forward(out)
        out, caches["p3"] = maxpool2_forward(out)
        out, caches["c4"] = conv3x3_forward(out, p["w4"], p["b4"])
        out, caches["r4"] = relu_forward(out)
        caches["flat_shape"] = out.shape
        flat = out.reshape(out.shape[0], -1)
        hid, caches["d5"] = dense_forward(flat, p["w5"], p["b5"])
        hid, caches["r5"] = relu_forward(hid)
        logits, caches["d6"] = dense_forward(hid, p["w6"], p["b6"])
        return logits, caches

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Per-class sigmoid activations, shape (N, n_classes)."""
        logits, _ = self.logits_with_caches(self._check_batch(x))
        return sigmoid(logits)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Class ids by the most activated output unit."""
        return self.forward(x).argmax(axis=1)

    def loss_and_grads(self, x: np.ndarray, targets: np.ndarray):
        """Mean sigmoid-BCE loss and exact gradients for every parameter."""
        x = self._check_batch(x)
        logits, caches = self.logits_with_caches(x)
        loss, dlogits = sigmoid_bce_loss(logits, targets)
        grads: dict[str, np.ndarray] = {}
        dhid, grads["w6"], grads["b6"] = dense_backward(dlogits, caches["d6"])
        dhid = relu_backward(dhid, caches["r5"])
        dflat, grads["w5"], grads["b5"] = dense_backward(dhid, caches["d5"])
        dout = dflat.reshape(caches["flat_shape"])
        dout = relu_backward(dout, caches["r4"])
        dout, grads["w4"], grads["b4"] = conv3x3_backward(dout, caches["c4"])
        dout = maxpool2_backward(dout, caches["p3"])
        dout = relu_backward(dout, caches["r3"])
        dout, grads["w3"], grads["b3"] = conv3x3_backward(dout, caches["c3"])
        dout = maxpool2_backward(dout, caches["p2"])
        dout = relu_backward(dout, caches["r2"])
        dout, grads["w2"], grads["b2"] = conv3x3_backward(dout, caches["c2"])
        dout = maxpool2_backward(dout, caches["p1"])
        dout = relu_backward(dout, caches["r1"])
        _, grads["w1"], grads["b1"] = conv3x3_backward(dout, caches["c1"])
        return loss, grads


def one_hot(labels: np.ndarray, n_classes: int = N_CLASSES) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)


def accuracy(model: CnnModel, images: np.ndarray, labels: np.ndarray,
             batch_size: int = 256) -> float:
    hits = 0
    for start in range(0, len(images), batch_size):
        batch = images[start:start + batch_size]
        hits += int(np.sum(model.predict(batch) == labels[start:start + batch_size]))
    return hits / len(images)


def train_cnn(
    model: CnnModel,
    images: np.ndarray,
    labels: np.ndarray,
    epochs: int = 10,
    lr: float = 0.05,
    batch_size: int = 32,
    seed: int = 0,
) -> TrainHistory:
    """Mini-batch SGD with a seeded per-epoch shuffle.

    Deterministic for fixed inputs and seed; lr = 0 leaves the parameters
    untouched.  History holds full-pass loss and accuracy after each epoch.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise MimicLabError("cannot train on an empty dataset")
    targets = one_hot(labels, model.n_classes)
    rng = np.random.Generator(np.random.PCG64(seed))
    history = TrainHistory()
    for _ in range(epochs):
        order = rng.permutation(len(images))
        for start in range(0, len(images), batch_size):
            idx = order[start:start + batch_size]
            _, grads = model.loss_and_grads(images[idx], targets[idx])
            for key, grad in grads.items():
                model.params[key] -= lr * grad
        logits_loss = 0.0
        for start in range(0, len(images), 256):
            sl = slice(start, start + 256)
            logits, _ = model.logits_with_caches(model._check_batch(images[sl]))
            loss, _ = sigmoid_bce_loss(logits, targets[sl])
            logits_loss += loss * (min(start + 256, len(images)) - start)
        history.losses.append(logits_loss / len(images))
        history.accuracies.append(accuracy(model, images, labels))
    return history


def _encode(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape),
            "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode()}


def _decode(doc: dict) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(doc["data"]), dtype="<f8")
    return arr.reshape(doc["shape"]).astype(np.float64)


def save_cnn(model: CnnModel, path: str | Path) -> None:
    doc = {
        "format": CNN_FORMAT,
        "version": CNN_VERSION,
        "input_size": model.input_size,
        "filters": list(model.filters),
        "hidden": model.hidden,
        "n_classes": model.n_classes,
        "params": {k: _encode(v) for k, v in model.params.items()},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_cnn(path: str | Path) -> CnnModel:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MimicLabError(f"{p}: unreadable model file ({exc})") from exc
    if doc.get("format") != CNN_FORMAT or doc.get("version") != CNN_VERSION:
        raise MimicLabError(f"{p}: expected {CNN_FORMAT} v{CNN_VERSION}, found "
                            f"{doc.get('format')!r} v{doc.get('version')!r}")
    return CnnModel(
        input_size=int(doc["input_size"]),
        filters=tuple(doc["filters"]),
        hidden=int(doc["hidden"]),
        n_classes=int(doc["n_classes"]),
        params={k: _decode(v) for k, v in doc["params"].items()},
    )
