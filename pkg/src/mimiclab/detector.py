"""Per-AU linear classifier bank over the image feature vector.

Each of the 20 supported action units gets its own regularized logistic
regression on the standardized feature vector.  The heads are trained jointly
for speed but remain mathematically independent: each head minimizes its own
mean binary cross-entropy plus an L2 penalty on its weights (the bias is not
penalized).

Model files are JSON with a format tag and version; weight arrays are base64
of little-endian float64 bytes, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ActionUnit, AuSet, MimicLabError

MODEL_FORMAT = "au-linear-model"
MODEL_VERSION = 1

AUS_IN_ORDER: tuple[ActionUnit, ...] = tuple(sorted(ActionUnit))
N_HEADS = len(AUS_IN_ORDER)


class DimensionMismatch(MimicLabError):
    """Feature vector length differs from the model's expectation."""


class DegenerateData(MimicLabError):
    """A training column has only one label value for some AU."""


class BadModelFile(MimicLabError):
    """A model file that cannot be loaded, with a diagnostic message."""


@dataclass(frozen=True)
class AuModel:
    """Trained detector bank.

    ``weights`` is (20, D) and ``biases``/``thresholds`` are (20,), with rows
    ordered by ascending AU code.  ``mean``/``std`` standardize incoming
    features; zero-variance training features are stored with std 1 and their
    weights forced to zero, so they can never influence a prediction.
    """

    feature_dim: int
    weights: np.ndarray
    biases: np.ndarray
    thresholds: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.weights.shape != (N_HEADS, self.feature_dim):
            raise MimicLabError(f"weights shape {self.weights.shape} does not match "
                                f"({N_HEADS}, {self.feature_dim})")
        for name in ("biases", "thresholds"):
            if getattr(self, name).shape != (N_HEADS,):
                raise MimicLabError(f"{name} must have shape ({N_HEADS},)")
        for name in ("mean", "std"):
            if getattr(self, name).shape != (self.feature_dim,):
                raise MimicLabError(f"{name} must have shape ({self.feature_dim},)")
        if not np.all((self.thresholds > 0.0) & (self.thresholds < 1.0)):
            raise MimicLabError("thresholds must lie strictly inside (0, 1)")
        if not np.all(self.std > 0.0):
            raise MimicLabError("std entries must be positive")

    def with_thresholds(self, per_au: dict[ActionUnit, float]) -> "AuModel":
        thresholds = self.thresholds.copy()
        for au, value in per_au.items():
            thresholds[AUS_IN_ORDER.index(au)] = value
        return AuModel(self.feature_dim, self.weights, self.biases,
                       thresholds, self.mean, self.std)


@dataclass
class AuTrainingSet:
    """Feature matrix (n, D) with per-AU boolean labels (n, 20)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.features.ndim != 2:
            raise MimicLabError("features must be a 2-d matrix")
        if self.labels.shape != (self.features.shape[0], N_HEADS):
            raise MimicLabError(
                f"labels shape {self.labels.shape} does not match "
                f"({self.features.shape[0]}, {N_HEADS})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce_from_logits(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # max(z, 0) - z*y + log(1 + exp(-|z|)), columnwise mean
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return per.mean(axis=0)


def loss_and_gradients(
    weights: np.ndarray,
    biases: np.ndarray,
    features_std: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-head loss (mean BCE + l2/2 * ||w||^2) and its exact gradients.

    ``weights`` is (H, D); ``features_std`` is the already-standardized
    (n, D) matrix.  Returns (loss (H,), dW (H, D), db (H,)).
    """
    y = labels.astype(np.float64)
    z = features_std @ weights.T + biases  # (n, H)
    p = _sigmoid(z)
    n = features_std.shape[0]
    loss = _bce_from_logits(z, y) + 0.5 * l2 * np.sum(weights * weights, axis=1)
    residual = (p - y) / n  # (n, H)
    dW = residual.T @ features_std + l2 * weights
    db = residual.sum(axis=0)
    return loss, dW, db


def train(
    data: AuTrainingSet,
    l2: float = 1e-3,
    lr: float = 0.5,
    epochs: int = 300,
    seed: int = 0,
) -> tuple[AuModel, np.ndarray]:
    """Fit all 20 heads with full-batch gradient descent.

    Deterministic for a fixed seed (used only for the tiny weight
    initialization).  Every AU column must contain at least one positive and
    one negative example.  Returns the model and the final per-AU losses.
    """
    ones = data.labels.all(axis=0)
    zeros = (~data.labels).all(axis=0)
    bad = [AUS_IN_ORDER[i].code for i in range(N_HEADS) if ones[i] or zeros[i]]
    if bad:
        raise DegenerateData(f"single-class label column for AU codes {bad}")

    mean = data.features.mean(axis=0)
    std = data.features.std(axis=0)
    constant = std == 0.0
    std = np.where(constant, 1.0, std)
    xs = (data.features - mean) / std

    rng = np.random.Generator(np.random.PCG64(seed))
    weights = rng.uniform(-0.01, 0.01, size=(N_HEADS, data.dim))
    weights[:, constant] = 0.0
    biases = np.zeros(N_HEADS)

    loss = np.empty(N_HEADS)
    for _ in range(epochs):
        loss, dW, db = loss_and_gradients(weights, biases, xs, data.labels, l2)
        weights -= lr * dW
        biases -= lr * db
    loss, _, _ = loss_and_gradients(weights, biases, xs, data.labels, l2)

    weights[:, constant] = 0.0
    model = AuModel(
        feature_dim=data.dim,
        weights=weights,
        biases=biases,
        thresholds=np.full(N_HEADS, 0.5),
        mean=mean,
        std=std,
    )
    return model, loss


def predict_probabilities(model: AuModel, features: np.ndarray) -> np.ndarray:
    """Per-AU activation probabilities for one feature vector, AU-code order."""
    f = np.asarray(features, dtype=np.float64).reshape(-1)
    if f.shape[0] != model.feature_dim:
        raise DimensionMismatch(
            f"expected {model.feature_dim} features, got {f.shape[0]}")
    xs = (f - model.mean) / model.std
    return _sigmoid(model.weights @ xs + model.biases)


def detect_aus(model: AuModel, features: np.ndarray) -> AuSet:
    """Threshold the probabilities into an AU set (inclusive: p >= t fires)."""
    probs = predict_probabilities(model, features)
    return frozenset(au for au, p, t in zip(AUS_IN_ORDER, probs, model.thresholds)
                     if p >= t)


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode(text: str, length: int, what: str) -> np.ndarray:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as exc:
        raise BadModelFile(f"{what}: invalid base64 payload ({exc})") from exc
    arr = np.frombuffer(raw, dtype="<f8")
    if arr.shape[0] != length:
        raise BadModelFile(f"{what}: expected {length} values, found {arr.shape[0]}")
    return arr.astype(np.float64)


def save_model(model: AuModel, path: str | Path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "feature_dim": model.feature_dim,
        "standardize": {"mean": _encode(model.mean), "std": _encode(model.std)},
        "heads": [
            {
                "au": au.code,
                "threshold": float(model.thresholds[i]),
                "bias": float(model.biases[i]),
                "weights": _encode(model.weights[i]),
            }
            for i, au in enumerate(AUS_IN_ORDER)
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_model(path: str | Path) -> AuModel:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BadModelFile(f"{p}: unreadable model file ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise BadModelFile(f"{p}: expected format {MODEL_FORMAT!r}, "
                           f"found {doc.get('format')!r}" if isinstance(doc, dict)
                           else f"{p}: not a model document")
    if doc.get("version") != MODEL_VERSION:
        raise BadModelFile(f"{p}: expected version {MODEL_VERSION}, "
                           f"found {doc.get('version')!r}")
    try:
        dim = int(doc["feature_dim"])
        mean = _decode(doc["standardize"]["mean"], dim, "standardize.mean")
        std = _decode(doc["standardize"]["std"], dim, "standardize.std")
        heads = doc["heads"]
    except KeyError as exc:
        raise BadModelFile(f"{p}: missing field {exc}") from exc
    if [h.get("au") for h in heads] != [au.code for au in AUS_IN_ORDER]:
        raise BadModelFile(f"{p}: head list must cover the 20 supported AUs "
                           "in ascending code order")
    weights = np.empty((N_HEADS, dim))
    biases = np.empty(N_HEADS)
    thresholds = np.empty(N_HEADS)
    for i, head in enumerate(heads):
        try:
            weights[i] = _decode(head["weights"], dim, f"heads[{i}].weights")
            biases[i] = float(head["bias"])
            thresholds[i] = float(head["threshold"])
        except KeyError as exc:
            raise BadModelFile(f"{p}: head {i} missing field {exc}") from exc
    try:
        return AuModel(dim, weights, biases, thresholds, mean, std)
    except MimicLabError as exc:
        raise BadModelFile(f"{p}: {exc}") from exc
