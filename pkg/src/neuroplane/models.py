"""From-scratch classifiers: a linear soft-margin SVM and a small feedforward net.

Both are trained by seeded stochastic descent so a (data, hyper, seed) triple
reproduces the exact same model. The SVM separates the current window's
filtered features; the net regresses +/-1 brain-state targets from a flattened
window and is used to predict the state half a second ahead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .csp import SpatialFilterPair
from .signal_core import ChannelId, ensure_label, validate_channels

MODEL_FORMAT_VERSION = 1

NN_INPUT_DIM = 10
NN_HIDDEN = 10
NN_LEARNING_RATE = 0.01


@dataclass(frozen=True)
class SvmHyper:
    reg_lambda: float = 0.01
    epochs: int = 100
    seed: int = 0


@dataclass
class TrainingSet:
    """Equal-length feature vectors with +/-1 labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray([ensure_label(int(v)) for v in np.asarray(self.labels)])
        if self.features.ndim != 2:
            raise ValueError(f"features must be a 2-D array, got shape {self.features.shape}")
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels must have the same length")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")

    def __len__(self) -> int:
        return len(self.labels)

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.labels == 1)), int(np.sum(self.labels == -1))


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    hyper: SvmHyper
    zero_variance_warning: bool = False

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        self.feature_means = np.asarray(self.feature_means, dtype=float)
        self.feature_stds = np.asarray(self.feature_stds, dtype=float)
        if not (self.weights.shape == self.feature_means.shape == self.feature_stds.shape):
            raise ValueError("weights and standardization vectors must share one shape")
        if np.any(self.feature_stds <= 0):
            raise ValueError("feature stds must all be positive")


@dataclass
class FeedforwardNetModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    learning_rate: float = NN_LEARNING_RATE
    seed: int = 0

    def __post_init__(self) -> None:
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        if self.w1.shape != (NN_HIDDEN, NN_INPUT_DIM):
            raise ValueError(f"w1 must be {(NN_HIDDEN, NN_INPUT_DIM)}, got {self.w1.shape}")
        if self.b1.shape != (NN_HIDDEN,):
            raise ValueError(f"b1 must be ({NN_HIDDEN},), got {self.b1.shape}")
        if self.w2.shape != (1, NN_HIDDEN):
            raise ValueError(f"w2 must be (1, {NN_HIDDEN}), got {self.w2.shape}")


@dataclass
class AccuracyReport:
    """Per-class and overall accuracies, optionally per fold."""

    concentration_acc: float
    relaxation_acc: float
    overall_acc: float
    per_fold: list[tuple[float, float, float]] = field(default_factory=list)

    @classmethod
    def from_predictions(cls, labels: np.ndarray, predicted: np.ndarray,
                         per_fold=None) -> "AccuracyReport":
        labels = np.asarray(labels)
        predicted = np.asarray(predicted)
        conc = labels == 1
        relax = labels == -1
        conc_acc = float(np.mean(predicted[conc] == 1)) if conc.any() else 0.0
        relax_acc = float(np.mean(predicted[relax] == -1)) if relax.any() else 0.0
        overall = float(np.mean(predicted == labels))
        return cls(conc_acc, relax_acc, overall, per_fold or [])

    def table(self) -> str:
        lines = ["Fold  Concentration  Relaxation  All"]
        for i, (c, r, o) in enumerate(self.per_fold, 1):
            lines.append(f"{i:<5} {c:>12.1%} {r:>11.1%} {o:>5.1%}")
        lines.append(
            f"{'All':<5} {self.concentration_acc:>12.1%} "
            f"{self.relaxation_acc:>11.1%} {self.overall_acc:>5.1%}"
        )
        return "\n".join(lines)


def _fit_standardization(features: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    means = features.mean(axis=0)
    stds = features.std(axis=0)
    clamped = bool(np.any(stds == 0))
    stds = np.where(stds == 0, 1.0, stds)
    return means, stds, clamped


def svm_train(training: TrainingSet, hyper: SvmHyper = SvmHyper()) -> LinearSvmModel:
    """Soft-margin hinge loss minimized by seeded stochastic subgradient descent.

    Pegasos-style schedule: step 1/(lambda * t) on update t, shuffled passes
    per epoch, bias left unregularized.
    """
    n_pos, n_neg = training.class_counts()
    if n_pos == 0 or n_neg == 0:
        raise ValueError("training set must contain both classes")
    means, stds, clamped = _fit_standardization(training.features)
    z = (training.features - means) / stds
    y = training.labels.astype(float)
    rng = np.random.default_rng(hyper.seed)
    w = np.zeros(z.shape[1])
    b = 0.0
    t = 0
    for _ in range(hyper.epochs):
        for i in rng.permutation(len(z)):
            t += 1
            eta = 1.0 / (hyper.reg_lambda * t)
            if y[i] * (w @ z[i] + b) < 1.0:
                w = (1.0 - eta * hyper.reg_lambda) * w + eta * y[i] * z[i]
                b = b + eta * y[i]
            else:
                w = (1.0 - eta * hyper.reg_lambda) * w
    return LinearSvmModel(
        weights=w, bias=float(b), feature_means=means, feature_stds=stds,
        hyper=hyper, zero_variance_warning=clamped,
    )


def svm_predict(model: LinearSvmModel, x) -> tuple[int, float]:
    """Label and margin score for one feature vector. A zero score reads as -1."""
    x = np.asarray(x, dtype=float)
    if x.shape != model.weights.shape:
        raise ValueError(f"feature dim {x.shape} does not match model {model.weights.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector contains non-finite values")
    z = (x - model.feature_means) / model.feature_stds
    score = float(model.weights @ z + model.bias)
    return (1 if score > 0 else -1), score


def _nn_init(seed: int) -> FeedforwardNetModel:
    rng = np.random.default_rng(seed)
    return FeedforwardNetModel(
        w1=rng.uniform(-0.5, 0.5, (NN_HIDDEN, NN_INPUT_DIM)),
        b1=rng.uniform(-0.5, 0.5, NN_HIDDEN),
        w2=rng.uniform(-0.5, 0.5, (1, NN_HIDDEN)),
        b2=float(rng.uniform(-0.5, 0.5)),
        seed=seed,
    )


def nn_forward(model: FeedforwardNetModel, x: np.ndarray) -> float:
    h = np.tanh(model.w1 @ x + model.b1)
    return float(model.w2[0] @ h) + model.b2


def nn_loss_and_grads(model: FeedforwardNetModel, x: np.ndarray, target: float):
    """Half squared error and its gradients w.r.t. every parameter tensor."""
    pre = model.w1 @ x + model.b1
    h = np.tanh(pre)
    y = float(model.w2[0] @ h) + model.b2
    err = y - target
    loss = 0.5 * err * err
    d_w2 = err * h[None, :]
    d_b2 = err
    d_h = err * model.w2[0]
    d_pre = d_h * (1.0 - h * h)
    d_w1 = np.outer(d_pre, x)
    d_b1 = d_pre
    return loss, {"w1": d_w1, "b1": d_b1, "w2": d_w2, "b2": d_b2}


def nn_train(training: TrainingSet, lr: float = NN_LEARNING_RATE,
             epochs: int = 200, seed: int = 0) -> FeedforwardNetModel:
    """Backpropagation with per-sample updates at a fixed learning rate."""
    if training.features.shape[1] != NN_INPUT_DIM:
        raise ValueError(
            f"network input dim is {NN_INPUT_DIM}, features have {training.features.shape[1]}"
        )
    model = _nn_init(seed)
    model.learning_rate = lr
    targets = training.labels.astype(float)
    rng = np.random.default_rng(seed + 1)
    for _ in range(epochs):
        for i in rng.permutation(len(training)):
            _, grads = nn_loss_and_grads(model, training.features[i], targets[i])
            model.w1 -= lr * grads["w1"]
            model.b1 -= lr * grads["b1"]
            model.w2 -= lr * grads["w2"]
            model.b2 -= lr * grads["b2"]
    return model


def nn_predict(model: FeedforwardNetModel, x) -> tuple[int, float]:
    """Label and raw network output. A zero score reads as -1."""
    x = np.asarray(x, dtype=float)
    if x.shape != (NN_INPUT_DIM,):
        raise ValueError(f"input must have dim {NN_INPUT_DIM}, got {x.shape}")
    score = nn_forward(model, x)
    return (1 if score > 0 else -1), score


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Disjoint index folds with per-class counts within one of each other."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (1, -1):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise ValueError(f"need at least {k} samples of class {cls}, have {len(idx)}")
        idx = rng.permutation(idx)
        for j, i in enumerate(idx):
            folds[j % k].append(int(i))
    return [np.array(sorted(f)) for f in folds]


def cross_validate(training: TrainingSet, trainer, k: int = 4,
                   seed: int = 0) -> AccuracyReport:
    """Stratified k-fold cross validation.

    ``trainer`` maps a TrainingSet to a predict function (vector -> label).
    Every sample is tested exactly once; the report pools all test
    predictions and also carries per-fold rows.
    """
    folds = stratified_folds(training.labels, k, seed)
    all_pred = np.zeros(len(training), dtype=int)
    per_fold = []
    for fold in folds:
        mask = np.ones(len(training), dtype=bool)
        mask[fold] = False
        predict = trainer(TrainingSet(training.features[mask], training.labels[mask]))
        fold_pred = np.array([predict(training.features[i]) for i in fold])
        all_pred[fold] = fold_pred
        fold_report = AccuracyReport.from_predictions(training.labels[fold], fold_pred)
        per_fold.append((fold_report.concentration_acc, fold_report.relaxation_acc,
                         fold_report.overall_acc))
    return AccuracyReport.from_predictions(training.labels, all_pred, per_fold)


@dataclass
class ModelBundle:
    """Everything the serving pipeline needs: model, filters, channel set."""

    kind: str  # "svm" | "fnn"
    channels: tuple[ChannelId, ...]
    model: LinearSvmModel | FeedforwardNetModel
    filters: SpatialFilterPair | None = None
    standardization: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("svm", "fnn"):
            raise ValueError(f"model kind must be 'svm' or 'fnn', got {self.kind!r}")
        self.channels = validate_channels(self.channels)
        if self.kind == "svm" and self.filters is None:
            raise ValueError("an svm bundle requires spatial filters")


def bundle_to_json(bundle: ModelBundle, created_utc: str | None = None) -> str:
    """Canonical JSON for a model bundle; floats keep full precision."""
    if created_utc is None:
        created_utc = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if bundle.kind == "svm":
        m: LinearSvmModel = bundle.model
        standardization = {"means": m.feature_means.tolist(), "stds": m.feature_stds.tolist()}
        weights = {"w": m.weights.tolist(), "b": m.bias}
        hyper = {"reg_lambda": m.hyper.reg_lambda, "epochs": m.hyper.epochs,
                 "zero_variance_warning": m.zero_variance_warning}
        seed = m.hyper.seed
    else:
        f: FeedforwardNetModel = bundle.model
        means, stds = bundle.standardization if bundle.standardization is not None else (
            np.zeros(NN_INPUT_DIM), np.ones(NN_INPUT_DIM))
        standardization = {"means": np.asarray(means).tolist(), "stds": np.asarray(stds).tolist()}
        weights = {"w1": f.w1.tolist(), "b1": f.b1.tolist(), "w2": f.w2.tolist(), "b2": f.b2}
        hyper = {"learning_rate": f.learning_rate}
        seed = f.seed
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "model_kind": bundle.kind,
        "channels": [str(ch) for ch in bundle.channels],
        "filters": None if bundle.filters is None else {
            "w_t": bundle.filters.w_t.tolist(),
            "w_r": bundle.filters.w_r.tolist(),
            "discriminative": bundle.filters.discriminative,
        },
        "standardization": standardization,
        "weights": weights,
        "hyper": hyper,
        "seed": seed,
        "created_utc": created_utc,
    }
    return json.dumps(doc, indent=2)


def bundle_from_json(text: str) -> ModelBundle:
    doc = json.loads(text)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
    kind = doc["model_kind"]
    channels = tuple(ChannelId.parse(s) for s in doc["channels"])
    filters = None
    if doc.get("filters") is not None:
        filters = SpatialFilterPair(
            w_t=np.array(doc["filters"]["w_t"]),
            w_r=np.array(doc["filters"]["w_r"]),
            discriminative=bool(doc["filters"].get("discriminative", True)),
        )
    std = doc["standardization"]
    if kind == "svm":
        model = LinearSvmModel(
            weights=np.array(doc["weights"]["w"]),
            bias=float(doc["weights"]["b"]),
            feature_means=np.array(std["means"]),
            feature_stds=np.array(std["stds"]),
            hyper=SvmHyper(
                reg_lambda=float(doc["hyper"]["reg_lambda"]),
                epochs=int(doc["hyper"]["epochs"]),
                seed=int(doc["seed"]),
            ),
            zero_variance_warning=bool(doc["hyper"].get("zero_variance_warning", False)),
        )
        return ModelBundle(kind=kind, channels=channels, model=model, filters=filters)
    model = FeedforwardNetModel(
        w1=np.array(doc["weights"]["w1"]),
        b1=np.array(doc["weights"]["b1"]),
        w2=np.array(doc["weights"]["w2"]),
        b2=float(doc["weights"]["b2"]),
        learning_rate=float(doc["hyper"]["learning_rate"]),
        seed=int(doc["seed"]),
    )
    return ModelBundle(
        kind=kind, channels=channels, model=model, filters=filters,
        standardization=(np.array(std["means"]), np.array(std["stds"])),
    )


def save_bundle(path, bundle: ModelBundle, created_utc: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(bundle_to_json(bundle, created_utc))


def load_bundle(path) -> ModelBundle:
    with open(path, encoding="utf-8") as fh:
        return bundle_from_json(fh.read())
