"""Orchestration: the 100 ms classification tick, plane altitude fold,
training workflows, trial-level cross validation, and the latency benchmark.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

import numpy as np

from .csp import apply_filters, average_filters, class_covariance, compute_filters
from .models import (
    AccuracyReport,
    ModelBundle,
    SvmHyper,
    TrainingSet,
    nn_predict,
    nn_train,
    stratified_folds,
    svm_predict,
    svm_train,
)
from .signal_core import (
    CONCENTRATION,
    GAMMA_PAIR,
    RELAXATION,
    SAMPLE_RATE_HZ,
    TICK_MS,
    WINDOW_LEN,
    ChannelId,
    Trial,
    Window,
    WindowBuffer,
    extract_segment,
    flatten_window,
    validate_channels,
    windows_of,
)
from .sources import SessionRecording

# Usable portions of a trial: early samples carry task-onset transients and
# late ones attention drift.
EFFECTIVE_SEGMENTS = {CONCENTRATION: (2.0, 6.0), RELAXATION: (4.0, 8.0)}

ACCEPT_THRESHOLD = 0.80
LOOKAHEAD_SAMPLES = 5

DEFAULT_BROADCAST_PORT = 8080
DEFAULT_HTTP_PORT = 8081
DEFAULT_PLANE_STEP = 0.02


@dataclass(frozen=True)
class PipelineConfig:
    tick_ms: int = TICK_MS
    window_len: int = WINDOW_LEN
    mode: str = "svm"
    channels: tuple[ChannelId, ...] = GAMMA_PAIR
    model_path: str | None = None
    broadcast_port: int = DEFAULT_BROADCAST_PORT
    http_port: int = DEFAULT_HTTP_PORT
    plane_step: float = DEFAULT_PLANE_STEP

    def __post_init__(self) -> None:
        if self.tick_ms * SAMPLE_RATE_HZ != 1000:
            raise ValueError(
                f"tick_ms must be 1000 / sample rate = {1000 // SAMPLE_RATE_HZ}, got {self.tick_ms}"
            )
        if self.mode not in ("svm", "fnn"):
            raise ValueError(f"mode must be 'svm' or 'fnn', got {self.mode!r}")
        if self.window_len < 1:
            raise ValueError("window_len must be positive")
        if not 0 < self.plane_step <= 1:
            raise ValueError("plane_step must be in (0, 1]")
        object.__setattr__(self, "channels", validate_channels(self.channels))

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        doc = json.loads(text)
        kwargs = {}
        if "channels" in doc:
            kwargs["channels"] = tuple(ChannelId.parse(s) for s in doc.pop("channels"))
        kwargs.update(doc)
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps({
            "tick_ms": self.tick_ms,
            "window_len": self.window_len,
            "mode": self.mode,
            "channels": [str(c) for c in self.channels],
            "model_path": self.model_path,
            "broadcast_port": self.broadcast_port,
            "http_port": self.http_port,
            "plane_step": self.plane_step,
        }, indent=2)


@dataclass(frozen=True)
class PlaneState:
    """Altitude fraction in [0, 1]; one step per classified tick."""

    y: float = 0.5
    step: float = DEFAULT_PLANE_STEP

    def __post_init__(self) -> None:
        if not 0.0 <= self.y <= 1.0:
            raise ValueError(f"plane altitude must be in [0, 1], got {self.y}")


def plane_update(plane: PlaneState, label: int) -> PlaneState:
    """Pure altitude fold: up a step on +1, down a step on -1, clamped."""
    y = min(1.0, max(0.0, plane.y + label * plane.step))
    return replace(plane, y=y)


@dataclass(frozen=True)
class StateMessage:
    t_ms: int
    label: int
    score: float
    plane_y: float
    mode: str
    drop_count: int = 0

    def to_json(self) -> str:
        # fixed key order and compact separators keep replays byte-identical
        return json.dumps({
            "t_ms": self.t_ms,
            "label": self.label,
            "score": self.score,
            "plane_y": self.plane_y,
            "mode": self.mode,
            "drop_count": self.drop_count,
        }, separators=(",", ":"))


class TickEngine:
    """Owns the model, plane state, and per-tick classification.

    Single-threaded by contract: exactly one loop calls classify_tick.
    """

    def __init__(self, cfg: PipelineConfig, bundle: ModelBundle,
                 plane: PlaneState | None = None):
        if bundle.kind != cfg.mode:
            raise ValueError(f"config mode {cfg.mode!r} does not match model kind {bundle.kind!r}")
        n_ch = len(cfg.channels)
        if bundle.channels != cfg.channels:
            raise ValueError(
                f"config channels {cfg.channels} do not match model channels {bundle.channels}"
            )
        if cfg.mode == "svm":
            if bundle.filters.n_channels != n_ch:
                raise ValueError("spatial filter width does not match the channel set")
            if bundle.model.weights.size != 2 * cfg.window_len:
                raise ValueError("svm feature dim does not match 2 * window_len")
        else:
            if n_ch * cfg.window_len != bundle.model.w1.shape[1]:
                raise ValueError("window size does not match the network input dim")
        self.cfg = cfg
        self.bundle = bundle
        self.plane = plane if plane is not None else PlaneState(step=cfg.plane_step)
        self.drop_count = 0

    def classify_tick(self, window: Window) -> StateMessage:
        if window.n_channels != len(self.cfg.channels) or window.n_samples != self.cfg.window_len:
            raise ValueError(
                f"window {window.data.shape} does not match config "
                f"({len(self.cfg.channels)}, {self.cfg.window_len})"
            )
        if self.cfg.mode == "svm":
            feature = apply_filters(self.bundle.filters, window)
            label, score = svm_predict(self.bundle.model, feature)
        else:
            x = flatten_window(window)
            if self.bundle.standardization is not None:
                means, stds = self.bundle.standardization
                x = (x - means) / stds
            label, score = nn_predict(self.bundle.model, x)
        self.plane = plane_update(self.plane, label)
        t_ms = window.start_ts + (window.n_samples - 1) * self.cfg.tick_ms
        return StateMessage(
            t_ms=t_ms, label=label, score=score, plane_y=self.plane.y,
            mode=self.cfg.mode, drop_count=self.drop_count,
        )

    def run(self, samples) -> "list[StateMessage]":
        """Classify a finite sample stream (warm-up windows produce nothing)."""
        buffer = WindowBuffer(len(self.cfg.channels), self.cfg.window_len)
        out = []
        for sample in samples:
            window = buffer.push(sample)
            if window is not None:
                out.append(self.classify_tick(window))
        return out


# ---------------------------------------------------------------------------
# training workflows


class WorkflowError(ValueError):
    """A training workflow precondition failed."""


def _effective_windows(trial: Trial) -> list[Window]:
    start, end = EFFECTIVE_SEGMENTS[trial.label]
    return windows_of(extract_segment(trial, start, end))


def _fit_filters(conc_trials: list[Trial], relax_trials: list[Trial]):
    """One filter pair per (concentration, relaxation) trial group, averaged."""
    pairs = []
    for conc, relax in zip(conc_trials, relax_trials):
        cov_t = class_covariance(_effective_windows(conc))
        cov_r = class_covariance(_effective_windows(relax))
        pairs.append(compute_filters(cov_t, cov_r))
    return average_filters(pairs)


def _feature_set(trials: list[Trial], filters) -> TrainingSet:
    feats, labels = [], []
    for trial in trials:
        for window in _effective_windows(trial):
            feats.append(apply_filters(filters, window))
            labels.append(trial.label)
    return TrainingSet(np.array(feats), np.array(labels))


def _split_by_class(trials: list[Trial]) -> tuple[list[Trial], list[Trial]]:
    conc = [t for t in trials if t.label == CONCENTRATION]
    relax = [t for t in trials if t.label == RELAXATION]
    if not conc or not relax:
        raise WorkflowError("both trial classes are required")
    if len(conc) != len(relax):
        raise WorkflowError(
            f"class imbalance: {len(conc)} concentration vs {len(relax)} relaxation trials"
        )
    return conc, relax


@dataclass
class SvmWorkflowResult:
    bundle: ModelBundle
    report: AccuracyReport
    accepted: bool
    train_indices: list[int]
    test_indices: list[int]


def train_svm_workflow(trials: list[Trial], seed: int = 0,
                       hyper: SvmHyper | None = None,
                       channels: tuple[ChannelId, ...] = GAMMA_PAIR,
                       accept_threshold: float = ACCEPT_THRESHOLD) -> SvmWorkflowResult:
    """Calibration: seeded 3:1 trial split, filters and SVM fit on the training
    side only, acceptance decided on held-out trial windows."""
    conc, relax = _split_by_class(trials)
    if len(conc) < 4:
        raise WorkflowError("need at least 4 trials per class for a 3:1 split")
    hyper = hyper if hyper is not None else SvmHyper(seed=seed)
    rng = np.random.default_rng(seed)

    def split(items):
        order = rng.permutation(len(items))
        n_train = max(1, round(len(items) * 0.75))
        return ([items[i] for i in order[:n_train]],
                [items[i] for i in order[n_train:]])

    conc_train, conc_test = split(conc)
    relax_train, relax_test = split(relax)
    filters = _fit_filters(conc_train, relax_train)
    training = _feature_set(conc_train + relax_train, filters)
    model = svm_train(training, hyper)
    test = _feature_set(conc_test + relax_test, filters)
    predicted = np.array([svm_predict(model, x)[0] for x in test.features])
    report = AccuracyReport.from_predictions(test.labels, predicted)
    report.per_fold = [(report.concentration_acc, report.relaxation_acc, report.overall_acc)]
    bundle = ModelBundle(kind="svm", channels=channels, model=model, filters=filters)
    index_of = {id(t): i for i, t in enumerate(trials)}
    return SvmWorkflowResult(
        bundle=bundle,
        report=report,
        accepted=bool(report.overall_acc > accept_threshold),
        train_indices=sorted(index_of[id(t)] for t in conc_train + relax_train),
        test_indices=sorted(index_of[id(t)] for t in conc_test + relax_test),
    )


def cross_validate_trials(trials: list[Trial], k: int = 4, seed: int = 0,
                          hyper: SvmHyper | None = None) -> AccuracyReport:
    """Trial-stratified k-fold CV; filters and SVM are refit per fold so no
    test trial leaks into filter estimation."""
    _split_by_class(trials)
    labels = np.array([t.label for t in trials])
    folds = stratified_folds(labels, k, seed)
    hyper = hyper if hyper is not None else SvmHyper(seed=seed)
    all_labels, all_pred, per_fold = [], [], []
    for fold in folds:
        test_idx = set(fold.tolist())
        train = [t for i, t in enumerate(trials) if i not in test_idx]
        conc_train = [t for t in train if t.label == CONCENTRATION]
        relax_train = [t for t in train if t.label == RELAXATION]
        filters = _fit_filters(conc_train, relax_train)
        model = svm_train(_feature_set(train, filters), hyper)
        fold_labels, fold_pred = [], []
        for i in fold:
            for window in _effective_windows(trials[i]):
                fold_labels.append(trials[i].label)
                fold_pred.append(svm_predict(model, apply_filters(filters, window))[0])
        fold_report = AccuracyReport.from_predictions(np.array(fold_labels), np.array(fold_pred))
        per_fold.append((fold_report.concentration_acc, fold_report.relaxation_acc,
                         fold_report.overall_acc))
        all_labels.extend(fold_labels)
        all_pred.extend(fold_pred)
    return AccuracyReport.from_predictions(np.array(all_labels), np.array(all_pred), per_fold)


def single_channel_baseline_cv(trials: list[Trial], k: int = 4,
                               seed: int = 0) -> AccuracyReport:
    """Best single-channel threshold on window means, same folds as the CSP CV.

    The contrast case: without spatial filtering, a shared source drags every
    channel around and a per-channel threshold pays for it.
    """
    _split_by_class(trials)
    labels = np.array([t.label for t in trials])
    folds = stratified_folds(labels, k, seed)
    n_channels = len(trials[0].samples[0].values)

    def window_means(trial, channel):
        return [float(np.mean(w.data[channel])) for w in _effective_windows(trial)]

    def best_threshold(xs, ys):
        order = np.argsort(xs)
        xs_sorted = np.asarray(xs)[order]
        candidates = np.concatenate(
            [[xs_sorted[0] - 1.0], (xs_sorted[1:] + xs_sorted[:-1]) / 2.0, [xs_sorted[-1] + 1.0]]
        )
        best = (-1.0, 0.0, 1)
        for sign in (1, -1):
            for th in candidates:
                acc = float(np.mean(np.where(sign * (np.asarray(xs) - th) > 0, 1, -1) == ys))
                if acc > best[0]:
                    best = (acc, float(th), sign)
        return best

    all_labels, all_pred, per_fold = [], [], []
    for fold in folds:
        test_idx = set(fold.tolist())
        train = [t for i, t in enumerate(trials) if i not in test_idx]
        channel_rules = []
        for ch in range(n_channels):
            xs, ys = [], []
            for t in train:
                means = window_means(t, ch)
                xs.extend(means)
                ys.extend([t.label] * len(means))
            acc, th, sign = best_threshold(xs, np.asarray(ys))
            channel_rules.append((acc, ch, th, sign))
        _, ch, th, sign = max(channel_rules)
        fold_labels, fold_pred = [], []
        for i in fold:
            for m in window_means(trials[i], ch):
                fold_labels.append(trials[i].label)
                fold_pred.append(1 if sign * (m - th) > 0 else -1)
        fold_report = AccuracyReport.from_predictions(np.array(fold_labels), np.array(fold_pred))
        per_fold.append((fold_report.concentration_acc, fold_report.relaxation_acc,
                         fold_report.overall_acc))
        all_labels.extend(fold_labels)
        all_pred.extend(fold_pred)
    return AccuracyReport.from_predictions(np.array(all_labels), np.array(all_pred), per_fold)


def lookahead_pairs(inputs: list[np.ndarray], labels: list[int],
                    lookahead: int = LOOKAHEAD_SAMPLES) -> tuple[np.ndarray, np.ndarray]:
    """Pair input i with the label of the window ending ``lookahead`` samples later."""
    if len(inputs) != len(labels):
        raise ValueError("inputs and labels must align")
    n = len(inputs) - lookahead
    if n <= 0:
        raise ValueError(f"need more than {lookahead} windows, have {len(inputs)}")
    x = np.array(inputs[:n])
    y = np.array(labels[lookahead:])
    return x, y


@dataclass
class NnWorkflowResult:
    bundle: ModelBundle
    n_pairs: int
    svm_labels: list[int]


def train_nn_workflow(recording: SessionRecording, svm_bundle: ModelBundle,
                      seed: int = 0, lr: float = 0.01,
                      epochs: int = 80) -> NnWorkflowResult:
    """Bootstrap the look-ahead net from free-control data labeled by the SVM.

    Every stride-1 window is labeled by the accepted SVM; the net learns to
    map the window ending at t to the label of the window ending at t+0.5 s.
    """
    if svm_bundle.kind != "svm":
        raise WorkflowError("the labeling model must be an svm bundle")
    if len(recording) < WINDOW_LEN + LOOKAHEAD_SAMPLES:
        raise WorkflowError(
            f"recording must contain at least {WINDOW_LEN + LOOKAHEAD_SAMPLES} samples, "
            f"has {len(recording)}"
        )
    if recording.channels != svm_bundle.channels:
        raise WorkflowError("recording channels do not match the svm bundle")
    windows = windows_of(recording.samples)
    svm_labels = [
        svm_predict(svm_bundle.model, apply_filters(svm_bundle.filters, w))[0]
        for w in windows
    ]
    flat = [flatten_window(w) for w in windows]
    x, y = lookahead_pairs(flat, svm_labels)
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds == 0, 1.0, stds)
    standardized = TrainingSet((x - means) / stds, y)
    model = nn_train(standardized, lr=lr, epochs=epochs, seed=seed)
    bundle = ModelBundle(
        kind="fnn", channels=recording.channels, model=model,
        standardization=(means, stds),
    )
    return NnWorkflowResult(bundle=bundle, n_pairs=len(y), svm_labels=svm_labels)


# ---------------------------------------------------------------------------
# latency benchmark


@dataclass
class LatencyStats:
    mean_ms: float
    p50_ms: float
    p99_ms: float
    max_ms: float
    ticks: int

    def __post_init__(self) -> None:
        if self.ticks and not (self.p50_ms <= self.p99_ms <= self.max_ms):
            raise ValueError("latency percentiles out of order")

    def summary(self) -> str:
        return (f"{self.ticks} ticks: mean {self.mean_ms:.3f} ms, "
                f"p50 {self.p50_ms:.3f} ms, p99 {self.p99_ms:.3f} ms, "
                f"max {self.max_ms:.3f} ms")


def benchmark_latency(cfg: PipelineConfig, bundle: ModelBundle, samples,
                      n_ticks: int) -> LatencyStats:
    """Compute-only duration of classify_tick over ``n_ticks`` unpaced ticks."""
    if n_ticks == 0:
        return LatencyStats(0.0, 0.0, 0.0, 0.0, 0)
    engine = TickEngine(cfg, bundle)
    buffer = WindowBuffer(len(cfg.channels), cfg.window_len)
    durations = []
    for sample in samples:
        window = buffer.push(sample)
        if window is None:
            continue
        t0 = time.perf_counter()
        engine.classify_tick(window)
        durations.append((time.perf_counter() - t0) * 1000.0)
        if len(durations) >= n_ticks:
            break
    if len(durations) < n_ticks:
        raise ValueError(f"source supplied only {len(durations)} of {n_ticks} ticks")
    arr = np.array(durations)
    return LatencyStats(
        mean_ms=float(arr.mean()),
        p50_ms=float(np.percentile(arr, 50)),
        p99_ms=float(np.percentile(arr, 99)),
        max_ms=float(arr.max()),
        ticks=n_ticks,
    )
