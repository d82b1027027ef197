"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest -s`` to see them inline).
"""

import time

import numpy as np
import pytest

from neuroplane.ahp import (
    ChannelOption,
    comparison_matrix,
    principal_eigenvector,
    score_option,
    select_channels,
)
from neuroplane.csp import compute_filters, rayleigh_grid_argmax
from neuroplane.models import FeedforwardNetModel, nn_forward, nn_loss_and_grads
from neuroplane.pipeline import (
    PipelineConfig,
    TickEngine,
    benchmark_latency,
    cross_validate_trials,
    lookahead_pairs,
    single_channel_baseline_cv,
    train_nn_workflow,
    train_svm_workflow,
)
from neuroplane.protocol import TrialProtocol, run_protocol
from neuroplane.signal_core import GAMMA_PAIR, flatten_window, windows_of
from neuroplane.sources import (
    SessionRecording,
    SyntheticConfig,
    record_session,
    replay_csv,
    strip_labels,
    synth_stream,
)

SESSION_SEED = 42
WORKFLOW_SEED = 7


def report(name: str, ok: bool, detail: str = "") -> None:
    marker = "PASS" if ok else "FAIL"
    suffix = f"  [{detail}]" if detail else ""
    print(f"{marker}: {name}{suffix}")
    assert ok, f"{name}: {detail}"


def make_free_control(seed: int, total_s: float = 120.0):
    rng = np.random.default_rng(seed)
    schedule, label, total = [], 1, 0.0
    while total < total_s:
        dur = float(min(rng.integers(5, 11), total_s - total))
        schedule.append((label, dur))
        label = -label
        total += dur
    return schedule


@pytest.fixture(scope="module")
def synth_cfg():
    cfg = SyntheticConfig(seed=SESSION_SEED)
    assert cfg.separation_sigma() == pytest.approx(3.0)
    assert cfg.common_source_gain > 0
    return cfg


@pytest.fixture(scope="module")
def session_trials(synth_cfg):
    protocol = TrialProtocol(group="A")
    return run_protocol(protocol, strip_labels(synth_stream(synth_cfg, protocol.schedule())))


@pytest.fixture(scope="module")
def svm_result(session_trials):
    return train_svm_workflow(session_trials, seed=WORKFLOW_SEED)


def test_ahp_eigenvector():
    t0 = time.perf_counter()
    w, _ = principal_eigenvector(comparison_matrix(8, 3, 3))
    elapsed = time.perf_counter() - t0
    deviation = np.max(np.abs(w - np.array([0.682, 0.082, 0.236])))
    report(
        "AHP eigenvector within 0.001 of (0.682, 0.082, 0.236)",
        deviation < 1e-3 and elapsed < 1.0,
        f"max deviation {deviation:.2e}, {elapsed * 1000:.1f} ms",
    )


def test_ahp_channel_choice():
    from neuroplane.signal_core import ChannelId

    w, _ = principal_eigenvector(comparison_matrix(8, 3, 3))
    gamma = ChannelOption(GAMMA_PAIR, c1=0.9238)
    beta = ChannelOption((ChannelId("F7", "beta"), ChannelId("F8", "beta")), c1=0.8416)
    alpha = ChannelOption((ChannelId("F7", "alpha"), ChannelId("F8", "alpha")), c1=0.714)
    qs = [score_option(w, o) for o in (gamma, beta, alpha)]
    expected = [0.948, 0.892, 0.764]
    q_ok = all(abs(q - e) < 2e-3 for q, e in zip(qs, expected))
    winner = select_channels(w, [gamma, beta, alpha])
    report(
        "AHP channel scores match the published table and pick F7/F8 gamma",
        q_ok and winner.channels == GAMMA_PAIR,
        "Q = " + ", ".join(f"{q:.3f}" for q in qs),
    )


def test_csp_matches_grid_search_oracle():
    rng = np.random.default_rng(1234)
    t0 = time.perf_counter()
    worst = 1.0
    for _ in range(50):
        def spd():
            a = rng.normal(size=(2, 2))
            m = a @ a.T + 0.05 * np.eye(2)
            return m / np.trace(m)
        cov_t, cov_r = spd(), spd()
        pair = compute_filters(cov_t, cov_r)
        best = rayleigh_grid_argmax(cov_t, cov_r)
        worst = min(worst, abs(float(pair.w_t @ best)))
    elapsed = time.perf_counter() - t0
    report(
        "CSP filters match the Rayleigh grid-search oracle (cosine > 0.999)",
        worst > 0.999 and elapsed < 10.0,
        f"worst cosine {worst:.6f}, {elapsed:.2f} s",
    )


def test_nn_gradient_check():
    eps = 1e-5
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        model = FeedforwardNetModel(
            w1=rng.uniform(-0.5, 0.5, (10, 10)),
            b1=rng.uniform(-0.5, 0.5, 10),
            w2=rng.uniform(-0.5, 0.5, (1, 10)),
            b2=float(rng.uniform(-0.5, 0.5)),
        )
        x = rng.normal(size=10)
        target = float(rng.choice([-1.0, 1.0]))
        _, grads = nn_loss_and_grads(model, x, target)
        params = {"w1": model.w1, "b1": model.b1, "w2": model.w2}
        for name, tensor in params.items():
            analytic = np.asarray(grads[name], dtype=float)
            for idx in np.ndindex(tensor.shape):
                orig = tensor[idx]
                tensor[idx] = orig + eps
                up = nn_forward(model, x) - target
                tensor[idx] = orig - eps
                down = nn_forward(model, x) - target
                tensor[idx] = orig
                fd = (0.5 * up * up - 0.5 * down * down) / (2 * eps)
                worst = max(worst, abs(analytic[idx] - fd) / max(1e-5, abs(analytic[idx]) + abs(fd)))
        model.b2 += eps
        up = nn_forward(model, x) - target
        model.b2 -= 2 * eps
        down = nn_forward(model, x) - target
        model.b2 += eps
        fd = (0.5 * up * up - 0.5 * down * down) / (2 * eps)
        worst = max(worst, abs(grads["b2"] - fd) / max(1e-5, abs(grads["b2"]) + abs(fd)))
    report(
        "NN backprop matches central finite differences (rel err < 1e-4)",
        worst < 1e-4,
        f"worst relative error {worst:.2e}",
    )


def test_end_to_end_synthetic_accuracy(synth_cfg, session_trials, svm_result):
    t0 = time.perf_counter()
    cv = cross_validate_trials(session_trials, k=4, seed=0)
    svm_ok = svm_result.accepted and cv.overall_acc >= 0.90

    # free-control recording labeled by the accepted SVM, then a held-out
    # recording scored against the generator's ground-truth schedule
    train_sched = make_free_control(123)
    train_cfg = SyntheticConfig(**{**synth_cfg.__dict__, "seed": SESSION_SEED + 1})
    train_stream = list(synth_stream(train_cfg, train_sched))
    recording = SessionRecording(GAMMA_PAIR, [s for s, _ in train_stream])
    nn_result = train_nn_workflow(recording, svm_result.bundle, seed=5, epochs=80)

    eval_sched = make_free_control(321)
    eval_cfg = SyntheticConfig(**{**synth_cfg.__dict__, "seed": SESSION_SEED + 2})
    eval_stream = list(synth_stream(eval_cfg, eval_sched))
    eval_samples = [s for s, _ in eval_stream]
    truth = [lab for _, lab in eval_stream]
    engine = TickEngine(PipelineConfig(mode="fnn"), nn_result.bundle)
    messages = engine.run(eval_samples)
    # message j covers the window ending at sample j+4 and predicts j+9
    n = len(eval_samples) - 9
    agreement = float(np.mean([messages[j].label == truth[j + 9] for j in range(n)]))
    elapsed = time.perf_counter() - t0
    report(
        "end-to-end synthetic: SVM 4-fold CV >= 0.90 and NN look-ahead >= 0.85",
        svm_ok and agreement >= 0.85 and elapsed < 60.0,
        f"CV {cv.overall_acc:.3f}, holdout {svm_result.report.overall_acc:.3f}, "
        f"NN agreement {agreement:.3f}, {elapsed:.1f} s",
    )


def test_csp_usefulness_over_single_channel(session_trials):
    t0 = time.perf_counter()
    csp = cross_validate_trials(session_trials, k=4, seed=0)
    baseline = single_channel_baseline_cv(session_trials, k=4, seed=0)
    margin = csp.overall_acc - baseline.overall_acc
    elapsed = time.perf_counter() - t0
    report(
        "CSP+SVM beats the best single-channel threshold by >= 5 points",
        margin >= 0.05 and elapsed < 60.0,
        f"CSP {csp.overall_acc:.3f} vs single-channel {baseline.overall_acc:.3f} "
        f"(+{margin * 100:.1f} pp), {elapsed:.1f} s",
    )


def test_realtime_budget(synth_cfg, svm_result):
    t0 = time.perf_counter()
    samples = [s for s, _ in synth_stream(synth_cfg, [(1, 101.0)])]
    svm_stats = benchmark_latency(PipelineConfig(mode="svm"), svm_result.bundle,
                                  iter(samples), 1000)
    recording = SessionRecording(GAMMA_PAIR, samples[:300])
    nn_result = train_nn_workflow(recording, svm_result.bundle, seed=1, epochs=5)
    fnn_stats = benchmark_latency(PipelineConfig(mode="fnn"), nn_result.bundle,
                                  iter(samples), 1000)
    elapsed = time.perf_counter() - t0
    report(
        "p99 per-tick compute < 10 ms over 1000 ticks in both modes",
        svm_stats.p99_ms < 10.0 and fnn_stats.p99_ms < 10.0 and elapsed < 30.0,
        f"svm p99 {svm_stats.p99_ms:.3f} ms, fnn p99 {fnn_stats.p99_ms:.3f} ms",
    )


def test_determinism_and_recording_round_trip(tmp_path, synth_cfg, svm_result):
    stream = list(synth_stream(synth_cfg, [(1, 10.0), (-1, 10.0)]))
    path = tmp_path / "session.csv"
    record_session(iter(stream), path, GAMMA_PAIR)
    replayed = list(replay_csv(path, speed=0))
    values_ok = all(r.values == s.values for r, (s, _) in zip(replayed, stream))

    outputs = []
    for _ in range(2):
        engine = TickEngine(PipelineConfig(mode="svm"), svm_result.bundle)
        messages = engine.run(replay_csv(path, speed=0))
        outputs.append("\n".join(m.to_json() for m in messages).encode())
    report(
        "replay is byte-identical across runs; record/replay round-trips exactly",
        values_ok and outputs[0] == outputs[1] and len(outputs[0]) > 0,
        f"{len(replayed)} samples, {outputs[0].count(b'{')} frames",
    )


def test_nn_pair_construction(synth_cfg, svm_result):
    stream = list(synth_stream(synth_cfg, make_free_control(9, total_s=120.0)))
    assert len(stream) == 1200
    recording = SessionRecording(GAMMA_PAIR, [s for s, _ in stream])
    result = train_nn_workflow(recording, svm_result.bundle, seed=2, epochs=1)

    # index-arithmetic oracle, built from scratch
    windows = windows_of(recording.samples)
    flats = [flatten_window(w) for w in windows]
    x, y = lookahead_pairs(flats, result.svm_labels)
    offsets_ok = all(y[i] == result.svm_labels[i + 5] for i in range(len(y)))
    inputs_ok = all(np.array_equal(x[i], flats[i]) for i in range(len(y)))
    report(
        "1200-sample recording yields exactly 1191 pairs with +5 sample targets",
        result.n_pairs == 1191 and len(y) == 1191 and offsets_ok and inputs_ok,
        f"{result.n_pairs} pairs",
    )
