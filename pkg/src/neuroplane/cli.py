"""Command-line entry points for the whole pipeline.

Sources are given as ``osc:<port>``, ``csv:<path>``, or ``synth[:<cfg.json>]``
and are interchangeable behind every subcommand that reads samples.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import time

import numpy as np

from .ahp import (
    ChannelOption,
    comparison_matrix,
    consistency_ratio,
    principal_eigenvector,
    score_option,
    select_channels,
)
from .models import load_bundle, save_bundle
from .osc import DEFAULT_OSC_PORT, OscUdpListener
from .pipeline import (
    PipelineConfig,
    TickEngine,
    benchmark_latency,
    train_nn_workflow,
    train_svm_workflow,
)
from .protocol import TrialProtocol, run_protocol, trials_from_recording
from .sources import (
    SampleQueue,
    SyntheticConfig,
    load_recording,
    paced,
    record_session,
    replay_csv,
    strip_labels,
    synth_stream,
)
from .service import PipelineService
from .signal_core import ChannelId, GAMMA_PAIR


def load_synth_config(path: str | None) -> SyntheticConfig:
    if path is None:
        return SyntheticConfig()
    with open(path, encoding="utf-8") as fh:
        return SyntheticConfig.from_json(fh.read())


def free_run_schedule(seed: int, total_s: float | None = None):
    """Alternating 5-10 s labeled segments, endless unless total_s is given."""
    rng = np.random.default_rng(seed)
    label = 1
    emitted = 0.0
    while total_s is None or emitted < total_s:
        dur = float(rng.integers(5, 11))
        if total_s is not None:
            dur = min(dur, total_s - emitted)
        yield (label, dur)
        label = -label
        emitted += dur


def open_source(spec: str, channels, speed: float = 0.0, duration_s: float | None = None):
    """Returns (labeled sample iterator, cleanup function).

    Items are (EegSample, label-or-None) pairs for every source kind; live
    and file sources carry label None.
    """
    kind, _, arg = spec.partition(":")
    if kind == "csv":
        if not arg:
            raise ValueError("csv source needs a path: csv:<path>")
        stream = ((s, None) for s in replay_csv(arg, speed=speed))
        return stream, lambda: None
    if kind == "synth":
        cfg = load_synth_config(arg or None)
        schedule = free_run_schedule(cfg.seed, duration_s)
        return synth_stream(cfg, schedule), lambda: None
    if kind == "osc":
        port = int(arg) if arg else DEFAULT_OSC_PORT
        queue = SampleQueue()
        listener = OscUdpListener(queue, channels, port=port)
        listener.start()
        print(f"listening for OSC datagrams on udp/{port}", file=sys.stderr)
        return ((s, None) for s in queue), listener.stop
    raise ValueError(f"unknown source {spec!r}; expected osc:<port>, csv:<path>, or synth[:<cfg>]")


def parse_channels(text: str | None):
    if not text:
        return GAMMA_PAIR
    return tuple(ChannelId.parse(part) for part in text.split(","))


def load_pipeline_config(args, bundle=None) -> PipelineConfig:
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = PipelineConfig.from_json(fh.read())
    else:
        cfg = PipelineConfig()
    overrides = {}
    if bundle is not None:
        overrides["mode"] = bundle.kind
        overrides["channels"] = [str(c) for c in bundle.channels]
    if getattr(args, "port", None) is not None:
        overrides["broadcast_port"] = args.port
    if getattr(args, "http_port", None) is not None:
        overrides["http_port"] = args.http_port
    if overrides:
        cfg = PipelineConfig.from_json(json.dumps({**json.loads(cfg.to_json()), **overrides}))
    return cfg


def cmd_synth(args) -> int:
    cfg = load_synth_config(args.config)
    if args.protocol:
        schedule = TrialProtocol(group=args.protocol).schedule()
    else:
        schedule = list(free_run_schedule(cfg.seed, args.duration))
    record_session(synth_stream(cfg, schedule), args.out, cfg.channels)
    print(f"wrote synthetic session to {args.out}")
    return 0


def cmd_record(args) -> int:
    channels = parse_channels(args.channels)
    duration = args.duration
    if duration is None and args.source.startswith("synth"):
        duration = 120.0
    stream, cleanup = open_source(args.source, channels, speed=args.speed,
                                  duration_s=duration)
    if duration is not None:
        stream = itertools.islice(stream, int(duration * 10))
    try:
        recording = record_session(stream, args.out, channels)
    finally:
        cleanup()
    print(f"recorded {len(recording)} samples to {args.out}")
    return 0


def cmd_protocol_run(args) -> int:
    protocol = TrialProtocol(group=args.group)
    channels = parse_channels(args.channels)
    if args.source.startswith("synth"):
        cfg = load_synth_config(args.source.partition(":")[2] or None)
        stream = strip_labels(synth_stream(cfg, protocol.schedule()))
        channels = cfg.channels

        def cleanup():
            return None
    else:
        labeled, cleanup = open_source(args.source, channels, speed=args.speed)
        stream = (s for s, _ in labeled)

    def on_phase(label, idx, n):
        name = {1: "CONCENTRATE", -1: "RELAX", None: "REST"}[label]
        suffix = "" if idx is None else f" (trial {idx + 1})"
        print(f">>> {name}{suffix}: {n / 10:.0f} s", file=sys.stderr)

    try:
        trials = run_protocol(protocol, stream, on_phase=on_phase)
    finally:
        cleanup()
    rows = ((s, t.label) for t in trials for s in t.samples)
    record_session(rows, args.out, channels)
    print(f"saved {len(trials)} trials to {args.out}")
    return 0


def cmd_train_svm(args) -> int:
    recording = load_recording(args.session)
    trials = trials_from_recording(recording)
    result = train_svm_workflow(trials, seed=args.seed, channels=recording.channels)
    print(result.report.table())
    status = "ACCEPTED" if result.accepted else "REJECTED"
    print(f"held-out accuracy {result.report.overall_acc:.1%} -> {status} (threshold 80%)")
    save_bundle(args.out, result.bundle)
    print(f"model written to {args.out}")
    return 0 if result.accepted else 1


def cmd_train_nn(args) -> int:
    recording = load_recording(args.recording)
    svm_bundle = load_bundle(args.svm)
    result = train_nn_workflow(recording, svm_bundle, seed=args.seed, epochs=args.epochs)
    print(f"trained look-ahead net on {result.n_pairs} pairs")
    save_bundle(args.out, result.bundle)
    print(f"model written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    bundle = load_bundle(args.model) if args.model else None
    cfg = load_pipeline_config(args, bundle)
    service = PipelineService(cfg, bundle, ratings_path=args.ratings,
                              stdout=args.stdout, manual=args.manual)
    service.start()
    print(f"broadcast ws://0.0.0.0:{cfg.broadcast_port}  control http://0.0.0.0:{cfg.http_port}",
          file=sys.stderr)
    try:
        if bundle is None:
            print("manual mode: POST /label to drive the plane", file=sys.stderr)
            while True:
                time.sleep(0.5)
        else:
            labeled, cleanup = open_source(args.source, cfg.channels, speed=args.speed)
            if args.source.startswith("synth"):
                labeled = paced(labeled, args.speed)  # synth is otherwise unpaced
            try:
                ticks = service.process(s for s, _ in labeled)
            finally:
                cleanup()
            print(f"source drained after {ticks} ticks", file=sys.stderr)
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


def cmd_replay(args) -> int:
    bundle = load_bundle(args.model)
    cfg = load_pipeline_config(args, bundle)
    engine = TickEngine(cfg, bundle)
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8")
    try:
        for message in engine.run(replay_csv(args.csv, speed=args.speed)):
            out.write(message.to_json() + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_select_channels(args) -> int:
    with open(args.options, encoding="utf-8") as fh:
        entries = json.load(fh)
    options = [
        ChannelOption(
            tuple(ChannelId.parse(c) for c in entry["channels"]),
            c1=float(entry["accuracy"]),
        )
        for entry in entries
    ]
    a = comparison_matrix(*args.matrix) if args.matrix else comparison_matrix()
    w, lam = principal_eigenvector(a)
    cr = consistency_ratio(a)
    print(f"criterion weights: accuracy={w[0]:.3f} preknowledge={w[1]:.3f} "
          f"channel-count={w[2]:.3f}  (lambda_max={lam:.4f}, CR={cr:.4f})")
    print(f"{'channels':<40} {'c1':>7} {'c2':>5} {'c3':>6} {'Q':>7}")
    for option in options:
        q = score_option(w, option)
        print(f"{option.label():<40} {option.c1:>7.4f} {option.c2:>5.2f} "
              f"{option.c3:>6.3f} {q:>7.4f}")
    winner = select_channels(w, options)
    print(f"selected: {winner.label()}")
    return 0


def cmd_benchmark(args) -> int:
    bundle = load_bundle(args.model)
    cfg = load_pipeline_config(args, bundle)
    needed_s = (args.ticks + cfg.window_len - 1) / 10 + 1
    stream, cleanup = open_source(args.source, cfg.channels, duration_s=needed_s)
    try:
        stats = benchmark_latency(cfg, bundle, (s for s, _ in stream), args.ticks)
    finally:
        cleanup()
    print(f"{cfg.mode} {stats.summary()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neuroplane",
        description="Concentration/relaxation neurofeedback pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic session CSV")
    p.add_argument("--config", help="synthetic config JSON")
    p.add_argument("--protocol", choices=["A", "B"], help="emit the calibration protocol")
    p.add_argument("--duration", type=float, default=120.0, help="free-run seconds")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("record", help="record a source to CSV")
    p.add_argument("--source", required=True)
    p.add_argument("--duration", type=float, default=None, help="seconds to record")
    p.add_argument("--speed", type=float, default=0.0, help="csv replay pacing")
    p.add_argument("--channels", help="comma-separated, e.g. F7.gamma,F8.gamma")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_record)

    p = sub.add_parser("protocol-run", help="run the calibration protocol over a source")
    p.add_argument("--source", required=True)
    p.add_argument("--group", choices=["A", "B"], default="A")
    p.add_argument("--speed", type=float, default=0.0)
    p.add_argument("--channels")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_protocol_run)

    p = sub.add_parser("train-svm", help="calibrate the SVM from a protocol session")
    p.add_argument("--session", required=True, help="labeled session CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(fn=cmd_train_svm)

    p = sub.add_parser("train-nn", help="bootstrap the look-ahead net from a recording")
    p.add_argument("--recording", required=True)
    p.add_argument("--svm", required=True, help="accepted SVM model JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=80)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_nn)

    p = sub.add_parser("serve", help="run the live loop with WebSocket broadcast")
    p.add_argument("--model", help="model JSON (omit with --manual)")
    p.add_argument("--source", default="synth")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--port", type=int, default=None, help="WebSocket port")
    p.add_argument("--http-port", type=int, default=None)
    p.add_argument("--ratings", default="ratings.csv")
    p.add_argument("--stdout", action="store_true", help="mirror frames to stdout")
    p.add_argument("--manual", action="store_true", help="enable POST /label dev source")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("replay", help="deterministically replay a recording through a model")
    p.add_argument("--model", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--speed", type=float, default=0.0)
    p.add_argument("--config")
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("select-channels", help="score channel options and pick one")
    p.add_argument("--options", required=True, help="JSON: [{channels, accuracy}, ...]")
    p.add_argument("--matrix", type=float, nargs=3, metavar=("A12", "A13", "A32"),
                   help="override the pairwise judgements")
    p.set_defaults(fn=cmd_select_channels)

    p = sub.add_parser("benchmark", help="measure per-tick compute latency")
    p.add_argument("--model", required=True)
    p.add_argument("--source", default="synth")
    p.add_argument("--ticks", type=int, default=1000)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
