"""The calibration protocol: alternating blocks of timed concentration and
relaxation trials with a rest period in between, run over any sample source.
"""

from __future__ import annotations

from dataclasses import dataclass

from .signal_core import CONCENTRATION, RELAXATION, SAMPLE_RATE_HZ, EegSample, Trial


class PartialSessionError(RuntimeError):
    """Source ran dry mid-protocol; completed trials are preserved."""

    def __init__(self, message: str, trials: list[Trial]):
        super().__init__(message)
        self.trials = trials


@dataclass(frozen=True)
class TrialProtocol:
    """Block design: group A runs concentration first, group B the opposite."""

    n_trials_per_class: int = 20
    concentration_s: int = 10
    relaxation_s: int = 15
    rest_s: int = 120
    group: str = "A"

    def __post_init__(self) -> None:
        if min(self.n_trials_per_class, self.concentration_s,
               self.relaxation_s, self.rest_s) <= 0:
            raise ValueError("protocol counts and durations must be positive")
        if self.group not in ("A", "B"):
            raise ValueError(f"group must be 'A' or 'B', got {self.group!r}")

    def total_duration_s(self) -> int:
        return self.n_trials_per_class * (self.concentration_s + self.relaxation_s) + self.rest_s

    def schedule(self) -> list[tuple[int | None, float]]:
        """(label, duration_s) segments in group order; rest is unlabeled."""
        conc = [(CONCENTRATION, float(self.concentration_s))] * self.n_trials_per_class
        relax = [(RELAXATION, float(self.relaxation_s))] * self.n_trials_per_class
        rest = [(None, float(self.rest_s))]
        if self.group == "A":
            return conc + rest + relax
        return relax + rest + conc


def trials_from_recording(recording, protocol: TrialProtocol | None = None) -> list[Trial]:
    """Rebuild trials from a labeled session recording.

    Consecutive same-label samples form blocks; blocks are chopped into
    trials by the protocol's nominal per-class duration. Unlabeled (rest)
    samples separate nothing and are skipped.
    """
    if recording.labels is None:
        raise ValueError("recording has no label column; cannot reconstruct trials")
    protocol = protocol if protocol is not None else TrialProtocol()
    duration = {CONCENTRATION: protocol.concentration_s, RELAXATION: protocol.relaxation_s}
    trials: list[Trial] = []
    run_label: int | None = None
    run: list[EegSample] = []

    def close_run():
        if run_label is None or not run:
            return
        n = duration[run_label] * SAMPLE_RATE_HZ
        if len(run) % n != 0:
            raise ValueError(
                f"label block of {len(run)} samples is not a whole number of "
                f"{duration[run_label]} s trials"
            )
        for i in range(0, len(run), n):
            trials.append(Trial(label=run_label, samples=run[i:i + n],
                                nominal_duration_s=duration[run_label]))

    for sample, label in zip(recording.samples, recording.labels):
        if label != run_label:
            close_run()
            run = []
            run_label = label
        if label is not None:
            run.append(sample)
    close_run()
    return trials


def run_protocol(protocol: TrialProtocol, source, on_phase=None) -> list[Trial]:
    """Chop a sample source into labeled trials per the protocol schedule.

    ``on_phase(label, index, n_samples)`` fires at each segment boundary so a
    live session can prompt the subject. Rest samples are consumed and
    discarded. If the source ends early, the completed trials survive inside
    the raised PartialSessionError.
    """
    it = iter(source)
    trials: list[Trial] = []
    trial_index = {CONCENTRATION: 0, RELAXATION: 0}
    for label, dur in protocol.schedule():
        n = int(round(dur * SAMPLE_RATE_HZ))
        if on_phase is not None:
            idx = trial_index[label] if label is not None else None
            on_phase(label, idx, n)
        collected: list[EegSample] = []
        for _ in range(n):
            try:
                collected.append(next(it))
            except StopIteration:
                raise PartialSessionError(
                    f"source exhausted after {len(trials)} completed trials "
                    f"({len(collected)}/{n} samples into the current segment)",
                    trials,
                ) from None
        if label is not None:
            trials.append(Trial(label=label, samples=collected,
                                nominal_duration_s=int(dur)))
            trial_index[label] += 1
    return trials
