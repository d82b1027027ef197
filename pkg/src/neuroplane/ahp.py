"""Analytic-hierarchy channel selection.

Three criteria drive the choice of band-power channels: measured
classification accuracy (c1), prior knowledge that the band discriminates at
forehead sites (c2, halved when alpha channels are involved because alpha is
best read at the back of the head), and the reciprocal channel count (c3,
fewer channels keep the tick cheap). A pairwise comparison matrix weights the
criteria via its principal eigenvector; each candidate channel set gets a
weighted score Q and the argmax wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal_core import ChannelId, validate_channels

# Default pairwise judgements: accuracy >> preknowledge, accuracy > count,
# count > preknowledge.
DEFAULT_JUDGEMENTS = (8.0, 3.0, 3.0)  # (a12, a13, a32)

# Standardization maxima for (c1, c2, c3): accuracies and preknowledge top out
# at 1, the channel-count reciprocal at 1/2 (two channels minimum).
FACTOR_MAXIMA = (1.0, 1.0, 0.5)

RANDOM_INDEX_3 = 0.58
CONSISTENCY_THRESHOLD = 0.1

_BAND_PRIORITY = {"gamma": 0, "beta": 1, "alpha": 2}


class MatrixValidationError(ValueError):
    """Comparison matrix violates positivity/reciprocity."""


class ConvergenceError(RuntimeError):
    """Power iteration hit the iteration limit without converging."""


def comparison_matrix(a12: float = DEFAULT_JUDGEMENTS[0],
                      a13: float = DEFAULT_JUDGEMENTS[1],
                      a32: float = DEFAULT_JUDGEMENTS[2]) -> np.ndarray:
    """Build the 3x3 reciprocal judgement matrix from its upper entries."""
    return np.array([
        [1.0, a12, a13],
        [1.0 / a12, 1.0, 1.0 / a32],
        [1.0 / a13, a32, 1.0],
    ])


def validate_comparison_matrix(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise MatrixValidationError(f"comparison matrix must be square, got {a.shape}")
    if np.any(a <= 0):
        raise MatrixValidationError("comparison matrix entries must be positive")
    if np.max(np.abs(np.diag(a) - 1.0)) > 1e-12:
        raise MatrixValidationError("comparison matrix diagonal must be 1")
    if np.max(np.abs(a * a.T - 1.0)) > 1e-9:
        raise MatrixValidationError("comparison matrix is not reciprocal (a_ij != 1/a_ji)")
    return a


def principal_eigenvector(a: np.ndarray, tol: float = 1e-12,
                          max_iter: int = 10_000) -> tuple[np.ndarray, float]:
    """Priority weights and lambda_max by sum-normalized power iteration."""
    a = validate_comparison_matrix(a)
    n = a.shape[0]
    w = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = a @ w
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - w)) < tol:
            w = nxt
            break
        w = nxt
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")
    lambda_max = float(np.mean((a @ w) / w))
    return w, lambda_max


def consistency_ratio(a: np.ndarray) -> float:
    """Saaty consistency ratio for a 3x3 judgement matrix (CR < 0.1 is acceptable)."""
    a = validate_comparison_matrix(a)
    n = a.shape[0]
    if n != 3:
        raise ValueError(f"consistency ratio is calibrated for n=3 only, got n={n}")
    _, lambda_max = principal_eigenvector(a)
    ci = (lambda_max - n) / (n - 1)
    return ci / RANDOM_INDEX_3


@dataclass(frozen=True)
class ChannelOption:
    """A candidate channel set with its three criterion values.

    c2 and c3 are derived from the channel set itself: preknowledge drops to
    0.5 whenever an alpha channel is included, and c3 is the reciprocal of
    the channel count.
    """

    channels: tuple[ChannelId, ...]
    c1: float
    c2: float = field(init=False)
    c3: float = field(init=False)

    def __post_init__(self) -> None:
        channels = validate_channels(self.channels)
        object.__setattr__(self, "channels", channels)
        if not 0.0 <= self.c1 <= 1.0:
            raise ValueError(f"accuracy c1 must be in [0, 1], got {self.c1}")
        has_alpha = any(ch.band == "alpha" for ch in channels)
        object.__setattr__(self, "c2", 0.5 if has_alpha else 1.0)
        object.__setattr__(self, "c3", 1.0 / len(channels))

    def label(self) -> str:
        return "+".join(str(ch) for ch in self.channels)


def score_option(w: np.ndarray, option: ChannelOption) -> float:
    """Weighted score Q of one option, factors standardized by their maxima."""
    w = np.asarray(w, dtype=float)
    if w.shape != (3,):
        raise ValueError("priority vector must have 3 components")
    if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
        raise ValueError("priority vector must be nonnegative and sum to 1")
    factors = np.array([option.c1, option.c2, option.c3]) / np.asarray(FACTOR_MAXIMA)
    return float(w @ factors)


def select_channels(w: np.ndarray, options: list[ChannelOption]) -> ChannelOption:
    """Option with maximal Q; ties go to fewer channels, then gamma > beta > alpha."""
    if not options:
        raise ValueError("no channel options to select from")

    def sort_key(option: ChannelOption):
        bands = tuple(sorted(_BAND_PRIORITY[ch.band] for ch in option.channels))
        return (-score_option(w, option), len(option.channels), bands)

    return min(options, key=sort_key)
