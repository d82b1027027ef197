"""Common Spatial Pattern filters for two-class band-power windows.

Pipeline: per-class covariances -> whitening of their sum -> eigenvectors of
the whitened concentration covariance. The eigenvector with the largest
eigenvalue maximizes the concentration/relaxation variance ratio (filter
``w_t``); the smallest does the opposite (``w_r``). Filter pairs computed on
separate data groups are sign-aligned and averaged before use.

The symmetric eigensolver is a cyclic Jacobi iteration (closed-form rotation
for 2x2), so results are exactly reproducible with no solver dependency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_core import Window

SYMMETRY_TOL = 1e-12
SINGULAR_EIGENVALUE_FLOOR = 1e-10
DISCRIMINATION_TOL = 1e-9


class DegenerateDataError(ValueError):
    """Input data cannot support a covariance estimate (e.g. all zeros)."""


class SingularCovarianceError(ValueError):
    """The composite covariance is numerically singular."""


@dataclass(frozen=True)
class SpatialFilterPair:
    """Unit-norm row filters for the two classes.

    ``discriminative`` is False when the two class covariances were
    indistinguishable (all generalized eigenvalues equal), in which case the
    filters are a deterministic but uninformative basis.
    """

    w_t: np.ndarray
    w_r: np.ndarray
    discriminative: bool = True

    def __post_init__(self) -> None:
        w_t = np.asarray(self.w_t, dtype=float).reshape(-1)
        w_r = np.asarray(self.w_r, dtype=float).reshape(-1)
        if w_t.shape != w_r.shape:
            raise ValueError("w_t and w_r must have the same length")
        for name, w in (("w_t", w_t), ("w_r", w_r)):
            if abs(np.linalg.norm(w) - 1.0) > 1e-9:
                raise ValueError(f"{name} is not unit-norm (|{name}| = {np.linalg.norm(w)})")
        w_t.flags.writeable = False
        w_r.flags.writeable = False
        object.__setattr__(self, "w_t", w_t)
        object.__setattr__(self, "w_r", w_r)

    @property
    def n_channels(self) -> int:
        return self.w_t.size


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its largest-magnitude component is positive."""
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns). For a 2x2
    input one rotation is exact, which is the closed-form solution.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(a))):
        raise ValueError("matrix is not symmetric")
    s = a.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(s, -1) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(s[p, q]) < tol / (n * n):
                    continue
                theta = 0.5 * np.arctan2(2.0 * s[p, q], s[p, p] - s[q, q])
                c, sn = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = -sn
                rot[q, p] = sn
                s = rot.T @ s @ rot
                v = v @ rot
    vals = np.diag(s).copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = v[:, order]
    for j in range(n):
        vecs[:, j] = _fix_sign(vecs[:, j])
    return vals, vecs


def class_covariance(windows: list[Window]) -> np.ndarray:
    """Mean over windows of (X X^T)/trace(X X^T), trace-normalized to 1."""
    if not windows:
        raise ValueError("cannot estimate a covariance from an empty window list")
    shape = windows[0].data.shape
    acc = np.zeros((shape[0], shape[0]))
    for w in windows:
        if w.data.shape != shape:
            raise ValueError(f"window shape {w.data.shape} differs from {shape}")
        prod = w.data @ w.data.T
        tr = np.trace(prod)
        if tr <= 0.0:
            raise DegenerateDataError("window with zero trace (all-zero data)")
        acc += prod / tr
    cov = acc / len(windows)
    cov = 0.5 * (cov + cov.T)
    return cov / np.trace(cov)


def compute_filters(cov_t: np.ndarray, cov_r: np.ndarray) -> SpatialFilterPair:
    """Solve cov_t w = lambda (cov_t + cov_r) w; extreme eigenvectors become filters.

    Whitens the composite covariance, eigendecomposes the whitened cov_t, and
    maps the extreme eigenvectors back. Both filters come out unit-norm with
    the largest-magnitude component positive.
    """
    cov_t = np.asarray(cov_t, dtype=float)
    cov_r = np.asarray(cov_r, dtype=float)
    if cov_t.shape != cov_r.shape or cov_t.ndim != 2:
        raise ValueError("covariances must be square matrices of equal shape")
    composite = cov_t + cov_r
    d, u = jacobi_eigh(composite)
    if d[0] <= SINGULAR_EIGENVALUE_FLOOR:
        raise SingularCovarianceError(
            f"composite covariance is singular: min eigenvalue {d[0]:.3e}"
        )
    # P whitens: P (cov_t + cov_r) P^T = I
    p = (u / np.sqrt(d)).T
    s_t = p @ cov_t @ p.T
    s_t = 0.5 * (s_t + s_t.T)
    lam, v = jacobi_eigh(s_t)
    w_t = p.T @ v[:, -1]
    w_r = p.T @ v[:, 0]
    w_t = _fix_sign(w_t / np.linalg.norm(w_t))
    w_r = _fix_sign(w_r / np.linalg.norm(w_r))
    discriminative = bool(lam[-1] - lam[0] > DISCRIMINATION_TOL)
    return SpatialFilterPair(w_t=w_t, w_r=w_r, discriminative=discriminative)


def average_filters(pairs: list[SpatialFilterPair]) -> SpatialFilterPair:
    """Sign-align every pair to the first, average componentwise, renormalize."""
    if not pairs:
        raise ValueError("cannot average an empty list of filter pairs")
    n = pairs[0].n_channels
    if any(p.n_channels != n for p in pairs):
        raise ValueError("filter pairs disagree on channel count")
    ref = pairs[0]
    acc_t = np.zeros(n)
    acc_r = np.zeros(n)
    for p in pairs:
        acc_t += -p.w_t if p.w_t @ ref.w_t < 0 else p.w_t
        acc_r += -p.w_r if p.w_r @ ref.w_r < 0 else p.w_r
    acc_t /= len(pairs)
    acc_r /= len(pairs)
    norm_t, norm_r = np.linalg.norm(acc_t), np.linalg.norm(acc_r)
    if norm_t < 1e-9 or norm_r < 1e-9:
        raise ValueError("averaged filter cancelled to (near-)zero norm")
    return SpatialFilterPair(
        w_t=acc_t / norm_t,
        w_r=acc_r / norm_r,
        discriminative=all(p.discriminative for p in pairs),
    )


def apply_filters(pair: SpatialFilterPair, w: Window) -> np.ndarray:
    """Project a window through both filters: [w_t X | w_r X], length 2T."""
    if pair.n_channels != w.n_channels:
        raise ValueError(
            f"filters have {pair.n_channels} channels, window has {w.n_channels}"
        )
    return np.concatenate([pair.w_t @ w.data, pair.w_r @ w.data])


def rayleigh_grid_argmax(cov_t: np.ndarray, cov_r: np.ndarray,
                         n_points: int = 3601) -> np.ndarray:
    """Brute-force the 2-channel variance-ratio maximizer over an angle grid.

    Independent check for :func:`compute_filters`: sweeps unit vectors at
    0.05 degree steps over half the circle and returns the quotient argmax.
    """
    if cov_t.shape != (2, 2):
        raise ValueError("grid search is defined for 2-channel covariances only")
    angles = np.deg2rad(np.arange(n_points) * 0.05)
    dirs = np.stack([np.cos(angles), np.sin(angles)])  # (2, n)
    num = np.einsum("in,ij,jn->n", dirs, cov_t, dirs)
    den = np.einsum("in,ij,jn->n", dirs, cov_r, dirs)
    return dirs[:, int(np.argmax(num / den))]
