"""Two-class common spatial patterns.

Filters are rows of ``W``. They solve ``C1 w = lambda (C1 + C2) w`` and are
normalised so that ``W (C1 + C2) W.T = I`` and ``W C1 W.T = diag(lambda)``
with ``lambda`` descending in [0, 1].
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

# composite covariance counts as rank-deficient below this fraction of trace/N
SINGULAR_RTOL = 1e-10
DEFAULT_RIDGE_RTOL = 1e-9
VAR_FLOOR_RTOL = 1e-12


class DegenerateTrialError(ValueError):
    pass


class CspConditioningError(np.linalg.LinAlgError):
    def __init__(self, smallest_eigenvalue, band_index=None):
        self.smallest_eigenvalue = smallest_eigenvalue
        self.band_index = band_index
        where = "" if band_index is None else f"band {band_index}: "
        super().__init__(f"{where}composite covariance is singular "
                         f"(smallest eigenvalue {smallest_eigenvalue:.3e})")


@dataclass(frozen=True)
class ClassCovariance:
    matrix: np.ndarray
    class_id: int
    trial_count: int


@dataclass(frozen=True)
class CspTransform:
    W: np.ndarray
    eigenvalues: np.ndarray
    m: int = 2
    ridge: float = 0.0

    def __post_init__(self):
        n = self.W.shape[0]
        if not (1 <= self.m and 2 * self.m <= n):
            raise ValueError(f"m={self.m} needs 2m <= {n} channels")

    @property
    def n_channels(self) -> int:
        return self.W.shape[1]

    def selected(self) -> np.ndarray:
        return select_filters(self)


@dataclass(frozen=True)
class BandFeatures:
    values: np.ndarray
    band_index: int = 0
    clamped: bool = False


def trial_covariance(x: np.ndarray, normalization: str = "trace") -> np.ndarray:
    """``X X^T`` divided by its trace (or raw when ``normalization='none'``)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("trial must be (channels, samples) with at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("trial contains non-finite values")
    c = x @ x.T
    tr = np.trace(c)
    if tr <= 0:
        raise DegenerateTrialError("all-zero trial has no covariance")
    c = 0.5 * (c + c.T)
    if normalization == "trace":
        return c / tr
    if normalization == "none":
        return c
    raise ValueError(f"unknown covariance normalization {normalization!r}")


def average_covariance(trials: Sequence[np.ndarray], class_id: int = 0,
                       normalization: str = "trace") -> ClassCovariance:
    if len(trials) == 0:
        raise ValueError(f"no trials for class {class_id}")
    mean = np.mean([trial_covariance(t, normalization) for t in trials], axis=0)
    return ClassCovariance(mean, class_id, len(trials))


def _sign_rows(W: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(W), axis=1)
    signs = np.sign(W[np.arange(W.shape[0]), idx])
    signs[signs == 0] = 1.0
    return W * signs[:, None]


def solve_csp(c1, c2, ridge: float | None = None, m: int = 2) -> CspTransform:
    """Solve the two-class CSP eigenproblem by whitening ``C1 + C2``.

    ``ridge=None`` adds ``1e-9 * trace/N`` to the diagonal only when the
    composite covariance is rank-deficient; an explicit value is always added.
    """
    c1 = getattr(c1, "matrix", c1)
    c2 = getattr(c2, "matrix", c2)
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if c1.shape != c2.shape or c1.ndim != 2 or c1.shape[0] != c1.shape[1]:
        raise ValueError(f"covariance shapes {c1.shape} and {c2.shape} do not conform")
    n = c1.shape[0]
    if not 1 <= m <= n // 2:
        raise ValueError(f"m={m} needs 2m <= {n} channels")
    c1 = 0.5 * (c1 + c1.T)
    composite = c1 + 0.5 * (c2 + c2.T)
    scale = np.trace(composite) / n
    if not scale > 0:
        raise CspConditioningError(0.0)

    evals, evecs = np.linalg.eigh(composite)
    if ridge is None:
        ridge = DEFAULT_RIDGE_RTOL * scale if evals[0] < SINGULAR_RTOL * scale else 0.0
    elif ridge < 0:
        raise ValueError("ridge must be >= 0")
    evals = evals + ridge
    if evals[0] <= SINGULAR_RTOL * scale * 1e-3:
        raise CspConditioningError(float(evals[0]))

    whitener = evecs / np.sqrt(evals)  # columns scaled, P = whitener.T
    s1 = whitener.T @ c1 @ whitener
    s1 = 0.5 * (s1 + s1.T)
    d, b = np.linalg.eigh(s1)
    order = np.argsort(-d, kind="stable")
    d = d[order]
    W = (whitener @ b[:, order]).T
    W = _sign_rows(W)
    # whitened C1 + (C2 + ridge) = I, so eigenvalues lie in [0, 1] up to rounding
    d = np.clip(d, 0.0, 1.0)
    return CspTransform(W, d, m, float(ridge))


def select_filters(t: CspTransform, m: int | None = None) -> np.ndarray:
    """First ``m`` and last ``m`` rows of ``W``, in that order."""
    m = t.m if m is None else m
    n = t.W.shape[0]
    if not 1 <= m <= n // 2:
        raise ValueError(f"m={m} needs 2m <= {n} channels")
    return np.vstack([t.W[:m], t.W[n - m:]])


def spatial_filter(x: np.ndarray, w_sel: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w_sel = np.asarray(w_sel, dtype=float)
    if w_sel.shape[-1] != x.shape[-2]:
        raise ValueError(f"filters of width {w_sel.shape[-1]} cannot project "
                         f"{x.shape[-2]} channels")
    return w_sel @ x


def log_variance_features(z: np.ndarray, band_index: int = 0) -> BandFeatures:
    """``log(diag(Z Z^T) / trace(Z Z^T))``.

    Zero-variance rows are clamped to ``log(1e-12)`` and flagged.
    """
    z = np.asarray(z, dtype=float)
    power = np.einsum("ij,ij->i", z, z)
    total = power.sum()
    if not total > 0:
        raise DegenerateTrialError("projected trial has zero power")
    floor = VAR_FLOOR_RTOL * total
    clamped = bool(np.any(power < floor))
    if clamped:
        logger.debug("band %d: clamped %d zero-variance filter outputs",
                     band_index, int(np.sum(power < floor)))
    return BandFeatures(np.log(np.maximum(power, floor) / total), band_index, clamped)


def log_variance_batch(z: np.ndarray) -> np.ndarray:
    """Vectorised :func:`log_variance_features` over leading axes of ``(..., 2m, samples)``."""
    power = np.einsum("...ij,...ij->...i", z, z)
    total = power.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise DegenerateTrialError("projected trial has zero power")
    return np.log(np.maximum(power, VAR_FLOOR_RTOL * total) / total)


def fit_band_csp(trials_a: np.ndarray, trials_b: np.ndarray, m: int = 2,
                 ridge: float | None = None, normalization: str = "trace",
                 band_index: int | None = None) -> CspTransform:
    """Fit CSP to two stacks of ``(trials, channels, samples)`` band-passed data."""
    ca = average_covariance(list(trials_a), 0, normalization)
    cb = average_covariance(list(trials_b), 1, normalization)
    try:
        return solve_csp(ca, cb, ridge=ridge, m=m)
    except CspConditioningError as exc:
        raise CspConditioningError(exc.smallest_eigenvalue, band_index) from None
