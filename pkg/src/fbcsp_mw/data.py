"""Recordings, epochs, artifact rejection and session splits.

Signals are held in microvolts as ``(n_channels, n_samples)`` float arrays.
Markers are ``(onset_sample, label, session)`` triples.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

logger = logging.getLogger(__name__)

MARKER_HEADER = ("onset_sample", "label", "session")


class IngestionError(ValueError):
    """Malformed signal or marker file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f", line {line}"
            where += ": "
        super().__init__(where + message)


class MarkerBoundsError(IngestionError):
    pass


class SplitError(ValueError):
    """Session split cannot produce usable train/test partitions."""


class Marker(NamedTuple):
    sample: int
    label: int
    session: int


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Recording:
    """Continuous multichannel signal with stimulus markers."""

    samples: np.ndarray
    rate_hz: float
    channel_names: tuple
    markers: tuple = ()

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 2:
            raise ValueError("samples must be a 2-D (channels, samples) array")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_names", tuple(str(c) for c in self.channel_names))
        object.__setattr__(self, "markers", tuple(Marker(int(s), int(l), int(g))
                                                  for s, l, g in self.markers))
        if samples.shape[0] < 2:
            raise ValueError("a recording needs at least 2 channels")
        if not self.rate_hz > 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")
        if len(self.channel_names) != samples.shape[0]:
            raise ValueError(
                f"{len(self.channel_names)} channel names for {samples.shape[0]} channels")
        if len(set(self.channel_names)) != len(self.channel_names):
            raise ValueError("channel names must be unique")
        for m in self.markers:
            if not 0 <= m.sample < samples.shape[1]:
                raise MarkerBoundsError(
                    f"marker at sample {m.sample} outside signal of {samples.shape[1]} samples")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples) -> "Recording":
        return Recording(samples, self.rate_hz, self.channel_names, self.markers)


@dataclass(frozen=True)
class Epoch:
    """One stimulus-locked trial.

    ``band_data`` is only set when the continuous recording was band-pass
    filtered before epoching; it then has shape ``(n_bands, n_channels,
    n_samples)``.
    """

    data: np.ndarray
    label: int
    session_id: int
    onset_sample: int
    band_data: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data))
        if self.band_data is not None:
            object.__setattr__(self, "band_data", _frozen(self.band_data))

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ArtifactPolicy:
    amplitude_limit_uv: float = 75.0
    step_limit_uv: float = 150.0
    step_window_ms: float = 200.0
    demean_before_reject: bool = False

    def __post_init__(self):
        for name in ("amplitude_limit_uv", "step_limit_uv", "step_window_ms"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    def step_window_samples(self, rate_hz: float) -> int:
        return max(1, int(round(self.step_window_ms / 1000.0 * rate_hz)))


# -- ingestion ---------------------------------------------------------------

def load_recording(signal_path, markers_path=None, rate_hz: float = 128.0,
                   channel_names: Optional[Sequence[str]] = None) -> Recording:
    """Read a signal CSV (header of channel names) and an optional marker CSV.

    If ``channel_names`` is given the signal header must match it exactly.
    """
    signal_path = Path(signal_path)
    rows = []
    with open(signal_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty signal file", signal_path, 1) from None
        header = [h.strip() for h in header]
        if channel_names is not None and list(channel_names) != header:
            raise IngestionError(
                f"header {header} does not match declared channels {list(channel_names)}",
                signal_path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"expected {len(header)} columns, found {len(row)}", signal_path, lineno)
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                bad = next(v for v in row if not _is_float(v))
                raise IngestionError(f"non-numeric value {bad!r}", signal_path, lineno) from None
    samples = np.asarray(rows, dtype=float).reshape(-1, len(header)).T

    markers = []
    if markers_path is not None:
        markers = read_markers(markers_path)
        for lineno, m in markers:
            if not 0 <= m.sample < samples.shape[1]:
                raise MarkerBoundsError(
                    f"onset {m.sample} beyond signal length {samples.shape[1]}",
                    markers_path, lineno)
        markers = [m for _, m in markers]
    return Recording(samples, rate_hz, header, markers)


def _is_float(v) -> bool:
    try:
        float(v)
    except ValueError:
        return False
    return True


def read_markers(path):
    """Return ``[(line_number, Marker), ...]`` from a marker CSV."""
    path = Path(path)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader, ()))
        if header != MARKER_HEADER:
            raise IngestionError(f"marker header must be {','.join(MARKER_HEADER)}", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise IngestionError(f"expected 3 columns, found {len(row)}", path, lineno)
            try:
                out.append((lineno, Marker(*(int(v) for v in row))))
            except ValueError:
                raise IngestionError(f"non-integer marker field in {row}", path, lineno) from None
    return out


def write_recording(rec: Recording, signal_path, markers_path) -> None:
    """Write the CSV pair read by :func:`load_recording`."""
    with open(signal_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rec.channel_names)
        w.writerows([repr(float(v)) for v in row] for row in rec.samples.T)
    with open(markers_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MARKER_HEADER)
        w.writerows(rec.markers)


# -- epoching ----------------------------------------------------------------

def window_samples(window_seconds: float, rate_hz: float) -> int:
    return int(round(window_seconds * rate_hz))


def extract_epochs(rec: Recording, window_seconds: float, return_skipped: bool = False):
    """Cut one epoch per marker, ``[onset, onset + window)``.

    Markers whose window runs past the end of the recording are skipped.
    """
    n = window_samples(window_seconds, rec.rate_hz)
    if n < 1:
        raise ValueError(f"window of {window_seconds} s is shorter than one sample")
    epochs = []
    skipped = 0
    for m in rec.markers:
        if m.sample + n > rec.n_samples:
            skipped += 1
            continue
        epochs.append(Epoch(rec.samples[:, m.sample:m.sample + n], m.label, m.session, m.sample))
    if skipped:
        logger.warning("skipped %d epoch(s) overrunning the recording", skipped)
    if return_skipped:
        return epochs, skipped
    return epochs


# -- artifact rejection ------------------------------------------------------

def is_artifact(data: np.ndarray, policy: ArtifactPolicy, rate_hz: float) -> bool:
    x = np.asarray(data, dtype=float)
    if policy.demean_before_reject:
        x = x - x.mean(axis=1, keepdims=True)
    if np.any(np.abs(x) > policy.amplitude_limit_uv):
        return True
    win = min(policy.step_window_samples(rate_hz), x.shape[1])
    views = sliding_window_view(x, win, axis=1)
    ptp = views.max(axis=-1) - views.min(axis=-1)
    return bool(np.any(ptp > policy.step_limit_uv))


def reject_artifacts(epochs: Iterable[Epoch], policy: ArtifactPolicy, rate_hz: float):
    """Drop epochs breaking the amplitude or voltage-step rule.

    Returns ``(kept, rejected_count)``; kept epochs stay in input order.
    """
    kept = []
    rejected = 0
    for ep in epochs:
        if is_artifact(ep.data, policy, rate_hz):
            rejected += 1
        else:
            kept.append(ep)
    return kept, rejected


def split_by_session(epochs: Iterable[Epoch], train_sessions, test_sessions):
    train_sessions = set(train_sessions)
    test_sessions = set(test_sessions)
    overlap = train_sessions & test_sessions
    if overlap:
        raise SplitError(f"sessions {sorted(overlap)} are in both train and test")
    epochs = list(epochs)
    train = [e for e in epochs if e.session_id in train_sessions]
    test = [e for e in epochs if e.session_id in test_sessions]
    if not train:
        raise SplitError(f"no epochs in training sessions {sorted(train_sessions)}")
    if not test:
        raise SplitError(f"no epochs in test sessions {sorted(test_sessions)}")
    return train, test
