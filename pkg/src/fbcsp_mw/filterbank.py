"""Zero-phase Butterworth filter bank."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import signal

from .data import Epoch, Recording, extract_epochs

# tail energy of the impulse response below this fraction counts as settled
SETTLE_TAIL_ENERGY = 1e-3


class FilterLengthError(ValueError):
    pass


class BandError(ValueError):
    pass


@dataclass(frozen=True)
class BandSpec:
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz:
            raise BandError(f"invalid band ({self.low_hz}, {self.high_hz})")

    def check_rate(self, rate_hz: float) -> None:
        if self.high_hz >= rate_hz / 2:
            raise BandError(
                f"band ({self.low_hz}, {self.high_hz}) Hz reaches Nyquist of {rate_hz / 2} Hz")

    @property
    def label(self) -> str:
        return f"{self.low_hz:g}-{self.high_hz:g}Hz"


def default_bands() -> list[BandSpec]:
    """The nine 4 Hz bands 4-8, 8-12, ..., 36-40 Hz."""
    return [BandSpec(float(lo), float(lo + 4)) for lo in range(4, 40, 4)]


@dataclass(frozen=True)
class BandpassFilter:
    """Butterworth band-pass of the given order, applied forward and backward."""

    band: BandSpec
    rate_hz: float
    order: int = 4

    def __post_init__(self):
        self.band.check_rate(self.rate_hz)
        if self.order < 1:
            raise ValueError("filter order must be >= 1")

    @cached_property
    def sos(self) -> np.ndarray:
        return signal.butter(self.order, [self.band.low_hz, self.band.high_hz],
                             btype="bandpass", fs=self.rate_hz, output="sos")

    @cached_property
    def settling_samples(self) -> int:
        """Samples until the impulse response tail holds < 0.1 % of its energy."""
        n = int(20 * self.rate_hz)
        imp = np.zeros(n)
        imp[0] = 1.0
        h = signal.sosfilt(self.sos, imp)
        tail = np.cumsum((h ** 2)[::-1])[::-1] / np.sum(h ** 2)
        return int(np.argmax(tail < SETTLE_TAIL_ENERGY))

    def power_gain(self, n_freqs: int = 16384) -> float:
        """Output variance for unit-variance white noise input (both passes)."""
        _, h = signal.sosfreqz(self.sos, worN=n_freqs)
        return float(np.mean(np.abs(h) ** 4))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        if n <= 3 * self.order:
            raise FilterLengthError(
                f"{n} samples is too short for an order-{self.order} filter "
                f"(need more than {3 * self.order})")
        padlen = min(self.settling_samples, n - 1)
        return signal.sosfiltfilt(self.sos, x, axis=-1, padtype="even", padlen=padlen)


def bandpass(x: np.ndarray, band: BandSpec, rate_hz: float, order: int = 4) -> np.ndarray:
    """Zero-phase band-pass along the last axis; each row is filtered independently."""
    return BandpassFilter(band, rate_hz, order)(x)


class FilterBank:
    """Ordered set of band-pass filters sharing one sampling rate."""

    def __init__(self, bands: Sequence[BandSpec] | None = None, rate_hz: float = 128.0,
                 order: int = 4):
        bands = list(default_bands() if bands is None else bands)
        if not bands:
            raise ValueError("a filter bank needs at least one band")
        self.bands = tuple(sorted(bands, key=lambda b: (b.low_hz, b.high_hz)))
        self.rate_hz = float(rate_hz)
        self.order = int(order)
        self.filters = tuple(BandpassFilter(b, self.rate_hz, self.order) for b in self.bands)

    def __len__(self):
        return len(self.bands)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Filter ``x`` (..., samples) through every band; the band axis is prepended."""
        return np.stack([f(x) for f in self.filters])

    def decompose(self, epoch: Epoch) -> list[np.ndarray]:
        if epoch.band_data is not None:
            if epoch.band_data.shape[0] != len(self):
                raise ValueError("epoch was pre-filtered with a different bank")
            return list(epoch.band_data)
        return list(self.apply(epoch.data))


def decompose(epoch: Epoch, bank: FilterBank, rate_hz: float | None = None) -> list[np.ndarray]:
    if rate_hz is not None and rate_hz != bank.rate_hz:
        bank = FilterBank(bank.bands, rate_hz, bank.order)
    return bank.decompose(epoch)


def band_cube(epochs: Sequence[Epoch], bank: FilterBank) -> np.ndarray:
    """Filtered epochs as one ``(n_epochs, n_bands, n_channels, n_samples)`` array."""
    if not epochs:
        raise ValueError("no epochs to filter")
    if all(e.band_data is not None for e in epochs):
        return np.stack([e.band_data for e in epochs])
    if any(e.band_data is not None for e in epochs):
        raise ValueError("mixed pre-filtered and raw epochs")
    raw = np.stack([e.data for e in epochs])
    return np.moveaxis(bank.apply(raw), 0, 1)


def extract_filtered_epochs(rec: Recording, window_seconds: float, bank: FilterBank,
                            return_skipped: bool = False):
    """Filter the continuous recording per band, then epoch.

    ``Epoch.data`` keeps the broadband signal (artifact rejection uses it);
    the band-passed segments go in ``Epoch.band_data``.
    """
    filtered = bank.apply(rec.samples)
    epochs, skipped = extract_epochs(rec, window_seconds, return_skipped=True)
    out = []
    for e in epochs:
        n = e.n_samples
        seg = filtered[:, :, e.onset_sample:e.onset_sample + n]
        out.append(Epoch(e.data, e.label, e.session_id, e.onset_sample, band_data=seg))
    if return_skipped:
        return out, skipped
    return out
