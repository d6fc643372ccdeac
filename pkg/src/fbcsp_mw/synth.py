"""Seeded synthetic EEG with planted band-limited class effects.

Each channel is a linear mixture of band-limited sources plus white noise::

    x(t) = sum_s mixing_s * a_s(t) + noise(t)

``a_s`` is white noise band-passed to the source band and scaled to the
variance given by ``power_by_class`` for the block's workload class.
Recordings are laid out like the n-back protocol: per session one block per
class, trials every ``trial_spacing_s`` seconds, and a tail after each block
so the longest analysis window still fits inside it.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .config import DEFAULT_CHANNELS, ConfigError
from .data import Recording
from .filterbank import BandpassFilter, BandSpec

# relative topographies over the default 12-channel montage
PARIETAL_ALPHA = {"P7": 1.0, "P8": 0.9, "O1": 0.8, "O2": 0.75, "T7": 0.55, "T8": 0.5,
                  "FC5": 0.3, "FC6": 0.25, "F3": 0.15, "F4": 0.1}
OCCIPITAL_ALPHA = {"O1": 1.0, "O2": 1.0, "P7": 0.8, "P8": 0.85, "T7": 0.6, "T8": 0.6,
                   "FC5": 0.4, "FC6": 0.45, "F3": 0.3, "F4": 0.3}
FRONTAL_THETA = {"F3": 1.0, "F4": 0.95, "FC5": 0.7, "FC6": 0.65, "T7": 0.2, "T8": 0.2}
TEMPORAL_BETA = {"T7": 1.0, "T8": 0.9, "FC5": 0.5, "FC6": 0.5, "P7": 0.3, "P8": 0.3}
DISTRACTOR_CHANNELS = ("F7", "F8")


@dataclass(frozen=True)
class SourceSpec:
    band: BandSpec
    mixing_vector: tuple
    power_by_class: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "mixing_vector", tuple(float(v) for v in self.mixing_vector))
        object.__setattr__(self, "power_by_class",
                           {int(k): float(v) for k, v in dict(self.power_by_class).items()})
        if not any(self.mixing_vector):
            raise ValueError("mixing vector must be nonzero")
        if any(not p > 0 for p in self.power_by_class.values()):
            raise ValueError("source powers must be positive")

    @property
    def informative(self) -> bool:
        return len(set(self.power_by_class.values())) > 1

    def to_dict(self) -> dict:
        return {"band": [self.band.low_hz, self.band.high_hz],
                "mixing_vector": list(self.mixing_vector),
                "power_by_class": {str(k): v for k, v in sorted(self.power_by_class.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "SourceSpec":
        return cls(BandSpec(*map(float, d["band"])), d["mixing_vector"],
                   {int(k): v for k, v in d["power_by_class"].items()})


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    sources: tuple = ()
    noise_sigma_uv: float = 5.0
    n_channels: int = 12
    rate_hz: float = 128.0
    channel_names: tuple = DEFAULT_CHANNELS
    classes: tuple = (0, 1, 2)
    trials_per_class_per_session: int = 60
    n_sessions: int = 4
    trial_spacing_s: float = 2.0
    block_tail_s: float = 6.0
    shuffle_blocks: bool = True
    spike_fraction: float = 0.0
    spike_amplitude_uv: float = 120.0
    filter_order: int = 4

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
        self.validate()

    def validate(self, where: str = "synth") -> None:
        if self.seed is None:
            raise ConfigError(f"{where}.seed", "a seed is required")
        if len(self.channel_names) != self.n_channels:
            raise ConfigError(f"{where}.channel_names",
                              f"{len(self.channel_names)} names for {self.n_channels} channels")
        if self.n_channels < 2:
            raise ConfigError(f"{where}.n_channels", "must be >= 2")
        if not self.rate_hz > 0:
            raise ConfigError(f"{where}.rate_hz", "must be positive")
        if self.noise_sigma_uv < 0:
            raise ConfigError(f"{where}.noise_sigma_uv", "must be >= 0")
        if self.trials_per_class_per_session < 1:
            raise ConfigError(f"{where}.trials_per_class_per_session", "must be >= 1")
        if self.n_sessions < 1:
            raise ConfigError(f"{where}.n_sessions", "must be >= 1")
        if not 0 <= self.spike_fraction <= 1:
            raise ConfigError(f"{where}.spike_fraction", "must lie in [0, 1]")
        for i, s in enumerate(self.sources):
            if len(s.mixing_vector) != self.n_channels:
                raise ConfigError(f"{where}.sources[{i}].mixing_vector",
                                  f"length {len(s.mixing_vector)} != {self.n_channels}")
            missing = set(self.classes) - set(s.power_by_class)
            if missing:
                raise ConfigError(f"{where}.sources[{i}].power_by_class",
                                  f"no power for classes {sorted(missing)}")
            try:
                s.band.check_rate(self.rate_hz)
            except ValueError as exc:
                raise ConfigError(f"{where}.sources[{i}].band", str(exc)) from None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sources"] = [s.to_dict() for s in self.sources]
        d["channel_names"] = list(self.channel_names)
        d["classes"] = list(self.classes)
        return d

    @classmethod
    def from_dict(cls, d: dict, where: str = "synth") -> "SynthConfig":
        d = dict(d)
        allowed = {f.name for f in dataclasses.fields(cls)} | {"preset", "power_ratio"}
        for key in d:
            if key not in allowed:
                raise ConfigError(f"{where}.{key}", "unknown key")
        if d.get("seed") is None:
            raise ConfigError(f"{where}.seed", "a seed is required")
        preset = d.pop("preset", None)
        if preset is not None:
            builders = {"planted_alpha": planted_alpha_config, "null": null_config}
            if preset not in builders:
                raise ConfigError(f"{where}.preset", f"unknown preset {preset!r}")
            kwargs = {k: d.pop(k) for k in list(d) if k in ("power_ratio", "noise_sigma_uv")}
            base = builders[preset](int(d.pop("seed")), **kwargs)
            try:
                return dataclasses.replace(base, **d)
            except TypeError as exc:
                raise ConfigError(where, str(exc)) from None
        if "power_ratio" in d:
            raise ConfigError(f"{where}.power_ratio", "only valid together with a preset")
        try:
            d["sources"] = tuple(SourceSpec.from_dict(s) for s in d.get("sources", ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.sources", str(exc)) from None
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(where, str(exc)) from None

    @property
    def trial_samples(self) -> int:
        return int(round(self.trial_spacing_s * self.rate_hz))

    @property
    def block_samples(self) -> int:
        tail = int(round(self.block_tail_s * self.rate_hz))
        return self.trials_per_class_per_session * self.trial_samples + tail


def topography(weights: Mapping[str, float], channel_names: Sequence[str] = DEFAULT_CHANNELS):
    return tuple(float(weights.get(c, 0.0)) for c in channel_names)


def _band_noise(rng, filt: BandpassFilter, n: int) -> np.ndarray:
    """Unit-variance white noise band-passed to ``filt``'s band."""
    pad = filt.settling_samples
    w = rng.standard_normal(n + 2 * pad)
    y = filt(w)[pad:pad + n]
    return y / np.sqrt(filt.power_gain())


def generate(config: SynthConfig) -> Recording:
    """Synthesize a recording; identical configs give identical output."""
    rng = np.random.default_rng(config.seed)
    filters = [BandpassFilter(s.band, config.rate_hz, config.filter_order)
               for s in config.sources]
    mixing = [np.asarray(s.mixing_vector)[:, None] for s in config.sources]
    n_block = config.block_samples
    step = config.trial_samples

    chunks, markers = [], []
    offset = 0
    for session in range(1, config.n_sessions + 1):
        order = list(config.classes)
        if config.shuffle_blocks:
            order = [order[i] for i in rng.permutation(len(order))]
        for label in order:
            x = config.noise_sigma_uv * rng.standard_normal((config.n_channels, n_block))
            for src, filt, mix in zip(config.sources, filters, mixing):
                amp = np.sqrt(src.power_by_class[label])
                x += mix * (amp * _band_noise(rng, filt, n_block))
            for t in range(config.trials_per_class_per_session):
                onset = t * step
                if config.spike_fraction and rng.random() < config.spike_fraction:
                    ch = rng.integers(config.n_channels)
                    x[ch, onset + rng.integers(step)] += config.spike_amplitude_uv
                markers.append((offset + onset, label, session))
            chunks.append(x)
            offset += n_block
    return Recording(np.concatenate(chunks, axis=1), config.rate_hz, config.channel_names,
                     markers)


def ground_truth(config: SynthConfig) -> list[dict]:
    """Bands and topographies of the sources whose power depends on the class."""
    return [{"band": (s.band.low_hz, s.band.high_hz),
             "topography": s.mixing_vector,
             "power_by_class": dict(s.power_by_class)}
            for s in config.sources if s.informative]


def analytic_channel_variance(config: SynthConfig, label: int) -> np.ndarray:
    var = np.full(config.n_channels, config.noise_sigma_uv ** 2)
    for s in config.sources:
        var = var + np.asarray(s.mixing_vector) ** 2 * s.power_by_class[label]
    return var


# -- presets -----------------------------------------------------------------

def _background_sources(classes, channel_names, alpha_power):
    # class-independent rhythms; the alpha one overlaps the planted source
    def flat(p):
        return {c: p for c in classes}
    return (
        SourceSpec(BandSpec(8.0, 12.0), topography(OCCIPITAL_ALPHA, channel_names),
                   flat(alpha_power)),
        SourceSpec(BandSpec(4.0, 8.0), topography(FRONTAL_THETA, channel_names), flat(16.0)),
        SourceSpec(BandSpec(16.0, 20.0), topography(TEMPORAL_BETA, channel_names), flat(9.0)),
    )


def planted_alpha_config(seed: int, power_ratio: float = 6.0, noise_sigma_uv: float = 5.0,
                         base_power: float = 9.0, background_alpha_power: float = 25.0,
                         **overrides) -> SynthConfig:
    """One informative parietal alpha source plus class-independent rhythms.

    Alpha power is ``base_power`` for class 0, ``base_power * power_ratio``
    for the highest class and geometric in between. A second, class-independent
    alpha rhythm overlaps it spatially. ``F7``/``F8`` get no source at all and
    hold white noise only.
    """
    classes = tuple(overrides.pop("classes", (0, 1, 2)))
    names = tuple(overrides.pop("channel_names", DEFAULT_CHANNELS))
    steps = np.linspace(0.0, 1.0, len(classes))
    alpha_power = {c: base_power * power_ratio ** s for c, s in zip(classes, steps)}
    alpha = SourceSpec(BandSpec(8.0, 12.0), topography(PARIETAL_ALPHA, names), alpha_power)
    background = _background_sources(classes, names, background_alpha_power)
    return SynthConfig(seed=seed, sources=(alpha,) + background,
                       noise_sigma_uv=noise_sigma_uv, classes=classes, channel_names=names,
                       n_channels=len(names), **overrides)


def null_config(seed: int, noise_sigma_uv: float = 5.0, **overrides) -> SynthConfig:
    """Same layout as :func:`planted_alpha_config` with no class effect."""
    return planted_alpha_config(seed, power_ratio=1.0, noise_sigma_uv=noise_sigma_uv,
                                **overrides)


def planted_features(n_trials: int, n_features: int, informative: Sequence[int],
                     shift: float = 1.5, seed: Optional[int] = 0):
    """Gaussian feature matrix whose ``informative`` columns differ in mean by ``shift``."""
    rng = np.random.default_rng(seed)
    y = np.arange(n_trials) % 2
    X = rng.standard_normal((n_trials, n_features))
    X[:, list(informative)] += shift * y[:, None]
    return X, y
