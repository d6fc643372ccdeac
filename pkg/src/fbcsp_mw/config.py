"""Configuration objects and the YAML run-config loader.

Defaults follow the reference protocol: nine 4 Hz bands over 4-40 Hz,
order-4 Butterworth, m=2, 10-fold CV, 128 Hz, windows of 2, 4 and 6 s,
sessions 1-3 for training and 4 for testing.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .data import ArtifactPolicy
from .filterbank import BandSpec, default_bands

DEFAULT_CHANNELS = ("F3", "F4", "F7", "F8", "FC5", "FC6", "T7", "T8", "P7", "P8", "O1", "O2")
MODEL_KINDS = ("FBCSP_FS", "FBCSP_AllF", "BP_AllF", "BP_FS")
DEFAULT_PAIRS = ((0, 1), (0, 2), (1, 2))
DEFAULT_WINDOWS = (2.0, 4.0, 6.0)

_FIELD_TYPES = {
    "rate_hz": "number", "window_seconds": "number",
    "filter_order": "int", "m": "int", "bins": "int", "folds": "int", "seed": "int",
    "filter_continuous": "bool", "bp_log": "bool",
}


class ConfigError(ValueError):
    """Invalid configuration; ``location`` is the dotted path of the bad key."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


@dataclass(frozen=True)
class PipelineConfig:
    rate_hz: float = 128.0
    bands: tuple = tuple((b.low_hz, b.high_hz) for b in default_bands())
    filter_order: int = 4
    filter_continuous: bool = False
    m: int = 2
    window_seconds: float = 2.0
    artifact: ArtifactPolicy = field(default_factory=ArtifactPolicy)
    cov_normalization: str = "trace"
    ridge: Optional[float] = None
    bins: int = 10
    folds: int = 10
    candidate_ns: Optional[tuple] = None
    seed: int = 0
    bp_log: bool = True

    def band_specs(self) -> list[BandSpec]:
        return [BandSpec(float(lo), float(hi)) for lo, hi in self.bands]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["bands"] = [[float(lo), float(hi)] for lo, hi in self.bands]
        d["candidate_ns"] = None if self.candidate_ns is None else list(self.candidate_ns)
        return d

    @classmethod
    def from_dict(cls, d: dict, where: str = "pipeline") -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError(where, "must be a mapping")
        d = dict(d)
        _reject_unknown(d, {f.name for f in dataclasses.fields(cls)}, where)
        for key, value in d.items():
            kind = _FIELD_TYPES.get(key)
            if kind == "int" and not (_is_number(value) and float(value).is_integer()):
                raise ConfigError(f"{where}.{key}", "must be an integer")
            if kind == "number" and not _is_number(value):
                raise ConfigError(f"{where}.{key}", "must be a number")
            if kind == "bool" and not isinstance(value, bool):
                raise ConfigError(f"{where}.{key}", "must be true or false")
        if d.get("ridge") is not None and not _is_number(d["ridge"]):
            raise ConfigError(f"{where}.ridge", "must be a number or null")
        if d.get("candidate_ns") is not None:
            ns = d["candidate_ns"]
            if not isinstance(ns, list) or not all(isinstance(n, int) and not isinstance(n, bool)
                                                   for n in ns):
                raise ConfigError(f"{where}.candidate_ns", "must be a list of integers or null")
        if "artifact" in d and not isinstance(d["artifact"], (dict, type(None))):
            raise ConfigError(f"{where}.artifact", "must be a mapping")
        if "artifact" in d:
            art = dict(d["artifact"] or {})
            _reject_unknown(art, {f.name for f in dataclasses.fields(ArtifactPolicy)},
                            f"{where}.artifact")
            for key, value in art.items():
                if key != "demean_before_reject" and not _is_number(value):
                    raise ConfigError(f"{where}.artifact.{key}", "must be a number")
            try:
                d["artifact"] = ArtifactPolicy(**art)
            except (TypeError, ValueError) as exc:
                bad = next((k for k in art if str(exc).startswith(k)), None)
                loc = f"{where}.artifact" + (f".{bad}" if bad else "")
                raise ConfigError(loc, str(exc)) from None
        if "bands" in d:
            try:
                d["bands"] = tuple((float(lo), float(hi)) for lo, hi in d["bands"])
                [BandSpec(lo, hi) for lo, hi in d["bands"]]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}.bands", f"expected [[low, high], ...]: {exc}") from None
        if d.get("candidate_ns") is not None:
            d["candidate_ns"] = tuple(d["candidate_ns"])
        for key in ("filter_order", "m", "bins", "folds", "seed"):
            if key in d:
                d[key] = int(d[key])
        cfg = cls(**d)
        cfg.validate(where)
        return cfg

    def validate(self, where: str = "pipeline") -> None:
        checks = [
            ("rate_hz", self.rate_hz > 0, "must be positive"),
            ("filter_order", int(self.filter_order) >= 1, "must be >= 1"),
            ("m", int(self.m) >= 1, "must be >= 1"),
            ("window_seconds", self.window_seconds > 0, "must be positive"),
            ("bins", int(self.bins) >= 2, "must be >= 2"),
            ("folds", int(self.folds) >= 2, "must be >= 2"),
            ("cov_normalization", self.cov_normalization in ("trace", "none"),
             "must be 'trace' or 'none'"),
            ("ridge", self.ridge is None or self.ridge >= 0, "must be >= 0"),
            ("bands", len(self.bands) >= 1, "needs at least one band"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{where}.{key}", msg)
        for i, (lo, hi) in enumerate(self.bands):
            if hi >= self.rate_hz / 2:
                raise ConfigError(f"{where}.bands[{i}]", f"{hi} Hz reaches Nyquist")


@dataclass(frozen=True)
class ExperimentConfig:
    kinds: tuple = MODEL_KINDS
    pairs: tuple = DEFAULT_PAIRS
    windows: tuple = DEFAULT_WINDOWS
    train_sessions: tuple = (1, 2, 3)
    test_sessions: tuple = (4,)

    @classmethod
    def from_dict(cls, d: dict, where: str = "experiment") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError(where, "must be a mapping")
        d = dict(d)
        _reject_unknown(d, {f.name for f in dataclasses.fields(cls)}, where)
        try:
            if "kinds" in d:
                d["kinds"] = tuple(str(k) for k in d["kinds"])
            if "pairs" in d:
                d["pairs"] = tuple((int(a), int(b)) for a, b in d["pairs"])
            if "windows" in d:
                d["windows"] = tuple(float(w) for w in d["windows"])
            for key in ("train_sessions", "test_sessions"):
                if key in d:
                    d[key] = tuple(int(s) for s in d[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(where, str(exc)) from None
        cfg = cls(**d)
        cfg.validate(where)
        return cfg

    def validate(self, where: str = "experiment") -> None:
        for i, k in enumerate(self.kinds):
            if k not in MODEL_KINDS:
                raise ConfigError(f"{where}.kinds[{i}]", f"unknown model kind {k!r}")
        for i, (a, b) in enumerate(self.pairs):
            if a == b:
                raise ConfigError(f"{where}.pairs[{i}]", "a pair needs two different classes")
        for i, w in enumerate(self.windows):
            if not w > 0:
                raise ConfigError(f"{where}.windows[{i}]", "must be positive")
        if set(self.train_sessions) & set(self.test_sessions):
            raise ConfigError(f"{where}.test_sessions", "overlaps train_sessions")
        if not self.train_sessions:
            raise ConfigError(f"{where}.train_sessions", "must not be empty")
        if not self.test_sessions:
            raise ConfigError(f"{where}.test_sessions", "must not be empty")


@dataclass(frozen=True)
class Paths:
    data_dir: Path = Path("data")
    output_dir: Path = Path("out")
    signal_file: str = "signal.csv"
    markers_file: str = "markers.csv"

    @property
    def signal(self) -> Path:
        return self.data_dir / self.signal_file

    @property
    def markers(self) -> Path:
        return self.data_dir / self.markers_file


@dataclass(frozen=True)
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    synth: Optional[dict] = None
    channel_names: Optional[tuple] = None


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}", "unknown key")


def parse_run_config(raw: Any, base_dir: Path = Path(".")) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    _reject_unknown(raw, {"paths", "pipeline", "experiment", "synth", "channel_names"}, "<root>")

    p = dict(raw.get("paths") or {})
    _reject_unknown(p, {"data_dir", "output_dir", "signal_file", "markers_file"}, "paths")
    paths = Paths(
        data_dir=(base_dir / p.get("data_dir", "data")),
        output_dir=(base_dir / p.get("output_dir", "out")),
        signal_file=p.get("signal_file", "signal.csv"),
        markers_file=p.get("markers_file", "markers.csv"),
    )
    try:
        pipeline = PipelineConfig.from_dict(raw.get("pipeline") or {})
        experiment = ExperimentConfig.from_dict(raw.get("experiment") or {})
    except TypeError as exc:
        raise ConfigError("<root>", str(exc)) from None
    channels = raw.get("channel_names")
    if channels is not None:
        channels = tuple(str(c) for c in channels)
    synth = raw.get("synth")
    if synth is not None and not isinstance(synth, dict):
        raise ConfigError("synth", "must be a mapping")
    return RunConfig(paths, pipeline, experiment, synth, channels)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not valid YAML: {exc}") from None
    return parse_run_config(raw, path.parent)
