"""Training and evaluation of the four workload models.

``FBCSP_FS``   filter bank + CSP log-variance features, MI-selected top n
``FBCSP_AllF`` filter bank + CSP, every feature
``BP_AllF``    per-channel log band power, every feature
``BP_FS``      per-channel log band power, MI-selected top n

All four finish with Gaussian naive Bayes on one pair of workload classes.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import classifier
from .classifier import GaussianNbModel
from .config import ExperimentConfig, PipelineConfig
from .csp import CspTransform, fit_band_csp, log_variance_batch, select_filters
from .data import (Epoch, Recording, extract_epochs, reject_artifacts,
                   split_by_session, window_samples)
from .filterbank import FilterBank, band_cube, extract_filtered_epochs
from .selection import ColumnMeta, FeatureMatrix, select_top_n_cv

logger = logging.getLogger(__name__)

MODEL_FORMAT = "fbcsp-mw-model"
MODEL_VERSION = 1
POWER_FLOOR_RTOL = 1e-12
SUMMARY_FIELDS = ("model", "pair", "window", "accuracy", "n_train", "n_test", "n_rejected",
                  "status")


class ModelKind(str, Enum):
    FBCSP_FS = "FBCSP_FS"
    FBCSP_AllF = "FBCSP_AllF"
    BP_AllF = "BP_AllF"
    BP_FS = "BP_FS"

    @property
    def uses_csp(self) -> bool:
        return self in (ModelKind.FBCSP_FS, ModelKind.FBCSP_AllF)

    @property
    def uses_selection(self) -> bool:
        return self in (ModelKind.FBCSP_FS, ModelKind.BP_FS)


class TrainingError(RuntimeError):
    pass


class EvaluationError(RuntimeError):
    pass


def pair_name(pair) -> str:
    return f"{pair[0]}v{pair[1]}"


def make_bank(config: PipelineConfig) -> FilterBank:
    return FilterBank(config.band_specs(), config.rate_hz, config.filter_order)


# -- features ----------------------------------------------------------------

def bandpower_batch(cube: np.ndarray, log: bool = True) -> np.ndarray:
    """``(trials, bands, channels, samples)`` -> ``(trials, bands * channels)`` band power."""
    power = np.mean(cube ** 2, axis=-1)
    floor = POWER_FLOOR_RTOL * power.mean(axis=-1, keepdims=True)
    power = np.maximum(power, floor)
    if log:
        power = np.log(power)
    return power.reshape(power.shape[0], -1)


def bandpower_features(epoch: Epoch, bank: FilterBank, rate_hz: float | None = None,
                       log: bool = True) -> np.ndarray:
    """Log mean-square amplitude per (band, channel), band-major."""
    if rate_hz is not None and rate_hz != bank.rate_hz:
        bank = FilterBank(bank.bands, rate_hz, bank.order)
    return bandpower_batch(band_cube([epoch], bank), log)[0]


def bandpower_meta(n_bands: int, n_channels: int) -> list[ColumnMeta]:
    return [ColumnMeta(b, c, "channel") for b in range(n_bands) for c in range(n_channels)]


def csp_batch(cube: np.ndarray, transforms: Sequence[CspTransform]) -> np.ndarray:
    """Log-variance features of every band's selected CSP filters, band-major."""
    feats = []
    for b, t in enumerate(transforms):
        z = np.einsum("fc,tcs->tfs", select_filters(t), cube[:, b])
        feats.append(log_variance_batch(z))
    return np.concatenate(feats, axis=1)


def csp_meta(transforms: Sequence[CspTransform]) -> list[ColumnMeta]:
    meta = []
    for b, t in enumerate(transforms):
        n = t.W.shape[0]
        rows = list(range(t.m)) + list(range(n - t.m, n))
        meta.extend(ColumnMeta(b, r, "csp_filter") for r in rows)
    return meta


# -- models ------------------------------------------------------------------

@dataclass(frozen=True)
class TrainedModel:
    kind: ModelKind
    class_pair: tuple
    config: PipelineConfig
    csp: tuple
    column_meta: tuple
    selected: tuple
    nb: GaussianNbModel
    channel_names: tuple
    cv_curve: tuple = ()
    n_train: int = 0
    n_train_rejected: int = 0

    @property
    def window_seconds(self) -> float:
        return self.config.window_seconds

    def features(self, epochs: Sequence[Epoch]) -> np.ndarray:
        if self.config.filter_continuous and any(e.band_data is None for e in epochs):
            raise EvaluationError("model expects epochs cut from a pre-filtered recording")
        cube = band_cube(epochs, make_bank(self.config))
        if self.kind.uses_csp:
            full = csp_batch(cube, self.csp)
        else:
            full = bandpower_batch(cube, self.config.bp_log)
        return full[:, list(self.selected)]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind.value,
            "class_pair": list(self.class_pair),
            "config": self.config.to_dict(),
            "channel_names": list(self.channel_names),
            "csp": [
                {
                    "band_index": b,
                    "band": list(self.config.bands[b]),
                    "m": t.m,
                    "ridge": t.ridge,
                    "n_channels": int(t.W.shape[1]),
                    "W": t.W.ravel().tolist(),
                    "eigenvalues": t.eigenvalues.tolist(),
                }
                for b, t in enumerate(self.csp)
            ],
            "columns": [list(m) for m in self.column_meta],
            "selected": list(self.selected),
            "naive_bayes": self.nb.to_dict(),
            "cv_curve": [list(r) for r in self.cv_curve],
            "n_train": self.n_train,
            "n_train_rejected": self.n_train_rejected,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a model file")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        csp = tuple(
            CspTransform(np.asarray(c["W"], dtype=float).reshape(-1, c["n_channels"]),
                         np.asarray(c["eigenvalues"], dtype=float), int(c["m"]),
                         float(c["ridge"]))
            for c in d["csp"])
        return cls(
            kind=ModelKind(d["kind"]),
            class_pair=tuple(d["class_pair"]),
            config=PipelineConfig.from_dict(d["config"], where="model.config"),
            csp=csp,
            column_meta=tuple(ColumnMeta(*m) for m in d["columns"]),
            selected=tuple(int(i) for i in d["selected"]),
            nb=GaussianNbModel.from_dict(d["naive_bayes"]),
            channel_names=tuple(d["channel_names"]),
            cv_curve=tuple(tuple(r) for r in d["cv_curve"]),
            n_train=int(d["n_train"]),
            n_train_rejected=int(d["n_train_rejected"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _pair_epochs(epochs, pair):
    kept = [e for e in epochs if e.label in pair]
    return kept, len(epochs) - len(kept)


def _check_window(epochs, config: PipelineConfig) -> None:
    n = window_samples(config.window_seconds, config.rate_hz)
    for e in epochs:
        if e.n_samples != n:
            raise ValueError(f"epoch of {e.n_samples} samples, expected {n} for a "
                             f"{config.window_seconds} s window at {config.rate_hz} Hz")


def train(train_epochs: Sequence[Epoch], kind, class_pair, config: PipelineConfig,
          channel_names: Optional[Sequence[str]] = None) -> TrainedModel:
    """Fit one model: rejection, features, optional MI selection, naive Bayes."""
    kind = ModelKind(kind)
    a, b = sorted(int(c) for c in class_pair)
    epochs, _ = _pair_epochs(list(train_epochs), (a, b))
    _check_window(epochs, config)
    epochs, rejected = reject_artifacts(epochs, config.artifact, config.rate_hz)
    labels = np.array([e.label for e in epochs])
    for c in (a, b):
        if not np.any(labels == c):
            raise TrainingError(f"class {c} has no training epochs after artifact rejection")
    n_channels = epochs[0].data.shape[0]
    if channel_names is None:
        channel_names = [f"ch{i}" for i in range(n_channels)]

    cube = band_cube(epochs, make_bank(config))
    if kind.uses_csp:
        transforms = tuple(
            fit_band_csp(cube[labels == a, i], cube[labels == b, i], m=config.m,
                         ridge=config.ridge, normalization=config.cov_normalization,
                         band_index=i)
            for i in range(cube.shape[1]))
        values = csp_batch(cube, transforms)
        meta = csp_meta(transforms)
    else:
        transforms = ()
        values = bandpower_batch(cube, config.bp_log)
        meta = bandpower_meta(cube.shape[1], n_channels)

    fm = FeatureMatrix(values, labels, meta)
    cv_curve = ()
    if kind.uses_selection:
        ns = config.candidate_ns
        if ns is not None:
            ns = [n for n in ns if n <= fm.n_features]
        sel = select_top_n_cv(fm, config.folds, ns, config.seed, config.bins)
        selected = tuple(sel.selected)
        cv_curve = tuple(sel.cv_curve)
    else:
        selected = tuple(range(fm.n_features))

    nb = classifier.fit(values[:, list(selected)], labels)
    return TrainedModel(kind, (a, b), config, transforms, tuple(meta), selected, nb,
                        tuple(channel_names), cv_curve, len(epochs), rejected)


# -- evaluation --------------------------------------------------------------

@dataclass
class EvalReport:
    kind: str
    class_pair: tuple
    window_seconds: float
    accuracy: float = math.nan
    confusion: list = field(default_factory=list)  # rows true class, columns predicted
    n_train: int = 0
    n_test: int = 0
    n_rejected: int = 0
    n_dropped: int = 0
    n_train_rejected: int = 0
    n_selected: int = 0
    in_sample: bool = False
    status: str = "ok"
    error: str = ""

    @property
    def correct(self) -> int:
        return int(sum(self.confusion[i][i] for i in range(len(self.confusion))))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["class_pair"] = list(self.class_pair)
        return d

    def summary_row(self) -> dict:
        return {
            "model": self.kind,
            "pair": pair_name(self.class_pair),
            "window": f"{self.window_seconds:g}",
            "accuracy": "" if math.isnan(self.accuracy) else repr(float(self.accuracy)),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_rejected": self.n_rejected,
            "status": self.status,
        }


def evaluate(model: TrainedModel, test_epochs: Sequence[Epoch],
             in_sample: bool = False) -> EvalReport:
    """Score a stored model; no parameter is refit on the test epochs."""
    epochs, dropped = _pair_epochs(list(test_epochs), model.class_pair)
    _check_window(epochs, model.config)
    epochs, rejected = reject_artifacts(epochs, model.config.artifact, model.config.rate_hz)
    if not epochs:
        raise EvaluationError("no usable test epochs for pair "
                              f"{pair_name(model.class_pair)}")
    y = np.array([e.label for e in epochs])
    pred = model.nb.predict(model.features(epochs))
    confusion = [[int(np.sum((y == t) & (pred == p))) for p in model.class_pair]
                 for t in model.class_pair]
    return EvalReport(
        kind=model.kind.value,
        class_pair=tuple(model.class_pair),
        window_seconds=model.window_seconds,
        accuracy=float(np.mean(pred == y)),
        confusion=confusion,
        n_train=model.n_train,
        n_test=len(epochs),
        n_rejected=rejected,
        n_dropped=dropped,
        n_train_rejected=model.n_train_rejected,
        n_selected=len(model.selected),
        in_sample=in_sample,
    )


def binomial_band(n_test: int, sigmas: float = 3.0) -> tuple[float, float]:
    """Chance-level accuracy interval ``0.5 +/- sigmas * sqrt(0.25 / n)``."""
    half = sigmas * math.sqrt(0.25 / n_test)
    return 0.5 - half, 0.5 + half


# -- sweeps ------------------------------------------------------------------

def window_epochs(rec: Recording, window_seconds: float, config: PipelineConfig):
    if config.filter_continuous:
        return extract_filtered_epochs(rec, window_seconds, make_bank(config))
    return extract_epochs(rec, window_seconds)


def run_experiment(dataset: Recording, experiment: ExperimentConfig,
                   config: PipelineConfig,
                   on_model: Optional[Callable[[TrainedModel], None]] = None) -> list[EvalReport]:
    """Train and test every (window, pair, kind) cell.

    A failing cell yields a report with ``status='failed'``; the sweep
    carries on.
    """
    reports = []
    for w in experiment.windows:
        cfg = dataclasses.replace(config, window_seconds=float(w), rate_hz=dataset.rate_hz)
        try:
            epochs = window_epochs(dataset, w, cfg)
            train_epochs, test_epochs = split_by_session(
                epochs, experiment.train_sessions, experiment.test_sessions)
        except Exception as exc:  # noqa: BLE001 - every cell of this window fails alike
            for pair in experiment.pairs:
                for kind in experiment.kinds:
                    reports.append(_failed(kind, pair, w, exc))
            continue
        for pair in experiment.pairs:
            for kind in experiment.kinds:
                try:
                    model = train(train_epochs, kind, pair, cfg, dataset.channel_names)
                    if on_model is not None:
                        on_model(model)
                    reports.append(evaluate(model, test_epochs))
                except Exception as exc:  # noqa: BLE001 - isolate cell failures
                    reports.append(_failed(kind, pair, w, exc))
    return reports


def _failed(kind, pair, window, exc) -> EvalReport:
    logger.error("cell %s %s %gs failed: %s", ModelKind(kind).value, pair_name(pair), window, exc)
    return EvalReport(ModelKind(kind).value, tuple(sorted(pair)), float(window),
                      status="failed", error=f"{type(exc).__name__}: {exc}")


def summary_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.summary_row())
    return buf.getvalue()


def cv_curve_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("n", "mean_accuracy", "std_accuracy"))
    w.writerows((int(n), repr(float(m)), repr(float(s))) for n, m, s in curve)
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)
