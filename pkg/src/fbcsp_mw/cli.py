"""Command-line entry point.

    fbcsp-mw simulate CONFIG
    fbcsp-mw train CONFIG
    fbcsp-mw evaluate CONFIG MODEL [MODEL ...]
    fbcsp-mw sweep CONFIG
    fbcsp-mw inspect-filters MODEL [-o OUT]

Exit status: 0 success, 1 invalid input or configuration, 2 runtime failure
(including any failed sweep cell).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_run_config
from .data import IngestionError, SplitError, load_recording, split_by_session, write_recording
from .pipeline import (EvalReport, ModelKind, TrainedModel, atomic_write_text, cv_curve_csv,
                       evaluate, pair_name, run_experiment, summary_csv, train, window_epochs)
from .synth import SynthConfig, generate, ground_truth

logger = logging.getLogger("fbcsp_mw")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
INVALID_ERRORS = (ConfigError, IngestionError, SplitError, FileNotFoundError)


class UnsupportedKindError(ValueError):
    pass


def model_stem(kind, pair, window) -> str:
    return f"{ModelKind(kind).value}_{pair_name(pair)}_{float(window):g}s"


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config)
    paths = cfg.paths
    if getattr(args, "data_dir", None):
        paths = dataclasses.replace(paths, data_dir=Path(args.data_dir))
    if getattr(args, "output_dir", None):
        paths = dataclasses.replace(paths, output_dir=Path(args.output_dir))
    pipeline = cfg.pipeline
    synth = cfg.synth
    if getattr(args, "seed", None) is not None:
        pipeline = dataclasses.replace(pipeline, seed=args.seed)
        if synth is not None:
            synth = {**synth, "seed": args.seed}
    return dataclasses.replace(cfg, paths=paths, pipeline=pipeline, synth=synth)


def _load_data(cfg: RunConfig):
    return load_recording(cfg.paths.signal, cfg.paths.markers, cfg.pipeline.rate_hz,
                          cfg.channel_names)


def _print_table(reports, out=None) -> None:
    out = sys.stdout if out is None else out
    print(f"{'model':<11} {'pair':<5} {'window':>6} {'accuracy':>8} {'n_test':>6} status",
          file=out)
    for r in reports:
        acc = "-" if r.status != "ok" else f"{r.accuracy:.3f}"
        print(f"{r.kind:<11} {pair_name(r.class_pair):<5} {r.window_seconds:>6g} {acc:>8} "
              f"{r.n_test:>6} {r.status}", file=out)


def _write_reports(reports, out_dir: Path) -> None:
    for r in reports:
        name = model_stem(r.kind, r.class_pair, r.window_seconds) + ".json"
        atomic_write_text(out_dir / "reports" / name,
                          json.dumps(r.to_dict(), sort_keys=True, indent=1) + "\n")
    atomic_write_text(out_dir / "summary.csv", summary_csv(reports))


def _save_model(model: TrainedModel, out_dir: Path) -> Path:
    stem = model_stem(model.kind, model.class_pair, model.window_seconds)
    path = out_dir / "models" / f"{stem}.json"
    model.save(path)
    if model.kind.uses_selection:
        atomic_write_text(path.with_name(f"{stem}_cv.csv"), cv_curve_csv(model.cv_curve))
    return path


def _report_failures(reports) -> int:
    failed = [r for r in reports if r.status != "ok"]
    for r in failed:
        print(f"FAILED {model_stem(r.kind, r.class_pair, r.window_seconds)}: {r.error}",
              file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


# -- commands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if cfg.synth is None:
        raise ConfigError("synth", "section is required for simulate")
    synth_cfg = SynthConfig.from_dict(cfg.synth)
    rec = generate(synth_cfg)
    out = cfg.paths.data_dir
    out.mkdir(parents=True, exist_ok=True)
    sig_tmp = cfg.paths.signal.with_name(cfg.paths.signal.name + ".tmp")
    mk_tmp = cfg.paths.markers.with_name(cfg.paths.markers.name + ".tmp")
    write_recording(rec, sig_tmp, mk_tmp)
    sig_tmp.replace(cfg.paths.signal)
    mk_tmp.replace(cfg.paths.markers)
    truth = {"config": synth_cfg.to_dict(),
             "informative": [{"band": list(g["band"]), "topography": list(g["topography"]),
                              "power_by_class": {str(k): v for k, v in
                                                 sorted(g["power_by_class"].items())}}
                             for g in ground_truth(synth_cfg)]}
    atomic_write_text(out / "ground_truth.json", json.dumps(truth, sort_keys=True, indent=1) + "\n")
    print(f"wrote {rec.n_channels} channels x {rec.n_samples} samples at {rec.rate_hz:g} Hz, "
          f"{len(rec.markers)} markers to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    rec = _load_data(cfg)
    exp = cfg.experiment
    reports = []
    for w in exp.windows:
        pcfg = dataclasses.replace(cfg.pipeline, window_seconds=float(w), rate_hz=rec.rate_hz)
        train_epochs, _ = split_by_session(window_epochs(rec, w, pcfg),
                                           exp.train_sessions, exp.test_sessions)
        for pair in exp.pairs:
            for kind in exp.kinds:
                try:
                    model = train(train_epochs, kind, pair, pcfg, rec.channel_names)
                except Exception as exc:  # noqa: BLE001 - report and continue
                    reports.append(EvalReport(kind, tuple(sorted(pair)), float(w),
                                              status="failed",
                                              error=f"{type(exc).__name__}: {exc}"))
                    continue
                path = _save_model(model, cfg.paths.output_dir)
                line = f"{path.name}: {model.n_train} trials, {len(model.selected)} features"
                if model.cv_curve:
                    n, acc, _ = max(model.cv_curve, key=lambda r: (r[1], -r[0]))
                    line += f", cv best n={n} mean accuracy {acc:.3f}"
                print(line)
                reports.append(EvalReport(kind, tuple(sorted(pair)), float(w)))
    return _report_failures(reports)


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    models = [TrainedModel.load(p) for p in args.models]
    for p, m in zip(args.models, models):
        if float(m.window_seconds) not in {float(w) for w in cfg.experiment.windows}:
            raise ConfigError("experiment.windows",
                              f"model {p} uses a {m.window_seconds:g} s window not in the config")
    rec = _load_data(cfg)
    exp = cfg.experiment
    reports = []
    for p, m in zip(args.models, models):
        try:
            epochs = window_epochs(rec, m.window_seconds, m.config)
            _, test = split_by_session(epochs, exp.train_sessions, exp.test_sessions)
            reports.append(evaluate(m, test))
        except Exception as exc:  # noqa: BLE001 - report and continue
            reports.append(EvalReport(m.kind.value, m.class_pair, m.window_seconds,
                                      status="failed", error=f"{type(exc).__name__}: {exc}"))
    _write_reports(reports, cfg.paths.output_dir)
    _print_table(reports)
    return _report_failures(reports)


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rec = _load_data(cfg)
    out = cfg.paths.output_dir
    reports = run_experiment(rec, cfg.experiment, cfg.pipeline,
                             on_model=lambda m: _save_model(m, out))
    _write_reports(reports, out)
    _print_table(reports)
    return _report_failures(reports)


def filter_weights_csv(model: TrainedModel) -> str:
    if not model.kind.uses_csp:
        raise UnsupportedKindError(f"{model.kind.value} models have no spatial filters")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("band_low", "band_high", "filter_rank", "channel_name", "weight"))
    for (lo, hi), t in zip(model.config.bands, model.csp):
        for rank, row in enumerate(t.selected()):
            for name, weight in zip(model.channel_names, row):
                w.writerow((f"{lo:g}", f"{hi:g}", rank, name, repr(float(weight))))
    return buf.getvalue()


def cmd_inspect_filters(args) -> int:
    model = TrainedModel.load(args.model)
    text = filter_weights_csv(model)
    out = Path(args.out) if args.out else Path(args.model).with_name(
        Path(args.model).stem + "_filters.csv")
    atomic_write_text(out, text)
    print(f"wrote {text.count(chr(10)) - 1} filter weights to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbcsp-mw",
                                     description="Filter-bank CSP workload classification")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the configured seeds")
        p.add_argument("--data-dir", help="override paths.data_dir")
        p.add_argument("--output-dir", help="override paths.output_dir")
        return p

    with_config(sub.add_parser("simulate", help="write a synthetic dataset")) \
        .set_defaults(func=cmd_simulate)
    with_config(sub.add_parser("train", help="train one model per kind, pair and window")) \
        .set_defaults(func=cmd_train)
    p = with_config(sub.add_parser("evaluate", help="score trained models on test sessions"))
    p.add_argument("models", nargs="+", help="model JSON files")
    p.set_defaults(func=cmd_evaluate)
    with_config(sub.add_parser("sweep", help="train and evaluate the whole grid")) \
        .set_defaults(func=cmd_sweep)
    p = sub.add_parser("inspect-filters", help="export CSP filter weights as CSV")
    p.add_argument("model")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_inspect_filters)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (*INVALID_ERRORS, UnsupportedKindError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
