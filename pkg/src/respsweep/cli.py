"""Command-line frontend: ingest, synth, eval, and sweep subcommands.

Configuration precedence is defaults < config file < flags. Every run
writes a ``run.json`` provenance record (resolved config plus input
hashes); pointing ``--config`` at a previous run.json reproduces that
run. Exit codes: 0 success, 1 I/O failure, 2 configuration or data
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .audio_io import build_manifest_from_diagnosis, load_manifest
from .classifier import METRICS, ZSCORE_MODES, KnnConfig
from .config import RunConfig, resolve_config
from .dsp import TAPERS
from .errors import RespSweepError
from .experiment import (
    SweepConfig,
    atomic_write_text,
    emit_report,
    file_sha256,
    run_sweep,
    sweep_features,
)
from .features import write_feature_csv
from .synth import generate_synthetic_corpus

_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _add_config_flags(p: argparse.ArgumentParser, *, with_sweep_list: bool) -> None:
    p.add_argument("--config", metavar="FILE",
                   help="JSON config file; flags given here override it")
    analysis = p.add_argument_group("analysis")
    analysis.add_argument("--frame-length", dest="frame_length", type=int,
                          help="samples per analysis frame (default 1024)")
    analysis.add_argument("--hop-length", dest="hop_length", type=int,
                          help="samples between frame starts (default 512)")
    analysis.add_argument("--fft-size", dest="fft_size", type=int,
                          help="transform size, power of two (default: frame length)")
    analysis.add_argument("--taper", choices=TAPERS, help="frame taper (default hamming)")
    analysis.add_argument("--num-filters", dest="num_filters", type=int,
                          help="mel filterbank size (default 26)")
    analysis.add_argument("--band-low", dest="band_low", type=float,
                          help="filterbank low edge in Hz (default 0)")
    analysis.add_argument("--band-high", dest="band_high", type=float,
                          help="filterbank high edge in Hz (default: Nyquist)")
    analysis.add_argument("--num-coefficients", dest="num_coefficients", type=int,
                          help="cepstral coefficients kept (default 14)")
    analysis.add_argument("--include-c0", dest="include_c0",
                          action=argparse.BooleanOptionalAction, default=None,
                          help="keep coefficient 0 instead of starting at 1")
    analysis.add_argument("--log-floor", dest="log_floor", type=float,
                          help="filter-energy floor before the log (default 1e-10)")
    model = p.add_argument_group("classifier")
    model.add_argument("--k", type=int, help="neighbor count (default 1)")
    model.add_argument("--metric", choices=METRICS, help="distance metric")
    model.add_argument("--zscore-mode", dest="zscore_mode", choices=ZSCORE_MODES,
                       help="standardization scope (default global)")
    run = p.add_argument_group("run")
    if with_sweep_list:
        run.add_argument("--window-sizes", dest="window_sizes", type=_parse_float_list,
                         metavar="S1,S2,...",
                         help="window sizes in seconds (default 0.5,1,2,...,20)")
    run.add_argument("--offset", type=float, help="window start offset in seconds")
    run.add_argument("--jobs", type=int, help="worker processes (default 1)")
    run.add_argument("--cache", action=argparse.BooleanOptionalAction, default=None,
                     help="feature cache on/off (default on)")
    run.add_argument("--cache-dir", dest="cache_dir",
                     help="cache directory (default <out-dir>/feature_cache)")
    run.add_argument("--seed", type=int, help="synthetic-generator seed (provenance)")


def _resolve(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key) for key in _CONFIG_KEYS if hasattr(args, key)}
    return resolve_config(getattr(args, "config", None), overrides)


def _require_manifest(config: RunConfig) -> Path:
    if not config.manifest:
        raise RespSweepError("a manifest is required (give --manifest or a config file)")
    return Path(config.manifest)


def _cache_dir(config: RunConfig, out_dir: Path) -> Path | None:
    if not config.cache:
        return None
    return Path(config.cache_dir) if config.cache_dir else out_dir / "feature_cache"


def _input_hashes(manifest_path: Path, dataset) -> dict:
    return {
        "manifest": {"path": str(manifest_path), "sha256": file_sha256(manifest_path)},
        "audio": [
            {"path": entry.path, "sha256": file_sha256(dataset.resolve(entry))}
            for entry in dataset.entries
        ],
    }


def _write_run_record(path: Path, command: str, *, config: RunConfig | None = None,
                      inputs: dict | None = None, args: dict | None = None) -> None:
    payload: dict = {"command": command, "version": __version__}
    if config is not None:
        payload["config"] = config.to_dict()
    if args:
        payload["args"] = args
    if inputs:
        payload["inputs"] = inputs
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    summary = build_manifest_from_diagnosis(args.audio_dir, args.diagnosis_file,
                                            args.out_manifest)
    print(f"{summary.n_normal} normal / {summary.n_abnormal} abnormal")
    print(f"wrote {summary.manifest_path}")
    if summary.warnings:
        print(f"{len(summary.warnings)} file(s) skipped; see {summary.warnings_path}",
              file=sys.stderr)
    _write_run_record(
        Path(str(summary.manifest_path) + ".run.json"), "ingest",
        args={"audio_dir": str(args.audio_dir),
              "diagnosis_file": str(args.diagnosis_file),
              "out_manifest": str(summary.manifest_path)},
        inputs={"diagnosis_file": {"path": str(args.diagnosis_file),
                                   "sha256": file_sha256(args.diagnosis_file)}},
    )
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    manifest = generate_synthetic_corpus(args.n_normal, args.n_abnormal,
                                         args.seed, out_dir)
    dataset = load_manifest(manifest)
    print(f"wrote {args.n_normal + args.n_abnormal} clips to {out_dir}")
    print(f"wrote {manifest}")
    _write_run_record(
        out_dir / "run.json", "synth",
        config=RunConfig(seed=args.seed, out_dir=str(out_dir)),
        args={"n_normal": args.n_normal, "n_abnormal": args.n_abnormal,
              "seed": args.seed},
        inputs=_input_hashes(manifest, dataset),
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve(args)
    manifest_path = _require_manifest(config)
    dataset = load_manifest(manifest_path)
    out_dir = Path(config.out_dir or "eval_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = _cache_dir(config, out_dir)

    single = SweepConfig(
        window_sizes=(args.window_seconds,), offset=config.offset,
        mfcc=config.mfcc_config(), knn=config.knn_config(),
        zscore_mode=config.zscore_mode, seed=config.seed,
    )
    result = run_sweep(dataset, single, jobs=config.jobs, cache_dir=cache)
    ev = result.records[0].result
    atomic_write_text(out_dir / "eval.json", ev.to_json())

    if args.dump_features:
        vectors = sweep_features(dataset, args.window_seconds, single, cache_dir=cache)
        write_feature_csv(vectors, args.dump_features)
        print(f"wrote {args.dump_features}")

    correct = ev.true_normal + ev.true_abnormal
    print(f"evaluated {ev.total} recordings at window {args.window_seconds:g} s "
          f"(k={config.k}, {config.metric}, zscore {config.zscore_mode})")
    print(f"accuracy {ev.accuracy:.4f} ({correct}/{ev.total})")
    print(f"confusion: tn={ev.true_normal} fa={ev.false_abnormal} "
          f"fn={ev.false_normal} ta={ev.true_abnormal}")
    if ev.sensitivity is not None and ev.specificity is not None:
        print(f"supplementary: sensitivity {ev.sensitivity:.4f}, "
              f"specificity {ev.specificity:.4f}")
    print(f"wrote {out_dir / 'eval.json'}")
    _write_run_record(out_dir / "run.json", "eval", config=config,
                      args={"window_seconds": args.window_seconds},
                      inputs=_input_hashes(manifest_path, dataset))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _resolve(args)
    manifest_path = _require_manifest(config)
    dataset = load_manifest(manifest_path)
    out_dir = Path(config.out_dir or "sweep_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = _cache_dir(config, out_dir)

    result = run_sweep(dataset, config.sweep_config(), jobs=config.jobs,
                       cache_dir=cache, progress=print)
    paths = emit_report(result, out_dir)

    peak = result.peak()
    print(f"peak accuracy {peak.result.accuracy * 100:.2f}% "
          f"at window {peak.window_seconds:g} s")
    band_mean = result.mean_accuracy(2.0, 10.0)
    if band_mean is not None:
        print(f"mean accuracy over 2-10 s windows: {band_mean * 100:.2f}%")

    if config.k_sweep:
        lines = ["k,window_seconds,accuracy"]
        for k in config.k_sweep:
            k_result = run_sweep(
                dataset,
                SweepConfig(window_sizes=config.window_sizes, offset=config.offset,
                            mfcc=config.mfcc_config(),
                            knn=KnnConfig(k=k, metric=config.metric),
                            zscore_mode=config.zscore_mode, seed=config.seed),
                jobs=config.jobs, cache_dir=cache,
            )
            for w, acc in k_result.accuracies():
                lines.append(f"{k},{format(w, '.17g')},{format(acc, '.17g')}")
            print(f"k={k}: peak {k_result.peak().result.accuracy * 100:.2f}% "
                  f"at {k_result.peak().window_seconds:g} s")
        k_path = out_dir / "k_sweep.csv"
        atomic_write_text(k_path, "\n".join(lines) + "\n")
        paths["k_sweep"] = k_path

    for name in ("csv", "svg", "summary"):
        print(f"wrote {paths[name]}")
    if "k_sweep" in paths:
        print(f"wrote {paths['k_sweep']}")
    _write_run_record(out_dir / "run.json", "sweep", config=config,
                      inputs=_input_hashes(manifest_path, dataset))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="respsweep",
        description="Classify respiratory-sound recordings as normal or abnormal "
                    "from cepstral statistics, and sweep the analysis window size.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p_ingest = sub.add_parser(
        "ingest", help="build a manifest from a diagnosis table and a WAV directory")
    p_ingest.add_argument("audio_dir", help="directory containing the WAV files")
    p_ingest.add_argument("diagnosis_file",
                          help="subject-to-diagnosis table (tab or comma separated)")
    p_ingest.add_argument("out_manifest", help="manifest CSV to write")
    p_ingest.set_defaults(func=cmd_ingest)

    p_synth = sub.add_parser(
        "synth", help="generate a deterministic synthetic corpus")
    p_synth.add_argument("n_normal", type=int, help="number of normal clips")
    p_synth.add_argument("n_abnormal", type=int, help="number of abnormal clips")
    p_synth.add_argument("out_dir", nargs="?", default="synth_corpus",
                         help="output directory (default synth_corpus)")
    p_synth.add_argument("--seed", type=int, default=0, help="generator seed")
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser(
        "eval", help="leave-one-out evaluation at a single window size")
    p_eval.add_argument("--manifest", help="dataset manifest CSV")
    p_eval.add_argument("--out-dir", dest="out_dir",
                        help="output directory (default eval_out)")
    p_eval.add_argument("--window-seconds", dest="window_seconds", type=float,
                        default=5.0, help="window size in seconds (default 5)")
    p_eval.add_argument("--dump-features", dest="dump_features", metavar="FILE",
                        help="also write the pooled feature vectors as CSV")
    _add_config_flags(p_eval, with_sweep_list=False)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser(
        "sweep", help="evaluate every window size and write the report")
    p_sweep.add_argument("--manifest", help="dataset manifest CSV")
    p_sweep.add_argument("--out-dir", dest="out_dir",
                         help="output directory (default sweep_out)")
    p_sweep.add_argument("--k-sweep", dest="k_sweep", type=_parse_int_list,
                         metavar="K1,K2,...",
                         help="also sweep these neighbor counts into k_sweep.csv")
    _add_config_flags(p_sweep, with_sweep_list=True)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RespSweepError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
