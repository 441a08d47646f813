"""Command-line front end: ``htcca {simulate,benchmark,inspect,convert-format}``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or configuration
error. Settings resolve as command-line flags > ``--config`` JSON file >
built-in preset, and the resolved settings are written next to the outputs.
"""

import argparse
import json
import os
import sys
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (EpochedDataset, bandpass, read_dataset, resample, select_channels,
                      stack_subjects, write_dataset)
from .errors import ConfigInvalid, HtccaError, TooFewBlocks
from .evaluation import (METHODS, POLICIES, SUMMARY_FIELDS, TABLE_FIELDS, TRIALS_FIELDS,
                         TTEST_FIELDS, EvalConfig, accuracy_table, loo_cross_validate,
                         pairwise_tests, series_by_trials, summary_rows, table_to_csv)
from .simulator import PRESETS, SimConfig, preset, simulate, snr_measured

THREADS_ENV = "HTCCA_THREADS"


class UsageError(Exception):
    """Bad flags or configuration; exit code 2."""


# ------------------------------------------------------------------ parsing

def _csv_of(kind, name):
    def parse(text):
        try:
            return [kind(v) for v in str(text).split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {name} list: {text!r}") from None
    parse.__name__ = name
    return parse


def _default_threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def load_channel_sets() -> dict:
    text = resources.files("htcca").joinpath("channel_sets.json").read_text(encoding="utf-8")
    return {k: v for k, v in json.loads(text).items() if not k.startswith("_")}


def _load_config_file(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------- simulate

# flag -> (SimConfig field, type)
SIM_FLAGS = {
    "subjects": ("n_subjects", int),
    "blocks": ("n_blocks", int),
    "frequencies": ("frequencies", _csv_of(float, "frequency")),
    "n_channels": ("n_channels", int),
    "sample_rate": ("sample_rate", float),
    "trial_seconds": ("trial_seconds", float),
    "harmonics": ("n_harmonics", int),
    "harmonic_decay": ("harmonic_decay", float),
    "similarity": ("subject_similarity", float),
    "snr_db": ("snr_db", float),
    "noise_exponent": ("noise_exponent", float),
    "noise_correlation": ("noise_correlation", float),
    "phase_jitter": ("phase_jitter_rad", float),
    "subject_delay_sd": ("subject_delay_sd", float),
    "alpha_peak_gain": ("alpha_peak_gain", float),
    "latency": ("latency_seconds", float),
    "amplitude": ("signal_amplitude", float),
    "seed": ("seed", int),
}


def resolve_sim_config(args) -> SimConfig:
    file_cfg = _load_config_file(args.config)
    name = args.preset or file_cfg.pop("preset", "san-diego-like")
    file_cfg.pop("preset", None)
    known = {f.name for f in fields(SimConfig)}
    unknown = set(file_cfg) - known
    if unknown:
        raise UsageError(f"unknown simulator settings in config file: {sorted(unknown)}")
    overrides = dict(file_cfg)
    for flag, (field_name, _) in SIM_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[field_name] = value
    if "frequencies" in overrides:
        overrides["frequencies"] = tuple(overrides["frequencies"])
    if "n_channels" in overrides and "channels" not in overrides:
        overrides["channels"] = None
    try:
        cfg = preset(name, **overrides)
        cfg.validate()
    except (ConfigInvalid, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return cfg


def cmd_simulate(args) -> int:
    cfg = resolve_sim_config(args)
    resolved = {"preset": args.preset or "san-diego-like", **cfg.to_dict()}
    print(_dump_json(resolved), end="")
    out = Path(args.output)
    sim = simulate(cfg)
    write_dataset(sim.dataset, out / args.name)
    _write(out / "simulate_config.json", _dump_json(resolved))
    return 0


# --------------------------------------------------------------- benchmark

BENCH_DEFAULTS = {
    "methods": list(METHODS),
    "nt": [2],
    "windows": [1.0],
    "gaze_shift": 0.5,
    "ridge": 1e-10,
    "harmonics": 5,
    "channels": None,
    "policy": "first-k",
    "seed": 0,
    "format": ["csv", "json"],
    "clamp_itr": False,
    "no_latency": False,
    "n_transfer": None,
}


def resolve_bench_config(args) -> dict:
    file_cfg = _load_config_file(args.config)
    unknown = set(file_cfg) - set(BENCH_DEFAULTS) - {"dataset"}
    if unknown:
        raise UsageError(f"unknown benchmark settings in config file: {sorted(unknown)}")
    cfg = {**BENCH_DEFAULTS, **file_cfg}
    for key in BENCH_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            cfg[key] = value
    cfg["dataset"] = args.dataset or file_cfg.get("dataset")
    if not cfg["dataset"]:
        raise UsageError("a dataset path is required (--dataset or config file)")

    for m in cfg["methods"]:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if not cfg["methods"]:
        raise UsageError("no methods given")
    if cfg["policy"] not in POLICIES:
        raise UsageError(f"unknown trial subset policy {cfg['policy']!r}")
    bad = [f for f in cfg["format"] if f not in ("csv", "json")]
    if bad or not cfg["format"]:
        raise UsageError(f"--format takes csv and/or json, got {cfg['format']}")
    if isinstance(cfg["channels"], str):
        sets = load_channel_sets()
        cfg["channels"] = sets.get(cfg["channels"], cfg["channels"].split(","))
    # fail before any work if a trained method gets too few trials
    for m in cfg["methods"]:
        for nt in cfg["nt"]:
            try:
                _eval_config(cfg, m, nt).validate()
            except ConfigInvalid as exc:
                raise UsageError(str(exc)) from None
    return cfg


def _eval_config(cfg: dict, method: str, nt: int) -> EvalConfig:
    return EvalConfig(
        method=method, n_training_trials=nt, window_seconds=tuple(cfg["windows"]),
        gaze_shift_seconds=cfg["gaze_shift"], ridge=cfg["ridge"],
        n_harmonics=cfg["harmonics"],
        channel_subset=None if cfg["channels"] is None else tuple(cfg["channels"]),
        trial_subset_policy=cfg["policy"], seed=cfg["seed"],
        n_transfer_trials=cfg["n_transfer"], apply_latency=not cfg["no_latency"],
        clamp_negative_itr=cfg["clamp_itr"])


def run_benchmark(dataset: EpochedDataset, cfg: dict, threads: int = 1) -> list:
    """One report per (method, N_t); untrained methods run once."""
    reports = []
    for method in cfg["methods"]:
        nts = [0] if method not in ("tdcca", "htcca") else cfg["nt"]
        for nt in nts:
            ec = _eval_config(cfg, method, nt if nt else 2)
            reports.append(loo_cross_validate(dataset, ec, threads=threads))
    return reports


def cmd_benchmark(args) -> int:
    cfg = resolve_bench_config(args)
    threads = args.threads if args.threads is not None else _default_threads()
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    try:
        dataset = read_dataset(cfg["dataset"])
    except (OSError, HtccaError) as exc:
        print(f"error: cannot load dataset: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    try:
        for m in cfg["methods"]:
            for nt in cfg["nt"]:
                _eval_config(cfg, m, nt).validate(dataset)
    except (ConfigInvalid, TooFewBlocks) as exc:
        raise UsageError(str(exc)) from None

    reports = run_benchmark(dataset, cfg, threads)
    out = Path(args.output)
    rows = [row for rep in reports for row in accuracy_table(rep)]
    summary = summary_rows(reports)
    by_trials = series_by_trials(reports)
    tests = pairwise_tests(reports)

    if "csv" in cfg["format"]:
        _write(out / "accuracy.csv", table_to_csv(rows, TABLE_FIELDS))
        _write(out / "summary.csv", table_to_csv(summary, SUMMARY_FIELDS))
        _write(out / "series_by_trials.csv", table_to_csv(by_trials, TRIALS_FIELDS))
        _write(out / "ttests.csv", table_to_csv(tests, TTEST_FIELDS))
    if "json" in cfg["format"]:
        _write(out / "report.json", _dump_json({
            "config": cfg,
            "reports": [rep.to_dict() for rep in reports],
            "summary": summary,
            "series_by_trials": by_trials,
            "ttests": tests,
        }))
    _write(out / "benchmark_config.json", _dump_json(cfg))
    if args.figures:
        from .plotting import plot_accuracy_vs_trials, plot_window_curves
        plot_accuracy_vs_trials(by_trials, out / "fig_accuracy_vs_trials.png")
        for nt in sorted({r["n_training_trials"] for r in summary if r["n_training_trials"]}):
            sub = [r for r in summary if r["n_training_trials"] in (0, nt)]
            plot_window_curves(sub, out / f"fig_windows_nt{nt}.png",
                               title=f"{nt} training trials")
    for row in summary:
        print(f"{row['method']:>6} Nt={row['n_training_trials']:<2} T={row['window']:<5} "
              f"acc={100 * row['mean_accuracy']:6.2f}% (se {100 * row['se_accuracy']:.2f}) "
              f"itr={row['mean_itr']:7.2f}")
    return 0


# ----------------------------------------------------------------- inspect

def inspect_summary(path) -> dict:
    ds = read_dataset(path)
    info = {"path": str(path), **ds.header()}
    if ds.source == "simulator":
        info["snr_db"] = [round(snr_measured(ds, i), 3) for i in range(ds.n_targets)]
    return info


def cmd_inspect(args) -> int:
    try:
        info = inspect_summary(args.path)
    except (OSError, HtccaError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.json:
        print(_dump_json(info), end="")
        return 0
    print(f"dataset        {info['path']}")
    print(f"version        {info['version']}")
    print(f"shape          {info['subjects']} subjects x {info['blocks']} blocks x "
          f"{info['targets']} targets x {len(info['channels'])} channels x "
          f"{info['epoch_samples']} samples")
    print(f"sample rate    {info['sample_rate']} Hz")
    print(f"latency        {info['latency_seconds']} s")
    print(f"channels       {', '.join(info['channels'])}")
    print(f"frequencies    {', '.join(f'{f:g}' for f in info['frequencies'])}")
    if "source" in info:
        print(f"source         {info['source']}")
    if "snr_db" in info:
        print("measured SNR per target (dB):")
        for f, snr in zip(info["frequencies"], info["snr_db"]):
            print(f"  {f:7.2f} Hz  {snr:8.2f}")
    return 0


# ---------------------------------------------------------- convert-format

def _load_array(path: Path, key):
    suffix = path.suffix.lower()
    if suffix == ".npy":
        return np.load(path)
    if suffix == ".npz":
        with np.load(path) as npz:
            if key is None:
                raise UsageError(f"{path.name}: --key required for .npz input")
            return npz[key]
    if suffix == ".mat":
        from scipy.io import loadmat
        if key is None:
            raise UsageError(f"{path.name}: --key required for .mat input")
        return loadmat(path)[key]
    raise UsageError(f"unsupported input type {path.suffix!r} (use .npy, .npz, .mat or .manifest)")


def cmd_convert(args) -> int:
    inputs = [Path(p) for p in args.inputs]
    if len(inputs) == 1 and (inputs[0].suffix == ".manifest"
                             or inputs[0].with_suffix(".manifest").exists()):
        try:
            ds = read_dataset(inputs[0])
        except (OSError, HtccaError) as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
    else:
        if args.axes is None or args.sample_rate is None or args.frequencies is None:
            raise UsageError("array inputs need --axes, --sample-rate and --frequencies")
        try:
            arrays = [_load_array(p, args.key) for p in inputs]
        except (OSError, KeyError) as exc:
            print(f"error: cannot read input: {exc}", file=sys.stderr)
            return 1
        try:
            data = stack_subjects(arrays, args.axes) * args.scale
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        n_ch = data.shape[3]
        labels = args.channel_labels or [f"ch{c}" for c in range(n_ch)]
        try:
            ds = EpochedDataset(data, labels, args.sample_rate, args.frequencies,
                                args.latency)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        if args.select:
            sets = load_channel_sets()
            chosen = sets.get(args.select, args.select.split(","))
            ds = select_channels(ds, [int(c) if str(c).isdigit() else c for c in chosen])
        if args.bandpass:
            ds = bandpass(ds, *args.bandpass)
        if args.resample:
            ds = resample(ds, args.resample)
    except HtccaError as exc:
        raise UsageError(f"{type(exc).__name__}: {exc}") from None
    base = write_dataset(ds, args.output)
    print(f"wrote {base}.manifest and {base}.f32 "
          f"({ds.n_subjects}x{ds.n_blocks}x{ds.n_targets}x{ds.n_channels}x{ds.epoch_samples})")
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="htcca", description="Simulate, convert and benchmark SSVEP decoders.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic multi-subject dataset")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="base settings (default: san-diego-like)")
    p.add_argument("--config", help="JSON file of SimConfig fields")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--name", default="dataset", help="dataset base name (default: dataset)")
    for flag, (field_name, kind) in SIM_FLAGS.items():
        p.add_argument("--" + flag.replace("_", "-"), dest=flag, type=kind, default=None,
                       help=f"override {field_name}")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="leave-one-block-out evaluation")
    p.add_argument("--dataset", help="dataset base path or .manifest file")
    p.add_argument("--config", help="JSON file with benchmark settings")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--methods", type=_csv_of(str, "method"),
                   help=f"comma list from {','.join(METHODS)} (default: all)")
    p.add_argument("--nt", type=_csv_of(int, "trial count"),
                   help="training trials per stimulus, comma list (default: 2)")
    p.add_argument("--windows", type=_csv_of(float, "window"),
                   help="data lengths in seconds, comma list (default: 1.0)")
    p.add_argument("--gaze-shift", type=float, help="gaze shift time for ITR (default: 0.5 s)")
    p.add_argument("--ridge", type=float, help="CCA ridge (default: 1e-10)")
    p.add_argument("--harmonics", type=int, help="reference harmonics (default: 5)")
    p.add_argument("--channels", help="channel set name or comma list of labels")
    p.add_argument("--policy", choices=POLICIES, help="training trial selection")
    p.add_argument("--n-transfer", type=int, help="transferred trials to use (default: all)")
    p.add_argument("--seed", type=int, help="seed for seeded-random selection (default: 0)")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.add_argument("--format", type=_csv_of(str, "format"), help="csv,json (default: both)")
    p.add_argument("--clamp-itr", action="store_true", default=None,
                   help="floor ITR at 0 (only rounding residue can fall below)")
    p.add_argument("--no-latency", action="store_true", default=None,
                   help="do not skip the visual latency before windowing")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("inspect", help="summarise a dataset")
    p.add_argument("path")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("convert-format", help="convert arrays or re-process a dataset")
    p.add_argument("inputs", nargs="+", help="one array file per subject, or one dataset")
    p.add_argument("-o", "--output", required=True, help="output base path")
    p.add_argument("--key", help="variable name inside .mat/.npz files")
    p.add_argument("--axes", type=_csv_of(str, "axis"),
                   help="axis names of each input, e.g. channel,sample,target,block")
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--frequencies", type=_csv_of(float, "frequency"))
    p.add_argument("--channel-labels", type=_csv_of(str, "channel"))
    p.add_argument("--latency", type=float, default=0.0, help="visual latency in seconds")
    p.add_argument("--scale", type=float, default=1.0, help="multiply samples (e.g. to uV)")
    p.add_argument("--select", help="channel set name or comma list to keep")
    p.add_argument("--bandpass", type=_csv_of(float, "band edge"), help="LOW,HIGH in Hz")
    p.add_argument("--resample", type=float, help="target sample rate (integer decimation)")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, HtccaError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
