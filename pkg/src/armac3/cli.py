"""``armac3`` command line: gen-sbm, features, train, eval."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import fields
from pathlib import Path

from .config import PipelineOptions, RunConfig, format_config, load_config_file
from .datasets import gen_sbm, load_features, load_roi_dump, roi_histogram_features, save_features, save_labels
from .errors import ArmaC3Error, ConfigError, DegenerateError
from .graphbuild import write_edgelist
from .metrics import METRIC_NAMES, aggregate_runs, read_report, wilcoxon_signed_rank, write_report
from .pipeline import evaluate_checkpoint, run_semisupervised, run_unsupervised, write_assignments, write_log

IO_EXIT = 7
DEFAULT_ARTIFACTS = {"checkpoint": "model.armac3", "log_out": "train_log.csv", "report_out": "report.csv"}


def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    grp = p.add_argument_group("config keys (override file values)")
    for cls in (RunConfig, PipelineOptions):
        for f in fields(cls):
            grp.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar=f.name.upper())
    p.add_argument("--runs", dest="cfg_n_runs", metavar="N", help="alias of --n-runs")
    p.add_argument("--folds", dest="cfg_n_folds", metavar="N", help="alias of --n-folds")


def _collect_overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    for k, v in vars(args).items():
        if k.startswith("cfg_") and v is not None:
            out[k[4:]] = v
    return out


def _configs(args) -> tuple[RunConfig, PipelineOptions]:
    return load_config_file(args.config, _collect_overrides(args))


def cmd_gen_sbm(args) -> int:
    fm, labels = gen_sbm(args.n, args.k, args.p_in, args.p_out, args.feature_dim, args.sigma, args.seed)
    save_features(fm, args.out)
    save_labels(labels, args.labels_out)
    print(f"wrote {args.out} and {args.labels_out}: n={fm.n} K={args.k} d={fm.d}")
    return 0


def cmd_features(args) -> int:
    dump = load_roi_dump(args.roi_dump)
    fm = roi_histogram_features(dump, args.bins)
    save_features(fm, args.out)
    print(f"wrote {args.out}: {fm.n} subjects, {dump.p} ROIs x {args.bins} bins = {fm.d} columns")
    return 0


def cmd_train(args) -> int:
    cfg, opts = _configs(args)
    for key, default in DEFAULT_ARTIFACTS.items():
        if not getattr(opts, key):
            setattr(opts, key, str(Path(args.out_dir) / default))
    if not opts.features:
        raise ConfigError("no features file given (features = ... or --features)")
    fm = load_features(opts.features, opts.labels or None)
    if cfg.mode == "semi" and fm.labels is None:
        raise ConfigError("semi-supervised mode needs labels (labels = ... or --labels)")
    echo = format_config(cfg, opts)
    if cfg.mode == "semi":
        res = run_semisupervised(fm.values, fm.labels, cfg, opts.n_folds, opts.positive_class,
                                 opts.std_ddof, checkpoint_path=opts.checkpoint)
        label = "fold"
    else:
        res = run_unsupervised(fm.values, fm.labels, cfg, opts.n_runs, opts.positive_class,
                               opts.std_ddof, checkpoint_path=opts.checkpoint)
        label = "run"
    if opts.graph_out:
        write_edgelist(res.graph, opts.graph_out)
    write_log(opts.log_out, res.first.history, echo)
    if res.reports:
        write_report(opts.report_out, res.reports, res.stats, label, echo)
        summary = "  ".join(f"{m}={res.stats.formatted(m)}" for m in METRIC_NAMES if m in res.stats.mean)
        print(f"{cfg.mode} x{len(res.reports)}: {summary}")
    else:
        write_assignments(opts.report_out, res.first.S, echo)
        print(f"{cfg.mode}: no labels, wrote cluster assignments of run 0")
    print(f"checkpoint {opts.checkpoint}  log {opts.log_out}  report {opts.report_out}")
    return 0


def cmd_eval(args) -> int:
    if args.compare:
        a, b = (read_report(p) for p in args.compare)
        print("metric,p_value")
        for m in METRIC_NAMES:
            if m in a and m in b:
                if a[m].size != b[m].size:
                    raise ConfigError(f"{m}: reports have {a[m].size} and {b[m].size} runs")
                try:
                    p = repr(wilcoxon_signed_rank(a[m], b[m], args.alternative))
                except DegenerateError:
                    p = "nan"  # identical columns carry no evidence either way
                print(f"{m},{p}")
        return 0
    if not args.checkpoint or not args.features:
        raise ConfigError("eval needs --checkpoint and --features (or --compare A B)")
    fm = load_features(args.features, args.labels)
    rep, _, S = evaluate_checkpoint(args.checkpoint, fm.values, fm.labels, args.positive_class)
    if rep is None:
        if args.report_out:
            write_assignments(args.report_out, S)
        print("no labels given; assignments only")
        return 0
    if args.report_out:
        write_report(args.report_out, [rep], aggregate_runs([rep]), "run")
    for m, v in rep.values().items():
        print(f"{m},{'' if v is None else repr(float(v))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="armac3", description="ARMA graph clustering with contrastive regularization")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-sbm", help="write a planted-block synthetic cohort")
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.5)
    p.add_argument("--p-out", type=float, default=0.05)
    p.add_argument("--feature-dim", type=int, default=10)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sbm_features.csv")
    p.add_argument("--labels-out", default="sbm_labels.txt")
    p.set_defaults(func=cmd_gen_sbm)

    p = sub.add_parser("features", help="ROI voxel dump to histogram features")
    p.add_argument("--roi-dump", required=True, help="directory with one file per subject")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", default="features.csv")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train and evaluate over runs or folds")
    _add_config_options(p)
    p.add_argument("--out-dir", default=".", help="directory for artifacts without an explicit path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="re-evaluate a checkpoint or compare two reports")
    p.add_argument("--checkpoint")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--positive-class", type=int, default=1)
    p.add_argument("--report-out")
    p.add_argument("--compare", nargs=2, metavar=("A.csv", "B.csv"))
    p.add_argument("--alternative", default="greater", choices=("greater", "less", "two-sided"))
    p.set_defaults(func=cmd_eval)
    return ap


def _one_line_warning(message, category, filename, lineno, line=None):
    return f"armac3: {category.__name__}: {message}\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warnings.formatwarning = _one_line_warning
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ArmaC3Error as exc:
        msg = " ".join(str(exc).split())
        print(f"armac3: {type(exc).__name__}: {msg}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"armac3: I/O error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
