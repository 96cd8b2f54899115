"""Evaluation protocols: repeated unsupervised runs, stratified semi-supervised
folds, checkpoint re-evaluation and one-axis ablation sweeps."""
from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineOptions, RunConfig, format_config
from .datasets import RoiVoxelDump, roi_histogram_features
from .encoder import load_checkpoint
from .errors import ConfigError, ContractError
from .graphbuild import SubjectGraph, build_graph
from .metrics import (EvalReport, RunStatistics, aggregate_runs, classification_metrics,
                      clustering_report, roc_auc)
from .objectives import LossBreakdown
from .trainer import TrainResult, embed, make_splits, train_semisupervised, train_unsupervised

log = logging.getLogger(__name__)


@dataclass
class ProtocolResult:
    graph: SubjectGraph
    reports: list[EvalReport]
    stats: RunStatistics
    first: TrainResult
    masks: list[np.ndarray] | None = None


def score_clusters(S: np.ndarray, labels, positive_class: int, mask=None) -> EvalReport:
    """Aligned clustering metrics; AUC uses the column mapped to the positive class."""
    pred = S.argmax(axis=1)
    rep = clustering_report(pred, labels, positive_class, mask=mask)
    pos_clusters = [k for k, c in rep.mapping.items() if c == positive_class and k < S.shape[1]]
    truth = np.asarray(labels) if mask is None else np.asarray(labels)[np.asarray(mask, dtype=bool)]
    if pos_clusters and np.unique(truth == positive_class).size == 2:
        col = S[:, pos_clusters[0]] if mask is None else S[np.asarray(mask, dtype=bool), pos_clusters[0]]
        rep.auc = roc_auc(col, (truth == positive_class).astype(np.int64))
    return rep


def score_semi(result_pred, scores, labels, mask, positive_class: int) -> EvalReport:
    test = ~np.asarray(mask, dtype=bool)
    if not test.any():
        test = np.ones_like(test)
    truth = np.asarray(labels)[test]
    rep = classification_metrics(result_pred, labels, positive_class, mask=test)
    if np.unique(truth == positive_class).size == 2:
        rep.auc = roc_auc(np.asarray(scores)[test], (truth == positive_class).astype(np.int64))
    return rep


def run_unsupervised(X, labels, cfg: RunConfig, n_runs: int = 10, positive_class: int = 1,
                     ddof: int = 1, checkpoint_path=None, graph: SubjectGraph | None = None) -> ProtocolResult:
    """``n_runs`` seeds ``cfg.seed + r``; the first run is checkpointed."""
    X = np.asarray(X, dtype=np.float64)
    graph = graph if graph is not None else build_graph(X, cfg.alpha)
    reports, first = [], None
    for r in range(n_runs):
        res = train_unsupervised(graph, X, cfg.replace(seed=cfg.seed + r),
                                 checkpoint_path=checkpoint_path if r == 0 else None)
        first = first or res
        if labels is not None:
            reports.append(score_clusters(res.S, labels, positive_class))
        log.info("run %d done", r)
    stats = aggregate_runs(reports, ddof) if reports else RunStatistics({}, {}, 0, ddof)
    return ProtocolResult(graph, reports, stats, first)


def run_semisupervised(X, labels, cfg: RunConfig, n_folds: int = 20, positive_class: int = 1,
                       ddof: int = 1, checkpoint_path=None, graph: SubjectGraph | None = None) -> ProtocolResult:
    """Stratified ``labeled_fraction`` folds; metrics on the unlabeled nodes."""
    if labels is None:
        raise ConfigError("semi-supervised mode needs labels")
    X = np.asarray(X, dtype=np.float64)
    graph = graph if graph is not None else build_graph(X, cfg.alpha)
    masks = make_splits(labels, cfg.labeled_fraction, n_folds, cfg.seed)
    reports, first = [], None
    for f, mask in enumerate(masks):
        res = train_semisupervised(graph, X, labels, mask, cfg.replace(seed=cfg.seed + f),
                                   positive_class, checkpoint_path=checkpoint_path if f == 0 else None)
        first = first or res
        reports.append(score_semi(res.predictions, res.scores, labels, mask, positive_class))
        log.info("fold %d done", f)
    return ProtocolResult(graph, reports, aggregate_runs(reports, ddof), first, masks)


def evaluate_checkpoint(path, X, labels, positive_class: int = 1) -> tuple[EvalReport | None, np.ndarray, np.ndarray]:
    """Recompute evaluation-mode (h, S) from a checkpoint and score them as training did."""
    ckpt = load_checkpoint(path)
    cfg = ckpt.cfg
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != ckpt.online.in_dim:
        raise ContractError(f"checkpoint expects {ckpt.online.in_dim} features, data has {X.shape[1]}")
    graph = build_graph(X, cfg.alpha)
    h, S = embed(graph, X, ckpt.online, cfg)
    if labels is None:
        return None, h, S
    if cfg.mode == "semi":
        mask = make_splits(labels, cfg.labeled_fraction, 1, cfg.seed)[0]
        return score_semi(S.argmax(axis=1), S[:, positive_class], labels, mask, positive_class), h, S
    return score_clusters(S, labels, positive_class), h, S


def write_log(path, history: list[tuple[LossBreakdown, float]], echo: str = "") -> None:
    buf = io.StringIO()
    for line in echo.splitlines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LossBreakdown.LOG_COLUMNS)
    for it, (br, lr) in enumerate(history):
        w.writerow(br.log_row(it, lr))
    Path(path).write_text(buf.getvalue())


def write_assignments(path, S: np.ndarray, echo: str = "") -> None:
    buf = io.StringIO()
    for line in echo.splitlines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "cluster"] + [f"p{k}" for k in range(S.shape[1])])
    for i, row in enumerate(S):
        w.writerow([i, int(row.argmax())] + [repr(float(v)) for v in row])
    Path(path).write_text(buf.getvalue())


@dataclass
class SweepPoint:
    value: object
    num_edges: int
    stats: RunStatistics
    reports: list[EvalReport]


SWEEP_AXES = ("alpha", "lambda_con", "activation", "bins")


def ablation_sweep(axis: str, values, cfg: RunConfig, labels, X=None, dump: RoiVoxelDump | None = None,
                   n_runs: int = 1, positive_class: int = 1) -> list[SweepPoint]:
    """Vary one configuration axis; ``bins`` rebuilds features from ``dump``."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if axis == "bins" and dump is None:
        raise ConfigError("a bins sweep needs an ROI voxel dump")
    points = []
    for v in values:
        feats, run_cfg = X, cfg
        if axis == "bins":
            feats = roi_histogram_features(dump, int(v)).values
        else:
            run_cfg = cfg.replace(**{axis: v})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            graph = build_graph(feats, run_cfg.alpha)
            res = run_unsupervised(feats, labels, run_cfg, n_runs, positive_class, graph=graph)
        points.append(SweepPoint(v, graph.num_edges, res.stats, res.reports))
    return points


def config_echo(cfg: RunConfig, opts: PipelineOptions | None = None) -> str:
    return format_config(cfg, opts)
