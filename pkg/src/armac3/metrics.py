"""Evaluation: label alignment, binary metrics, ROC-AUC, run statistics, Wilcoxon test."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import norm, rankdata

from .errors import ContractError, DataError, DegenerateError, FormatError

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "auc")
_MAX_ENUMERATED_MAPPINGS = 40320  # 8!


def contingency(pred, truth) -> np.ndarray:
    pred, truth = np.asarray(pred, dtype=np.int64), np.asarray(truth, dtype=np.int64)
    M = np.zeros((pred.max() + 1, truth.max() + 1), dtype=np.int64)
    np.add.at(M, (pred, truth), 1)
    return M


def align_labels(pred, truth) -> dict[int, int]:
    """Cluster→class mapping maximizing matched nodes.

    Small problems are solved by enumerating mappings in lexicographic
    order (first maximum wins); larger ones by the Hungarian method.
    Clusters left without a class map to -1.
    """
    pred, truth = np.asarray(pred, dtype=np.int64), np.asarray(truth, dtype=np.int64)
    if pred.size == 0 or pred.shape != truth.shape:
        raise ContractError("align_labels needs two non-empty label vectors of equal length")
    M = contingency(pred, truth)
    K, C = M.shape
    mapping = {k: -1 for k in range(K)}
    if math.perm(max(K, C), min(K, C)) <= _MAX_ENUMERATED_MAPPINGS:
        best, best_score = None, -1
        if K <= C:
            for classes in itertools.permutations(range(C), K):
                score = M[np.arange(K), classes].sum()
                if score > best_score:
                    best, best_score = dict(enumerate(classes)), score
        else:
            for clusters in itertools.permutations(range(K), C):
                score = M[clusters, np.arange(C)].sum()
                if score > best_score:
                    best, best_score = {k: c for c, k in enumerate(clusters)}, score
        mapping.update(best)
    else:
        r, c = linear_sum_assignment(-M)
        mapping.update(zip(r.tolist(), c.tolist()))
    return mapping


def apply_mapping(pred, mapping: dict[int, int]) -> np.ndarray:
    return np.array([mapping.get(int(p), -1) for p in pred], dtype=np.int64)


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float | None = None
    support: dict[int, int] = field(default_factory=dict)
    mapping: dict[int, int] | None = None
    zero_division: bool = False

    def values(self) -> dict[str, float | None]:
        return {m: getattr(self, m) for m in METRIC_NAMES}


def _subset(arrs, mask):
    if mask is None:
        return [np.asarray(a) for a in arrs]
    mask = np.asarray(mask, dtype=bool)
    return [np.asarray(a)[mask] for a in arrs]


def classification_metrics(pred, truth, positive_class: int = 1, mask=None,
                           scores=None) -> EvalReport:
    """Binary metrics for the declared positive class, on ``mask`` if given."""
    pred, truth = _subset([pred, truth], mask)
    if pred.size == 0:
        raise ContractError("no nodes to evaluate")
    pos_p, pos_t = pred == positive_class, truth == positive_class
    tp = int(np.sum(pos_p & pos_t))
    fp = int(np.sum(pos_p & ~pos_t))
    fn = int(np.sum(~pos_p & pos_t))
    flag = False
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if tp + fp == 0 or tp + fn == 0:
        flag = True
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    auc = None
    if scores is not None:
        (s,) = _subset([scores], mask)
        auc = roc_auc(s, (truth == positive_class).astype(np.int64))
    support = {int(c): int(n) for c, n in zip(*np.unique(truth, return_counts=True))}
    return EvalReport(float(np.mean(pred == truth)), precision, recall, f1, auc, support,
                      zero_division=flag)


def clustering_report(clusters, truth, positive_class: int = 1, mask=None) -> EvalReport:
    """Align clusters to classes, then score."""
    clusters, truth = _subset([clusters, truth], mask)
    mapping = align_labels(clusters, truth)
    rep = classification_metrics(apply_mapping(clusters, mapping), truth, positive_class)
    rep.mapping = mapping
    return rep


def roc_auc(scores, truth) -> float:
    """Mann-Whitney AUC with midranks; ``truth`` is 1 for positives, 0 otherwise."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    n_pos, n_neg = int(truth.sum()), int((~truth).sum())
    if n_pos == 0 or n_neg == 0:
        raise ContractError("ROC-AUC needs at least one node of each class")
    ranks = rankdata(scores)
    return float((ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


# ---------------------------------------------------------------- Wilcoxon

EXACT_MAX_N = 25


def _signed_ranks(a, b) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if d.ndim != 1:
        raise ContractError("wilcoxon expects two equal-length 1-D samples")
    nz = d[d != 0]
    if nz.size == 0:
        raise DegenerateError("all paired differences are zero")
    if nz.size < 5:
        raise ContractError(f"need at least 5 non-zero differences, got {nz.size}")
    return nz, rankdata(np.abs(nz))


def exact_null_counts(ranks: np.ndarray) -> np.ndarray:
    """Number of sign patterns per value of 2·W⁺ (doubling makes midranks integral)."""
    twice = np.rint(2 * np.asarray(ranks)).astype(np.int64)
    counts = np.zeros(int(twice.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    for r in twice:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:counts.size - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a, b, alternative: str = "greater", method: str = "auto") -> float:
    """p-value for paired samples; ``greater`` tests a > b.

    ``method='auto'`` is exact for n ≤ 25 non-zero differences and
    normal-approximate (with continuity and tie correction) above.
    """
    if np.shape(a) != np.shape(b):
        raise ContractError("samples must have equal length")
    if alternative not in ("greater", "two-sided", "less"):
        raise ContractError(f"unknown alternative {alternative!r}")
    d, ranks = _signed_ranks(a, b)
    n = d.size
    w_plus = float(ranks[d > 0].sum())
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "normal"
    if method == "exact":
        counts = exact_null_counts(ranks)
        total = 2 ** n
        k = int(round(2 * w_plus))
        upper = float(counts[k:].sum() / total)
        lower = float(counts[:k + 1].sum() / total)
    elif method == "normal":
        mean = n * (n + 1) / 4.0
        _, ties = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(ties ** 3 - ties) / 48.0
        sd = math.sqrt(var)
        upper = float(norm.sf((w_plus - mean - 0.5) / sd))
        lower = float(norm.cdf((w_plus - mean + 0.5) / sd))
    else:
        raise ContractError(f"unknown method {method!r}")
    if alternative == "greater":
        return upper
    if alternative == "less":
        return lower
    return min(1.0, 2.0 * min(upper, lower))


# ---------------------------------------------------------------- aggregation and reports

@dataclass
class RunStatistics:
    mean: dict[str, float]
    std: dict[str, float]
    count: int
    ddof: int = 1

    def formatted(self, metric: str, digits: int = 3) -> str:
        if metric not in self.mean:
            return ""
        return f"{self.mean[metric]:.{digits}f}±{self.std[metric]:.{digits}f}"


def aggregate_runs(reports: list[EvalReport], ddof: int = 1) -> RunStatistics:
    if not reports:
        raise ContractError("aggregate_runs needs at least one report")
    mean, std = {}, {}
    for m in METRIC_NAMES:
        vals = [getattr(r, m) for r in reports]
        if any(v is None for v in vals):
            continue
        arr = np.array(vals, dtype=np.float64)
        mean[m] = float(arr.mean())
        std[m] = float(arr.std(ddof=ddof)) if arr.size > ddof else 0.0
    return RunStatistics(mean, std, len(reports), ddof)


def write_report(path, reports: list[EvalReport], stats: RunStatistics, label: str = "run",
                 echo: str = "") -> None:
    """One row per run/fold plus a ``mean±std`` summary row; ``echo`` lines become ``#`` comments."""
    buf = io.StringIO()
    for line in echo.splitlines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([label, *METRIC_NAMES])
    for i, r in enumerate(reports):
        w.writerow([i] + ["" if v is None else repr(float(v)) for v in r.values().values()])
    w.writerow(["mean±std"] + [stats.formatted(m) for m in METRIC_NAMES])
    Path(path).write_text(buf.getvalue())


def read_report(path) -> dict[str, np.ndarray]:
    """Per-run metric columns from a report CSV (summary row skipped)."""
    try:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    rows = list(csv.reader(lines))
    if not rows or rows[0][1:] != list(METRIC_NAMES):
        raise FormatError(f"{path}: not a metrics report (header {rows[0] if rows else None})")
    cols: dict[str, list[float]] = {m: [] for m in METRIC_NAMES}
    for row in rows[1:]:
        if row[0] == "mean±std":
            continue
        for m, v in zip(METRIC_NAMES, row[1:]):
            if v != "":
                cols[m].append(float(v))
    return {m: np.array(v) for m, v in cols.items() if v}
