"""Population graph from subject features: cosine similarity + threshold.

Self-similarities are never edges; the encoder adds its own self-loops
when asked (see :func:`normalized_adjacency`).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import numcore as nc
from .errors import ConfigError, DataError, DegenerateError, DegenerateRowWarning, DimensionError, FormatError

MODULARITY_CONVENTIONS = ("newman", "halved-null")


@dataclass(frozen=True)
class SubjectGraph:
    n: int
    rows: np.ndarray      # i of each undirected edge, i < j
    cols: np.ndarray      # j
    weights: np.ndarray
    alpha: float = 0.0
    degrees: np.ndarray = field(init=False, repr=False)
    total_weight: float = field(init=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        if not (rows.shape == cols.shape == w.shape):
            raise DimensionError("edge arrays differ in length")
        if rows.size and (np.any(rows >= cols) or rows.min() < 0 or cols.max() >= self.n):
            raise DataError("edges must satisfy 0 <= i < j < n")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "weights", w)
        deg = np.bincount(rows, weights=w, minlength=self.n) + np.bincount(cols, weights=w, minlength=self.n)
        object.__setattr__(self, "degrees", deg)
        object.__setattr__(self, "total_weight", float(2.0 * np.sum(w)))

    @property
    def num_edges(self) -> int:
        return int(self.rows.size)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist()))

    @property
    def isolated(self) -> np.ndarray:
        return np.flatnonzero(self.degrees == 0)

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric sparse A (both directions)."""
        return self._adjacency

    @cached_property
    def _adjacency(self) -> sp.csr_matrix:
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        v = np.concatenate([self.weights, self.weights])
        return sp.csr_matrix((v, (r, c)), shape=(self.n, self.n))

    def dense(self) -> np.ndarray:
        return self.adjacency().toarray()

    def with_edges(self, keep: np.ndarray) -> "SubjectGraph":
        return SubjectGraph(self.n, self.rows[keep], self.cols[keep], self.weights[keep], self.alpha)


def cosine_similarity(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"feature matrix must be n×d with n,d ≥ 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("feature matrix contains non-finite values")
    norms = np.linalg.norm(X, axis=1)
    zero = norms == 0
    if np.any(zero):
        warnings.warn(f"{int(zero.sum())} zero-norm feature row(s) get similarity 0",
                      DegenerateRowWarning, stacklevel=2)
    U = X / np.where(zero, 1.0, norms)[:, None]
    W = U @ U.T
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, np.where(zero, 0.0, 1.0))
    return W


def sparsify(W, alpha: float) -> SubjectGraph:
    W = np.asarray(W, dtype=np.float64)
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionError(f"similarity matrix must be square, got {W.shape}")
    if np.max(np.abs(W - W.T), initial=0.0) > 1e-12:
        raise DataError("similarity matrix is not symmetric")
    n = W.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    vals = np.minimum(W[iu, ju], 1.0)
    keep = (vals >= alpha) & (vals > 0)
    g = SubjectGraph(n, iu[keep], ju[keep], vals[keep], alpha=alpha)
    if g.num_edges == 0:
        raise DegenerateError(f"threshold alpha={alpha} leaves no edges")
    if g.isolated.size:
        warnings.warn(f"{g.isolated.size} isolated node(s) at alpha={alpha}", RuntimeWarning, stacklevel=2)
    return g


def build_graph(X, alpha: float) -> SubjectGraph:
    return sparsify(cosine_similarity(X), alpha)


def modularity_matrix(g: SubjectGraph, convention: str = "newman") -> np.ndarray:
    """Dense B; for checking and small graphs only."""
    d = g.degrees
    return g.dense() - np.outer(d, d) / _null_denominator(g, convention)


def _null_denominator(g: SubjectGraph, convention: str) -> float:
    if convention == "newman":
        return g.total_weight
    if convention == "halved-null":
        return 2.0 * g.total_weight
    raise ConfigError(f"unknown modularity convention {convention!r}")


def modularity_quadratic(g: SubjectGraph, S, convention: str = "newman") -> nc.Tensor:
    """Tr(SᵀBS) as Tr(SᵀAS) − ‖Sᵀd‖²/w, never forming B."""
    S = nc.as_tensor(S)
    if S.ndim != 2 or S.shape[0] != g.n:
        raise DimensionError(f"assignment has shape {S.shape}, graph has {g.n} nodes")
    AS = nc.spmm(g.adjacency(), S)
    within = nc.sum(nc.mul(S, AS))
    Sd = nc.matmul(nc.transpose(S), nc.Tensor(g.degrees[:, None]))
    return within - nc.sum(nc.square(Sd)) * (1.0 / _null_denominator(g, convention))


def normalized_adjacency(g: SubjectGraph, self_loops: bool = False) -> sp.csr_matrix:
    """D̃^{-1/2} Ã D̃^{-1/2}; apply with ``numcore.spmm``."""
    deg = g.degrees + 1.0 if self_loops else g.degrees
    if not self_loops and np.any(deg == 0):
        warnings.warn(f"{int(np.sum(deg == 0))} isolated node(s) receive no messages",
                      RuntimeWarning, stacklevel=2)
    inv = np.zeros_like(deg)
    inv[deg > 0] = deg[deg > 0] ** -0.5
    r = np.concatenate([g.rows, g.cols])
    c = np.concatenate([g.cols, g.rows])
    v = np.concatenate([g.weights, g.weights]) * inv[r] * inv[c]
    if self_loops:
        idx = np.arange(g.n)
        r, c, v = np.concatenate([r, idx]), np.concatenate([c, idx]), np.concatenate([v, inv * inv])
    return sp.csr_matrix((v, (r, c)), shape=(g.n, g.n))


def write_edgelist(g: SubjectGraph, path) -> None:
    lines = [f"# n={g.n} alpha={g.alpha!r}"]
    lines += [f"{i}\t{j}\t{w!r}" for i, j, w in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path) -> SubjectGraph:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# n="):
        raise FormatError(f"{path}: missing '# n=<n> alpha=<alpha>' header")
    try:
        meta = dict(tok.split("=", 1) for tok in text[0][1:].split())
        n, alpha = int(meta["n"]), float(meta["alpha"])
    except (KeyError, ValueError):
        raise FormatError(f"{path}: malformed header {text[0]!r}") from None
    rows, cols, ws = [], [], []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except (IndexError, ValueError):
            raise FormatError(f"{path}:{lineno}: expected i<TAB>j<TAB>weight") from None
        rows.append(i)
        cols.append(j)
        ws.append(w)
    return SubjectGraph(n, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                        np.array(ws), alpha=alpha)
