"""Loss terms: structural (modularity/collapse or min-cut), contrastive, supervised."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import numcore as nc
from .errors import ContractError, NumericError
from .graphbuild import SubjectGraph, _null_denominator, modularity_quadratic


@dataclass
class LossBreakdown:
    l_mod: float | None = None
    l_collapse: float | None = None
    l_struct: float = 0.0
    l_cross_view_12: float = 0.0
    l_cross_view_21: float = 0.0
    l_cross_net_12: float = 0.0
    l_cross_net_21: float = 0.0
    l1: float = 0.0
    l2: float = 0.0
    l_con: float = 0.0
    l_sup: float | None = None
    total: float = 0.0

    LOG_COLUMNS = ("iter", "l_mod", "l_collapse", "l_struct", "l1", "l2", "l_con", "l_sup", "total", "lr")

    def log_row(self, iteration: int, lr: float) -> list[str]:
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals["iter"], vals["lr"] = iteration, lr
        return ["" if vals[c] is None else repr(vals[c]) if isinstance(vals[c], float) else str(vals[c])
                for c in self.LOG_COLUMNS]


# ---------------------------------------------------------------- structural

def modularity_loss(S, g: SubjectGraph, convention: str = "newman") -> nc.Tensor:
    return modularity_quadratic(g, S, convention) * (-1.0 / _null_denominator(g, convention))


def collapse_loss(S) -> nc.Tensor:
    S = nc.as_tensor(S)
    n, k = S.shape
    return nc.frobenius_norm(nc.sum(S, axis=0)) * (np.sqrt(k) / n) - 1.0


def mincut_loss(S, g: SubjectGraph) -> tuple[nc.Tensor, nc.Tensor]:
    """(cut term, orthogonality term) of the normalized min-cut relaxation."""
    S = nc.as_tensor(S)
    k = S.shape[1]
    num = nc.sum(S * nc.spmm(g.adjacency(), S))
    den = nc.sum(nc.square(S) * g.degrees[:, None])
    if den.data <= 0:
        raise NumericError("Tr(SᵀDS) is zero: all assignment mass sits on isolated nodes")
    cut = -(num / den)
    StS = nc.matmul(nc.transpose(S), S)
    ortho = nc.frobenius_norm(StS / nc.frobenius_norm(StS) - np.eye(k) / np.sqrt(k))
    return cut, ortho


def struct_loss(S, g: SubjectGraph, mode: str = "modularity", convention: str = "newman",
                breakdown: LossBreakdown | None = None) -> nc.Tensor:
    if mode == "modularity":
        a, b = modularity_loss(S, g, convention), collapse_loss(S)
    elif mode == "mincut":
        a, b = mincut_loss(S, g)
    else:
        raise ContractError(f"unknown structural mode {mode!r}")
    out = a + b
    if breakdown is not None:
        if mode == "modularity":
            breakdown.l_mod, breakdown.l_collapse = a.item(), b.item()
        breakdown.l_struct = out.item()
    return out


# ---------------------------------------------------------------- contrastive

def _check_pair(a: nc.Tensor, b: nc.Tensor) -> None:
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] < 1:
        raise ContractError(f"embedding shapes must match and be n×h with n ≥ 1: {a.shape} vs {b.shape}")


def cross_view_loss(h_a, h_b, temperature: float = 1.0) -> nc.Tensor:
    """InfoNCE with the other view as positive and same-view nodes as negatives."""
    h_a, h_b = nc.as_tensor(h_a), nc.as_tensor(h_b)
    _check_pair(h_a, h_b)
    n = h_a.shape[0]
    eye = np.eye(n)
    na, nb = nc.l2_normalize_rows(h_a), nc.l2_normalize_rows(h_b)
    pos = nc.sum(na * nb, axis=1, keepdims=True) * (1.0 / temperature)
    intra = nc.matmul(na, nc.transpose(na)) * (1.0 / temperature)
    logits = intra * (1.0 - eye) + pos * eye
    return -nc.mean(nc.sum(logits * eye, axis=1) - nc.logsumexp_rows(logits))


def cross_network_loss(h_a, z_b, temperature: float = 1.0) -> nc.Tensor:
    """InfoNCE of online rows against teacher rows; ``z_b`` is a stop-gradient target."""
    h_a = nc.as_tensor(h_a)
    z_b = nc.Tensor(nc.as_tensor(z_b).data)
    _check_pair(h_a, z_b)
    eye = np.eye(h_a.shape[0])
    sims = nc.cosine_matrix(h_a, z_b) * (1.0 / temperature)
    return -nc.mean(nc.sum(sims * eye, axis=1) - nc.logsumexp_rows(sims))


def merit_loss(h1, h2, z1, z2, beta: float, temperature: float = 1.0,
               breakdown: LossBreakdown | None = None) -> tuple[nc.Tensor, nc.Tensor, nc.Tensor]:
    if not 0.0 <= beta <= 1.0:
        raise ContractError(f"beta must lie in [0, 1], got {beta}")
    cv12 = cross_view_loss(h1, h2, temperature)
    cv21 = cross_view_loss(h2, h1, temperature)
    cn12 = cross_network_loss(h1, z2, temperature)
    cn21 = cross_network_loss(h2, z1, temperature)
    l1 = cv12 * beta + cn12 * (1.0 - beta)
    l2 = cv21 * beta + cn21 * (1.0 - beta)
    l_con = (l1 + l2) * 0.5
    if breakdown is not None:
        breakdown.l_cross_view_12, breakdown.l_cross_view_21 = cv12.item(), cv21.item()
        breakdown.l_cross_net_12, breakdown.l_cross_net_21 = cn12.item(), cn21.item()
        breakdown.l1, breakdown.l2, breakdown.l_con = l1.item(), l2.item(), l_con.item()
    return l1, l2, l_con


# ---------------------------------------------------------------- supervised / totals

def supervised_ce(S_or_logits, labels, labeled_mask, from_logits: bool = False) -> nc.Tensor:
    """Summed cross-entropy over the labeled rows only."""
    P = nc.as_tensor(S_or_logits)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(labeled_mask, dtype=bool)
    if mask.shape != (P.shape[0],) or labels.shape != (P.shape[0],):
        raise ContractError("labels and mask must have one entry per node")
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ContractError("labeled mask is empty")
    y = labels[idx]
    if y.min() < 0 or y.max() >= P.shape[1]:
        raise ContractError(f"labels on the mask must lie in [0, {P.shape[1]})")
    onehot = np.zeros((idx.size, P.shape[1]))
    onehot[np.arange(idx.size), y] = 1.0
    rows = nc.take_rows(P, idx)
    if from_logits:
        return -nc.sum(nc.log_softmax(rows) * onehot)
    return -nc.sum(nc.log(nc.sum(rows * onehot, axis=1)))


def total_loss(mode: str, parts: dict[str, nc.Tensor], lambda_con: float,
               lambda_struct: float = 1.0) -> nc.Tensor:
    if mode == "unsup":
        return parts["l_struct"] + parts["l_con"] * lambda_con
    if mode == "semi":
        if parts.get("l_sup") is None:
            raise ContractError("semi-supervised objective needs a supervised term (labels)")
        return parts["l_con"] * lambda_con + parts["l_sup"] + parts["l_struct"] * lambda_struct
    raise ContractError(f"unknown training mode {mode!r}")
