"""Training loops (unsupervised and transductive semi-supervised), AdamW and StepLR."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import numcore as nc
from .augment import AugmentConfig, sample_view
from .config import RunConfig
from .encoder import (EmaTeacher, EncoderParams, View, assign_clusters, encoder_forward, init_params,
                      save_checkpoint)
from .errors import ContractError, DataError, NumericError
from .graphbuild import SubjectGraph
from .objectives import LossBreakdown, merit_loss, struct_loss, supervised_ce, total_loss

log = logging.getLogger(__name__)


def step_lr(lr0: float, iteration: int, step_size: int = 200, gamma: float = 0.5) -> float:
    return lr0 * gamma ** (iteration // step_size)


class AdamW:
    """Adaptive moments with bias correction and decoupled weight decay."""

    def __init__(self, params: list[nc.Tensor], weight_decay: float = 1e-4, betas=(0.9, 0.999),
                 eps: float = 1e-8):
        self.params = params
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self, lr: float) -> None:
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise NumericError(f"non-finite gradient in {p.name or 'parameter'}; aborting")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if self.weight_decay:
                p.data *= 1.0 - lr * self.weight_decay
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class TrainState:
    cfg: RunConfig
    params: EncoderParams
    teacher: EmaTeacher
    optimizer: AdamW
    rng: np.random.Generator
    iteration: int = 0
    history: list[tuple[LossBreakdown, float]] = field(default_factory=list)

    @property
    def lr(self) -> float:
        return step_lr(self.cfg.lr, self.iteration, self.cfg.step_size, self.cfg.lr_gamma)


@dataclass
class TrainResult:
    params: EncoderParams
    teacher: EmaTeacher
    S: np.ndarray
    h: np.ndarray
    history: list[tuple[LossBreakdown, float]]
    predictions: np.ndarray | None = None
    scores: np.ndarray | None = None


def init_state(in_dim: int, cfg: RunConfig, n_out: int | None = None) -> TrainState:
    rng = np.random.default_rng(cfg.seed)
    params = init_params(in_dim, cfg, rng, n_out=n_out)
    teacher = EmaTeacher(params, cfg.ema_momentum)
    opt = AdamW(params.trainable(), cfg.weight_decay, (cfg.adam_beta1, cfg.adam_beta2), cfg.adam_eps)
    return TrainState(cfg, params, teacher, opt, rng)


def embed(graph: SubjectGraph, X, params: EncoderParams, cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation-mode embeddings and soft assignments on the un-augmented graph."""
    with nc.no_grad():
        h = encoder_forward(View(graph, np.asarray(X, dtype=np.float64), cfg.self_loops), params, cfg, training=False)
        S = assign_clusters(h, params, cfg.activation)
    return h.data, S.data


def train_step(state: TrainState, graph: SubjectGraph, X: np.ndarray,
               labels: np.ndarray | None = None, labeled_mask: np.ndarray | None = None) -> LossBreakdown:
    """One full-graph iteration of the two-view online/teacher update."""
    cfg, rng = state.cfg, state.rng
    aug = AugmentConfig(cfg.p_edge_drop, cfg.p_feat_mask)
    g1, x1 = sample_view(graph, X, aug, rng)
    g2, x2 = sample_view(graph, X, aug, rng)
    v1, v2 = View(g1, x1, cfg.self_loops), View(g2, x2, cfg.self_loops)
    tape = nc.get_tape()
    tape.clear()

    h1 = encoder_forward(v1, state.params, cfg, training=True, rng=rng)
    h2 = encoder_forward(v2, state.params, cfg, training=True, rng=rng)
    with nc.no_grad():
        z1 = encoder_forward(v1, state.teacher.params, cfg, training=False)
        z2 = encoder_forward(v2, state.teacher.params, cfg, training=False)
    S = assign_clusters(h1, state.params, cfg.activation)

    br = LossBreakdown()
    parts = {
        "l_struct": struct_loss(S, graph, cfg.struct_mode, cfg.modularity_convention, br),
        "l_con": merit_loss(h1, h2, z1, z2, cfg.beta, cfg.contrastive_temperature, br)[2],
    }
    if cfg.mode == "semi":
        if labels is None or labeled_mask is None:
            raise ContractError("semi-supervised training needs labels and a labeled mask")
        parts["l_sup"] = supervised_ce(S, labels, labeled_mask)
        br.l_sup = parts["l_sup"].item()
    loss = total_loss(cfg.mode, parts, cfg.lambda_con, cfg.lambda_struct)
    br.total = loss.item()

    state.params.zero_grad()
    nc.backward(loss)
    lr = state.lr
    state.optimizer.step(lr)
    state.teacher.update(state.params)
    tape.clear()
    state.history.append((br, lr))
    state.iteration += 1
    return br


def _run(state: TrainState, graph: SubjectGraph, X: np.ndarray, labels=None, mask=None,
         checkpoint_path=None) -> None:
    cfg = state.cfg
    for it in range(cfg.epochs):
        br = train_step(state, graph, X, labels, mask)
        if it % 200 == 0 or it == cfg.epochs - 1:
            log.debug("iter %d total %.6f lr %.3g", it, br.total, state.history[-1][1])
        if checkpoint_path and cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, cfg, state.params, state.teacher)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, cfg, state.params, state.teacher)


def train_unsupervised(graph: SubjectGraph, X, cfg: RunConfig, checkpoint_path=None) -> TrainResult:
    if graph.total_weight <= 0:
        raise ContractError("graph has no edges")
    X = np.asarray(X, dtype=np.float64)
    cfg = cfg.replace(mode="unsup")
    state = init_state(X.shape[1], cfg)
    _run(state, graph, X, checkpoint_path=checkpoint_path)
    h, S = embed(graph, X, state.params, cfg)
    return TrainResult(state.params, state.teacher, S, h, state.history, predictions=S.argmax(axis=1))


def train_semisupervised(graph: SubjectGraph, X, labels, labeled_mask, cfg: RunConfig,
                         positive_class: int = 1, checkpoint_path=None) -> TrainResult:
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(labeled_mask, dtype=bool)
    n_classes = int(labels.max()) + 1
    absent = sorted(set(range(n_classes)) - set(labels[mask].tolist()))
    if absent:
        raise ContractError(f"classes {absent} have no labeled node in the mask")
    if not 0 <= positive_class < n_classes:
        raise ContractError(f"positive_class {positive_class} outside [0, {n_classes})")
    cfg = cfg.replace(mode="semi", k_clusters=n_classes)
    state = init_state(X.shape[1], cfg)
    _run(state, graph, X, labels, mask, checkpoint_path=checkpoint_path)
    h, S = embed(graph, X, state.params, cfg)
    return TrainResult(state.params, state.teacher, S, h, state.history,
                       predictions=S.argmax(axis=1), scores=S[:, positive_class])


def make_splits(labels, fraction: float, n_folds: int, seed: int) -> list[np.ndarray]:
    """Stratified labeled masks: ``round(fraction * class size)`` nodes per class, at least one."""
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 < fraction <= 1.0:
        raise ContractError(f"fraction must lie in (0, 1], got {fraction}")
    if n_folds < 1:
        raise ContractError("n_folds must be >= 1")
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    masks = []
    for _ in range(n_folds):
        mask = np.zeros(labels.size, dtype=bool)
        for c in classes:
            members = np.flatnonzero(labels == c)
            take = max(1, int(np.floor(fraction * members.size + 0.5)))
            if fraction < 1.0 and take >= members.size:
                raise DataError(f"class {c} has {members.size} node(s); too small to split at fraction {fraction}")
            if take == members.size:
                mask[members] = True
            else:
                mask[rng.choice(members, size=take, replace=False)] = True
        masks.append(mask)
    return masks
