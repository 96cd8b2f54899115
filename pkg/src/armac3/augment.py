"""Stochastic graph views: symmetric edge dropping and entry-wise feature masking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateError
from .graphbuild import SubjectGraph


@dataclass(frozen=True)
class AugmentConfig:
    p_edge_drop: float = 0.2
    p_feat_mask: float = 0.2

    def __post_init__(self):
        for name in ("p_edge_drop", "p_feat_mask"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {v}")


def sample_view(g: SubjectGraph, X: np.ndarray, cfg: AugmentConfig,
                rng: np.random.Generator) -> tuple[SubjectGraph, np.ndarray]:
    """One augmented view. Inputs are never modified."""
    view = g
    if cfg.p_edge_drop > 0:
        for _ in range(2):
            keep = rng.random(g.num_edges) >= cfg.p_edge_drop
            if keep.any():
                break
        else:
            raise DegenerateError(f"edge dropping at p={cfg.p_edge_drop} removed every edge twice")
        view = g.with_edges(keep)
    X = np.asarray(X, dtype=np.float64)
    if cfg.p_feat_mask > 0:
        X = np.where(rng.random(X.shape) < cfg.p_feat_mask, 0.0, X)
    else:
        X = X.copy()
    return view, X
