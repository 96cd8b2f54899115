"""Run configuration and the flat ``key = value`` config-file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError

ACTIVATION_NAMES = ("relu", "elu", "selu", "silu")


@dataclass
class RunConfig:
    # graph
    alpha: float = 0.5
    self_loops: bool = False
    # objective
    lambda_con: float = 0.3
    lambda_struct: float = 1.0
    beta: float = 0.5
    contrastive_temperature: float = 1.0
    struct_mode: str = "modularity"
    modularity_convention: str = "newman"
    # encoder
    hidden_dim: int = 256
    num_stacks: int = 1
    num_layers: int = 1
    activation: str = "elu"
    dropout: float = 0.2
    batch_norm: bool = True
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    predictor_hidden: int = 0
    k_clusters: int = 2
    # optimisation
    lr: float = 1e-4
    weight_decay: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    step_size: int = 200
    lr_gamma: float = 0.5
    ema_momentum: float = 0.99
    epochs: int = 2000
    # augmentation
    p_edge_drop: float = 0.2
    p_feat_mask: float = 0.2
    # protocol
    seed: int = 0
    mode: str = "unsup"
    labeled_fraction: float = 0.10
    checkpoint_every: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def prob(name, lo_closed=True, hi_closed=True):
            v = getattr(self, name)
            lo_ok = v >= 0 if lo_closed else v > 0
            hi_ok = v <= 1 if hi_closed else v < 1
            if not (lo_ok and hi_ok):
                raise ConfigError(f"{name}={v} out of range")

        for name in ("alpha", "beta", "ema_momentum", "bn_momentum", "adam_beta1", "adam_beta2"):
            prob(name)
        for name in ("dropout", "p_edge_drop", "p_feat_mask"):
            prob(name, hi_closed=False)
        prob("labeled_fraction", lo_closed=False)
        if self.activation not in ACTIVATION_NAMES:
            raise ConfigError(f"activation must be one of {ACTIVATION_NAMES}, got {self.activation!r}")
        if self.struct_mode not in ("modularity", "mincut"):
            raise ConfigError(f"struct_mode must be modularity or mincut, got {self.struct_mode!r}")
        if self.modularity_convention not in ("newman", "halved-null"):
            raise ConfigError(f"modularity_convention must be newman or halved-null, got {self.modularity_convention!r}")
        if self.mode not in ("unsup", "semi"):
            raise ConfigError(f"mode must be unsup or semi, got {self.mode!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.k_clusters < 2:
            raise ConfigError("k_clusters must be >= 2")
        for name in ("hidden_dim", "num_stacks", "num_layers", "step_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.lr <= 0 or self.weight_decay < 0 or self.adam_eps <= 0 or self.bn_eps < 0:
            raise ConfigError("lr must be > 0; weight_decay, bn_eps >= 0; adam_eps > 0")
        if self.contrastive_temperature <= 0:
            raise ConfigError("contrastive_temperature must be > 0")
        if self.predictor_hidden < 0 or self.checkpoint_every < 0:
            raise ConfigError("predictor_hidden and checkpoint_every must be >= 0")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class PipelineOptions:
    """Paths and evaluation options accepted next to RunConfig keys."""
    features: str = ""
    labels: str = ""
    roi_dump: str = ""
    graph_out: str = ""
    checkpoint: str = ""
    report_out: str = ""
    log_out: str = ""
    positive_class: int = 1
    n_runs: int = 10
    n_folds: int = 20
    bins: int = 20
    std_ddof: int = 1

    def __post_init__(self):
        if self.n_runs < 1 or self.n_folds < 1 or self.bins < 1:
            raise ConfigError("n_runs, n_folds and bins must be >= 1")
        if self.std_ddof not in (0, 1):
            raise ConfigError("std_ddof must be 0 (population) or 1 (sample)")


def _coerce(cls, name: str, raw: str):
    ftype = {f.name: f.type for f in fields(cls)}[name]
    raw = raw.strip()
    try:
        if ftype in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {ftype}") from None
    return raw


def parse_assignments(lines, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def build_configs(values: dict[str, Any], source: str = "<config>") -> tuple[RunConfig, PipelineOptions]:
    run_keys = {f.name for f in fields(RunConfig)}
    opt_keys = {f.name for f in fields(PipelineOptions)}
    run_kw, opt_kw = {}, {}
    for key, val in values.items():
        if key in run_keys:
            run_kw[key] = _coerce(RunConfig, key, val) if isinstance(val, str) else val
        elif key in opt_keys:
            opt_kw[key] = _coerce(PipelineOptions, key, val) if isinstance(val, str) else val
        else:
            raise ConfigError(f"{source}: unknown key {key!r}")
    return RunConfig(**run_kw), PipelineOptions(**opt_kw)


def load_config_file(path, overrides: dict[str, Any] | None = None) -> tuple[RunConfig, PipelineOptions]:
    values: dict[str, Any] = {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        values.update(parse_assignments(text.splitlines(), str(path)))
    values.update(overrides or {})
    return build_configs(values, str(path or "<overrides>"))


def format_config(cfg: RunConfig, opts: PipelineOptions | None = None) -> str:
    """Echo as ``key = value`` lines (round-trips through ``parse_assignments``)."""
    items = list(cfg.to_dict().items())
    if opts is not None:
        items += list(dataclasses.asdict(opts).items())
    return "".join(f"{k} = {repr(v) if isinstance(v, float) else v}\n" for k, v in items)
