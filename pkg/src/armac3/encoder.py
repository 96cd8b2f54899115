"""ARMA graph encoder, cluster-assignment head, EMA teacher and checkpoints."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import numcore as nc
from .config import RunConfig, format_config, parse_assignments, build_configs
from .errors import ConfigError, DimensionError, FormatError
from .graphbuild import SubjectGraph, normalized_adjacency

CHECKPOINT_MAGIC = b"ARMAC3"
CHECKPOINT_VERSION = 1


class EncoderParams:
    """Named learnable tensors plus batch-norm running statistics."""

    def __init__(self, tensors: dict[str, nc.Tensor], running: dict[str, np.ndarray]):
        self.tensors = tensors
        self.running = running

    def __getitem__(self, name: str) -> nc.Tensor:
        return self.tensors[name]

    def trainable(self) -> list[nc.Tensor]:
        return [t for t in self.tensors.values() if t.requires_grad]

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def copy(self, requires_grad: bool = False) -> "EncoderParams":
        return EncoderParams(
            {k: nc.Tensor(v.data.copy(), requires_grad=requires_grad, name=k) for k, v in self.tensors.items()},
            {k: v.copy() for k, v in self.running.items()},
        )

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.tensors.items()}

    @property
    def in_dim(self) -> int:
        return self.tensors["arma.s0.l0.V"].shape[0]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(in_dim: int, cfg: RunConfig, rng: np.random.Generator, n_out: int | None = None) -> EncoderParams:
    hid = cfg.hidden_dim
    k = cfg.k_clusters if n_out is None else n_out
    raw: dict[str, np.ndarray] = {}
    for s in range(cfg.num_stacks):
        for t in range(cfg.num_layers):
            raw[f"arma.s{s}.l{t}.W"] = _glorot(rng, in_dim if t == 0 else hid, hid)
            raw[f"arma.s{s}.l{t}.V"] = _glorot(rng, in_dim, hid)
    if cfg.batch_norm:
        raw["bn.gamma"] = np.ones(hid)
        raw["bn.beta"] = np.zeros(hid)
    raw["proj.W"] = _glorot(rng, hid, hid)
    raw["proj.b"] = np.zeros(hid)
    if cfg.predictor_hidden:
        raw["pred.W1"] = _glorot(rng, hid, cfg.predictor_hidden)
        raw["pred.b1"] = np.zeros(cfg.predictor_hidden)
        raw["pred.W"] = _glorot(rng, cfg.predictor_hidden, k)
    else:
        raw["pred.W"] = _glorot(rng, hid, k)
    raw["pred.b"] = np.zeros(k)
    running = {"bn.running_mean": np.zeros(hid), "bn.running_var": np.ones(hid)} if cfg.batch_norm else {}
    return EncoderParams({k_: nc.Tensor(v, requires_grad=True, name=k_) for k_, v in raw.items()}, running)


def activation_fn(name: str):
    try:
        return nc.ACTIVATIONS[name]
    except KeyError:
        raise ConfigError(f"unknown activation {name!r}; expected one of {sorted(nc.ACTIVATIONS)}") from None


def arma_conv(op: sp.spmatrix, X, params: EncoderParams, activation: str,
              num_stacks: int, num_layers: int) -> nc.Tensor:
    """Stack-averaged ARMA recursion with skip connections from the raw features."""
    act = activation_fn(activation)
    X = nc.as_tensor(X)
    if X.shape[0] != op.shape[0]:
        raise DimensionError(f"features have {X.shape[0]} rows, graph has {op.shape[0]} nodes")
    out = None
    for s in range(num_stacks):
        H = X
        for t in range(num_layers):
            # L̂(HW) == (L̂H)W and avoids a dense n×d propagation
            prop = nc.spmm(op, nc.matmul(H, params[f"arma.s{s}.l{t}.W"]))
            H = act(prop + nc.matmul(X, params[f"arma.s{s}.l{t}.V"]))
        out = H if out is None else out + H
    return out if num_stacks == 1 else out * (1.0 / num_stacks)


def batch_norm(H: nc.Tensor, params: EncoderParams, training: bool, momentum: float, eps: float) -> nc.Tensor:
    if training:
        mu = nc.mean(H, axis=0, keepdims=True)
        centered = H - mu
        var = nc.mean(nc.square(centered), axis=0, keepdims=True)
        xhat = centered / nc.sqrt(var + eps)
        n = H.shape[0]
        unbiased = var.data[0] * (n / (n - 1)) if n > 1 else var.data[0]
        rm, rv = params.running["bn.running_mean"], params.running["bn.running_var"]
        rm *= 1.0 - momentum
        rm += momentum * mu.data[0]
        rv *= 1.0 - momentum
        rv += momentum * unbiased
    else:
        xhat = (H - params.running["bn.running_mean"]) / np.sqrt(params.running["bn.running_var"] + eps)
    return xhat * params["bn.gamma"] + params["bn.beta"]


def dropout(H: nc.Tensor, rate: float, training: bool, rng: np.random.Generator | None) -> nc.Tensor:
    if not training or rate == 0:
        return H
    mask = (rng.random(H.shape) >= rate) / (1.0 - rate)
    return H * mask


DENSE_OPERATOR_MAX_N = 1024


@dataclass
class View:
    """A graph plus its node features, with the propagation operator cached.

    Small graphs get a dense operator: at n ≲ 10³ a BLAS product beats
    sparse dispatch overhead and the result is the same matrix.
    """
    graph: SubjectGraph
    X: np.ndarray
    self_loops: bool = False
    _op: sp.csr_matrix | np.ndarray | None = None

    @property
    def op(self) -> sp.csr_matrix | np.ndarray:
        if self._op is None:
            op = normalized_adjacency(self.graph, self.self_loops)
            self._op = op.toarray() if self.graph.n <= DENSE_OPERATOR_MAX_N else op
        return self._op


def encoder_forward(view: View, params: EncoderParams, cfg: RunConfig, training: bool,
                    rng: np.random.Generator | None = None) -> nc.Tensor:
    H = arma_conv(view.op, view.X, params, cfg.activation, cfg.num_stacks, cfg.num_layers)
    if cfg.batch_norm:
        H = batch_norm(H, params, training, cfg.bn_momentum, cfg.bn_eps)
    H = dropout(H, cfg.dropout, training, rng)
    return nc.matmul(H, params["proj.W"]) + params["proj.b"]


def cluster_logits(h: nc.Tensor, params: EncoderParams, activation: str = "elu") -> nc.Tensor:
    if "pred.W1" in params.tensors:
        h = activation_fn(activation)(nc.matmul(h, params["pred.W1"]) + params["pred.b1"])
    return nc.matmul(h, params["pred.W"]) + params["pred.b"]


def assign_clusters(h: nc.Tensor, params: EncoderParams, activation: str = "elu") -> nc.Tensor:
    return nc.rowwise_softmax(cluster_logits(h, params, activation))


class EmaTeacher:
    """Gradient-free copy of the online parameters, moved only by :meth:`update`."""

    def __init__(self, online: EncoderParams, momentum: float):
        if not 0.0 <= momentum <= 1.0:
            raise ConfigError(f"EMA momentum must lie in [0, 1], got {momentum}")
        self.momentum = momentum
        self.params = online.copy(requires_grad=False)

    def update(self, online: EncoderParams) -> None:
        ema_update(self, online)


def ema_update(teacher: EmaTeacher, online: EncoderParams) -> None:
    m = teacher.momentum
    if not 0.0 <= m <= 1.0:
        raise ConfigError(f"EMA momentum must lie in [0, 1], got {m}")
    if teacher.params.shapes() != online.shapes():
        raise DimensionError("teacher and online parameter shapes differ")
    for name, tau in teacher.params.tensors.items():
        tau.data = m * tau.data + (1.0 - m) * online.tensors[name].data
    for name, stat in online.running.items():
        teacher.params.running[name] = stat.copy()


# ---------------------------------------------------------------- checkpoints

def _pack_tensor(name: str, arr: np.ndarray) -> bytes:
    raw = name.encode()
    head = struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_checkpoint(path, cfg: RunConfig, online: EncoderParams, teacher: EmaTeacher,
                    extra: dict[str, np.ndarray] | None = None) -> None:
    """Binary container: magic, version, config echo, then named float64 tensors."""
    tensors: list[tuple[str, np.ndarray]] = []
    for prefix, p in (("online", online), ("teacher", teacher.params)):
        tensors += [(f"{prefix}/{k}", v.data) for k, v in p.tensors.items()]
        tensors += [(f"{prefix}/{k}", v) for k, v in p.running.items()]
    tensors += [(f"extra/{k}", np.asarray(v, dtype=np.float64)) for k, v in (extra or {}).items()]
    cfg_bytes = format_config(cfg).encode()
    blob = bytearray(CHECKPOINT_MAGIC)
    blob += struct.pack("<HI", CHECKPOINT_VERSION, len(cfg_bytes)) + cfg_bytes
    blob += struct.pack("<I", len(tensors))
    for name, arr in tensors:
        blob += _pack_tensor(name, arr)
    Path(path).write_bytes(bytes(blob))


@dataclass
class Checkpoint:
    cfg: RunConfig
    online: EncoderParams
    teacher: EmaTeacher
    extra: dict[str, np.ndarray]


def load_checkpoint(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    if buf[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not an ARMAC3 checkpoint (bad magic)")
    pos = len(CHECKPOINT_MAGIC)
    try:
        version, cfg_len = struct.unpack_from("<HI", buf, pos)
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}")
        pos += 6
        cfg_text = buf[pos:pos + cfg_len].decode()
        pos += cfg_len
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos:pos + nlen].decode()
            pos += nlen
            (ndim,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}Q", buf, pos)
            pos += 8 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 8 * size > len(buf):
                raise FormatError(f"{path}: truncated tensor {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
            pos += 8 * size
    except (struct.error, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint ({exc})") from None
    if pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - pos} trailing bytes")
    cfg, _ = build_configs(parse_assignments(cfg_text.splitlines(), f"{path}:config"))

    def collect(prefix: str, requires_grad: bool) -> EncoderParams:
        tensors, running = {}, {}
        for name, arr in arrays.items():
            if not name.startswith(prefix + "/"):
                continue
            key = name[len(prefix) + 1:]
            if key.startswith("bn.running_"):
                running[key] = arr
            else:
                tensors[key] = nc.Tensor(arr, requires_grad=requires_grad, name=key)
        return EncoderParams(tensors, running)

    online = collect("online", True)
    teacher = EmaTeacher(online, cfg.ema_momentum)
    teacher.params = collect("teacher", False)
    extra = {k[len("extra/"):]: v for k, v in arrays.items() if k.startswith("extra/")}
    return Checkpoint(cfg, online, teacher, extra)
