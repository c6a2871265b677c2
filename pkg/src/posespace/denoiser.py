"""Topology-aware transformer denoiser over per-node tokens.

Each skeleton node becomes one token built from the noisy normalized
position, the rest position, the node's semantic feature, and the timestep.
Attention logits get a learned per-head additive bias indexed by bucketed
undirected graph distance between nodes, which is how skeleton topology
enters the network. The decoder maps tokens back to denoised normalized
node positions (clean-sample parameterization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError, NumericalError
from .features import NodeFeatures
from .geometry import NormalizationStats, Pose, _freeze
from .jsonio import dumps_canonical

TIME_EMBED_DIM = 64


@dataclass(frozen=True)
class DenoiserConfig:
    n_f: int
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 4
    d_ff: int = 0  # 0 -> 4 * d_model
    max_graph_dist: int = 8

    def __post_init__(self):
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)
        if self.d_model <= 0 or self.d_model % 2 != 0:
            raise DataError(f"d_model must be even and positive, got {self.d_model}")
        if self.n_heads <= 0 or self.d_model % self.n_heads != 0:
            raise DataError(f"n_heads must divide d_model, got {self.n_heads}/{self.d_model}")
        for name in ("n_layers", "d_ff", "n_f"):
            if getattr(self, name) <= 0:
                raise DataError(f"{name} must be positive")
        if self.max_graph_dist < 0:
            raise DataError("max_graph_dist must be >= 0")

    @property
    def n_buckets(self) -> int:
        return self.max_graph_dist + 2  # hop buckets 0..max, one for disconnected

    def to_dict(self) -> dict:
        return {
            "n_f": self.n_f,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "max_graph_dist": self.max_graph_dist,
        }


@dataclass(frozen=True)
class GraphDistances:
    """Bucketed undirected shortest-path hops: min(d, cap), cap+1 if disconnected."""

    buckets: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.buckets, dtype=np.int64)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise DataError("graph distance matrix must be square")
        if not np.array_equal(b, b.T) or np.any(np.diag(b) != 0):
            raise DataError("graph distances must be symmetric with zero diagonal")
        object.__setattr__(self, "buckets", _freeze(b))

    @classmethod
    def compute(cls, n_nodes: int, edges: np.ndarray, max_graph_dist: int) -> "GraphDistances":
        adj: list[list[int]] = [[] for _ in range(n_nodes)]
        for p, c in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
            adj[p].append(int(c))
            adj[c].append(int(p))
        dist = np.full((n_nodes, n_nodes), -1, dtype=np.int64)
        for s in range(n_nodes):
            dist[s, s] = 0
            frontier = [s]
            d = 0
            while frontier:
                d += 1
                nxt = []
                for u in frontier:
                    for v in adj[u]:
                        if dist[s, v] < 0:
                            dist[s, v] = d
                            nxt.append(v)
                frontier = nxt
        buckets = np.where(dist < 0, max_graph_dist + 1, np.minimum(dist, max_graph_dist))
        return cls(buckets)


_dist_cache: dict[tuple, np.ndarray] = {}


def _buckets_for(n_nodes: int, edges: np.ndarray, cap: int) -> np.ndarray:
    key = (n_nodes, cap, np.asarray(edges, dtype=np.int64).tobytes())
    if key not in _dist_cache:
        _dist_cache[key] = GraphDistances.compute(n_nodes, edges, cap).buckets
    return _dist_cache[key]


@dataclass
class DenoiserModel:
    config: DenoiserConfig
    params: dict[str, np.ndarray]
    stats: NormalizationStats

    def __post_init__(self):
        expected = param_shapes(self.config)
        if set(self.params) != set(expected):
            missing = set(expected) ^ set(self.params)
            raise DataError(f"parameter names do not match config: {sorted(missing)}")
        for k, v in self.params.items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != expected[k]:
                raise DataError(f"parameter {k} has shape {v.shape}, expected {expected[k]}")
            if not np.all(np.isfinite(v)):
                raise DataError(f"non-finite values in parameter {k}")
            self.params[k] = v


def param_shapes(cfg: DenoiserConfig) -> dict[str, tuple]:
    d, h = cfg.d_model, cfg.n_heads
    shapes: dict[str, tuple] = {
        "e_x.w": (3, d // 2), "e_x.b": (d // 2,),
        "e_P.w": (3, d // 2), "e_P.b": (d // 2,),
        "e_F.w": (cfg.n_f, d), "e_F.b": (d,),
        "e_t.w1": (TIME_EMBED_DIM, d), "e_t.b1": (d,),
        "e_t.w2": (d, d), "e_t.b2": (d,),
        "d_x.w": (d, 3), "d_x.b": (3,),
    }
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        shapes[p + "ln1.g"] = (d,)
        shapes[p + "ln1.b"] = (d,)
        shapes[p + "attn.wq"] = (d, d)
        shapes[p + "attn.bq"] = (d,)
        shapes[p + "attn.wk"] = (d, d)
        shapes[p + "attn.bk"] = (d,)
        shapes[p + "attn.wv"] = (d, d)
        shapes[p + "attn.bv"] = (d,)
        shapes[p + "attn.wo"] = (d, d)
        shapes[p + "attn.bo"] = (d,)
        shapes[p + "attn.bias_table"] = (h, cfg.n_buckets)
        shapes[p + "ln2.g"] = (d,)
        shapes[p + "ln2.b"] = (d,)
        shapes[p + "ff.w1"] = (d, cfg.d_ff)
        shapes[p + "ff.b1"] = (cfg.d_ff,)
        shapes[p + "ff.w2"] = (cfg.d_ff, d)
        shapes[p + "ff.b2"] = (d,)
    return shapes


def init_params(config: DenoiserConfig, seed: int) -> DenoiserModel:
    """Seeded init: normal weights scaled by 1/sqrt(fan_in), zero biases,
    unit layer-norm gains, zero graph-bias tables, zero decoder.

    Residual branch outputs (attention out-projection, second feed-forward
    matrix) start at zero so every block begins as the identity; with the
    zero decoder the untrained model predicts the all-zero normalized pose
    (the rest pose) for any input.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if name.endswith((".g",)):
            params[name] = np.ones(shape)
        elif name.endswith((".b", ".bq", ".bk", ".bv", ".bo", ".b1", ".b2")) or "bias_table" in name:
            params[name] = np.zeros(shape)
        elif name.startswith("d_x") or name.endswith(("attn.wo", "ff.w2")):
            params[name] = np.zeros(shape)
        else:
            fan_in = shape[0]
            params[name] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
    return DenoiserModel(config=config, params=params, stats=NormalizationStats(1.0))


def count_params(config: DenoiserConfig) -> int:
    return int(sum(np.prod(s) for s in param_shapes(config).values()))


# --------------------------------------------------------------------------
# forward graph
# --------------------------------------------------------------------------


def timestep_embedding(t) -> np.ndarray:
    """Sinusoidal embedding, shape (len(t), TIME_EMBED_DIM). Half sin, half cos,
    frequencies 10000^(-i/half)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = TIME_EMBED_DIM // 2
    freqs = np.power(10000.0, -np.arange(half) / half)
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def _affine(x: Tensor, params, name: str) -> Tensor:
    return x @ params[name + ".w"] + params[name + ".b"]


def _encode(params, cfg: DenoiserConfig, noisy: Tensor, rest: np.ndarray,
            feats: np.ndarray, t) -> Tensor:
    """Token sequence (B, N, d): concat(e_x(noisy), e_P(rest)) + e_F(F) + e_t(t)."""
    b, n = noisy.shape[0], noisy.shape[1]
    ex = _affine(noisy, params, "e_x")                               # (B,N,d/2)
    ep = _affine(ad.constant(rest.reshape(1, n, 3)), params, "e_P")  # (1,N,d/2)
    ep = ep + ad.constant(np.zeros((b, 1, 1)))                       # broadcast to batch
    ef = _affine(ad.constant(feats.reshape(1, n, -1)), params, "e_F")
    temb = ad.constant(timestep_embedding(t))                        # (B or 1, 64)
    h = ad.gelu(temb @ params["e_t.w1"] + params["e_t.b1"])
    et = (h @ params["e_t.w2"] + params["e_t.b2"]).reshape(-1, 1, cfg.d_model)
    return ad.concat([ex, ep], axis=-1) + ef + et


def _block(params, cfg: DenoiserConfig, prefix: str, x: Tensor, bias: Tensor) -> Tensor:
    b, n, d = x.shape
    h_count, dh = cfg.n_heads, cfg.d_model // cfg.n_heads

    h = ad.layer_norm(x, params[prefix + "ln1.g"], params[prefix + "ln1.b"])
    q = (h @ params[prefix + "attn.wq"] + params[prefix + "attn.bq"]).reshape(b, n, h_count, dh).transpose((0, 2, 1, 3))
    k = (h @ params[prefix + "attn.wk"] + params[prefix + "attn.bk"]).reshape(b, n, h_count, dh).transpose((0, 2, 1, 3))
    v = (h @ params[prefix + "attn.wv"] + params[prefix + "attn.bv"]).reshape(b, n, h_count, dh).transpose((0, 2, 1, 3))
    scores = q @ k.transpose((0, 1, 3, 2)) * (1.0 / np.sqrt(dh)) + bias.reshape(1, h_count, n, n)
    ctx = ad.softmax(scores, axis=-1) @ v                            # (B,H,N,dh)
    ctx = ctx.transpose((0, 2, 1, 3)).reshape(b, n, d)
    x = x + ctx @ params[prefix + "attn.wo"] + params[prefix + "attn.bo"]

    h2 = ad.layer_norm(x, params[prefix + "ln2.g"], params[prefix + "ln2.b"])
    ff = ad.gelu(h2 @ params[prefix + "ff.w1"] + params[prefix + "ff.b1"]) @ params[prefix + "ff.w2"] + params[prefix + "ff.b2"]
    return x + ff


def _forward_graph(params, cfg: DenoiserConfig, noisy: Tensor, buckets: np.ndarray,
                   rest: np.ndarray, feats: np.ndarray, t) -> Tensor:
    """(B, N, 3) denoised prediction from (B, N, 3) noisy normalized positions."""
    x = _encode(params, cfg, noisy, rest, feats, t)
    for i in range(cfg.n_layers):
        prefix = f"layers.{i}."
        bias = ad.embedding(params[prefix + "attn.bias_table"], buckets)  # (H,N,N)
        x = _block(params, cfg, prefix, x, bias)
    return _affine(x, params, "d_x")


def _check_inputs(model: DenoiserModel, n_coords: int, rest: Pose, feats: NodeFeatures, t) -> int:
    n = len(rest)
    if n_coords != 3 * n:
        raise DataError(f"noisy vector has {n_coords} entries, expected {3 * n}")
    if feats.rows.shape != (n, model.config.n_f):
        raise DataError(f"features shape {feats.rows.shape} does not match ({n},{model.config.n_f})")
    if np.any(np.asarray(t) < 1):
        raise DataError(f"timestep must be >= 1, got {t}")
    return n


def _lift(params: dict[str, np.ndarray], trainable: bool) -> dict[str, Tensor]:
    mk = ad.param if trainable else ad.constant
    return {k: mk(v) for k, v in params.items()}


def encode_tokens(model: DenoiserModel, noisy: np.ndarray, rest: Pose,
                  feats: NodeFeatures, t: int) -> np.ndarray:
    """Per-node input tokens, shape (N_P, d_model)."""
    noisy = np.asarray(noisy, dtype=np.float64).ravel()
    n = _check_inputs(model, noisy.size, rest, feats, t)
    out = _encode(_lift(model.params, False), model.config,
                  ad.constant(noisy.reshape(1, n, 3)), rest.node_positions,
                  feats.rows, [float(t)])
    return out.data[0]


def forward(model: DenoiserModel, noisy: np.ndarray, edges: np.ndarray, rest: Pose,
            feats: NodeFeatures, t: int) -> np.ndarray:
    """Denoised normalized pose prediction, flat (3*N_P,)."""
    noisy = np.asarray(noisy, dtype=np.float64).ravel()
    n = _check_inputs(model, noisy.size, rest, feats, t)
    buckets = _buckets_for(n, edges, model.config.max_graph_dist)
    out = _forward_graph(_lift(model.params, False), model.config,
                         ad.constant(noisy.reshape(1, n, 3)), buckets,
                         rest.node_positions, feats.rows, [float(t)])
    y = out.data.reshape(-1)
    if not np.all(np.isfinite(y)):
        raise NumericalError("non-finite activation in denoiser forward pass")
    return y


def forward_batch(model: DenoiserModel, noisy: np.ndarray, edges: np.ndarray, rest: Pose,
                  feats: NodeFeatures, t: np.ndarray) -> np.ndarray:
    """Vectorized forward over a batch: noisy (B, 3N), t (B,) -> (B, 3N)."""
    noisy = np.asarray(noisy, dtype=np.float64)
    n = _check_inputs(model, noisy.shape[1], rest, feats, t)
    buckets = _buckets_for(n, edges, model.config.max_graph_dist)
    out = _forward_graph(_lift(model.params, False), model.config,
                         ad.constant(noisy.reshape(-1, n, 3)), buckets,
                         rest.node_positions, feats.rows, np.asarray(t, dtype=np.float64))
    y = out.data.reshape(noisy.shape)
    if not np.all(np.isfinite(y)):
        raise NumericalError("non-finite activation in denoiser forward pass")
    return y


def backward(model: DenoiserModel, noisy: np.ndarray, edges: np.ndarray, rest: Pose,
             feats: NodeFeatures, t: int, cotangent: np.ndarray
             ) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Exact reverse-mode gradients of `forward`.

    Returns (parameter gradients, gradient w.r.t. the noisy input) for the
    scalar <cotangent, forward(...)>.
    """
    noisy = np.asarray(noisy, dtype=np.float64).ravel()
    n = _check_inputs(model, noisy.size, rest, feats, t)
    cot = np.asarray(cotangent, dtype=np.float64).ravel()
    if cot.size != 3 * n:
        raise DataError("cotangent size does not match output")
    buckets = _buckets_for(n, edges, model.config.max_graph_dist)
    params_t = _lift(model.params, True)
    x_in = ad.param(noisy.reshape(1, n, 3))
    out = _forward_graph(params_t, model.config, x_in, buckets,
                         rest.node_positions, feats.rows, [float(t)])
    ad.backward(out, cot.reshape(1, n, 3))
    grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in params_t.items()}
    gin = x_in.grad.reshape(-1) if x_in.grad is not None else np.zeros(3 * n)
    return grads, gin


# --------------------------------------------------------------------------
# checkpoint I/O: one JSON header line + little-endian float64 payload
# --------------------------------------------------------------------------


def save_checkpoint(model: DenoiserModel, path: str) -> None:
    names = sorted(model.params)
    tensors = []
    offset = 0
    for name in names:
        shape = model.params[name].shape
        tensors.append({"name": name, "shape": list(shape), "offset": offset})
        offset += int(np.prod(shape)) * 8
    header = {
        "format": "posespace-checkpoint-v1",
        "config": model.config.to_dict(),
        "stats": {"sigma_p": model.stats.sigma_p},
        "payload_bytes": offset,
        "tensors": tensors,
    }
    head = dumps_canonical(header).encode()
    with open(path, "wb") as f:
        f.write(head)
        for name in names:
            f.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())


def load_checkpoint(path: str) -> DenoiserModel:
    try:
        with open(path, "rb") as f:
            head_line = f.readline()
            payload = f.read()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e
    import json

    try:
        header = json.loads(head_line.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"bad checkpoint header in {path}: {e}") from e
    if header.get("format") != "posespace-checkpoint-v1":
        raise DataError(f"unknown checkpoint format in {path}")
    cfg = DenoiserConfig(**header["config"])
    expected = param_shapes(cfg)
    if len(payload) != header["payload_bytes"]:
        raise DataError(f"checkpoint payload is {len(payload)} bytes, header says {header['payload_bytes']}")
    params: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), int(entry["offset"])
        if name not in expected or shape != expected[name]:
            raise DataError(f"checkpoint tensor {name} shape {shape} does not match config")
        count = int(np.prod(shape))
        raw = payload[offset: offset + count * 8]
        if len(raw) != count * 8:
            raise DataError(f"checkpoint payload truncated at tensor {name}")
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return DenoiserModel(config=cfg, params=params,
                         stats=NormalizationStats(header["stats"]["sigma_p"]))
