"""Per-vertex and per-node semantic features.

Real feature matrices (e.g. from an external extractor) are imported from
JSON; the synthetic generator provides a deterministic stand-in built from
the rig itself so the rest of the pipeline can run self-contained.
Per-node features are the skinning-weighted mean of vertex features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import Asset, _freeze
from .jsonio import load_json, save_json

_M64 = (1 << 64) - 1


@dataclass(frozen=True)
class VertexFeatures:
    """Feature matrix (N_V, N_F)."""

    rows: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=np.float64)
        if r.ndim != 2:
            raise DataError(f"vertex features must be 2-D, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise DataError("non-finite vertex feature")
        object.__setattr__(self, "rows", _freeze(r))

    @property
    def n_f(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class NodeFeatures:
    """Feature matrix (N_P, N_F)."""

    rows: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=np.float64)
        if r.ndim != 2:
            raise DataError(f"node features must be 2-D, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise DataError("non-finite node feature")
        object.__setattr__(self, "rows", _freeze(r))

    @property
    def n_f(self) -> int:
        return self.rows.shape[1]


def aggregate_node_features(asset: Asset, fv: VertexFeatures) -> NodeFeatures:
    """Skinning-weighted mean of vertex features per node.

    A node whose total weight is below 1e-12 gets the global mean feature.
    """
    if fv.rows.shape[0] != asset.n_vertices:
        raise DataError(
            f"feature rows ({fv.rows.shape[0]}) do not match vertex count ({asset.n_vertices})"
        )
    w = asset.skeleton.weights  # (N_P, N_V)
    totals = w.sum(axis=1)
    out = w @ fv.rows
    live = totals >= 1e-12
    out[live] /= totals[live, None]
    if np.any(~live):
        out[~live] = fv.rows.mean(axis=0)
    return NodeFeatures(out)


def _mix_hash(node_index: int, seed: int) -> int:
    """Deterministic 64-bit mix of (node index, seed); stable across runs."""
    x = (node_index * 0x9E3779B97F4A7C15 + seed * 0xBF58476D1CE4E5B9 + 0x94D049BB133111EB) & _M64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _M64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _M64
    x ^= x >> 31
    return x


def hash_bucket(node_index: int, seed: int, n_buckets: int) -> int:
    return _mix_hash(node_index, seed) % n_buckets


def positional_encoding(positions: np.ndarray, dims: int) -> np.ndarray:
    """Sinusoidal encoding of 3-D positions into `dims` columns.

    Column m uses axis m % 3; consecutive axis triples alternate sin and cos
    while doubling the frequency every full sin+cos cycle:
    pe[:, m] = sin_or_cos(2^k * pi * x_axis), k = (m // 3) // 2.
    """
    positions = np.asarray(positions, dtype=np.float64)
    out = np.empty((positions.shape[0], dims))
    for m in range(dims):
        axis = m % 3
        pair = m // 3
        k = pair // 2
        arg = (2.0**k) * np.pi * positions[:, axis]
        out[:, m] = np.sin(arg) if pair % 2 == 0 else np.cos(arg)
    return out


def synth_features(asset: Asset, n_f: int, seed: int) -> VertexFeatures:
    """Deterministic synthetic vertex features.

    First n_f//2 columns: one-hot of the vertex's argmax-weight node, hashed
    into the available buckets. Remaining columns: sinusoidal encoding of the
    rest vertex position.
    """
    if n_f < 4:
        raise DataError(f"n_f must be >= 4, got {n_f}")
    n_v = asset.n_vertices
    d_hash = n_f // 2
    d_pe = n_f - d_hash
    owner = np.argmax(asset.skeleton.weights, axis=0)  # ties -> lowest index
    onehot = np.zeros((n_v, d_hash))
    for node in np.unique(owner):
        onehot[owner == node, hash_bucket(int(node), seed, d_hash)] = 1.0
    pe = positional_encoding(asset.mesh.vertices, d_pe)
    return VertexFeatures(np.concatenate([onehot, pe], axis=1))


def load_features(path: str) -> VertexFeatures:
    doc = load_json(path)
    try:
        rows = np.asarray(doc["rows"], dtype=np.float64)
        n_v, n_f = int(doc["n_v"]), int(doc["n_f"])
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed feature file {path}: {e}") from e
    if rows.shape != (n_v, n_f):
        raise DataError(f"feature matrix shape {rows.shape} does not match header ({n_v},{n_f})")
    return VertexFeatures(rows)


def save_features(fv: VertexFeatures, path: str) -> None:
    save_json(path, {"n_v": fv.rows.shape[0], "n_f": fv.rows.shape[1], "rows": fv.rows.tolist()})
