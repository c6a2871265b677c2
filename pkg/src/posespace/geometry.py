"""Meshes, skeletons, poses, linear blend skinning, and asset I/O.

A pose is a full set of skeleton node positions. Deformation derives one
rigid transform per node from the rest and posed node positions (minimal
rotation aligning each node's bone direction, translation chosen so the node
maps exactly onto its posed position) and blends the transformed vertices
with the skinning weights. All arrays are float64 and frozen after
construction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError
from .jsonio import load_json, save_json

# rotation construction thresholds
ANTIPARALLEL_TOL = 1e-8   # dot < -1 + tol  ->  flat pi-rotation branch
DEGENERATE_LEN = 1e-9     # direction vectors shorter than this get identity

# K[b, a, c] = epsilon_{abc}; skew(w) = tensordot(w, K, axes=1)
_LEVI = np.zeros((3, 3, 3))
for _a, _b, _c, _s in [(0, 1, 2, 1), (1, 2, 0, 1), (2, 0, 1, 1),
                       (0, 2, 1, -1), (2, 1, 0, -1), (1, 0, 2, -1)]:
    _LEVI[_b, _a, _c] = _s
_LEVI.flags.writeable = False


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True, order="C")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh: vertices (N_V, 3) float64, faces (N_F, 3) int."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise DataError(f"vertices must be (N,3), got {v.shape}")
        if v.shape[0] < 3:
            raise DataError(f"need at least 3 vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise DataError("non-finite vertex coordinates")
        if f.size and (f.ndim != 2 or f.shape[1] != 3):
            raise DataError(f"faces must be (M,3), got {f.shape}")
        f = f.reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise DataError("face index out of range")
        object.__setattr__(self, "vertices", _freeze(v))
        object.__setattr__(self, "faces", _freeze(f))

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))


@dataclass(frozen=True)
class Skeleton:
    """Rest node positions (N_P, 3), edges (N_E, 2) as (parent, child), dense
    skinning weights (N_P, N_V) with unit column sums.

    The edge graph read child->parent must be a forest.
    """

    nodes: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    parents: np.ndarray = field(init=False, repr=False)  # -1 for roots

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64)
        n = nodes.shape[0]
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise DataError(f"nodes must be (N,3), got {nodes.shape}")
        if n < 2:
            raise DataError(f"need at least 2 skeleton nodes, got {n}")
        if not np.all(np.isfinite(nodes)):
            raise DataError("non-finite node positions")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise DataError("edge index out of range")
        if weights.ndim != 2 or weights.shape[0] != n:
            raise DataError(f"weights must be (N_P, N_V), got {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise DataError("non-finite skinning weight")
        if np.any(weights < 0):
            raise DataError("negative skinning weight")
        colsum = weights.sum(axis=0)
        if np.any(np.abs(colsum - 1.0) > 1e-6):
            raise DataError("skinning weight columns must sum to 1 (+-1e-6)")
        parents = np.full(n, -1, dtype=np.int64)
        for p, c in edges:
            if p == c:
                raise DataError(f"self-edge at node {p}")
            if parents[c] != -1:
                raise DataError(f"node {c} has multiple parents")
            parents[c] = p
        # acyclicity: walking child->parent must terminate
        for start in range(n):
            slow = start
            seen = 0
            while parents[slow] != -1:
                slow = parents[slow]
                seen += 1
                if seen > n:
                    raise DataError("cyclic skeleton")
        object.__setattr__(self, "nodes", _freeze(nodes))
        object.__setattr__(self, "edges", _freeze(edges))
        object.__setattr__(self, "weights", _freeze(weights))
        object.__setattr__(self, "parents", _freeze(parents))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for p, c in self.edges:
            ch[p].append(int(c))
        return ch


@dataclass(frozen=True)
class Pose:
    """One configuration of skeleton node positions, shape (N_P, 3)."""

    node_positions: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.node_positions, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise DataError(f"pose must be (N,3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DataError("non-finite pose coordinates")
        object.__setattr__(self, "node_positions", _freeze(p))

    def __len__(self) -> int:
        return self.node_positions.shape[0]


@dataclass(frozen=True)
class NormalizationStats:
    """Dataset-wide average node offset magnitude used to normalize poses."""

    sigma_p: float

    def __post_init__(self):
        s = float(self.sigma_p)
        if not (np.isfinite(s) and s > 0):
            raise DataError(f"sigma_p must be positive and finite, got {s}")
        object.__setattr__(self, "sigma_p", s)


@dataclass(frozen=True)
class Asset:
    """A rest mesh plus its skeleton, in unit-bounding-box-diagonal units."""

    mesh: Mesh
    skeleton: Skeleton
    name: str = ""

    def __post_init__(self):
        if self.skeleton.weights.shape[1] != self.mesh.n_vertices:
            raise DataError("skinning weights do not match vertex count")

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_nodes(self) -> int:
        return self.skeleton.n_nodes

    def rest_pose(self) -> Pose:
        return Pose(self.skeleton.nodes.copy())


@dataclass(frozen=True)
class PoseSet:
    """Ordered pose collection for one asset, with per-pose provenance tags."""

    asset_name: str
    poses: tuple
    tags: tuple

    def __post_init__(self):
        poses = tuple(self.poses)
        tags = tuple(self.tags) if self.tags else tuple("" for _ in poses)
        if len(tags) != len(poses):
            raise DataError("tags must match pose count")
        if poses:
            n = len(poses[0])
            if any(len(p) != n for p in poses):
                raise DataError("inconsistent pose sizes in set")
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return len(self.poses)

    def __iter__(self):
        return iter(self.poses)

    def __getitem__(self, i) -> Pose:
        return self.poses[i]

    def as_array(self) -> np.ndarray:
        return np.stack([p.node_positions for p in self.poses])


# --------------------------------------------------------------------------
# asset / pose-set files
# --------------------------------------------------------------------------


def _build_weights(triples, n_p: int, n_v: int) -> np.ndarray:
    w = np.zeros((n_p, n_v))
    for t in triples:
        if len(t) != 3:
            raise DataError(f"weight entry must be [node, vert, w], got {t}")
        i, j, val = int(t[0]), int(t[1]), float(t[2])
        if not (0 <= i < n_p and 0 <= j < n_v):
            raise DataError(f"weight index out of range: ({i},{j})")
        if val < 0:
            raise DataError(f"negative weight at ({i},{j})")
        w[i, j] += val
    return w


def parse_asset(doc, fallback_name: str = "") -> Asset:
    """Build a normalized Asset from a parsed asset document.

    Normalizes to unit bbox diagonal centered at the origin, renormalizes
    skinning weights per vertex; all-zero weight columns go to the nearest
    rest node (ties to the lowest node index).
    """
    try:
        mverts = np.asarray(doc["mesh"]["vertices"], dtype=np.float64)
        mfaces = np.asarray(doc["mesh"]["faces"], dtype=np.int64)
        snodes = np.asarray(doc["skeleton"]["nodes"], dtype=np.float64)
        sedges = np.asarray(doc["skeleton"]["edges"], dtype=np.int64)
        wtriples = doc["skeleton"]["weights"]
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed asset document: {e}") from e
    if mverts.ndim != 2 or mverts.shape[-1] != 3:
        raise DataError("mesh vertices must be a list of [x,y,z]")
    n_v, n_p = mverts.shape[0], snodes.shape[0]
    weights = _build_weights(wtriples, n_p, n_v)

    # zero-weight vertices -> nearest rest node
    dead = weights.sum(axis=0) == 0.0
    if np.any(dead):
        d2 = ((snodes[:, None, :] - mverts[None, dead, :]) ** 2).sum(-1)
        weights[np.argmin(d2, axis=0), np.flatnonzero(dead)] = 1.0
    weights = weights / weights.sum(axis=0, keepdims=True)

    lo, hi = mverts.min(0), mverts.max(0)
    diag = float(np.linalg.norm(hi - lo))
    if diag < 1e-12:
        raise DataError("zero-extent mesh")
    center = (lo + hi) / 2.0
    # skip the no-op transform so save -> load -> save is byte-identical
    if abs(diag - 1.0) > 1e-12 or np.any(np.abs(center) > 1e-12):
        mverts = (mverts - center) / diag
        snodes = (snodes - center) / diag

    name = doc.get("name") or fallback_name
    return Asset(mesh=Mesh(mverts, mfaces), skeleton=Skeleton(snodes, sedges.reshape(-1, 2), weights), name=name)


def load_asset(path: str) -> Asset:
    """Load and normalize an asset file (see `parse_asset`)."""
    name = os.path.splitext(os.path.basename(path))[0]
    if name.endswith(".asset"):
        name = name[: -len(".asset")]
    try:
        return parse_asset(load_json(path), fallback_name=name)
    except DataError as e:
        raise DataError(f"{path}: {e}") from e


def save_asset(asset: Asset, path: str) -> None:
    w = asset.skeleton.weights
    ii, jj = np.nonzero(w)
    triples = [[int(i), int(j), float(w[i, j])] for i, j in zip(ii, jj)]
    doc = {
        "name": asset.name,
        "mesh": {
            "vertices": asset.mesh.vertices.tolist(),
            "faces": asset.mesh.faces.tolist(),
        },
        "skeleton": {
            "nodes": asset.skeleton.nodes.tolist(),
            "edges": asset.skeleton.edges.tolist(),
            "weights": triples,
        },
    }
    save_json(path, doc)


def load_poses(path: str) -> PoseSet:
    doc = load_json(path)
    try:
        poses = tuple(Pose(np.asarray(p, dtype=np.float64)) for p in doc["poses"])
        tags = tuple(doc.get("tags") or ())
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed pose file {path}: {e}") from e
    return PoseSet(asset_name=doc.get("asset", ""), poses=poses, tags=tags)


def save_poses(pose_set: PoseSet, path: str) -> None:
    doc = {
        "asset": pose_set.asset_name,
        "poses": [p.node_positions.tolist() for p in pose_set.poses],
        "tags": list(pose_set.tags),
    }
    save_json(path, doc)


# --------------------------------------------------------------------------
# deformation
# --------------------------------------------------------------------------


def _reference_dirs(skeleton: Skeleton, positions: np.ndarray) -> np.ndarray:
    """Per-node bone reference direction at the given node positions.

    Node with a parent: unit vector toward the parent. Root: normalized
    average of unit vectors toward its children. Rows that cannot be
    normalized (isolated node, collapsed bone, canceling children) are zero.
    """
    n = skeleton.n_nodes
    dirs = np.zeros((n, 3))
    children = skeleton.children()
    for i in range(n):
        p = skeleton.parents[i]
        if p >= 0:
            d = positions[p] - positions[i]
            ln = np.linalg.norm(d)
            if ln >= DEGENERATE_LEN:
                dirs[i] = d / ln
        elif children[i]:
            acc = np.zeros(3)
            for c in children[i]:
                d = positions[c] - positions[i]
                ln = np.linalg.norm(d)
                if ln >= DEGENERATE_LEN:
                    acc += d / ln
            ln = np.linalg.norm(acc)
            if ln >= DEGENERATE_LEN:
                dirs[i] = acc / ln
    return dirs


def _reference_dirs_tensor(skeleton: Skeleton, pose_t: Tensor) -> tuple[Tensor, np.ndarray]:
    """Differentiable version of `_reference_dirs`.

    Returns (dirs, valid) where rows with valid == 0 are zero and must be
    treated as identity rotations by the caller. Gradients through degenerate
    rows are zeroed by `safe_norm`.
    """
    n = skeleton.n_nodes
    parents = skeleton.parents
    children = skeleton.children()

    has_parent = parents >= 0
    # raw direction per node: toward parent, or summed unit dirs toward children
    gather_to = np.flatnonzero(has_parent)
    if gather_to.size:
        d_par = pose_t[parents[gather_to]] - pose_t[gather_to]
        len_par = ad.safe_norm(d_par)
        inv = ad.constant((len_par.data >= DEGENERATE_LEN).astype(float)) / (
            len_par + ad.constant((len_par.data < DEGENERATE_LEN).astype(float))
        )
        unit_par = d_par * inv.reshape(-1, 1)
    root_rows = [i for i in range(n) if not has_parent[i] and children[i]]
    parts: list[Tensor] = []
    scatter = np.zeros((n, len(gather_to) + len(root_rows)))
    col = 0
    if gather_to.size:
        for k, i in enumerate(gather_to):
            scatter[i, col + k] = 1.0
        parts.append(unit_par)
        col += len(gather_to)
    for i in root_rows:
        cs = children[i]
        d = pose_t[np.asarray(cs)] - pose_t[np.full(len(cs), i)]
        ln = ad.safe_norm(d)
        invc = ad.constant((ln.data >= DEGENERATE_LEN).astype(float)) / (
            ln + ad.constant((ln.data < DEGENERATE_LEN).astype(float))
        )
        acc = (d * invc.reshape(-1, 1)).sum(axis=0).reshape(1, 3)
        ln_acc = ad.safe_norm(acc)
        inva = ad.constant((ln_acc.data >= DEGENERATE_LEN).astype(float)) / (
            ln_acc + ad.constant((ln_acc.data < DEGENERATE_LEN).astype(float))
        )
        parts.append(acc * inva.reshape(1, 1))
        scatter[i, col] = 1.0
        col += 1
    if parts:
        stacked = ad.concat(parts, axis=0) if len(parts) > 1 else parts[0]
        dirs = ad.constant(scatter) @ stacked
    else:
        dirs = ad.constant(np.zeros((n, 3)))
    valid = np.linalg.norm(dirs.data, axis=-1) > 0.5  # unit rows vs zero rows
    return dirs, valid


def _pi_rotation_matrices(u: np.ndarray) -> np.ndarray:
    """pi-rotation about a deterministic axis orthogonal to each row of u.

    The axis is the smallest-index canonical axis not parallel to u,
    orthogonalized against u. R = 2 a a^T - I.
    """
    n = u.shape[0]
    out = np.zeros((n, 3, 3))
    for i in range(n):
        ui = u[i]
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            if abs(float(np.dot(e, ui))) < 1.0 - 1e-8:
                a = e - np.dot(e, ui) * ui
                a = a / np.linalg.norm(a)
                out[i] = 2.0 * np.outer(a, a) - np.eye(3)
                break
        else:  # pragma: no cover - u not unit
            out[i] = np.eye(3)
    return out


def node_rotations_tensor(asset: Asset, pose_t: Tensor) -> Tensor:
    """Per-node minimal rotations (N_P, 3, 3) as a differentiable tensor.

    R maps the rest bone direction u onto the posed direction u':
    R = c I + [w]_x + w w^T / (1 + c) with c = u.u', w = u x u'. Antiparallel
    pairs (c < -1 + 1e-8) take a flat pi-rotation; degenerate directions take
    the identity. Neither special branch propagates gradient.
    """
    skel = asset.skeleton
    n = skel.n_nodes
    u_rest = _reference_dirs(skel, skel.nodes)
    rest_valid = np.linalg.norm(u_rest, axis=-1) > 0.5

    u_pose, pose_valid = _reference_dirs_tensor(skel, pose_t)
    u = ad.constant(u_rest)

    c = (u * u_pose).sum(axis=-1)             # (N,)
    w = ad.cross3(u, u_pose)                  # (N,3)

    smooth = rest_valid & pose_valid & (c.data >= -1.0 + ANTIPARALLEL_TOL)
    anti = rest_valid & pose_valid & ~smooth

    m_smooth = smooth.astype(float)
    eye = np.broadcast_to(np.eye(3), (n, 3, 3))

    # guard the 1/(1+c) pole on masked rows, they are overwritten below
    denom = c * ad.constant(m_smooth) + ad.constant(1.0 + (1.0 - m_smooth))
    skew = (w @ ad.constant(_LEVI.reshape(3, 9))).reshape(n, 3, 3)
    outer = w.reshape(n, 3, 1) * w.reshape(n, 1, 3)
    r_smooth = c.reshape(n, 1, 1) * ad.constant(eye) + skew + outer / denom.reshape(n, 1, 1)

    r_const = np.where(anti[:, None, None], _pi_rotation_matrices(u_rest), eye)
    return r_smooth * ad.constant(m_smooth[:, None, None]) + ad.constant(
        np.where(smooth[:, None, None], 0.0, r_const)
    )


def deform_tensor(asset: Asset, pose_t: Tensor) -> Tensor:
    """Differentiable linear blend skinning; returns vertices (N_V, 3)."""
    skel = asset.skeleton
    n = skel.n_nodes
    if pose_t.shape != (n, 3):
        raise DataError(f"pose shape {pose_t.shape} does not match skeleton ({n},3)")
    rot = node_rotations_tensor(asset, pose_t)  # (N,3,3)
    verts = asset.mesh.vertices
    offsets = ad.constant(verts[None, :, :] - skel.nodes[:, None, :])  # (N, N_V, 3)
    moved = offsets @ rot.transpose((0, 2, 1)) + pose_t.reshape(n, 1, 3)
    w = ad.constant(skel.weights[:, :, None])
    return (moved * w).sum(axis=0)


def deform(asset: Asset, pose: Pose) -> Mesh:
    """Linear blend skinning h(M, S, P'): deform the rest mesh by a pose."""
    if len(pose) != asset.n_nodes:
        raise DataError(f"pose has {len(pose)} nodes, skeleton has {asset.n_nodes}")
    out = deform_tensor(asset, ad.constant(pose.node_positions))
    return Mesh(out.data, asset.mesh.faces)


# --------------------------------------------------------------------------
# normalization and simple pose statistics
# --------------------------------------------------------------------------


def normalize_pose(asset: Asset, pose: Pose, stats: NormalizationStats) -> np.ndarray:
    """Flatten (P' - P) / sigma_P into a 3*N_P vector."""
    if len(pose) != asset.n_nodes:
        raise DataError("pose length does not match skeleton")
    return ((pose.node_positions - asset.skeleton.nodes) / stats.sigma_p).ravel()


def denormalize_pose(asset: Asset, vec: np.ndarray, stats: NormalizationStats) -> Pose:
    """Exact inverse of `normalize_pose`."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size != 3 * asset.n_nodes:
        raise DataError(f"vector size {vec.size} does not match 3*N_P")
    return Pose(asset.skeleton.nodes + vec.reshape(-1, 3) * stats.sigma_p)


def compute_sigma_p(dataset: list[tuple[Asset, Pose]]) -> NormalizationStats:
    """Mean offset magnitude of any node from rest over the whole dataset.

    Clamped below at 1e-9 so a rest-only dataset still yields usable stats.
    """
    if not dataset:
        raise DataError("empty dataset")
    total, count = 0.0, 0
    for asset, pose in dataset:
        if len(pose) != asset.n_nodes:
            raise DataError("pose length does not match its asset")
        d = np.linalg.norm(pose.node_positions - asset.skeleton.nodes, axis=-1)
        total += float(d.sum())
        count += d.size
    return NormalizationStats(sigma_p=max(total / count, 1e-9))


def edge_lengths(skeleton: Skeleton, pose: Pose) -> np.ndarray:
    """Length of every skeleton edge at the given node positions."""
    p = pose.node_positions
    e = skeleton.edges
    return np.linalg.norm(p[e[:, 0]] - p[e[:, 1]], axis=-1)


def edge_lengths_tensor(skeleton: Skeleton, pose_t: Tensor) -> Tensor:
    e = skeleton.edges
    return ad.safe_norm(pose_t[e[:, 0]] - pose_t[e[:, 1]])
