"""Procedural articulated creatures with known pose distributions, plus the
static-clip and rig-validity filters.

Creatures are bone trees with capsule-ish tube meshes (triangle soup of
closed per-bone tubes, no booleans). Ground-truth poses draw correlated
truncated-Gaussian joint angles and run forward kinematics, so edge lengths
are preserved exactly and the plausible distribution is known by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, truncnorm

from .errors import DataError
from .geometry import Asset, Mesh, Pose, PoseSet, Skeleton, _freeze

RAY_DIR = np.array([1.0, 1e-3, 2e-3])
RAY_EPS = 1e-9

TEMPLATES = ("chain", "quadruped", "biped")


def _norm(v):
    return np.asarray(v, dtype=np.float64) / np.linalg.norm(v)


def _template_bones(template: str, n_bones: int | None):
    """(parent_bone, rest_dir, length, limit, correlation) per bone.

    parent_bone -1 means the bone hangs off the root node at the origin.
    """
    if template == "chain":
        n = n_bones or 3
        if n < 1:
            raise DataError("chain needs at least 1 bone")
        return [(b - 1, np.array([1.0, 0.0, 0.0]), 0.25, 0.6, 0.5) for b in range(n)]
    if template == "quadruped":
        up_l, up_r = _norm([0, 0.25, -1]), _norm([0, -0.25, -1])
        down = np.array([0.0, 0.0, -1.0])
        return [
            (-1, np.array([1.0, 0.0, 0.0]), 0.25, 0.3, 0.0),   # 0 spine
            (0, np.array([1.0, 0.0, 0.0]), 0.25, 0.3, 0.6),    # 1 spine
            (1, np.array([1.0, 0.0, 0.0]), 0.20, 0.3, 0.6),    # 2 spine/chest
            (2, _norm([0.6, 0.0, 0.8]), 0.15, 0.6, 0.4),       # 3 neck
            (3, _norm([1.0, 0.0, 0.2]), 0.12, 0.6, 0.5),       # 4 head
            (-1, _norm([-1.0, 0.0, 0.3]), 0.15, 0.7, 0.0),     # 5 tail
            (5, np.array([-1.0, 0.0, 0.0]), 0.12, 0.7, 0.6),   # 6 tail tip
            (-1, up_l, 0.22, 0.6, 0.0),                        # 7 hind left upper
            (7, down, 0.20, 0.7, 0.5),                         # 8 hind left lower
            (-1, up_r, 0.22, 0.6, 0.0),                        # 9 hind right upper
            (9, down, 0.20, 0.7, 0.5),                         # 10 hind right lower
            (2, up_l, 0.22, 0.6, 0.0),                         # 11 front left upper
            (11, down, 0.20, 0.7, 0.5),                        # 12 front left lower
            (2, up_r, 0.22, 0.6, 0.0),                         # 13 front right upper
            (13, down, 0.20, 0.7, 0.5),                        # 14 front right lower
        ]
    if template == "biped":
        down_l, down_r = _norm([0, 0.2, -1]), _norm([0, -0.2, -1])
        down = np.array([0.0, 0.0, -1.0])
        side_l, side_r = _norm([0, 1.0, -0.2]), _norm([0, -1.0, -0.2])
        return [
            (-1, np.array([0.0, 0.0, 1.0]), 0.25, 0.3, 0.0),   # 0 spine
            (0, np.array([0.0, 0.0, 1.0]), 0.25, 0.3, 0.6),    # 1 spine
            (1, np.array([0.0, 0.0, 1.0]), 0.15, 0.5, 0.4),    # 2 head
            (-1, down_l, 0.30, 0.6, 0.0),                      # 3 left thigh
            (3, down, 0.30, 0.7, 0.5),                         # 4 left shin
            (-1, down_r, 0.30, 0.6, 0.0),                      # 5 right thigh
            (5, down, 0.30, 0.7, 0.5),                         # 6 right shin
            (1, side_l, 0.25, 0.8, 0.0),                       # 7 left upper arm
            (7, side_l, 0.25, 0.8, 0.5),                       # 8 left forearm
            (1, side_r, 0.25, 0.8, 0.0),                       # 9 right upper arm
            (9, side_r, 0.25, 0.8, 0.5),                       # 10 right forearm
        ]
    raise DataError(f"unknown template {template!r}")


@dataclass(frozen=True)
class CreatureSpec:
    template: str
    n_bones: int | None = None                 # chain only
    bone_lengths: tuple | None = None          # per bone, overrides template
    angle_limits: tuple | None = None          # per bone (lo, hi) radians
    correlations: tuple | None = None          # per bone, vs parent joint
    tube_radius: float = 0.06
    length_jitter: float = 0.1                 # seeded +-fraction on lengths
    dir_jitter: float = 0.1                    # seeded perturbation of rest dirs

    def resolve(self):
        bones = _template_bones(self.template, self.n_bones)
        nb = len(bones)
        parents = np.array([b[0] for b in bones], dtype=np.int64)
        dirs = np.stack([b[1] for b in bones])
        lengths = np.array([b[2] for b in bones])
        limits = np.stack([(-b[3], b[3]) for b in bones])
        corrs = np.array([b[4] for b in bones])
        if self.bone_lengths is not None:
            lengths = np.asarray(self.bone_lengths, dtype=np.float64)
            if lengths.shape != (nb,):
                raise DataError(f"bone_lengths must have {nb} entries")
        if self.angle_limits is not None:
            limits = np.asarray(self.angle_limits, dtype=np.float64).reshape(nb, 2)
        if self.correlations is not None:
            corrs = np.asarray(self.correlations, dtype=np.float64)
            if corrs.shape != (nb,):
                raise DataError(f"correlations must have {nb} entries")
        if np.any(lengths <= 0):
            raise DataError("bone lengths must be positive")
        if np.any(limits[:, 0] > limits[:, 1]):
            raise DataError("angle limits must be non-empty intervals")
        if np.any(np.abs(corrs) > 1):
            raise DataError("correlations must lie in [-1, 1]")
        if self.tube_radius <= 0:
            raise DataError("tube_radius must be positive")
        return parents, dirs, lengths, limits, corrs


@dataclass(frozen=True)
class GTPoseSampler:
    """Handle returned by gen_creature; samples plausible poses for its asset."""

    asset_name: str
    parent_bone: np.ndarray
    rest_dirs: np.ndarray
    lengths: np.ndarray
    limits: np.ndarray
    correlations: np.ndarray
    center: np.ndarray
    scale: float

    @property
    def n_bones(self) -> int:
        return self.parent_bone.size

    def scaled(self, factor: float) -> "GTPoseSampler":
        """Same creature with all joint limits scaled by `factor` (e.g. to
        draw small-offset poses for fitting tests)."""
        return GTPoseSampler(asset_name=self.asset_name, parent_bone=self.parent_bone,
                             rest_dirs=self.rest_dirs, lengths=self.lengths,
                             limits=self.limits * factor, correlations=self.correlations,
                             center=self.center, scale=self.scale)

    def node_positions(self, angles: np.ndarray) -> np.ndarray:
        """Forward kinematics for joint angles (K, n_bones, 2) -> (K, N_P, 3)
        in normalized asset units."""
        angles = np.asarray(angles, dtype=np.float64)
        k, nb = angles.shape[0], self.n_bones
        pos = np.zeros((k, nb + 1, 3))
        frames = np.zeros((k, nb, 3, 3))
        for b in range(nb):
            ry = _rot_y(angles[:, b, 0])
            rz = _rot_z(angles[:, b, 1])
            local = ry @ rz
            pb = self.parent_bone[b]
            frames[:, b] = local if pb < 0 else frames[:, pb] @ local
            start = pos[:, 0] if pb < 0 else pos[:, pb + 1]
            pos[:, b + 1] = start + self.lengths[b] * (frames[:, b] @ self.rest_dirs[b])
        return (pos - self.center) / self.scale


def _rot_y(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(theta.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 2] = s
    out[..., 1, 1] = 1.0
    out[..., 2, 0] = -s
    out[..., 2, 2] = c
    return out


def _rot_z(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(theta.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def _tube(start, end, radius, n_radial=8, n_axial=4):
    """Closed tube around a segment: rings + cap fans. Returns (verts, faces, axial_t)."""
    axis = end - start
    length = np.linalg.norm(axis)
    axis = axis / length
    helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = _norm(np.cross(axis, helper))
    v = np.cross(axis, u)
    verts, ts = [], []
    for ring in range(n_axial + 1):
        t = ring / n_axial
        c = start + t * length * axis
        for j in range(n_radial):
            phi = 2.0 * np.pi * j / n_radial
            verts.append(c + radius * (np.cos(phi) * u + np.sin(phi) * v))
            ts.append(t)
    verts.append(start.copy())
    ts.append(0.0)
    verts.append(end.copy())
    ts.append(1.0)
    i_start, i_end = len(verts) - 2, len(verts) - 1
    faces = []
    for ring in range(n_axial):
        for j in range(n_radial):
            a = ring * n_radial + j
            b = ring * n_radial + (j + 1) % n_radial
            c = a + n_radial
            d = b + n_radial
            faces.append([a, b, d])
            faces.append([a, d, c])
    for j in range(n_radial):  # caps
        faces.append([i_start, (j + 1) % n_radial, j])
        base = n_axial * n_radial
        faces.append([i_end, base + j, base + (j + 1) % n_radial])
    return np.asarray(verts), np.asarray(faces, dtype=np.int64), np.asarray(ts)


def gen_creature(spec: CreatureSpec, seed: int) -> tuple[Asset, GTPoseSampler]:
    """Build a creature asset plus the sampler for its ground-truth poses.

    The seed jitters bone lengths and rest directions, giving distinct rig
    candidates for the same spec.
    """
    parents, dirs, lengths, limits, corrs = spec.resolve()
    rng = np.random.default_rng(seed)
    nb = parents.size
    lengths = lengths * (1.0 + spec.length_jitter * (2.0 * rng.random(nb) - 1.0))
    if spec.dir_jitter > 0:
        dirs = dirs + spec.dir_jitter * rng.standard_normal((nb, 3))
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)

    nodes = np.zeros((nb + 1, 3))
    for b in range(nb):
        start = nodes[0] if parents[b] < 0 else nodes[parents[b] + 1]
        nodes[b + 1] = start + lengths[b] * dirs[b]
    edges = np.array([[0 if parents[b] < 0 else parents[b] + 1, b + 1] for b in range(nb)],
                     dtype=np.int64)

    all_verts, all_faces, owners = [], [], []
    offset = 0
    for b in range(nb):
        s, e = nodes[edges[b, 0]], nodes[edges[b, 1]]
        verts, faces, ts = _tube(s, e, spec.tube_radius)
        all_verts.append(verts)
        all_faces.append(faces + offset)
        owners.append(np.stack([np.full(ts.size, edges[b, 0]),
                                np.full(ts.size, edges[b, 1]), ts]))
        offset += verts.shape[0]
    verts = np.concatenate(all_verts)
    faces = np.concatenate(all_faces)
    own = np.concatenate(owners, axis=1)  # rows: proximal node, distal node, t

    weights = np.zeros((nb + 1, verts.shape[0]))
    cols = np.arange(verts.shape[0])
    np.add.at(weights, (own[0].astype(int), cols), 1.0 - own[2])
    np.add.at(weights, (own[1].astype(int), cols), own[2])

    lo, hi = verts.min(0), verts.max(0)
    center = (lo + hi) / 2.0
    scale = float(np.linalg.norm(hi - lo))
    name = f"{spec.template}_{seed}"
    asset = Asset(
        mesh=Mesh((verts - center) / scale, faces),
        skeleton=Skeleton((nodes - center) / scale, edges, weights),
        name=name,
    )
    sampler = GTPoseSampler(asset_name=name, parent_bone=_freeze(parents),
                            rest_dirs=_freeze(dirs), lengths=_freeze(lengths),
                            limits=_freeze(limits), correlations=_freeze(corrs),
                            center=_freeze(center), scale=scale)
    return asset, sampler


def sample_gt_angles(handle: GTPoseSampler, n: int, seed: int) -> np.ndarray:
    """Joint angles (n, n_bones, 2): correlated Gaussian copula, truncated
    exactly to the per-joint limits."""
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.default_rng(seed)
    nb = handle.n_bones
    g = np.empty((n, nb, 2))
    for b in range(nb):
        fresh = rng.standard_normal((n, 2))
        pb = handle.parent_bone[b]
        if pb < 0:
            g[:, b] = fresh
        else:
            c = handle.correlations[b]
            g[:, b] = c * g[:, pb] + np.sqrt(max(0.0, 1.0 - c * c)) * fresh
    lo = handle.limits[:, 0][None, :, None]
    hi = handle.limits[:, 1][None, :, None]
    width = hi - lo
    return np.where(
        width < 1e-15,
        lo,
        truncnorm.ppf(norm.cdf(g), -2.0, 2.0, loc=(lo + hi) / 2.0,
                      scale=np.maximum(width / 4.0, 1e-300)),
    )


def sample_gt_poses(handle: GTPoseSampler, n: int, seed: int) -> PoseSet:
    """Draw n plausible poses: correlated truncated joint angles run through
    forward kinematics (edge lengths preserved exactly)."""
    positions = handle.node_positions(sample_gt_angles(handle, n, seed))
    return PoseSet(asset_name=handle.asset_name,
                   poses=tuple(Pose(p) for p in positions),
                   tags=tuple("gt" for _ in range(n)))


# --------------------------------------------------------------------------
# static-clip filter
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ClipStats:
    rms_displacements: np.ndarray     # per frame, relative to frame 0
    fraction_below_threshold: float

    def __post_init__(self):
        d = np.asarray(self.rms_displacements, dtype=np.float64)
        if np.any(d < 0) or not 0.0 <= self.fraction_below_threshold <= 1.0:
            raise DataError("invalid clip stats")
        object.__setattr__(self, "rms_displacements", _freeze(d))


def filter_static(clip, asset: Asset, threshold: float = 0.0015,
                  frame_fraction: float = 0.9) -> tuple[bool, ClipStats]:
    """Static-clip test: a clip is excluded when at least `frame_fraction` of
    its frames have RMS joint displacement (vs. frame 0, normalized by the
    mesh bbox diagonal) below `threshold`. Returns (keep, stats)."""
    frames = [p.node_positions for p in clip]
    if not frames:
        raise DataError("empty clip")
    diag = asset.mesh.bbox_diagonal()
    base = frames[0]
    rms = np.array([
        float(np.sqrt(np.mean(np.sum((f - base) ** 2, axis=-1)))) / diag for f in frames
    ])
    frac = float(np.mean(rms < threshold))
    keep = frac < frame_fraction
    return keep, ClipStats(rms_displacements=rms, fraction_below_threshold=frac)


# --------------------------------------------------------------------------
# rig filter: containment + surface distance
# --------------------------------------------------------------------------


def mesh_is_closed(mesh: Mesh) -> bool:
    """Every undirected edge used by exactly two faces."""
    edges: dict[tuple[int, int], int] = {}
    for a, b, c in mesh.faces:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            edges[key] = edges.get(key, 0) + 1
    return bool(edges) and all(n == 2 for n in edges.values())


def _ray_parity(origin: np.ndarray, verts: np.ndarray, faces: np.ndarray) -> bool:
    """Point-in-mesh by crossing parity along RAY_DIR, retrying with a tiny
    origin perturbation when a hit grazes a triangle boundary."""
    v0 = verts[faces[:, 0]]
    e1 = verts[faces[:, 1]] - v0
    e2 = verts[faces[:, 2]] - v0
    h = np.cross(RAY_DIR, e2)
    a = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(a) > 1e-12
    for attempt in range(12):
        o = origin + (RAY_EPS * 10.0**attempt) * np.array([0.0, 1.0, -0.7]) * (attempt > 0)
        s = o - v0
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.einsum("ij,ij->i", s, h) / a
            q = np.cross(s, e1)
            v = np.dot(q, RAY_DIR) / a
            t = np.einsum("ij,ij->i", e2, q) / a
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
        margin = np.minimum.reduce([u, v, 1.0 - u - v])
        grazing = ok & (t > -1e-9) & (u > -1e-9) & (v > -1e-9) & (u + v < 1 + 1e-9) \
            & ((np.abs(margin) < 1e-9) | (np.abs(t) < 1e-9))
        if not np.any(grazing):
            return bool(np.count_nonzero(hit) % 2 == 1)
    return bool(np.count_nonzero(hit) % 2 == 1)  # best effort after retries


def point_triangle_distance(points: np.ndarray, verts: np.ndarray,
                            faces: np.ndarray) -> np.ndarray:
    """Min distance from each point to the triangle soup (exact, vectorized
    over faces per point)."""
    a = verts[faces[:, 0]]
    b = verts[faces[:, 1]]
    c = verts[faces[:, 2]]
    ab = b - a
    ac = c - a
    out = np.empty(points.shape[0])
    for i, p in enumerate(np.atleast_2d(points)):
        ap = p - a
        d1 = np.einsum("ij,ij->i", ab, ap)
        d2 = np.einsum("ij,ij->i", ac, ap)
        bp = p - b
        d3 = np.einsum("ij,ij->i", ab, bp)
        d4 = np.einsum("ij,ij->i", ac, bp)
        cp = p - c
        d5 = np.einsum("ij,ij->i", ab, cp)
        d6 = np.einsum("ij,ij->i", ac, cp)

        closest = np.empty_like(a)
        # vertex regions
        m_a = (d1 <= 0) & (d2 <= 0)
        m_b = (d3 >= 0) & (d4 <= d3)
        m_c = (d6 >= 0) & (d5 <= d6)
        closest[m_a] = a[m_a]
        closest[m_b] = b[m_b]
        closest[m_c] = c[m_c]
        done = m_a | m_b | m_c
        # edge AB
        vc = d1 * d4 - d3 * d2
        m_ab = ~done & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
        closest[m_ab] = a[m_ab] + t_ab[m_ab, None] * ab[m_ab]
        done |= m_ab
        # edge AC
        vb = d5 * d2 - d1 * d6
        m_ac = ~done & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
        closest[m_ac] = a[m_ac] + t_ac[m_ac, None] * ac[m_ac]
        done |= m_ac
        # edge BC
        va = d3 * d6 - d5 * d4
        m_bc = ~done & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        denom_bc = (d4 - d3) + (d5 - d6)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_bc = np.where(denom_bc != 0, (d4 - d3) / denom_bc, 0.0)
        closest[m_bc] = b[m_bc] + t_bc[m_bc, None] * (c[m_bc] - b[m_bc])
        done |= m_bc
        # interior
        m_in = ~done
        denom = va + vb + vc
        with np.errstate(divide="ignore", invalid="ignore"):
            v_bar = np.where(denom != 0, vb / denom, 0.0)
            w_bar = np.where(denom != 0, vc / denom, 0.0)
        closest[m_in] = a[m_in] + v_bar[m_in, None] * ab[m_in] + w_bar[m_in, None] * ac[m_in]

        out[i] = np.sqrt(np.min(np.sum((p - closest) ** 2, axis=-1)))
    return out


@dataclass(frozen=True)
class BoneReport:
    fraction_outside: float
    max_surface_distance: float
    valid: bool


@dataclass(frozen=True)
class RigReport:
    bones: tuple
    acyclic: bool
    accepted: bool
    seed_index: int
    open_mesh: bool

    def __post_init__(self):
        if self.accepted and not (self.acyclic and all(b.valid for b in self.bones)):
            raise DataError("accepted rig must be acyclic with all bones valid")

    @property
    def n_valid(self) -> int:
        return sum(1 for b in self.bones if b.valid)

    def mean_outside(self) -> float:
        if not self.bones:
            return 0.0
        return float(np.mean([b.fraction_outside for b in self.bones]))


def filter_rig(asset: Asset, outside_fraction_max: float = 0.5,
               surface_dist_max: float = 0.1, samples_per_bone: int = 32,
               seed_index: int = 0) -> RigReport:
    """Evaluate one rig: sample points along each bone segment; a bone is
    invalid when its outside fraction reaches `outside_fraction_max` or any
    sample is farther than `surface_dist_max` from the mesh surface."""
    mesh = asset.mesh
    skel = asset.skeleton
    closed = mesh_is_closed(mesh)
    reports = []
    for p_idx, c_idx in skel.edges:
        a, b = skel.nodes[p_idx], skel.nodes[c_idx]
        if np.linalg.norm(b - a) < 1e-9:
            pts = np.array([a])  # degenerate bone: one sample at the node
        else:
            ts = (np.arange(samples_per_bone) + 0.5) / samples_per_bone
            pts = a[None, :] + ts[:, None] * (b - a)[None, :]
        inside = np.array([_ray_parity(p, mesh.vertices, mesh.faces) for p in pts])
        frac_out = float(np.mean(~inside))
        max_dist = float(point_triangle_distance(pts, mesh.vertices, mesh.faces).max())
        valid = not (frac_out >= outside_fraction_max or max_dist > surface_dist_max)
        reports.append(BoneReport(frac_out, max_dist, valid))
    acyclic = True  # Skeleton construction already rejects cycles
    accepted = acyclic and all(r.valid for r in reports)
    return RigReport(bones=tuple(reports), acyclic=acyclic, accepted=accepted,
                     seed_index=seed_index, open_mesh=not closed)


def select_rig(make_candidate, n_seeds: int = 10, **thresholds):
    """Try up to n_seeds rig candidates (make_candidate(seed_index) -> Asset);
    keep the first accepted one, else the best-scoring (most valid bones,
    ties by lower mean outside fraction)."""
    best = None
    for k in range(n_seeds):
        asset = make_candidate(k)
        report = filter_rig(asset, seed_index=k, **thresholds)
        if report.accepted:
            return asset, report
        score = (report.n_valid, -report.mean_outside())
        if best is None or score > best[0]:
            best = (score, asset, report)
    return best[1], best[2]
