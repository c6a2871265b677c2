import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posespace.errors import DataError
from posespace.geometry import (
    Asset,
    Mesh,
    Pose,
    NormalizationStats,
    Skeleton,
    compute_sigma_p,
    deform,
    denormalize_pose,
    edge_lengths,
    load_asset,
    load_poses,
    normalize_pose,
    save_asset,
    save_poses,
    PoseSet,
)
from posespace.jsonio import save_json

from conftest import two_node_asset_doc


@pytest.fixture()
def two_node_asset(tmp_path):
    path = tmp_path / "mini.asset.json"
    save_json(str(path), two_node_asset_doc())
    return load_asset(str(path))


# ---- loading -------------------------------------------------------------


def test_load_minimal_asset(two_node_asset):
    asset = two_node_asset
    assert asset.n_nodes == 2
    assert asset.n_vertices == 4
    assert abs(asset.mesh.bbox_diagonal() - 1.0) < 1e-9


def test_load_rescales_by_bbox_diagonal(tmp_path):
    doc = two_node_asset_doc()
    # stretch so the raw bbox diagonal is exactly 2
    raw = np.asarray(doc["mesh"]["vertices"])
    diag = np.linalg.norm(raw.max(0) - raw.min(0))
    doc["mesh"]["vertices"] = (raw * (2.0 / diag)).tolist()
    doc["skeleton"]["nodes"] = (np.asarray(doc["skeleton"]["nodes"]) * (2.0 / diag)).tolist()
    path = tmp_path / "big.asset.json"
    save_json(str(path), doc)
    asset = load_asset(str(path))
    # all coordinates halved (up to the recentering translation)
    lo, hi = asset.mesh.vertices.min(0), asset.mesh.vertices.max(0)
    assert abs(np.linalg.norm(hi - lo) - 1.0) < 1e-12
    np.testing.assert_allclose((lo + hi) / 2.0, 0.0, atol=1e-15)


def test_load_renormalizes_weight_columns(tmp_path):
    doc = two_node_asset_doc()
    # vertex 2 column sums to 0.5 with weights (0.3, 0.2)
    doc["skeleton"]["weights"] = [[0, 0, 1.0], [1, 1, 1.0], [0, 2, 0.3], [1, 2, 0.2],
                                  [0, 3, 0.5], [1, 3, 0.5]]
    path = tmp_path / "half.asset.json"
    save_json(str(path), doc)
    asset = load_asset(str(path))
    np.testing.assert_allclose(asset.skeleton.weights[:, 2], [0.6, 0.4], atol=1e-15)


def test_load_assigns_zero_weight_vertex_to_nearest_node(tmp_path):
    doc = two_node_asset_doc()
    doc["skeleton"]["weights"] = [[0, 0, 1.0], [1, 1, 1.0], [0, 2, 0.5], [1, 2, 0.5]]
    # vertex 3 has no weights; nearest node is node 0 at (0,0,0)? it sits at (0.5,-0.2,0)
    doc["mesh"]["vertices"][3] = [0.1, 0.0, 0.0]
    path = tmp_path / "dead.asset.json"
    save_json(str(path), doc)
    asset = load_asset(str(path))
    np.testing.assert_allclose(asset.skeleton.weights[:, 3], [1.0, 0.0])


def test_save_load_save_is_byte_identical(tmp_path, two_node_asset):
    p1 = tmp_path / "a1.asset.json"
    p2 = tmp_path / "a2.asset.json"
    save_asset(two_node_asset, str(p1))
    again = load_asset(str(p1))
    save_asset(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(DataError):
        load_asset(str(path))
    missing = tmp_path / "nope.json"
    with pytest.raises(DataError):
        load_asset(str(missing))


def test_invalid_skeletons_rejected():
    nodes = np.zeros((3, 3))
    w = np.full((3, 4), 1 / 3)
    with pytest.raises(DataError):  # cycle
        Skeleton(nodes, np.array([[0, 1], [1, 2], [2, 0]]), w)
    with pytest.raises(DataError):  # multiple parents
        Skeleton(nodes, np.array([[0, 2], [1, 2]]), w)
    with pytest.raises(DataError):  # index out of range
        Skeleton(nodes, np.array([[0, 5]]), w)
    with pytest.raises(DataError):  # bad column sums
        Skeleton(nodes, np.array([[0, 1]]), np.full((3, 4), 0.5))


def test_zero_extent_mesh_rejected(tmp_path):
    doc = two_node_asset_doc()
    doc["mesh"]["vertices"] = [[1.0, 1.0, 1.0]] * 4
    path = tmp_path / "flat.asset.json"
    save_json(str(path), doc)
    with pytest.raises(DataError):
        load_asset(str(path))


def test_face_index_out_of_range():
    with pytest.raises(DataError):
        Mesh(np.zeros((3, 3)), np.array([[0, 1, 7]]))


# ---- deformation ----------------------------------------------------------


def test_identity_pose_reproduces_rest(quadruped_asset):
    asset, _ = quadruped_asset
    out = deform(asset, asset.rest_pose())
    np.testing.assert_allclose(out.vertices, asset.mesh.vertices, atol=1e-12)
    np.testing.assert_array_equal(out.faces, asset.mesh.faces)


def test_translation_equivariance(quadruped_asset):
    asset, _ = quadruped_asset
    t = np.array([0.21, -0.4, 0.13])
    base = deform(asset, asset.rest_pose()).vertices
    moved = deform(asset, Pose(asset.skeleton.nodes + t)).vertices
    np.testing.assert_allclose(moved, base + t, atol=1e-12)


def test_two_bone_rotation_matches_closed_form(tmp_path):
    # one vertex glued to the child node; rotate the bone 90 degrees about z
    doc = two_node_asset_doc()
    doc["mesh"]["vertices"] = [[1.0, 0.1, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                               [0.5, 0.0, 0.5]]
    doc["skeleton"]["weights"] = [[1, 0, 1.0], [0, 1, 1.0], [1, 2, 1.0],
                                  [0, 3, 0.5], [1, 3, 0.5]]
    path = tmp_path / "rot.asset.json"
    save_json(str(path), doc)
    asset = load_asset(str(path))
    # undo normalization bookkeeping: work in normalized units throughout
    nodes = asset.skeleton.nodes
    scale = np.linalg.norm(nodes[1] - nodes[0])
    posed = np.stack([nodes[0], nodes[0] + scale * np.array([0.0, 1.0, 0.0])])
    out = deform(asset, Pose(posed))

    # independent closed-form oracle: vertex 0 is 100% child; child's bone
    # direction rotates from -x to -y, a +90 degree rotation about z
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    v = asset.mesh.vertices[0]
    expected = rot @ (v - nodes[1]) + posed[1]
    np.testing.assert_allclose(out.vertices[0], expected, atol=1e-9)


def test_deform_linear_in_weights(tmp_path):
    # 50/50 vertex equals midpoint of the two single-node deformations
    doc = two_node_asset_doc()
    path = tmp_path / "blend.asset.json"
    save_json(str(path), doc)
    asset = load_asset(str(path))
    rng = np.random.default_rng(5)
    posed = Pose(asset.skeleton.nodes + 0.1 * rng.standard_normal((2, 3)))

    def with_weights(w2):
        doc2 = two_node_asset_doc()
        doc2["skeleton"]["weights"] = [[0, 0, 1.0], [1, 1, 1.0],
                                       [0, 2, w2[0]], [1, 2, w2[1]],
                                       [0, 3, 0.5], [1, 3, 0.5]]
        p = path.parent / f"blend_{w2[0]}.asset.json"
        save_json(str(p), doc2)
        return deform(load_asset(str(p)), posed).vertices[2]

    mid = with_weights((0.5, 0.5))
    only0 = with_weights((1.0, 0.0))
    only1 = with_weights((0.0, 1.0))
    np.testing.assert_allclose(mid, (only0 + only1) / 2.0, atol=1e-12)


def test_deform_rejects_mismatched_pose(quadruped_asset):
    asset, _ = quadruped_asset
    with pytest.raises(DataError):
        deform(asset, Pose(np.zeros((3, 3))))


# ---- normalization ---------------------------------------------------------


def test_normalize_rest_is_zero(quadruped_asset):
    asset, _ = quadruped_asset
    stats = NormalizationStats(0.37)
    vec = normalize_pose(asset, asset.rest_pose(), stats)
    np.testing.assert_array_equal(vec, np.zeros(3 * asset.n_nodes))


def test_normalize_scales_offsets(two_node_asset):
    asset = two_node_asset
    stats = NormalizationStats(2.0)
    posed = asset.skeleton.nodes.copy()
    posed[1] = posed[1] + np.array([1.0, 0.0, 0.0])
    vec = normalize_pose(asset, Pose(posed), stats)
    np.testing.assert_allclose(vec, [0, 0, 0, 0.5, 0, 0])


def test_normalize_round_trip(quadruped_asset):
    asset, _ = quadruped_asset
    stats = NormalizationStats(0.123)
    rng = np.random.default_rng(0)
    for _ in range(100):
        pose = Pose(asset.skeleton.nodes + rng.standard_normal((asset.n_nodes, 3)))
        back = denormalize_pose(asset, normalize_pose(asset, pose, stats), stats)
        np.testing.assert_allclose(back.node_positions, pose.node_positions, atol=1e-12)


def test_sigma_p_clamped_for_rest_only(quadruped_asset):
    asset, _ = quadruped_asset
    stats = compute_sigma_p([(asset, asset.rest_pose())] * 3)
    assert stats.sigma_p == 1e-9


def test_sigma_p_two_offsets(two_node_asset):
    asset = two_node_asset
    posed = asset.skeleton.nodes + np.array([[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
    stats = compute_sigma_p([(asset, Pose(posed))])
    assert abs(stats.sigma_p - 2.0) < 1e-15


def test_sigma_p_matches_brute_force(quadruped_asset):
    asset, _ = quadruped_asset
    rng = np.random.default_rng(1)
    dataset = [(asset, Pose(asset.skeleton.nodes + 0.2 * rng.standard_normal((asset.n_nodes, 3))))
               for _ in range(7)]
    total, count = 0.0, 0
    for a, p in dataset:
        for i in range(a.n_nodes):
            total += np.linalg.norm(p.node_positions[i] - a.skeleton.nodes[i])
            count += 1
    stats = compute_sigma_p(dataset)
    assert abs(stats.sigma_p - total / count) < 1e-12


def test_compute_sigma_p_empty():
    with pytest.raises(DataError):
        compute_sigma_p([])


# ---- edge lengths -----------------------------------------------------------


def test_edge_lengths_unit_bone(two_node_asset):
    asset = two_node_asset
    lens = edge_lengths(asset.skeleton, asset.rest_pose())
    # the loaded asset is normalized; rest bone length equals node distance
    expected = np.linalg.norm(asset.skeleton.nodes[1] - asset.skeleton.nodes[0])
    np.testing.assert_allclose(lens, [expected])


def test_edge_lengths_homogeneous(quadruped_asset):
    asset, _ = quadruped_asset
    rest = asset.rest_pose()
    doubled = Pose(rest.node_positions * 2.0)
    np.testing.assert_allclose(edge_lengths(asset.skeleton, doubled),
                               2.0 * edge_lengths(asset.skeleton, rest), atol=1e-12)


def test_edge_lengths_match_direct(quadruped_asset):
    asset, _ = quadruped_asset
    rng = np.random.default_rng(2)
    pose = Pose(asset.skeleton.nodes + rng.standard_normal((asset.n_nodes, 3)))
    got = edge_lengths(asset.skeleton, pose)
    for k, (a, b) in enumerate(asset.skeleton.edges):
        direct = np.linalg.norm(pose.node_positions[a] - pose.node_positions[b])
        assert abs(got[k] - direct) < 1e-12


# ---- pose sets ---------------------------------------------------------------


def test_pose_set_round_trip(tmp_path, quadruped_asset):
    asset, handle = quadruped_asset
    from posespace.datagen import sample_gt_poses

    ps = sample_gt_poses(handle, 4, seed=9)
    path = tmp_path / "set.poses.json"
    save_poses(ps, str(path))
    back = load_poses(str(path))
    assert back.asset_name == ps.asset_name
    assert back.tags == ps.tags
    np.testing.assert_array_equal(back.as_array(), ps.as_array())


def test_pose_set_tag_length_mismatch():
    with pytest.raises(DataError):
        PoseSet(asset_name="x", poses=(Pose(np.zeros((2, 3))),), tags=("a", "b"))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3))
def test_translation_equivariance_property(quadruped_asset, t):
    asset, _ = quadruped_asset
    t = np.asarray(t)
    base = deform(asset, asset.rest_pose()).vertices
    moved = deform(asset, Pose(asset.skeleton.nodes + t)).vertices
    np.testing.assert_allclose(moved, base + t, atol=1e-12)
