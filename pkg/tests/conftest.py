import numpy as np
import pytest

from posespace.datagen import CreatureSpec, gen_creature, sample_gt_poses
from posespace.features import aggregate_node_features, synth_features
from posespace.geometry import Asset, Pose


@pytest.fixture(scope="session")
def chain_asset():
    asset, handle = gen_creature(CreatureSpec(template="chain", n_bones=4), seed=3)
    return asset, handle


@pytest.fixture(scope="session")
def quadruped_asset():
    asset, handle = gen_creature(CreatureSpec(template="quadruped"), seed=0)
    return asset, handle


@pytest.fixture(scope="session")
def quadruped_feats(quadruped_asset):
    asset, _ = quadruped_asset
    return aggregate_node_features(asset, synth_features(asset, 16, seed=1))


def small_fk_pose(asset: Asset, handle, seed: int, max_offset: float = 0.05) -> Pose:
    """Edge-preserving pose with every node offset below max_offset."""
    factor = 1.0
    for _ in range(30):
        pose = sample_gt_poses(handle.scaled(factor), 1, seed)[0]
        off = np.linalg.norm(pose.node_positions - asset.skeleton.nodes, axis=-1).max()
        if off <= max_offset:
            return pose
        factor *= 0.7
    raise AssertionError("could not build a small pose")


def two_node_asset_doc():
    """Minimal hand-written asset document: one unit bone, 4 vertices."""
    return {
        "mesh": {
            "vertices": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.2, 0.0], [0.5, -0.2, 0.0]],
            "faces": [[0, 2, 1], [0, 1, 3]],
        },
        "skeleton": {
            "nodes": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            "edges": [[0, 1]],
            "weights": [[0, 0, 1.0], [1, 1, 1.0], [0, 2, 0.5], [1, 2, 0.5],
                        [0, 3, 0.5], [1, 3, 0.5]],
        },
    }
