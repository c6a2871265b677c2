"""Sample the learned pose space and score it against held-out poses.

Run 02_train_pose_space.py first (expects demo_model.ckpt in the working
directory).
"""

import numpy as np

from posespace import (
    CreatureSpec,
    DiffusionSchedule,
    aggregate_node_features,
    fsd,
    gen_creature,
    load_checkpoint,
    o_nn,
    synth_features,
)
from posespace.datagen import sample_gt_poses
from posespace.diffusion import sample_set
from posespace.geometry import edge_lengths

model = load_checkpoint("demo_model.ckpt")
asset, handle = gen_creature(CreatureSpec(template="quadruped"), seed=0)
feats = aggregate_node_features(asset, synth_features(asset, model.config.n_f, seed=1))
schedule = DiffusionSchedule.linear()

samples = sample_set(model, asset, feats, schedule, steps=100, seed=42, n=200)
heldout = sample_gt_poses(handle, 200, seed=77)
half_a = sample_gt_poses(handle, 200, seed=78)
half_b = sample_gt_poses(handle, 200, seed=79)

rest_lens = edge_lengths(asset.skeleton, asset.rest_pose())
dev = np.mean([np.abs(edge_lengths(asset.skeleton, p) - rest_lens).mean()
               for p in samples])
print(f"mean edge-length deviation of samples: {dev:.4f} (ground truth: 0 by construction)")

stats = model.stats
print(f"FSD(samples, held-out ground truth) = {fsd(samples, heldout, asset, stats):.3f}")
print(f"FSD(gt half A,  gt half B)          = {fsd(half_a, half_b, asset, stats):.3f}")
print(f"O_NN(samples vs ground truth)       = {o_nn(samples, heldout, asset, stats):.3f}"
      "  (<= 1 means no overfitting)")
