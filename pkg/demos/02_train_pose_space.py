"""Train a small pose diffusion model on one creature's pose distribution.

Desk-scale config so the whole script runs in a couple of minutes; writes a
checkpoint that the later demos reuse.
"""

import time

from posespace import (
    CreatureSpec,
    DenoiserConfig,
    DiffusionSchedule,
    aggregate_node_features,
    gen_creature,
    init_params,
    save_checkpoint,
    synth_features,
    train,
)
from posespace.datagen import sample_gt_poses

asset, handle = gen_creature(CreatureSpec(template="quadruped"), seed=0)
feats = aggregate_node_features(asset, synth_features(asset, 32, seed=1))
poses = sample_gt_poses(handle, 800, seed=10)
print(f"training on {len(poses)} poses of {asset.name}")

config = DenoiserConfig(n_f=32, d_model=32, n_heads=4, n_layers=2, d_ff=64)
schedule = DiffusionSchedule.linear()
dataset = [(asset, feats, p) for p in poses]

t0 = time.time()
model, curve = train(init_params(config, seed=0), dataset, schedule,
                     epochs=120, batch=100, lr=3e-3, seed=0, weighting="epsilon",
                     log=lambda e, l: print(f"  epoch {e:3d}: probe loss {l:.4f}")
                     if e % 20 == 0 else None)
print(f"trained in {time.time() - t0:.0f}s; probe loss {curve[0]:.4f} -> {curve[-1]:.4f}")
print(f"sigma_p = {model.stats.sigma_p:.5f}")

save_checkpoint(model, "demo_model.ckpt")
print("checkpoint written to demo_model.ckpt")
