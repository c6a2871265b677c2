"""Data-quality filters and spectral ranking from pairwise comparisons."""

import numpy as np

from posespace import CreatureSpec, filter_rig, filter_static, gen_creature, lsr
from posespace.datagen import sample_gt_poses, select_rig
from posespace.geometry import Pose

asset, handle = gen_creature(CreatureSpec(template="quadruped"), seed=0)

# static-clip filter: a frozen clip is excluded, a moving one kept
frozen = [asset.rest_pose()] * 12
keep, stats = filter_static(frozen, asset)
print(f"frozen clip: keep={keep} (fraction below threshold {stats.fraction_below_threshold:.2f})")

moving = list(sample_gt_poses(handle, 12, seed=3))
keep, stats = filter_static(moving, asset)
print(f"moving clip: keep={keep} (fraction below threshold {stats.fraction_below_threshold:.2f})")

# rig filter: sweep tube radii; skinny tubes hug the bones, fat ones drift
# past the surface-distance threshold
for radius in (0.03, 0.06, 0.12):
    a, _ = gen_creature(CreatureSpec(template="chain", n_bones=3, tube_radius=radius),
                        seed=1)
    report = filter_rig(a)
    worst = max(b.max_surface_distance for b in report.bones)
    print(f"chain with tube radius {radius}: accepted={report.accepted} "
          f"(max surface distance {worst:.3f})")

# retry harness: first acceptable of up to 10 seeded candidates
chosen, report = select_rig(
    lambda k: gen_creature(CreatureSpec(template="quadruped"), seed=100 + k)[0],
    n_seeds=10)
print(f"rig retry harness: kept seed_index={report.seed_index}, accepted={report.accepted}")

# spectral ranking from a small pairwise study: A beats B 3:1, B beats C 3:1
counts = np.array([
    [0, 3, 4],
    [1, 0, 3],
    [0, 1, 0],
])
scores = lsr(counts)
print("pairwise comparison scores:", np.round(scores, 3), "(higher is better)")
