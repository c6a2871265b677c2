"""posespace: a pose-space engine for rigged meshes.

Skinning and pose fitting, a pose diffusion model over skeleton node
positions with topology-aware attention, constrained/guided sampling and
latent-space editing operators, distribution metrics, and a procedural
creature generator for self-contained experiments.
"""

__version__ = "0.1.0"

from .geometry import (
    Asset,
    Mesh,
    NormalizationStats,
    Pose,
    PoseSet,
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
)
from .features import (
    NodeFeatures,
    VertexFeatures,
    aggregate_node_features,
    load_features,
    save_features,
    synth_features,
)
from .fit import FitConfig, FitResult, fit_pose, fit_sequence, loss_edge, loss_recon
from .denoiser import (
    DenoiserConfig,
    DenoiserModel,
    GraphDistances,
    encode_tokens,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .denoiser import backward as denoiser_backward
from .diffusion import (
    ConstraintSet,
    DiffusionSchedule,
    GuidanceConfig,
    ddim_decode,
    ddim_invert,
    guided_sample,
    interpolate_poses,
    pose_walk,
    project_pose,
    q_sample,
    sample,
    sample_set,
    train,
)
from .datagen import (
    ClipStats,
    CreatureSpec,
    RigReport,
    filter_rig,
    filter_static,
    gen_creature,
    sample_gt_poses,
    select_rig,
)
from .metrics import GaussianFit, PairwiseCounts, fsd, lsr, o_nn
from .errors import DataError, NumericalError, PoseSpaceError

__all__ = [name for name in dir() if not name.startswith("_")]
