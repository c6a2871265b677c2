"""Diffusion over normalized skeleton node positions.

Training regresses the clean normalized pose from its noised version
(clean-sample parameterization, uniform timestep weighting). Sampling uses
the standard posterior with that parameterization; the same machinery hosts
deterministic inversion/decoding, energy-guided constrained sampling,
manifold projection, latent interpolation, and correlated latent walks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import denoiser as dn
from .denoiser import DenoiserModel
from .errors import DataError, NumericalError
from .features import NodeFeatures
from .geometry import (
    Asset,
    NormalizationStats,
    Pose,
    PoseSet,
    compute_sigma_p,
    denormalize_pose,
    normalize_pose,
)


@dataclass(frozen=True)
class DiffusionSchedule:
    """Discrete noise schedule; betas indexed by t in [1, T]."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise DataError("betas must be a 1-D array")
        if np.any(b <= 0) or np.any(b >= 1):
            raise DataError("betas must lie in (0, 1)")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "betas", b)

    @classmethod
    def linear(cls, t_total: int = 1000, beta_start: float = 1e-4,
               beta_end: float = 0.02) -> "DiffusionSchedule":
        return cls(np.linspace(beta_start, beta_end, t_total))

    @property
    def t_total(self) -> int:
        return self.betas.size

    def alpha_bar(self, t) -> np.ndarray:
        """Cumulative product of (1 - beta); alpha_bar(0) == 1."""
        abar = np.concatenate([[1.0], np.cumprod(1.0 - self.betas)])
        return abar[np.asarray(t)]


@dataclass(frozen=True)
class ConstraintSet:
    """Sparse per-node targets in normalized pose space with weights."""

    items: tuple

    def __post_init__(self):
        norm = []
        for it in self.items:
            node, target, weight = it
            target = np.asarray(target, dtype=np.float64).reshape(3)
            if node < 0:
                raise DataError(f"negative node index {node}")
            if not np.all(np.isfinite(target)):
                raise DataError("non-finite constraint target")
            if not (np.isfinite(weight) and weight >= 0):
                raise DataError(f"constraint weight must be finite and >= 0, got {weight}")
            norm.append((int(node), target, float(weight)))
        object.__setattr__(self, "items", tuple(norm))

    def __len__(self) -> int:
        return len(self.items)

    def validate_for(self, n_nodes: int) -> None:
        for node, _, _ in self.items:
            if node >= n_nodes:
                raise DataError(f"constraint node {node} out of range for {n_nodes} nodes")


@dataclass(frozen=True)
class GuidanceConfig:
    scale: float = 10.0
    jacobian_mode: str = "exact"   # "exact" or "identity"
    steps: int = 100

    def __post_init__(self):
        if self.scale < 0 or not np.isfinite(self.scale):
            raise DataError("scale must be a non-negative real")
        if self.jacobian_mode not in ("exact", "identity"):
            raise DataError(f"unknown jacobian_mode {self.jacobian_mode!r}")
        if self.steps < 1:
            raise DataError("steps must be positive")


# --------------------------------------------------------------------------
# elementary steps
# --------------------------------------------------------------------------


def q_sample(x0: np.ndarray, t: int, noise: np.ndarray, schedule: DiffusionSchedule) -> np.ndarray:
    """Noise a clean normalized pose vector to level t."""
    if not 1 <= t <= schedule.t_total:
        raise DataError(f"t={t} outside [1, {schedule.t_total}]")
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x0.shape:
        raise DataError("noise shape does not match x0")
    a = schedule.alpha_bar(t)
    return np.sqrt(a) * x0 + np.sqrt(1.0 - a) * noise


def sample_timesteps(t_total: int, steps: int) -> np.ndarray:
    """Ascending sub-grid of `steps` timesteps from 1 to t_total inclusive."""
    if not 1 <= steps <= t_total:
        raise DataError(f"steps={steps} outside [1, {t_total}]")
    if steps == 1:
        return np.array([t_total], dtype=np.int64)
    return np.round(np.linspace(1, t_total, steps)).astype(np.int64)


def posterior_step(x_t: np.ndarray, x0_hat: np.ndarray, t_hi: int, t_lo: int,
                   schedule: DiffusionSchedule, noise) -> np.ndarray:
    """One stochastic posterior step from level t_hi down to t_lo (t_lo may be 0).

    The mean is the clean-sample-parameterized posterior mean; the variance is
    the forward step size (the "large" of DDPM's two standard choices), which
    keeps sampled distributions from contracting when the prediction is a
    slightly smoothed conditional mean.
    """
    a_hi = schedule.alpha_bar(t_hi)
    a_lo = schedule.alpha_bar(t_lo)
    alpha_eff = a_hi / a_lo
    beta_eff = 1.0 - alpha_eff
    mean = (np.sqrt(a_lo) * beta_eff / (1.0 - a_hi)) * x0_hat \
        + (np.sqrt(alpha_eff) * (1.0 - a_lo) / (1.0 - a_hi)) * x_t
    if t_lo == 0:
        return mean
    return mean + np.sqrt(beta_eff) * noise


def _ddim_step(x: np.ndarray, x0_hat: np.ndarray, t_from: int, t_to: int,
               schedule: DiffusionSchedule) -> np.ndarray:
    """Deterministic (eta=0) move between levels using the implied noise."""
    a_from = schedule.alpha_bar(t_from)
    a_to = schedule.alpha_bar(t_to)
    eps = (x - np.sqrt(a_from) * x0_hat) / np.sqrt(1.0 - a_from)
    return np.sqrt(a_to) * x0_hat + np.sqrt(1.0 - a_to) * eps


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


def train(model: DenoiserModel, dataset: list, schedule: DiffusionSchedule,
          epochs: int, batch: int, lr: float, seed: int,
          select: str = "final", probe_size: int = 256, lr_decay: float = 0.1,
          weighting: str = "uniform", log=None) -> tuple[DenoiserModel, list[float]]:
    """Train the denoiser on (Asset, NodeFeatures, Pose) tuples.

    Normalization stats are computed from the dataset up front. The loss is
    the per-coordinate mean squared error between the prediction and the
    clean normalized pose, at uniformly drawn timesteps. weighting="uniform"
    is w(t) = 1; weighting="epsilon" uses w(t) = min(1/(1 - alpha_bar_t),
    100), the clean-sample equivalent of noise-prediction training, which
    keeps low-noise timesteps accurate (inversion round trips and guided
    editing depend on them). The learning rate decays exponentially to
    lr * lr_decay over the run. The returned curve holds the unweighted loss
    on a fixed probe batch (frozen items, timesteps and noise) evaluated
    before training and after every epoch, so it is deterministic given the
    seed and constant when lr is 0.

    select="best" keeps the parameters with the lowest probe loss instead of
    the final ones.
    """
    if not dataset:
        raise DataError("empty training dataset")
    if select not in ("final", "best"):
        raise DataError(f"unknown select mode {select!r}")
    if weighting not in ("uniform", "epsilon"):
        raise DataError(f"unknown weighting {weighting!r}")
    stats = compute_sigma_p([(a, p) for a, _, p in dataset])
    rng = np.random.default_rng(seed)
    t_total = schedule.t_total
    abar = np.concatenate([[1.0], np.cumprod(1.0 - schedule.betas)])

    # group items by asset so batches share token count and topology
    groups: list[dict] = []
    index: dict[int, int] = {}
    for asset, feats, pose in dataset:
        key = id(asset)
        if key not in index:
            index[key] = len(groups)
            groups.append({"asset": asset, "feats": feats, "x0": []})
        if feats.rows.shape != (asset.n_nodes, model.config.n_f):
            raise DataError("node features do not match asset/config")
        groups[index[key]]["x0"].append(normalize_pose(asset, pose, stats))
    for g in groups:
        g["x0"] = np.stack(g["x0"])
        g["buckets"] = dn.GraphDistances.compute(
            g["asset"].n_nodes, g["asset"].skeleton.edges, model.config.max_graph_dist
        ).buckets

    params = {k: ad.param(v) for k, v in model.params.items()}
    opt = ad.Adam(params, lr=lr)

    # frozen probe for the loss curve
    probe = []
    for g in groups:
        m = g["x0"].shape[0]
        take = min(m, max(1, probe_size // len(groups)))
        idx = rng.choice(m, size=take, replace=False)
        t = rng.integers(1, t_total + 1, size=take)
        noise = rng.standard_normal((take, g["x0"].shape[1]))
        probe.append((g, g["x0"][idx], t, noise))

    def probe_loss() -> float:
        total, count = 0.0, 0
        for g, x0, t, noise in probe:
            xt = np.sqrt(abar[t])[:, None] * x0 + np.sqrt(1.0 - abar[t])[:, None] * noise
            pred = _forward_data(params, model.config, xt, g, t)
            total += float(((pred - x0) ** 2).sum())
            count += x0.size
        return total / count

    def _forward_data(params_t, cfg, xt, g, t):
        n = g["asset"].n_nodes
        out = dn._forward_graph(params_t, cfg, ad.constant(xt.reshape(-1, n, 3)),
                                g["buckets"], g["asset"].skeleton.nodes,
                                g["feats"].rows, t.astype(np.float64))
        return out.data.reshape(xt.shape)

    curve = [probe_loss()]
    best = (curve[0], {k: p.data.copy() for k, p in params.items()})
    step = 0
    for epoch in range(epochs):
        opt.lr = lr * lr_decay ** (epoch / max(epochs - 1, 1)) if lr_decay < 1 else lr
        for gi, g in enumerate(groups):
            x0_all = g["x0"]
            order = rng.permutation(x0_all.shape[0])
            n = g["asset"].n_nodes
            for lo in range(0, order.size, batch):
                sel = order[lo: lo + batch]
                x0 = x0_all[sel]
                t = rng.integers(1, t_total + 1, size=sel.size)
                noise = rng.standard_normal(x0.shape)
                xt = np.sqrt(abar[t])[:, None] * x0 + np.sqrt(1.0 - abar[t])[:, None] * noise
                out = dn._forward_graph(params, model.config,
                                        ad.constant(xt.reshape(-1, n, 3)),
                                        g["buckets"], g["asset"].skeleton.nodes,
                                        g["feats"].rows, t.astype(np.float64))
                diff = out.reshape(x0.shape) - ad.constant(x0)
                if weighting == "epsilon":
                    w = np.minimum(1.0 / (1.0 - abar[t]), 100.0)
                    loss = ((diff * diff) * ad.constant(w[:, None])).sum() * (
                        1.0 / (w.sum() * x0.shape[1]))
                else:
                    loss = (diff * diff).sum() * (1.0 / x0.size)
                if not np.isfinite(float(loss.data)):
                    raise NumericalError(
                        f"non-finite training loss at step {step} (group {gi}); "
                        f"last finite probe loss {curve[-1]:.6g}"
                    )
                ad.backward(loss)
                opt.step()
                opt.zero_grad()
                step += 1
        curve.append(probe_loss())
        if log is not None:
            log(len(curve) - 1, curve[-1])
        if curve[-1] < best[0]:
            best = (curve[-1], {k: p.data.copy() for k, p in params.items()})

    final = best[1] if select == "best" else {k: p.data.copy() for k, p in params.items()}
    return DenoiserModel(config=model.config, params=final, stats=stats), curve


# --------------------------------------------------------------------------
# sampling / inversion / decoding
# --------------------------------------------------------------------------


def _prep(model: DenoiserModel, asset: Asset, feats: NodeFeatures, steps: int,
          schedule: DiffusionSchedule):
    if feats.rows.shape != (asset.n_nodes, model.config.n_f):
        raise DataError("node features do not match asset/config")
    ts = sample_timesteps(schedule.t_total, steps)
    return asset.skeleton.edges, asset.rest_pose(), ts


def sample_set(model: DenoiserModel, asset: Asset, feats: NodeFeatures,
               schedule: DiffusionSchedule, steps: int, seed: int, n: int,
               tag: str = "sample") -> PoseSet:
    """Draw n poses by ancestral sampling; deterministic given the seed."""
    edges, rest, ts = _prep(model, asset, feats, steps, schedule)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3 * asset.n_nodes))
    ts_desc = ts[::-1]
    for i, t in enumerate(ts_desc):
        t_lo = int(ts_desc[i + 1]) if i + 1 < ts_desc.size else 0
        x0_hat = dn.forward_batch(model, x, edges, rest, feats,
                                  np.full(n, t, dtype=np.float64))
        noise = rng.standard_normal(x.shape) if t_lo > 0 else None
        x = posterior_step(x, x0_hat, int(t), t_lo, schedule, noise)
    poses = tuple(denormalize_pose(asset, row, model.stats) for row in x)
    return PoseSet(asset_name=asset.name, poses=poses, tags=tuple(tag for _ in poses))


def sample(model: DenoiserModel, asset: Asset, feats: NodeFeatures,
           schedule: DiffusionSchedule, steps: int, seed: int) -> Pose:
    return sample_set(model, asset, feats, schedule, steps, seed, n=1)[0]


def ddim_decode_batch(model: DenoiserModel, asset: Asset, feats: NodeFeatures,
                      latents: np.ndarray, schedule: DiffusionSchedule,
                      steps: int) -> np.ndarray:
    """Deterministic decode of terminal latents (K, 3N) to normalized poses."""
    edges, rest, ts = _prep(model, asset, feats, steps, schedule)
    x = np.asarray(latents, dtype=np.float64)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    ts_desc = ts[::-1]
    for i, t in enumerate(ts_desc):
        t_lo = int(ts_desc[i + 1]) if i + 1 < ts_desc.size else 0
        x0_hat = dn.forward_batch(model, x, edges, rest, feats,
                                  np.full(x.shape[0], t, dtype=np.float64))
        x = _ddim_step(x, x0_hat, int(t), t_lo, schedule)
    return x[0] if squeeze else x


def ddim_decode(model: DenoiserModel, asset: Asset, feats: NodeFeatures,
                latent: np.ndarray, schedule: DiffusionSchedule, steps: int) -> Pose:
    x0 = ddim_decode_batch(model, asset, feats, latent, schedule, steps)
    return denormalize_pose(asset, x0, model.stats)


def ddim_invert_batch(model: DenoiserModel, asset: Asset, feats: NodeFeatures,
                      x0s: np.ndarray, schedule: DiffusionSchedule,
                      steps: int) -> np.ndarray:
    """Deterministic inversion of normalized poses (K, 3N) to terminal latents.

    The first move (level 0 to the lowest grid level) treats the implied
    noise as zero, since it is undefined at level 0; the remaining moves
    mirror the decoding grid exactly.
    """
    edges, rest, ts = _prep(model, asset, feats, steps, schedule)
    x = np.atleast_2d(np.asarray(x0s, dtype=np.float64))
    squeeze = np.asarray(x0s).ndim == 1
    a0 = schedule.alpha_bar(int(ts[0]))
    x = np.sqrt(a0) * x
    for k in range(ts.size - 1):
        t, t_next = int(ts[k]), int(ts[k + 1])
        x0_hat = dn.forward_batch(model, x, edges, rest, feats,
                                  np.full(x.shape[0], t, dtype=np.float64))
        x = _ddim_step(x, x0_hat, t, t_next, schedule)
    return x[0] if squeeze else x


def ddim_invert(model: DenoiserModel, asset: Asset, feats: NodeFeatures, pose: Pose,
                schedule: DiffusionSchedule, steps: int) -> np.ndarray:
    x0 = normalize_pose(asset, pose, model.stats)
    return ddim_invert_batch(model, asset, feats, x0, schedule, steps)


# --------------------------------------------------------------------------
# guided sampling
# --------------------------------------------------------------------------


def constraint_energy(x0_vec: np.ndarray, constraints: ConstraintSet) -> float:
    """Sum of weighted squared distances of constrained nodes to targets."""
    e = 0.0
    v = np.asarray(x0_vec).reshape(-1, 3)
    for node, target, weight in constraints.items:
        d = v[node] - target
        e += weight * float(d @ d)
    return e


def _energy_grads(model: DenoiserModel, x: np.ndarray, edges, rest, feats,
                  t: int, constraint_sets: list[ConstraintSet],
                  mode: str, buckets: np.ndarray) -> np.ndarray:
    """Per-item gradient of the constraint energy of the denoised prediction
    w.r.t. the noisy input. Batch items are independent trajectories."""
    b, dim = x.shape
    n = dim // 3
    rows, cols, targets, weights = [], [], [], []
    for bi, cs in enumerate(constraint_sets):
        for node, target, weight in cs.items:
            rows.append(bi)
            cols.append(node)
            targets.append(target)
            weights.append(weight)
    if not rows:
        return np.zeros_like(x)
    rows_a = np.asarray(rows)
    cols_a = np.asarray(cols)
    targets_a = np.asarray(targets)
    weights_a = np.asarray(weights)

    if mode == "identity":
        pred = dn.forward_batch(model, x, edges, rest, feats,
                                np.full(b, t, dtype=np.float64)).reshape(b, n, 3)
        g = np.zeros((b, n, 3))
        np.add.at(g, (rows_a, cols_a),
                  2.0 * weights_a[:, None] * (pred[rows_a, cols_a] - targets_a))
        return g.reshape(b, dim)

    params_c = {k: ad.constant(v) for k, v in model.params.items()}
    x_in = ad.param(x.reshape(b, n, 3))
    out = dn._forward_graph(params_c, model.config, x_in, buckets,
                            rest.node_positions, feats.rows,
                            np.full(b, t, dtype=np.float64))
    picked = out[rows_a, cols_a]                      # (K, 3)
    diff = picked - ad.constant(targets_a)
    energy = ((diff * diff).sum(axis=-1) * ad.constant(weights_a)).sum()
    ad.backward(energy)
    g = x_in.grad if x_in.grad is not None else np.zeros((b, n, 3))
    if not np.all(np.isfinite(g)):
        raise NumericalError("non-finite guidance gradient")
    return g.reshape(b, dim)


def guided_sample_set(model: DenoiserModel, asset: Asset, feats: NodeFeatures,
                      constraint_sets: list[ConstraintSet], schedule: DiffusionSchedule,
                      cfg: GuidanceConfig, seed: int,
                      init_latents: np.ndarray | None = None) -> PoseSet:
    """Energy-guided ancestral sampling, one constraint set per trajectory.

    Before each posterior step the noisy state is nudged by
    -scale * sqrt(1 - alpha_bar_t) * grad(E(prediction)); the square root
    keeps late (low-noise) steps strong enough to actually pin constraints.
    With no constraints or scale 0 the trajectory is identical to unguided
    sampling (same seed).
    """
    edges, rest, ts = _prep(model, asset, feats, cfg.steps, schedule)
    n_items = len(constraint_sets)
    for cs in constraint_sets:
        cs.validate_for(asset.n_nodes)
    rng = np.random.default_rng(seed)
    if init_latents is None:
        x = rng.standard_normal((n_items, 3 * asset.n_nodes))
    else:
        x = np.atleast_2d(np.asarray(init_latents, dtype=np.float64)).copy()
        if x.shape != (n_items, 3 * asset.n_nodes):
            raise DataError("init_latents shape does not match constraint sets")
    buckets = dn._buckets_for(asset.n_nodes, edges, model.config.max_graph_dist)
    any_constraints = any(len(cs) for cs in constraint_sets)
    ts_desc = ts[::-1]
    for i, t in enumerate(ts_desc):
        t_lo = int(ts_desc[i + 1]) if i + 1 < ts_desc.size else 0
        if any_constraints and cfg.scale > 0:
            g = _energy_grads(model, x, edges, rest, feats, int(t), constraint_sets,
                              cfg.jacobian_mode, buckets)
            kick = cfg.scale * np.sqrt(1.0 - schedule.alpha_bar(int(t))) * g
            # cap per-trajectory kicks at the typical state norm: keeps large
            # scales / identity mode finite without touching small nudges
            norms = np.linalg.norm(kick, axis=1, keepdims=True)
            cap = np.sqrt(kick.shape[1])
            kick = kick * np.where(norms > cap, cap / np.maximum(norms, 1e-300), 1.0)
            x = x - kick
        x0_hat = dn.forward_batch(model, x, edges, rest, feats,
                                  np.full(x.shape[0], t, dtype=np.float64))
        noise = rng.standard_normal(x.shape) if t_lo > 0 else None
        x = posterior_step(x, x0_hat, int(t), t_lo, schedule, noise)
    poses = tuple(denormalize_pose(asset, row, model.stats) for row in x)
    return PoseSet(asset_name=asset.name, poses=poses, tags=tuple("guided" for _ in poses))


def guided_sample(model: DenoiserModel, asset: Asset, feats: NodeFeatures,
                  constraints: ConstraintSet, schedule: DiffusionSchedule,
                  cfg: GuidanceConfig, seed: int,
                  init_latent: np.ndarray | None = None) -> Pose:
    init = None if init_latent is None else np.atleast_2d(init_latent)
    return guided_sample_set(model, asset, feats, [constraints], schedule, cfg, seed,
                             init_latents=init)[0]


# --------------------------------------------------------------------------
# projection, interpolation, walks
# --------------------------------------------------------------------------


def project_pose(model: DenoiserModel, asset: Asset, feats: NodeFeatures, pose: Pose,
                 schedule: DiffusionSchedule, t_proj: float, seed: int,
                 steps: int | None = None) -> Pose:
    """Snap a pose onto the learned manifold: noise to round(t_proj * T), denoise."""
    if not 0 < t_proj <= 1:
        raise DataError(f"t_proj must be in (0, 1], got {t_proj}")
    t_start = max(1, int(round(t_proj * schedule.t_total)))
    rng = np.random.default_rng(seed)
    x0 = normalize_pose(asset, pose, model.stats)
    x = q_sample(x0, t_start, rng.standard_normal(x0.shape), schedule)
    k = t_start if steps is None else min(steps, t_start)
    ts_desc = sample_timesteps(t_start, k)[::-1]
    edges, rest, _ = _prep(model, asset, feats, 1, schedule)
    for i, t in enumerate(ts_desc):
        t_lo = int(ts_desc[i + 1]) if i + 1 < ts_desc.size else 0
        x0_hat = dn.forward_batch(model, x[None, :], edges, rest, feats,
                                  np.array([float(t)]))[0]
        noise = rng.standard_normal(x.shape) if t_lo > 0 else None
        x = posterior_step(x, x0_hat, int(t), t_lo, schedule, noise)
    return denormalize_pose(asset, x, model.stats)


def slerp(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    """Spherical interpolation; falls back to norm-preserving lerp when the
    endpoints are (anti)parallel."""
    if tau == 0.0:
        return a.copy()
    if tau == 1.0:
        return b.copy()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return (1 - tau) * a + tau * b
    cosw = float(np.clip(a @ b / (na * nb), -1.0, 1.0))
    if cosw < -1.0 + 1e-7:  # antipodal: slerp direction undefined
        z = (1 - tau) * a + tau * b
        nz = np.linalg.norm(z)
        target = np.sqrt(na * nb)
        return z * (target / nz) if nz > 1e-12 else z
    if cosw > 1.0 - 1e-12:
        return (1 - tau) * a + tau * b
    w = np.arccos(cosw)
    return (np.sin((1 - tau) * w) * a + np.sin(tau * w) * b) / np.sin(w)


def interpolate_poses(model: DenoiserModel, asset: Asset, feats: NodeFeatures,
                      pose_a: Pose, pose_b: Pose, n_steps: int,
                      schedule: DiffusionSchedule, steps: int = 100) -> list[Pose]:
    """Invert both endpoints, slerp the latents, decode deterministically."""
    if n_steps < 2:
        raise DataError("n_steps must be >= 2")
    za = ddim_invert(model, asset, feats, pose_a, schedule, steps)
    zb = ddim_invert(model, asset, feats, pose_b, schedule, steps)
    taus = np.linspace(0.0, 1.0, n_steps)
    latents = np.stack([slerp(za, zb, float(tau)) for tau in taus])
    decoded = ddim_decode_batch(model, asset, feats, latents, schedule, steps)
    return [denormalize_pose(asset, row, model.stats) for row in decoded]


def latent_walk(length: int, rho: float, dim: int, seed: int) -> np.ndarray:
    """Stationary unit-Gaussian AR(1) walk: z' = rho z + sqrt(1-rho^2) xi."""
    if not 0 <= rho < 1:
        raise DataError(f"rho must be in [0, 1), got {rho}")
    if length < 1:
        raise DataError("length must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((length, dim))
    out[0] = rng.standard_normal(dim)
    c = np.sqrt(1.0 - rho * rho)
    for k in range(1, length):
        out[k] = rho * out[k - 1] + c * rng.standard_normal(dim)
    return out


def pose_walk(model: DenoiserModel, asset: Asset, feats: NodeFeatures, length: int,
              rho: float, schedule: DiffusionSchedule, seed: int,
              steps: int = 100) -> list[Pose]:
    """Correlated latent walk decoded deterministically into a pose trajectory."""
    latents = latent_walk(length, rho, 3 * asset.n_nodes, seed)
    decoded = ddim_decode_batch(model, asset, feats, latents, schedule, steps)
    return [denormalize_pose(asset, row, model.stats) for row in decoded]


# convenience used by metrics/CLI


def normalized_matrix(pose_set: PoseSet, asset: Asset, stats: NormalizationStats) -> np.ndarray:
    """Stack normalized pose vectors, shape (K, 3*N_P)."""
    return np.stack([normalize_pose(asset, p, stats) for p in pose_set])
