"""Distribution metrics over pose sets.

Pose sets are compared as clouds of concatenated normalized node positions:
Frechet distance between Gaussian fits, a nearest-neighbor overfitting
ratio, and a spectral ranking estimator for pairwise-comparison studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import normalized_matrix
from .errors import DataError, NumericalError
from .geometry import Asset, NormalizationStats, PoseSet, _freeze

SHRINKAGE = 1e-6


@dataclass(frozen=True)
class GaussianFit:
    """Mean and (shrunk) covariance of a vector cloud."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise DataError("covariance shape does not match mean")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise DataError("covariance must be symmetric")
        object.__setattr__(self, "mean", _freeze(mean))
        object.__setattr__(self, "cov", _freeze((cov + cov.T) / 2.0))

    @classmethod
    def fit(cls, rows: np.ndarray) -> "GaussianFit":
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 2:
            raise DataError("need at least 2 rows to fit a Gaussian")
        cov = np.cov(rows, rowvar=False).reshape(rows.shape[1], rows.shape[1])
        cov = cov + SHRINKAGE * np.eye(rows.shape[1])
        return cls(rows.mean(axis=0), cov)


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, negatives clamped."""
    sym = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_gaussian(fit_a: GaussianFit, fit_b: GaussianFit) -> float:
    """Frechet distance between two Gaussians:
    |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)."""
    dmu = fit_a.mean - fit_b.mean
    root_a = _sqrtm_psd(fit_a.cov)
    cross = _sqrtm_psd(root_a @ fit_b.cov @ root_a)
    val = float(dmu @ dmu + np.trace(fit_a.cov) + np.trace(fit_b.cov) - 2.0 * np.trace(cross))
    if not np.isfinite(val):
        raise NumericalError("non-finite Frechet distance (after shrinkage)")
    return max(val, 0.0)


def fsd(set_a: PoseSet, set_b: PoseSet, asset: Asset, stats: NormalizationStats) -> float:
    """Frechet Skeleton Distance on concatenated normalized joint positions."""
    if len(set_a) < 2 or len(set_b) < 2:
        raise DataError("both pose sets need at least 2 poses")
    fa = GaussianFit.fit(normalized_matrix(set_a, asset, stats))
    fb = GaussianFit.fit(normalized_matrix(set_b, asset, stats))
    return frechet_gaussian(fa, fb)


def o_nn(generated: PoseSet, groundtruth: PoseSet, asset: Asset,
         stats: NormalizationStats) -> float:
    """Overfitting ratio: mean ground-truth intra-set NN distance over mean
    generated-to-ground-truth NN distance. Values > 1 indicate overfitting;
    a collapsed denominator returns +inf."""
    if len(groundtruth) < 2:
        raise DataError("ground truth needs at least 2 poses")
    if len(generated) < 1:
        raise DataError("generated set is empty")
    gt = normalized_matrix(groundtruth, asset, stats)
    gen = normalized_matrix(generated, asset, stats)

    d_gt = np.linalg.norm(gt[:, None, :] - gt[None, :, :], axis=-1)
    np.fill_diagonal(d_gt, np.inf)
    intra = float(d_gt.min(axis=1).mean())

    d_x = np.linalg.norm(gen[:, None, :] - gt[None, :, :], axis=-1)
    inter = float(d_x.min(axis=1).mean())
    if inter < 1e-12:
        return float("inf")
    return intra / inter


@dataclass(frozen=True)
class PairwiseCounts:
    """counts[i, j] = number of comparisons won by i against j."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DataError("counts must be square")
        if np.any(c < 0):
            raise DataError("counts must be non-negative")
        if np.any(np.diag(c) != 0):
            raise DataError("counts diagonal must be zero")
        object.__setattr__(self, "counts", _freeze(c))


def _connected_after_symmetrization(c: np.ndarray) -> bool:
    n = c.shape[0]
    adj = (c + c.T) > 0
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())


def lsr(counts, alpha: float = 0.1, return_meta: bool = False):
    """Spectral ranking scores from pairwise win counts (mean-centered logs
    of the stationary distribution of the win-rate Markov chain).

    The chain moves from i toward j at a rate proportional to j's wins over
    i; rows are completed to stochastic with a single uniform scale plus
    self-loops. If any ordered pair has zero comparisons, `alpha` is added
    to every off-diagonal count first (reported in the metadata).
    """
    if isinstance(counts, PairwiseCounts):
        c = counts.counts.copy()
    else:
        c = PairwiseCounts(np.asarray(counts)).counts.copy()
    n = c.shape[0]
    if n < 2:
        raise DataError("need at least 2 items to rank")
    off = ~np.eye(n, dtype=bool)
    regularized = bool(np.any(c[off] == 0))
    if regularized and alpha > 0:
        c[off] += alpha
    if not _connected_after_symmetrization(c):
        raise DataError("comparison graph is disconnected after symmetrization")

    rates = c.T.copy()           # rate i -> j proportional to counts[j, i]
    np.fill_diagonal(rates, 0.0)
    scale = rates.sum(axis=1).max()
    p = rates / scale
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))

    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"stationary distribution solve failed: {e}") from e
    if np.any(pi <= 0):
        raise NumericalError("non-positive stationary probability; graph too sparse")
    scores = np.log(pi)
    scores = scores - scores.mean()
    if return_meta:
        return scores, {"regularized": regularized, "alpha": alpha if regularized else 0.0}
    return scores
