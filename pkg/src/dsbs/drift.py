"""Schrodinger bridge drift: sample-based estimator and the VP Gaussian-mixture closed form.

For every supported reference SDE the bridge drift at ``(x, t)`` is

    sigma(t)^2 * (m / v) * (sum_i w_i x_i - m x),

where ``(m, v)`` is the kernel from ``t`` to 1 and ``w`` is a softmax over the
per-sample log-weights

    |x_i - m0 a|^2 / (2 v0) - |x_i - m x|^2 / (2 v),

with ``(m0, v0)`` the kernel from 0 to 1 and ``a`` the start point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import InvalidArgument, TerminalTimeError
from .sde import (
    VARIANCE_FLOOR,
    Family,
    ReferenceSde,
    beta_integral,
    diffusion_sq,
    transition_params,
)

# Particle rows processed per kernel block; keeps the (rows x n) buffers in cache.
ROW_BLOCK = 16
# Up to this dimension the logits are accumulated coordinate-wise instead of by
# a matrix product, so each row's value does not depend on how rows are blocked.
SMALL_DIM = 8
# Shifted logits are clamped here before exponentiation: exp would otherwise
# enter the (very slow) subnormal range, and terms this small cannot change a
# sum that contains exp(0) = 1.
LOGIT_FLOOR = -700.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """An n x d point cloud standing in for the target distribution."""

    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, order="C")
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise InvalidArgument(f"dataset must be 2-D, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise InvalidArgument("dataset must contain at least one point")
        if pts.shape[1] < 1:
            raise InvalidArgument("dataset points must have positive dimension")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("dataset contains non-finite entries")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d})"


def _as_dataset(data) -> Dataset:
    return data if isinstance(data, Dataset) else Dataset(data)


class DriftEvaluator:
    """Bridge drift for a fixed (reference SDE, dataset, start point).

    Immutable after construction and safe to share across threads.

    ``subsample`` draws a fixed uniform subset of that many rows (seeded by
    ``subsample_seed``) and uses it in place of the full dataset.
    """

    def __init__(self, sde: ReferenceSde, dataset, start=None, subsample=None, subsample_seed=0):
        dataset = _as_dataset(dataset)
        if dataset.d != sde.dim:
            raise InvalidArgument(f"dataset dimension {dataset.d} != SDE dimension {sde.dim}")
        start = np.zeros(sde.dim) if start is None else np.array(start, dtype=np.float64)
        if start.shape != (sde.dim,):
            raise InvalidArgument(f"start point must have shape ({sde.dim},), got {start.shape}")
        if not np.all(np.isfinite(start)):
            raise InvalidArgument("start point must be finite")
        if subsample is not None and subsample < dataset.n:
            if subsample < 1:
                raise InvalidArgument("subsample size must be positive")
            rng = np.random.default_rng(subsample_seed)
            idx = np.sort(rng.choice(dataset.n, size=subsample, replace=False))
            dataset = Dataset(dataset.points[idx])
        start.setflags(write=False)

        self.sde = sde
        self.dataset = dataset
        self.start = start

        k0 = transition_params(sde, 0.0, 1.0)
        self._m0, self._v0 = k0.mean_scale, k0.variance

        # Repeated rows are merged into one support point with an integer
        # multiplicity; this makes the estimator exactly invariant to
        # duplicating the dataset.
        support, counts = np.unique(dataset.points, axis=0, return_counts=True)
        self._counts = None if np.all(counts == 1) else counts.astype(np.float64)
        self._anchor = self._anchor_term(support)
        # Distances are expanded around the data mean so logit magnitudes do
        # not grow with a global translation of the problem.
        self._center = support.mean(axis=0)
        centered = support - self._center
        self._sqnorm = np.einsum("ij,ij->i", centered, centered)
        self._centered = np.ascontiguousarray(centered)
        self._centered_cols = [np.ascontiguousarray(centered[:, k]) for k in range(sde.dim)]
        # [centered | 1]: one matrix-vector product yields numerator and total
        self._aug = np.ascontiguousarray(np.column_stack([centered, np.ones(len(support))]))

    def __repr__(self):
        return f"DriftEvaluator(family={self.sde.family.value}, n={self.dataset.n}, d={self.sde.dim})"

    # -- time-dependent scalars -------------------------------------------

    def _anchor_term(self, pts):
        diff = pts - self._m0 * self.start
        return np.einsum("ij,ij->i", diff, diff) / (2.0 * self._v0)

    def _kernel(self, t):
        """(m, v, sigma^2) for a drift query at time t."""
        t = float(t)
        if not t < 1.0:
            raise TerminalTimeError(f"drift is undefined at t={t!r}; queries need t < 1")
        if t < 0.0:
            raise InvalidArgument(f"t={t!r} is negative")
        k = transition_params(self.sde, t, 1.0)
        v = k.variance
        if v < VARIANCE_FLOOR:
            warnings.warn(f"kernel variance {v!r} at t={t!r} floored to {VARIANCE_FLOOR}", RuntimeWarning)
            v = VARIANCE_FLOOR
        return k.mean_scale, v, diffusion_sq(self.sde, t)

    def coefficients(self, t):
        """(C1, C2) such that the drift is C1 * weighted_mean - C2 * x."""
        m, v, s2 = self._kernel(t)
        return s2 * m / v, s2 * m * m / v

    # -- per-sample weights -------------------------------------------------

    def _check_point(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.sde.dim:
            raise InvalidArgument(f"point has dimension {x.shape[-1]}, expected {self.sde.dim}")
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("query point is not finite")
        return x

    def log_weight(self, x, t, i: int) -> float:
        """log f_t(x, x_i) for dataset row ``i``."""
        x = self._check_point(x)
        m, v, _ = self._kernel(t)
        xi = self.dataset.points[i]
        a = xi - self._m0 * self.start
        b = xi - m * x
        return float(a @ a / (2.0 * self._v0) - b @ b / (2.0 * v))

    def log_weights(self, x, t) -> np.ndarray:
        """log f_t(x, x_i) for every dataset row, evaluated directly."""
        x = self._check_point(x)
        m, v, _ = self._kernel(t)
        pts = self.dataset.points
        b = pts - m * x
        return self._anchor_term(pts) - np.einsum("ij,ij->i", b, b) / (2.0 * v)

    def weights(self, x, t) -> np.ndarray:
        """Softmax of ``log_weights``: normalized per-row weights."""
        lw = self.log_weights(x, t)
        return np.exp(lw - logsumexp(lw))

    def log_h(self, x, t) -> float:
        """log of the dataset average of f_t(x, .), up to an x-independent constant."""
        return float(logsumexp(self.log_weights(x, t)) - math.log(self.dataset.n))

    # -- the kernel -----------------------------------------------------------

    def weighted_mean(self, X, t) -> np.ndarray:
        """Softmax-weighted mean of the data for each row of ``X`` (shape (B, d))."""
        X = self._check_point(np.atleast_2d(X))
        m, v, _ = self._kernel(t)
        return self._weighted_mean(X, m, v)

    def _weighted_mean(self, X, m, v):
        n, d = self._centered.shape
        inv2v = 1.0 / (2.0 * v)
        base = self._anchor - inv2v * self._sqnorm
        # per-row linear coefficient: (m x - center) / v
        G = (m * X - self._center) / v
        out = np.empty_like(X)
        rows = min(ROW_BLOCK, X.shape[0])
        logits = np.empty((rows, n))
        tmp = np.empty((rows, n))
        acc = np.empty(d + 1)
        for lo in range(0, X.shape[0], ROW_BLOCK):
            g = G[lo : lo + ROW_BLOCK]
            r = g.shape[0]
            L, T = logits[:r], tmp[:r]
            if d <= SMALL_DIM:
                np.multiply(self._centered_cols[0], g[:, :1], out=L)
                for k in range(1, d):
                    np.multiply(self._centered_cols[k], g[:, k : k + 1], out=T)
                    L += T
            else:
                np.matmul(g, self._centered.T, out=L)
            L += base
            L -= L.max(axis=1, keepdims=True)
            np.maximum(L, LOGIT_FLOOR, out=L)
            np.exp(L, out=L)
            if self._counts is not None:
                L *= self._counts
            for j in range(r):
                np.dot(L[j], self._aug, out=acc)
                out[lo + j] = acc[:d] / acc[d]
        out += self._center
        return out

    def grad_log_h_batch(self, X, t) -> np.ndarray:
        X = self._check_point(np.atleast_2d(X))
        m, v, _ = self._kernel(t)
        return (m / v) * (self._weighted_mean(X, m, v) - m * X)

    def drift_batch(self, X, t) -> np.ndarray:
        """Bridge drift for each row of ``X``; O(n d) per row."""
        X = self._check_point(np.atleast_2d(X))
        m, v, s2 = self._kernel(t)
        return s2 * ((m / v) * (self._weighted_mean(X, m, v) - m * X))

    def grad_log_h(self, x, t) -> np.ndarray:
        return self.grad_log_h_batch(np.asarray(x, dtype=np.float64)[None, :], t)[0]

    def empirical_drift(self, x, t) -> np.ndarray:
        return self.drift_batch(np.asarray(x, dtype=np.float64)[None, :], t)[0]

    __call__ = empirical_drift


def bridge_drift_single(sde: ReferenceSde, target, x, t, start=None):
    """Closed-form drift toward a single point: C1(t) * target - C2(t) * x."""
    ev = DriftEvaluator(sde, np.atleast_2d(target), start)
    c1, c2 = ev.coefficients(t)
    return c1 * np.asarray(target, dtype=np.float64) - c2 * np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# Gaussian mixture targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        mu = np.array(self.means, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu[:, None]
        k, d = mu.shape
        cov = np.array(self.covs, dtype=np.float64)
        if cov.ndim == 1:  # one variance per component, d == 1
            cov = cov[:, None, None]
        if w.shape != (k,) or cov.shape != (k, d, d):
            raise InvalidArgument(f"inconsistent mixture shapes: {w.shape}, {mu.shape}, {cov.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidArgument("mixture weights must be a probability vector")
        chol = np.empty_like(cov)
        for j in range(k):
            if not np.allclose(cov[j], cov[j].T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov[j]).max())):
                raise InvalidArgument(f"covariance {j} is not symmetric")
            try:
                chol[j] = linalg.cholesky(cov[j], lower=True)
            except linalg.LinAlgError:
                raise InvalidArgument(f"covariance {j} is not positive definite") from None
        for a in (w, mu, cov, chol):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class GmmDriftIntermediates:
    kappa1: float
    kappa2: float
    zeta1: float
    zeta2: float
    m1: np.ndarray
    m2: np.ndarray
    theta_tilde: np.ndarray  # (K, d)
    sigma_tilde: np.ndarray  # (K, d, d)
    log_rho: np.ndarray  # (K,)

    @property
    def rho(self) -> np.ndarray:
        return np.exp(self.log_rho)


def gmm_drift_intermediates(gmm: GaussianMixture, sde: ReferenceSde, start, x, t) -> GmmDriftIntermediates:
    if sde.family is not Family.VP:
        raise InvalidArgument("the closed-form mixture drift is implemented for the VP SDE only")
    if gmm.dim != sde.dim:
        raise InvalidArgument("mixture and SDE dimensions differ")
    t = float(t)
    if not t < 1.0:
        raise TerminalTimeError(f"drift is undefined at t={t!r}")
    x = np.asarray(x, dtype=np.float64)
    a = np.zeros(sde.dim) if start is None else np.asarray(start, dtype=np.float64)

    b01 = beta_integral(sde, 0.0, 1.0)
    bt1 = beta_integral(sde, t, 1.0)
    beta_t = sde.schedule.beta(t)
    zeta1 = -math.expm1(-b01)
    zeta2 = -math.expm1(-bt1)
    m1 = a * math.exp(-0.5 * b01)
    m2 = x * math.exp(-0.5 * bt1)
    kappa1 = beta_t * math.exp(-0.5 * bt1) / zeta2
    kappa2 = beta_t * math.exp(-bt1) / zeta2

    # Product of N(theta_k, Sigma_k) with f_t(x, .): precision grows by
    # (1/zeta2 - 1/zeta1) I and the linear term by m2/zeta2 - m1/zeta1.
    d = sde.dim
    eye = np.eye(d)
    shift = m2 / zeta2 - m1 / zeta1
    K = gmm.n_components
    theta_t = np.empty((K, d))
    sigma_t = np.empty((K, d, d))
    log_rho = np.empty(K)
    for k in range(K):
        L = gmm.chol[k]
        prec_theta = linalg.cho_solve((L, True), gmm.means[k])
        prec = linalg.cho_solve((L, True), eye)
        prec_tilde = prec + (1.0 / zeta2 - 1.0 / zeta1) * eye
        prec_tilde = 0.5 * (prec_tilde + prec_tilde.T)
        try:
            Lt = linalg.cholesky(prec_tilde, lower=True)
        except linalg.LinAlgError:
            raise InvalidArgument(f"tilted covariance for component {k} is not positive definite") from None
        h = prec_theta + shift
        theta_t[k] = linalg.cho_solve((Lt, True), h)
        sigma_t[k] = linalg.cho_solve((Lt, True), eye)
        logdet_sigma = 2.0 * np.log(np.diag(L)).sum()
        logdet_sigma_t = -2.0 * np.log(np.diag(Lt)).sum()
        log_rho[k] = 0.5 * (logdet_sigma_t - logdet_sigma) + 0.5 * (h @ theta_t[k] - gmm.means[k] @ prec_theta)
    return GmmDriftIntermediates(kappa1, kappa2, zeta1, zeta2, m1, m2, theta_t, sigma_t, log_rho)


def gmm_drift_vp(gmm: GaussianMixture, sde: ReferenceSde, start, x, t) -> np.ndarray:
    """Exact bridge drift for a Gaussian-mixture target under the VP SDE."""
    it = gmm_drift_intermediates(gmm, sde, start, x, t)
    with np.errstate(divide="ignore"):
        lw = np.log(gmm.weights) + it.log_rho
    lw -= lw.max()
    w = np.exp(lw)
    w /= w.sum()
    return it.kappa1 * (w @ it.theta_tilde) - it.kappa2 * np.asarray(x, dtype=np.float64)
