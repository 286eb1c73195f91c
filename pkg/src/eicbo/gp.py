"""Gaussian-process regression with a squared-exponential kernel.

The surrogate is a zero-mean GP observed through i.i.d. Gaussian noise of
known variance.  The kernel is

    k(x, x') = tau_sq * exp(-0.5 * sum_i ((x_i - x'_i) / h_i)^2)

with signal variance ``tau_sq`` and one length scale per coordinate.  The
noise variance is always supplied by the caller and is never estimated;
only ``tau_sq`` and the length scales are fitted, by multi-start maximum
likelihood on the log scale.

All returned model objects are frozen: fitting produces a new posterior
rather than mutating an old one, so models can be shared across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import NumericFailure

__all__ = [
    "KernelSpec",
    "HyperparameterBounds",
    "GpPosterior",
    "kernel_eval",
    "kernel_matrix",
    "kernel_cross",
    "fit_posterior",
    "predict",
    "predict_many",
    "log_marginal_likelihood",
    "estimate_hyperparameters",
]

# Jitter escalation for Cholesky: start at JITTER_START * tau_sq, multiply by
# 10 until JITTER_MAX * tau_sq, then give up.
JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class KernelSpec:
    """Squared-exponential kernel hyperparameters.

    Parameters
    ----------
    tau_sq : float
        Signal variance, > 0.
    length_scales : array_like, shape (d,)
        Per-coordinate length scales, all > 0.
    """

    tau_sq: float
    length_scales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if self.tau_sq <= 0 or not np.isfinite(self.tau_sq):
            raise ValueError(f"tau_sq must be positive and finite, got {self.tau_sq}")
        if ls.ndim != 1 or ls.size < 1:
            raise ValueError("length_scales must be a 1-d array with at least one entry")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError("length scales must be positive and finite")
        object.__setattr__(self, "tau_sq", float(self.tau_sq))
        object.__setattr__(self, "length_scales", ls)

    @property
    def dim(self) -> int:
        return self.length_scales.size


@dataclass(frozen=True)
class HyperparameterBounds:
    """Box constraints for maximum-likelihood estimation, on the natural
    (not log) scale.  Both intervals must be positive."""

    tau_sq: tuple[float, float] = (1e-3, 1e3)
    length_scale: tuple[float, float] = (1e-2, 1e1)

    def __post_init__(self):
        for lo, hi in (self.tau_sq, self.length_scale):
            if not (0 < lo < hi):
                raise ValueError("bounds must satisfy 0 < lower < upper")


@dataclass(frozen=True)
class GpPosterior:
    """Posterior of a zero-mean GP after conditioning on noisy observations.

    ``factor`` is the lower Cholesky factor of K_XX + noise_var * I (plus
    ``jitter`` on the diagonal when regularization was needed), and ``alpha``
    solves (K_XX + noise_var * I) alpha = Y against the same factor.  An
    empty posterior (n = 0) represents the prior.
    """

    inputs: np.ndarray
    observations: np.ndarray
    noise_var: float
    kernel: KernelSpec
    factor: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.inputs.shape[0]


def kernel_eval(x, x_prime, spec: KernelSpec) -> float:
    """Evaluate k(x, x') for a single pair of points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != x_prime.shape or x.size != spec.dim:
        raise ValueError(
            f"point dimensions {x.shape} / {x_prime.shape} do not match kernel dim {spec.dim}"
        )
    z = (x - x_prime) / spec.length_scales
    return spec.tau_sq * math.exp(-0.5 * float(z @ z))


def kernel_matrix(X, spec: KernelSpec) -> np.ndarray:
    """Gram matrix of the kernel over the rows of X, shape (n, n)."""
    X = _as_matrix(X, spec.dim)
    S = X / spec.length_scales
    d2 = cdist(S, S, "sqeuclidean")
    return spec.tau_sq * np.exp(-0.5 * d2)


def kernel_cross(A, B, spec: KernelSpec) -> np.ndarray:
    """Cross-covariance matrix k(A_i, B_j), shape (len(A), len(B))."""
    A = _as_matrix(A, spec.dim)
    B = _as_matrix(B, spec.dim)
    d2 = cdist(A / spec.length_scales, B / spec.length_scales, "sqeuclidean")
    return spec.tau_sq * np.exp(-0.5 * d2)


def fit_posterior(X, Y, noise_var: float, spec: KernelSpec) -> GpPosterior:
    """Condition the GP prior on observations (X, Y).

    Parameters
    ----------
    X : array_like, shape (n, d)
    Y : array_like, shape (n,)
    noise_var : float
        Known observation-noise variance, >= 0.

    Returns
    -------
    GpPosterior

    Raises
    ------
    NumericFailure
        If K + noise_var * I cannot be factorized even at the largest
        permitted jitter.
    """
    if noise_var < 0 or not np.isfinite(noise_var):
        raise ValueError(f"noise_var must be finite and >= 0, got {noise_var}")
    X = _as_matrix(X, spec.dim)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if Y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]} entries")
    n = X.shape[0]
    if n == 0:
        empty = np.zeros((0, 0))
        return GpPosterior(X, Y, float(noise_var), spec, empty, np.zeros(0))
    A = kernel_matrix(X, spec)
    A[np.diag_indices_from(A)] += noise_var
    L, jitter = _chol_with_jitter(A, spec.tau_sq)
    alpha = cho_solve((L, True), Y, check_finite=False)
    return GpPosterior(X, Y, float(noise_var), spec, L, alpha, jitter)


def predict(model: GpPosterior, x) -> tuple[float, float]:
    """Posterior mean and variance at a single point.

    The variance is clamped to [0, tau_sq]; with no conditioning data the
    prior (0, tau_sq) is returned.
    """
    mean, var = predict_many(model, np.atleast_2d(np.asarray(x, dtype=float)))
    return float(mean[0]), float(var[0])


def predict_many(model: GpPosterior, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at each row of X.  Vectorized form of
    :func:`predict`; returns two arrays of shape (m,)."""
    spec = model.kernel
    X = _as_matrix(X, spec.dim)
    m = X.shape[0]
    if model.n == 0:
        return np.zeros(m), np.full(m, spec.tau_sq)
    Ks = kernel_cross(X, model.inputs, spec)
    mean = Ks @ model.alpha
    V = solve_triangular(model.factor, Ks.T, lower=True, check_finite=False)
    var = spec.tau_sq - np.einsum("ij,ij->j", V, V)
    np.clip(var, 0.0, spec.tau_sq, out=var)
    return mean, var


def log_marginal_likelihood(X, Y, noise_var: float, spec: KernelSpec) -> float:
    """Log marginal likelihood of Y under the zero-mean GP prior.

    Equals -0.5 * Y^T (K + noise_var I)^{-1} Y - 0.5 log det(K + noise_var I)
    - (n/2) log(2 pi), computed through the Cholesky factor.
    """
    model = fit_posterior(X, Y, noise_var, spec)
    if model.n == 0:
        return 0.0
    half_logdet = float(np.sum(np.log(np.diag(model.factor))))
    return float(
        -0.5 * model.observations @ model.alpha
        - half_logdet
        - 0.5 * model.n * math.log(2.0 * math.pi)
    )


def estimate_hyperparameters(
    X,
    Y,
    noise_var: float,
    bounds: HyperparameterBounds | None = None,
    restarts: int = 10,
    rng: np.random.Generator | None = None,
) -> KernelSpec:
    """Fit (tau_sq, length_scales) by maximum marginal likelihood.

    Runs Nelder-Mead from ``restarts`` uniform-random starting points in the
    log-parameter box and keeps the best result; parameters are clipped into
    the box, so a likelihood maximized at the boundary returns the boundary
    value without error.  The noise variance is fixed, never estimated.

    Parameters
    ----------
    rng : numpy Generator, optional
        Source for the random restarts.  Defaults to a fixed-seed generator
        so repeated calls on the same data agree.

    Raises
    ------
    NumericFailure
        If every likelihood evaluation fails numerically.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if X.shape[0] < 2:
        raise ValueError("hyperparameter estimation needs at least 2 observations")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if bounds is None:
        bounds = HyperparameterBounds()
    if rng is None:
        rng = np.random.default_rng(0)
    d = X.shape[1]
    lo = np.array([math.log(bounds.tau_sq[0])] + [math.log(bounds.length_scale[0])] * d)
    hi = np.array([math.log(bounds.tau_sq[1])] + [math.log(bounds.length_scale[1])] * d)

    evaluations = 0

    def objective(theta):
        nonlocal evaluations
        t = np.clip(theta, lo, hi)
        spec = KernelSpec(math.exp(t[0]), np.exp(t[1:]))
        try:
            value = log_marginal_likelihood(X, Y, noise_var, spec)
        except NumericFailure:
            return np.inf
        if not np.isfinite(value):
            return np.inf
        evaluations += 1
        return -value

    best_theta = None
    best_neg = np.inf
    for _ in range(restarts):
        start = rng.uniform(lo, hi)
        f0 = objective(start)
        if f0 < best_neg:
            best_neg, best_theta = f0, start
        result = minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"maxiter": 200 * (d + 1), "xatol": 1e-4, "fatol": 1e-6},
        )
        if np.isfinite(result.fun) and result.fun < best_neg:
            best_neg, best_theta = result.fun, result.x
    if evaluations == 0 or best_theta is None or not np.isfinite(best_neg):
        raise NumericFailure("likelihood evaluation failed at every restart")
    t = np.clip(best_theta, lo, hi)
    return KernelSpec(math.exp(t[0]), np.exp(t[1:]))


def _as_matrix(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        # A 1-d array is a column of scalar inputs, not a single point.
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.ndim != 2 or (X.shape[0] > 0 and X.shape[1] != dim):
        raise ValueError(f"expected points of dimension {dim}, got array of shape {X.shape}")
    return X


def _chol_with_jitter(A: np.ndarray, tau_sq: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of A, inflating the diagonal when A is not
    numerically positive definite.  Jitter starts at JITTER_START * tau_sq
    and grows tenfold up to JITTER_MAX * tau_sq."""
    try:
        return np.linalg.cholesky(A), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START * tau_sq
    eye = np.eye(A.shape[0])
    while jitter <= JITTER_MAX * tau_sq * (1 + 1e-12):
        try:
            return np.linalg.cholesky(A + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericFailure(
        f"Cholesky factorization failed at jitter {jitter / 10.0:g}",
        jitter=jitter / 10.0,
    )
