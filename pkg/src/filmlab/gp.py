"""Gaussian-process regression with a Matern-5/2 ARD kernel.

One independent model per objective. Inputs are normalized to the unit
cube, targets standardized; hyperparameters are fitted by multi-start
L-BFGS on the log marginal likelihood with analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular, LinAlgError
from scipy.optimize import minimize

SQRT5 = np.sqrt(5.0)


class GpError(RuntimeError):
    """Numerical failure (Cholesky after jitter escalation, etc.)."""


@dataclass(frozen=True)
class GpConfig:
    restarts: int = 8
    jitter: float = 1e-10
    lengthscale_bounds: tuple[float, float] = (0.05, 10.0)
    signal_bounds: tuple[float, float] = (1e-6, 100.0)
    noise_bounds: tuple[float, float] = (1e-6, 1.0)
    fixed_noise: float | None = None  # pins noise_variance when set
    max_iter: int = 200

    def __post_init__(self):
        for lo, hi in (self.lengthscale_bounds, self.signal_bounds, self.noise_bounds):
            if not lo < hi:
                raise ValueError("hyperparameter bounds must satisfy lo < hi")
        if not 1e-10 <= self.jitter <= 1e-4:
            raise ValueError("jitter must lie in [1e-10, 1e-4]")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class GpModel:
    """Trained surrogate. X is stored normalized to the unit cube; y is
    standardized with (y_mean, y_scale) retained for de-standardization."""

    X: np.ndarray
    y: np.ndarray
    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float
    chol: np.ndarray
    alpha: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    bounds_lo: np.ndarray = field(default=None)
    bounds_hi: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def normalize(self, Xq: np.ndarray) -> np.ndarray:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if self.bounds_lo is None:
            return Xq
        return (Xq - self.bounds_lo) / (self.bounds_hi - self.bounds_lo)

    def to_json_dict(self) -> dict:
        return {
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "lengthscales": self.lengthscales.tolist(),
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
            "bounds_lo": None if self.bounds_lo is None else self.bounds_lo.tolist(),
            "bounds_hi": None if self.bounds_hi is None else self.bounds_hi.tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "GpModel":
        lo = None if d["bounds_lo"] is None else np.array(d["bounds_lo"])
        hi = None if d["bounds_hi"] is None else np.array(d["bounds_hi"])
        return make_model(np.array(d["X"]), np.array(d["y"]),
                          np.array(d["lengthscales"]), d["signal_variance"],
                          d["noise_variance"], y_mean=d["y_mean"],
                          y_scale=d["y_scale"], bounds_lo=lo, bounds_hi=hi)


def matern52(Xa: np.ndarray, Xb: np.ndarray, lengthscales: np.ndarray,
             signal_variance: float) -> np.ndarray:
    """Matern-5/2 ARD kernel matrix between row sets Xa and Xb."""
    D = (Xa[:, None, :] - Xb[None, :, :]) / lengthscales
    r = np.sqrt(np.sum(D * D, axis=-1))
    return signal_variance * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * np.exp(-SQRT5 * r)


def _chol_with_jitter(K: np.ndarray, jitter0: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky of K, escalating jitter x10 up to 1e-4."""
    jitter = 0.0
    scale = float(np.mean(np.diag(K))) or 1.0
    while True:
        try:
            L = cholesky(K + jitter * scale * np.eye(K.shape[0]), lower=True)
            return L, jitter
        except LinAlgError:
            jitter = jitter0 if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-4:
                raise GpError("Cholesky failed after jitter escalation to 1e-4")


def make_model(X, y, lengthscales, signal_variance, noise_variance, *,
               y_mean=0.0, y_scale=1.0, bounds_lo=None, bounds_hi=None,
               jitter=1e-10) -> GpModel:
    """Assemble a GpModel from explicit hyperparameters (no fitting).

    y is taken as already standardized; set y_mean/y_scale for
    de-standardized predictions.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    ls = np.asarray(lengthscales, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    if np.any(ls <= 0) or signal_variance <= 0 or noise_variance < 0:
        raise ValueError("lengthscales and signal_variance must be positive, noise >= 0")
    K = matern52(X, X, ls, signal_variance) + noise_variance * np.eye(X.shape[0])
    L, _ = _chol_with_jitter(K, jitter)
    alpha = solve_triangular(L.T, solve_triangular(L, y, lower=True), lower=False)
    return GpModel(X=X, y=y, lengthscales=ls, signal_variance=float(signal_variance),
                   noise_variance=float(noise_variance), chol=L, alpha=alpha,
                   y_mean=float(y_mean), y_scale=float(y_scale),
                   bounds_lo=bounds_lo, bounds_hi=bounds_hi)


def log_marginal_likelihood(m: GpModel) -> float:
    """LML of the stored (standardized) targets under the model."""
    n = m.n
    return float(-0.5 * m.y @ m.alpha - np.sum(np.log(np.diag(m.chol)))
                 - 0.5 * n * np.log(2.0 * np.pi))


def lml_gradient(m: GpModel) -> np.ndarray:
    """Gradient of the LML over (log lengthscales, log signal, log noise)."""
    X, ls, sv, nv = m.X, m.lengthscales, m.signal_variance, m.noise_variance
    n, d = X.shape
    D = (X[:, None, :] - X[None, :, :]) / ls
    r2 = np.sum(D * D, axis=-1)
    r = np.sqrt(r2)
    e = np.exp(-SQRT5 * r)
    # dK/d log l_j = sv * (5/3) * (1 + sqrt5 r) e^{-sqrt5 r} * (d_j/l_j)^2
    common = sv * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e
    Kf = sv * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * e  # noise-free kernel

    Linv = solve_triangular(m.chol, np.eye(n), lower=True)
    Kinv = Linv.T @ Linv
    A = np.outer(m.alpha, m.alpha) - Kinv  # d LML/d theta = 0.5 tr(A dK/dtheta)

    grad = np.empty(d + 2)
    for j in range(d):
        dK = common * (D[:, :, j] ** 2)
        grad[j] = 0.5 * np.sum(A * dK)
    grad[d] = 0.5 * np.sum(A * Kf)            # d/d log sv
    grad[d + 1] = 0.5 * nv * np.trace(A)      # d/d log nv
    return grad


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    # lexicographic row order makes the fit invariant to input permutation
    keys = tuple(X[:, j] for j in reversed(range(X.shape[1]))) + (y,)
    return np.lexsort(keys)


def fit(X, y, cfg: GpConfig = GpConfig(), seed: int = 0,
        bounds: tuple[np.ndarray, np.ndarray] | None = None) -> GpModel:
    """Fit hyperparameters by multi-start gradient ascent on the LML.

    X is given in raw parameter units when `bounds` is supplied (then
    normalized to the unit cube internally), otherwise taken as already
    normalized. Deterministic for a given seed.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    if X.shape[0] < 2 or np.unique(X, axis=0).shape[0] < 2:
        raise ValueError("fit requires at least 2 distinct rows")

    lo = hi = None
    if bounds is not None:
        lo = np.asarray(bounds[0], dtype=float)
        hi = np.asarray(bounds[1], dtype=float)
        if np.any(X < lo - 1e-12) or np.any(X > hi + 1e-12):
            raise ValueError("training inputs outside declared bounds")
        Xn = (X - lo) / (hi - lo)
    else:
        Xn = X

    order = _canonical_order(Xn, y)
    Xn, y = Xn[order], y[order]

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    y_scale = y_std if y_std > 1e-12 else 1.0
    ys = (y - y_mean) / y_scale

    d = Xn.shape[1]
    fixed = cfg.fixed_noise
    lb = np.log(np.concatenate([np.full(d, cfg.lengthscale_bounds[0]),
                                [cfg.signal_bounds[0], cfg.noise_bounds[0]]]))
    ub = np.log(np.concatenate([np.full(d, cfg.lengthscale_bounds[1]),
                                [cfg.signal_bounds[1], cfg.noise_bounds[1]]]))

    def split(z):
        ls = np.exp(z[:d])
        sv = float(np.exp(z[d]))
        nv = fixed if fixed is not None else float(np.exp(z[d + 1]))
        return ls, sv, nv

    def neg_lml_and_grad(z):
        ls, sv, nv = split(z)
        try:
            m = make_model(Xn, ys, ls, sv, nv, jitter=cfg.jitter)
        except GpError:
            return 1e10, np.zeros_like(z)
        g = lml_gradient(m)
        if fixed is not None:
            g[d + 1] = 0.0
        return -log_marginal_likelihood(m), -g

    rng = np.random.default_rng(seed)
    starts = [np.concatenate([np.log(np.full(d, 0.5)),
                              [0.0, np.log(1e-2 if fixed is None else max(fixed, 1e-6))]])]
    for _ in range(cfg.restarts - 1):
        starts.append(rng.uniform(lb, ub))

    best_z, best_f = None, np.inf
    for z0 in starts:
        z0 = np.clip(z0, lb, ub)
        res = minimize(neg_lml_and_grad, z0, jac=True, method="L-BFGS-B",
                       bounds=list(zip(lb, ub)),
                       options={"maxiter": cfg.max_iter})
        if res.fun < best_f:
            best_f, best_z = res.fun, res.x
    if best_z is None:
        raise GpError("all hyperparameter restarts failed")

    ls, sv, nv = split(best_z)
    return make_model(Xn, ys, ls, sv, nv, y_mean=y_mean, y_scale=y_scale,
                      bounds_lo=lo, bounds_hi=hi, jitter=cfg.jitter)


def predict(m: GpModel, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance (de-standardized) at the query rows."""
    Xq = m.normalize(Xq)
    if Xq.shape[1] != m.dim:
        raise ValueError(f"query dimension {Xq.shape[1]} != training dimension {m.dim}")
    Ks = matern52(Xq, m.X, m.lengthscales, m.signal_variance)
    mean = Ks @ m.alpha
    V = solve_triangular(m.chol, Ks.T, lower=True)
    var = m.signal_variance - np.sum(V * V, axis=0)
    var = np.maximum(var, 0.0)
    return m.y_mean + m.y_scale * mean, (m.y_scale ** 2) * var


def posterior_covariance(m: GpModel, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Joint posterior mean vector and covariance matrix (de-standardized)."""
    Xq = m.normalize(Xq)
    Ks = matern52(Xq, m.X, m.lengthscales, m.signal_variance)
    Kss = matern52(Xq, Xq, m.lengthscales, m.signal_variance)
    mean = m.y_mean + m.y_scale * (Ks @ m.alpha)
    V = solve_triangular(m.chol, Ks.T, lower=True)
    cov = (m.y_scale ** 2) * (Kss - V.T @ V)
    return mean, cov


def posterior_sample(m: GpModel, Xq, count: int, seed) -> np.ndarray:
    """count joint posterior draws at Xq; deterministic per seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    mean, cov = posterior_covariance(m, Xq)
    nq = mean.shape[0]
    dvar = np.diag(cov)
    if np.max(dvar, initial=0.0) < 1e-14:
        return np.tile(mean, (count, 1))
    cov = 0.5 * (cov + cov.T)
    try:
        L, _ = _chol_with_jitter(cov, 1e-10)
    except GpError as e:
        raise GpError(f"posterior covariance not PSD: {e}") from e
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((count, nq))
    return mean + Z @ L.T
