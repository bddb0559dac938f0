"""Per-sequence Gaussian-process model tying observations to their aligned
counterparts.

Each sequence carries a latent function f with a zero-mean GP prior.  The
observed values y live at the warped inputs G and the aligned
pseudo-observations s live at the even grid x, so the stacked vector (s, y)
is jointly Gaussian with the block covariance

    [[k(x, x), k(x, G)], [k(G, x), k(G, G)]] + (1 / beta) I

where beta is the shared observation-noise precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _config  # noqa: F401
import jax.numpy as jnp
from jax.scipy.linalg import solve_triangular

from .kernels import KernelParams, gram, logpdf_from_chol, robust_cholesky
from .warp import WarpState, warp_points


@dataclass(frozen=True)
class NoiseModel:
    """Observation-noise precision shared by all sequences."""

    beta: float = 100.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class SequenceModel:
    """Observed sequence, aligned pseudo-observations, and their GP state."""

    y: np.ndarray
    s: np.ndarray
    theta: KernelParams
    warp: WarpState

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if y.ndim != 1 or s.shape != y.shape:
            raise ValueError("y and s must be vectors of equal length")
        if y.size != self.warp.u.size:
            raise ValueError("warp auxiliaries must match the sequence length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s", s)


def joint_covariance(family, lengthscale, variance, x, G, noise_var):
    """2N x 2N block covariance of the stacked (s, y) vector (traceable)."""
    Kxx = gram(family, lengthscale, variance, x, x)
    KxG = gram(family, lengthscale, variance, x, G)
    KGG = gram(family, lengthscale, variance, G, G)
    top = jnp.concatenate([Kxx, KxG], axis=1)
    bottom = jnp.concatenate([KxG.T, KGG], axis=1)
    C = jnp.concatenate([top, bottom], axis=0)
    return C + noise_var * jnp.eye(2 * jnp.shape(x)[0])


def joint_gp_loglik(m: SequenceModel, x, noise: NoiseModel) -> float:
    """Log density of the stacked (s, y) vector under the joint GP."""
    x = np.asarray(x, dtype=float)
    if x.shape != m.y.shape:
        raise ValueError("x must match the sequence length")
    G = warp_points(m.warp.u)
    C = joint_covariance(
        m.theta.family, m.theta.lengthscale, m.theta.variance, x, G, 1.0 / noise.beta
    )
    z = jnp.concatenate([jnp.asarray(m.s), jnp.asarray(m.y)])
    L, _ = robust_cholesky(C)
    return float(logpdf_from_chol(L, z))


def gp_predict_mean(m: SequenceModel, x, noise: NoiseModel, query) -> np.ndarray:
    """Posterior mean of the latent function at ``query`` points.

    Conditions on s observed at x and y observed at the warped inputs G,
    both with noise variance 1 / beta.
    """
    x = np.asarray(x, dtype=float)
    query = np.atleast_1d(np.asarray(query, dtype=float))
    if x.shape != m.y.shape:
        raise ValueError("x must match the sequence length")
    G = warp_points(m.warp.u)
    C = joint_covariance(
        m.theta.family, m.theta.lengthscale, m.theta.variance, x, G, 1.0 / noise.beta
    )
    z = jnp.concatenate([jnp.asarray(m.s), jnp.asarray(m.y)])
    L, _ = robust_cholesky(C)
    alpha = solve_triangular(L, z, lower=True)
    weights = solve_triangular(L.T, alpha, lower=False)  # C^{-1} (s, y)
    Kq = jnp.concatenate(
        [
            gram(m.theta.family, m.theta.lengthscale, m.theta.variance, query, x),
            gram(m.theta.family, m.theta.lengthscale, m.theta.variance, query, G),
        ],
        axis=1,
    )
    return np.asarray(Kq @ weights)
