"""Monotone time warps built from unconstrained auxiliary vectors.

A warp is parameterized by ``u`` in R^N.  Softmax weights of ``u`` are
accumulated into a cumulative sum and affinely rescaled so the resulting grid
is strictly increasing with endpoints exactly -1 and 1.  A constant ``u``
gives the evenly spaced grid, which makes the identity warp the natural
initialization.  Smoothness is encouraged by a zero-mean Gaussian prior on
the warp evaluations with a kernel over the original grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _config  # noqa: F401
import jax.numpy as jnp

from .kernels import KernelParams, gram, mvn_logpdf

#: diagonal noise added to the warp-prior covariance; dense grids make the
#: raw kernel matrix nearly singular.  Kept small: it acts as a floor under
#: which rough warp wiggles are free, so a loose value lets warps absorb
#: observation noise
DEFAULT_PRIOR_NOISE = 5e-7


@dataclass(frozen=True)
class WarpState:
    """Auxiliary vector of one sequence plus its warp-prior kernel."""

    u: np.ndarray
    omega: KernelParams = field(default_factory=KernelParams)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or u.size < 2:
            raise ValueError("u must be a vector of length >= 2")
        if not np.all(np.isfinite(u)):
            raise ValueError("u must be finite")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


def warp_points(u):
    """Traceable core of :func:`warp_from_aux` (no validation)."""
    u = jnp.asarray(u)
    w = jnp.exp(u - jnp.max(u))
    w = w / jnp.sum(w)
    c = jnp.cumsum(w)
    return -1.0 + 2.0 * (c - c[0]) / (c[-1] - c[0])


def warp_from_aux(u) -> np.ndarray:
    """Strictly increasing warp grid on [-1, 1] induced by ``u``.

    With softmax weights w and cumulative sums c, the warp is
    ``-1 + 2 (c_n - c_1) / (c_N - c_1)``.  Endpoints are exactly -1 and 1,
    adding a constant to ``u`` leaves the warp unchanged, and a constant ``u``
    reproduces the even grid.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 2:
        raise ValueError("u must be a vector of length >= 2")
    if not np.all(np.isfinite(u)):
        raise ValueError("u must be finite")
    return np.asarray(warp_points(u))


def warp_log_prior(G, x, omega: KernelParams, prior_noise: float = DEFAULT_PRIOR_NOISE) -> float:
    """Log density of warp evaluations ``G`` under the smoothness prior.

    The prior is a zero-mean multivariate normal over the grid ``x`` with
    covariance ``k_omega(x, x) + prior_noise * I``.
    """
    G = np.asarray(G, dtype=float)
    x = np.asarray(x, dtype=float)
    if G.shape != x.shape or G.ndim != 1:
        raise ValueError("G and x must be vectors of equal length")
    if not prior_noise >= 0:
        raise ValueError("prior_noise must be non-negative")
    cov = gram(omega.family, omega.lengthscale, omega.variance, x, x)
    cov = cov + prior_noise * jnp.eye(x.size)
    return mvn_logpdf(cov, G)


def aux_total_variation(u) -> float:
    """Total variation of the auxiliary vector, sum |u_n - u_{n-1}|."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 2:
        raise ValueError("u must be a vector of length >= 2")
    return float(np.sum(np.abs(np.diff(u))))
