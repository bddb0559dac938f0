"""Stationary covariance functions and Cholesky utilities.

Two kernel families are supported: the squared exponential ("se") and
Matern 3/2 ("matern32").  Hyper-parameters live on their natural positive
scale inside :class:`KernelParams`; optimizers are expected to work with log
values and exponentiate before calling in.

The lower-level helpers (:func:`kernel_value`, :func:`gram`,
:func:`logpdf_from_chol`) are pure ``jax.numpy`` functions, so they can be
traced and differentiated as part of a larger objective.  The public wrappers
return plain floats / NumPy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _config  # noqa: F401  (float64 before any jax arrays exist)
import jax.numpy as jnp
from jax.scipy.linalg import solve_triangular

FAMILIES = ("se", "matern32")

_SQRT3 = np.sqrt(3.0)
_LOG_2PI = np.log(2.0 * np.pi)

# Diagonal jitter ladder, relative to the mean diagonal of the matrix being
# factorized.  The first factorization attempt adds no jitter at all so that
# well conditioned matrices yield exact densities.
JITTER_BASE = 1e-8
JITTER_CAP = 1e-2
_JITTER_LADDER = tuple(10.0 ** k for k in range(-8, -1))  # 1e-8 .. 1e-2


class FactorizationFailure(RuntimeError):
    """A covariance matrix could not be factorized within the jitter cap."""


@dataclass(frozen=True)
class KernelParams:
    """A kernel family together with its positive hyper-parameters."""

    family: str = "se"
    lengthscale: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")
        if not self.variance > 0:
            raise ValueError("variance must be positive")


def kernel_value(family, lengthscale, variance, a, b):
    """Covariance between inputs ``a`` and ``b`` (broadcasting, traceable).

    se:       variance * exp(-(a-b)^2 / (2 * lengthscale^2))
    matern32: variance * (1 + sqrt(3) r / lengthscale) * exp(-sqrt(3) r / lengthscale)
    """
    d = jnp.asarray(a) - jnp.asarray(b)
    if family == "se":
        return variance * jnp.exp(-0.5 * (d / lengthscale) ** 2)
    if family == "matern32":
        r = jnp.abs(d) * (_SQRT3 / lengthscale)
        return variance * (1.0 + r) * jnp.exp(-r)
    raise ValueError(f"unknown kernel family {family!r}")


def kernel_eval(p: KernelParams, a, b) -> float:
    """Scalar covariance k(a, b) under ``p``.  Symmetric in (a, b)."""
    return float(kernel_value(p.family, p.lengthscale, p.variance, a, b))


def gram(family, lengthscale, variance, A, B):
    """Cross-covariance matrix between input vectors ``A`` and ``B`` (traceable)."""
    A = jnp.ravel(jnp.asarray(A))
    B = jnp.ravel(jnp.asarray(B))
    return kernel_value(family, lengthscale, variance, A[:, None], B[None, :])


def gram_matrix(p: KernelParams, A, B) -> np.ndarray:
    """Matrix with entry (i, k) = k(A_i, B_k).  Symmetric when A is B."""
    A = np.atleast_1d(np.asarray(A, dtype=float))
    B = np.atleast_1d(np.asarray(B, dtype=float))
    if A.size == 0 or B.size == 0:
        raise ValueError("input vectors must be non-empty")
    return np.asarray(gram(p.family, p.lengthscale, p.variance, A, B))


def _jitter_levels(scale):
    yield 0.0
    for rel in _JITTER_LADDER:
        yield rel * scale


def robust_cholesky(M):
    """Lower Cholesky factor of ``M`` plus the diagonal jitter that was needed.

    Returns ``(L, jitter)`` with ``L @ L.T == M + jitter * I``.  The first
    attempt factorizes ``M`` exactly; on failure the jitter starts at
    ``1e-8 * mean(diag(M))`` and escalates tenfold per retry.

    Raises
    ------
    FactorizationFailure
        If the matrix still fails at the cap ``1e-2 * mean(diag(M))``, or if
        it contains non-finite entries.
    """
    M = jnp.asarray(M)
    n = M.shape[0]
    if not bool(jnp.all(jnp.isfinite(M))):
        raise FactorizationFailure(f"{n}x{n} matrix contains non-finite entries")
    scale = float(jnp.mean(jnp.diag(M)))
    eye = jnp.eye(n, dtype=M.dtype)
    for jitter in _jitter_levels(scale):
        L = jnp.linalg.cholesky(M if jitter == 0.0 else M + jitter * eye)
        if not bool(jnp.any(jnp.isnan(L))):
            return L, jitter
    raise FactorizationFailure(
        f"Cholesky of {n}x{n} matrix failed at jitter cap {JITTER_CAP * scale:.3e}"
    )


def required_jitter(M) -> float:
    """Smallest ladder jitter that lets ``M`` factorize (NumPy path, no grads)."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise FactorizationFailure(
            f"{M.shape[0]}x{M.shape[0]} matrix contains non-finite entries"
        )
    scale = float(np.mean(np.diag(M)))
    eye = np.eye(M.shape[0])
    for jitter in _jitter_levels(scale):
        try:
            np.linalg.cholesky(M if jitter == 0.0 else M + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        return jitter
    raise FactorizationFailure(
        f"Cholesky of {M.shape[0]}x{M.shape[0]} matrix failed at jitter cap "
        f"{JITTER_CAP * scale:.3e}"
    )


def logpdf_from_chol(L, z):
    """Zero-mean Gaussian log density given a lower Cholesky factor (traceable)."""
    alpha = solve_triangular(L, z, lower=True)
    n = z.shape[0]
    return (
        -0.5 * n * _LOG_2PI
        - jnp.sum(jnp.log(jnp.diag(L)))
        - 0.5 * jnp.sum(alpha * alpha)
    )


def mvn_logpdf(cov, z) -> float:
    """Log density of ``z`` under a zero-mean Gaussian with covariance ``cov``.

    Uses :func:`robust_cholesky`, so an escalating jitter is applied only if
    the exact factorization fails.
    """
    L, _ = robust_cholesky(cov)
    return float(logpdf_from_chol(L, jnp.asarray(z)))
