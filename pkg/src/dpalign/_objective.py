"""Flat-vector parameterization and the differentiable joint objective.

All free parameters live in one flat vector split into nine named blocks:

    s         aligned pseudo-observations, (J, N)
    u         warp auxiliaries, (J, N)
    theta     log kernel hyper-parameters, (J, 4) as
              [seq log lengthscale, seq log variance,
               warp log lengthscale, warp log variance]
    beta      log noise precision, scalar
    gamma     log Beta stick parameters, (T - 1, 2)
    tau       component posteriors, (T, N + 1): means then log variance
    phi       assignment logits, (J, T), softmax per row
    alpha     log DP scaling, scalar
    base_var  log base-distribution variance, scalar

Positive quantities are log-parameterized and phi rows go through a softmax,
so the optimizer never sees a constraint.  The mixture component variance is
not a free block: the fit driver sets it to 1 / beta and passes it in as a
plain input.

The objective itself is a pure jax function of (vector, grid, data, jitter
levels), so it can be jit-compiled once per problem shape and differentiated
in reverse mode.  Jitter levels are chosen outside the traced code (see
``choose_jitters``) and enter as plain inputs; level zero leaves the
covariance bit-for-bit unchanged.
"""

from __future__ import annotations

from collections import namedtuple
from functools import partial

import numpy as np

from . import _config  # noqa: F401
import jax
import jax.numpy as jnp
from jax.scipy.special import logsumexp

from .dpmm import HyperPriors, _elbo_terms
from .gp_model import joint_covariance
from .kernels import FactorizationFailure, gram, logpdf_from_chol, required_jitter
from .warp import warp_points

BLOCKS = ("s", "u", "theta", "beta", "gamma", "tau", "phi", "alpha", "base_var")

ModelSpec = namedtuple(
    "ModelSpec",
    ["family", "warp_family", "T", "prior_noise", "warp_prior_on",
     "alpha_prior", "basevar_prior"],
)


class ParamPack:
    """Fixed mapping between the named blocks and one flat float64 vector."""

    def __init__(self, J: int, N: int, T: int):
        self.J, self.N, self.T = J, N, T
        self.shapes = {
            "s": (J, N),
            "u": (J, N),
            "theta": (J, 4),
            "beta": (),
            "gamma": (max(T - 1, 0), 2),
            "tau": (T, N + 1),
            "phi": (J, T),
            "alpha": (),
            "base_var": (),
        }
        self.slices = {}
        offset = 0
        for name in BLOCKS:
            size = int(np.prod(self.shapes[name], dtype=int))
            self.slices[name] = slice(offset, offset + size)
            offset += size
        self.size = offset

    @property
    def key(self):
        return (self.J, self.N, self.T)

    def flatten(self, blocks: dict) -> np.ndarray:
        return np.concatenate(
            [np.ravel(np.asarray(blocks[name], dtype=float)) for name in BLOCKS]
        )

    def unflatten(self, vec):
        return {
            name: jnp.reshape(vec[self.slices[name]], self.shapes[name])
            for name in BLOCKS
        }


def initial_params(Y: np.ndarray, T: int, mcfg, rng: np.random.Generator) -> dict:
    """Documented starting point: s = y, identity warps, kernels at their
    configured init values, component means at the data mean plus seeded
    noise, assignments near uniform."""
    J, N = Y.shape
    theta_row = np.log([mcfg.init_lengthscale, mcfg.init_variance,
                        mcfg.init_lengthscale, mcfg.init_variance])
    tau_mean = Y.mean(axis=0) + 0.05 * rng.standard_normal((T, N))
    tau = np.concatenate([tau_mean, np.full((T, 1), np.log(0.01))], axis=1)
    return {
        "s": Y.copy(),
        "u": np.zeros((J, N)),
        "theta": np.tile(theta_row, (J, 1)),
        "beta": np.asarray(np.log(mcfg.init_beta)),
        "gamma": np.tile(np.log([1.0, mcfg.init_alpha]), (max(T - 1, 0), 1)),
        "tau": tau,
        "phi": 0.01 * rng.standard_normal((J, T)),
        "alpha": np.asarray(np.log(mcfg.init_alpha)),
        "base_var": np.asarray(np.log(mcfg.init_base_var)),
    }


def objective_terms(vec, x, Y, gp_jitter, warp_jitter, comp_var,
                    pack: ParamPack, spec: ModelSpec):
    """Every additive piece of the joint objective, keyed by name (traceable).

    ``comp_var`` is the mixture component variance.  It is not a free block:
    the fit driver refreshes it from the current noise precision (1 / beta)
    between iterations, so within one evaluation it is a plain input.
    """
    p = pack.unflatten(vec)
    J, N = pack.J, pack.N
    noise_var = jnp.exp(-p["beta"])
    terms = {}
    for j in range(J):
        G = warp_points(p["u"][j])
        C = joint_covariance(
            spec.family, jnp.exp(p["theta"][j, 0]), jnp.exp(p["theta"][j, 1]),
            x, G, noise_var,
        )
        L = jnp.linalg.cholesky(C + gp_jitter[j] * jnp.eye(2 * N))
        z = jnp.concatenate([p["s"][j], Y[j]])
        terms[f"gp[{j}]"] = logpdf_from_chol(L, z)
        if spec.warp_prior_on:
            Cw = gram(spec.warp_family, jnp.exp(p["theta"][j, 2]),
                      jnp.exp(p["theta"][j, 3]), x, x)
            Cw = Cw + (spec.prior_noise + warp_jitter[j]) * jnp.eye(N)
            terms[f"warp[{j}]"] = logpdf_from_chol(jnp.linalg.cholesky(Cw), G)

    logits = p["phi"]
    logphi = logits - logsumexp(logits, axis=1, keepdims=True)
    phi = jnp.exp(logphi)
    elbo_parts = _elbo_terms(
        s=p["s"],
        phi=phi,
        entropy_z=-jnp.sum(phi * logphi),
        gamma=jnp.exp(p["gamma"]),
        tau_mean=p["tau"][:, :N],
        tau_var=jnp.exp(p["tau"][:, N]),
        alpha=jnp.exp(p["alpha"]),
        base_var=jnp.exp(p["base_var"]),
        comp_var=comp_var,
        priors=HyperPriors(spec.alpha_prior, spec.basevar_prior),
    )
    terms["elbo"] = sum(elbo_parts.values())
    return terms


def objective_value(vec, x, Y, gp_jitter, warp_jitter, comp_var,
                    pack: ParamPack, spec: ModelSpec):
    """Scalar joint objective: sum of per-sequence GP and warp-prior
    log likelihoods plus the mixture bound (traceable)."""
    terms = objective_terms(vec, x, Y, gp_jitter, warp_jitter, comp_var, pack, spec)
    total = 0.0
    for j in range(pack.J):
        total = total + terms[f"gp[{j}]"]
        if spec.warp_prior_on:
            total = total + terms[f"warp[{j}]"]
    return total + terms["elbo"]


_FN_CACHE: dict = {}


def compiled_functions(pack: ParamPack, spec: ModelSpec):
    """Jitted value and value-and-grad callables, cached per problem shape."""
    key = (pack.key, spec)
    if key not in _FN_CACHE:
        fn = partial(objective_value, pack=pack, spec=spec)
        _FN_CACHE[key] = {
            "value": jax.jit(fn),
            "valgrad": jax.jit(jax.value_and_grad(fn)),
        }
    return _FN_CACHE[key]


def choose_jitters(vec, x, Y, pack: ParamPack, spec: ModelSpec):
    """Smallest ladder jitters making every covariance factorizable at ``vec``.

    Runs outside the traced objective.  Raises FactorizationFailure tagged
    with the offending sequence index if a matrix fails even at the cap.
    """
    p = {k: np.asarray(v) for k, v in pack.unflatten(jnp.asarray(vec)).items()}
    noise_var = float(np.exp(-p["beta"]))
    gp_jitter = np.zeros(pack.J)
    warp_jitter = np.zeros(pack.J)
    for j in range(pack.J):
        G = np.asarray(warp_points(p["u"][j]))
        C = np.asarray(joint_covariance(
            spec.family, float(np.exp(p["theta"][j, 0])),
            float(np.exp(p["theta"][j, 1])), x, G, noise_var,
        ))
        try:
            gp_jitter[j] = required_jitter(C)
            if spec.warp_prior_on:
                Cw = np.asarray(gram(
                    spec.warp_family, float(np.exp(p["theta"][j, 2])),
                    float(np.exp(p["theta"][j, 3])), x, x,
                )) + spec.prior_noise * np.eye(pack.N)
                warp_jitter[j] = required_jitter(Cw)
        except FactorizationFailure as exc:
            raise FactorizationFailure(f"sequence {j}: {exc}") from exc
    return gp_jitter, warp_jitter
