"""Truncated stick-breaking Dirichlet-process mixture over aligned sequences.

The generative side: stick fractions v_t ~ Beta(1, alpha) define mixing
weights pi via the stick-breaking product, component means eta_t are drawn
from a zero-mean Gaussian base distribution with variance ``base_var``, each
sequence picks a component z_j ~ Mult(pi) and is emitted as an isotropic
Gaussian around eta_{z_j} with variance ``comp_var``.

The variational side factorizes as Beta sticks q(v_t | gamma_t), isotropic
Gaussian component posteriors q(eta_t) = N(tau_mean_t, tau_var_t I), and
multinomial assignments q(z_j | phi_j).  All evidence-lower-bound terms are
analytic; Gamma log priors on alpha and base_var are added because both are
point estimates in the optimization.

Fitting is done by gradient ascent on the joint objective elsewhere; the
closed-form coordinate updates here exist as a correctness oracle (each one
maximizes the bound over its own block, so a sweep can never decrease it).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _config  # noqa: F401
import jax.numpy as jnp
from jax.scipy.special import digamma, gammaln, xlogy

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class HyperPriors:
    """(shape, rate) pairs of the Gamma priors on alpha and base_var."""

    alpha_gamma: tuple = (1.0, 1.0)
    basevar_gamma: tuple = (1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "alpha_gamma", tuple(float(v) for v in self.alpha_gamma))
        object.__setattr__(self, "basevar_gamma", tuple(float(v) for v in self.basevar_gamma))
        for pair in (self.alpha_gamma, self.basevar_gamma):
            if len(pair) != 2 or not all(v > 0 for v in pair):
                raise ValueError("Gamma prior (shape, rate) entries must be positive")


@dataclass(frozen=True)
class DPMMState:
    """Variational parameters and hyper-parameters of the truncated mixture.

    gamma holds the T-1 Beta(stick) parameter pairs, tau_mean / tau_var the
    Gaussian component posteriors, phi the row-stochastic responsibilities.
    """

    T: int
    gamma: np.ndarray
    tau_mean: np.ndarray
    tau_var: np.ndarray
    phi: np.ndarray
    alpha: float = 1.0
    base_var: float = 1.0
    comp_var: float = 0.01

    def __post_init__(self):
        T = int(self.T)
        if T < 1:
            raise ValueError("truncation level T must be >= 1")
        gamma = np.asarray(self.gamma, dtype=float).reshape(max(T - 1, 0), 2)
        if gamma.size and not np.all(gamma > 0):
            raise ValueError("Beta parameters must be positive")
        tau_mean = np.asarray(self.tau_mean, dtype=float)
        if tau_mean.ndim != 2 or tau_mean.shape[0] != T:
            raise ValueError("tau_mean must have one row per component")
        tau_var = np.asarray(self.tau_var, dtype=float).reshape(T)
        if not np.all(tau_var > 0):
            raise ValueError("component variances must be positive")
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[1] != T:
            raise ValueError("phi must have one column per component")
        if np.any(phi < 0) or not np.allclose(phi.sum(axis=1), 1.0, atol=1e-6):
            raise ValueError("phi rows must be non-negative and sum to 1")
        for name, value in (("alpha", self.alpha), ("base_var", self.base_var),
                            ("comp_var", self.comp_var)):
            if not value > 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "tau_mean", tau_mean)
        object.__setattr__(self, "tau_var", tau_var)
        object.__setattr__(self, "phi", phi)


def stick_weights(v) -> np.ndarray:
    """Mixing weights from stick fractions: pi_t = v_t prod_{i<t} (1 - v_i).

    The last weight is the truncation remainder prod_i (1 - v_i), so the
    output has one more entry than ``v`` and sums to one.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(v <= 0) or np.any(v >= 1):
        raise ValueError("stick fractions must lie strictly inside (0, 1)")
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v)])
    return np.concatenate([v, [1.0]]) * remaining


def expected_log_sticks(gamma):
    """E[log v_t] and E[log(1 - v_t)] for q(v_t) = Beta(gamma_t1, gamma_t2)."""
    gamma = np.asarray(gamma, dtype=float).reshape(-1, 2)
    total = digamma(jnp.sum(gamma, axis=1))
    elog_v = digamma(gamma[:, 0]) - total
    elog_1mv = digamma(gamma[:, 1]) - total
    return np.asarray(elog_v), np.asarray(elog_1mv)


def _expected_log_pi(gamma, T):
    """E[log pi_t] for all T components, truncation remainder included (traceable)."""
    gamma = jnp.asarray(gamma).reshape(max(T - 1, 0), 2)
    total = digamma(jnp.sum(gamma, axis=1))
    elog_v = digamma(gamma[:, 0]) - total
    elog_1mv = digamma(gamma[:, 1]) - total
    preceding = jnp.concatenate([jnp.zeros(1), jnp.cumsum(elog_1mv)])
    return jnp.concatenate([elog_v, jnp.zeros(1)]) + preceding


def _data_expectations(s, tau_mean, tau_var, comp_var):
    """E_q[log N(s_j | eta_t, comp_var I)] for every pair (j, t) (traceable)."""
    s = jnp.asarray(s)
    tau_mean = jnp.asarray(tau_mean)
    N = s.shape[1]
    sq = jnp.sum((s[:, None, :] - tau_mean[None, :, :]) ** 2, axis=-1)
    return -0.5 * N * jnp.log(2.0 * jnp.pi * comp_var) - (
        sq + N * jnp.asarray(tau_var)[None, :]
    ) / (2.0 * comp_var)


def _gamma_logpdf(x, shape, rate):
    return shape * jnp.log(rate) - gammaln(shape) + (shape - 1.0) * jnp.log(x) - rate * x


def _elbo_terms(s, phi, entropy_z, gamma, tau_mean, tau_var, alpha, base_var,
                comp_var, priors: HyperPriors):
    """All bound terms as a dict of scalars (traceable).

    ``entropy_z`` is passed in because the two callers compute it differently:
    the public path from an explicit phi (which may contain exact zeros), the
    gradient path from logits.
    """
    s = jnp.asarray(s)
    phi = jnp.asarray(phi)
    tau_mean = jnp.asarray(tau_mean)
    tau_var = jnp.asarray(tau_var)
    T = tau_mean.shape[0]
    N = s.shape[1]
    gamma = jnp.asarray(gamma).reshape(max(T - 1, 0), 2)

    total = digamma(jnp.sum(gamma, axis=1))
    elog_v = digamma(gamma[:, 0]) - total
    elog_1mv = digamma(gamma[:, 1]) - total
    elog_pi = jnp.concatenate([elog_v, jnp.zeros(1)]) + jnp.concatenate(
        [jnp.zeros(1), jnp.cumsum(elog_1mv)]
    )

    # E_q[log p(v | alpha)] under Beta(1, alpha) sticks
    stick_prior = (T - 1) * (gammaln(1.0 + alpha) - gammaln(alpha)) + (
        alpha - 1.0
    ) * jnp.sum(elog_1mv)

    # E_q[log p(eta | base_var)] under the zero-mean Gaussian base distribution
    eta_prior = jnp.sum(
        -0.5 * N * jnp.log(2.0 * jnp.pi * base_var)
        - (jnp.sum(tau_mean**2, axis=1) + N * tau_var) / (2.0 * base_var)
    )

    assignment = jnp.sum(phi * elog_pi[None, :])
    data = jnp.sum(phi * _data_expectations(s, tau_mean, tau_var, comp_var))

    # entropies of the variational factors
    betaln_g = gammaln(gamma[:, 0]) + gammaln(gamma[:, 1]) - gammaln(jnp.sum(gamma, axis=1))
    entropy_v = jnp.sum(
        betaln_g
        - (gamma[:, 0] - 1.0) * digamma(gamma[:, 0])
        - (gamma[:, 1] - 1.0) * digamma(gamma[:, 1])
        + (jnp.sum(gamma, axis=1) - 2.0) * digamma(jnp.sum(gamma, axis=1))
    )
    entropy_eta = jnp.sum(0.5 * N * (jnp.log(2.0 * jnp.pi * tau_var) + 1.0))

    hyper_prior = _gamma_logpdf(alpha, *priors.alpha_gamma) + _gamma_logpdf(
        base_var, *priors.basevar_gamma
    )

    return {
        "stick_prior": stick_prior,
        "eta_prior": eta_prior,
        "assignment": assignment,
        "data": data,
        "entropy_v": entropy_v,
        "entropy_eta": entropy_eta,
        "entropy_z": entropy_z,
        "hyper_prior": hyper_prior,
    }


def elbo_terms(s, state: DPMMState, priors: HyperPriors = HyperPriors()):
    """Named bound terms for a concrete state (useful for diagnostics)."""
    s = np.asarray(s, dtype=float)
    entropy_z = -jnp.sum(xlogy(jnp.asarray(state.phi), jnp.asarray(state.phi)))
    terms = _elbo_terms(
        s, state.phi, entropy_z, state.gamma, state.tau_mean, state.tau_var,
        state.alpha, state.base_var, state.comp_var, priors,
    )
    return {k: float(v) for k, v in terms.items()}


def elbo(s, state: DPMMState, priors: HyperPriors = HyperPriors()) -> float:
    """Evidence lower bound on the aligned-sequence likelihood.

    Includes the Gamma log priors on alpha and base_var, since both enter the
    joint objective as point estimates.
    """
    return float(sum(elbo_terms(s, state, priors).values()))


def responsibilities(s, state: DPMMState) -> np.ndarray:
    """Closed-form optimal assignment probabilities given the other factors.

    phi_jt is proportional to exp(E[log pi_t] + E_q[log N(s_j | eta_t)]),
    normalized per row with log-sum-exp.
    """
    s = np.asarray(s, dtype=float)
    logits = _expected_log_pi(state.gamma, state.T)[None, :] + _data_expectations(
        s, state.tau_mean, state.tau_var, state.comp_var
    )
    logits = logits - jnp.max(logits, axis=1, keepdims=True)
    w = jnp.exp(logits)
    return np.asarray(w / jnp.sum(w, axis=1, keepdims=True))


def map_cluster_assignments(phi) -> np.ndarray:
    """Most responsible component per row; ties break toward the smaller index."""
    phi = np.asarray(phi, dtype=float)
    return np.argmax(phi, axis=1)


def effective_num_clusters(phi, threshold: float = 0.5) -> int:
    """Number of components whose total responsibility mass exceeds ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly inside (0, 1)")
    phi = np.asarray(phi, dtype=float)
    return int(np.sum(phi.sum(axis=0) > threshold))


def update_sticks(state: DPMMState) -> DPMMState:
    """Coordinate update of the Beta stick parameters."""
    counts = state.phi.sum(axis=0)
    tail = np.append(np.cumsum(counts[::-1])[::-1], 0.0)[1:]  # mass above t
    gamma = np.stack([1.0 + counts[:-1], state.alpha + tail[:-1]], axis=1)
    return replace(state, gamma=gamma)


def update_components(s, state: DPMMState) -> DPMMState:
    """Coordinate update of the Gaussian component posteriors."""
    s = np.asarray(s, dtype=float)
    counts = state.phi.sum(axis=0)
    precision = 1.0 / state.base_var + counts / state.comp_var
    tau_var = 1.0 / precision
    tau_mean = (state.phi.T @ s) / state.comp_var * tau_var[:, None]
    return replace(state, tau_mean=tau_mean, tau_var=tau_var)


def coordinate_ascent_step(s, state: DPMMState) -> DPMMState:
    """One sweep of closed-form updates: phi, then sticks, then components."""
    state = replace(state, phi=responsibilities(s, state))
    state = update_sticks(state)
    return update_components(s, state)
