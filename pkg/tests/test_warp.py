import numpy as np
import pytest
import jax
import jax.numpy as jnp
from scipy.stats import multivariate_normal

from dpalign.kernels import KernelParams
from dpalign.warp import (
    WarpState,
    aux_total_variation,
    warp_from_aux,
    warp_log_prior,
    warp_points,
)


class TestWarpFromAux:
    def test_constant_aux_gives_even_grid(self):
        np.testing.assert_allclose(
            warp_from_aux(np.zeros(5)), [-1.0, -0.5, 0.0, 0.5, 1.0], atol=1e-14
        )

    def test_hand_example(self):
        G = warp_from_aux(np.array([0.0, np.log(2.0), 0.0]))
        np.testing.assert_allclose(G, [-1.0, 1.0 / 3.0, 1.0], atol=1e-14)

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            u = rng.normal(0, 1.5, 12)
            np.testing.assert_allclose(
                warp_from_aux(u), warp_from_aux(u + 3.7), atol=1e-12
            )

    def test_strictly_increasing_with_exact_endpoints(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = int(rng.integers(2, 40))
            u = rng.normal(0, 2.0, n)
            G = warp_from_aux(u)
            assert G[0] == -1.0
            assert G[-1] == 1.0
            assert np.all(np.diff(G) > 0)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            warp_from_aux([0.0])
        with pytest.raises(ValueError):
            warp_from_aux([0.0, np.inf])


class TestWarpLogPrior:
    def test_sign_symmetry(self):
        rng = np.random.default_rng(2)
        x = np.linspace(-1, 1, 8)
        omega = KernelParams("se", 0.5, 1.2)
        for _ in range(10):
            G = np.sort(rng.uniform(-1, 1, 8))
            assert warp_log_prior(G, x, omega) == pytest.approx(
                warp_log_prior(-G, x, omega), abs=1e-9
            )

    def test_univariate_closed_form(self):
        omega = KernelParams("se", 1.0, 2.0)
        noise = 1e-4
        v = 2.0 + noise
        g = 0.8
        expected = -0.5 * np.log(2 * np.pi * v) - g**2 / (2 * v)
        assert warp_log_prior([g], [0.3], omega, noise) == pytest.approx(expected, abs=1e-12)

    def test_matches_dense_mvn_oracle(self):
        rng = np.random.default_rng(3)
        x = np.linspace(-1, 1, 5)
        for _ in range(20):
            omega = KernelParams("se", float(rng.uniform(0.3, 2.0)),
                                 float(rng.uniform(0.5, 2.0)))
            G = np.sort(rng.uniform(-1, 1, 5))
            cov = np.asarray(
                [[float(omega.variance * np.exp(-0.5 * ((a - b) / omega.lengthscale) ** 2))
                  for b in x] for a in x]
            ) + 1e-4 * np.eye(5)
            ref = multivariate_normal(mean=np.zeros(5), cov=cov).logpdf(G)
            assert warp_log_prior(G, x, omega, 1e-4) == pytest.approx(ref, abs=1e-8)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            warp_log_prior([0.0, 1.0], [0.0], KernelParams())


class TestAuxTotalVariation:
    def test_constant_is_zero(self):
        assert aux_total_variation(np.full(7, 2.3)) == 0.0

    def test_hand_sum(self):
        assert aux_total_variation([0.0, 1.0, 3.0]) == 3.0

    def test_reversal_invariant_but_permutation_not(self):
        u = np.array([0.0, 3.0, 1.0])
        assert aux_total_variation(u[::-1]) == aux_total_variation(u)
        assert aux_total_variation([3.0, 0.0, 1.0]) != aux_total_variation(u)


class TestGradients:
    def test_warp_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        u = rng.normal(0, 1, 6)
        jac = np.asarray(jax.jacobian(warp_points)(jnp.asarray(u)))
        h = 1e-5
        for k in range(6):
            up, um = u.copy(), u.copy()
            up[k] += h
            um[k] -= h
            fd = (warp_from_aux(up) - warp_from_aux(um)) / (2 * h)
            scale = max(1.0, np.max(np.abs(fd)))
            assert np.max(np.abs(jac[:, k] - fd)) / scale < 1e-5

    def test_warp_log_prior_gradient_matches_finite_differences(self):
        from dpalign.kernels import gram

        rng = np.random.default_rng(5)
        x = jnp.linspace(-1, 1, 6)
        omega = KernelParams("se", 0.6, 1.1)
        cov = gram(omega.family, omega.lengthscale, omega.variance, x, x) + 1e-4 * jnp.eye(6)

        def logp(u):
            from dpalign.kernels import logpdf_from_chol

            L = jnp.linalg.cholesky(cov)
            return logpdf_from_chol(L, warp_points(u))

        u = rng.normal(0, 1, 6)
        an = np.asarray(jax.grad(logp)(jnp.asarray(u)))
        h = 1e-5
        fd = np.empty(6)
        for k in range(6):
            up, um = u.copy(), u.copy()
            up[k] += h
            um[k] -= h
            fd[k] = (float(logp(jnp.asarray(up))) - float(logp(jnp.asarray(um)))) / (2 * h)
        scale = max(1.0, np.max(np.abs(fd)))
        assert np.max(np.abs(an - fd)) / scale < 1e-5


def test_warp_state_validation():
    WarpState(np.zeros(3))
    with pytest.raises(ValueError):
        WarpState(np.zeros(1))
    with pytest.raises(ValueError):
        WarpState(np.array([0.0, np.nan]))
    st = WarpState(np.zeros(3))
    with pytest.raises(ValueError):
        st.u[0] = 1.0  # frozen array
