"""Process-wide numeric configuration.

Importing this module switches JAX to double precision.  Every module in the
package imports it before touching ``jax.numpy`` so that all covariance and
objective arithmetic runs in float64.
"""

import jax

jax.config.update("jax_enable_x64", True)
