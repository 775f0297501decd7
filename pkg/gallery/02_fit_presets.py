"""
Bounded elastic-net fits and the named presets
==============================================

``fit`` solves the penalized least squares problem with box bounds on
the coefficients.  Presets fix parts of the configuration: ARLS has no
penalty, ARL only l1, ARR only the quadratic term, and so on.
"""

# %%
import numpy as np

from argen import Dataset, PRESETS, fit, make_preset

rng = np.random.default_rng(1)
X = rng.standard_normal((60, 5))
beta_true = np.array([2.0, -1.0, 0.0, 0.0, 0.5])
Y = X @ beta_true + 0.5 * rng.standard_normal(60)
data = Dataset(X, Y)
print("presets:", ", ".join(PRESETS))

# %%
# Unpenalized fit with a free box.
ls = fit(data, make_preset("ARLS", 5).config)
print("ARLS ", np.round(ls.beta, 3))

# %%
# An l1 penalty shrinks and zeros small coefficients.
lasso = fit(data, make_preset("ARL", 5).instantiate(lambda1=20.0))
print("ARL  ", np.round(lasso.beta, 3), "nonzeros", lasso.n_nonzero)

# %%
# Bounds are hard: here every coefficient is kept in [-0.5, 1].
box = make_preset("AREN", 5, (np.full(5, -0.5), np.ones(5)))
clipped = fit(data, box.instantiate(lambda1=2.0, lambda2=1.0))
print("AREN ", np.round(clipped.beta, 3))
