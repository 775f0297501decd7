"""
Tuning by random search on a validation split
=============================================

Each trial draws strengths and weights from the preset's search space,
fits on the training rows and scores on the validation rows.  The
search is seeded, so results do not depend on the number of workers.
"""

# %%
import numpy as np

from argen import SearchSpace, make_preset, random_search
from argen.simulate import center, gen_example

raw, scenario = gen_example(1, np.random.default_rng(0))
data = center(raw, raw.split == "train")
template = make_preset("ARGEN", scenario.p, scenario.fit_bounds())

# %%
space = SearchSpace(n_calls=200, seed=3)
best, trials = random_search(data, space, template)
print("best validation MSE", round(best.validation_mse, 4))
print("lambda1", best.config.lambda1, "lambda2", best.config.lambda2)

# %%
# The same search on three workers gives the same ranking.
best3, trials3 = random_search(data, space, template, jobs=3)
print("identical:", [t.validation_mse for t in trials] == [t.validation_mse for t in trials3])
