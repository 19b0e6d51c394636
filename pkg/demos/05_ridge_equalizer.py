# %% [markdown]
# With an l2 penalty the objective has a single minimizer, and every diagonal
# preconditioner that keeps its steps contracting reaches it.

# %%
import itertools

import numpy as np

from overparam import Dataset, Objective, ridge_solution, run
from overparam.experiments import equalizer_specs

rng = np.random.default_rng(4)
X = rng.standard_normal((5, 14))
y = rng.standard_normal(5)

for lam in (0.1, 1.0):
    obj = Objective(Dataset(X, y), lam)
    w_r = ridge_solution(X, y, lam).w
    finals = {}
    for spec in equalizer_specs(obj):
        finals[spec.label] = run(obj, spec).iterates[-1]
        rel = np.linalg.norm(finals[spec.label] - w_r) / np.linalg.norm(w_r)
        print(f"lam={lam}  {spec.label:15s} eta={spec.eta:.3e}  rel err {rel:.1e}")
    pair = max(np.linalg.norm(a - b) for a, b in itertools.combinations(finals.values(), 2))
    print("largest pairwise gap", f"{pair:.1e}")
