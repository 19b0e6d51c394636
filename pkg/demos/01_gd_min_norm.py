# %% [markdown]
# Plain gradient descent from zero on a wide least-squares problem ends at the
# minimum-norm interpolant. The unrolled closed form tracks every iterate.

# %%
import numpy as np

from overparam import Dataset, Kind, Objective, OptimizerSpec, default_step_size, min_norm_solution, run
from overparam import closed_form as cf

rng = np.random.default_rng(0)
X = rng.standard_normal((5, 20))
y = rng.standard_normal(5)
obj = Objective(Dataset(X, y))

eta = default_step_size(obj)  # 1 / lambda_max(X X^T)
print("step size", eta)

# %%
traj = run(obj, OptimizerSpec(Kind.GD, eta=eta, K=2000))
w_mn = min_norm_solution(X, y).w

for k in (1, 10, 100, 1000, 2000):
    w_k = traj.iterates[k]
    closed = cf.closed_form_gd_over(X, y, eta, k)
    print(f"k={k:5d}  ||w_k - w_mn|| = {np.linalg.norm(w_k - w_mn):.3e}"
          f"  closed-form gap = {np.linalg.norm(w_k - closed):.1e}")

# %% [markdown]
# Any other interpolant is longer: add a null-space direction and compare.

# %%
_, _, Vt = np.linalg.svd(X)
other = w_mn + 0.3 * Vt[-1]
print("residual of other interpolant", np.linalg.norm(X @ other - y))
print("norms: w_mn", np.linalg.norm(w_mn), " other", np.linalg.norm(other))
