# %% [markdown]
# Diagonal preconditioners change where descent ends up. A fixed D lands on
# D X^T (X D X^T)^{-1} y, which is the minimum-norm point only for D = cI.
# Recorded AdaGrad diagonals can be replayed through the unrolled product.

# %%
import numpy as np

from overparam import Dataset, Kind, Objective, OptimizerSpec, default_step_size, min_norm_solution, run
from overparam import closed_form as cf
from overparam.optimizers import preconditioner_ceiling

rng = np.random.default_rng(1)
X = rng.standard_normal((4, 12))
y = rng.standard_normal(4)
obj = Objective(Dataset(X, y))
w_mn = min_norm_solution(X, y).w

# %%
for D in (np.full(12, 3.0), np.linspace(0.2, 2.0, 12)):
    limit = cf.constant_D_limit_over(X, y, D)
    print("D range", D.min(), D.max(), " interpolates:", np.allclose(X @ limit, y),
          " distance to w_mn:", f"{np.linalg.norm(limit - w_mn):.3e}")

# %% [markdown]
# Replay: run AdaGrad, keep its D_k, and push them through the closed form for
# the training predictions.

# %%
spec = OptimizerSpec(Kind.ADAGRAD, J=5, epsilon=1e-2)
eta = 0.5 * default_step_size(obj) / preconditioner_ceiling(spec)
traj = run(obj, OptimizerSpec(Kind.ADAGRAD, J=5, epsilon=1e-2, eta=eta, K=80))
y_hat = cf.closed_form_prediction_over(X, y, eta, traj.preconditioners, 80)
print("replay gap", np.linalg.norm(y_hat - X @ traj.iterates[-1]))
print("AdaGrad distance to w_mn after 80 steps", np.linalg.norm(traj.iterates[-1] - w_mn))
