# %% [markdown]
# The squared-window AdaGrad variant can be pinned to a single ray. When
# X Q^{-1} sign(X^T y) is a multiple of y, with Q = diag(|X^T y|^3), every
# iterate points the same way.

# %%
import numpy as np

from overparam import Dataset, Kind, Objective, OptimizerSpec, adagrad_variant_fixed_point, run
from overparam.solutions import angular_distance

y = np.array([1.0, -1.0, 1.0, 1.0, -1.0])
X = np.eye(5)
ref = adagrad_variant_fixed_point(X, y)
print("direction", ref.w, " scale", ref.scale)

traj = run(Objective(Dataset(X, y)), OptimizerSpec(Kind.ADAGRAD_VARIANT, K=300))
angles = [angular_distance(w, ref.w) for w in traj.iterates[1:]]
print("largest angle to the ray over 300 steps:", max(angles))

# %% [markdown]
# Unequal magnitudes break the collinearity and the check says so.

# %%
na = adagrad_variant_fixed_point(np.eye(2), np.array([1.0, 2.0]))
print(bool(na), na.reason, f"cross residual {na.cross_residual:.3f}")
