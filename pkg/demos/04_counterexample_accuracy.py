# %% [markdown]
# One draw of the sparse counterexample: the label sits in column 0, columns 1
# and 2 are shared by every row, the rest are private to a row. GD and the
# AdaGrad variant both fit or chase the same data but predict fresh points
# very differently.

# %%
import numpy as np

from overparam import (
    GeneratorSpec,
    Kind,
    Objective,
    OptimizerSpec,
    evaluate_accuracy,
    generate,
    min_norm_solution,
    run,
)

spec = GeneratorSpec("wilson-v1", n=20, p=7 / 8, level=1 / 16, seed=3)
data = generate(spec)
print("X shape", data.X.shape, " positives", int(np.sum(data.y > 0)))
print("first row nonzeros", np.flatnonzero(data.X[0]))

# %%
obj = Objective(data)
w_mn = min_norm_solution(data.X, data.y).w
for kind in (Kind.GD, Kind.ADAGRAD_VARIANT, Kind.ADAM):
    w = run(obj, OptimizerSpec(kind, K=3000)).iterates[-1]
    acc = evaluate_accuracy(w, spec, 10_000, seed=11)
    print(f"{kind.value:15s} acc {acc:6.2f}%  ||w - w_mn|| {np.linalg.norm(w - w_mn):.3e}"
          f"  w[0:3] {np.round(w[:3], 5)}")

# %% [markdown]
# The minimum-norm model puts more weight on the shared columns than
# level * w[0], so every fresh point scores positive and accuracy equals p.
# The variant's first step weights column 0 by 1/|X^T y|^3, which is huge
# because that entry is only n * level^2.
