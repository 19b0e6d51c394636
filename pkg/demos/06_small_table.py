# %% [markdown]
# A cut-down table run: fewer trials and test points than the preset, same
# grid. The full version is `overparam table --preset table1 --out t1.csv`.

# %%
import io

from overparam import preset, run_experiment, verify_suite

print(verify_suite(0))

# %%
spec = preset("table1", trials=5, test_count=2000, master_seed=1)
report = run_experiment(spec)

print(f"{'n':>4} {'level':>8} {'optimizer':>15} {'acc%':>7} {'dist_mn':>10} {'normalized':>10} {'resid':>9}")
for r in report.rows:
    print(f"{r.n:4d} {r.level:8.5f} {r.optimizer:>15} {r.accuracy_pct:7.2f} "
          f"{r.median_dist_mn:10.3e} {r.median_dist_mn_normalized:10.4f} {r.median_train_residual:9.2e}")

# the CSV form is exact to 17 digits
print(io.StringIO(report.to_csv()).readline().strip())
