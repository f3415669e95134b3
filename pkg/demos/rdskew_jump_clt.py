# Realized skewness under jumps, without noise.
#
# With one jump of size 1 at t = 0.5 and sigma = 0.3 the probability limit
# of the scaled statistic is 1 / 1.09^{3/2}.  The error shrinks like
# Delta^{1/2} and its rescaled law is mixed normal with variance computed
# from the path.

import math

import numpy as np

from realskew import harness as hn
from realskew import limitlaw as ll
from realskew.simkit import ConstantVol, JumpModel, ModelSpec, simulate_path

model = ModelSpec(vol=ConstantVol(0.3), jumps=JumpModel(fixed=((0.5, 1.0),)))
print("target skewness:", 1 / 1.09 ** 1.5)

cfg = hn.ExperimentConfig(
    scenario=hn.Scenario(model),
    delta_grid=(1e-2, 1e-3, 1e-4),
    n_reps=200,
    seed=7,
    checks=("consistency", "rate"),
)
report = hn.run_experiment(cfg)

for d, s in report.summaries.items():
    print(f"Delta = {float(d):.0e}: RMSE(skew) {s['rmse_skew_err']:.5f}  RMSE(RV) {s['rmse_rv_err']:.5f}")

for name, chk in report.checks.items():
    print(f"{name:12s} {'pass' if chk.passed else 'FAIL'}  {chk.value}")

# The KS check needs a few thousand replications to resolve a 0.05 distance
clt = hn.ExperimentConfig(scenario=hn.Scenario(model), delta_grid=(1e-3,), n_reps=2000, seed=8, checks=("clt_raw",))
chk = hn.run_experiment(clt).checks["clt_raw"]
print(f"clt_raw      {'pass' if chk.passed else 'FAIL'}  {chk.value}")

# The conditional variance at Delta = 1e-3 from the limit sampler directly
path = simulate_path(model, euler_step=1e-4, seed=0)
params = ll.params_from_path(path)
draws = ll.skew_limit_sample(params, 100_000, seed=1)
print("\nlimit-law variance by sampling:", draws.var())
print("closed form:                   ", ll.skew_conditional_variance(params))
print("scale for Delta = 1e-3:        ", math.sqrt(ll.skew_conditional_variance(params) * 1e-3))
