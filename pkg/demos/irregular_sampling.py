# Observation times t_p = t_{p-1} + Delta G(t_{p-1}) eps_p.
#
# The intensity G rescales the local mesh.  Under noise it also enters the
# Gamma matrix, so the spread of the noisy skewness changes with G.

import numpy as np

from realskew import harness as hn
from realskew import limitlaw as ll
from realskew.kernels import kernel_constants, min_kernel
from realskew.simkit import (ConstantVol, GSpec, JumpModel, ModelSpec, NoiseModel, SamplingScheme,
                             generate_times, mesh_stats, simulate_path)

scheme = SamplingScheme(kind="restricted", g=GSpec(kind="sinusoid", value=1.5, amplitude=0.5, frequency=0.75))
st = generate_times(scheme, 1e-3, 1.0, seed=0)
grid = np.linspace(0, 1, 100_001)
print("observations:", st.n_count, "  expected about", round(np.mean(1 / scheme.intensity(grid)) / 1e-3))
for t in (0.25, 0.5, 1.0):
    r, n = mesh_stats(st, t)
    print(f"  up to t={t}: {n} points, largest gap {r:.2e}")

# A Poisson scheme for comparison
pois = generate_times(SamplingScheme(kind="poisson"), 1e-3, 1.0, seed=0)
gaps = np.diff(pois.times)
print("poisson mean gap", gaps.mean(), " cv", gaps.std() / gaps.mean())

# Gamma^c under the restricted scheme against the equidistant one
model = ModelSpec(vol=ConstantVol(0.3), jumps=JumpModel(fixed=((0.5, 1.0),)))
noise = NoiseModel(alpha=1e-4)
c = kernel_constants(min_kernel())
path = simulate_path(model, euler_step=1e-4, seed=1)
for sch in (SamplingScheme(), scheme):
    gam = ll.gamma_matrix(ll.params_from_path(path, noise=noise, scheme=sch), 1.0, c)
    print(f"{sch.kind:12s} Gamma^c {gam.gamma_c:.5f}  Gbar22 {gam.gbar22:.5f}")

# Monte Carlo ratio var / Gamma^c for the restricted scheme
cfg = hn.ExperimentConfig(scenario=hn.Scenario(ModelSpec(vol=ConstantVol(0.3)), scheme=scheme, noise=noise),
                          delta_grid=(1e-4,), n_reps=300, seed=5, checks=("clt_noisy",))
chk = hn.run_experiment(cfg).checks["clt_noisy"]
print(f"var(PRV error) / Gamma^c = {chk.value['prv_variance_ratio']:.3f} ({'pass' if chk.passed else 'FAIL'})")
