# The two stochastic regimes around the deterministic flow.
#
# Anisotropic laws: the rescaled deviation Z = sqrt(lcap rho) (X - phi)
# converges to a linear SDE driven by sqrt(density) noise; psi_t Z_t is a
# martingale whose variance is the integrated profile int psi^2 h(phi).
#
# Uniform law: no drift at all; at arrival rate rho the tracked points
# become coalescing Brownian motions.
#
# Run:  python demos/fluctuations_and_coalescence.py   (~1 min)

from pathlib import Path

import numpy as np

from slitflow import (
    ConstantDiameter,
    MFoldAngles,
    coalescing_bm,
    fluctuation_paths,
    generate_event_log,
    limit_sde_ensemble,
    particle_stats,
)
from slitflow.output import render_flow_svg, write_series_csv

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# -- fluctuations around the 1-fold flow -----------------------------------
nu = MFoldAngles(1)
d, horizon, x0 = 0.005, 0.5, 0.2
z_finals = []
psi_T = var_T = None
for seed in range(40):
    log = generate_event_log(nu, ConstantDiameter(d), horizon, "poisson-lcap", seed)
    res = fluctuation_paths(log, nu, x0, horizon)
    z_finals.append(res.psi.values[-1] * res.z.values[-1])
    psi_T, var_T = res.psi.values[-1], res.variance_profile.values[-1]
    if seed == 0:
        write_series_csv(out / "z_path_example.csv", res.z.times, res.z.values)

grid, z_sde = limit_sde_ensemble(nu, 0.0, x0, horizon, seed=1, n_paths=4000)
print(f"discrete Var(psi_T Z_T) over 40 seeds : {np.var(z_finals):.4f}")
print(f"limit-SDE Var(psi_T Z_T), 4000 paths  : {np.var(psi_T * z_sde[:, -1]):.4f}")
print(f"variance profile int psi^2 h          : {var_T:.4f}")
print(f"scale sqrt(lcap rho) at d = {d}: "
      f"{np.sqrt(particle_stats(d).lcap * particle_stats(d).rho):.1f}")

# -- coalescing Brownian fan ------------------------------------------------
res = coalescing_bm(np.arange(16) / 16, 0.5, seed=7, step=5e-4)
render_flow_svg(out / "coalescing_fan.svg", res.times, res.values)
survivors = np.unique(np.round(res.values[:, -1], 12) % 1.0).size
print(f"coalescing fan: 16 starts -> {survivors} distinct paths at t = 0.5 "
      f"(see {out / 'coalescing_fan.svg'})")
