# The deterministic side of the story: hulls of the measure-driven Loewner
# evolution.  These are the shapes the random clusters converge to when the
# particle diameter shrinks (compare with demos/cluster_growth.py).
#
# Run:  python demos/loewner_hulls.py

from pathlib import Path

import numpy as np

from slitflow import (
    ConstantDensity,
    IntervalAngles,
    MFoldAngles,
    UniformAngles,
    lcap_of_slit,
    solve_map_at_point,
    trace_hull,
    eval_particle_map,
    PiecewisePointMass,
    SlitParticle,
)
from slitflow.output import render_svg

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

T = 0.5
for name, nu in [("uniform", UniformAngles()),
                 ("mfold3", MFoldAngles(3)),
                 ("interval_half", IntervalAngles(0.5))]:
    mu = ConstantDensity(nu)
    hull = trace_hull(mu, T, n_rays=512)
    render_svg(out / f"hull_{name}.svg", hull)
    print(f"{name:14s}: capacity {hull.capacity:.6f} (exact e^T = {np.exp(T):.6f})")

# growing family for the 3-fold driver
snaps = [trace_hull(ConstantDensity(MFoldAngles(3)), t, n_rays=384)
         for t in (0.125, 0.25, 0.375, 0.5)]
render_svg(out / "hull_growth_stages.svg", snaps)

# a constant point mass run for exactly lcap(d) reproduces the slit map;
# this is the bridge between the continuum solver and the discrete clusters
d = 0.5
mu = PiecewisePointMass([lcap_of_slit(d)], [0.0])
z = 2.0 + 1.0j
print("point-mass driver vs closed-form slit map at z = 2+1j:",
      abs(solve_map_at_point(mu, lcap_of_slit(d), z, step=1e-4)
          - eval_particle_map(SlitParticle(d), z)))
