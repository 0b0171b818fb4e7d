"""Conformal slit-map aggregation toolkit.

Builds anisotropic Hastings-Levitov-type clusters by composing rotated slit
maps, solves the measure-driven Loewner evolution that describes their
scaling limit, and simulates the harmonic-measure boundary flow together
with its deterministic limit, Gaussian fluctuations, and coalescing
Brownian behaviour.
"""

from .conformal import (
    SlitParticle,
    eval_particle_inverse,
    eval_particle_map,
    gamma,
    gamma_tilde,
    lcap_of_slit,
    slit_of_lcap,
)
from .measures import (
    AngleMeasure,
    ConstantDiameter,
    DiameterLaw,
    IntervalAngles,
    MFoldAngles,
    TabulatedAngles,
    TabulatedDiameters,
    UniformAngles,
    beta_nu,
    density,
    drift_b,
    drift_b_prime,
    drift_field,
    hilbert_transform,
    particle_stats,
    rho_sigma,
    sample_angle,
)
from .loewner import (
    AbsorbedError,
    ConstantDensity,
    DegenerateDriftError,
    HullBoundary,
    PiecewisePointMass,
    Trajectory,
    equilibria,
    herglotz_integral,
    solve_circle_ode,
    solve_map_at_point,
    trace_hull,
)
from .cluster import (
    Cluster,
    EventLog,
    FingerHistogram,
    eval_cluster_map,
    finger_histogram,
    generate_event_log,
    trace_cluster_boundary,
)
from .flow import (
    FlowResult,
    FluctuationResult,
    coalescing_bm,
    correlation_b,
    flow_distance,
    flow_ensemble,
    fluctuation_paths,
    limit_sde_ensemble,
    ode_reference_flow,
    simulate_boundary_flow,
    simulate_limit_sde,
    uniform_marginal_ensemble,
    uniform_pair_ensemble,
)

__version__ = "0.1.0"
