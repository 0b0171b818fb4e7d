"""Harmonic-measure boundary flow and its scaling limits.

When a particle arrives at angle theta, every boundary coordinate x (in the
harmonic-measure parametrisation of the cluster boundary) is displaced by
the inverse slit map's circle action:

    x  <-  theta + gamma(x - theta)  =  x + gamma_tilde(x - theta),

in lifted coordinates.  Running this update over an event log gives the
boundary flow X; tracked points never cross because gamma is monotone.

Scaling limits implemented alongside the discrete flow:

  * the deterministic flow phi' = b(phi) (drift from slitflow.measures),
    toward which X converges at arrival rate 1/lcap;
  * the fluctuation process Z = sqrt(lcap * rho) (X - phi), whose limit is
    the linear SDE dZ = sqrt(h(phi_t)) dB + b'(phi_t) Z dt;
  * coalescing Brownian motions on the circle, the limit of the uniform-law
    flow at arrival rate rho with rho * int gamma_tilde^2 = 1.

Monte Carlo ensembles are vectorised across replicas with one counter-based
stream per replica, so results do not depend on how work is scheduled.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from ._uniform import gamma_tilde_table, single_point_kernel, two_point_kernel
from .cluster import EventLog
from .conformal import SlitParticle, _gamma0_frac, gamma_tilde, lcap_of_slit
from .loewner import Trajectory, solve_circle_ode
from .measures import (
    AngleMeasure,
    DriftField,
    drift_field,
    particle_stats,
)
from scipy.integrate import quad

__all__ = [
    "FlowResult",
    "FluctuationResult",
    "simulate_boundary_flow",
    "ode_reference_flow",
    "fluctuation_paths",
    "simulate_limit_sde",
    "limit_sde_ensemble",
    "coalescing_bm",
    "correlation_b",
    "flow_distance",
    "flow_ensemble",
    "uniform_marginal_ensemble",
    "uniform_pair_ensemble",
]


@dataclass
class FlowResult:
    """Tracked-point trajectories on a common time grid.

    ``values[i, j]`` is the lifted position of tracked point i at
    ``times[j]``; ``starts`` holds the (s, x) launch pairs in the order the
    points were given (expected to be in increasing cyclic order when the
    segment measures are of interest).
    """

    times: np.ndarray
    values: np.ndarray
    starts: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_points(self):
        return self.values.shape[0]

    def trajectory(self, i):
        return Trajectory(self.times, self.values[i],
                          float(self.starts[i, 0]), float(self.starts[i, 1]))

    def omega(self):
        """Segment measures between cyclically consecutive tracked points.

        omega[k] = X(x_k) - X(x_{k-1}) with the wrap segment closed through
        x_last - 1; columns sum to 1 exactly for points launched in cyclic
        order (the flow preserves that order).
        """
        v = self.values
        out = np.empty_like(v)
        out[0] = v[0] - (v[-1] - 1.0)
        out[1:] = np.diff(v, axis=0)
        return out


def _normalise_starts(starts):
    arr = np.asarray(starts, dtype=float)
    if arr.ndim == 1:
        arr = np.stack([np.zeros_like(arr), arr], axis=1)
    elif arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("starts must be positions or (s, x) pairs")
    return arr


def simulate_boundary_flow(log: EventLog, starts, horizon=None, sample_times=None,
                           beta_compensation=0.0) -> FlowResult:
    """Run the event-driven boundary flow for a set of tracked points.

    Each tracked point is updated at every event after its start time and is
    constant between events.  ``sample_times`` selects the recording grid
    (default: all event times up to the horizon); the flow itself always
    processes every event.  ``beta_compensation`` subtracts a rotating-frame
    drift beta * (t - s) from the recorded values (off by default; only
    needed for asymmetric particles).
    """
    starts = _normalise_starts(starts)
    horizon = float(log.horizon if horizon is None else horizon)
    keep = log.times <= horizon
    times = log.times[keep]
    thetas = log.thetas[keep]
    diams = log.diameters[keep]
    bvals = ((1.0 + diams) + 1.0 / (1.0 + diams)) / 2.0

    if sample_times is None:
        sample_times = np.concatenate([[0.0], times])
    sample_times = np.asarray(sample_times, dtype=float)
    if np.any(np.diff(sample_times) < 0):
        raise ValueError("sample times must be non-decreasing")

    s_arr = starts[:, 0]
    x = starts[:, 1].astype(float).copy()
    n_cp = sample_times.size
    out = np.empty((starts.shape[0], n_cp))
    jptr = 0

    for i in range(times.size):
        t_i = times[i]
        while jptr < n_cp and sample_times[jptr] < t_i:
            out[:, jptr] = x
            jptr += 1
        active = t_i > s_arr
        u = (x - thetas[i]) % 1.0
        incr = _gamma0_frac(bvals[i], u) - u
        x = np.where(active, x + incr, x)
    while jptr < n_cp:
        out[:, jptr] = x
        jptr += 1

    if beta_compensation:
        elapsed = np.maximum(sample_times[None, :] - s_arr[:, None], 0.0)
        out = out - beta_compensation * elapsed
    return FlowResult(times=sample_times, values=out, starts=starts,
                      meta={"seed": log.seed, "convention": log.convention,
                            "rate": log.rate, "beta": beta_compensation})


def ode_reference_flow(nu: AngleMeasure, c0, starts, horizon, step=1e-3) -> FlowResult:
    """Deterministic reference flow phi' = b(phi) per tracked point,
    resampled onto the uniform grid s + k*step."""
    starts = _normalise_starts(starts)
    drift = drift_field(nu, c0)
    s0 = float(np.min(starts[:, 0]))
    grid = s0 + step * np.arange(int(round((horizon - s0) / step)) + 1)
    vals = np.empty((starts.shape[0], grid.size))
    for i, (s, x) in enumerate(starts):
        traj = solve_circle_ode(drift.b, x, s, horizon, step)
        vals[i] = np.where(grid < s, x, np.interp(grid, traj.times, traj.values))
    return FlowResult(times=grid, values=vals, starts=starts,
                      meta={"c0": float(c0), "nu": repr(nu)})


# ---------------------------------------------------------------------------
# fluctuations


@dataclass
class FluctuationResult:
    """Rescaled deviation of the discrete flow from its deterministic limit."""

    z: Trajectory                 # Z_t = sqrt(lcap * rho) (X_t - phi_t)
    phi: Trajectory               # deterministic flow
    psi: Trajectory               # psi' = -b'(phi) psi, psi(s) = 1
    variance_profile: Trajectory  # int_s^t psi^2 h(phi) du
    scale: float
    stats: object


def _ode_with_variance(drift: DriftField, nu: AngleMeasure, x0, grid):
    """Jointly integrate phi, psi and the variance profile on a fixed grid."""
    n = grid.size
    phi = np.empty(n)
    psi = np.empty(n)
    var = np.empty(n)
    state = np.array([float(x0), 1.0, 0.0])

    def rhs(y):
        p, q, _ = y
        return np.array([drift.b(p), -drift.b_prime(p) * q,
                         q * q * nu.density(p)])

    phi[0], psi[0], var[0] = state
    for j in range(n - 1):
        dt = grid[j + 1] - grid[j]
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        phi[j + 1], psi[j + 1], var[j + 1] = state
    return phi, psi, var


def fluctuation_paths(log: EventLog, nu: AngleMeasure, start, horizon,
                      step=1e-3, c0=None) -> FluctuationResult:
    """Discrete fluctuation path Z = sqrt(lcap rho) (X - phi) along one start.

    Needs a constant-diameter log (the scaling constants are per particle).
    ``c0`` defaults to the particle's own normalised mean shift, which is
    zero for the symmetric slit.
    """
    if np.unique(log.diameters).size > 1:
        raise ValueError("fluctuation scaling requires a constant-diameter log")
    s, x = (0.0, float(start)) if np.isscalar(start) else map(float, start)
    stats = particle_stats(float(log.diameters[0]))
    if c0 is None:
        c0 = stats.c0_hat
    scale = math.sqrt(stats.lcap * stats.rho)

    grid = s + step * np.arange(int(round((horizon - s) / step)) + 1)
    xres = simulate_boundary_flow(log, [(s, x)], horizon, sample_times=grid)
    drift = drift_field(nu, c0)
    phi, psi, var = _ode_with_variance(drift, nu, x, grid)
    z = scale * (xres.values[0] - phi)
    return FluctuationResult(
        z=Trajectory(grid, z, s, 0.0),
        phi=Trajectory(grid, phi, s, x),
        psi=Trajectory(grid, psi, s, 1.0),
        variance_profile=Trajectory(grid, var, s, 0.0),
        scale=scale,
        stats=stats,
    )


def limit_sde_ensemble(nu: AngleMeasure, c0, start, horizon, seed, step=1e-3,
                       n_paths=1):
    """Euler-Maruyama paths of dZ = sqrt(h(phi_t)) dB + b'(phi_t) Z dt, Z_s = 0.

    The deterministic carrier phi is integrated once; the Gaussian
    increments come from the seeded noise stream.  Returns (times, values)
    with values of shape (n_paths, n_times).
    """
    s, x = (0.0, float(start)) if np.isscalar(start) else map(float, start)
    drift = drift_field(nu, c0)
    grid = s + step * np.arange(int(round((horizon - s) / step)) + 1)
    phi_traj = solve_circle_ode(drift.b, x, s, horizon, step)
    phi = np.interp(grid, phi_traj.times, phi_traj.values)
    bp = np.asarray(drift.b_prime(phi), dtype=float)
    diff = np.sqrt(np.maximum(np.asarray(nu.density(phi), dtype=float), 0.0))

    rng = rngmod.stream(seed, rngmod.CHANNEL_NOISE)
    z = np.zeros((n_paths, grid.size))
    for j in range(grid.size - 1):
        dt = grid[j + 1] - grid[j]
        dw = rng.standard_normal(n_paths) * math.sqrt(dt)
        z[:, j + 1] = z[:, j] + bp[j] * z[:, j] * dt + diff[j] * dw
    return grid, z


def simulate_limit_sde(nu: AngleMeasure, c0, start, horizon, seed, step=1e-3) -> Trajectory:
    """Single path of the limiting fluctuation SDE (see limit_sde_ensemble)."""
    grid, z = limit_sde_ensemble(nu, c0, start, horizon, seed, step, n_paths=1)
    s = grid[0]
    return Trajectory(grid, z[0], float(s), 0.0)


# ---------------------------------------------------------------------------
# coalescing Brownian motions


def coalescing_bm(starts, horizon, seed, step=1e-3) -> FlowResult:
    """Coalescing Brownian motions on the circle from distinct start points.

    Each path consumes its own increment stream until it crosses a
    neighbour within a step; crossed paths are set to their midpoint and
    share the surviving root's stream afterwards (coalescence is exact for
    ordered one-dimensional paths; no epsilon threshold).  Start positions
    must be given in increasing cyclic order on the lift.
    """
    x0 = np.asarray(starts, dtype=float)
    n = x0.size
    if n == 0:
        raise ValueError("need at least one start point")
    if np.unique(x0 % 1.0).size != n:
        raise ValueError("start points must be distinct on the circle")
    if np.any(np.diff(x0) <= 0) or (x0[-1] - x0[0]) >= 1.0:
        raise ValueError("starts must be increasing within one period")

    rng = rngmod.stream(seed, rngmod.CHANNEL_NOISE)
    n_steps = int(round(horizon / step))
    times = step * np.arange(n_steps + 1)
    vals = np.empty((n, n_steps + 1))
    vals[:, 0] = x0

    rep = np.arange(n)          # root path index per tracked point
    canon = x0.copy()           # canonical value per root
    off = np.zeros(n)           # integer sheet offset: value = canon[rep] + off
    sqdt = math.sqrt(step)

    for j in range(1, n_steps + 1):
        dw = rng.standard_normal(n) * sqdt
        roots = np.unique(rep)
        canon[roots] += dw[roots]
        # adjacent merges, including the wrap pair (last, first + 1)
        merged = True
        while merged:
            merged = False
            cur = canon[rep] + off
            for i in range(n):
                k = (i + 1) % n
                wrap = 1.0 if k == 0 else 0.0
                ri, rk = rep[i], rep[k]
                if ri == rk:
                    continue  # same circle path already (wrap gap is exactly 1)
                vi = cur[i]
                vk = cur[k] + wrap
                if vk <= vi:
                    m = 0.5 * (vi + vk)
                    # group i moves to m on member i's sheet ...
                    canon[ri] = m - off[i]
                    # ... and group k lands on the same circle path, keeping
                    # each member's integer sheet relative to member k
                    members = np.nonzero(rep == rk)[0]
                    off[members] = (m - wrap) + (cur[members] - cur[k]) - canon[ri]
                    rep[members] = ri
                    merged = True
                    break
        vals[:, j] = canon[rep] + off
    starts_arr = np.stack([np.zeros(n), x0], axis=1)
    return FlowResult(times=times, values=vals, starts=starts_arr,
                      meta={"seed": seed, "kind": "coalescing-bm"})


# ---------------------------------------------------------------------------
# diagnostics


def correlation_b(x, xp, p, nu: AngleMeasure | None = None) -> float:
    """Two-point displacement correlation b(x, x') = rho * int gt(x-z) gt(x'-z) w(z) dz.

    ``w`` is 1 for the uniform law (the martingale-bracket normalisation,
    b(x, x) = 1 exactly) and the density h_nu otherwise.
    """
    base = p if isinstance(p, SlitParticle) else SlitParticle(float(p))
    stats = particle_stats(base.d)
    fx = float(x) % 1.0
    fxp = float(xp) % 1.0
    inner = min(10.0 * base.d, 0.2)
    pts = set()
    for c in (fx, fxp):
        for t in (c - inner, c, c + inner):
            t %= 1.0
            if 1e-12 < t < 1.0 - 1e-12:
                pts.add(t)

    def integrand(z):
        val = gamma_tilde(base, x - z) * gamma_tilde(base, xp - z)
        if nu is not None:
            val *= nu.density(z)
        return val

    val, _ = quad(integrand, 0.0, 1.0, points=sorted(pts), limit=300,
                  epsabs=1e-16, epsrel=1e-11)
    return stats.rho * val


def flow_distance(a: FlowResult, b: FlowResult) -> float:
    """Sup over tracked points and shared times of the lifted difference.

    A computable surrogate for flow distance with the time change fixed to
    the identity; trajectories are aligned by linear interpolation onto the
    union of sample grids over the common time window.
    """
    if a.starts.shape != b.starts.shape or not np.allclose(a.starts, b.starts):
        raise ValueError("flow_distance needs identical tracked start points")
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if hi < lo:
        raise ValueError("no overlapping time window")
    grid = np.union1d(a.times, b.times)
    grid = grid[(grid >= lo) & (grid <= hi)]
    sup = 0.0
    for i in range(a.n_points):
        va = np.interp(grid, a.times, a.values[i])
        vb = np.interp(grid, b.times, b.values[i])
        sup = max(sup, float(np.max(np.abs(va - vb))))
    return sup


# ---------------------------------------------------------------------------
# Monte Carlo ensembles


def _resolve_rate(convention, d, rate):
    if rate is not None:
        return float(rate)
    if convention == "poisson-lcap":
        return 1.0 / lcap_of_slit(d)
    if convention == "poisson-rho":
        return particle_stats(d).rho
    raise ValueError(f"cannot resolve a rate for convention {convention!r}")


def flow_ensemble(nu: AngleMeasure, d, horizon, n_replicas, seed, x0,
                  sample_times, convention="poisson-lcap", rate=None,
                  chunk=2048):
    """Boundary-flow ensemble: one event sequence per replica, constant
    diameter, vectorised across replicas and tracked points.

    Returns (sample_times, values) with values of shape
    (n_replicas, n_points, n_samples).  Replica r draws its arrival times
    and angles from its own substreams, so the result is independent of
    scheduling and of ``chunk``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    sample_times = np.asarray(sample_times, dtype=float)
    n_pts = x0.size
    n_cp = sample_times.size
    d = float(d)
    bval = ((1.0 + d) + 1.0 / (1.0 + d)) / 2.0
    lc = lcap_of_slit(d)

    deterministic = convention == "deterministic"
    if not deterministic:
        rate = _resolve_rate(convention, d, rate)

    x = np.tile(x0, (n_replicas, 1))
    out = np.empty((n_replicas, n_pts, n_cp))
    jptr = np.zeros(n_replicas, dtype=int)
    t_last = np.zeros(n_replicas)
    alive = np.ones(n_replicas, dtype=bool)

    time_rngs = [rngmod.replica_stream(seed, r, rngmod.CHANNEL_TIMES)
                 for r in range(n_replicas)]
    angle_rngs = [rngmod.replica_stream(seed, r, rngmod.CHANNEL_ANGLES)
                  for r in range(n_replicas)]

    def flush_until(t_evt, state):
        # record state into every pending sample slot earlier than the next event
        while True:
            nxt = np.where(jptr < n_cp, sample_times[np.minimum(jptr, n_cp - 1)], np.inf)
            todo = nxt < t_evt
            if not todo.any():
                return
            idx = np.nonzero(todo)[0]
            out[idx, :, jptr[idx]] = state[idx]
            jptr[idx] += 1

    while alive.any():
        if deterministic:
            gaps = np.full((n_replicas, chunk), lc)
        else:
            gaps = np.empty((n_replicas, chunk))
            for r in range(n_replicas):
                gaps[r] = time_rngs[r].exponential(1.0 / rate, chunk)
        ev_times = t_last[:, None] + np.cumsum(gaps, axis=1)
        u01 = np.empty((n_replicas, chunk))
        for r in range(n_replicas):
            u01[r] = angle_rngs[r].random(chunk)
        thetas = nu._inverse_cdf(u01)

        for c in range(chunk):
            t_evt = ev_times[:, c]
            flush_until(t_evt, x)
            act = (t_evt <= horizon)
            if not act.any():
                continue
            u = (x - thetas[:, c][:, None]) % 1.0
            incr = _gamma0_frac(bval, u) - u
            x = x + incr * act[:, None]
        t_last = ev_times[:, -1]
        alive = t_last <= horizon

    # remaining samples see the final state
    for r in range(n_replicas):
        if jptr[r] < n_cp:
            out[r, :, jptr[r]:] = x[r][:, None]
    return sample_times, out


def uniform_marginal_ensemble(d, horizon_times, n_replicas, seed, x0=0.0,
                              rate=None, n_cells=16384):
    """Single-point uniform-law flow at rate rho(P), recorded at checkpoints.

    The uniform law admits no vectorisation across a replica (every event
    moves the point), so the per-replica event loops run compiled; see
    slitflow._uniform.  Returns (checkpoint_times, values (R, n_cp)).
    """
    cps = np.asarray(horizon_times, dtype=float)
    if np.any(np.diff(cps) <= 0) or cps[0] <= 0:
        raise ValueError("checkpoint times must be positive and increasing")
    if rate is None:
        rate = particle_stats(d).rho
    rng = rngmod.stream(seed, rngmod.CHANNEL_TIMES)
    lam = np.diff(np.concatenate([[0.0], cps])) * rate
    counts = np.cumsum(rng.poisson(lam, size=(n_replicas, cps.size)), axis=1)
    seeds = rngmod.stream(seed, rngmod.CHANNEL_NOISE).integers(
        0, 2**64, n_replicas, dtype=np.uint64)
    table = gamma_tilde_table(d, n_cells)
    vals = single_point_kernel(seeds, counts.astype(np.int64), table, float(x0))
    return cps, vals


def uniform_pair_ensemble(d, horizon_times, n_replicas, seed, x1, x2,
                          rate=None, n_cells=16384):
    """Two tracked points under the same uniform-law event sequences.

    Returns (checkpoint_times, values (R, n_cp, 2)).
    """
    cps = np.asarray(horizon_times, dtype=float)
    if rate is None:
        rate = particle_stats(d).rho
    rng = rngmod.stream(seed, rngmod.CHANNEL_TIMES)
    lam = np.diff(np.concatenate([[0.0], cps])) * rate
    counts = np.cumsum(rng.poisson(lam, size=(n_replicas, cps.size)), axis=1)
    seeds = rngmod.stream(seed, rngmod.CHANNEL_NOISE).integers(
        0, 2**64, n_replicas, dtype=np.uint64)
    table = gamma_tilde_table(d, n_cells)
    vals = two_point_kernel(seeds, counts.astype(np.int64), table,
                            float(x1), float(x2))
    return cps, vals
