import numpy as np
import pytest

from slitflow import (
    Cluster,
    ConstantDiameter,
    EventLog,
    IntervalAngles,
    MFoldAngles,
    SlitParticle,
    UniformAngles,
    beta_nu,
    coalescing_bm,
    correlation_b,
    flow_distance,
    flow_ensemble,
    fluctuation_paths,
    gamma_tilde,
    generate_event_log,
    limit_sde_ensemble,
    ode_reference_flow,
    particle_stats,
    simulate_boundary_flow,
    simulate_limit_sde,
    trace_cluster_boundary,
)
from slitflow import rng as rngmod
from slitflow._uniform import (
    gamma_tilde_table,
    single_point_kernel,
    single_point_kernel_reference,
)
from slitflow.flow import uniform_marginal_ensemble, uniform_pair_ensemble
from wos import segment_hit_fractions


def small_log(seed=0, nu=None, d=0.1, horizon=0.3):
    nu = nu or UniformAngles()
    return generate_event_log(nu, ConstantDiameter(d), horizon, "deterministic", seed)


class TestBoundaryFlow:
    def test_empty_log(self):
        log = EventLog(np.empty(0), np.empty(0), np.empty(0), "deterministic", 0, 1.0)
        res = simulate_boundary_flow(log, [0.1, 0.6], horizon=1.0,
                                     sample_times=np.linspace(0, 1, 5))
        assert np.all(res.values[0] == 0.1)
        assert np.all(res.values[1] == 0.6)

    def test_attachment_point_fixed(self):
        log = EventLog(np.array([0.5]), np.array([0.37]), np.array([0.2]),
                       "deterministic", 0, 1.0)
        res = simulate_boundary_flow(log, [0.37], horizon=1.0)
        assert np.all(res.values == 0.37)

    def test_start_time_respected(self):
        log = EventLog(np.array([0.2, 0.6]), np.array([0.9, 0.9]),
                       np.array([0.3, 0.3]), "deterministic", 0, 1.0)
        res = simulate_boundary_flow(log, [(0.4, 0.5)], horizon=1.0,
                                     sample_times=np.array([0.0, 0.3, 1.0]))
        assert res.values[0, 0] == 0.5        # frozen before start
        assert res.values[0, 1] == 0.5        # first event precedes the start
        assert res.values[0, 2] != 0.5        # second event moves it

    def test_order_preserved_and_jump_bound(self):
        log = small_log(seed=3, nu=MFoldAngles(2), d=0.15, horizon=0.4)
        starts = np.sort(np.random.default_rng(0).random(12))
        res = simulate_boundary_flow(log, starts)
        assert np.all(np.diff(res.values, axis=0) >= 0)          # cyclic order
        sup = np.max(np.abs(gamma_tilde(SlitParticle(0.15),
                                        np.linspace(1e-9, 1 - 1e-9, 4001))))
        jumps = np.abs(np.diff(res.values, axis=1))
        assert np.max(jumps) <= sup * (1 + 1e-9)                 # lifted continuity

    def test_omega_sums_to_one(self):
        log = small_log(seed=5, d=0.12, horizon=0.4)
        starts = np.arange(8) / 8
        res = simulate_boundary_flow(log, starts)
        om = res.omega()
        assert om.shape == res.values.shape
        assert np.max(np.abs(om.sum(axis=0) - 1.0)) <= 1e-12
        assert np.all(om >= 0)

    def test_beta_compensation(self):
        log = small_log(seed=2, d=0.2, horizon=0.2)
        grid = np.linspace(0, 0.2, 6)
        plain = simulate_boundary_flow(log, [0.3], sample_times=grid)
        comp = simulate_boundary_flow(log, [0.3], sample_times=grid,
                                      beta_compensation=0.5)
        assert np.allclose(comp.values, plain.values - 0.5 * grid, atol=1e-14)


class TestOdeReference:
    def test_uniform_constant_segments(self):
        res = ode_reference_flow(UniformAngles(), 0.0, np.arange(6) / 6, 1.0)
        om = res.omega()
        assert np.allclose(om, om[:, :1], atol=1e-14)

    def test_mfold_equilibria_constant(self):
        m = 2
        starts = np.arange(2 * m) / (2 * m)
        res = ode_reference_flow(MFoldAngles(m), 0.0, starts, 1.5)
        assert np.allclose(res.values, res.values[:, :1], atol=1e-10)

    def test_mfold_segment_collapse(self):
        # the endpoints flee the unstable point 1/2 toward the stable points
        # 0 and 1, so the arc (1/4 -> 3/4) through 1/2 absorbs everything
        res = ode_reference_flow(MFoldAngles(1), 0.0, [0.25, 0.75], 8.0)
        om = res.omega()[1]  # segment (1/4 -> 3/4)
        late = om[res.times > 1.0]
        assert np.all(np.diff(late) >= -1e-12)  # monotone after t = 1
        assert om[-1] >= 0.95
        assert abs((1.0 - om[-1]) - res.omega()[0][-1]) <= 1e-12


class TestFluctuations:
    def test_initial_conditions_exact(self):
        log = small_log(seed=1, nu=MFoldAngles(1), d=0.05, horizon=0.2)
        res = fluctuation_paths(log, MFoldAngles(1), 0.2, 0.2)
        assert res.z.values[0] == 0.0
        assert res.psi.values[0] == 1.0
        assert res.variance_profile.values[0] == 0.0
        assert np.all(np.diff(res.variance_profile.values) >= 0)

    def test_mixed_diameters_rejected(self):
        log = EventLog(np.array([0.1, 0.2]), np.array([0.3, 0.4]),
                       np.array([0.1, 0.2]), "deterministic", 0, 0.3)
        with pytest.raises(ValueError):
            fluctuation_paths(log, UniformAngles(), 0.1, 0.3)

    def test_off_support_quiet_zone(self):
        # off the attachment support the limit fluctuation vanishes; the
        # discrete Z must stay inside a band derived from the drift bias and
        # the (tiny) off-support martingale variance
        from scipy.integrate import quad
        from slitflow import drift_b
        nu = IntervalAngles(0.5)
        d, T, x0 = 0.01, 0.3, 0.8
        stats = particle_stats(d)
        scale = np.sqrt(stats.lcap * stats.rho)
        p = SlitParticle(d)
        sups = []
        phi = None
        for seed in range(5):
            log = generate_event_log(nu, ConstantDiameter(d), T, "poisson-lcap", seed)
            res = fluctuation_paths(log, nu, x0, T)
            sups.append(np.max(np.abs(res.z.values)))
            phi = res.phi.values
        bias = max(abs(beta_nu(nu, p, x) / stats.lcap - drift_b(nu, 0.0, x))
                   for x in np.linspace(phi.min(), phi.max(), 9))
        x_mid = 0.5 * (phi.min() + phi.max())
        v, _ = quad(lambda z: nu.density(z) * gamma_tilde(p, x_mid - z) ** 2,
                    0.0, 0.5, limit=200)
        band = scale * (T * bias + 3 * np.sqrt(v / stats.lcap * T))
        assert max(sups) <= band

    def test_variance_light(self):
        # Var(psi_T Z_T) ~ int psi^2 h along phi; light Monte Carlo version
        nu = MFoldAngles(1)
        d, T, n_rep = 0.01, 0.3, 120
        stats = particle_stats(d)
        _, vals = flow_ensemble(nu, d, T, n_rep, seed=42, x0=[0.2],
                                sample_times=np.array([T]),
                                convention="poisson-lcap")
        ref = fluctuation_paths(
            small_log(seed=0, nu=nu, d=d, horizon=T), nu, 0.2, T)
        psi_T = ref.psi.values[-1]
        target = ref.variance_profile.values[-1]
        z_T = np.sqrt(stats.lcap * stats.rho) * (vals[:, 0, 0] - ref.phi.values[-1])
        ratio = np.var(psi_T * z_T) / target
        assert 0.55 <= ratio <= 1.6  # 120 replicas: ~13% rel std on the variance


class TestLimitSde:
    def test_zero_density_zero_path(self):
        # off the support the diffusion vanishes and Z stays put
        traj = simulate_limit_sde(IntervalAngles(0.5), 0.0, 0.85, 0.5, seed=3)
        assert np.all(traj.values == 0.0)

    def test_uniform_brownian(self):
        _, z = limit_sde_ensemble(UniformAngles(), 0.0, 0.1, 0.5, seed=8,
                                  n_paths=10_000)
        assert np.var(z[:, -1]) == pytest.approx(0.5, rel=0.05)

    def test_psi_weighted_variance_matches_profile(self):
        nu = MFoldAngles(1)
        grid, z = limit_sde_ensemble(nu, 0.0, 0.2, 0.5, seed=5, n_paths=10_000)
        from slitflow.flow import _ode_with_variance
        from slitflow.measures import drift_field
        phi, psi, var = _ode_with_variance(drift_field(nu, 0.0), nu, 0.2, grid)
        got = np.var(psi[-1] * z[:, -1])
        assert got == pytest.approx(var[-1], rel=0.05)


class TestCoalescingBM:
    def test_single_point_variance(self):
        vals = []
        for seed in range(20):
            res = coalescing_bm([0.3], 1.0, seed=seed, step=2e-3)
            vals.append(res.values[0, -1] - 0.3)
        # cheap: reuse one long path's increments instead of 1e4 paths
        res = coalescing_bm([0.0], 1.0, seed=99, step=1e-4)
        incs = np.diff(res.values[0])
        var_rate = np.var(incs) / 1e-4
        assert var_rate == pytest.approx(1.0, rel=0.05)

    def test_two_point_difference_variance(self):
        # before coalescence the difference diffuses at rate 2
        diffs = []
        for seed in range(400):
            res = coalescing_bm([0.0, 0.5], 0.02, seed=seed, step=1e-3)
            d0 = res.values[1] - res.values[0]
            if np.all((d0 > 0) & (d0 < 1)):
                diffs.append(d0[-1] - d0[0])
        var = np.var(diffs)
        assert var == pytest.approx(2 * 0.02, rel=0.10)

    def test_merge_contracts(self):
        res = coalescing_bm(np.arange(8) / 8, 2.0, seed=4, step=1e-3)
        vals = res.values
        assert np.all(np.diff(vals, axis=0) >= -1e-12)   # order preserved
        gaps = np.diff(vals[:, -1])
        # merged pairs are bitwise equal forever after
        for i in range(7):
            eq = np.nonzero(vals[i + 1] - vals[i] == 0.0)[0]
            if eq.size:
                assert np.all(vals[i + 1, eq[0]:] == vals[i, eq[0]:])
        # circle mass conserved: total spread never exceeds one turn
        spread = vals[-1] - vals[0]
        assert np.all(spread <= 1.0 + 1e-12)

    def test_distinct_starts_required(self):
        with pytest.raises(ValueError):
            coalescing_bm([0.1, 0.1], 1.0, seed=0)


class TestCorrelation:
    def test_normalisation_at_equal_points(self):
        assert correlation_b(0.3, 0.3, SlitParticle(0.02)) == pytest.approx(1.0, abs=1e-8)

    def test_decay_at_half_turn(self):
        assert abs(correlation_b(0.2, 0.7, SlitParticle(0.01))) <= 0.01**0.25

    def test_cauchy_schwarz(self):
        rng = np.random.default_rng(0)
        p = SlitParticle(0.05)
        for _ in range(5):
            x, xp = rng.random(2)
            assert abs(correlation_b(x, xp, p)) <= 1.0 + 1e-9


class TestFlowDistance:
    def test_identity_and_symmetry(self):
        log = small_log(seed=7, d=0.15, horizon=0.3)
        a = simulate_boundary_flow(log, np.arange(4) / 4)
        assert flow_distance(a, a) == 0.0
        b = simulate_boundary_flow(small_log(seed=8, d=0.15, horizon=0.3),
                                   np.arange(4) / 4)
        assert flow_distance(a, b) == flow_distance(b, a)

    def test_mismatched_starts_rejected(self):
        log = small_log()
        a = simulate_boundary_flow(log, [0.1, 0.2])
        b = simulate_boundary_flow(log, [0.1, 0.3])
        with pytest.raises(ValueError):
            flow_distance(a, b)


class TestMartingaleCompensation:
    def test_uniform_drift_is_mean_shift(self):
        # at rate 1/lcap the uniform-law drift is mean_shift/lcap (~0 for the
        # symmetric slit)
        d, dt, n_rep = 0.01, 0.05, 500
        stats = particle_stats(d)
        _, vals = flow_ensemble(UniformAngles(), d, dt, n_rep, seed=17,
                                x0=[0.3], sample_times=np.array([dt]),
                                convention="poisson-lcap")
        incr = vals[:, 0, 0] - 0.3
        se = np.std(incr) / np.sqrt(n_rep)
        target = stats.mean_shift / stats.lcap * dt
        assert abs(np.mean(incr) - target) <= 3 * se

    def test_mean_increment_within_stderr(self):
        # X_t minus the integrated displacement field is a martingale
        nu = MFoldAngles(1)
        d, T, n_rep = 0.02, 0.3, 300
        lc = particle_stats(d).lcap
        grid = np.linspace(0.0, T, 61)
        _, vals = flow_ensemble(nu, d, T, n_rep, seed=11, x0=[0.2],
                                sample_times=grid, convention="poisson-lcap")
        paths = vals[:, 0, :]
        xs_grid = np.linspace(0, 1, 257)
        beta_grid = np.array([beta_nu(nu, SlitParticle(d), x) for x in xs_grid])
        beta_at = np.interp(paths % 1.0, xs_grid, beta_grid)
        comp = np.trapezoid(beta_at, grid, axis=1) / lc
        resid = paths[:, -1] - paths[:, 0] - comp
        se = np.std(resid) / np.sqrt(n_rep)
        assert abs(np.mean(resid)) <= 3 * se + 1e-12


class TestTightnessProxy:
    def test_sup_z_second_moment_bounded_in_d(self):
        nu = MFoldAngles(1)
        T, n_rep = 0.3, 40
        sups = []
        for d in (0.02, 0.01, 0.005):
            stats = particle_stats(d)
            scale = np.sqrt(stats.lcap * stats.rho)
            grid = np.linspace(0.0, T, 31)
            _, vals = flow_ensemble(nu, d, T, n_rep, seed=23, x0=[0.2],
                                    sample_times=grid, convention="poisson-lcap")
            ref = ode_reference_flow(nu, 0.0, [0.2], T, step=1e-3)
            phi = np.interp(grid, ref.times, ref.values[0])
            z = scale * (vals[:, 0, :] - phi[None, :])
            sups.append(np.mean(np.max(np.abs(z), axis=1) ** 2))
        assert max(sups) / min(sups) <= 3.0


class TestUniformKernels:
    def test_pair_kernel_matches_reference(self):
        table = gamma_tilde_table(0.05, 4096)
        rng = np.random.default_rng(0)
        counts = np.cumsum(rng.integers(100, 2000, size=(7, 3)), axis=1).astype(np.int64)
        seeds = rng.integers(0, 2**63, 7).astype(np.uint64)
        a = single_point_kernel(seeds, counts, table, 0.25)
        b = single_point_kernel_reference(seeds, counts, table, 0.25)
        assert np.array_equal(a, b)

    def test_table_accuracy(self):
        p = SlitParticle(0.01)
        table = gamma_tilde_table(0.01, 16384)
        us = np.linspace(1e-6, 1 - 1e-6, 40_001)
        pos = us * 16384
        idx = pos.astype(int)
        interp = table[idx] + (pos - idx) * (table[idx + 1] - table[idx])
        assert np.max(np.abs(interp - gamma_tilde(p, us))) <= 5e-7

    def test_marginal_determinism(self):
        cps, a = uniform_marginal_ensemble(0.05, [0.05], n_replicas=16, seed=3)
        _, b = uniform_marginal_ensemble(0.05, [0.05], n_replicas=16, seed=3)
        assert np.array_equal(a, b)

    def test_pair_ensemble_shape(self):
        cps, vals = uniform_pair_ensemble(0.05, [0.02, 0.04], n_replicas=8,
                                          seed=5, x1=0.0, x2=0.5)
        assert vals.shape == (8, 2, 2)
        # points may coalesce (difference pinned at 0 or -1) but never cross
        diff = vals[:, :, 0] - vals[:, :, 1]
        assert np.all(diff >= -1.0) and np.all(diff <= 0.0)


class TestHarmonicMeasureCoupling:
    def test_flow_segments_match_brownian_hitting(self):
        # the same event log drives the cluster geometry and the boundary
        # flow; Brownian walkers from infinity must land on the traced
        # boundary pieces with the frequencies the flow predicts
        nu = UniformAngles()
        d = 0.25
        log = generate_event_log(nu, ConstantDiameter(d), 14 * 1.0001 *
                                 particle_stats(d).lcap, "deterministic", seed=6)
        assert 10 <= log.n <= 20
        cluster = Cluster.from_event_log(log)
        boundary = trace_cluster_boundary(cluster, n_points=4096, refine=True)
        starts = np.arange(8) / 8
        res = simulate_boundary_flow(log, starts)
        final = res.values[:, -1]
        pos_sorted, fracs = segment_hit_fractions(
            boundary, final, n_walkers=3000, rng=rngmod.stream(77, 0))
        omega = np.empty(8)
        omega[0] = pos_sorted[0] - (pos_sorted[-1] - 1.0)
        omega[1:] = np.diff(pos_sorted)
        assert fracs.sum() == pytest.approx(1.0, abs=1e-12)
        for k in range(8):
            se = np.sqrt(max(omega[k] * (1 - omega[k]), 1e-4) / 3000)
            assert abs(fracs[k] - omega[k]) <= 3 * se + 0.012, (k, fracs, omega)
