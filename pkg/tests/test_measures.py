import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest

from slitflow import (
    ConstantDiameter,
    IntervalAngles,
    MFoldAngles,
    SlitParticle,
    TabulatedAngles,
    TabulatedDiameters,
    UniformAngles,
    beta_nu,
    density,
    drift_b,
    drift_b_prime,
    gamma_tilde,
    hilbert_transform,
    particle_stats,
    rho_sigma,
    sample_angle,
)
from slitflow import rng as rngmod


def hilbert_excision_oracle(nu, x, eps=1e-4):
    """Independent principal-value oracle: symmetric excision of the pole.

    The excised integral misses ~ -h'(x) eps / pi^2, linear in eps, so one
    Richardson step (2 I(eps/2) - I(eps)) removes the leading bias.
    """
    def at(e):
        def f(z):
            return nu.density(x - z) / np.tan(np.pi * z)
        a, _ = quad(f, e, 0.5, limit=300, epsabs=1e-12)
        b, _ = quad(f, 0.5, 1.0 - e, limit=300, epsabs=1e-12)
        return (a + b) / (2 * np.pi)

    return 2.0 * at(eps / 2) - at(eps)


def hilbert_fft_oracle(nu, xs, n=4096):
    """Spectral oracle: Fourier multiplier -i sgn(k) e^{2 pi i k x} / (2 pi)."""
    grid = np.arange(n) / n
    h = nu.density(grid)
    c = np.fft.rfft(h) / n
    out = np.zeros_like(xs, dtype=float)
    for k in range(1, n // 2):
        # h ~ sum_k [a_k cos + b_k sin]; conjugate function flips cos <-> sin
        a, b = 2 * c[k].real, -2 * c[k].imag
        out += (a * np.sin(2 * np.pi * k * xs) - b * np.cos(2 * np.pi * k * xs)) / 2
    return out / (2 * np.pi) * 2


class TestDensities:
    def test_uniform(self):
        nu = UniformAngles()
        assert density(nu, 0.123) == 1.0
        assert density(nu, -5.4) == 1.0

    def test_mfold_value(self):
        # 2 sin^2(3 pi /12) = 2 sin^2(pi/4) = 1
        assert density(MFoldAngles(3), 1.0 / 12) == pytest.approx(1.0, abs=1e-14)

    def test_interval_values(self):
        nu = IntervalAngles(0.5)
        assert density(nu, 0.25) == 2.0
        assert density(nu, 0.75) == 0.0

    def test_normalisation_gauss_legendre(self):
        # composite Gauss-Legendre on 2048 panels; interval laws use
        # panel-aligned support endpoints so the jump sits on a panel edge
        nodes, weights = np.polynomial.legendre.leggauss(4)
        panels = np.arange(2048) / 2048
        xs = (panels[:, None] + (nodes[None, :] + 1) / 2 / 2048).ravel()
        ws = np.tile(weights / 2 / 2048, 2048)
        for nu in (UniformAngles(), MFoldAngles(1), MFoldAngles(3),
                   IntervalAngles(0.5), IntervalAngles(0.25),
                   IntervalAngles(0.25).smoothed(),
                   TabulatedAngles(2 - np.cos(2 * np.pi * np.arange(64) / 64))):
            total = np.sum(nu.density(xs) * ws)
            assert total == pytest.approx(1.0, abs=1e-10), repr(nu)

    def test_periodicity(self):
        for nu in (MFoldAngles(2), IntervalAngles(0.3),
                   TabulatedAngles(1 + 0.5 * np.sin(2 * np.pi * np.arange(32) / 32))):
            xs = np.linspace(0, 1, 17)
            assert np.allclose(nu.density(xs), nu.density(xs + 1.0), atol=1e-12)

    def test_tabulated_rejects_negative(self):
        with pytest.raises(ValueError):
            TabulatedAngles(np.array([1.0, -0.2] * 8))

    def test_tabulated_from_csv(self, tmp_path):
        xs = np.arange(32) / 32
        h = 1 + 0.3 * np.cos(2 * np.pi * xs)
        path = tmp_path / "density.csv"
        np.savetxt(path, np.column_stack([xs, h]), delimiter=",")
        nu = TabulatedAngles.from_csv(path, n_grid=256)
        probe = np.linspace(0, 1, 50, endpoint=False)
        assert np.allclose(nu.density(probe), 1 + 0.3 * np.cos(2 * np.pi * probe), atol=1e-3)


class TestSampling:
    def test_uniform_ks(self):
        rng = rngmod.stream(101, 0)
        draws = sample_angle(UniformAngles(), rng, 100_000)
        stat = kstest(draws, lambda u: u).statistic
        assert stat < 1.63 / np.sqrt(100_000)  # 1% critical value

    def test_mfold_ks_and_moment(self):
        nu = MFoldAngles(3)
        rng = rngmod.stream(7, 0)
        draws = sample_angle(nu, rng, 100_000)
        stat = kstest(draws, nu.cdf).statistic
        assert stat < 1.63 / np.sqrt(100_000)
        # E[cos(2 pi m theta)] = int cos * (1 - cos) = -1/2; sd of the mean
        # is 0.5/sqrt(n)
        mean = np.mean(np.cos(2 * np.pi * 3 * draws))
        assert abs(mean + 0.5) <= 3 * 0.5 / np.sqrt(100_000)

    def test_interval_support(self):
        nu = IntervalAngles(0.3)
        rng = rngmod.stream(3, 0)
        draws = sample_angle(nu, rng, 10_000)
        assert draws.min() >= 0.0 and draws.max() <= 0.3
        stat = kstest(draws, nu.cdf).statistic
        assert stat < 1.63 / np.sqrt(10_000)

    def test_tabulated_sampler(self):
        nu = TabulatedAngles(2 - np.cos(2 * np.pi * np.arange(128) / 128))
        rng = rngmod.stream(9, 0)
        draws = sample_angle(nu, rng, 20_000)
        stat = kstest(draws, nu.cdf).statistic
        assert stat < 1.63 / np.sqrt(20_000)

    def test_deterministic_given_stream(self):
        a = sample_angle(MFoldAngles(2), rngmod.stream(42, 1), 100)
        b = sample_angle(MFoldAngles(2), rngmod.stream(42, 1), 100)
        assert np.array_equal(a, b)


class TestHilbert:
    def test_uniform_zero(self):
        assert hilbert_transform(UniformAngles(), 0.37) == 0.0

    def test_mfold_closed_form(self):
        for m in (1, 2, 3):
            nu = MFoldAngles(m)
            xs = np.linspace(0, 1, 37)
            want = -np.sin(2 * np.pi * m * xs) / (2 * np.pi)
            assert np.allclose(hilbert_transform(nu, xs), want, atol=1e-14)
        assert hilbert_transform(MFoldAngles(1), 0.25) == pytest.approx(-1 / (2 * np.pi))

    def test_mfold_vs_excision_oracle(self):
        nu = MFoldAngles(2)
        for x in (0.1, 0.37, 0.8):
            assert hilbert_transform(nu, x) == pytest.approx(
                hilbert_excision_oracle(nu, x), abs=1e-6)

    def test_interval_half_matches_log_tan(self):
        nu = IntervalAngles(0.5)
        xs = np.linspace(0.01, 0.99, 99)
        xs = xs[(np.abs(xs - 0.5) > 0.005)]
        want = np.log(np.abs(np.tan(np.pi * xs))) / np.pi**2
        assert np.allclose(hilbert_transform(nu, xs), want, atol=1e-12)

    def test_interval_zero_at_three_quarters(self):
        assert hilbert_transform(IntervalAngles(0.5), 0.75) == pytest.approx(0.0, abs=1e-14)

    def test_interval_general_eta_vs_excision(self):
        nu = IntervalAngles(0.25)
        for x in (0.6, 0.35, 0.9, 0.1):
            assert hilbert_transform(nu, x) == pytest.approx(
                hilbert_excision_oracle(nu, x), abs=1e-6)

    def test_tabulated_quadrature_vs_closed_form(self):
        # the regularised-quadrature path on tabulated m-fold samples must
        # reproduce the closed form
        for m in (1, 2, 3):
            grid = np.arange(1024) / 1024
            nu = TabulatedAngles(2 * np.sin(m * np.pi * grid) ** 2)
            xs = np.arange(256) / 256
            want = -np.sin(2 * np.pi * m * xs) / (2 * np.pi)
            got = nu.hilbert(xs)
            assert np.max(np.abs(got - want)) <= 1e-6

    def test_tabulated_vs_fft_oracle(self):
        grid = np.arange(512) / 512
        nu = TabulatedAngles(1 + 0.4 * np.cos(2 * np.pi * grid) + 0.2 * np.sin(4 * np.pi * grid))
        xs = np.linspace(0, 1, 9, endpoint=False)
        want = hilbert_fft_oracle(nu, xs)
        assert np.allclose(nu.hilbert(xs), want, atol=1e-5)

    def test_mean_zero(self):
        # the conjugate function has zero mean
        nodes = (np.arange(256) + 0.5) / 256
        for nu in (MFoldAngles(2), IntervalAngles(0.25)):
            vals = hilbert_transform(nu, nodes)
            assert abs(np.mean(vals)) <= 1e-8


class TestDrift:
    def test_c0_zero_equals_hilbert(self):
        nu = MFoldAngles(2)
        xs = np.linspace(0, 1, 11)
        assert np.allclose(drift_b(nu, 0.0, xs), hilbert_transform(nu, xs), atol=0)

    def test_uniform_constant(self):
        xs = np.linspace(0, 1, 11)
        assert np.allclose(drift_b(UniformAngles(), 0.0, xs), 0.0, atol=0)

    def test_mfold_derivative_at_zero(self):
        for m in (1, 2, 3):
            assert drift_b(MFoldAngles(m), 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)
            assert drift_b_prime(MFoldAngles(m), 0.0, 0.0) == pytest.approx(-m, abs=1e-12)

    def test_analytic_prime_vs_differences(self):
        step = 1e-5
        xs = np.linspace(0.05, 0.95, 19)
        for nu, c0 in ((MFoldAngles(1), 0.0), (MFoldAngles(3), 0.2),
                       (IntervalAngles(0.5), 0.0)):
            if nu.kind == "interval":
                xs_use = xs[(np.abs(xs - 0.5) > 0.02) & (xs > 0.02)]
            else:
                xs_use = xs
            bp = drift_b_prime(nu, c0, xs_use)
            fd = (drift_b(nu, c0, xs_use + step) - drift_b(nu, c0, xs_use - step)) / (2 * step)
            assert np.max(np.abs(bp - fd)) <= 1e-4


class TestBetaNu:
    def test_uniform_is_mean_shift(self):
        p = SlitParticle(0.05)
        stats = particle_stats(p)
        for x in (0.0, 0.3, 0.77):
            assert beta_nu(UniformAngles(), p, x) == pytest.approx(stats.mean_shift, abs=1e-12)

    def test_mfold_antisymmetry(self):
        p = SlitParticle(0.04)
        nu = MFoldAngles(1)
        for x in (0.2, 0.4):
            assert beta_nu(nu, p, x) == pytest.approx(-beta_nu(nu, p, 1.0 - x), abs=1e-11)

    def test_converges_to_drift(self):
        nu = MFoldAngles(3)
        xs = np.array([0.1, 0.3, 0.55])
        sups = []
        for d in (0.08, 0.04, 0.02):
            p = SlitParticle(d)
            lc = p.lcap
            err = [abs(beta_nu(nu, p, x) / lc - drift_b(nu, 0.0, x)) for x in xs]
            sups.append(max(err))
        assert sups[0] > sups[1] > sups[2]


class TestParticleStats:
    def test_symmetric_c0(self):
        for d in (0.02, 0.2, 1.0):
            assert abs(particle_stats(d).c0_hat) <= 1e-6

    def test_rho_cubic_scaling(self):
        r1 = particle_stats(0.02).rho * 0.02**3
        r2 = particle_stats(0.01).rho * 0.01**3
        assert 0.5 <= r1 / r2 <= 2.0

    def test_lcap_quarter(self):
        st = particle_stats(0.005)
        assert st.lcap / 0.005**2 == pytest.approx(0.25, rel=1e-2)

    def test_rho_consistency_independent_quadrature(self):
        # fixed-order panel quadrature as a second, independent route
        d = 0.03
        p = SlitParticle(d)
        nodes, weights = np.polynomial.legendre.leggauss(32)
        edges = np.concatenate([
            [0.0], np.geomspace(d / 64, 0.5, 40), 1.0 - np.geomspace(d / 64, 0.5, 40)[::-1], [1.0]])
        edges = np.unique(edges)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            xs = (a + b) / 2 + (b - a) / 2 * nodes
            total += (b - a) / 2 * np.sum(weights * gamma_tilde(p, xs) ** 2)
        st = particle_stats(d)
        assert st.rho * total == pytest.approx(1.0, abs=1e-8)
        assert st.rho * st.gt_sq_integral == pytest.approx(1.0, abs=1e-12)


class TestDiameterLaws:
    def test_constant_rho_sigma(self):
        assert rho_sigma(ConstantDiameter(0.05)) == particle_stats(0.05).rho

    def test_two_equal_atoms(self):
        law = TabulatedDiameters([0.05, 0.05], [0.5, 0.5])
        assert rho_sigma(law) == pytest.approx(particle_stats(0.05).rho, rel=1e-12)

    def test_rho_sigma_third_moment(self):
        vals = [rho_sigma(ConstantDiameter(d)) * ConstantDiameter(d).third_moment
                for d in (0.02, 0.01)]
        assert max(vals) / min(vals) <= 4.0

    def test_mixed_law_moments(self):
        law = TabulatedDiameters([0.01, 0.03], [0.25, 0.75])
        assert law.third_moment == pytest.approx(0.25 * 0.01**3 + 0.75 * 0.03**3)
        rng = rngmod.stream(1, 2)
        draws = law.sample(rng, 5000)
        assert set(np.unique(draws)) <= {0.01, 0.03}
        assert np.mean(draws == 0.03) == pytest.approx(0.75, abs=0.03)

    def test_validation(self):
        with pytest.raises(ValueError):
            TabulatedDiameters([0.1, -0.1], [0.5, 0.5])
        with pytest.raises(ValueError):
            TabulatedDiameters([0.1, 0.2], [0.7, 0.7])
        with pytest.raises(ValueError):
            ConstantDiameter(0.0)


class TestSmoothedInterval:
    def test_close_to_raw_but_c2(self):
        raw = IntervalAngles(0.25)
        smooth = raw.smoothed(width=1e-3)
        xs = np.linspace(0, 1, 1000, endpoint=False)
        inside = np.abs(xs - 0.125) < 0.1
        assert np.allclose(smooth.density(xs[inside]), 4.0, atol=1e-3)
        far = (xs > 0.3) & (xs < 0.9)
        assert np.allclose(smooth.density(xs[far]), 0.0, atol=1e-6)
