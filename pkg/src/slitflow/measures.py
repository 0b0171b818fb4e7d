"""Attachment-angle laws and diameter laws.

An angle law ``nu`` is a probability density h on the circle R/Z (positions
in turns).  The module provides density evaluation, exact CDFs with
inverse-CDF sampling, the periodic principal-value Hilbert transform

    H[nu](x) = p.v. (1/2pi) int_0^1 cot(pi (x - y)) h(y) dy,

and the limiting drift of the harmonic-measure boundary flow,

    b(x) = c0 h(x) + H[nu](x),

together with particle statistics (the rate normalisation rho with
rho * int gamma_tilde^2 = 1, the mean boundary shift, and the smoothed
displacement field beta(x) = int gamma_tilde(x - z) h(z) dz).

The principal value is implemented once, in regularised form: subtracting
h(x) from the numerator makes the integrand bounded (it tends to -h'(x)/pi
at z -> 0 and to the matching periodic limit at z -> 1), so ordinary
adaptive quadrature converges.  Closed forms are used where they exist:

    uniform          H = 0
    m-fold sin^2     H(x) = -sin(2 pi m x) / (2 pi)
    interval [0,eta] H(x) = log|sin(pi x) / sin(pi (x - eta))| / (2 pi^2 eta)

The interval form follows from antidifferentiating the kernel; at eta = 1/2
it reduces to log|tan(pi x)| / pi^2.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline

from .conformal import SlitParticle, gamma_tilde

__all__ = [
    "AngleMeasure",
    "UniformAngles",
    "IntervalAngles",
    "SmoothedIntervalAngles",
    "MFoldAngles",
    "TabulatedAngles",
    "DiameterLaw",
    "ConstantDiameter",
    "TabulatedDiameters",
    "ParticleStats",
    "DriftField",
    "density",
    "sample_angle",
    "hilbert_transform",
    "drift_b",
    "drift_b_prime",
    "drift_field",
    "beta_nu",
    "particle_stats",
    "rho_sigma",
]


def _invert_monotone_cdf(cdf, u, iters=52):
    """Solve cdf(x) = u on [0, 1] by vectorised bisection (cdf non-decreasing)."""
    u = np.asarray(u, dtype=float)
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


class AngleMeasure:
    """Base class for attachment laws on the circle; positions in turns."""

    kind = "abstract"
    #: measures with an everywhere-positive smooth density may override
    has_density = True

    def density(self, x):
        raise NotImplementedError

    def density_prime(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sample(self, rng, size=None):
        """Draw angles by inverse CDF; deterministic given the RNG stream."""
        u = rng.random(size)
        return self._inverse_cdf(u)

    def _inverse_cdf(self, u):
        return _invert_monotone_cdf(self.cdf, u)

    def hilbert(self, x):
        """Principal-value Hilbert transform of the density at x (turns)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return float(self._hilbert_quad(float(x)))
        return np.array([self._hilbert_quad(float(t)) for t in x.ravel()]).reshape(x.shape)

    def hilbert_prime(self, x, step=1e-5):
        """Derivative of the Hilbert transform (centred differences by default)."""
        x = np.asarray(x, dtype=float)
        return (self.hilbert(x + step) - self.hilbert(x - step)) / (2.0 * step)

    def _hilbert_quad(self, x):
        hx = float(self.density(x))

        def reg(z):
            return (float(self.density(x - z)) - hx) / np.tan(np.pi * z)

        a, _ = quad(reg, 0.0, 0.5, limit=200, epsabs=1e-12, epsrel=1e-10)
        b, _ = quad(reg, 0.5, 1.0, limit=200, epsabs=1e-12, epsrel=1e-10)
        return (a + b) / (2.0 * np.pi)

    def __repr__(self):
        return f"{type(self).__name__}()"


class UniformAngles(AngleMeasure):
    """Uniform law: h = 1, H[nu] = 0."""

    kind = "uniform"

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.ones_like(x) if x.ndim else 1.0

    def density_prime(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x) if x.ndim else 0.0

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def _inverse_cdf(self, u):
        return u

    def hilbert(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x) if x.ndim else 0.0

    def hilbert_prime(self, x, step=1e-5):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x) if x.ndim else 0.0


class IntervalAngles(AngleMeasure):
    """Angles uniform on [0, eta]: h = chi_[0,eta] / eta.

    The density is discontinuous, so the Hilbert transform diverges
    logarithmically at the support endpoints {0, eta}; values there are
    +-inf.  ``smoothed()`` returns a twice-differentiable surrogate for
    runs that need the smooth-density hypotheses.
    """

    kind = "interval"

    def __init__(self, eta):
        if not 0.0 < eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        self.eta = float(eta)

    def density(self, x):
        y = np.asarray(x, dtype=float) % 1.0
        out = np.where(y <= self.eta, 1.0 / self.eta, 0.0)
        return float(out) if out.ndim == 0 else out

    def density_prime(self, x):
        # zero away from the jump points; the jumps themselves are not
        # differentiable and are reported as zero
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x) if x.ndim else 0.0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip(x / self.eta, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def _inverse_cdf(self, u):
        return self.eta * u

    def hilbert(self, x):
        # antiderivative of the kernel over the support:
        # log|sin(pi x)/sin(pi(x-eta))| / (2 pi^2 eta)
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.log(
                np.abs(np.sin(np.pi * x) / np.sin(np.pi * (x - self.eta)))
            ) / (2.0 * np.pi**2 * self.eta)
        return float(out) if out.ndim == 0 else out

    def hilbert_prime(self, x, step=None):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = (1.0 / np.tan(np.pi * x) - 1.0 / np.tan(np.pi * (x - self.eta))) / (
                2.0 * np.pi * self.eta
            )
        return float(out) if out.ndim == 0 else out

    def smoothed(self, width=1e-3):
        """C^2 mollification: convolution with a triweight bump of half-width ``width``."""
        return SmoothedIntervalAngles(self.eta, width)

    def __repr__(self):
        return f"IntervalAngles(eta={self.eta})"


def _triweight_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.5 + (35.0 / 32.0) * (u - u**3 + 0.6 * u**5 - u**7 / 7.0)


def _triweight_cdf_integral(u):
    # antiderivative of the triweight CDF with value 0 at -1 (hence = u for u >= 1)
    uc = np.clip(u, -1.0, 1.0)
    poly = (35.0 / 32.0) * (uc**2 / 2 - uc**4 / 4 + 0.1 * uc**6 - uc**8 / 56)
    val = poly + uc / 2.0 + 0.13671875
    return np.where(u > 1.0, val + (u - 1.0), np.where(u < -1.0, 0.0, val))


class SmoothedIntervalAngles(AngleMeasure):
    """Interval law mollified by a C^2 triweight bump: exact closed forms for
    the density and CDF, so the smooth-density hypotheses hold without any
    interpolation artefacts.  The Hilbert transform goes through the
    regularised quadrature path."""

    kind = "smoothed-interval"

    def __init__(self, eta, width=1e-3):
        if not 0.0 < eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not 0 < width < min(eta, 1.0 - eta) / 2:
            raise ValueError("smoothing width must be small against the support")
        self.eta = float(eta)
        self.width = float(width)

    def _fold(self, x):
        # place the wrap point opposite the support midpoint
        y = np.asarray(x, dtype=float) % 1.0
        return np.where(y > (1.0 + self.eta) / 2.0, y - 1.0, y)

    def density(self, x):
        y = self._fold(x)
        w = self.width
        out = (_triweight_cdf(y / w) - _triweight_cdf((y - self.eta) / w)) / self.eta
        return float(out) if out.ndim == 0 else out

    def density_prime(self, x):
        y = self._fold(x)
        w = self.width

        def bump(u):
            u = np.asarray(u, dtype=float)
            return np.where(np.abs(u) <= 1.0, (35.0 / 32.0) * (1.0 - u**2) ** 3, 0.0)

        out = (bump(y / w) - bump((y - self.eta) / w)) / (self.eta * w)
        return float(out) if out.ndim == 0 else out

    def _unfolded_cdf(self, y):
        # CDF on the line of the mollified indicator (support [-w, eta + w])
        w = self.width
        return (w / self.eta) * (
            _triweight_cdf_integral(y / w) - _triweight_cdf_integral((y - self.eta) / w)
        )

    def cdf(self, x):
        # the bump at the left support edge wraps a small tail past 1
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        out = self._unfolded_cdf(x) - self._unfolded_cdf(0.0) + self._unfolded_cdf(x - 1.0)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"SmoothedIntervalAngles(eta={self.eta}, width={self.width})"


class MFoldAngles(AngleMeasure):
    """m-fold symmetric law: h(x) = 2 sin^2(m pi x) = 1 - cos(2 pi m x)."""

    kind = "mfold"

    def __init__(self, m):
        if not (isinstance(m, (int, np.integer)) and m >= 1):
            raise ValueError("m must be a positive integer")
        self.m = int(m)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = 2.0 * np.sin(self.m * np.pi * x) ** 2
        return float(out) if out.ndim == 0 else out

    def density_prime(self, x):
        x = np.asarray(x, dtype=float)
        out = 2.0 * np.pi * self.m * np.sin(2.0 * np.pi * self.m * x)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = x - np.sin(2.0 * np.pi * self.m * x) / (2.0 * np.pi * self.m)
        return float(out) if out.ndim == 0 else out

    def hilbert(self, x):
        x = np.asarray(x, dtype=float)
        out = -np.sin(2.0 * np.pi * self.m * x) / (2.0 * np.pi)
        return float(out) if out.ndim == 0 else out

    def hilbert_prime(self, x, step=None):
        x = np.asarray(x, dtype=float)
        out = -self.m * np.cos(2.0 * np.pi * self.m * x)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"MFoldAngles(m={self.m})"


class TabulatedAngles(AngleMeasure):
    """Density given by samples on a uniform grid, periodically cubic-interpolated.

    The interpolant is validated to be nonnegative and is normalised so the
    density integrates to one exactly (in the interpolant's own arithmetic).
    The Hilbert transform goes through the regularised quadrature path.
    """

    kind = "tabulated"

    def __init__(self, values):
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or vals.size < 8:
            raise ValueError("need a 1-d grid of at least 8 density samples")
        if np.any(vals < 0):
            raise ValueError("density samples must be nonnegative")
        n = vals.size
        knots = np.arange(n + 1) / n
        self._spline = CubicSpline(knots, np.append(vals, vals[0]), bc_type="periodic")
        probe = self._spline(np.arange(8 * n) / (8.0 * n))
        if probe.min() < -1e-12:
            raise ValueError("cubic interpolant dips negative between samples")
        self._anti = self._spline.antiderivative()
        total = float(self._anti(1.0) - self._anti(0.0))
        if total <= 0:
            raise ValueError("density integrates to zero")
        self._scale = 1.0 / total
        self._deriv = self._spline.derivative()
        self.n_grid = n

    @classmethod
    def from_csv(cls, path, n_grid=1024):
        """Build from a CSV of (x, h) pairs; resampled onto a uniform grid."""
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        if data.shape[1] != 2:
            raise ValueError("expected two columns: x, h")
        x, h = data[:, 0], data[:, 1]
        order = np.argsort(x)
        x, h = x[order], h[order]
        if x[0] < 0 or x[-1] >= 1.0:
            raise ValueError("grid positions must lie in [0, 1)")
        through = CubicSpline(
            np.append(x, x[0] + 1.0), np.append(h, h[0]), bc_type="periodic"
        )
        return cls(np.maximum(through(np.arange(n_grid) / n_grid), 0.0))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = self._spline(x % 1.0) * self._scale
        return float(out) if out.ndim == 0 else out

    def density_prime(self, x):
        x = np.asarray(x, dtype=float)
        out = self._deriv(x % 1.0) * self._scale
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = (self._anti(np.clip(x, 0.0, 1.0)) - self._anti(0.0)) * self._scale
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"TabulatedAngles(n_grid={self.n_grid})"


# ---------------------------------------------------------------------------
# free-function interface


def density(nu: AngleMeasure, x):
    """Density h_nu at circle position x (turns), periodic."""
    return nu.density(x)


def sample_angle(nu: AngleMeasure, rng, size=None):
    """Sample angles with law nu via inverse CDF from the given stream."""
    return nu.sample(rng, size)


def hilbert_transform(nu: AngleMeasure, x):
    """Principal-value Hilbert transform H[nu](x)."""
    if not nu.has_density:
        raise ValueError("Hilbert transform needs a density (atomic law rejected)")
    return nu.hilbert(x)


def drift_b(nu: AngleMeasure, c0: float, x):
    """Boundary-flow drift b(x) = c0 h(x) + H[nu](x)."""
    return c0 * nu.density(x) + hilbert_transform(nu, x)


def drift_b_prime(nu: AngleMeasure, c0: float, x):
    """Derivative b'(x); analytic for closed-form laws, centred differences otherwise."""
    return c0 * nu.density_prime(x) + nu.hilbert_prime(x)


@dataclass(frozen=True)
class DriftField:
    """Callable pair (b, b') for one attachment law and drift constant."""

    nu: AngleMeasure
    c0: float

    def b(self, x):
        return drift_b(self.nu, self.c0, x)

    def b_prime(self, x):
        return drift_b_prime(self.nu, self.c0, x)


def drift_field(nu: AngleMeasure, c0: float = 0.0) -> DriftField:
    return DriftField(nu, float(c0))


# ---------------------------------------------------------------------------
# particle statistics


@dataclass(frozen=True)
class ParticleStats:
    """Quadrature summary of one slit particle's boundary displacement."""

    d: float
    lcap: float
    gt_sq_integral: float  # int_0^1 gamma_tilde^2
    mean_shift: float      # int_0^1 gamma_tilde
    rho: float             # 1 / int gamma_tilde^2
    c0_hat: float          # mean_shift / lcap


def _gt_quad_points(d):
    inner = min(10.0 * d, 0.45)
    return [inner, 1.0 - inner]


def particle_stats(p) -> ParticleStats:
    """Compute rho, the mean shift and the drift constant estimate for one particle.

    ``p`` may be a SlitParticle or a bare diameter.  Integrals are adaptive
    quadrature with subdivision forced near the attachment point, absolute
    tolerance ~1e-15 (the displacement profile is smooth but concentrated
    in a layer of width ~d).
    """
    if not isinstance(p, SlitParticle):
        p = SlitParticle(float(p))
    base = SlitParticle(p.d)  # statistics are rotation invariant
    pts = _gt_quad_points(base.d)
    with warnings.catch_warnings():
        # the mean-shift integrand cancels to ~1e-17; quad warns that the
        # requested tolerance is below attainable roundoff
        warnings.simplefilter("ignore", IntegrationWarning)
        i2, _ = quad(lambda z: gamma_tilde(base, z) ** 2, 0.0, 1.0,
                     points=pts, limit=300, epsabs=1e-16, epsrel=1e-13)
        i1, _ = quad(lambda z: gamma_tilde(base, z), 0.0, 1.0,
                     points=pts, limit=300, epsabs=1e-16, epsrel=1e-13)
    return ParticleStats(
        d=base.d,
        lcap=base.lcap,
        gt_sq_integral=i2,
        mean_shift=i1,
        rho=1.0 / i2,
        c0_hat=i1 / base.lcap,
    )


def beta_nu(nu: AngleMeasure, p: SlitParticle, x):
    """Smoothed displacement beta(x) = int_0^1 gamma_tilde_P(x - z) h(z) dz.

    Evaluated as int gamma_tilde(u) h(x - theta - u) du with subdivision
    forced where the displacement profile varies fastest (|u| <~ 10 d).
    """
    base = SlitParticle(p.d) if isinstance(p, SlitParticle) else SlitParticle(float(p))
    theta = p.theta if isinstance(p, SlitParticle) else 0.0
    pts = _gt_quad_points(base.d)
    if nu.kind == "interval":
        # the density jump travels with x; force subdivision there too
        extra = sorted({(x - theta) % 1.0, (x - theta - nu.eta) % 1.0})
        pts = sorted(set(pts) | {t for t in extra if 1e-12 < t < 1 - 1e-12})

    def integrand(u):
        return gamma_tilde(base, u) * nu.density(x - theta - u)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(integrand, 0.0, 1.0, points=pts, limit=300,
                      epsabs=1e-14, epsrel=1e-10)
    return val


# ---------------------------------------------------------------------------
# diameter laws


class DiameterLaw:
    """Base class for particle-diameter laws (finite third moment required)."""

    kind = "abstract"

    def sample(self, rng, size=None):
        raise NotImplementedError

    @property
    def third_moment(self):
        raise NotImplementedError

    def atoms_and_weights(self):
        raise NotImplementedError

    @property
    def is_constant(self):
        return False


class ConstantDiameter(DiameterLaw):
    """Degenerate law: every particle has diameter d."""

    kind = "constant"

    def __init__(self, d):
        if not d > 0:
            raise ValueError("diameter must be positive")
        self.d = float(d)

    def sample(self, rng, size=None):
        if size is None:
            return self.d
        return np.full(size, self.d)

    @property
    def third_moment(self):
        return self.d**3

    def atoms_and_weights(self):
        return np.array([self.d]), np.array([1.0])

    @property
    def is_constant(self):
        return True

    def __repr__(self):
        return f"ConstantDiameter(d={self.d})"


class TabulatedDiameters(DiameterLaw):
    """Finitely supported diameter law: atoms d_i with weights p_i."""

    kind = "tabulated"

    def __init__(self, atoms, weights):
        atoms = np.asarray(atoms, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if atoms.ndim != 1 or atoms.size == 0 or atoms.shape != weights.shape:
            raise ValueError("atoms and weights must be matching nonempty 1-d arrays")
        if np.any(atoms <= 0):
            raise ValueError("all atoms must be positive")
        if np.any(weights < 0) or not np.isclose(weights.sum(), 1.0, atol=1e-12):
            raise ValueError("weights must be nonnegative and sum to 1")
        self.atoms = atoms
        self.weights = weights / weights.sum()

    def sample(self, rng, size=None):
        idx = rng.choice(self.atoms.size, size=size, p=self.weights)
        return self.atoms[idx]

    @property
    def third_moment(self):
        return float(np.sum(self.weights * self.atoms**3))

    def atoms_and_weights(self):
        return self.atoms, self.weights

    def __repr__(self):
        return f"TabulatedDiameters(atoms={self.atoms.tolist()})"


def rho_sigma(law: DiameterLaw) -> float:
    """Rate normalisation for a diameter law: rho(sigma) * E_sigma[int gamma_tilde^2] = 1."""
    atoms, weights = law.atoms_and_weights()
    if atoms.size == 0:
        raise ValueError("empty diameter law")
    mean_i2 = sum(w * particle_stats(d).gt_sq_integral for d, w in zip(atoms, weights))
    return 1.0 / mean_i2
