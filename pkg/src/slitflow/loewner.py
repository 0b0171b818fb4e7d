"""Measure-driven Loewner evolution on the exterior disk.

A decreasing chain of conformal maps f_t from {|z| > 1} onto the complements
of growing compact hulls solves

    d/dt f_t(z) = z f_t'(z) G_t(z),   G_t(z) = int_T (z + zeta)/(z - zeta) dmu_t(zeta),

where mu_t is a probability measure on the circle (the driver).  f_T at a
single point is evaluated along backward characteristics: the solution of

    dh/ds = + h G_{T-s}(h),   h(0) = z,

satisfies h(T) = f_T(z).  Outside the circle Re G > 0, so the characteristic
flow expands; the pointwise solve is stable and independent per point.  Note
the sign: the same equation with a minus sign transports points down the
chain and produces the inverse map instead.

Drivers:
  * ConstantDensity(nu)   - mu_t = nu for all t (uniform density gives
                            f_t(z) = e^t z exactly; m-fold densities give
                            G = 1 - z^{-m}).
  * PiecewisePointMass    - mu_t = delta at e^{2 pi i theta_k} on
                            [T_{k-1}, T_k); a constant point mass run for
                            time lcap(d) generates exactly the slit map of
                            length d, so event logs replay clusters.

The module also hosts the lifted circle ODE x' = b(x) used for the
deterministic boundary flow, its equilibria, and hull tracing.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .measures import AngleMeasure

__all__ = [
    "AbsorbedError",
    "DegenerateDriftError",
    "DrivingMeasure",
    "ConstantDensity",
    "PiecewisePointMass",
    "HullBoundary",
    "Trajectory",
    "Equilibrium",
    "herglotz_integral",
    "solve_map_at_point",
    "trace_hull",
    "solve_circle_ode",
    "equilibria",
]


class AbsorbedError(RuntimeError):
    """A backward characteristic reached the unit circle (point swallowed by the hull)."""

    def __init__(self, time):
        super().__init__(f"trajectory absorbed into the hull at backward time {time:.6g}")
        self.time = time


class DegenerateDriftError(ValueError):
    """The drift vanishes identically (uniform law): no isolated equilibria."""


# ---------------------------------------------------------------------------
# drivers


class DrivingMeasure:
    """Family mu_t of circle probability measures steering the evolution."""

    kind = "abstract"
    horizon = math.inf

    def kernel(self, z, t):
        """G_t(z) = int (z+zeta)/(z-zeta) dmu_t, vectorised over z."""
        raise NotImplementedError

    def support_distance(self, z, t):
        """Distance from z to the support of mu_t (controls step size)."""
        raise NotImplementedError

    def breakpoints(self, T):
        """Backward times in (0, T) where t -> mu_{T-t} is discontinuous."""
        return []


class ConstantDensity(DrivingMeasure):
    """Time-independent driver mu_t = nu with a density.

    Closed kernels: uniform -> 1, m-fold -> 1 - z^{-m}, interval [0, eta] ->
    1 + log((z-1)/(z-e^{2 pi i eta})) / (i pi eta) (antiderivative of the
    kernel along the arc; principal log, safe for |z| > 1 because the
    quotient only degenerates on the chord between the arc endpoints).
    Tabulated densities use the Fourier expansion G = 1 + 2 sum a_k z^{-k},
    truncated where the coefficients fall below 1e-13; cubic-spline densities
    have |a_k| = O(k^-4), so the truncation meets a 1e-10 tolerance
    uniformly outside the circle.
    """

    kind = "density"

    def __init__(self, nu: AngleMeasure):
        self.nu = nu
        self._coeffs = None
        if nu.kind not in ("uniform", "mfold", "interval"):
            n = 1 << 14
            samples = nu.density(np.arange(n) / n)
            coeffs = np.conj(np.fft.rfft(samples))[1:] / n
            mags = np.abs(coeffs)
            keep = np.nonzero(mags > 1e-13)[0]
            kmax = int(keep[-1]) + 1 if keep.size else 0
            self._coeffs = coeffs[:kmax]

    def kernel(self, z, t=0.0):
        z = np.asarray(z, dtype=complex)
        nu = self.nu
        if nu.kind == "uniform":
            out = np.ones_like(z)
        elif nu.kind == "mfold":
            out = 1.0 - z ** (-nu.m)
        elif nu.kind == "interval":
            eta = nu.eta
            out = 1.0 + np.log((z - 1.0) / (z - np.exp(2j * np.pi * eta))) / (
                1j * np.pi * eta
            )
        else:
            w = 1.0 / z
            acc = np.zeros_like(z)
            for a in self._coeffs[::-1]:
                acc = (acc + a) * w
            out = 1.0 + 2.0 * acc
        return complex(out) if out.ndim == 0 else out

    def support_distance(self, z, t=0.0):
        z = np.asarray(z, dtype=complex)
        if self.nu.kind == "interval":
            ang = (np.angle(z) / (2.0 * np.pi)) % 1.0
            radial = np.abs(np.abs(z) - 1.0)
            d_ends = np.minimum(
                np.abs(z - 1.0), np.abs(z - np.exp(2j * np.pi * self.nu.eta))
            )
            out = np.where(ang <= self.nu.eta, radial, d_ends)
        else:
            out = np.abs(np.abs(z) - 1.0)
        return float(out) if out.ndim == 0 else out


class PiecewisePointMass(DrivingMeasure):
    """Point-mass driver replaying an arrival sequence.

    Event k occupies forward time [T_{k-1}, T_k) (T_0 = 0) with the driver
    pinned at e^{2 pi i theta_k}; run for lcap(d_k) per event this generates
    the composed slit maps of the discrete cluster exactly.
    """

    kind = "pointmass"

    def __init__(self, times, thetas):
        times = np.asarray(times, dtype=float)
        thetas = np.asarray(thetas, dtype=float)
        if times.ndim != 1 or times.size == 0 or times.shape != thetas.shape:
            raise ValueError("need matching nonempty 1-d time and angle arrays")
        if times[0] <= 0 or np.any(np.diff(times) <= 0):
            raise ValueError("event times must be strictly increasing and positive")
        self.times = times
        self.thetas = thetas
        self.horizon = float(times[-1])

    def _xi(self, t):
        idx = min(int(np.searchsorted(self.times, t, side="right")), self.times.size - 1)
        return np.exp(2j * np.pi * self.thetas[idx])

    def kernel(self, z, t):
        z = np.asarray(z, dtype=complex)
        xi = self._xi(t)
        out = (z + xi) / (z - xi)
        return complex(out) if out.ndim == 0 else out

    def support_distance(self, z, t):
        z = np.asarray(z, dtype=complex)
        out = np.abs(z - self._xi(t))
        return float(out) if out.ndim == 0 else out

    def breakpoints(self, T):
        cuts = T - self.times
        return sorted(float(c) for c in cuts if 0.0 < c < T)


def herglotz_integral(mu, t, z):
    """Kernel integral G_t(z) = int (z+zeta)/(z-zeta) dmu_t(zeta) for |z| > 1.

    ``mu`` may be a DrivingMeasure or a bare AngleMeasure (treated as a
    constant-density driver).
    """
    if isinstance(mu, AngleMeasure):
        mu = ConstantDensity(mu)
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) <= 1.0):
        raise ValueError("herglotz_integral requires |z| > 1")
    return mu.kernel(z, t)


def _kernel_quadrature(nu: AngleMeasure, z, epsabs=1e-11):
    """Direct adaptive quadrature of the kernel integral (test oracle path)."""
    z = complex(z)
    near = (np.angle(z) / (2 * np.pi)) % 1.0
    pts = sorted({near} - {0.0, 1.0})

    def f_re(y):
        zeta = np.exp(2j * np.pi * y)
        return (((z + zeta) / (z - zeta)) * nu.density(y)).real

    def f_im(y):
        zeta = np.exp(2j * np.pi * y)
        return (((z + zeta) / (z - zeta)) * nu.density(y)).imag

    kw = dict(limit=300, epsabs=epsabs, epsrel=1e-10, points=pts or None)
    re, _ = quad(f_re, 0.0, 1.0, **kw)
    im, _ = quad(f_im, 0.0, 1.0, **kw)
    return re + 1j * im


# ---------------------------------------------------------------------------
# pointwise backward solve


_ABSORB_TOL = 1e-12
_STEP_FLOOR = 1e-8


def solve_map_at_point(mu: DrivingMeasure, T, z, step=1e-3):
    """Evaluate f_T(z) by 4th-order integration of the backward characteristic.

    The step shrinks proportionally to the distance from the trajectory to
    the driver support (floor 1e-8) and is aligned to the driver's
    discontinuity times, so each integrated piece is smooth.  Accepts a
    scalar or an array of points; array evaluation shares the most
    conservative step across points.

    Raises AbsorbedError if a trajectory reaches |h| <= 1 + 1e-12.
    """
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    if step <= 0:
        raise ValueError("step must be positive")
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    h = np.atleast_1d(z).astype(complex).copy()
    if np.any(np.abs(h) <= 1.0):
        raise ValueError("solve_map_at_point requires |z| > 1")
    if T == 0:
        return complex(h[0]) if scalar else h.reshape(z.shape)

    cuts = [0.0] + list(mu.breakpoints(T)) + [T]
    for s0, s1 in zip(cuts[:-1], cuts[1:]):
        t_rep = T - 0.5 * (s0 + s1)  # forward time inside this smooth piece
        s = s0
        while s < s1:
            dist = np.min(mu.support_distance(h, t_rep))
            dt = step * min(1.0, dist / 0.1)
            dt = max(dt, _STEP_FLOOR)
            dt = min(dt, s1 - s)
            k1 = h * mu.kernel(h, t_rep)
            h2 = h + 0.5 * dt * k1
            k2 = h2 * mu.kernel(h2, t_rep)
            h3 = h + 0.5 * dt * k2
            k3 = h3 * mu.kernel(h3, t_rep)
            h4 = h + dt * k3
            k4 = h4 * mu.kernel(h4, t_rep)
            h = h + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            s += dt
            if np.any(np.abs(h) <= 1.0 + _ABSORB_TOL):
                raise AbsorbedError(s)
    return complex(h[0]) if scalar else h.reshape(z.shape)


# ---------------------------------------------------------------------------
# hulls


@dataclass
class HullBoundary:
    """Closed polyline approximating a hull boundary.

    ``vertices`` is the image of the circle |z| = 1 + eps (the offset is the
    documented approximation; the true boundary makes the backward solve
    stiff near the driver support).  ``capacity`` is the measured derivative
    at infinity.  ``source_angles`` records the circle parameter of each
    vertex in turns.
    """

    vertices: np.ndarray
    capacity: float
    eps: float
    source_angles: np.ndarray | None = None

    @property
    def n(self):
        return self.vertices.size


_CAP_RADIUS = 1e8


def measure_capacity(f_at, radius=_CAP_RADIUS):
    """Derivative at infinity |f(R)/R| from one far evaluation."""
    return float(abs(f_at(radius + 0.0j)) / radius)


def trace_hull(mu: DrivingMeasure, T, n_rays=512, eps=1e-3, step=1e-3,
               refine_eps=False, eps_tol=1e-4):
    """Trace the hull boundary as the image of |z| = 1 + eps at ``n_rays`` angles.

    Rays whose characteristic is absorbed are retraced at doubled offset.
    With ``refine_eps`` the whole trace is repeated at halved eps until the
    polyline moves less than ``eps_tol`` (max vertex displacement).
    """
    if n_rays < 16:
        raise ValueError("need at least 16 rays")

    def trace_once(eps_now):
        angles = np.arange(n_rays) / n_rays
        zs = (1.0 + eps_now) * np.exp(2j * np.pi * angles)
        if mu.kind == "pointmass":
            verts = np.empty(n_rays, dtype=complex)
            for i, z0 in enumerate(zs):
                e = eps_now
                for _ in range(8):
                    try:
                        verts[i] = solve_map_at_point(mu, T, (1.0 + e) * np.exp(2j * np.pi * angles[i]), step)
                        break
                    except AbsorbedError:
                        e *= 2.0
                else:
                    raise AbsorbedError(T)
            return angles, verts
        return angles, solve_map_at_point(mu, T, zs, step)

    angles, verts = trace_once(eps)
    if refine_eps:
        for _ in range(6):
            eps_half = eps / 2.0
            _, verts_half = trace_once(eps_half)
            moved = np.max(np.abs(verts_half - verts))
            verts, eps = verts_half, eps_half
            if moved < eps_tol:
                break
    capacity = measure_capacity(lambda z: solve_map_at_point(mu, T, z, step))
    return HullBoundary(vertices=verts, capacity=capacity, eps=eps, source_angles=angles)


# ---------------------------------------------------------------------------
# lifted circle ODE


@dataclass
class Trajectory:
    """Lifted circle positions over time: samples (times[i], values[i])."""

    times: np.ndarray
    values: np.ndarray
    start_time: float = field(default=None)
    start_value: float = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.start_time is None:
            self.start_time = float(self.times[0])
        if self.start_value is None:
            self.start_value = float(self.values[0])

    def at(self, t):
        """Linearly interpolated value(s) at time(s) t within the sampled range."""
        return np.interp(t, self.times, self.values)

    @property
    def final(self):
        return float(self.values[-1])


def solve_circle_ode(b, x0, s, t, step=1e-3):
    """Integrate the lifted circle ODE x' = b(x) from (s, x0) to time t.

    Classical 4th-order scheme with a fixed base step; the only adaptivity
    is a deterministic local cap dt <= 0.1/|b(x)| that keeps
    logarithmically unbounded drifts (interval laws near their support
    endpoints) from overshooting.  Fixed stepping keeps trajectories
    bitwise reproducible.
    """
    if t < s:
        raise ValueError("need t >= s")
    times = [s]
    values = [float(x0)]
    x = float(x0)
    now = s
    while now < t:
        bx = b(x)
        cap = 0.1 / (abs(bx) + 1e-30)
        dt = min(step, cap, t - now)
        k1 = bx
        k2 = b(x + 0.5 * dt * k1)
        k3 = b(x + 0.5 * dt * k2)
        k4 = b(x + dt * k3)
        x = x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        now += dt
        times.append(now)
        values.append(x)
    return Trajectory(np.array(times), np.array(values), s, float(x0))


@dataclass(frozen=True)
class Equilibrium:
    position: float
    stable: bool


def equilibria(b, b_prime=None, n_grid=4096, tol=1e-10):
    """Zeros of a circle drift with their stability.

    Sign-change roots on an ``n_grid`` grid are refined by bisection to
    ``tol``; each root is tagged stable (b' < 0) or unstable (b' > 0), with
    b' from ``b_prime`` or centred differences.  Raises DegenerateDriftError
    when b vanishes identically on the grid (uniform law).
    """
    xs = np.arange(n_grid) / n_grid
    vals = np.array([b(x) for x in xs])
    finite = np.isfinite(vals)
    if np.all(np.abs(vals[finite]) < 1e-12):
        raise DegenerateDriftError("drift is identically zero on the circle")

    if b_prime is None:
        def b_prime(x, _h=1e-5):
            return (b(x + _h) - b(x - _h)) / (2.0 * _h)

    roots = []
    for i in range(n_grid):
        x0, x1 = xs[i], xs[i] + 1.0 / n_grid
        v0, v1 = vals[i], vals[(i + 1) % n_grid]
        if not (np.isfinite(v0) and np.isfinite(v1)):
            continue
        if v0 == 0.0:
            roots.append(x0)
            continue
        if v0 * v1 < 0.0:
            lo, hi, vlo = x0, x1, v0
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                vm = b(mid)
                if vm == 0.0:
                    lo = hi = mid
                    break
                if vlo * vm < 0.0:
                    hi = mid
                else:
                    lo, vlo = mid, vm
            roots.append(0.5 * (lo + hi))

    out = []
    for r in roots:
        slope = b_prime(r)
        out.append(Equilibrium(position=r % 1.0, stable=bool(slope < 0)))
    out.sort(key=lambda e: e.position)
    return out
