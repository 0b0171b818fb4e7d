"""Discrete growth clusters built from composed slit maps.

A cluster is the compact set grown by attaching one rotated slit per event:
with arrival angles theta_1, theta_2, ... and lengths d_1, d_2, ..., the
exterior map after n events is the composition

    Phi_n = f^{theta_1} o f^{theta_2} o ... o f^{theta_n},

so evaluation applies the *latest* particle first and the first particle
last (the first particle is the outermost map).  Getting this order wrong
is the classic implementation bug; it is fixed here once, in
``eval_cluster_map``.

The event log is the single source of randomness: the same log drives both
the cluster geometry here and the harmonic-measure boundary flow in
``slitflow.flow``, which is what makes coupled comparisons meaningful.
Capacity is the clock: each particle adds lcap(d_k) to the log-capacity,
so the derivative of Phi_n at infinity is exp(sum lcap_k) exactly.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .conformal import _forward_chain, lcap_of_slit
from .loewner import HullBoundary, PiecewisePointMass
from .measures import AngleMeasure, DiameterLaw, particle_stats, rho_sigma

__all__ = [
    "EventLog",
    "Cluster",
    "FingerHistogram",
    "generate_event_log",
    "eval_cluster_map",
    "trace_cluster_boundary",
    "tip_points",
    "finger_histogram",
]

#: named arrival-rate conventions; there is deliberately no default, the
#: deterministic and Poisson clocks scale differently (d^-2 vs d^-3) and a
#: silent default would corrupt experiments
CONVENTIONS = ("deterministic", "poisson-lcap", "poisson-rho", "poisson-rho-sigma")


@dataclass
class EventLog:
    """Ordered particle arrivals (T_k, theta_k, d_k) plus provenance.

    ``convention`` names the clock: "deterministic" places T_k at the
    cumulative capacity (T_k = k * lcap for constant diameters); the
    "poisson-*" conventions draw exponential inter-arrivals at the named
    rate.  Identical (seed, parameters) produce identical logs.
    """

    times: np.ndarray
    thetas: np.ndarray
    diameters: np.ndarray
    convention: str
    seed: int
    horizon: float
    rate: float | None = None
    overshoot: float = 0.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.diameters = np.asarray(self.diameters, dtype=float)

    @property
    def n(self):
        return self.times.size

    @property
    def lcaps(self):
        return lcap_of_slit(self.diameters)

    def driving_measure(self):
        """The point-mass Loewner driver that replays this log."""
        return PiecewisePointMass(self.times, self.thetas)

    def truncated(self, horizon):
        """Events with T_k <= horizon."""
        keep = self.times <= horizon
        return EventLog(self.times[keep], self.thetas[keep], self.diameters[keep],
                        self.convention, self.seed, horizon, self.rate)

    def to_jsonl(self, path):
        """One JSON object per event: fields k, t, theta, d (full precision)."""
        with open(path, "w") as fh:
            for k in range(self.n):
                fh.write(json.dumps({
                    "k": k + 1,
                    "t": self.times[k],
                    "theta": self.thetas[k],
                    "d": self.diameters[k],
                }) + "\n")
        return path

    @classmethod
    def from_jsonl(cls, path, convention="deterministic", seed=0):
        recs = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    recs.append(json.loads(line))
        recs.sort(key=lambda r: r["k"])
        times = np.array([r["t"] for r in recs])
        thetas = np.array([r["theta"] for r in recs])
        diams = np.array([r["d"] for r in recs])
        horizon = float(times[-1]) if times.size else 0.0
        return cls(times, thetas, diams, convention, seed, horizon)


def generate_event_log(nu: AngleMeasure, sigma: DiameterLaw, horizon, convention,
                       seed, rate=None) -> EventLog:
    """Draw a particle arrival sequence.

    Conventions:
      * "deterministic": constant diameter d emits exactly floor(T / lcap(d))
        events at T_k = k * lcap; variable diameters accumulate capacity and
        stop at the first crossing of T (overshoot, at most one particle's
        capacity, is recorded on the log).
      * "poisson-lcap": Poisson arrivals at rate 1/lcap(d) (constant d only).
      * "poisson-rho":  Poisson arrivals at rate rho(P(d)) (constant d only).
      * "poisson-rho-sigma": Poisson arrivals at rate rho(sigma).
    Angles, diameters and arrival times come from independent substreams of
    the master seed.

    ``rate`` overrides the named rate with an explicit value (Poisson only).
    """
    if horizon is None or not horizon > 0:
        raise ValueError("horizon must be positive")
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown rate convention {convention!r}; choose from {CONVENTIONS}")

    rng_times = rngmod.stream(seed, rngmod.CHANNEL_TIMES)
    rng_angles = rngmod.stream(seed, rngmod.CHANNEL_ANGLES)
    rng_diams = rngmod.stream(seed, rngmod.CHANNEL_DIAMETERS)

    if convention == "deterministic":
        if sigma.is_constant:
            lc = lcap_of_slit(sigma.d)
            n = int(np.floor(horizon / lc))
            times = lc * np.arange(1, n + 1)
            diams = np.full(n, sigma.d)
            overshoot = 0.0
        else:
            diams_list = []
            acc = 0.0
            while acc < horizon:
                batch = np.atleast_1d(sigma.sample(rng_diams, 256))
                caps = lcap_of_slit(batch)
                cum = acc + np.cumsum(caps)
                hit = np.nonzero(cum >= horizon)[0]
                if hit.size:
                    stop = hit[0] + 1
                    diams_list.append(batch[:stop])
                    acc = cum[stop - 1]
                    break
                diams_list.append(batch)
                acc = cum[-1]
            diams = np.concatenate(diams_list) if diams_list else np.empty(0)
            times = np.cumsum(lcap_of_slit(diams))
            overshoot = float(acc - horizon)
        thetas = np.atleast_1d(nu.sample(rng_angles, diams.size))
        return EventLog(times, thetas, diams, convention, seed, float(horizon),
                        rate=None, overshoot=overshoot)

    # Poisson clocks
    if rate is None:
        if convention == "poisson-rho-sigma":
            rate = rho_sigma(sigma)
        else:
            if not sigma.is_constant:
                raise ValueError(f"{convention} needs a constant diameter law")
            rate = 1.0 / lcap_of_slit(sigma.d) if convention == "poisson-lcap" \
                else particle_stats(sigma.d).rho
    rate = float(rate)
    if rate <= 0:
        raise ValueError("rate must be positive")

    chunks = []
    last = 0.0
    while last <= horizon:
        gaps = rng_times.exponential(1.0 / rate, size=4096)
        ts = last + np.cumsum(gaps)
        chunks.append(ts)
        last = ts[-1]
    times = np.concatenate(chunks)
    times = times[times <= horizon]
    n = times.size
    diams = np.atleast_1d(sigma.sample(rng_diams, n))
    thetas = np.atleast_1d(nu.sample(rng_angles, n))
    return EventLog(times, thetas, diams, convention, seed, float(horizon), rate=rate)


# ---------------------------------------------------------------------------
# clusters


@dataclass
class Cluster:
    """Composed-map cluster state: per-particle parameters and total capacity."""

    diameters: np.ndarray
    thetas: np.ndarray
    lcaps: np.ndarray = field(init=False)
    total_lcap: float = field(init=False)

    def __post_init__(self):
        self.diameters = np.asarray(self.diameters, dtype=float)
        self.thetas = np.asarray(self.thetas, dtype=float)
        if self.diameters.shape != self.thetas.shape:
            raise ValueError("diameters and angles must align")
        self.lcaps = lcap_of_slit(self.diameters) if self.n else np.empty(0)
        self.total_lcap = float(np.sum(self.lcaps))
        # joukowski parameters and rotations, precomputed once per particle
        dd = self.diameters
        self._b = ((1.0 + dd) + 1.0 / (1.0 + dd)) / 2.0 if self.n else np.empty(0)
        self._rot = np.exp(2j * np.pi * self.thetas) if self.n else np.empty(0, complex)

    @classmethod
    def from_event_log(cls, log: EventLog, horizon=None):
        if horizon is not None:
            log = log.truncated(horizon)
        return cls(log.diameters.copy(), log.thetas.copy())

    @property
    def n(self):
        return self.diameters.size

    @property
    def cap(self):
        """Derivative at infinity exp(total_lcap)."""
        return float(np.exp(self.total_lcap))


def eval_cluster_map(c: Cluster, z):
    """Evaluate the cluster map Phi_n(z) for |z| > 1 (scalars or arrays).

    Applies the most recent particle first: Phi_n = f^{theta_1} o ... o
    f^{theta_n}.  Intermediate points stay in |w| > 1 because each slit map
    sends the exterior disk into itself minus a slit.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) <= 1.0):
        raise ValueError("eval_cluster_map requires |z| > 1")
    w = np.atleast_1d(z).astype(complex)
    for k in range(c.n - 1, -1, -1):
        rot = c._rot[k]
        w = rot * _forward_chain(c._b[k], w / rot)
    return complex(w[0]) if z.ndim == 0 else w.reshape(z.shape)


def trace_cluster_boundary(c: Cluster, n_points=1024, eps=1e-3, refine=True,
                           max_rounds=4, gap_factor=5.0) -> HullBoundary:
    """Image of the circle |z| = 1 + eps under the cluster map.

    Fingers stretch the boundary parametrisation, so after the first pass
    the trace is refined where consecutive image points are farther apart
    than ``gap_factor`` times the median spacing (bisecting the source
    parameter, up to ``max_rounds`` rounds).
    """
    if n_points < 256:
        raise ValueError("need at least 256 boundary points")
    angles = np.arange(n_points) / n_points
    verts = eval_cluster_map(c, (1.0 + eps) * np.exp(2j * np.pi * angles))
    if refine:
        for _ in range(max_rounds):
            gaps = np.abs(np.diff(verts, append=verts[:1]))
            med = np.median(gaps)
            wide = np.nonzero(gaps > gap_factor * med)[0]
            if wide.size == 0:
                break
            right = (angles[(wide + 1) % angles.size] + (wide + 1 == angles.size))
            mids = 0.5 * (angles[wide] + right)
            new_verts = eval_cluster_map(c, (1.0 + eps) * np.exp(2j * np.pi * mids))
            angles = np.concatenate([angles, mids % 1.0])
            verts = np.concatenate([verts, new_verts])
            order = np.argsort(angles, kind="stable")
            angles, verts = angles[order], verts[order]
    capacity = float(np.abs(eval_cluster_map(c, 1e8 + 0.0j)) / 1e8)
    return HullBoundary(vertices=verts, capacity=capacity, eps=eps, source_angles=angles)


def tip_points(c: Cluster):
    """Positions of all slit tips in the final cluster (for plots).

    The offset-circle trace cannot reach the slit tips; particle k's tip is
    the image of its own tip under the earlier maps,
    Phi_{k-1}(e^{2 pi i theta_k} (1 + d_k)), reconstructed here for every
    particle in one backward sweep.
    """
    if c.n == 0:
        return np.empty(0, dtype=complex)
    tips = c._rot * (1.0 + c.diameters)
    # apply f_j to every tip with index k > j (innermost maps first)
    for j in range(c.n - 2, -1, -1):
        rot = c._rot[j]
        tips[j + 1:] = rot * _forward_chain(c._b[j], tips[j + 1:] / rot)
    return tips


@dataclass
class FingerHistogram:
    """Radial boundary mass binned by geometric angle (turns)."""

    bin_edges: np.ndarray
    mass: np.ndarray
    threshold: float
    modes: np.ndarray  # angular positions of prominent modes

    @property
    def n_modes(self):
        return self.modes.size


def finger_histogram(boundary: HullBoundary, bins=36) -> FingerHistogram:
    """Histogram over arg(w) of the radial excess |w| - 1 along the polyline.

    Prominent modes are contiguous runs of bins at or above twice the median
    bin mass (circularly); each run contributes one mode at its heaviest
    bin's centre.
    """
    if bins < 8:
        raise ValueError("need at least 8 bins")
    ang = (np.angle(boundary.vertices) / (2.0 * np.pi)) % 1.0
    radial = np.maximum(np.abs(boundary.vertices) - 1.0, 0.0)
    mass, edges = np.histogram(ang, bins=bins, range=(0.0, 1.0), weights=radial)
    med = float(np.median(mass))
    threshold = 2.0 * med if med > 0 else 2.0 * float(np.mean(mass))
    above = mass >= threshold
    centers = 0.5 * (edges[:-1] + edges[1:])

    modes = []
    if above.all():
        modes.append(centers[int(np.argmax(mass))])
    elif above.any():
        # walk circular runs of above-threshold bins
        start = int(np.argmin(above))  # a below-threshold anchor
        run = []
        for off in range(1, bins + 1):
            i = (start + off) % bins
            if above[i]:
                run.append(i)
            elif run:
                best = max(run, key=lambda j: mass[j])
                modes.append(centers[best])
                run = []
        if run:
            best = max(run, key=lambda j: mass[j])
            modes.append(centers[best])
    return FingerHistogram(bin_edges=edges, mass=mass, threshold=threshold,
                           modes=np.sort(np.array(modes)))
