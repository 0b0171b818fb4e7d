"""Exact slit maps on the exterior unit disk.

The basic particle is a radial slit of length ``d`` attached to the unit
circle.  The conformal map of the exterior disk onto the exterior disk minus
the slit is realised exactly as a Joukowski chain

    f = J^{-1} o A^{-1} o J,      J(z) = (z + 1/z)/2,

where ``A(u) = (2u + 1 - b)/(1 + b)`` is affine and
``b = ((1+d) + 1/(1+d))/2`` is the Joukowski parameter of the slit tip.
``J`` flattens the circle onto [-1, 1], the affine map stretches the segment
so that the extra piece (1, b] opens up into the slit, and the inverse
Joukowski map folds everything back.

All circle positions and attachment angles are measured in turns (the circle
is R/Z), so rotation by ``theta`` acts as multiplication by e^{2*pi*i*theta}.

The derivative at infinity of the slit map is e^{lcap} with

    lcap = log((2+d)^2 / (4(1+d))) = log1p(d^2 / (4(1+d))),

which is the logarithmic capacity added by one particle.  Capacity adds
under composition, which is what makes it the natural clock of the growth
models built on top of this module.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SlitParticle",
    "lcap_of_slit",
    "slit_of_lcap",
    "eval_particle_map",
    "eval_particle_inverse",
    "gamma",
    "gamma_tilde",
]


def lcap_of_slit(d):
    """Logarithmic capacity of a radial slit of length ``d``.

    Exact closed form log((2+d)^2 / (4(1+d))), evaluated as log1p for
    accuracy at small d (lcap ~ d^2/4 as d -> 0).

    Parameters
    ----------
    d : float or ndarray
        Slit length, >= 0.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("slit length must be nonnegative")
    out = np.log1p(d * d / (4.0 * (1.0 + d)))
    return float(out) if out.ndim == 0 else out


def slit_of_lcap(t):
    """Slit length whose logarithmic capacity is ``t``.

    Inverts lcap_of_slit exactly: with m = expm1(t),

        d = 2m + 2*sqrt(m*(m+1)).

    This is the root of d^2 = 4(1+d)(e^t - 1) that is nonnegative and
    monotone increasing in t (d ~ 2*sqrt(t) as t -> 0).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("capacity must be nonnegative")
    m = np.expm1(t)
    out = 2.0 * m + 2.0 * np.sqrt(m * (m + 1.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SlitParticle:
    """One radial slit particle: length, attachment angle, derived constants.

    Attributes
    ----------
    d : float
        Slit length in the metric of the base circle; any d > 0 is accepted,
        the growth models use d in (0, 1].
    theta : float
        Attachment angle in turns, reduced to [0, 1).
    lcap : float
        Logarithmic capacity log((2+d)^2/(4(1+d))), derived.
    b : float
        Joukowski parameter ((1+d) + 1/(1+d))/2 > 1, derived.
    """

    d: float
    theta: float = 0.0
    lcap: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("slit length must be positive")
        object.__setattr__(self, "theta", float(self.theta) % 1.0)
        object.__setattr__(self, "lcap", lcap_of_slit(self.d))
        object.__setattr__(self, "b", ((1.0 + self.d) + 1.0 / (1.0 + self.d)) / 2.0)


def _sqrt_branch(v):
    """Exterior branch of J^{-1}: the preimage of v with modulus >= 1.

    The two preimages of v under J are reciprocal; sqrt(v-1)*sqrt(v+1) with
    principal square roots gives the combination that behaves like v at
    infinity, and a final reciprocal swap guards the |.| >= 1 branch near
    the circle.
    """
    s = np.sqrt(v - 1.0) * np.sqrt(v + 1.0)
    r = v + s
    mod = np.abs(r)
    bad = mod < 1.0
    if np.any(bad):
        r = np.where(bad, 1.0 / np.where(r == 0, 1.0, r), r)
    return r


def _forward_chain(b, z):
    """Slit map at angle 0 on exterior points: J^{-1}(A^{-1}(J(z)))."""
    u = 0.5 * (z + 1.0 / z)
    v = 0.5 * ((1.0 + b) * u + (b - 1.0))
    return _sqrt_branch(v)


def _inverse_chain(b, w):
    """Inverse slit map at angle 0: J^{-1}(A(J(w)))."""
    u = 0.5 * (w + 1.0 / w)
    v = (2.0 * u + 1.0 - b) / (1.0 + b)
    # On the closed slit the chain lands on [-1, 1]; fold tiny imaginary
    # parts from rounding back so the circle limit is returned cleanly.
    v = np.where(
        (np.abs(np.imag(v)) < 1e-14) & (np.abs(np.real(v)) <= 1.0),
        np.real(v) + 0.0j,
        v,
    )
    return _sqrt_branch(v)


def eval_particle_map(p: SlitParticle, z):
    """Evaluate the rotated slit map f^theta(z) = e^{i theta'} f(e^{-i theta'} z).

    Requires |z| > 1 (strictly outside the closed unit disk).  As z -> oo,
    f(z)/z -> e^{lcap}.  Accepts complex scalars or arrays.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) <= 1.0):
        raise ValueError("eval_particle_map requires |z| > 1")
    rot = np.exp(2j * np.pi * p.theta)
    out = rot * _forward_chain(p.b, z / rot)
    return complex(out) if out.ndim == 0 else out


def eval_particle_inverse(p: SlitParticle, w):
    """Evaluate the inverse map g^theta(w), the same Joukowski chain reversed.

    ``w`` must lie in the image domain: outside the unit disk and off the
    closed slit, up to a boundary-limit tolerance (points on the closed slit
    are mapped to their circle preimage, upper side for ambiguous reals).
    Points strictly inside the unit disk are rejected.
    """
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(w) < 1.0 - 1e-12):
        raise ValueError("eval_particle_inverse requires |w| >= 1")
    rot = np.exp(2j * np.pi * p.theta)
    out = rot * _inverse_chain(p.b, w / rot)
    return complex(out) if out.ndim == 0 else out


def _gamma0_frac(b, u):
    """Boundary action of the inverse map on fractional positions u in [0, 1).

    Computed on the circle itself: J sends e^{2 pi i u} to cos(2 pi u), the
    affine map A pulls the segment into [-1, 1], and the square-root branch
    is fixed by the source semicircle (upper half maps to upper half).
    gamma0(0) := 0 by convention; gamma0 is continuous on (0, 1).
    """
    u = np.asarray(u, dtype=float)
    v = (2.0 * np.cos(2.0 * np.pi * u) + 1.0 - b) / (1.0 + b)
    v = np.clip(v, -1.0, 1.0)
    g = np.arccos(v) / (2.0 * np.pi)
    out = np.where(u <= 0.5, g, 1.0 - g)
    return np.where(u == 0.0, 0.0, out)


def gamma(p: SlitParticle, x):
    """Lifted circle action of the inverse particle map.

    gamma is the unique lifting with g(e^{2 pi i x}) = e^{2 pi i gamma(x)},
    gamma continuous on attachment-free intervals, gamma(x + n) = gamma(x) + n,
    and gamma(theta + n) := theta + n at the attachment point itself.
    Rotation acts by conjugation: gamma(x) = theta + gamma_0(x - theta).
    """
    x = np.asarray(x, dtype=float)
    xr = x - p.theta
    n = np.floor(xr)
    u = xr - n
    out = (p.theta + _gamma0_frac(p.b, u)) + n
    return float(out) if out.ndim == 0 else out


def gamma_tilde(p: SlitParticle, x):
    """Boundary displacement gamma(x) - x; 1-periodic and O(d) in size.

    Computed without cancellation as gamma_0(u) - u on the fractional part,
    so the value is identical across periods.  For the radial slit it is odd
    about the attachment point: gamma_tilde(theta + u) = -gamma_tilde(theta - u).
    """
    x = np.asarray(x, dtype=float)
    u = (x - p.theta) % 1.0
    out = _gamma0_frac(p.b, u) - u
    return float(out) if out.ndim == 0 else out
