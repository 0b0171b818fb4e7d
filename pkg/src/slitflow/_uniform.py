"""Event-loop kernels for the uniform-law boundary flow.

Uniform attachment at rate rho(P) means ~rho events per unit time (~1e8 at
d = 0.01), far beyond what a vectorised numpy loop can chew through, so the
sequential per-replica event loops are compiled.  Each replica owns a
counter-based SplitMix64 stream keyed from the master seed, which keeps
results identical for any thread count or scheduling.

The boundary displacement gamma_tilde is read from a cache-resident
piecewise-linear table (16384 cells, 128 kB); against the exact Joukowski
chain this biases E[gamma_tilde^2] by ~2e-4 relative at d = 0.01, far
inside the statistical tolerances the kernels are used for.  The production
kernel interleaves two replica chains per task to hide the table-load
latency; it is bit-identical to the plain reference kernel.
"""

import numba as nb
import numpy as np

from .conformal import SlitParticle, gamma_tilde

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


def gamma_tilde_table(d, n_cells=16384):
    """Piecewise-linear table of gamma_tilde on [0, 1] with one-sided limits
    at the attachment point (the convention value gamma_tilde(0) = 0 is a
    single point of measure zero and must not pollute the interpolation)."""
    p = SlitParticle(d)
    u = np.arange(n_cells + 1) / n_cells
    tab = gamma_tilde(p, u)
    x0 = np.arccos((3.0 - p.b) / (1.0 + p.b)) / (2.0 * np.pi)
    tab[0] = x0
    tab[-1] = -x0
    return tab


@nb.njit(nb.uint64(nb.uint64), cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> nb.uint64(30))) * nb.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> nb.uint64(27))) * nb.uint64(0x94D049BB133111EB)
    return z ^ (z >> nb.uint64(31))


@nb.njit(cache=True, parallel=True)
def single_point_kernel(seeds, counts, table, x_start):
    """Replay counts[r, j] uniform-angle events per replica, recording the
    lifted position after each cumulative count.  Returns (R, n_cp).

    Replicas are processed in pairs (two independent update chains per
    task), which roughly doubles throughput by overlapping the
    position-dependent table loads.
    """
    n_rep, n_cp = counts.shape
    n = table.size - 1
    out = np.empty((n_rep, n_cp))
    n_pairs = (n_rep + 1) // 2
    for pidx in nb.prange(n_pairs):
        r1 = 2 * pidx
        r2 = r1 + 1
        two = r2 < n_rep
        s1 = seeds[r1]
        s2 = seeds[r2] if two else np.uint64(0)
        x1 = x_start
        x2 = x_start
        done1 = np.int64(0)
        done2 = np.int64(0)
        for j in range(n_cp):
            t1 = counts[r1, j]
            t2 = counts[r2, j] if two else np.int64(0)
            m = min(t1 - done1, t2 - done2)
            for _ in range(m):
                s1 = s1 + GOLDEN
                s2 = s2 + GOLDEN
                th1 = (_mix64(s1) >> np.uint64(11)) * _INV53
                th2 = (_mix64(s2) >> np.uint64(11)) * _INV53
                u1 = x1 - th1
                u1 -= np.floor(u1)
                u2 = x2 - th2
                u2 -= np.floor(u2)
                p1 = u1 * n
                p2 = u2 * n
                i1 = np.int64(p1)
                i2 = np.int64(p2)
                x1 += table[i1] + (p1 - i1) * (table[i1 + 1] - table[i1])
                x2 += table[i2] + (p2 - i2) * (table[i2 + 1] - table[i2])
            done1 += m
            done2 += m
            while done1 < t1:
                s1 = s1 + GOLDEN
                th1 = (_mix64(s1) >> np.uint64(11)) * _INV53
                u1 = x1 - th1
                u1 -= np.floor(u1)
                p1 = u1 * n
                i1 = np.int64(p1)
                x1 += table[i1] + (p1 - i1) * (table[i1 + 1] - table[i1])
                done1 += 1
            while done2 < t2:
                s2 = s2 + GOLDEN
                th2 = (_mix64(s2) >> np.uint64(11)) * _INV53
                u2 = x2 - th2
                u2 -= np.floor(u2)
                p2 = u2 * n
                i2 = np.int64(p2)
                x2 += table[i2] + (p2 - i2) * (table[i2 + 1] - table[i2])
                done2 += 1
            out[r1, j] = x1
            if two:
                out[r2, j] = x2
    return out


@nb.njit(cache=True, parallel=True)
def single_point_kernel_reference(seeds, counts, table, x_start):
    """Plain one-chain-per-replica variant; kept as the equality oracle for
    the interleaved production kernel."""
    n_rep, n_cp = counts.shape
    n = table.size - 1
    out = np.empty((n_rep, n_cp))
    for r in nb.prange(n_rep):
        s = seeds[r]
        x = x_start
        done = np.int64(0)
        for j in range(n_cp):
            target = counts[r, j]
            while done < target:
                s = s + GOLDEN
                theta = (_mix64(s) >> np.uint64(11)) * _INV53
                u = x - theta
                u -= np.floor(u)
                pos = u * n
                i = np.int64(pos)
                x += table[i] + (pos - i) * (table[i + 1] - table[i])
                done += 1
            out[r, j] = x
    return out


@nb.njit(cache=True, parallel=True)
def two_point_kernel(seeds, counts, table, x1_start, x2_start):
    """Same event sequence applied to two tracked points; returns (R, n_cp, 2)."""
    n_rep, n_cp = counts.shape
    n = table.size - 1
    out = np.empty((n_rep, n_cp, 2))
    for r in nb.prange(n_rep):
        s = seeds[r]
        x1 = x1_start
        x2 = x2_start
        done = np.int64(0)
        for j in range(n_cp):
            target = counts[r, j]
            while done < target:
                s = s + GOLDEN
                theta = (_mix64(s) >> np.uint64(11)) * _INV53
                u1 = x1 - theta
                u1 -= np.floor(u1)
                pos = u1 * n
                i = np.int64(pos)
                x1 += table[i] + (pos - i) * (table[i + 1] - table[i])
                u2 = x2 - theta
                u2 -= np.floor(u2)
                pos = u2 * n
                i = np.int64(pos)
                x2 += table[i] + (pos - i) * (table[i + 1] - table[i])
                done += 1
            out[r, j, 0] = x1
            out[r, j, 1] = x2
    return out
