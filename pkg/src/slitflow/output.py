"""File emitters: series CSV, geometry CSV, JSON documents, SVG figures, manifests.

All numeric output is written through repr(float), which round-trips
doubles exactly; re-reading a written event log reproduces bit-identical
simulations.  SVG figures are standalone static documents: a fixed viewport
scaled to the data bounding box, the unit circle drawn for scale, one path
per object.
"""

import hashlib
import json
import time
import warnings

import numpy as np

from . import __version__

__all__ = [
    "write_series_csv",
    "write_geometry_csv",
    "write_json",
    "render_svg",
    "render_flow_svg",
    "sha256_file",
    "Manifest",
]


def write_series_csv(path, times, values):
    """Two-column series, fixed header ``t,value``, full decimal precision."""
    with open(path, "w") as fh:
        fh.write("t,value\n")
        for t, v in zip(times, values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
    return path


def write_geometry_csv(path, vertices):
    """Closed polyline, one ``re,im`` row per vertex."""
    with open(path, "w") as fh:
        fh.write("re,im\n")
        for w in np.asarray(vertices, dtype=complex):
            fh.write(f"{float(w.real)!r},{float(w.imag)!r}\n")
    return path


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


_SVG_HEADER = (
    '<?xml version="1.0" encoding="UTF-8"?>\n'
    '<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
    'viewBox="{x0} {y0} {side} {side}">\n'
    '<rect x="{x0}" y="{y0}" width="{side}" height="{side}" fill="white"/>\n'
)

_PALETTE = ["#1f3b73", "#b03a2e", "#1e8449", "#7d3c98", "#b7950b", "#117a8b"]


def _path_from_points(xs, ys, close=False):
    pieces = [f"M {xs[0]:.6g} {ys[0]:.6g}"]
    pieces.extend(f"L {x:.6g} {y:.6g}" for x, y in zip(xs[1:], ys[1:]))
    if close:
        pieces.append("Z")
    return " ".join(pieces)


def render_svg(path, boundaries, size=720, stroke=None, show_unit_circle=True,
               points=None):
    """Render one or more closed boundaries to a standalone SVG file.

    ``boundaries`` is a HullBoundary, a complex vertex array, or a list of
    either; ``points`` is an optional complex array drawn as dot markers
    (slit tips, roots).  Returns the path, or None (with a warning) on
    empty input.
    """
    if boundaries is None:
        warnings.warn("render_svg: empty input, nothing written")
        return None
    if not isinstance(boundaries, (list, tuple)):
        boundaries = [boundaries]
    polys = []
    for b in boundaries:
        verts = np.asarray(getattr(b, "vertices", b), dtype=complex)
        if verts.size:
            polys.append(verts)
    if not polys:
        warnings.warn("render_svg: empty input, nothing written")
        return None

    allpts = np.concatenate(polys)
    lim = 1.05 * max(float(np.max(np.abs(allpts.real))),
                     float(np.max(np.abs(allpts.imag))), 1.0)
    side = 2 * lim
    parts = [_SVG_HEADER.format(size=size, x0=-lim, y0=-lim, side=side)]
    # y flips so that the positive imaginary axis points up
    parts.append(f'<g transform="scale(1,-1)" stroke-width="{side / size * 1.2:.6g}">\n')
    if show_unit_circle:
        parts.append('<circle cx="0" cy="0" r="1" fill="none" stroke="#999999" '
                     'stroke-dasharray="0.05,0.05"/>\n')
    palette = list(stroke) if stroke else _PALETTE
    for i, verts in enumerate(polys):
        color = palette[i % len(palette)]
        parts.append(f'<path d="{_path_from_points(verts.real, verts.imag, close=True)}" '
                     f'fill="none" stroke="{color}"/>\n')
    if points is not None and np.asarray(points).size:
        pts = np.asarray(points, dtype=complex)
        r = side / size * 1.6
        parts.append('<g fill="#b03a2e" stroke="none">\n')
        parts.extend(f'<circle cx="{w.real:.6g}" cy="{w.imag:.6g}" r="{r:.3g}"/>\n'
                     for w in pts)
        parts.append("</g>\n")
    parts.append("</g>\n</svg>\n")
    with open(path, "w") as fh:
        fh.write("".join(parts))
    return path


def render_flow_svg(path, times, values, size=720, margin=0.06):
    """Trajectory panel: circle position on the horizontal axis, time running
    down the vertical axis, one polyline per tracked point."""
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if times.size == 0 or values.size == 0:
        warnings.warn("render_flow_svg: empty input, nothing written")
        return None
    t0, t1 = float(times[0]), float(times[-1])
    span_t = (t1 - t0) or 1.0
    x_lo = float(values.min())
    x_hi = float(values.max())
    span_x = (x_hi - x_lo) or 1.0
    x_lo -= margin * span_x
    span_x *= 1 + 2 * margin

    def sx(v):
        return (v - x_lo) / span_x * size

    def sy(t):
        return (t - t0) / span_t * size

    parts = [_SVG_HEADER.format(size=size, x0=0, y0=0, side=size),
             f'<g fill="none" stroke-width="{size / 720:.3g}">\n']
    for k in range(values.shape[0]):
        color = _PALETTE[k % len(_PALETTE)]
        parts.append(f'<path d="{_path_from_points(sx(values[k]), sy(times))}" '
                     f'stroke="{color}"/>\n')
    parts.append("</g>\n</svg>\n")
    with open(path, "w") as fh:
        fh.write("".join(parts))
    return path


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Run record: config echo, tool version, wall clock, per-output checksums."""

    def __init__(self, config):
        self.config = config
        self._t0 = time.monotonic()
        self.outputs = {}

    def add(self, path):
        self.outputs[str(path).rsplit("/", 1)[-1]] = sha256_file(path)
        return path

    def write(self, path):
        return write_json(path, {
            "version": __version__,
            "config": self.config,
            "wall_clock_s": round(time.monotonic() - self._t0, 3),
            "outputs": self.outputs,
        })
