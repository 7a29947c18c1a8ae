"""Level-set extraction on a sampled window via marching squares.

The field is sampled at box corners of a lattice window; each mixed-sign box
contributes one or two segments with linearly interpolated endpoints.  Saddle
boxes (two opposite corners above the level) are disambiguated by the sign of
the corner mean.  Segments are chained through shared lattice edges, so a
returned polyline is either closed or ends on the window boundary.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec

# edge codes within one box
_B, _R, _T, _L = 0, 1, 2, 3

# case index bits: (00, 10, 11, 01) corners at or above the level
_CASES = {
    1: [(_L, _B)],
    2: [(_B, _R)],
    4: [(_R, _T)],
    8: [(_T, _L)],
    3: [(_L, _R)],
    6: [(_B, _T)],
    12: [(_R, _L)],
    9: [(_B, _T)],
    7: [(_T, _L)],
    11: [(_R, _T)],
    13: [(_B, _R)],
    14: [(_L, _B)],
}
_SADDLE_HI = {5: [(_T, _L), (_B, _R)], 10: [(_L, _B), (_R, _T)]}
_SADDLE_LO = {5: [(_L, _B), (_R, _T)], 10: [(_B, _R), (_T, _L)]}


def _edge_key(i, k, edge):
    """Global lattice-edge id shared by the two boxes adjacent to it."""
    if edge == _B:
        return ("h", i, k)
    if edge == _T:
        return ("h", i, k + 1)
    if edge == _L:
        return ("v", i, k)
    return ("v", i + 1, k)


def extract_level_set(h, value, window: GridSpec):
    """Contours of ``h(x, y) == value`` sampled on the window lattice.

    ``h`` is a callable taking coordinate arrays.  Returns a list of (n, 2)
    vertex arrays; an empty list when the level is not attained.
    """
    ni, nk = window.extent
    xs = window.origin[0] + np.arange(ni + 1) * window.delta_j
    ys = window.origin[1] + np.arange(nk + 1) * window.delta_theta
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    f = np.asarray(h(xg, yg), dtype=float) - float(value)
    if not np.all(np.isfinite(f)):
        raise ValueError("field is not finite on the window")

    above = f >= 0.0
    case = (
        above[:-1, :-1].astype(np.int8)
        + 2 * above[1:, :-1]
        + 4 * above[1:, 1:]
        + 8 * above[:-1, 1:]
    )
    mixed = np.nonzero((case != 0) & (case != 15))

    def _cross(fa, fb, pa, pb):
        t = fa / (fa - fb)
        return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

    # endpoint coordinates per edge id are computed once, so the two boxes
    # sharing an edge agree bitwise and chaining is exact
    points = {}
    links = {}

    def _point(i, k, edge):
        key = _edge_key(i, k, edge)
        if key in points:
            return key
        if edge == _B:
            pt = _cross(f[i, k], f[i + 1, k], (xs[i], ys[k]), (xs[i + 1], ys[k]))
        elif edge == _T:
            pt = _cross(f[i, k + 1], f[i + 1, k + 1], (xs[i], ys[k + 1]), (xs[i + 1], ys[k + 1]))
        elif edge == _L:
            pt = _cross(f[i, k], f[i, k + 1], (xs[i], ys[k]), (xs[i], ys[k + 1]))
        else:
            pt = _cross(f[i + 1, k], f[i + 1, k + 1], (xs[i + 1], ys[k]), (xs[i + 1], ys[k + 1]))
        points[key] = pt
        return key

    for i, k in zip(*mixed):
        c = int(case[i, k])
        if c in (5, 10):
            center = f[i, k] + f[i + 1, k] + f[i + 1, k + 1] + f[i, k + 1]
            segs = _SADDLE_HI[c] if center >= 0.0 else _SADDLE_LO[c]
        else:
            segs = _CASES[c]
        for ea, eb in segs:
            ka = _point(i, k, ea)
            kb = _point(i, k, eb)
            links.setdefault(ka, []).append(kb)
            links.setdefault(kb, []).append(ka)

    # walk chains: open ones first (degree-1 endpoints), then closed loops
    unused = {k: list(v) for k, v in links.items()}

    def _walk(start):
        chain = [start]
        while unused.get(chain[-1]):
            nxt = unused[chain[-1]].pop()
            unused[nxt].remove(chain[-1])
            chain.append(nxt)
        return chain

    polylines = []
    for start in [k for k, v in links.items() if len(v) == 1]:
        if unused[start]:
            polylines.append(_walk(start))
    for start in list(links):
        if unused[start]:
            polylines.append(_walk(start))

    out = []
    for chain in polylines:
        coords = np.array([points[k] for k in chain], dtype=float)
        # merge vertices that coincide (interpolation hit a lattice corner)
        if len(coords) > 1:
            keep = np.ones(len(coords), dtype=bool)
            keep[1:] = np.any(np.diff(coords, axis=0) != 0.0, axis=1)
            coords = coords[keep]
        if len(coords) >= 2:
            out.append(coords)
    return out


def polyline_length(vertices):
    d = np.diff(np.asarray(vertices, dtype=float), axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def is_closed(vertices):
    v = np.asarray(vertices)
    return bool(np.all(v[0] == v[-1]))
