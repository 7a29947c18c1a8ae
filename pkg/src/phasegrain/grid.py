"""Box-lattice geometry on the (j, theta) plane.

The lattice is a fixed grid of rectangles of size delta_j x delta_theta whose
volume equals the effective Planck cell hbar_eff.  A macroscopic region
rasterizes into a cell: the set of frontier boxes (whose closed rectangle
meets the boundary curve) plus the set of interior boxes (fully inside).
The graininess coefficient of a cell is the frontier/interior volume ratio.
"""

from __future__ import annotations

import csv
import io
import json
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRegion, OmegaUndefined, RegionOutsideGrid

BoxIndex = namedtuple("BoxIndex", ["i", "k"])

_REL_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Fixed box lattice: widths, effective Planck volume, origin and extent.

    ``delta_j * delta_theta`` must equal ``hbar_eff`` (the box volume *is*
    the Planck cell, possibly rescaled by a small integer multiplier via
    :meth:`cover`).
    """

    delta_j: float
    delta_theta: float
    hbar_eff: float
    origin: tuple[float, float]
    extent: tuple[int, int]

    def __post_init__(self):
        if self.delta_j <= 0 or self.delta_theta <= 0 or self.hbar_eff <= 0:
            raise ValueError("box widths and hbar_eff must be positive")
        vol = self.delta_j * self.delta_theta
        if abs(vol - self.hbar_eff) > _REL_TOL * self.hbar_eff:
            raise ValueError(
                f"box volume {vol!r} != hbar_eff {self.hbar_eff!r}: "
                "the lattice box must have Planck volume"
            )
        ni, nk = self.extent
        if int(ni) != ni or int(nk) != nk or ni < 1 or nk < 1:
            raise ValueError("extent components must be integers >= 1")
        object.__setattr__(self, "extent", (int(ni), int(nk)))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def cover(cls, j_range, theta_range, hbar, aspect=1.0, n0=1):
        """Build a lattice of volume ``n0 * hbar`` boxes covering a window.

        ``aspect`` is delta_j / delta_theta.  The extent is rounded up so the
        window fits; the origin is the window corner.
        """
        vol = n0 * hbar
        delta_theta = float(np.sqrt(vol / aspect))
        delta_j = vol / delta_theta
        jlo, jhi = j_range
        tlo, thi = theta_range
        ni = max(1, int(np.ceil((jhi - jlo) / delta_j - 1e-9)))
        nk = max(1, int(np.ceil((thi - tlo) / delta_theta - 1e-9)))
        return cls(delta_j, delta_theta, vol, (float(jlo), float(tlo)), (ni, nk))

    @property
    def j_max(self):
        return self.origin[0] + self.extent[0] * self.delta_j

    @property
    def theta_max(self):
        return self.origin[1] + self.extent[1] * self.delta_theta

    def contains_point(self, j, theta):
        return (self.origin[0] <= j <= self.j_max) and (self.origin[1] <= theta <= self.theta_max)

    def box_center(self, i, k):
        return (
            self.origin[0] + (np.asarray(i) + 0.5) * self.delta_j,
            self.origin[1] + (np.asarray(k) + 0.5) * self.delta_theta,
        )

    def to_json(self):
        return json.dumps(
            {
                "delta_j": self.delta_j,
                "delta_theta": self.delta_theta,
                "hbar_eff": self.hbar_eff,
                "origin": list(self.origin),
                "extent": list(self.extent),
            }
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            d["delta_j"],
            d["delta_theta"],
            d["hbar_eff"],
            tuple(d["origin"]),
            tuple(d["extent"]),
        )


class Region:
    """Simply connected region bounded by a closed counterclockwise polyline.

    Vertices are (j, theta) pairs; the first vertex must equal the last.
    Self-intersection is a caller obligation (it is not checked: advected
    boundaries with many vertices stay simple under area-preserving maps).
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 4:
            raise ValueError("need an (n, 2) vertex array with n >= 4 (closed)")
        if not np.array_equal(v[0], v[-1]):
            raise ValueError("boundary polyline must be closed (first == last vertex)")
        self.vertices = v
        if self.area <= 0:
            raise ValueError("boundary must be counterclockwise (signed area > 0)")

    @classmethod
    def polygon(cls, points):
        """Close an open vertex list and build the region."""
        pts = np.asarray(points, dtype=float)
        if not np.array_equal(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[0]])
        return cls(pts)

    @classmethod
    def rectangle(cls, j0, theta0, height, base):
        """Axis-aligned rectangle: height along j, base along theta."""
        return cls.polygon(
            [
                (j0, theta0),
                (j0 + height, theta0),
                (j0 + height, theta0 + base),
                (j0, theta0 + base),
            ]
        )

    @property
    def area(self):
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))

    def centroid(self):
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        cross = x[:-1] * y[1:] - x[1:] * y[:-1]
        a = 0.5 * np.sum(cross)
        cx = np.sum((x[:-1] + x[1:]) * cross) / (6.0 * a)
        cy = np.sum((y[:-1] + y[1:]) * cross) / (6.0 * a)
        return float(cx), float(cy)

    def translated(self, dj, dtheta):
        return Region(self.vertices + np.array([dj, dtheta]))


@dataclass
class Cell:
    """Rasterized region: interior boxes (C) and frontier boxes (Sigma).

    Box indices are stored as integer arrays of shape (n, 2); the set views
    are built lazily.  Interior and frontier are disjoint by construction.
    """

    interior_boxes: np.ndarray
    frontier_boxes: np.ndarray
    grid: GridSpec
    _interior_set: frozenset = field(default=None, repr=False, compare=False)
    _frontier_set: frozenset = field(default=None, repr=False, compare=False)

    @property
    def interior(self) -> frozenset:
        if self._interior_set is None:
            self._interior_set = frozenset(BoxIndex(int(i), int(k)) for i, k in self.interior_boxes)
        return self._interior_set

    @property
    def frontier(self) -> frozenset:
        if self._frontier_set is None:
            self._frontier_set = frozenset(BoxIndex(int(i), int(k)) for i, k in self.frontier_boxes)
        return self._frontier_set

    @property
    def n_interior(self):
        return len(self.interior_boxes)

    @property
    def n_frontier(self):
        return len(self.frontier_boxes)

    @property
    def interior_volume(self):
        return self.n_interior * self.grid.hbar_eff

    @property
    def frontier_volume(self):
        return self.n_frontier * self.grid.hbar_eff

    def contains_box(self, i, k):
        return (i, k) in self.interior or (i, k) in self.frontier

    def to_csv(self, path_or_file):
        """Write ``i,k,class`` rows, sorted, with a one-line header."""
        rows = [(int(i), int(k), "interior") for i, k in self.interior_boxes]
        rows += [(int(i), int(k), "frontier") for i, k in self.frontier_boxes]
        rows.sort()
        close = False
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            fh = open(path_or_file, "w", newline="")
            close = True
        else:
            fh = path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["i", "k", "class"])
            w.writerows(rows)
        finally:
            if close:
                fh.close()

    @classmethod
    def from_csv(cls, path_or_file, grid):
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            fh = open(path_or_file, newline="")
        else:
            fh = io.StringIO(path_or_file.read()) if hasattr(path_or_file, "read") else path_or_file
        with fh:
            rd = csv.reader(fh)
            header = next(rd)
            if header != ["i", "k", "class"]:
                raise ValueError(f"unexpected cell CSV header {header}")
            inter, front = [], []
            for i, k, cls_name in rd:
                (inter if cls_name == "interior" else front).append((int(i), int(k)))
        return cls(
            np.array(inter, dtype=np.int64).reshape(-1, 2),
            np.array(front, dtype=np.int64).reshape(-1, 2),
            grid,
        )


def omega(cell: Cell) -> float:
    """Graininess coefficient: frontier volume over interior volume."""
    if cell.n_interior == 0:
        raise OmegaUndefined("cell has no interior boxes")
    return cell.n_frontier / cell.n_interior


# ---------------------------------------------------------------------------
# rasterization internals
# ---------------------------------------------------------------------------


_SNAP = 1e-9  # box units; lattice-aligned inputs must classify exactly


def _to_box_units(vertices, grid):
    """Scale vertices to lattice units and snap near-integer coordinates."""
    u = np.empty_like(vertices, dtype=float)
    u[:, 0] = (vertices[:, 0] - grid.origin[0]) / grid.delta_j
    u[:, 1] = (vertices[:, 1] - grid.origin[1]) / grid.delta_theta
    r = np.round(u)
    snap = np.abs(u - r) < _SNAP
    u[snap] = r[snap]
    return u


def _split_long_edges(u, max_span=0.5):
    """Subdivide polyline edges so every piece spans < max_span per axis.

    Keeps the curve identical; only adds collinear points.  Needed so each
    piece overlaps at most a 2 x 2 block of boxes.
    """
    a, b = u[:-1], u[1:]
    span = np.abs(b - a)
    n_sub = np.ceil(np.max(span, axis=1) / max_span - 1e-12).astype(np.int64)
    n_sub = np.maximum(n_sub, 1)
    if np.all(n_sub == 1):
        return a, b
    idx = np.repeat(np.arange(len(a)), n_sub)
    # fractional positions within each parent edge
    offs = np.concatenate([np.arange(n) for n in n_sub])
    frac0 = offs / n_sub[idx]
    frac1 = (offs + 1) / n_sub[idx]
    a_s = a[idx] + (b - a)[idx] * frac0[:, None]
    b_s = a[idx] + (b - a)[idx] * frac1[:, None]
    return a_s, b_s


def _segment_box_hits(a, b, extent):
    """Classify boxes hit by small segments (all in box units).

    Returns (touched, pierced): integer (n, 2) arrays of boxes whose closed
    rectangle intersects some segment, and boxes whose open interior does.
    Segments must span less than one box per axis (see _split_long_edges).
    """
    ni, nk = extent
    ax, ay = a[:, 0], a[:, 1]
    bx, by = b[:, 0], b[:, 1]

    xmin, xmax = np.minimum(ax, bx), np.maximum(ax, bx)
    ymin, ymax = np.minimum(ay, by), np.maximum(ay, by)

    # closed box [i, i+1] meets [xmin, xmax] iff i in [xmin - 1, xmax]
    i_lo = np.ceil(xmin - 1.0).astype(np.int64)
    k_lo = np.ceil(ymin - 1.0).astype(np.int64)

    touched_list = []
    pierced_list = []
    for di in (0, 1):
        for dk in (0, 1):
            i = i_lo + di
            k = k_lo + dk
            in_grid = (i >= 0) & (i < ni) & (k >= 0) & (k < nk)
            ok = in_grid & (i <= np.floor(xmax)) & (k <= np.floor(ymax))
            if not np.any(ok):
                continue
            # Liang-Barsky clip of the segment against box [i, i+1] x [k, k+1]
            x1, y1 = ax[ok], ay[ok]
            x2, y2 = bx[ok], by[ok]
            bi, bk = i[ok].astype(float), k[ok].astype(float)
            vx, vy = x2 - x1, y2 - y1
            t_lo = np.zeros_like(x1)
            t_hi = np.ones_like(x1)
            valid = np.ones_like(x1, dtype=bool)
            for p, qlo, qhi in ((vx, bi - x1, bi + 1.0 - x1), (vy, bk - y1, bk + 1.0 - y1)):
                deg = p == 0.0
                # degenerate axis: inside the slab or miss entirely
                valid &= ~deg | ((qlo <= 0.0) & (qhi >= 0.0))
                with np.errstate(divide="ignore", invalid="ignore"):
                    ta = np.where(deg, 0.0, qlo / np.where(deg, 1.0, p))
                    tb = np.where(deg, 1.0, qhi / np.where(deg, 1.0, p))
                tmin = np.minimum(ta, tb)
                tmax = np.maximum(ta, tb)
                t_lo = np.where(deg, t_lo, np.maximum(t_lo, tmin))
                t_hi = np.where(deg, t_hi, np.minimum(t_hi, tmax))
            hit = valid & (t_lo <= t_hi)
            if not np.any(hit):
                continue
            iw = i[ok][hit]
            kw = k[ok][hit]
            touched_list.append(np.stack([iw, kw], axis=1))
            # open-box hit: midpoint of the clipped piece strictly inside
            tm = 0.5 * (t_lo[hit] + t_hi[hit])
            mx = x1[hit] + tm * vx[hit]
            my = y1[hit] + tm * vy[hit]
            strict = (
                (mx > bi[hit]) & (mx < bi[hit] + 1.0) & (my > bk[hit]) & (my < bk[hit] + 1.0)
            )
            if np.any(strict):
                pierced_list.append(np.stack([iw[strict], kw[strict]], axis=1))

    def _unique(parts):
        if not parts:
            return np.empty((0, 2), dtype=np.int64)
        return np.unique(np.concatenate(parts, axis=0), axis=0)

    return _unique(touched_list), _unique(pierced_list)


def _centers_inside(a, b, extent):
    """Even-odd scanline fill: boolean (ni, nk) mask of box centers inside.

    Casts one ray per theta-row of centers; the half-open crossing rule makes
    the crossing count even for a closed boundary.  All in box units, so the
    center lines sit exactly at k + 1/2.
    """
    ni, nk = extent

    y1 = a[:, 1]
    y2 = b[:, 1]
    # each small segment straddles at most one row-center line
    k_cand = np.floor(np.maximum(y1, y2) - 0.5).astype(np.int64)
    yc = k_cand + 0.5
    straddle = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
    straddle &= (k_cand >= 0) & (k_cand < nk)
    if not np.any(straddle):
        return np.zeros((ni, nk), dtype=bool)

    k_s = k_cand[straddle]
    y1s, y2s = y1[straddle], y2[straddle]
    x1s, x2s = a[straddle, 0], b[straddle, 0]
    x_cross = x1s + (yc[straddle] - y1s) * (x2s - x1s) / (y2s - y1s)

    order = np.lexsort((x_cross, k_s))
    k_s = k_s[order]
    x_cross = x_cross[order]

    # pair consecutive crossings within each row: even-odd intervals
    row_start = np.flatnonzero(np.diff(k_s, prepend=k_s[0] - 1))
    counts = np.diff(np.append(row_start, len(k_s)))
    if np.any(counts % 2):
        # float degeneracies can unbalance a row; drop unmatched last crossing
        bad = row_start[counts % 2 == 1] + counts[counts % 2 == 1] - 1
        keep = np.ones(len(k_s), dtype=bool)
        keep[bad] = False
        k_s, x_cross = k_s[keep], x_cross[keep]
        row_start = np.flatnonzero(np.diff(k_s, prepend=k_s[0] - 1 if len(k_s) else 0))
    if len(k_s) == 0:
        return np.zeros((ni, nk), dtype=bool)

    xa = x_cross[0::2]
    xb = x_cross[1::2]
    krow = k_s[0::2]
    # first center strictly right of xa, last center strictly left of xb
    i_first = np.floor(xa - 0.5).astype(np.int64) + 1
    i_last = np.ceil(xb - 0.5).astype(np.int64) - 1
    i_first = np.clip(i_first, 0, ni)
    i_last = np.clip(i_last, -1, ni - 1)
    ok = i_first <= i_last
    if not np.any(ok):
        return np.zeros((ni, nk), dtype=bool)
    i_first, i_last, krow = i_first[ok], i_last[ok], krow[ok]

    diff = np.zeros(ni * nk + 1, dtype=np.int64)
    flat_lo = krow * ni + i_first
    flat_hi = krow * ni + i_last + 1
    np.add.at(diff, flat_lo, 1)
    np.add.at(diff, flat_hi, -1)
    mask = np.cumsum(diff[:-1]) > 0
    return mask.reshape(nk, ni).T


def rasterize(region: Region, grid: GridSpec) -> Cell:
    """Rasterize a region into frontier and interior boxes.

    Frontier boxes are those whose closed rectangle meets the boundary curve
    (and which carry some of the region); interior boxes lie fully inside.
    """
    v = region.vertices
    if not (
        np.all(v[:, 0] >= grid.origin[0] - 1e-12 * grid.delta_j)
        and np.all(v[:, 0] <= grid.j_max + 1e-12 * grid.delta_j)
        and np.all(v[:, 1] >= grid.origin[1] - 1e-12 * grid.delta_theta)
        and np.all(v[:, 1] <= grid.theta_max + 1e-12 * grid.delta_theta)
    ):
        raise RegionOutsideGrid("boundary vertex outside the lattice window")
    if region.area < grid.hbar_eff * (1.0 - 1e-9):
        raise DegenerateRegion(
            f"region area {region.area!r} is below one box volume {grid.hbar_eff!r}"
        )

    u = _to_box_units(v, grid)
    a, b = _split_long_edges(u)
    keep = np.any(a != b, axis=1)
    a, b = a[keep], b[keep]

    touched, pierced = _segment_box_hits(a, b, grid.extent)
    inside = _centers_inside(a, b, grid.extent)

    ni, nk = grid.extent
    touched_mask = np.zeros((ni, nk), dtype=bool)
    if len(touched):
        touched_mask[touched[:, 0], touched[:, 1]] = True
    pierced_mask = np.zeros((ni, nk), dtype=bool)
    if len(pierced):
        pierced_mask[pierced[:, 0], pierced[:, 1]] = True

    frontier_mask = pierced_mask | (touched_mask & inside)
    interior_mask = inside & ~touched_mask

    fi, fk = np.nonzero(frontier_mask)
    ii, ik = np.nonzero(interior_mask)
    return Cell(
        np.stack([ii, ik], axis=1).astype(np.int64),
        np.stack([fi, fk], axis=1).astype(np.int64),
        grid,
    )
