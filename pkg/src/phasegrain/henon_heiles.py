"""Henon-Heiles dynamics: symplectic integration, Poincare sections, chaos
classification, and cell advection through the section return map.

The Hamiltonian is H = (px^2 + py^2 + x^2 + y^2)/2 + x^2 y - lam y^3 with
the cubic coefficient configurable: lam = 1/3 is the standard form whose
escape energy is exactly 1/6 (the energies 1/12, 1/8, 1/6 are canonical for
it); lam = 1/2 matches the alternative printed convention.

Time stepping is position Verlet (drift-kick-drift), order 2 and symplectic.
Section crossings (x = 0 with px > 0) are refined by bisection on the linear
dense output of the crossing step; recorded section points carry (y, py, t)
with px implied by the energy shell.  The heavy loops are numba-compiled and
run one orbit per parallel lane with deterministic per-seed outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import EscapeDetected, FoldResolutionExceeded, SeedOffShell
from .flows import OmegaSeries
from .grid import GridSpec, Region, omega, rasterize

_OK, _ESCAPED, _NO_CROSSING = 0, 1, 2


@dataclass(frozen=True)
class HHParams:
    lam: float = 1.0 / 3.0
    step: float = 1e-3
    energy: float = 1.0 / 12.0
    escape_radius: float = 10.0

    def __post_init__(self):
        # lam = 0 is the decoupled-oscillator control used throughout
        if self.lam < 0 or self.step <= 0 or self.energy < 0:
            raise ValueError("need lam >= 0, step > 0, energy >= 0")


@dataclass(frozen=True)
class HHState:
    x: float
    y: float
    px: float
    py: float

    def as_array(self):
        return np.array([self.x, self.y, self.px, self.py], dtype=float)


@dataclass(frozen=True)
class SectionPoint:
    y: float
    py: float
    crossing_time: float


@dataclass(frozen=True)
class OrbitClass:
    seed: SectionPoint
    label: str
    ftle: float


def hh_energy(state: HHState, params: HHParams) -> float:
    x, y, px, py = state.x, state.y, state.px, state.py
    return 0.5 * (px * px + py * py + x * x + y * y) + x * x * y - params.lam * y**3


def transverse_momentum_sq(params: HHParams, y, py):
    """px^2 on the section x = 0 at the configured energy."""
    return 2.0 * params.energy - py * py - y * y + 2.0 * params.lam * y**3


def section_state(params: HHParams, y: float, py: float) -> HHState:
    """Lift a section point onto the energy shell; px > 0 side."""
    px2 = transverse_momentum_sq(params, y, py)
    if px2 < 0:
        raise SeedOffShell(f"px^2 = {px2!r} < 0 at (y, py) = ({y}, {py})")
    return HHState(0.0, float(y), float(np.sqrt(px2)), float(py))


# ---------------------------------------------------------------------------
# compiled kernels (position Verlet throughout)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _kick(x, y, lam):
    ax = -x - 2.0 * x * y
    ay = -y - x * x + 3.0 * lam * y * y
    return ax, ay


@njit(cache=True)
def _integrate_samples(state, h, n_steps, stride, lam, escape_r):
    """March n_steps, sampling every ``stride`` steps.  Returns the sample
    block (t, x, y, px, py) and a status flag."""
    n_samples = n_steps // stride + 1
    out = np.empty((n_samples, 5))
    x, y, px, py = state[0], state[1], state[2], state[3]
    out[0] = (0.0, x, y, px, py)
    row = 1
    for step in range(1, n_steps + 1):
        half = 0.5 * h
        x += half * px
        y += half * py
        ax, ay = _kick(x, y, lam)
        px += h * ax
        py += h * ay
        x += half * px
        y += half * py
        if abs(x) > escape_r or abs(y) > escape_r:
            return out[:row], _ESCAPED
        if step % stride == 0:
            out[row] = (step * h, x, y, px, py)
            row += 1
    return out[:row], _OK


@njit(cache=True)
def _refine_crossing(x0, y0, px0, py0, x1, y1, px1, py1, h, max_iter=60):
    """Bisection on the linear dense output of one step until |x| < 1e-10.

    Returns (tau, y, py) with tau in [0, h] measured from the step start.
    """
    lo = 0.0
    hi = h
    xa = x0
    tau = 0.5 * h
    for _ in range(max_iter):
        tau = 0.5 * (lo + hi)
        s = tau / h
        xm = x0 + s * (x1 - x0)
        if abs(xm) < 1e-10:
            break
        if (xa < 0.0) != (xm < 0.0):
            hi = tau
        else:
            lo = tau
            xa = xm
    s = tau / h
    return tau, y0 + s * (y1 - y0), py0 + s * (py1 - py0)


@njit(cache=True, parallel=True)
def _section_batch(states, h, lam, escape_r, n_crossings, max_steps):
    """Record upward x = 0 crossings for each seed, one orbit per lane."""
    n = states.shape[0]
    hits = np.empty((n, n_crossings, 3))
    counts = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        x, y, px, py = states[i, 0], states[i, 1], states[i, 2], states[i, 3]
        got = 0
        for step in range(1, max_steps + 1):
            x0, y0, px0, py0 = x, y, px, py
            half = 0.5 * h
            x += half * px
            y += half * py
            ax, ay = _kick(x, y, lam)
            px += h * ax
            py += h * ay
            x += half * px
            y += half * py
            if abs(x) > escape_r or abs(y) > escape_r:
                status[i] = _ESCAPED
                break
            if x0 < 0.0 and x >= 0.0:
                tau, yc, pyc = _refine_crossing(x0, y0, px0, py0, x, y, px, py, h)
                hits[i, got, 0] = yc
                hits[i, got, 1] = pyc
                hits[i, got, 2] = (step - 1) * h + tau
                got += 1
                if got == n_crossings:
                    break
        counts[i] = got
        if status[i] == _OK and got < n_crossings:
            status[i] = _NO_CROSSING
    return hits, counts, status


@njit(cache=True, parallel=True)
def _ftle_batch(states, h, lam, escape_r, n_steps, renorm_every, d0, max_crossings):
    """Two-trajectory renormalized divergence rate per seed.

    The twin starts offset by d0 in y; every ``renorm_every`` steps the
    separation is pulled back to d0 along its current direction and the log
    stretching accumulates.  Escaped orbits report a large exponent: leaving
    the bound region is maximal irregularity for this classifier.
    """
    n = states.shape[0]
    ftle = np.zeros(n)
    status = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        x, y, px, py = states[i, 0], states[i, 1], states[i, 2], states[i, 3]
        u, v, pu, pv = x, y + d0, px, py
        logsum = 0.0
        crossings = 0
        steps_done = 0
        escaped = False
        for step in range(1, n_steps + 1):
            half = 0.5 * h
            x0 = x
            x += half * px
            y += half * py
            ax, ay = _kick(x, y, lam)
            px += h * ax
            py += h * ay
            x += half * px
            y += half * py
            u += half * pu
            v += half * pv
            au, av = _kick(u, v, lam)
            pu += h * au
            pv += h * av
            u += half * pu
            v += half * pv
            steps_done = step
            if abs(x) > escape_r or abs(y) > escape_r or abs(u) > escape_r or abs(v) > escape_r:
                escaped = True
                break
            if x0 < 0.0 and x >= 0.0:
                crossings += 1
            if step % renorm_every == 0:
                dx = u - x
                dy = v - y
                dpx = pu - px
                dpy = pv - py
                d = np.sqrt(dx * dx + dy * dy + dpx * dpx + dpy * dpy)
                if d > 0.0:
                    logsum += np.log(d / d0)
                    f = d0 / d
                    u = x + dx * f
                    v = y + dy * f
                    pu = px + dpx * f
                    pv = py + dpy * f
            if max_crossings > 0 and crossings >= max_crossings:
                break
        if escaped:
            status[i] = _ESCAPED
            ftle[i] = 1.0
        else:
            dx = u - x
            dy = v - y
            dpx = pu - px
            dpy = pv - py
            d = np.sqrt(dx * dx + dy * dy + dpx * dpx + dpy * dpy)
            if d > 0.0:
                logsum += np.log(d / d0)
            ftle[i] = logsum / (steps_done * h)
    return ftle, status


@njit(cache=True, parallel=True)
def _return_map_batch(ys, pys, h, lam, escape_r, energy, max_steps):
    """One Poincare return per section point; px lifted from the shell."""
    n = ys.shape[0]
    out = np.empty((n, 3))
    status = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        y = ys[i]
        py = pys[i]
        px2 = 2.0 * energy - py * py - y * y + 2.0 * lam * y**3
        if px2 < 0.0:
            # numerical grazing of the disc boundary: clamp small negatives
            if px2 > -1e-10:
                px2 = 0.0
            else:
                status[i] = _NO_CROSSING
                out[i, 0] = y
                out[i, 1] = py
                out[i, 2] = 0.0
                continue
        x = 0.0
        px = np.sqrt(px2)
        done = False
        for step in range(1, max_steps + 1):
            x0, y0, px0, py0 = x, y, px, py
            half = 0.5 * h
            x += half * px
            y += half * py
            ax, ay = _kick(x, y, lam)
            px += h * ax
            py += h * ay
            x += half * px
            y += half * py
            if abs(x) > escape_r or abs(y) > escape_r:
                status[i] = _ESCAPED
                break
            if x0 < 0.0 and x >= 0.0:
                tau, yc, pyc = _refine_crossing(x0, y0, px0, py0, x, y, px, py, h)
                out[i, 0] = yc
                out[i, 1] = pyc
                out[i, 2] = (step - 1) * h + tau
                done = True
                break
        if not done and status[i] == _OK:
            status[i] = _NO_CROSSING
        if status[i] != _OK:
            out[i, 0] = y
            out[i, 1] = py
            out[i, 2] = 0.0
    return out, status


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def integrate(state: HHState, params: HHParams, duration: float,
              sample_stride: int = 1, direction: int = 1):
    """Position-Verlet trajectory samples: (times, states (n, 4)).

    ``direction=-1`` integrates backward (the stepper is time-reversible).
    """
    if params.step > 0.05:
        raise ValueError("step too coarse; keep h <= 0.05")
    n_steps = int(round(abs(duration) / params.step))
    if n_steps == 0:
        return np.array([0.0]), state.as_array()[None, :]
    h = params.step * (1 if direction >= 0 else -1)
    samples, status = _integrate_samples(
        state.as_array(), h, n_steps, int(sample_stride), params.lam,
        params.escape_radius,
    )
    if status == _ESCAPED:
        raise EscapeDetected(
            f"trajectory left |x|,|y| <= {params.escape_radius} "
            f"after t = {samples[-1, 0] + params.step:.6g}"
        )
    return np.abs(samples[:, 0]), samples[:, 1:]


def poincare_section(params: HHParams, seeds, n_crossings: int):
    """Upward x = 0 crossings for each seed; returns per-seed SectionPoint
    lists gathered in seed order."""
    rows = []
    for seed in seeds:
        y, py = (seed.y, seed.py) if isinstance(seed, SectionPoint) else (seed[0], seed[1])
        rows.append(section_state(params, y, py).as_array())
    states = np.array(rows)
    # generous cap: sections of bound orbits recur within ~2 pi per crossing
    max_steps = int(np.ceil(n_crossings * 40.0 / params.step))
    hits, counts, status = _section_batch(
        states, params.step, params.lam, params.escape_radius,
        int(n_crossings), max_steps,
    )
    if np.any(status == _ESCAPED):
        idx = int(np.argmax(status == _ESCAPED))
        raise EscapeDetected(f"seed {idx} escaped before {n_crossings} crossings")
    out = []
    for i in range(len(states)):
        out.append(
            [SectionPoint(*hits[i, j]) for j in range(counts[i])]
        )
    return out


def section_disc_bounds(params: HHParams):
    """Bounding box of the energetically allowed section disc px^2 >= 0,
    restricted to the connected component around the origin."""
    py_max = float(np.sqrt(2.0 * params.energy))
    ys = np.linspace(-2.5, 2.5, 100001)
    ok = transverse_momentum_sq(params, ys, 0.0) >= 0
    i0 = int(np.searchsorted(ys, 0.0))
    if not ok[i0]:
        raise ValueError("origin is outside the allowed disc at this energy")
    lo = i0
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = i0
    while hi < len(ys) - 1 and ok[hi + 1]:
        hi += 1
    return float(ys[lo]), float(ys[hi]), py_max


def regular_fraction(params: HHParams, resolution: int, n_crossings: int,
                     ftle_threshold: float = 0.01, horizon: float = 1e3,
                     renorm_interval: float = 1.0, offset: float = 1e-8,
                     return_details: bool = False):
    """Area fraction of section seeds whose orbits stay regular.

    Seeds fill a uniform grid over the allowed disc; each is classified by a
    two-trajectory finite-time Lyapunov estimate (separation ``offset``,
    renormalized every ``renorm_interval`` time units, horizon capped by
    both ``horizon`` time units and ``n_crossings`` section returns).
    Escaped seeds count as chaotic.
    """
    if resolution < 8:
        raise ValueError("seed grid resolution must be >= 8")
    y_lo, y_hi, py_max = section_disc_bounds(params)
    ys = np.linspace(y_lo, y_hi, resolution + 2)[1:-1]
    pys = np.linspace(-py_max, py_max, resolution + 2)[1:-1]
    yg, pg = np.meshgrid(ys, pys, indexing="ij")
    mask = transverse_momentum_sq(params, yg, pg) > 0
    seeds_y = yg[mask]
    seeds_py = pg[mask]
    states = np.zeros((len(seeds_y), 4))
    states[:, 1] = seeds_y
    states[:, 3] = seeds_py
    states[:, 2] = np.sqrt(transverse_momentum_sq(params, seeds_y, seeds_py))

    n_steps = int(np.ceil(horizon / params.step))
    renorm_every = max(1, int(round(renorm_interval / params.step)))
    ftle, status = _ftle_batch(
        states, params.step, params.lam, params.escape_radius, n_steps,
        renorm_every, float(offset), int(n_crossings),
    )
    chaotic = (ftle > ftle_threshold) | (status == _ESCAPED)
    fraction = float(np.count_nonzero(~chaotic)) / len(seeds_y)
    if not return_details:
        return fraction
    details = [
        OrbitClass(
            SectionPoint(float(seeds_y[i]), float(seeds_py[i]), 0.0),
            "chaotic" if chaotic[i] else "regular",
            float(ftle[i]),
        )
        for i in range(len(seeds_y))
    ]
    return fraction, details


def _one_return(params, ys, pys, max_steps):
    out, status = _return_map_batch(
        ys, pys, params.step, params.lam, params.escape_radius,
        params.energy, max_steps,
    )
    if np.any(status != _OK):
        idx = int(np.argmax(status != _OK))
        kind = "escaped" if status[idx] == _ESCAPED else "did not return"
        raise EscapeDetected(f"boundary sample {idx} {kind} during a section return")
    return out[:, 0], out[:, 1]


def _refine_gaps(params, ys, pys, src_y, src_py, dj, dt, budget, max_steps):
    """Split image segments wider than half a box by inserting pre-map
    midpoints and mapping only those; repeats until resolved."""
    for _ in range(64):
        gap_j = np.abs(np.diff(ys)) / dj
        gap_t = np.abs(np.diff(pys)) / dt
        wide = np.nonzero((gap_j > 0.5) | (gap_t > 0.5))[0]
        if len(wide) == 0:
            return ys, pys, src_y, src_py
        if len(ys) + len(wide) > budget:
            raise _BudgetExceeded()
        mid_y = 0.5 * (src_y[wide] + src_y[wide + 1])
        mid_py = 0.5 * (src_py[wide] + src_py[wide + 1])
        new_y, new_py = _one_return(params, mid_y, mid_py, max_steps)
        ys = np.insert(ys, wide + 1, new_y)
        pys = np.insert(pys, wide + 1, new_py)
        src_y = np.insert(src_y, wide + 1, mid_y)
        src_py = np.insert(src_py, wide + 1, mid_py)
    raise _BudgetExceeded()


class _BudgetExceeded(Exception):
    pass


def advect_cell_hh(source: Region, params: HHParams, n_returns: int,
                   grid: GridSpec, point_budget: int = 1_000_000) -> OmegaSeries:
    """Advect a section cell through successive Poincare returns.

    The boundary is transported point by point; stretched segments split
    until adjacent images sit closer than half a box, and the image curve is
    re-rasterized after every return.  Blowing through the point budget
    raises FoldResolutionExceeded carrying the partial series: the cell's
    detail has fallen below box scale.
    """
    v = source.vertices
    px2 = transverse_momentum_sq(params, v[:, 0], v[:, 1])
    if np.any(px2 < 0):
        raise SeedOffShell("source region leaves the allowed section disc")

    max_steps = int(np.ceil(1000.0 / params.step))
    cell = rasterize(source, grid)
    times = [0.0]
    measured = [omega(cell) if cell.n_interior else np.inf]
    sig = [cell.frontier_volume]
    interior = [cell.interior_volume]

    ys = v[:, 0].copy()
    pys = v[:, 1].copy()

    def _series():
        return OmegaSeries(
            times, measured, [None] * len(times), sig, interior, source.area
        )

    for n in range(1, n_returns + 1):
        src_y, src_py = ys, pys
        try:
            ys, pys = _one_return(params, src_y, src_py, max_steps)
            ys, pys, src_y, src_py = _refine_gaps(
                params, ys, pys, src_y, src_py, grid.delta_j,
                grid.delta_theta, point_budget, max_steps,
            )
        except _BudgetExceeded:
            raise FoldResolutionExceeded(
                f"boundary refinement passed {point_budget} points at return {n}: "
                "cell detail is below box scale",
                series=_series(),
            ) from None
        boundary = np.stack([ys, pys], axis=1)
        boundary[-1] = boundary[0]
        region = Region(boundary)
        cell = rasterize(region, grid)
        times.append(float(n))
        measured.append(omega(cell) if cell.n_interior else np.inf)
        sig.append(cell.frontier_volume)
        interior.append(cell.interior_volume)
    return _series()


def center_escape_check(source: Region, params: HHParams, n_returns: int,
                        grid: GridSpec | None = None,
                        point_budget: int = 1_000_000) -> bool:
    """True when, at some return up to ``n_returns``, the advected centroid
    falls outside the advected cell's box support."""
    if n_returns == 0:
        return False
    if grid is None:
        y_lo, y_hi, py_max = section_disc_bounds(params)
        grid = GridSpec.cover((y_lo - 0.05, y_hi + 0.05),
                              (-py_max - 0.05, py_max + 0.05), 1e-4)
    max_steps = int(np.ceil(1000.0 / params.step))
    cy, cpy = source.centroid()
    ys = source.vertices[:, 0].copy()
    pys = source.vertices[:, 1].copy()
    c_y = np.array([cy])
    c_py = np.array([cpy])
    for n in range(1, n_returns + 1):
        src_y, src_py = ys, pys
        ys, pys = _one_return(params, src_y, src_py, max_steps)
        try:
            ys, pys, _, _ = _refine_gaps(
                params, ys, pys, src_y, src_py, grid.delta_j,
                grid.delta_theta, point_budget, max_steps,
            )
        except _BudgetExceeded:
            return True  # amoeboid beyond resolution: support is meaningless
        c_y, c_py = _one_return(params, c_y, c_py, max_steps)
        boundary = np.stack([ys, pys], axis=1)
        boundary[-1] = boundary[0]
        cell = rasterize(Region(boundary), grid)
        i = int(np.floor((c_y[0] - grid.origin[0]) / grid.delta_j))
        k = int(np.floor((c_py[0] - grid.origin[1]) / grid.delta_theta))
        if not cell.contains_box(i, k):
            return True
    return False
