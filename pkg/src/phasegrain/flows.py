"""Shear flows generated by one-degree-of-freedom Hamiltonians H(J).

The action is conserved and the angle advances at the action-dependent rate
v(j) = dH/dJ, so time evolution is an exact horizontal shear: no integrator
is involved.  Cells advected by the shear are re-rasterized on the fixed
lattice and their graininess growth is compared against the closed-form
rates (zero for linear H, 2 (v/dTheta)(hbar/VolC) t for quadratic H,
2 B_m t / Theta for a single oscillatory velocity mode).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import NoClosedForm, RegionOutsideGrid, UnnormalizedDensity
from .grid import Cell, GridSpec, Region, omega, rasterize


@dataclass(frozen=True)
class Polynomial:
    """H(J) = sum_n coeffs[n] J^n in energy units."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if not c:
            raise ValueError("coefficient list must be non-empty")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def velocity(self, j):
        j = np.asarray(j, dtype=float)
        v = np.zeros_like(j)
        for n in range(len(self.coeffs) - 1, 0, -1):
            v = v * j + n * self.coeffs[n]
        return v if v.ndim else float(v)

    def velocity_slope_bound(self, j_lo, j_hi):
        """max |v'(j)| over [j_lo, j_hi], from dense sampling of the exact
        derivative polynomial (degree <= a handful in practice)."""
        if len(self.coeffs) <= 2:
            return 0.0
        js = np.linspace(j_lo, j_hi, 257)
        dv = np.zeros_like(js)
        for n in range(len(self.coeffs) - 1, 1, -1):
            dv = dv * js + n * (n - 1) * self.coeffs[n]
        return float(np.max(np.abs(dv)))


@dataclass(frozen=True)
class Oscillatory:
    """Single oscillatory velocity mode v(j) = amplitude cos(mode j / j_ref)."""

    mode: int
    amplitude: float
    j_ref: float

    def __post_init__(self):
        if int(self.mode) != self.mode or self.mode < 1:
            raise ValueError("mode must be a positive integer")
        if self.j_ref <= 0:
            raise ValueError("reference action width must be positive")
        object.__setattr__(self, "mode", int(self.mode))

    def velocity(self, j):
        j = np.asarray(j, dtype=float)
        v = self.amplitude * np.cos(self.mode * j / self.j_ref)
        return v if v.ndim else float(v)

    def velocity_slope_bound(self, j_lo, j_hi):
        return abs(self.amplitude) * self.mode / self.j_ref


HamiltonianModel = Polynomial | Oscillatory


def parse_model(text: str) -> HamiltonianModel:
    """CLI model strings: linear:a0,a1 | quad:a0,a1,a2 | poly:a0,... | osc:m,Bm,deltaJ."""
    kind, _, args = text.partition(":")
    vals = [float(x) for x in args.split(",")] if args else []
    if kind == "linear":
        if len(vals) != 2:
            raise ValueError("linear model takes a0,a1")
        return Polynomial(tuple(vals))
    if kind == "quad":
        if len(vals) != 3:
            raise ValueError("quad model takes a0,a1,a2")
        return Polynomial(tuple(vals))
    if kind == "poly":
        if not vals:
            raise ValueError("poly model takes a0,...")
        return Polynomial(tuple(vals))
    if kind == "osc":
        if len(vals) != 3:
            raise ValueError("osc model takes m,Bm,deltaJ")
        return Oscillatory(int(vals[0]), vals[1], vals[2])
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class FlowState:
    j: float
    theta: float


def flow_map(model: HamiltonianModel, state: FlowState, t: float) -> FlowState:
    """Exact shear: action fixed, angle advanced by v(j) t."""
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    return FlowState(state.j, state.theta + model.velocity(state.j) * t)


def _advected_boundary(source: Region, model, t, grid):
    """Map the boundary with subdivision fine enough that adjacent image
    points differ by less than half a box per axis."""
    v = source.vertices
    a, b = v[:-1], v[1:]
    dj_e = b[:, 0] - a[:, 0]
    dt_e = b[:, 1] - a[:, 1]
    j_lo = float(np.min(v[:, 0]))
    j_hi = float(np.max(v[:, 0]))
    slope = model.velocity_slope_bound(j_lo, j_hi)
    # image angle increment along an edge: |dtheta + t v'(j) dj|
    theta_span = np.abs(dt_e) + abs(t) * slope * np.abs(dj_e)
    n_sub = np.maximum(
        np.ceil(np.abs(dj_e) / (0.49 * grid.delta_j)),
        np.ceil(theta_span / (0.49 * grid.delta_theta)),
    ).astype(np.int64)
    n_sub = np.maximum(n_sub, 1)
    total = int(np.sum(n_sub))
    if total > 20_000_000:
        raise RegionOutsideGrid(f"boundary resampling needs {total} points")
    idx = np.repeat(np.arange(len(a)), n_sub)
    offs = np.concatenate([np.arange(n) for n in n_sub])
    frac = offs / n_sub[idx]
    pts = a[idx] + np.stack([dj_e, dt_e], axis=1)[idx] * frac[:, None]
    pts = np.vstack([pts, v[-1]])
    jj = pts[:, 0]
    return np.stack([jj, pts[:, 1] + model.velocity(jj) * t], axis=1)


def expand_grid_theta(grid: GridSpec, theta_lo, theta_hi, margin_boxes=2,
                      max_boxes=5_000_000) -> GridSpec:
    """Same lattice, window stretched along theta to cover [theta_lo, theta_hi].

    The new origin shifts by a whole number of boxes so box boundaries stay
    where they were.
    """
    dt = grid.delta_theta
    k_lo = int(np.floor((theta_lo - grid.origin[1]) / dt)) - margin_boxes
    k_hi = int(np.ceil((theta_hi - grid.origin[1]) / dt)) + margin_boxes
    k_lo = min(k_lo, 0)
    k_hi = max(k_hi, grid.extent[1])
    nk = k_hi - k_lo
    if nk * grid.extent[0] > max_boxes:
        raise RegionOutsideGrid(f"theta expansion to {nk} boxes exceeds the limit")
    origin = (grid.origin[0], grid.origin[1] + k_lo * dt)
    return GridSpec(grid.delta_j, dt, grid.hbar_eff, origin, (grid.extent[0], nk))


def advect_cell(source: Region, model: HamiltonianModel, t: float,
                grid: GridSpec) -> Cell:
    """Advect a region through the shear and re-rasterize it.

    The lattice stays fixed; its theta window grows as needed to hold the
    sheared image.
    """
    boundary = _advected_boundary(source, model, t, grid)
    work_grid = expand_grid_theta(grid, float(np.min(boundary[:, 1])),
                                  float(np.max(boundary[:, 1])))
    return rasterize(Region(boundary), work_grid)


def predicted_delta_omega(model: HamiltonianModel, cell_height: float,
                          cell_base: float, grid: GridSpec, t: float) -> float:
    """Closed-form graininess growth for the model families that have one."""
    if isinstance(model, Oscillatory):
        return 2.0 * abs(model.amplitude) * abs(t) / cell_base
    if model.degree <= 1:
        return 0.0
    if model.degree == 2:
        v = 2.0 * abs(model.coeffs[2]) * cell_height
        vol_c = cell_height * cell_base
        return 2.0 * (v / grid.delta_theta) * (grid.hbar_eff / vol_c) * abs(t)
    raise NoClosedForm(
        f"degree-{model.degree} polynomial velocity has no closed growth law"
    )


@dataclass
class OmegaSeries:
    """Measured graininess along a run, with the closed-form prediction.

    ``measured_omega`` is the raw frontier/interior box ratio per sample.
    ``sigma_volumes`` and ``interior_volumes`` keep the underlying counts
    (times hbar) so growth can also be accounted against the conserved
    continuum cell volume, which is how the closed forms are normalized.
    """

    times: list[float]
    measured_omega: list[float]
    predicted_delta_omega: list[float | None]
    sigma_volumes: list[float] = field(default_factory=list)
    interior_volumes: list[float] = field(default_factory=list)
    source_area: float | None = None

    def __post_init__(self):
        n = len(self.times)
        if len(self.measured_omega) != n or len(self.predicted_delta_omega) != n:
            raise ValueError("series columns must have equal length")
        ts = np.asarray(self.times, dtype=float)
        if n and (ts[0] != 0.0 or np.any(np.diff(ts) <= 0)):
            raise ValueError("times must increase strictly from 0")

    def measured_delta_omega(self):
        """Frontier-volume growth over the conserved cell volume."""
        if not self.sigma_volumes or self.source_area is None:
            raise ValueError("series carries no frontier volumes")
        s0 = self.sigma_volumes[0]
        return [(s - s0) / self.source_area for s in self.sigma_volumes]

    def to_csv(self, path_or_file):
        close = False
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            fh = open(path_or_file, "w", newline="")
            close = True
        else:
            fh = path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["t", "omega_measured", "delta_omega_predicted"])
            for t, om, pred in zip(self.times, self.measured_omega, self.predicted_delta_omega):
                w.writerow(
                    [format(t, ".12g"), format(om, ".12g"),
                     "" if pred is None else format(pred, ".12g")]
                )
        finally:
            if close:
                fh.close()


def omega_growth(model: HamiltonianModel, source: Region, grid: GridSpec,
                 times) -> OmegaSeries:
    """Advect, re-rasterize and measure the cell at each requested time."""
    ts = [float(t) for t in times]
    if not ts or ts[0] != 0.0 or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("times must be sorted and start at 0")
    v = source.vertices
    height = float(np.ptp(v[:, 0]))
    base = float(np.ptp(v[:, 1]))

    try:
        def pred(t):
            return predicted_delta_omega(model, height, base, grid, t)
        pred(ts[-1])
        have_closed_form = True
    except NoClosedForm:
        have_closed_form = False

    measured, predicted, sig_vol, int_vol = [], [], [], []
    for t in ts:
        cell = advect_cell(source, model, t, grid)
        # late strong mixing can empty the interior; the series keeps
        # recording frontier growth, with the ratio pegged at infinity
        measured.append(omega(cell) if cell.n_interior else np.inf)
        sig_vol.append(cell.frontier_volume)
        int_vol.append(cell.interior_volume)
        predicted.append(pred(t) if have_closed_form else None)
    return OmegaSeries(ts, measured, predicted, sig_vol, int_vol, source.area)


def cell_mean(weights, observable, grid: GridSpec) -> float:
    """Mean of an observable over a box-supported density.

    ``weights`` maps box indices (i, k) to nonnegative weights summing to 1;
    ``observable`` is a callable on box-center coordinates.
    """
    items = list(weights.items())
    w = np.array([float(x) for _, x in items])
    if np.any(w < 0):
        raise UnnormalizedDensity("weights must be nonnegative")
    total = float(np.sum(w))
    if abs(total - 1.0) > 1e-9:
        raise UnnormalizedDensity(f"weights sum to {total!r}, not 1")
    idx = np.array([key for key, _ in items], dtype=np.int64).reshape(-1, 2)
    jc, tc = grid.box_center(idx[:, 0], idx[:, 1])
    vals = np.asarray(observable(jc, tc), dtype=float)
    return float(np.sum(w * vals))
