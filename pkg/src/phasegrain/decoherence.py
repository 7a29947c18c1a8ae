"""Spectral kernels with a singular weight plus an integrable density.

An expectation value evolves as A + integral of f(nu) exp(-i nu t): the
delta-function weight A survives all times while the integrable density
dephases away, so the late-time limit reads off A.  This module evaluates
the oscillatory integral numerically, extracts the limit with a decay
confirmation, splits matrix kernels into singular and regular parts, and
applies the coefficient-truncating projection.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import BasisMismatch, NotDecaying, NotSelfAdjoint, QuadratureNotConverged


@dataclass(frozen=True)
class Lorentzian:
    """Normalized Lorentzian density of total weight ``weight``."""

    weight: float
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def density(self, nu):
        return self.weight * (self.gamma / np.pi) / (nu * nu + self.gamma * self.gamma)

    @property
    def scale(self):
        return self.gamma

    symmetric = True


@dataclass(frozen=True)
class Gaussian:
    """Normalized Gaussian density of total weight ``weight``."""

    weight: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def density(self, nu):
        s = self.sigma
        return self.weight * np.exp(-0.5 * (nu / s) ** 2) / (s * np.sqrt(2.0 * np.pi))

    @property
    def scale(self):
        return self.sigma

    symmetric = True


@dataclass(frozen=True)
class Tabulated:
    """Density given on a finite nu grid; values interpolate linearly."""

    nu: np.ndarray
    f: np.ndarray
    symmetric: bool = field(default=False, compare=False)

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if nu.ndim != 1 or nu.shape != f.shape or len(nu) < 2:
            raise ValueError("need matching 1-d nu and f arrays with >= 2 points")
        if np.any(np.diff(nu) <= 0):
            raise ValueError("nu grid must be strictly increasing")
        if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(f))):
            raise ValueError("tabulated density must be finite")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "f", f)
        sym = bool(
            np.allclose(nu, -nu[::-1], rtol=0, atol=1e-12 * max(1.0, abs(nu[0])))
            and np.allclose(f, f[::-1], rtol=1e-12, atol=0)
        )
        object.__setattr__(self, "symmetric", sym)

    @property
    def abs_integral(self):
        return float(np.trapezoid(np.abs(self.f), self.nu))

    @property
    def weight(self):
        return float(np.trapezoid(self.f, self.nu))

    @property
    def scale(self):
        """Reciprocal effective width: decay time unit for this density."""
        peak = float(np.max(np.abs(self.f)))
        if peak == 0:
            return 1.0
        return peak / self.abs_integral

    def decays_at_edges(self, fraction=0.1):
        """True when |f| has fallen below ``fraction`` of its peak at both
        grid ends; a density still large at the window edge behaves like a
        non-normalizable one."""
        peak = float(np.max(np.abs(self.f)))
        if peak == 0:
            return True
        return abs(self.f[0]) < fraction * peak and abs(self.f[-1]) < fraction * peak


@dataclass(frozen=True)
class SpectralKernel:
    """Singular weight A plus one of the regular density shapes (or none)."""

    singular_weight: float
    regular: Lorentzian | Gaussian | Tabulated | None = None

    @property
    def regular_weight(self):
        return 0.0 if self.regular is None else float(self.regular.weight)

    @property
    def scale(self):
        return 1.0 if self.regular is None else self.regular.scale


def load_tabulated(path, singular_weight=0.0):
    """Read a two-column ``nu,f`` CSV into a kernel."""
    nu, f = [], []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if [h.strip() for h in header] != ["nu", "f"]:
            raise ValueError(f"expected header nu,f; got {header}")
        for row in rd:
            nu.append(float(row[0]))
            f.append(float(row[1]))
    return SpectralKernel(singular_weight, Tabulated(np.array(nu), np.array(f)))


# ---------------------------------------------------------------------------
# oscillatory integration
# ---------------------------------------------------------------------------

_QUAD_TOL = 1e-11
_QUAD_REQUIRED = 1e-8


def _quad_checked(func, a, b, **kw):
    """scipy.integrate.quad that only fails when the error estimate does."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(func, a, b, epsabs=_QUAD_TOL, full_output=1, **kw)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > _QUAD_REQUIRED:
        raise QuadratureNotConverged(f"estimated error {abserr:.3e}: {out[3]}")
    return value


def _quad_fourier(density, t, scale=1.0):
    """integral of density(nu) exp(-i nu t) over the real line.

    The head interval, where the density lives, is integrated with the
    oscillation resolved explicitly (plain adaptive rule for slow phases,
    cosine/sine-weighted rule for fast ones).  The far tails carry a smooth
    monotone envelope and go to the semi-infinite Fourier rule, which is
    only reliable there: its giant low-frequency cycles would step right
    over a narrow density bump.
    """
    half_width = 60.0 / scale

    def _core_breaks(lo, hi):
        """Decade ladder of breakpoints at the density's own scale, so
        neither a narrow bump nor a power-law tail slips between the
        quadrature nodes of a wide panel."""
        ladder = [0.0]
        step = 1.0 / scale
        while step < hi:
            ladder.extend((step, -step))
            step *= 10.0
        pts = sorted(x for x in ladder if lo < x < hi)
        return pts or None

    if t == 0.0:
        head = _quad_checked(
            density, -half_width, half_width,
            points=_core_breaks(-half_width, half_width), limit=400,
        )
        tails = _quad_checked(density, half_width, np.inf, limit=200)
        tails += _quad_checked(lambda nu: density(-nu), half_width, np.inf, limit=200)
        return complex(head + tails, 0.0)

    at = abs(t)
    sign = 1.0 if t > 0 else -1.0
    even = lambda nu: 0.5 * (density(nu) + density(-nu))
    odd = lambda nu: 0.5 * (density(nu) - density(-nu))

    if at * half_width < 50.0 * np.pi:
        # few oscillations across the density: integrate the product
        # directly, out to where the tail oscillates at least one full cycle
        cut = max(half_width, 2.0 * np.pi / at)
        breaks = _core_breaks(-cut, cut)
        re = _quad_checked(
            lambda nu: density(nu) * np.cos(nu * at), -cut, cut, points=breaks, limit=400
        )
        im = _quad_checked(
            lambda nu: density(nu) * np.sin(nu * at), -cut, cut, points=breaks, limit=400
        )
    else:
        cut = half_width
        c_even = _quad_checked(even, 0.0, cut, weight="cos", wvar=at, limit=400)
        s_odd = _quad_checked(odd, 0.0, cut, weight="sin", wvar=at, limit=400)
        re, im = 2.0 * c_even, 2.0 * s_odd
    re += 2.0 * _quad_checked(even, cut, np.inf, weight="cos", wvar=at, limlst=200)
    im += 2.0 * _quad_checked(odd, cut, np.inf, weight="sin", wvar=at, limlst=200)
    return complex(re, -sign * im)


def _trapezoid_oscillatory(nu, fvals, t, tol=1e-8, max_doublings=18):
    """Refined trapezoid of f(nu) exp(-i nu t) on a finite grid.

    Panels are first split so none exceeds pi / (4 |t|), then halved until
    two successive estimates agree to ``tol``.
    """
    nu = np.asarray(nu, dtype=float)
    fvals = np.asarray(fvals, dtype=float)
    widths = np.diff(nu)
    target = np.pi / (4.0 * abs(t)) if t != 0.0 else np.inf
    base_sub = np.maximum(np.ceil(widths / target - 1e-12).astype(np.int64), 1)

    def _estimate(mult):
        sub = base_sub * mult
        offsets = np.concatenate([np.arange(n + 1) / n for n in sub])
        starts = np.repeat(nu[:-1], sub + 1)
        spans = np.repeat(widths, sub + 1)
        pts = starts + offsets * spans
        vals = np.interp(pts, nu, fvals) * np.exp(-1j * pts * t)
        # trapezoid per panel, assembled per subdivided block
        seg = 0.5 * (vals[1:] + vals[:-1]) * np.diff(pts)
        # boundaries between blocks create zero-width panels; they add 0
        return np.sum(seg)

    prev = _estimate(1)
    mult = 2
    for _ in range(max_doublings):
        cur = _estimate(mult)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
        mult *= 2
        if np.sum(base_sub * mult) > 2_000_000:
            break
    raise QuadratureNotConverged(
        f"refined trapezoid did not reach {tol} at t={t} (last change {abs(cur - prev):.3e})"
    )


def expectation(kernel: SpectralKernel, t: float) -> complex:
    """A + integral of f(nu) exp(-i nu t) d nu at one time."""
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    reg = kernel.regular
    if reg is None:
        return complex(kernel.singular_weight, 0.0)
    if isinstance(reg, Tabulated):
        val = _trapezoid_oscillatory(reg.nu, reg.f, float(t))
    else:
        val = _quad_fourier(reg.density, float(t), scale=reg.scale)
        if reg.symmetric:
            val = complex(val.real, 0.0)
    return complex(kernel.singular_weight) + val


def weak_limit(kernel: SpectralKernel) -> float:
    """Late-time limit of the expectation: the singular weight A.

    Confirms numerically that |expectation(t) - A| decreases over
    t = 10, 20, 40 decay units; a density that cannot decay raises
    NotDecaying.
    """
    a = float(kernel.singular_weight)
    reg = kernel.regular
    if reg is None:
        return a
    if isinstance(reg, Tabulated) and not reg.decays_at_edges():
        raise NotDecaying(
            "tabulated density has not decayed at its grid edges; "
            "it is not integrable on any larger window"
        )
    scale = kernel.scale
    residuals = [abs(expectation(kernel, t) - a) for t in (10.0 / scale, 20.0 / scale, 40.0 / scale)]
    floor = 64.0 * np.finfo(float).eps * max(1.0, abs(kernel.regular_weight))
    decreasing = all(
        r2 < r1 or (r1 < floor and r2 < floor) for r1, r2 in zip(residuals, residuals[1:])
    )
    if not decreasing:
        raise NotDecaying(f"confirmation residuals do not decrease: {residuals}")
    return a


def decoherence_time(kernel: SpectralKernel, epsilon: float) -> float:
    """Smallest t with |expectation(t) - A| below epsilon of the regular
    weight, on a log grid refined by bisection to 1e-3 relative."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    a = float(kernel.singular_weight)
    w_total = abs(complex(expectation(kernel, 0.0)) - a)
    if w_total == 0.0:
        return 0.0
    threshold = epsilon * w_total

    def settled(t):
        return abs(expectation(kernel, t) - a) < threshold

    scale = kernel.scale
    ts = np.logspace(np.log10(1e-4 / scale), np.log10(1e3 / scale), 120)
    hit = None
    for idx, t in enumerate(ts):
        if settled(t):
            hit = idx
            break
    if hit is None:
        raise NotDecaying(f"no settling time found up to t={ts[-1]}")
    if hit == 0:
        return float(ts[0])
    lo, hi = ts[hit - 1], ts[hit]
    while (hi - lo) > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if settled(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


# ---------------------------------------------------------------------------
# matrix kernels and projections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VanHoveMatrix:
    """Singular diagonal density plus square-integrable off-diagonal part."""

    omega: np.ndarray
    diagonal: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        diag = np.asarray(self.diagonal, dtype=float)
        off = np.asarray(self.offdiag, dtype=complex)
        m = len(omega)
        if diag.shape != (m,) or off.shape != (m, m):
            raise ValueError("inconsistent van Hove matrix shapes")
        if np.max(np.abs(off - off.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(off))):
            raise NotSelfAdjoint("regular part is not self-adjoint")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "diagonal", diag)
        object.__setattr__(self, "offdiag", off)

    @property
    def delta_omega(self):
        return float(self.omega[1] - self.omega[0])

    def recombine(self):
        """Dense matrix with the delta represented as density 1/delta_omega."""
        out = self.offdiag.copy()
        out[np.diag_indices_from(out)] += self.diagonal / self.delta_omega
        return out


def van_hove_split(matrix, omega) -> VanHoveMatrix:
    """Split a dense kernel into its singular diagonal and regular remainder.

    The grid delta function carries density 1/delta_omega, so the extracted
    diagonal values are matrix diagonal times delta_omega.
    """
    m = np.asarray(matrix, dtype=complex)
    omega = np.asarray(omega, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(omega):
        raise ValueError("matrix must be square and match the omega grid")
    if len(omega) < 2 or np.any(np.diff(omega) <= 0):
        raise ValueError("omega grid must be strictly increasing")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.conj().T)) > 1e-10 * scale:
        raise NotSelfAdjoint("input kernel is not self-adjoint")
    domega = float(omega[1] - omega[0])
    diag = np.real(np.diag(m)) * domega
    off = m.copy()
    off[np.diag_indices_from(off)] = 0.0
    return VanHoveMatrix(omega, diag, off)


def project(coefficients, n_keep: int):
    """Generalized projection: keep the first ``n_keep`` dual-basis
    coefficients, zero the rest.  Idempotent by construction."""
    coeffs = np.asarray(coefficients)
    if coeffs.ndim != 1:
        raise BasisMismatch("coefficients must be a vector")
    if not 0 <= n_keep <= len(coeffs):
        raise BasisMismatch(
            f"basis size {n_keep} incompatible with {len(coeffs)} coefficients"
        )
    out = coeffs.copy()
    out[n_keep:] = 0
    return out
