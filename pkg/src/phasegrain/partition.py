"""Smooth partitions of unity over chart domains.

Charts along the action axis are glued through frontier zones: narrow strips
where one bump weight hands off to the next via the cubic smoothstep
3 s^2 - 2 s^3.  Inside a domain (beyond the zones) exactly one weight is 1;
inside a zone two weights sum to 1 by construction.  The zone must be at
least one lattice box wide, because a narrower hand-off would live below the
resolvable phase-space volume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FrontierTooNarrow, GapBetweenDomains
from .grid import GridSpec


def smoothstep(s):
    """C^1 ramp on [0, 1]: 3 s^2 - 2 s^3, clamped outside."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class BumpWeight:
    """One bump: 1 on the domain core, smoothstep ramps across its zones.

    ``rise`` and ``fall`` are the (lo, hi) spans of the left and right
    frontier zones; either may be None for the outermost domains.
    """

    domain: tuple[float, float]
    rise: tuple[float, float] | None
    fall: tuple[float, float] | None

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=float)
        w = np.ones_like(phi)
        if self.rise is not None:
            lo, hi = self.rise
            w = w * smoothstep((phi - lo) / (hi - lo))
        if self.fall is not None:
            lo, hi = self.fall
            w = w * (1.0 - smoothstep((phi - lo) / (hi - lo)))
        return w if w.ndim else float(w)


@dataclass(frozen=True)
class PartitionOfUnity:
    domains: tuple[tuple[float, float], ...]
    frontier_width: float
    bumps: tuple[BumpWeight, ...]

    def weights(self, phi):
        """Stacked bump values, shape (n_domains,) + phi.shape."""
        return np.stack([b(phi) for b in self.bumps])

    def total(self, phi):
        return self.weights(phi).sum(axis=0)


def build_partition(domains, frontier_width, grid: GridSpec) -> PartitionOfUnity:
    """Glue 1-d interval domains along the action axis into a partition.

    Consecutive domains must overlap by at least ``frontier_width``; the
    hand-off zone of that width is centred in each overlap.  Together the
    domains must cover the grid's action window.
    """
    box = min(grid.delta_j, grid.delta_theta)
    if frontier_width < box * (1.0 - 1e-12):
        raise FrontierTooNarrow(
            f"frontier width {frontier_width!r} is below one box width {box!r}"
        )
    doms = sorted((float(lo), float(hi)) for lo, hi in domains)
    if not doms:
        raise GapBetweenDomains("no domains given")
    for lo, hi in doms:
        if hi <= lo:
            raise GapBetweenDomains(f"empty domain ({lo}, {hi})")

    window = (grid.origin[0], grid.j_max)
    tol = 1e-12 * max(1.0, abs(window[0]), abs(window[1]))
    if doms[0][0] > window[0] + tol or doms[-1][1] < window[1] - tol:
        raise GapBetweenDomains("domains do not cover the grid window")

    zones = []
    for (lo_a, hi_a), (lo_b, hi_b) in zip(doms[:-1], doms[1:]):
        overlap = hi_a - lo_b
        if overlap < frontier_width * (1.0 - 1e-12):
            raise GapBetweenDomains(
                f"domains ({lo_a}, {hi_a}) and ({lo_b}, {hi_b}) overlap by "
                f"{overlap!r} < frontier width {frontier_width!r}"
            )
        mid = 0.5 * (lo_b + hi_a)
        zones.append((mid - 0.5 * frontier_width, mid + 0.5 * frontier_width))

    bumps = []
    for idx, dom in enumerate(doms):
        rise = zones[idx - 1] if idx > 0 else None
        fall = zones[idx] if idx < len(zones) else None
        bumps.append(BumpWeight(dom, rise, fall))
    return PartitionOfUnity(tuple(doms), float(frontier_width), tuple(bumps))
