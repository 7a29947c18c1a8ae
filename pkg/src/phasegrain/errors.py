"""Exception hierarchy shared by all phasegrain modules."""


class PhasegrainError(Exception):
    """Base class for all toolkit errors."""


# -- lattice / cell geometry -------------------------------------------------

class RegionOutsideGrid(PhasegrainError):
    """A region vertex (or an advected image) falls outside the lattice."""


class DegenerateRegion(PhasegrainError):
    """Region area is below one box volume; it cannot hold a single box."""


class OmegaUndefined(PhasegrainError):
    """Cell has no interior boxes, so the frontier/interior ratio is undefined."""


class FrontierTooNarrow(PhasegrainError):
    """Partition frontier zone is narrower than one lattice box."""


class GapBetweenDomains(PhasegrainError):
    """Partition domains fail to cover the window with the required overlaps."""


# -- flows -------------------------------------------------------------------

class NoClosedForm(PhasegrainError):
    """No closed-form graininess growth rate exists for this Hamiltonian."""


class UnnormalizedDensity(PhasegrainError):
    """Box weights do not sum to one."""


# -- Henon-Heiles ------------------------------------------------------------

class EscapeDetected(PhasegrainError):
    """A trajectory left the configured escape radius."""


class SeedOffShell(PhasegrainError):
    """Section seed has negative squared transverse momentum at this energy."""


class FoldResolutionExceeded(PhasegrainError):
    """Boundary refinement exceeded its point budget: filament detail has
    dropped below box scale.  Carries the partial result series when one
    exists."""

    def __init__(self, message, series=None):
        super().__init__(message)
        self.series = series


# -- spectral kernels --------------------------------------------------------

class QuadratureNotConverged(PhasegrainError):
    """Oscillatory quadrature ran out of refinement budget."""


class NotDecaying(PhasegrainError):
    """Expectation values do not decay toward the singular weight."""


class NotSelfAdjoint(PhasegrainError):
    """Kernel matrix fails the self-adjointness check."""


class BasisMismatch(PhasegrainError):
    """Projector basis size disagrees with the coefficient vector."""


# -- CLI ---------------------------------------------------------------------

class ConfigInvalid(PhasegrainError):
    """Scenario configuration failed schema validation."""
