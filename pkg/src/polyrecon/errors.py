"""Exception hierarchy shared by all modules."""


class PolyreconError(Exception):
    """Base class for every error raised by the package."""


class NonConvergence(PolyreconError):
    """A root finder or Newton refinement did not reach its tolerance."""


class RadiusTooSmall(PolyreconError):
    """A Green's function level curve could not be certified outside K(P)."""


class WitnessMismatch(PolyreconError):
    """A window was shifted with a witness point that does not produce it."""


class NoPreimage(PolyreconError):
    """No point of the search region realizes the given real-orbit window."""


class AmbiguousImage(PolyreconError):
    """Preimages of a window disagree after M forward steps."""

    def __init__(self, msg, values=()):
        super().__init__(msg)
        self.values = list(values)


class Unstable(PolyreconError):
    """The window-length scan did not stabilize below its cap."""


class InsufficientSamples(PolyreconError):
    """Too few sample points fall into the balls used by an estimator."""


class PrematureRadius(PolyreconError):
    """Mirror pairs at this radius do not yet follow the asymptotic regime."""


class CTooSmall(PolyreconError):
    """The constant c of the sector family is too small for the geometry."""


class CertificateFailed(PolyreconError):
    """A grid or interval certificate found a violating witness."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class BranchMiss(PolyreconError):
    """An inverse branch left the sector it was supposed to land in."""


class EscapedJulia(PolyreconError):
    """A forward orbit left the union of sectors before the requested step."""


class OrbitEscaped(PolyreconError):
    """An orbit that was required to stay bounded left the escape disk."""
