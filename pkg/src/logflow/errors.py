"""Exception types shared across the laboratory."""


class LogFlowError(Exception):
    """Base class for every package-specific failure."""


class NonConvexityError(LogFlowError):
    """The Hessian lost strict positive-definiteness where log det D2u is needed."""


class AbortedNonConvex(LogFlowError):
    """Time integration gave up after repeated step rejections.

    Carries the last accepted state so callers can persist it.
    """

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class BoundaryInconsistency(LogFlowError):
    """Reference boundary data disagrees with the initial interior values."""


class TailError(LogFlowError):
    """Gaussian quadrature mass leaks outside the truncated box (t too large for L)."""


class BlowupError(LogFlowError):
    """Radial profile curvature left the admissible range (0, 1e6)."""


class SingularStartError(LogFlowError):
    """Series start of the radial integration is inconsistent at r = 0."""


class NewtonStall(LogFlowError):
    """Damped Newton iteration stopped making progress before reaching tolerance."""


class RangeError(LogFlowError):
    """Requested dual point lies outside the sampled gradient range."""


class EscapeError(LogFlowError):
    """A particle path left the trustworthy interior of the computational box."""


class EmptyCoincidenceError(LogFlowError):
    """No grid nodes coincide under the requested rescaling."""


class WindowEscape(LogFlowError):
    """The rescaled comparison window does not fit inside the computational box."""


class InsufficientSamples(LogFlowError):
    """Rate fitting needs at least five geometric time samples."""


class MissingArtifact(LogFlowError):
    """A run directory is missing the file an operation needs."""


class ConfigError(LogFlowError):
    """Experiment configuration failed validation."""
