"""Exception types shared across the package."""


class GchpError(Exception):
    """Base class for all package-specific errors."""


class TooFewEvents(GchpError):
    """Not enough events in a window to fit anything."""


class NonStationaryFit(GchpError):
    """Every optimizer start converged to the branching-ratio cap."""


class OneSidedData(GchpError):
    """All price moves share one sign; no two-sided state space exists."""


class ZeroDelta(GchpError):
    """A zero price move cannot be classified."""


class NonConvergent(GchpError):
    """Stationary-distribution iteration stalled (periodic or reducible chain)."""


class SingularFundamentalMatrix(GchpError):
    """The linear solve for the centered-state potential is ill-conditioned."""


class UnknownFormat(GchpError):
    """Unrecognized input file format name."""


class MalformedRow(GchpError):
    """A single input row failed validation (collected, not fatal per row)."""


class RejectRatioExceeded(GchpError):
    """Too large a fraction of input rows was rejected."""


class TooFewSamples(GchpError):
    """Not enough inter-arrival samples for distribution fitting."""


class InsufficientData(GchpError):
    """Not enough comparison pairs for a correlation lag."""


class WindowTooLarge(GchpError):
    """A deviation window size admits too few disjoint windows."""


class DegenerateCurve(GchpError):
    """All empirical deviations are zero; regression undefined."""


class AllKindsFailed(GchpError):
    """No model kind could be fitted on the window."""


class EmptyReport(GchpError):
    """A backtest report with no scored windows has no metrics."""
