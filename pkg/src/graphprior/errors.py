"""Exception types shared across the package.

Plain argument errors (bad index, malformed value) raise ValueError; the
classes here mark conditions callers may want to handle separately.
"""


class GraphPriorError(Exception):
    """Base class for package-specific failures."""


class CapabilityError(GraphPriorError):
    """Requested computation exceeds the sizes this implementation supports."""


class DataError(GraphPriorError):
    """Input data is malformed or internally inconsistent."""


class FitError(GraphPriorError):
    """Model fitting failed (separation, infeasible constraints)."""


class NonErgodicError(GraphPriorError):
    """Transition matrix has no spectral gap, mixing time undefined."""


class ProtocolError(GraphPriorError):
    """Experiment-service request violates the session protocol."""
