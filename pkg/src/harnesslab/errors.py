"""Exception types raised across the package."""


class HarnessError(Exception):
    """Base class for all package errors."""


class ConfigError(HarnessError):
    """Invalid run configuration; the message names the offending key."""


class NegativeWeight(HarnessError):
    """A kernel weight is negative."""


class NotStochastic(HarnessError):
    """Kernel weights do not sum to one."""


class NonZeroMean(HarnessError):
    """Kernel offsets have a nonzero mean."""


class DegenerateSpan(HarnessError):
    """Kernel support does not generate the full integer lattice."""


class InvalidParams(HarnessError):
    """Noise family parameters are out of range."""


class NegativeArgument(HarnessError):
    """Mean-excess argument must be nonnegative."""


class InfiniteVariance(HarnessError):
    """Variance requested for a family without a second moment."""


class NegativeStart(HarnessError):
    """Start height must be nonnegative."""


class NoiseRowMismatch(HarnessError):
    """Noise row does not match the surface time or region."""


class TooLarge(HarnessError):
    """Exact enumeration budget exceeded."""


class StepUnderflow(HarnessError):
    """ODE refinement failed to converge before the step floor."""


class InvalidGamma(HarnessError):
    """The threshold-scale solver requires gamma > 1."""


class UnsupportedCase(HarnessError):
    """No reference envelope for the requested (dimension, tail) case."""


class DegenerateDesign(HarnessError):
    """Regression transform is constant over the measurement grid."""
