"""Exception and warning types shared across the package."""


class BogovskiiError(Exception):
    """Base class for all package errors."""


class InvalidDomain(BogovskiiError):
    """Domain construction data is inconsistent (ball outside shape, bad radius, ...)."""


class MeanNotZero(BogovskiiError):
    """An input that must have vanishing integral does not."""


class SupportViolation(BogovskiiError):
    """A field is nonzero outside the region it must be supported in."""


class SingularPoint(BogovskiiError):
    """A kernel was evaluated at (or too close to) its singular point."""


class NonZeroMeanPsi(BogovskiiError):
    """The test function driving an auxiliary kernel must have zero integral."""


class PaddingRequired(BogovskiiError):
    """The grid box is too small for the requested convolution scales."""


class ExtrapolationDiverged(BogovskiiError):
    """Richardson extrapolation of truncated principal values did not settle."""


class OutOfRegime(UserWarning):
    """A norm was requested outside the exponent range the estimator targets."""
