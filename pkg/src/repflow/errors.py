"""Exception types shared across the package."""

from __future__ import annotations


class RepflowError(Exception):
    """Base class for all package errors."""


class ConfigurationError(RepflowError, ValueError):
    """Invalid domain, field, potential or run parameters.

    Parameters
    ----------
    message : str
        Human readable description.
    key : str, optional
        Dotted config key (``"domain.n_per_axis"``) the error refers to.
    """

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class ShapeError(RepflowError, ValueError):
    """Array shape or symmetry does not match the declared domain."""


class SingularPotentialError(RepflowError, ValueError):
    """The singular potential was evaluated on a non-invertible matrix."""


class DegenerateSpectrumError(RepflowError, ValueError):
    """An operation required a simple spectrum at a degenerate site."""


class EmptyRegionError(RepflowError, ValueError):
    """A ball, shell or time window contains no usable samples."""


class UndefinedRatioError(RepflowError, ValueError):
    """A shell ratio has a vanishing denominator."""


class FormatError(RepflowError, ValueError):
    """Malformed snapshot or trajectory file.

    Parameters
    ----------
    message : str
        Description of the problem.
    offset : int
        Byte offset at which the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        self.message = message
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class DivergenceError(RepflowError):
    """The flow produced a non-finite or collapsed state.

    Attributes
    ----------
    step : int
        Index of the step that failed.
    t : float
        Time at the start of the failing step.
    sup_e : float
        Largest energy density of the last valid state.
    site : int
        Flat index of the offending site.
    min_abs_eigenvalue : numpy.ndarray
        Smallest ``|lambda|`` over the lattice for every completed step.
    """

    def __init__(self, reason, step, t, sup_e, site, min_abs_eigenvalue):
        self.reason = reason
        self.step = step
        self.t = t
        self.sup_e = sup_e
        self.site = site
        self.min_abs_eigenvalue = min_abs_eigenvalue
        super().__init__(
            f"flow diverged at step {step} (t={t:.6g}): {reason}; "
            f"sup e={sup_e:.6g} at site {site}"
        )
