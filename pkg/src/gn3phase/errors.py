"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3.
"""

from __future__ import annotations


class Gn3Error(Exception):
    """Base class for package-specific failures."""


class ConfigError(Gn3Error):
    """Invalid run configuration (bad key, type, or invariant)."""


class DomainViolationError(Gn3Error):
    """A point lies outside the effective domain of a graph or potential."""


class ConvergenceError(Gn3Error):
    """An iterative solve failed to reach its tolerance."""


class IncompatibleSystemError(Gn3Error):
    """Singular Neumann solve requested with a right-hand side of nonzero mean."""


class DegenerateDataError(Gn3Error):
    """Data admits no meaningful fit (e.g. all sweep errors are zero)."""


class TrajectoryError(Gn3Error):
    """A field sequence is too short or inconsistent for the requested norm."""
