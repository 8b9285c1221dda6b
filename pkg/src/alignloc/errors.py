"""Exception hierarchy shared across the package.

Three failure families, each mapped to a distinct CLI exit code:

* ``ConfigurationError`` -- bad user input (config files, CLI flags,
  out-of-range parameters).  Exit code 2.
* ``StructuralError`` -- inputs that are well-formed but internally
  inconsistent (mismatched array shapes, positions off the grid,
  unknown identifiers).  Exit code 2.
* ``NumericalError`` -- the math failed (singular systems with ridge
  disabled, not enough usable eigenvalues).  Exit code 3.
"""


class AlignlocError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AlignlocError):
    """Invalid user-supplied configuration or parameters."""

    exit_code = 2


class StructuralError(AlignlocError):
    """Structurally inconsistent inputs (shapes, indices, geometry)."""

    exit_code = 2


class NumericalError(AlignlocError):
    """A numerical procedure could not produce a usable result."""

    exit_code = 3
