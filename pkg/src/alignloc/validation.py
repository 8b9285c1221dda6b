"""Input validation helpers used by the estimator API and the library core.

These mirror the style of scikit-learn's ``check_array``/``check_is_fitted``
but raise this package's error taxonomy so CLI exit codes stay meaningful.
"""

from __future__ import annotations

import numbers

import numpy as np

from .errors import ConfigurationError, StructuralError


def check_array(
    a,
    *,
    name: str,
    ndim: int | None = None,
    shape: tuple[int | None, ...] | None = None,
    dtype=float,
    allow_empty: bool = False,
):
    """Coerce ``a`` to a contiguous ndarray and validate its shape.

    ``shape`` entries of ``None`` match any extent.  Non-finite values are
    rejected for float dtypes.
    """
    try:
        arr = np.asarray(a, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise StructuralError(f"{name}: cannot convert to array of {dtype}: {exc}") from exc
    if ndim is not None and arr.ndim != ndim:
        raise StructuralError(f"{name}: expected {ndim}-d array, got {arr.ndim}-d with shape {arr.shape}")
    if shape is not None:
        if arr.ndim != len(shape):
            raise StructuralError(f"{name}: expected shape {shape}, got {arr.shape}")
        for want, got in zip(shape, arr.shape):
            if want is not None and want != got:
                raise StructuralError(f"{name}: expected shape {shape}, got {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise StructuralError(f"{name}: must not be empty")
    if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
        raise StructuralError(f"{name}: contains non-finite values")
    return np.ascontiguousarray(arr)


def check_positive_int(value, *, name: str, minimum: int = 1) -> int:
    """Validate an integer-valued parameter with a lower bound."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(f"{name}: expected an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ConfigurationError(f"{name}: must be >= {minimum}, got {value}")
    return value


def check_nonnegative_float(value, *, name: str) -> float:
    """Validate a real-valued parameter that must be finite and >= 0."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigurationError(f"{name}: expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ConfigurationError(f"{name}: must be finite and >= 0, got {value}")
    return value


def check_in_unit_interval(value, *, name: str, open_left: bool = False) -> float:
    """Validate a fraction in [0, 1] (optionally (0, 1])."""
    value = check_nonnegative_float(value, name=name)
    if value > 1:
        raise ConfigurationError(f"{name}: must be <= 1, got {value}")
    if open_left and value == 0:
        raise ConfigurationError(f"{name}: must be > 0")
    return value


def check_choice(value, *, name: str, choices: tuple[str, ...]) -> str:
    """Validate a string parameter against an allowed set."""
    if value not in choices:
        raise ConfigurationError(f"{name}: must be one of {choices}, got {value!r}")
    return value
