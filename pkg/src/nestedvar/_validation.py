"""Input validation helpers and package exceptions."""
from __future__ import annotations

import math
from fractions import Fraction


class ConfigurationError(ValueError):
    """A parameter combination for which an estimator is undefined."""


class DegenerateInputError(ValueError):
    """Inputs that leave a computation without a unique answer."""


class UnsupportedModelError(TypeError):
    """A scheme asked a loss model for something it cannot simulate."""


def check_positive(value, name):
    if not (isinstance(value, (int, float)) or hasattr(value, "__float__")):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    if not float(value) > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_in_open_unit(value, name):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
    return value


def check_alpha(alpha):
    return check_in_open_unit(alpha, "alpha")


def check_epsilon(epsilon):
    return check_in_open_unit(epsilon, "epsilon")


def check_level(level, name="level", minimum=0):
    if int(level) != level or level < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {level!r}")
    return int(level)


def parse_number(value):
    """Accept floats, ints and fraction strings such as ``"1/32"``."""
    if isinstance(value, str):
        value = value.strip()
        try:
            return float(Fraction(value))
        except (ValueError, ZeroDivisionError):
            pass
        try:
            return float(value)
        except ValueError:
            raise ValueError(f"not a number: {value!r}") from None
    out = float(value)
    if math.isnan(out):
        raise ValueError("NaN is not a valid parameter")
    return out
