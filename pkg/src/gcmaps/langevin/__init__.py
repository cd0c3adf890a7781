"""Langevin system definitions, symbolic Jacobians and local linearisation."""

from .expr import differentiate
from .parser import parse_document, parse_expression
from .system import (
    LORENZ_TEXT,
    LangevinSystem,
    LocalLinearization,
    builtin_lorenz,
    fd_jacobian,
    linear_system,
    linearize,
    lorenz_det,
)


def parse_system(text, name="system"):
    """Parse a system-definition document into a :class:`LangevinSystem`."""
    return LangevinSystem.from_text(text, name=name)


__all__ = [
    "LORENZ_TEXT",
    "LangevinSystem",
    "LocalLinearization",
    "builtin_lorenz",
    "differentiate",
    "fd_jacobian",
    "linear_system",
    "linearize",
    "lorenz_det",
    "parse_document",
    "parse_expression",
    "parse_system",
]
