"""Martensitic twins, cofactor conditions, habit planes and moving-mask field analysis."""

from . import cofactor, field, habit, hull, lin3, mask, twin
from .config import DEFAULT, SPEC_VERSION, Tolerances
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DEFAULT",
    "SPEC_VERSION",
    "Tolerances",
    "cofactor",
    "field",
    "habit",
    "hull",
    "lin3",
    "mask",
    "twin",
]
