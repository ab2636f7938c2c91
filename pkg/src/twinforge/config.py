"""Central tolerance record and runtime knobs."""

from __future__ import annotations

import os
from dataclasses import dataclass, asdict, replace


@dataclass(frozen=True)
class Tolerances:
    """Default tolerances used across the package.

    Every public function that takes a tolerance falls back to the matching
    field here, so a single ``replace(DEFAULT, ...)`` retunes a whole run.
    """

    symmetric: float = 1e-10
    eigen_residual: float = 1e-10
    rotation: float = 1e-9
    spd: float = 1e-12

    twin_residual: float = 1e-9
    spectrum: float = 1e-8
    identical: float = 1e-10
    axis_angle: float = 1e-6
    compound_perp: float = 1e-8

    cofactor: float = 1e-8
    twin_compat: float = 1e-8
    shared: float = 1e-6
    family: float = 1e-8

    habit: float = 1e-8
    habit_dedupe: float = 1e-7

    hull: float = 1e-9
    sistemone: float = 1e-10
    quadratic: float = 1e-7
    symmetry: float = 1e-9
    mu_one: float = 1e-9

    cof_threshold: float = 1e-4
    jump_rel: float = 1e-6
    jump_contrast: float = 4.0
    parallel: float = 1e-6
    bounds: float = 1e-8

    closure_rel: float = 1e-6
    dim_rel: float = 1e-3
    constant_rel: float = 1e-9
    direction_spread: float = 1e-6

    def as_dict(self) -> dict:
        return asdict(self)

    def with_(self, **changes) -> "Tolerances":
        return replace(self, **changes)


DEFAULT = Tolerances()

SPEC_VERSION = "1.0"


def max_threads() -> int:
    """Thread cap from ``TWINFORGE_THREADS`` (defaults to 1)."""
    raw = os.environ.get("TWINFORGE_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)
