"""Scalar profiles with closed-form antiderivatives, used by the field generators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_DEFAULTS = {
    "constant": {"value": 0.0},
    "step": {"low": 0.0, "high": 1.0, "at": 0.0},
    "sine": {"mean": 0.5, "amplitude": 0.4, "wavelength": 1.0, "phase": 0.0},
    "tanh": {"low": 0.0, "high": 1.0, "center": 0.0, "width": 0.1},
    "linear": {"value": 0.0, "slope": 1.0},
}


def _logcosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)


@dataclass(frozen=True)
class Profile:
    """``f(s)`` and its antiderivative ``Φ(s) = ∫_0^s f``."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _DEFAULTS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        merged = dict(_DEFAULTS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ValueError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged.update({k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "params", merged)
        if self.kind == "sine" and merged["wavelength"] <= 0:
            raise ValueError("sine wavelength must be positive")
        if self.kind == "tanh" and merged["width"] <= 0:
            raise ValueError("tanh width must be positive")

    @classmethod
    def constant(cls, value=0.0):
        return cls("constant", {"value": value})

    @classmethod
    def step(cls, low=0.0, high=1.0, at=0.0):
        return cls("step", {"low": low, "high": high, "at": at})

    @classmethod
    def sine(cls, mean=0.5, amplitude=0.4, wavelength=1.0, phase=0.0):
        return cls("sine", {"mean": mean, "amplitude": amplitude, "wavelength": wavelength, "phase": phase})

    @classmethod
    def tanh(cls, low=0.0, high=1.0, center=0.0, width=0.1):
        return cls("tanh", {"low": low, "high": high, "center": center, "width": width})

    @classmethod
    def linear(cls, value=0.0, slope=1.0):
        return cls("linear", {"value": value, "slope": slope})

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(s, p["value"])
        if self.kind == "step":
            return np.where(s < p["at"], p["low"], p["high"])
        if self.kind == "sine":
            k = 2.0 * np.pi / p["wavelength"]
            return p["mean"] + p["amplitude"] * np.sin(k * s + p["phase"])
        if self.kind == "tanh":
            return p["low"] + 0.5 * (p["high"] - p["low"]) * (1.0 + np.tanh((s - p["center"]) / p["width"]))
        return p["value"] + p["slope"] * s

    def antiderivative(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "constant":
            return p["value"] * s
        if self.kind == "step":
            at = p["at"]
            return np.where(s < at, p["low"] * s, p["high"] * s) + (p["low"] - p["high"]) * at * (
                (s >= at).astype(float) - float(0.0 >= at)
            )
        if self.kind == "sine":
            k = 2.0 * np.pi / p["wavelength"]
            return p["mean"] * s - p["amplitude"] / k * (np.cos(k * s + p["phase"]) - np.cos(p["phase"]))
        if self.kind == "tanh":
            w, c = p["width"], p["center"]
            half = 0.5 * (p["high"] - p["low"])
            return p["low"] * s + half * (s + w * (_logcosh((s - c) / w) - _logcosh(-c / w)))
        return p["value"] * s + 0.5 * p["slope"] * s * s

    def bounds(self, lo: float, hi: float):
        """Range of ``f`` over ``[lo, hi]``."""
        p = self.params
        if self.kind == "sine":
            if hi - lo >= p["wavelength"]:
                amp = abs(p["amplitude"])
                return p["mean"] - amp, p["mean"] + amp
            vals = self(np.linspace(lo, hi, 4097))
        elif self.kind == "step" and lo < p["at"] <= hi:
            vals = np.array([p["low"], p["high"]])
        else:
            vals = self(np.array([lo, hi]))
        return float(vals.min()), float(vals.max())

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        d = dict(d)
        return cls(d.pop("kind"), d)
