"""Tangent-envelope learning of convex 1-Lipschitz functions on [0, 1].

A hypothesis is the max of a set of lines, seeded with the zero line. Each
update adds a (possibly noisy) tangent taken at a point where the caller
detected a large error. For an exact tangent oracle and error threshold a1
the number of updates any adversary can force is at most ceil(3/sqrt(a1));
with readings within a1/4 of the truth it is at most ceil(3/sqrt(a1/2)).
Mistake detection is the caller's job; this module only maintains and
evaluates hypotheses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class OracleReading:
    """A value/subgradient observation, accurate to within ``tolerance``."""

    value: float
    slope: float
    tolerance: float = 0.0


@dataclass(frozen=True)
class PiecewiseLinearHypothesis:
    """Max of lines a*x + b; immutable, updates return a new hypothesis."""

    slopes: np.ndarray = field(repr=False)
    intercepts: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.slopes, dtype=float))
        b = np.ascontiguousarray(np.asarray(self.intercepts, dtype=float))
        if a.ndim != 1 or a.shape != b.shape or a.size == 0:
            raise ValueError("slopes and intercepts must be matching 1-d arrays")
        if np.abs(a).max() > 1.0:
            raise ValueError("slopes must lie in [-1, 1]")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "slopes", a)
        object.__setattr__(self, "intercepts", b)

    @classmethod
    def initial(cls) -> "PiecewiseLinearHypothesis":
        return cls(np.zeros(1), np.zeros(1))

    @property
    def nlines(self) -> int:
        return self.slopes.shape[0]

    def evaluate(self, x: float) -> float:
        return kernels.pwl_eval(self.slopes, self.intercepts, float(x))

    def evaluate_batch(self, xs) -> np.ndarray:
        xs = np.ascontiguousarray(np.asarray(xs, dtype=float))
        out = np.empty(xs.shape[0])
        kernels.pwl_eval_batch(self.slopes, self.intercepts, xs, out)
        return out

    def add_tangent(self, x: float, reading: OracleReading) -> "PiecewiseLinearHypothesis":
        """New hypothesis with the tangent at x appended; slope clamped to [-1, 1]."""
        a = min(1.0, max(-1.0, float(reading.slope)))
        b = float(reading.value) - a * float(x)
        return PiecewiseLinearHypothesis(
            np.append(self.slopes, a), np.append(self.intercepts, b))


@dataclass(frozen=True)
class DecomposableHypothesis:
    """One tangent-envelope learner per coordinate, with a shared target alpha.

    Evaluation sums the per-coordinate hypotheses; the per-coordinate
    accuracy share is alpha1 = alpha / dimension.
    """

    parts: tuple[PiecewiseLinearHypothesis, ...]
    alpha: float

    def __post_init__(self):
        if not self.parts:
            raise ValueError("need at least one coordinate")
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")
        counts = [p.nlines for p in self.parts]
        offsets = np.zeros(len(counts) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        a_flat = np.ascontiguousarray(
            np.concatenate([p.slopes for p in self.parts]))
        b_flat = np.ascontiguousarray(
            np.concatenate([p.intercepts for p in self.parts]))
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_a_flat", a_flat)
        object.__setattr__(self, "_b_flat", b_flat)

    @classmethod
    def initial(cls, dimension: int, alpha: float) -> "DecomposableHypothesis":
        return cls(tuple(PiecewiseLinearHypothesis.initial()
                         for _ in range(dimension)), float(alpha))

    @property
    def dimension(self) -> int:
        return len(self.parts)

    @property
    def alpha1(self) -> float:
        return self.alpha / len(self.parts)

    def evaluate_coords(self, y) -> np.ndarray:
        y = np.ascontiguousarray(np.asarray(y, dtype=float))
        out = np.empty(y.shape[0])
        kernels.pwl_eval_coords(self._a_flat, self._b_flat, self._offsets, y, out)
        return out

    def evaluate(self, y) -> float:
        return float(self.evaluate_coords(y).sum())

    def update(self, y, readings: dict[int, OracleReading]) -> "DecomposableHypothesis":
        """Add one tangent per flagged coordinate; readings keyed by coordinate.

        An empty readings dict is a caller bug: updates happen only on
        detected mistakes, and a mistake implicates at least one coordinate.
        """
        if not readings:
            raise ValueError("update requires at least one flagged coordinate")
        y = np.asarray(y, dtype=float)
        parts = list(self.parts)
        for i, reading in readings.items():
            if not 0 <= i < len(parts):
                raise ValueError(f"coordinate {i} out of range")
            parts[i] = parts[i].add_tangent(float(y[i]), reading)
        return DecomposableHypothesis(tuple(parts), self.alpha)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "dims": [
                [[float(a), float(b)] for a, b in zip(p.slopes, p.intercepts)]
                for p in self.parts
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DecomposableHypothesis":
        parts = []
        for lines in obj["dims"]:
            arr = np.asarray(lines, dtype=float).reshape(-1, 2)
            parts.append(PiecewiseLinearHypothesis(arr[:, 0].copy(), arr[:, 1].copy()))
        return cls(tuple(parts), float(obj["alpha"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DecomposableHypothesis":
        return cls.from_dict(json.loads(text))


def exact_mistake_bound(alpha1: float) -> int:
    """Update bound for an exact tangent oracle at error threshold alpha1."""
    return int(np.ceil(3.0 / np.sqrt(alpha1)))


def noisy_mistake_bound(alpha1: float) -> int:
    """Update bound when readings may be off by up to alpha1/4."""
    return int(np.ceil(3.0 / np.sqrt(alpha1 / 2.0)))
