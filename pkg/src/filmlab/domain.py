"""Core data model of a coating campaign and Pareto-dominance utilities.

Objectives live in two conventions: the measured ``ObjectiveVector``
(optical density up, defect percentages down) and ``CanonicalObjectives``
where every component is to be maximized, so that dominance and
hypervolume have a single orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

PARAM_NAMES = ("concentration", "spin_speed", "spin_acceleration", "spin_time")


@dataclass(frozen=True)
class ParameterSet:
    """One point in the 4-D process space.

    concentration: ink mass fraction in wt%
    spin_speed: rpm
    spin_acceleration: rpm/s
    spin_time: s
    """

    concentration: float
    spin_speed: float
    spin_acceleration: float
    spin_time: float

    def as_array(self) -> np.ndarray:
        return np.array([self.concentration, self.spin_speed,
                         self.spin_acceleration, self.spin_time], dtype=float)

    @staticmethod
    def from_array(x: Sequence[float]) -> "ParameterSet":
        c, w, a, t = (float(v) for v in x)
        return ParameterSet(c, w, a, t)

    def validate(self, bounds: "ParameterBounds") -> None:
        x = self.as_array()
        if not np.all(np.isfinite(x)) or np.any(x <= 0):
            raise ValueError(f"parameters must be finite and positive: {self}")
        lo, hi = bounds.as_arrays()
        if np.any(x < lo) or np.any(x > hi):
            raise ValueError(f"parameters outside campaign bounds: {self}")


@dataclass(frozen=True)
class ParameterBounds:
    """Box bounds of the process space, (lo, hi) per parameter."""

    concentration: tuple[float, float] = (2.4, 4.0)
    spin_speed: tuple[float, float] = (300.0, 3000.0)
    spin_acceleration: tuple[float, float] = (500.0, 5000.0)
    spin_time: tuple[float, float] = (5.0, 60.0)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        pairs = [getattr(self, n) for n in PARAM_NAMES]
        lo = np.array([p[0] for p in pairs], dtype=float)
        hi = np.array([p[1] for p in pairs], dtype=float)
        return lo, hi

    def normalize(self, X: np.ndarray) -> np.ndarray:
        lo, hi = self.as_arrays()
        return (np.asarray(X, dtype=float) - lo) / (hi - lo)

    def denormalize(self, U: np.ndarray) -> np.ndarray:
        lo, hi = self.as_arrays()
        return lo + np.asarray(U, dtype=float) * (hi - lo)


@dataclass(frozen=True)
class ObjectiveVector:
    """Measured objectives: optical density (higher better), defect
    percentages of the active area (lower better)."""

    optical_density: float
    defect_bright: float
    defect_dark: float

    def __post_init__(self):
        if self.optical_density < 0:
            raise ValueError("optical_density must be >= 0")
        for v in (self.defect_bright, self.defect_dark):
            if not 0.0 <= v <= 100.0:
                raise ValueError("defect percentages must lie in [0, 100]")

    @property
    def total_defect(self) -> float:
        return self.defect_bright + self.defect_dark


@dataclass(frozen=True)
class CanonicalObjectives:
    """Objective vector with every component in maximization convention."""

    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class ReferencePoint:
    """Minimal acceptable performance per canonical objective; points that
    do not dominate it contribute zero hypervolume."""

    values: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class SampleRecord:
    """One physical/virtual experiment with its provenance."""

    sample_id: int
    batch_index: int
    param_set_index: int
    replicate_index: int
    params: ParameterSet
    ambient: tuple[float, float]  # (temperature degC, relative humidity %)
    objectives: ObjectiveVector
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["ambient"] = list(self.ambient)
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "SampleRecord":
        return SampleRecord(
            sample_id=int(d["sample_id"]),
            batch_index=int(d["batch_index"]),
            param_set_index=int(d["param_set_index"]),
            replicate_index=int(d["replicate_index"]),
            params=ParameterSet(**d["params"]),
            ambient=tuple(d["ambient"]),
            objectives=ObjectiveVector(**d["objectives"]),
            provenance=dict(d.get("provenance", {})),
        )


def canonicalize(o: ObjectiveVector, mode: int) -> CanonicalObjectives:
    """Convert measured objectives to maximization convention.

    mode=3 keeps the defect channels distinct (negated); mode=2 sums them
    first, matching the reporting convention of summed defect densities.
    """
    if mode == 3:
        return CanonicalObjectives((o.optical_density, -o.defect_bright, -o.defect_dark))
    if mode == 2:
        return CanonicalObjectives((o.optical_density, -(o.defect_bright + o.defect_dark)))
    raise ValueError(f"objective mode must be 2 or 3, got {mode}")


def decanonicalize(c: CanonicalObjectives) -> ObjectiveVector:
    """Inverse of mode-3 canonicalize (bijective only for mode 3)."""
    if len(c) != 3:
        raise ValueError("only the 3-objective convention is invertible")
    od, nb, nd = c.values
    return ObjectiveVector(od, -nb, -nd)


def dominates(a: CanonicalObjectives | Sequence[float],
              b: CanonicalObjectives | Sequence[float]) -> bool:
    """True iff a >= b componentwise and a != b (maximization)."""
    av = a.as_array() if isinstance(a, CanonicalObjectives) else np.asarray(a, dtype=float)
    bv = b.as_array() if isinstance(b, CanonicalObjectives) else np.asarray(b, dtype=float)
    if av.shape != bv.shape:
        raise ValueError(f"objective length mismatch: {av.shape} vs {bv.shape}")
    return bool(np.all(av >= bv) and np.any(av > bv))


def pareto_front_indices(points: Iterable) -> list[int]:
    """Indices of the non-dominated points. Duplicates of a front point are
    all retained."""
    arr = _to_matrix(points)
    n = arr.shape[0]
    if n == 0:
        raise ValueError("pareto_front requires a nonempty list")
    keep = []
    for i in range(n):
        p = arr[i]
        # dominated iff some other point is >= everywhere and > somewhere
        ge = np.all(arr >= p, axis=1)
        gt = np.any(arr > p, axis=1)
        if not np.any(ge & gt):
            keep.append(i)
    return keep


def _to_matrix(points) -> np.ndarray:
    rows = []
    for p in points:
        rows.append(p.as_array() if isinstance(p, CanonicalObjectives)
                    else np.asarray(p, dtype=float))
    if not rows:
        return np.empty((0, 0))
    arr = np.vstack(rows)
    lengths = {r.shape[0] for r in rows}
    if len(lengths) > 1:
        raise ValueError("points have inconsistent objective lengths")
    return arr
