"""Analytical two-output test problems and their reference hierarchies.

Closed forms follow the usual benchmark-library definitions of Binh-Korn
(BNH), Deb-Horn DH4, DTLZ5 and ZDT1. Outputs are returned negated so that
every raw output is maximized and thresholds read as "y > t".

Starred variants add an input-only objective in second place and push the
second output down to third place.

Each surface also records an enclosing range for every output over its input
box (affine input objectives get their exact range). :meth:`SurfaceDef.default_hierarchy`
turns these into normalization bounds in one of two ways:

``"offset"``
    subtract the low end of the range (high end for minimized objectives), so
    every objective is non-negative but keeps its raw units and scale;
``"unit"``
    map the range onto ``[0, 1]``.

``"raw"`` returns the objectives untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Literal

import numpy as np

from .objectives import Hierarchy, InputSource, ObjectiveSpec, OutputSource


Scaling = Literal["raw", "offset", "unit"]
SCALINGS = ("raw", "offset", "unit")


class UnknownSurfaceError(KeyError):
    pass


def _bnh(X):
    f0 = 4.0 * (X**2).sum(axis=-1)
    f1 = ((X - 5.0) ** 2).sum(axis=-1)
    return -np.stack([f0, f1], axis=-1)


def _dh4(X):
    x0 = X[..., 0]
    s = X[..., 0] + X[..., 1]
    h = 2.0 - x0 - 0.8 * np.exp(-(((s - 0.35) / 0.25) ** 2)) - np.exp(-(((s - 0.85) / 0.03) ** 2))
    g = 50.0 * (X[..., 2:] ** 2).sum(axis=-1)
    S = 1.0 - np.sqrt(x0)
    return -np.stack([x0, h * (g + S)], axis=-1)


def _dtlz5(X):
    # two objectives: only the first coordinate sets the angle, the rest feed g
    g = ((X[..., 1:] - 0.5) ** 2).sum(axis=-1)
    theta = X[..., 0] * np.pi / 2.0
    f0 = (1.0 + g) * np.cos(theta)
    f1 = (1.0 + g) * np.sin(theta)
    return -np.stack([f0, f1], axis=-1)


def _zdt1(X):
    f0 = X[..., 0]
    g = 1.0 + 9.0 * X[..., 1:].mean(axis=-1)
    f1 = g * (1.0 - np.sqrt(f0 / g))
    return -np.stack([f0, f1], axis=-1)


def _out(name, m, threshold):
    return ObjectiveSpec(name, OutputSource(m), "maximize", threshold)


def _inp(name, coefficients, direction, threshold):
    return ObjectiveSpec(name, InputSource(tuple(float(c) for c in coefficients)), direction, threshold)


@dataclass(frozen=True)
class SurfaceDef:
    name: str
    input_dim: int
    output_dim: int
    bounds: tuple[tuple[float, float], ...]
    func: Callable[[np.ndarray], np.ndarray]
    hierarchy: Hierarchy
    starred_hierarchy: Hierarchy
    output_ranges: tuple[tuple[float, float], ...]

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[-1] != self.input_dim:
            raise ValueError(f"{self.name} expects {self.input_dim} inputs, got {X.shape[-1]}")
        tol = 1e-12 * (self.upper - self.lower)
        if np.any(X < self.lower - tol) or np.any(X > self.upper + tol):
            raise ValueError(f"input outside the {self.name} bounds")
        return self.func(np.clip(X, self.lower, self.upper))

    def objective_range(self, spec: ObjectiveSpec) -> tuple[float, float]:
        """Raw-unit range of an objective's source over the input box."""
        if isinstance(spec.source, OutputSource):
            return self.output_ranges[spec.source.index]
        coef = np.zeros(self.input_dim)
        c = np.asarray(spec.source.coefficients, dtype=float)
        coef[: c.shape[0]] = c
        lo = np.where(coef > 0, coef * self.lower, coef * self.upper).sum() + spec.source.constant
        hi = np.where(coef > 0, coef * self.upper, coef * self.lower).sum() + spec.source.constant
        return float(lo), float(hi)

    def default_hierarchy(self, starred: bool = False, scaling: Scaling = "raw") -> Hierarchy:
        h = self.starred_hierarchy if starred else self.hierarchy
        if scaling == "raw":
            return h
        if scaling not in SCALINGS:
            raise ValueError(f"unknown scaling {scaling!r}; choose from {', '.join(SCALINGS)}")
        return Hierarchy(tuple(replace(o, norm_bounds=self._norm_bounds(o, scaling)) for o in h))

    def _norm_bounds(self, spec: ObjectiveSpec, scaling: Scaling) -> tuple[float, float]:
        lo, hi = self.objective_range(spec)
        if scaling == "unit":
            return lo, hi
        # a unit-width window anchored at the worst value only shifts
        return (lo, lo + 1.0) if spec.direction == "maximize" else (hi - 1.0, hi)


_REGISTRY: dict[str, SurfaceDef] = {}


def _register(name, bounds, func, ranges, t0, t1, extra, t1_starred):
    base = Hierarchy((_out("y0", 0, t0), _out("y1", 1, t1)))
    starred = Hierarchy((_out("y0", 0, t0), extra, _out("y1", 1, t1_starred)))
    _REGISTRY[name] = SurfaceDef(
        name=name,
        input_dim=len(bounds),
        output_dim=2,
        bounds=tuple(bounds),
        func=func,
        hierarchy=base,
        starred_hierarchy=starred,
        output_ranges=tuple(ranges),
    )


# output ranges enclose the extremes over each box (found by multi-start search)
_register("BNH", [(0.0, 5.0), (0.0, 3.0)], _bnh, [(-136.0, 0.0), (-50.0, -4.0)], -60.0, -11.0,
          _inp("x0-x1", [1.0, -1.0], "maximize", 2.0), -15.0)
_register("DH4", [(0.0, 1.0), (-0.15, 1.0)] + [(-1.0, 1.0)] * 4, _dh4, [(-1.0, 0.0), (-402.0, 3.0)], -0.15, -15.0,
          _inp("x1", [0.0, 1.0], "maximize", 0.6), -15.0)
_register("DTLZ5", [(0.0, 1.0)] * 4, _dtlz5, [(-1.75, 0.0), (-1.75, 0.0)], -0.5, -0.95,
          _inp("x2+x3", [0.0, 0.0, 1.0, 1.0], "minimize", 1.0), -0.95)
_register("ZDT1", [(0.0, 1.0)] * 10, _zdt1, [(-1.0, 0.0), (-10.0, 0.0)], -0.18, -2.5,
          _inp("x1+x5", [0.0, 1.0, 0.0, 0.0, 0.0, 1.0], "minimize", 0.5), -2.5)


def names() -> list[str]:
    return list(_REGISTRY)


def get(name: str) -> SurfaceDef:
    key = name.rstrip("*").upper()
    try:
        return _REGISTRY[key]
    except KeyError:
        raise UnknownSurfaceError(f"unknown surface {name!r}; known: {', '.join(_REGISTRY)}") from None


def parse_name(name: str) -> tuple[SurfaceDef, bool]:
    """Split ``"ZDT1*"`` into its surface and the starred flag."""
    return get(name), name.endswith("*")


def evaluate(name: str, X) -> np.ndarray:
    return get(name).evaluate(X)


def default_hierarchy(name: str, starred: bool = False, scaling: Scaling = "raw") -> Hierarchy:
    return get(name).default_hierarchy(starred, scaling)
