"""Objective specifications and the ordered hierarchy built from them.

An objective reads either one surface output (``output:m``) or an affine
combination of input coordinates. Minimized objectives are flipped so that
downstream scores only ever see "larger is better" values; optional
normalization maps both value and threshold through the same affine map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

Direction = Literal["maximize", "minimize"]


@dataclass(frozen=True)
class OutputSource:
    index: int

    def __str__(self):
        return f"output:{self.index}"


@dataclass(frozen=True)
class InputSource:
    """Affine expression ``sum_i coefficients[i] * x_i + constant``."""

    coefficients: tuple[float, ...]
    constant: float = 0.0

    def __str__(self):
        terms = [
            f"{c:+g}*x_{i}" for i, c in enumerate(self.coefficients) if c != 0.0
        ]
        expr = " ".join(terms) or "0"
        if self.constant:
            expr += f" {self.constant:+g}"
        return expr.lstrip("+")


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    source: OutputSource | InputSource
    direction: Direction = "maximize"
    threshold: float = 0.0
    norm_bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.direction not in ("maximize", "minimize"):
            raise ValueError(f"{self.name}: direction must be 'maximize' or 'minimize'")
        if not np.isfinite(self.threshold):
            raise ValueError(f"{self.name}: threshold must be finite")
        if self.norm_bounds is not None:
            lo, hi = self.norm_bounds
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"{self.name}: norm_bounds need lo < hi, got {self.norm_bounds}")
        if isinstance(self.source, OutputSource) and self.source.index < 0:
            raise ValueError(f"{self.name}: output index must be non-negative")

    @property
    def is_input(self) -> bool:
        return isinstance(self.source, InputSource)

    def raw_value(self, X, Y):
        """Raw value on the objective's own direction; broadcasts over leading axes."""
        if isinstance(self.source, OutputSource):
            Y = np.asarray(Y, dtype=float)
            if self.source.index >= Y.shape[-1]:
                raise ValueError(
                    f"{self.name}: output index {self.source.index} out of range "
                    f"for {Y.shape[-1]} outputs"
                )
            return Y[..., self.source.index]
        X = np.asarray(X, dtype=float)
        coef = np.asarray(self.source.coefficients, dtype=float)
        if coef.shape[0] > X.shape[-1]:
            raise ValueError(
                f"{self.name}: expression uses {coef.shape[0]} coordinates, input has {X.shape[-1]}"
            )
        return X[..., : coef.shape[0]] @ coef + self.source.constant

    def transform(self, value):
        """Map a raw value (or threshold) into maximization-convention units.

        With norm bounds, minimized objectives map ``hi -> 0`` and ``lo -> 1``,
        which equals normalizing the negated value with bounds ``(-hi, -lo)``.
        """
        v = np.asarray(value, dtype=float)
        if self.norm_bounds is not None:
            lo, hi = self.norm_bounds
            if self.direction == "minimize":
                return (hi - v) / (hi - lo)
            return (v - lo) / (hi - lo)
        return -v if self.direction == "minimize" else v

    @property
    def psi_threshold(self) -> float:
        return float(self.transform(self.threshold))

    def to_dict(self) -> dict:
        if isinstance(self.source, OutputSource):
            source = str(self.source)
        else:
            source = {
                "coefficients": list(self.source.coefficients),
                "constant": self.source.constant,
            }
        out = {
            "name": self.name,
            "source": source,
            "direction": self.direction,
            "threshold": self.threshold,
        }
        if self.norm_bounds is not None:
            out["norm_bounds"] = list(self.norm_bounds)
        return out


@dataclass(frozen=True)
class Hierarchy:
    objectives: tuple[ObjectiveSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        objectives = tuple(self.objectives)
        object.__setattr__(self, "objectives", objectives)
        if not objectives:
            raise ValueError("a hierarchy needs at least one objective")
        names = [o.name for o in objectives]
        if len(set(names)) != len(names):
            raise ValueError(f"objective names must be unique: {names}")

    def __len__(self):
        return len(self.objectives)

    def __iter__(self):
        return iter(self.objectives)

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([o.psi_threshold for o in self.objectives])

    @property
    def output_indices(self) -> list[int]:
        return sorted(
            {o.source.index for o in self.objectives if isinstance(o.source, OutputSource)}
        )

    def psi(self, X, Y) -> np.ndarray:
        """Objective values for inputs ``X (..., d)`` and outputs ``Y (..., m)``.

        Input and output batch shapes are broadcast against each other, so
        ``X`` of shape ``(B, 1, d)`` pairs with posterior samples ``(B, K, m)``.
        """
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        shape = np.broadcast_shapes(X.shape[:-1], Y.shape[:-1])
        cols = [
            np.broadcast_to(o.transform(o.raw_value(X, Y)), shape) for o in self.objectives
        ]
        return np.stack(cols, axis=-1)

    def to_list(self) -> list[dict]:
        return [o.to_dict() for o in self.objectives]


def derive_psi(x, y, hierarchy: Hierarchy) -> tuple[np.ndarray, np.ndarray]:
    """Objective values and thresholds for one observation, maximization convention."""
    return hierarchy.psi(np.asarray(x, dtype=float), np.asarray(y, dtype=float)), hierarchy.thresholds


def count_satisfied(psi, t):
    """Length of the longest prefix of objectives meeting their thresholds.

    A point satisfying objectives 1 and 3 but not 2 counts as 1. Ties satisfy.
    Works row-wise on batches of shape ``(..., N)``.
    """
    psi = np.asarray(psi, dtype=float)
    met = psi >= np.asarray(t, dtype=float)
    prefix = np.cumprod(met, axis=-1)
    out = prefix.sum(axis=-1)
    return int(out) if np.ndim(out) == 0 else out.astype(int)


def parse_source(raw) -> OutputSource | InputSource:
    """Parse ``"output:m"``, ``"x_i"`` or ``{"coefficients": [...], "constant": c}``."""
    if isinstance(raw, str):
        text = raw.strip()
        if text.startswith("output:"):
            return OutputSource(int(text.split(":", 1)[1]))
        if text.startswith("x_") and text[2:].isdigit():
            i = int(text[2:])
            return InputSource(tuple([0.0] * i + [1.0]))
        raise ValueError(f"unrecognized objective source {raw!r}")
    if isinstance(raw, dict):
        coef = raw.get("coefficients")
        if not coef:
            raise ValueError("input source needs a non-empty coefficient list")
        return InputSource(tuple(float(c) for c in coef), float(raw.get("constant", 0.0)))
    raise ValueError(f"unrecognized objective source {raw!r}")


def hierarchy_from_list(items: Sequence[dict]) -> Hierarchy:
    specs = []
    for item in items:
        bounds = item.get("norm_bounds")
        specs.append(
            ObjectiveSpec(
                name=item["name"],
                source=parse_source(item["source"]),
                direction=item.get("direction", "maximize"),
                threshold=float(item["threshold"]),
                norm_bounds=tuple(float(b) for b in bounds) if bounds is not None else None,
            )
        )
    return Hierarchy(tuple(specs))


def validate_for_problem(hierarchy: Hierarchy, input_dim: int, output_dim: int) -> None:
    for o in hierarchy:
        if isinstance(o.source, OutputSource) and o.source.index >= output_dim:
            raise ValueError(
                f"{o.name}: output index {o.source.index} out of range for {output_dim} outputs"
            )
        if isinstance(o.source, InputSource) and len(o.source.coefficients) > input_dim:
            raise ValueError(
                f"{o.name}: expression references coordinate {len(o.source.coefficients) - 1}, "
                f"problem has {input_dim} inputs"
            )
