"""YAML campaign configuration with line-anchored validation errors.

Example::

    seed: 7
    budget: 50
    repeats: 50
    strategies: [botier-composite, sobol]
    surfaces:
      - name: BNH
        starred: true          # default hierarchy, shifted to be non-negative
      - name: ZDT1
        hierarchy:
          - {name: f0, source: "output:0", threshold: -0.18}
          - {name: x1+x5, source: {coefficients: [0, 1, 0, 0, 0, 1]},
             direction: minimize, threshold: 0.5}
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import surfaces
from .campaign import STRATEGIES, CampaignConfig
from .objectives import Hierarchy, hierarchy_from_list, parse_source


class ConfigError(ValueError):
    """Invalid configuration; the message starts with ``path:line:``."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AffineSource(_Strict):
    coefficients: list[float] = Field(min_length=1)
    constant: float = 0.0


class ObjectiveModel(_Strict):
    name: str
    source: Union[str, AffineSource]
    direction: Literal["maximize", "minimize"] = "maximize"
    threshold: float
    norm_bounds: tuple[float, float] | None = None

    @field_validator("source")
    @classmethod
    def _source_ok(cls, v):
        parse_source(v if isinstance(v, str) else v.model_dump())
        return v

    @field_validator("norm_bounds")
    @classmethod
    def _bounds_ok(cls, v):
        if v is not None and not v[0] < v[1]:
            raise ValueError("norm_bounds need lo < hi")
        return v


class SurfaceModel(_Strict):
    name: str
    starred: bool = False
    scaling: Literal["offset", "unit", "raw"] = "offset"
    hierarchy: list[ObjectiveModel] | None = Field(default=None, min_length=1)
    penalty_weights: list[float] | None = None

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        try:
            surfaces.get(v)
        except surfaces.UnknownSurfaceError as exc:
            raise ValueError(exc.args[0]) from None
        return v


Strategy = Literal[STRATEGIES]  # type: ignore[valid-type]


class RunConfigModel(_Strict):
    seed: int | None = None
    budget: int = Field(default=50, ge=1)
    n_seed: int = Field(default=1, ge=1)
    repeats: int = Field(default=50, ge=1)
    k: float = Field(default=100.0, gt=0)
    mc_samples: int = Field(default=128, ge=1)
    strategies: list[Strategy] = Field(default_factory=lambda: ["botier-composite"], min_length=1)
    surfaces: list[SurfaceModel] = Field(min_length=1)
    svg: bool = True


class HierarchyFileModel(_Strict):
    objectives: list[ObjectiveModel] = Field(min_length=1)


def _node_line(root, loc) -> int | None:
    """1-based line of the YAML node addressed by a pydantic error location."""
    node = root
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = None
            for k_node, v_node in node.value:
                if k_node.value == key:
                    match = (k_node, v_node)
                    break
            if match is None:
                break
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int):
            if key >= len(node.value):
                break
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _load_yaml(text: str, label: str):
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        raise ConfigError(f"{label}:{line}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    return root, data


def _validate(model_cls, text: str, label: str):
    root, data = _load_yaml(text, label)
    if isinstance(data, list) and model_cls is HierarchyFileModel:
        data = {"objectives": data}
        root = None
    try:
        return model_cls.model_validate(data if data is not None else {})
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and p in {"str", "AffineSource"}))
        line = _node_line(root, loc) if root is not None else None
        where = ".".join(str(p) for p in loc) or "<root>"
        msg = err["msg"]
        raise ConfigError(f"{label}:{line or 1}: {where}: {msg}") from None


def load_run_config(path: str | Path) -> RunConfigModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}:0: cannot read config: {exc.strerror}") from None
    return _validate(RunConfigModel, text, str(path))


def load_hierarchy(path: str | Path) -> Hierarchy:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}:0: cannot read hierarchy: {exc.strerror}") from None
    model = _validate(HierarchyFileModel, text, str(path))
    return _to_hierarchy(model.objectives)


def _to_hierarchy(objectives: list[ObjectiveModel]) -> Hierarchy:
    return hierarchy_from_list([o.model_dump() for o in objectives])


def expand(model: RunConfigModel, seed: int) -> list[CampaignConfig]:
    """One campaign per (surface, strategy) pair, in file order."""
    out = []
    for s in model.surfaces:
        hierarchy = _to_hierarchy(s.hierarchy) if s.hierarchy else None
        for strategy in model.strategies:
            out.append(
                CampaignConfig(
                    surface=s.name,
                    starred=s.starred or s.name.endswith("*"),
                    strategy=strategy,
                    hierarchy=hierarchy,
                    budget=model.budget,
                    n_seed=model.n_seed,
                    repeats=model.repeats,
                    k=model.k,
                    mc_samples=model.mc_samples,
                    seed=seed,
                    penalty_weights=tuple(s.penalty_weights) if s.penalty_weights else None,
                    scaling=s.scaling,
                )
            )
    return out


def campaign_to_dict(cfg: CampaignConfig) -> dict:
    return {
        "surface": cfg.label,
        "strategy": cfg.strategy,
        "hierarchy": cfg.resolved_hierarchy().to_list(),
        "budget": cfg.budget,
        "n_seed": cfg.n_seed,
        "repeats": cfg.repeats,
        "k": cfg.k,
        "mc_samples": cfg.mc_samples,
        "seed": cfg.seed,
        "penalty_weights": list(cfg.penalty_weights) if cfg.penalty_weights else None,
        "scaling": cfg.scaling,
    }


def config_hash(model: RunConfigModel, seed: int) -> str:
    payload = model.model_dump(mode="json")
    payload["seed"] = seed
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
