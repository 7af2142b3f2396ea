"""Run configuration: YAML files merged with command-line overrides."""

from __future__ import annotations

import pathlib
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from dyadic_cubes.constants import (
    D5_PAIR_BUDGET,
    DEFAULT_BIG_C_STAR,
    DEFAULT_BISECT_STEPS,
    DEFAULT_C_STAR,
    DEFAULT_CHAIN_FACTOR,
    DEFAULT_CLOSURE_FACTOR,
    DEFAULT_P_MAX,
    DEFAULT_P_MIN,
    DEFAULT_PAIR_BUDGET,
    DEFAULT_R,
    DEFAULT_W_BUDGET,
    ENERGY_TOL,
    MAX_POINTS,
)
from dyadic_cubes.core.errors import InvalidInput


class WindowConfig(BaseModel):
    k_min: int
    k_max: int

    @model_validator(mode="after")
    def _ordered(self) -> WindowConfig:
        if self.k_min > self.k_max:
            raise ValueError(f"window [{self.k_min}, {self.k_max}] is empty")
        return self


class AlphaOverrides(BaseModel):
    """Relaxed-mode replacements for the recipe alphas."""

    alpha1: Optional[float] = None
    alpha2: Optional[float] = None
    alpha3: Optional[float] = None
    alpha6: Optional[float] = None


class EstimateConfig(BaseModel):
    p_min: float = DEFAULT_P_MIN
    p_max: float = DEFAULT_P_MAX
    bisect_steps: int = Field(default=DEFAULT_BISECT_STEPS, ge=0)
    depths: Optional[list[int]] = None
    w_budget: int = Field(default=DEFAULT_W_BUDGET, ge=1)
    tol: float = Field(default=ENERGY_TOL, gt=0)

    @model_validator(mode="after")
    def _p_range(self) -> EstimateConfig:
        if not 1 < self.p_min < self.p_max:
            raise ValueError(f"need 1 < p_min < p_max, got {self.p_min}, {self.p_max}")
        return self


class RunConfig(BaseModel):
    input: str = ""
    mode: Literal["strict", "relaxed"] = "relaxed"
    r: Optional[float] = None
    c_star: float = DEFAULT_C_STAR
    C_star: float = DEFAULT_BIG_C_STAR
    gamma: Optional[float] = None  # None: estimated from the space
    N: Optional[int] = None  # None: estimated from the space
    window: Optional[WindowConfig] = None
    base: int = Field(default=0, ge=0)
    nested_nets: bool = False
    closure_factor: float = Field(default=DEFAULT_CLOSURE_FACTOR, ge=0)
    chain_factor: float = Field(default=DEFAULT_CHAIN_FACTOR, gt=0)
    alphas: AlphaOverrides = Field(default_factory=AlphaOverrides)
    M: Optional[int] = Field(default=None, ge=1)  # None: smallest adapted M
    estimate: EstimateConfig = Field(default_factory=EstimateConfig)
    pair_budget: int = Field(default=DEFAULT_PAIR_BUDGET, ge=1)
    d5_budget: int = Field(default=D5_PAIR_BUDGET, ge=1)
    w_budget: int = Field(default=DEFAULT_W_BUDGET, ge=1)
    max_points: int = Field(default=MAX_POINTS, ge=1)
    seed: int = 0
    out: Optional[str] = None
    workers: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _constants(self) -> RunConfig:
        if self.r is not None and not 0 < self.r < 1:
            raise ValueError(f"r must lie in (0,1), got {self.r}")
        if not 0 < self.c_star < self.C_star:
            raise ValueError(f"need 0 < c_star < C_star, got {self.c_star}, {self.C_star}")
        if self.gamma is not None and not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.N is not None and self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.mode == "strict" and any(v is not None for v in self.alphas.model_dump().values()):
            raise ValueError("alpha overrides are only accepted in relaxed mode")
        return self

    @property
    def ratio(self) -> float:
        """Relaxed-mode ratio (strict mode derives its own)."""
        return self.r if self.r is not None else DEFAULT_R

    @classmethod
    def from_file(cls, path: pathlib.Path) -> RunConfig:
        """Load RunConfig from a YAML file."""
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as e:
            raise InvalidInput(f"{path}: {e}") from None
        if not isinstance(raw, dict):
            raise InvalidInput(f"{path}: expected a mapping at the top level")
        return cls.validated(raw)

    @classmethod
    def validated(cls, raw: dict[str, Any]) -> RunConfig:
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise InvalidInput(str(e)) from None

    def merged(self, **overrides: Any) -> RunConfig:
        """Copy with every non-None override applied; dotted keys reach nested models."""
        data = self.model_dump()
        for key, value in overrides.items():
            if value is None:
                continue
            target = data
            *parents, leaf = key.split(".")
            for part in parents:
                if target.get(part) is None:
                    target[part] = {}
                target = target[part]
            target[leaf] = value
        return RunConfig.validated(data)
