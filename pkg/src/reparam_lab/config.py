"""Experiment configuration schema.

Configs are YAML documents validated with pydantic; unknown keys anywhere in
the document are rejected so a misspelled bound or constant cannot silently
fall back to a default.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigurationError

BOUND_NAMES = (
    "fixed_policy_shift",
    "linear_noise",
    "stochastic_distractor",
    "state_dev_init",
    "state_dev_transition",
    "train_test",
    "reward_shift",
    "generalization",
    "final",
    "return_lipschitz",
    "rademacher",
    "lemma_chain",
    "gumbel_max",
)
BoundName = Literal[BOUND_NAMES]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Dims(_Strict):
    d_s: int = Field(3, ge=1)
    d_a: int = Field(2, ge=1)
    d_phi: int = Field(2, ge=1)
    d_xi: int = Field(3, ge=1)


class ConstantTargets(_Strict):
    L_t1: float = Field(0.8, ge=0)
    L_t2: float = Field(0.5, ge=0)
    L_pi1: float = Field(1.0, ge=0)
    L_phi: float = Field(1.0, ge=0)
    L_r1: float = Field(0.5, ge=0)
    L_r2: float = Field(0.5, ge=0)
    r_max: float = Field(1.0, gt=0)
    K: Optional[float] = Field(None, gt=0)
    R_phi: float = Field(1.0, gt=0)


class DistractorSpec(_Strict):
    kind: Literal["identity", "additive_fixed", "additive_timevarying", "stochastic"] = "identity"
    eta: float = Field(0.0, ge=0)
    sigma2: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0)


class PerturbationSpec(_Strict):
    zeta: float = Field(0.0, ge=0)
    epsilon: float = Field(0.0, ge=0)
    epsilon_r: float = Field(0.0, ge=0)


class BigO(_Strict):
    concentration_constant: float = Field(3.0, ge=0)
    rademacher_constant: float = Field(2.0, ge=0)


class RademacherSpec(_Strict):
    ns: List[int] = Field(default_factory=lambda: [16, 64, 256, 1024])
    n_sigma: int = Field(2000, ge=1)
    n_noise_reps: int = Field(8, ge=1)
    slope_target: float = -0.5
    slope_tolerance: float = Field(0.15, ge=0)

    @field_validator("ns")
    @classmethod
    def _ns(cls, v):
        if len(v) < 2 or any(n < 1 for n in v):
            raise ValueError("need at least two positive episode budgets")
        return v


class GumbelSpec(_Strict):
    n_rows: int = Field(10, ge=1)
    max_states: int = Field(8, ge=2)
    n_draws: int = Field(100_000, ge=100)
    alpha: float = Field(0.001, gt=0, lt=1)


class TestHooks(_Strict):
    # multiplies every right-hand side; < 1 is a negative control
    rhs_scale: float = Field(1.0, gt=0)


class ExperimentConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    dims: Dims = Field(default_factory=Dims)
    horizon: int = Field(10, ge=0)
    gamma: float = Field(0.9, ge=0, lt=1)
    noise_family: Literal["gaussian", "uniform", "gumbel"] = "gaussian"
    constants: ConstantTargets = Field(default_factory=ConstantTargets)
    distractor: DistractorSpec = Field(default_factory=DistractorSpec)
    perturbation: PerturbationSpec = Field(default_factory=PerturbationSpec)
    delta: float = Field(0.1, gt=0, lt=1)
    n_episodes: int = Field(1000, ge=2)
    n_pairs: int = Field(1000, ge=1)
    bounds: List[BoundName] = Field(default_factory=lambda: ["fixed_policy_shift"])
    big_o: BigO = Field(default_factory=BigO)
    z: float = Field(4.0, ge=0)
    rademacher: RademacherSpec = Field(default_factory=RademacherSpec)
    gumbel: GumbelSpec = Field(default_factory=GumbelSpec)
    output_dir: str = "out"
    test_hooks: TestHooks = Field(default_factory=TestHooks)

    @field_validator("bounds")
    @classmethod
    def _unique(cls, v):
        if not v:
            raise ValueError("at least one bound must be requested")
        if len(set(v)) != len(v):
            raise ValueError("bounds must not repeat")
        return v

    def with_overrides(self, *, seed=None, out=None, episodes=None) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if out is not None:
            changes["output_dir"] = str(out)
        if episodes is not None:
            changes["n_episodes"] = episodes
        return validate_config({**self.model_dump(), **changes}) if changes else self


def _field_path(err) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def validate_config(data) -> ExperimentConfig:
    """Validate a mapping, raising :class:`ConfigurationError` with the first bad field path."""
    if not isinstance(data, dict):
        raise ConfigurationError("config document must be a mapping", field_path="<root>")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigurationError(err["msg"], field_path=_field_path(err)) from exc


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse YAML: {exc}", field_path="<root>") from exc
    return validate_config(data if data is not None else {})
