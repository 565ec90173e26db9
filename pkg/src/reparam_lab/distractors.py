"""Transpose functions (observation distractors) and train/test perturbations.

A transpose function only corrupts what the policy observes; it never touches
the true dynamics. Environment perturbations, on the other hand, build a
testing MDP whose transition, initialization and reward differ from the
training MDP by bounded offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core_sim import ReparamMDP
from .errors import ConfigurationError, DistractorError
from .func_families import project_ball

DISTRACTOR_KINDS = (
    "identity",
    "additive_fixed",
    "additive_timevarying",
    "stochastic",
    "generic_deterministic",
)

# stochastic offsets are clipped componentwise at this many standard deviations
CLIP_SIGMAS = 6.0


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


@dataclass(frozen=True, eq=False)
class TransposeFunction:
    kind: str
    dim: int
    eta: float = 0.0
    sigma2: float = 0.0
    seed: int = 0
    offset: np.ndarray | None = None  # fixed shift, or mean shift for "stochastic"
    fn: Callable | None = None  # generic_deterministic: fn(s, t) -> f(s)

    def __post_init__(self):
        if self.kind not in DISTRACTOR_KINDS:
            raise ConfigurationError(f"unknown distractor kind {self.kind!r}")
        if self.eta < 0 or self.sigma2 < 0:
            raise ConfigurationError("eta and sigma2 must be nonnegative")
        if self.kind == "generic_deterministic" and self.fn is None:
            raise ConfigurationError("generic_deterministic distractor needs fn")
        if self.kind in ("additive_fixed", "stochastic"):
            if self.offset is None:
                off = self.eta * _unit(np.random.default_rng(self.seed), self.dim)
            else:
                off = project_ball(np.asarray(self.offset, dtype=float), self.eta)
            if off.shape != (self.dim,):
                raise ConfigurationError(f"offset must have shape ({self.dim},)")
            object.__setattr__(self, "offset", off)

    @property
    def is_stochastic(self) -> bool:
        return self.kind == "stochastic"

    @property
    def component_std(self) -> float:
        return math.sqrt(self.sigma2 / self.dim)

    def shift_at(self, t: int) -> np.ndarray:
        """Time-varying shift ``eps_t``; a pure function of ``(seed, t)``."""
        rng = np.random.default_rng([self.seed, t])
        radius = self.eta * (0.5 + 0.5 * rng.random())
        return radius * _unit(rng, self.dim)

    def apply(self, s, t: int = 0, rng=None):
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.dim:
            raise ConfigurationError(f"state dimension {s.shape[-1]} != distractor dim {self.dim}")
        if self.kind == "identity":
            return s
        if self.kind == "additive_fixed":
            out = s + self.offset
        elif self.kind == "additive_timevarying":
            out = s + self.shift_at(t)
        elif self.kind == "stochastic":
            if rng is None:
                rng = np.random.default_rng([self.seed, t, 1])
            sd = self.component_std
            z = np.clip(rng.standard_normal(s.shape), -CLIP_SIGMAS, CLIP_SIGMAS)
            out = s + self.offset + sd * z
        else:
            out = np.asarray(self.fn(s, t), dtype=float)
        if not np.all(np.isfinite(out)):
            raise DistractorError(f"{self.kind} distractor produced a non-finite output at t={t}")
        return out

    __call__ = apply

    def check_mean_shift(self, n: int = 100_000, seed: int = 0) -> bool:
        """Monte Carlo check that ``||E[f(s)] - s|| <= eta`` (3 standard errors)."""
        if not self.is_stochastic:
            return True
        rng = np.random.default_rng(seed)
        s = np.zeros((n, self.dim))
        mean = (self.apply(s, 0, rng=rng) - s).mean(axis=0)
        return bool(np.linalg.norm(mean) <= self.eta + 3.0 * math.sqrt(self.sigma2 / n))


def identity(dim: int) -> TransposeFunction:
    return TransposeFunction("identity", dim)


def additive_fixed(offset) -> TransposeFunction:
    offset = np.atleast_1d(np.asarray(offset, dtype=float))
    return TransposeFunction(
        "additive_fixed", offset.size, eta=float(np.linalg.norm(offset)), offset=offset
    )


def stochastic(dim: int, eta: float, sigma2: float, seed: int = 0, *, check: bool = True):
    """Gaussian observation noise with mean shift of norm ``eta`` and total variance ``sigma2``."""
    f = TransposeFunction("stochastic", dim, eta=eta, sigma2=sigma2, seed=seed)
    if check and not f.check_mean_shift(seed=seed):
        raise DistractorError("stochastic distractor mean shift exceeds eta")
    return f


def make_distractor(kind: str, dim: int, eta: float = 0.0, sigma2: float = 0.0, seed: int = 0):
    if kind == "stochastic":
        return stochastic(dim, eta, sigma2, seed)
    if kind == "generic_deterministic":
        raise ConfigurationError("generic_deterministic distractors need a user map; build them in code")
    return TransposeFunction(kind, dim, eta=eta, sigma2=sigma2, seed=seed)


@dataclass(frozen=True)
class EnvPerturbation:
    zeta: float = 0.0
    epsilon: float = 0.0
    epsilon_r: float = 0.0

    def __post_init__(self):
        for name in ("zeta", "epsilon", "epsilon_r"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigurationError(f"{name} must be finite and nonnegative")


def perturb_mdp(base: ReparamMDP, pert: EnvPerturbation, seed: int = 0) -> ReparamMDP:
    """Testing MDP with ``T' = T + zeta*u``, ``I' = I + epsilon*v``, ``r' = r + epsilon_r``.

    ``u`` and ``v`` are unit vectors drawn from ``seed``. Constant offsets keep
    every Lipschitz constant of the base MDP and realize the sup gaps exactly.
    """
    if pert.zeta == 0 and pert.epsilon == 0 and pert.epsilon_r == 0:
        return base
    rng = np.random.default_rng([seed, 4])
    t_off = pert.zeta * _unit(rng, base.d_s)
    i_off = pert.epsilon * _unit(rng, base.d_s)
    r_off = pert.epsilon_r
    T0, I0, R0 = base.transition, base.init, base.reward

    def transition(s, a, xi):
        return T0(s, a, xi) + t_off

    def init(xi0):
        return I0(xi0) + i_off

    def reward(s, a):
        return R0(s, a) + r_off

    return replace(
        base,
        transition=transition if pert.zeta else T0,
        init=init if pert.epsilon else I0,
        reward=reward if pert.epsilon_r else R0,
    )
