"""Reparameterized episode simulation.

All environment randomness is drawn up front as a noise sequence
``xi_0 .. xi_T``; given that sequence a rollout is a deterministic function of
the MDP, encoder and policy. Maps act on the last array axis, so the same code
rolls out one episode (``(T+1, d_xi)`` noise) or a batch of episodes
(``(n, T+1, d_xi)`` noise) in lockstep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InvalidModelError, NumericalDivergenceError
from .func_families import ConstantSet

NOISE_FAMILIES = ("gaussian", "uniform", "gumbel")


@dataclass(frozen=True, eq=False)
class NoiseSequence:
    entries: np.ndarray  # (T+1, d_xi)
    seed: int

    @property
    def horizon(self) -> int:
        return self.entries.shape[0] - 1

    def __len__(self):
        return self.entries.shape[0]


def _draw(rng, family, shape):
    if family == "gaussian":
        return rng.standard_normal(shape)
    if family == "uniform":
        return rng.random(shape)
    if family == "gumbel":
        return rng.gumbel(size=shape)
    raise ConfigurationError(f"unknown noise family {family!r}; expected one of {NOISE_FAMILIES}")


def sample_noise(seed: int, horizon: int, dim: int, family: str = "gaussian") -> NoiseSequence:
    """Draw ``xi_0 .. xi_T`` i.i.d. from ``family``; deterministic in ``seed``."""
    if family not in NOISE_FAMILIES:
        raise ConfigurationError(f"unknown noise family {family!r}; expected one of {NOISE_FAMILIES}")
    if horizon < 0 or dim < 1:
        raise ConfigurationError("need horizon >= 0 and dim >= 1")
    rng = np.random.default_rng(np.uint64(seed))
    return NoiseSequence(entries=_draw(rng, family, (horizon + 1, dim)), seed=int(seed))


def sample_noise_batch(seed: int, n: int, horizon: int, dim: int, family: str = "gaussian"):
    """``(n, T+1, d_xi)`` array of independent noise sequences from one seed."""
    if family not in NOISE_FAMILIES:
        raise ConfigurationError(f"unknown noise family {family!r}; expected one of {NOISE_FAMILIES}")
    if horizon < 0 or dim < 1 or n < 1:
        raise ConfigurationError("need n >= 1, horizon >= 0 and dim >= 1")
    rng = np.random.default_rng(np.uint64(seed))
    return _draw(rng, family, (n, horizon + 1, dim))


@dataclass(frozen=True, eq=False)
class ReparamMDP:
    """Deterministic transition / initialization / reward triple.

    ``transition(s, a, xi)``, ``init(xi0)`` and ``reward(s, a)`` must accept
    arrays with arbitrary leading batch axes.
    """

    transition: Callable
    init: Callable
    reward: Callable
    gamma: float
    horizon: int
    d_s: int
    d_a: int
    d_xi: int
    constants: ConstantSet | None = None
    noise_family: str = "gaussian"

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in [0, 1)")
        if self.horizon < 0:
            raise ConfigurationError("horizon must be >= 0")
        if self.noise_family not in NOISE_FAMILIES:
            raise ConfigurationError(f"unknown noise family {self.noise_family!r}")

    def sample_noise(self, seed: int) -> NoiseSequence:
        return sample_noise(seed, self.horizon, self.d_xi, self.noise_family)

    def sample_noise_batch(self, seed: int, n: int):
        return sample_noise_batch(seed, n, self.horizon, self.d_xi, self.noise_family)


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # (T+1, d_s), or (n, T+1, d_s) for a batch
    actions: np.ndarray
    rewards: np.ndarray  # (T+1,) or (n, T+1)
    observations: np.ndarray | None = None  # f(s_t) as seen by a transposed rollout

    def __post_init__(self):
        T1 = self.states.shape[-2]
        if self.actions.shape[-2] != T1 or self.rewards.shape[-1] != T1:
            raise ValueError("states, actions and rewards must share length T+1")

    def __len__(self):
        return self.states.shape[-2]

    def episode(self, i: int) -> "Trajectory":
        obs = None if self.observations is None else self.observations[i]
        return Trajectory(self.states[i], self.actions[i], self.rewards[i], obs)


def discounted_return(traj_or_rewards, gamma: float):
    """``sum_t gamma**t * rewards[t]`` (per episode for batched rewards)."""
    rewards = traj_or_rewards.rewards if isinstance(traj_or_rewards, Trajectory) else traj_or_rewards
    rewards = np.asarray(rewards, dtype=float)
    disc = gamma ** np.arange(rewards.shape[-1])
    if rewards.ndim == 1:
        return math.fsum(disc * rewards)
    return np.array([math.fsum(row) for row in (disc * rewards).reshape(-1, rewards.shape[-1])]
                    ).reshape(rewards.shape[:-1])


def _check_dims(mdp, encoder, policy, xi):
    if xi.shape[-2] != mdp.horizon + 1:
        raise ConfigurationError(
            f"noise has {xi.shape[-2]} steps, MDP horizon needs {mdp.horizon + 1}"
        )
    if xi.shape[-1] != mdp.d_xi:
        raise ConfigurationError(f"noise dimension {xi.shape[-1]} != d_xi {mdp.d_xi}")
    if encoder.in_dim != mdp.d_s:
        raise ConfigurationError(f"encoder input {encoder.in_dim} != d_s {mdp.d_s}")
    if policy.in_dim != encoder.out_dim:
        raise ConfigurationError(f"policy input {policy.in_dim} != encoder output {encoder.out_dim}")
    if policy.out_dim != mdp.d_a:
        raise ConfigurationError(f"policy output {policy.out_dim} != d_a {mdp.d_a}")


def _as_noise_array(noise):
    return np.asarray(noise.entries if isinstance(noise, NoiseSequence) else noise, dtype=float)


def _check_finite(s, t):
    if not np.all(np.isfinite(s)):
        bad = None
        if s.ndim > 1:
            bad = int(np.flatnonzero(~np.all(np.isfinite(s), axis=-1))[0])
        raise NumericalDivergenceError(t, episode=bad)


def rollout(mdp: ReparamMDP, encoder, policy, noise) -> Trajectory:
    """Run the reparameterized episode driven by ``noise``.

    ``s_0 = I(xi_0)``, ``a_t = pi(phi(s_t))``, ``s_{t+1} = T(s_t, a_t, xi_t)``.
    ``noise`` is a :class:`NoiseSequence` or a raw ``(..., T+1, d_xi)`` array.
    """
    xi = _as_noise_array(noise)
    _check_dims(mdp, encoder, policy, xi)
    T = mdp.horizon
    s = np.asarray(mdp.init(xi[..., 0, :]), dtype=float)
    states, actions, rewards = [], [], []
    for t in range(T + 1):
        _check_finite(s, t)
        a = policy(encoder(s))
        states.append(s)
        actions.append(a)
        rewards.append(mdp.reward(s, a))
        if t < T:
            s = np.asarray(mdp.transition(s, a, xi[..., t, :]), dtype=float)
    return Trajectory(
        states=np.stack(states, axis=-2),
        actions=np.stack(actions, axis=-2),
        rewards=np.stack(rewards, axis=-1),
    )


def rollout_transposed(mdp: ReparamMDP, encoder, policy, noise, f, *, rng=None,
                       closed_loop: bool = False) -> Trajectory:
    """Rollout in which the policy observes ``f(s_t)`` instead of ``s_t``.

    The recorded action is ``pi(phi(f(s_t)))`` and the recorded reward is
    ``r(s_t, pi(phi(f(s_t))))``. By default (``closed_loop=False``) the states
    are those of the clean trajectory driven by the same noise, i.e. the
    distractor is evaluated along the identical trajectory. With
    ``closed_loop=True`` the distracted actions also drive the dynamics; the
    fixed-policy bounds do not cover that mode.

    ``rng`` feeds stochastic transpose functions.
    """
    xi = _as_noise_array(noise)
    _check_dims(mdp, encoder, policy, xi)
    T = mdp.horizon
    s = np.asarray(mdp.init(xi[..., 0, :]), dtype=float)
    states, actions, rewards, observations = [], [], [], []
    for t in range(T + 1):
        _check_finite(s, t)
        obs = f.apply(s, t, rng=rng)
        a_seen = policy(encoder(obs))
        observations.append(obs)
        states.append(s)
        actions.append(a_seen)
        rewards.append(mdp.reward(s, a_seen))
        if t < T:
            a_drive = a_seen if closed_loop else policy(encoder(s))
            s = np.asarray(mdp.transition(s, a_drive, xi[..., t, :]), dtype=float)
    return Trajectory(
        states=np.stack(states, axis=-2),
        actions=np.stack(actions, axis=-2),
        rewards=np.stack(rewards, axis=-1),
        observations=np.stack(observations, axis=-2),
    )


# --- discrete MDPs and the Gumbel-max transition ---------------------------------

LOG_ZERO = np.finfo(float).min


@dataclass(frozen=True, eq=False)
class DiscreteMDP:
    n_states: int
    transition_table: np.ndarray  # (n_states, n_actions, n_states)
    initial_dist: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.transition_table, dtype=float)
        p0 = np.asarray(self.initial_dist, dtype=float)
        if p.ndim != 3 or p.shape[0] != self.n_states or p.shape[2] != self.n_states:
            raise InvalidModelError("transition_table must have shape (S, A, S)")
        if p0.shape != (self.n_states,):
            raise InvalidModelError("initial_dist must have length S")
        if np.any(p < 0) or np.any(p0 < 0):
            raise InvalidModelError("probabilities must be nonnegative")
        sums = p.sum(axis=-1)
        if np.any(sums == 0):
            raise InvalidModelError("transition row with all-zero probabilities")
        if np.any(np.abs(sums - 1.0) > 1e-12) or abs(p0.sum() - 1.0) > 1e-12:
            raise InvalidModelError("rows must sum to 1 within 1e-12")

    @property
    def n_actions(self) -> int:
        return self.transition_table.shape[1]


def safe_log(p):
    """Elementwise log with zeros mapped to the most negative finite float."""
    p = np.asarray(p, dtype=float)
    out = np.full(p.shape, LOG_ZERO)
    np.log(p, out=out, where=p > 0)
    return out


def gumbel_argmax(probs, xi):
    """``argmax_j (xi_j + log p_j)`` along the last axis."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs.sum(axis=-1) <= 0):
        raise InvalidModelError("cannot sample from an all-zero probability row")
    return np.argmax(np.asarray(xi, dtype=float) + safe_log(probs), axis=-1)


def gumbel_max_step(dmdp: DiscreteMDP, s: int, a: int, xi) -> int:
    """Next state ``argmax_j (xi_j + log p(s, a, j))``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != dmdp.n_states:
        raise ConfigurationError(f"xi has length {xi.shape[-1]}, need |S| = {dmdp.n_states}")
    return gumbel_argmax(dmdp.transition_table[s, a], xi)


def discrete_rollout(dmdp: DiscreteMDP, policy: Callable[[int], int], noise) -> list[int]:
    """Gumbel-max episode ``s_0 .. s_T`` from ``T+1`` Gumbel vectors.

    ``xi_0`` selects ``s_0`` from ``initial_dist`` and ``xi_{t+1}`` drives the
    step out of ``s_t``; reusing ``xi_0`` for both would correlate the first
    transition with the initial draw.
    """
    xi = _as_noise_array(noise)
    s = int(gumbel_argmax(dmdp.initial_dist, xi[0]))
    states = [s]
    for t in range(xi.shape[0] - 1):
        s = int(gumbel_max_step(dmdp, s, policy(s), xi[t + 1]))
        states.append(s)
    return states
