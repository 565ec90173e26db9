"""Construction of certified synthetic instances.

A certified instance bundles a :class:`ReparamMDP`, an encoder and a policy
whose declared Lipschitz constants hold by construction:

* transition ``s' = c tanh((A s + B a + C xi + d) / c)`` with ``||A|| = L_t1``,
  ``||B|| = L_t2``;
* reward ``r = r_max tanh((u.s + v.a + r0) / r_max)`` with ``||u|| = L_r1``,
  ``||v|| = L_r2``, hence ``|r| <= r_max``;
* encoder ``phi = proj_R(tanh(W_phi s + b_phi))`` with ``||W_phi|| = L_phi``;
* policy ``pi = tanh(W phi + b)`` with ``||W|| = L_pi1`` and ``||(W, b)|| <= K``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_sim import ReparamMDP
from .errors import ConfigurationError
from .func_families import (
    AffinePolicyFamily,
    CertifiedFunction,
    ConstantSet,
    identity_map,
    make_affine_with_norm,
    saturate,
)

STATE_SCALE = 3.0


@dataclass(frozen=True, eq=False)
class Instance:
    mdp: ReparamMDP
    encoder: CertifiedFunction
    policy: CertifiedFunction
    family: AffinePolicyFamily | None
    constants: ConstantSet
    seed: int = 0

    @property
    def family_constants(self) -> ConstantSet:
        """Constants valid uniformly over the policy family's K-ball."""
        if self.family is None:
            return self.constants
        return self.constants.replace(L_pi1=self.family.L_pi1, L_pi2=self.family.L_pi2)


def _vector_with_norm(rng, dim, norm):
    v = rng.standard_normal(dim)
    return v * (norm / np.linalg.norm(v))


class _SaturatedTransition:
    def __init__(self, A, B, C, d, scale):
        self.A, self.B, self.C, self.d, self.scale = A, B, C, d, scale

    def __call__(self, s, a, xi):
        z = s @ self.A.T + a @ self.B.T + xi @ self.C.T + self.d
        return saturate(z, self.scale)


class _SaturatedInit:
    def __init__(self, M, scale):
        self.M, self.scale = M, scale

    def __call__(self, xi0):
        return saturate(xi0 @ self.M.T, self.scale)


class _BoundedReward:
    def __init__(self, u, v, r0, r_max):
        self.u, self.v, self.r0, self.r_max = u, v, r0, r_max

    def __call__(self, s, a):
        return self.r_max * np.tanh((s @ self.u + a @ self.v + self.r0) / self.r_max)


def build_instance(*, d_s, d_a, d_phi, d_xi, gamma, horizon, L_t1, L_t2, L_pi1, L_phi,
                   L_r1, L_r2, r_max=1.0, K=None, R_phi=1.0, seed=0,
                   noise_family="gaussian", noise_scale=0.5) -> Instance:
    """Certified instance with the requested constants; deterministic in ``seed``."""
    for name, d in (("d_s", d_s), ("d_a", d_a), ("d_phi", d_phi), ("d_xi", d_xi)):
        if d < 1:
            raise ConfigurationError(f"{name} must be >= 1", field_path=f"dims.{name}")
    rng = np.random.default_rng([seed, 17])
    sub = rng.integers(0, 2**63, size=6)
    A = make_affine_with_norm(d_s, d_s, L_t1, sub[0]).weight
    B = make_affine_with_norm(d_s, d_a, L_t2, sub[1]).weight
    C = noise_scale * rng.standard_normal((d_s, d_xi)) / np.sqrt(d_xi)
    M = rng.standard_normal((d_s, d_xi)) / np.sqrt(d_xi)
    d = 0.1 * rng.standard_normal(d_s)
    u = _vector_with_norm(rng, d_s, L_r1)
    v = _vector_with_norm(rng, d_a, L_r2)
    r0 = 0.1 * r_max * rng.standard_normal()

    encoder = make_affine_with_norm(
        d_phi, d_s, L_phi, sub[2], saturated=True, clip_radius=R_phi, bias_scale=0.1
    )
    pol = make_affine_with_norm(d_a, d_phi, L_pi1, sub[3], saturated=True, bias_scale=0.1)
    theta_norm = float(np.linalg.norm(pol.param_vector))
    if K is None:
        K = theta_norm * 1.25
    elif theta_norm > K:
        raise ConfigurationError(
            f"policy parameter norm {theta_norm:.4g} exceeds K={K}", field_path="constants.K"
        )
    family = AffinePolicyFamily(d_phi=d_phi, d_a=d_a, K=float(K), r_phi=float(R_phi))

    constants = ConstantSet(
        L_t1=float(L_t1), L_t2=float(L_t2), L_pi1=float(L_pi1), L_pi2=family.L_pi2,
        L_r1=float(L_r1), L_r2=float(L_r2), L_phi=float(L_phi), r_max=float(r_max), K=float(K),
    )
    mdp = ReparamMDP(
        transition=_SaturatedTransition(A, B, C, d, STATE_SCALE),
        init=_SaturatedInit(M, STATE_SCALE),
        reward=_BoundedReward(u, v, r0, r_max),
        gamma=float(gamma), horizon=int(horizon),
        d_s=d_s, d_a=d_a, d_xi=d_xi, constants=constants, noise_family=noise_family,
    )
    return Instance(mdp, encoder, pol, family, constants, seed)


def random_instance(seed, *, dim_range=(1, 8), const_range=(0.1, 2.0),
                    gamma_range=(0.1, 0.95), horizon_range=(1, 50)) -> Instance:
    """Random certified instance for soundness sweeps."""
    rng = np.random.default_rng([seed, 99])
    lo, hi = dim_range
    dims = {k: int(rng.integers(lo, hi + 1)) for k in ("d_s", "d_a", "d_phi", "d_xi")}
    consts = {
        k: float(rng.uniform(*const_range))
        for k in ("L_t1", "L_t2", "L_pi1", "L_phi", "L_r1", "L_r2")
    }
    return build_instance(
        **dims, **consts,
        gamma=float(rng.uniform(*gamma_range)),
        horizon=int(rng.integers(horizon_range[0], horizon_range[1] + 1)),
        r_max=float(rng.uniform(0.5, 2.0)),
        seed=int(rng.integers(0, 2**62)),
    )


def linear_chain(horizon: int = 0, gamma: float = 0.5) -> Instance:
    """One-dimensional chain with ``r(s, a) = a`` and identity encoder and policy.

    ``s_0`` is uniform on ``[0, 1)`` and ``s_{t+1} = s_t``. A fixed shift of the
    observation changes every reward by exactly the shift, which makes the
    fixed-policy bound tight.
    """
    constants = ConstantSet(
        L_t1=1.0, L_t2=0.0, L_pi1=1.0, L_pi2=1.0, L_r1=0.0, L_r2=1.0, L_phi=1.0,
        r_max=2.0, K=1.0,
    )
    mdp = ReparamMDP(
        transition=lambda s, a, xi: s,
        init=lambda xi0: xi0,
        reward=lambda s, a: a[..., 0],
        gamma=gamma, horizon=horizon, d_s=1, d_a=1, d_xi=1,
        constants=constants, noise_family="uniform",
    )
    return Instance(mdp, identity_map(1), identity_map(1), None, constants)
