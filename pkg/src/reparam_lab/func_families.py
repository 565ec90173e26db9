"""Lipschitz-certified building blocks and constant algebra.

Every map used by the simulator (encoder, policy head, transition block) is an
affine layer optionally followed by a componentwise ``c * tanh(x / c)`` squash
and an optional projection onto a Euclidean ball. Both the squash and the
projection are 1-Lipschitz, so the certificate of a layer is the spectral norm
of its weight and certificates of compositions multiply.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import BoundInputError, ConfigurationError, InsufficientDiversityError

log = logging.getLogger(__name__)

KINDS = ("affine", "affine_saturated", "composition")


def project_ball(x, radius):
    """Project the rows of ``x`` onto the closed ball of the given radius."""
    if radius is None:
        return x
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
    return x * scale


def saturate(x, scale=1.0):
    return scale * np.tanh(x / scale)


@dataclass(frozen=True, eq=False)
class CertifiedFunction:
    """Affine map ``x -> W x + b`` with an optional squash and ball projection.

    ``weight`` may carry leading batch axes, in which case the function is a
    stack of independent maps evaluated row-by-row (used to roll out many
    policies at once).
    """

    kind: str
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None
    lipschitz_cert: float = 0.0
    sat_scale: float = 1.0
    clip_radius: float | None = None
    parts: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown function kind {self.kind!r}")
        if self.lipschitz_cert < 0 or not math.isfinite(self.lipschitz_cert):
            raise ConfigurationError("lipschitz_cert must be finite and nonnegative")

    @property
    def in_dim(self) -> int:
        if self.kind == "composition":
            return self.parts[-1].in_dim
        return self.weight.shape[-1]

    @property
    def out_dim(self) -> int:
        if self.kind == "composition":
            return self.parts[0].out_dim
        return self.weight.shape[-2]

    @property
    def param_vector(self) -> np.ndarray:
        """Flattened parameters ``theta = (vec(W), b)``."""
        if self.kind == "composition":
            return np.concatenate([p.param_vector for p in self.parts])
        return np.concatenate([self.weight.reshape(-1), self.bias.reshape(-1)])

    @property
    def param_dim(self) -> int:
        return self.param_vector.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "composition":
            for part in reversed(self.parts):
                x = part(x)
            return x
        if x.shape[-1] != self.in_dim:
            raise ConfigurationError(
                f"input dimension {x.shape[-1]} does not match map input {self.in_dim}"
            )
        y = np.matmul(self.weight, x[..., None])[..., 0] + self.bias
        if self.kind == "affine_saturated":
            y = saturate(y, self.sat_scale)
        return project_ball(y, self.clip_radius)

    def then(self, outer: "CertifiedFunction") -> "CertifiedFunction":
        """Return ``outer o self``."""
        return compose(outer, self)


def affine(weight, bias=None, *, saturated=False, sat_scale=1.0, clip_radius=None, tol=1e-10):
    """Wrap explicit weights, certifying the Lipschitz constant by power iteration."""
    weight = np.asarray(weight, dtype=float)
    if bias is None:
        bias = np.zeros(weight.shape[:-1])
    cert = certify_spectral_norm(weight, tol) if weight.ndim == 2 else max(
        certify_spectral_norm(w, tol) for w in weight.reshape(-1, *weight.shape[-2:])
    )
    return CertifiedFunction(
        kind="affine_saturated" if saturated else "affine",
        weight=weight,
        bias=np.asarray(bias, dtype=float),
        lipschitz_cert=float(cert),
        sat_scale=sat_scale,
        clip_radius=clip_radius,
    )


def compose(*fns: CertifiedFunction) -> CertifiedFunction:
    """``compose(g, h)(x) == g(h(x))``; the certificate is the product."""
    if not fns:
        raise ConfigurationError("compose needs at least one function")
    for outer, inner in zip(fns, fns[1:]):
        if outer.in_dim != inner.out_dim:
            raise ConfigurationError(
                f"cannot compose: inner output {inner.out_dim} != outer input {outer.in_dim}"
            )
    cert = math.prod(f.lipschitz_cert for f in fns)
    return CertifiedFunction(kind="composition", lipschitz_cert=float(cert), parts=tuple(fns))


def identity_map(dim: int) -> CertifiedFunction:
    return CertifiedFunction(
        kind="affine", weight=np.eye(dim), bias=np.zeros(dim), lipschitz_cert=1.0
    )


def certify_spectral_norm(weight, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Upper certificate on ``||W||_2`` from power iteration on ``W^T W``.

    Returns ``(1 + tol) * estimate`` once the Rayleigh quotient changes by less
    than ``tol`` relative between iterations.
    """
    if tol <= 0:
        raise BoundInputError("tol must be positive")
    w = np.asarray(weight, dtype=float)
    if w.ndim != 2:
        raise BoundInputError("certify_spectral_norm expects a matrix")
    if not np.all(np.isfinite(w)):
        raise BoundInputError("weight contains non-finite entries")
    if w.size == 0 or not np.any(w):
        return 0.0
    gram = w.T @ w
    # deterministic start that is generically not orthogonal to the top singular vector
    v = np.linspace(1.0, 2.0, gram.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        u = gram @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            # start vector in the null space; fall back to the largest column norm direction
            v = np.zeros_like(v)
            v[np.argmax(np.linalg.norm(w, axis=0))] = 1.0
            continue
        new = float(v @ u)
        v = u / nu
        if est > 0 and abs(new - est) <= tol * new:
            est = new
            break
        est = new
    else:
        log.warning("power iteration hit max_iter=%d without converging", max_iter)
    return (1.0 + tol) * math.sqrt(max(est, 0.0))


def make_affine_with_norm(rows, cols, target_norm, seed, *, saturated=False, sat_scale=1.0,
                          clip_radius=None, bias_scale=0.0):
    """Random ``rows x cols`` affine map rescaled to spectral norm ``target_norm``."""
    if target_norm <= 0:
        raise BoundInputError("target_norm must be positive")
    attempt = 0
    while True:
        rng = np.random.default_rng([int(seed), attempt])
        w = rng.standard_normal((rows, cols))
        s = np.linalg.norm(w, 2)
        if s > 1e-12:
            break
        attempt += 1
    w = w * (target_norm / s)
    b = bias_scale * rng.standard_normal(rows)
    return CertifiedFunction(
        kind="affine_saturated" if saturated else "affine",
        weight=w,
        bias=b,
        lipschitz_cert=float(target_norm),
        sat_scale=sat_scale,
        clip_radius=clip_radius,
    )


@dataclass(frozen=True)
class ConstantSet:
    """Declared Lipschitz constants and bounds for one certified instance."""

    L_t1: float
    L_t2: float
    L_pi1: float
    L_pi2: float
    L_r1: float
    L_r2: float
    L_phi: float
    r_max: float = 1.0
    K: float = 1.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not math.isfinite(value) or value < 0:
                raise ConfigurationError(f"constant {name} must be finite and nonnegative")
        if self.r_max <= 0 or self.K <= 0:
            raise ConfigurationError("r_max and K must be positive")

    def as_dict(self):
        return {
            "L_t1": self.L_t1, "L_t2": self.L_t2, "L_pi1": self.L_pi1, "L_pi2": self.L_pi2,
            "L_r1": self.L_r1, "L_r2": self.L_r2, "L_phi": self.L_phi,
            "r_max": self.r_max, "K": self.K,
        }

    def replace(self, **changes) -> "ConstantSet":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedConstants:
    nu: float
    lam: float
    L_J: float


NU_ONE_THRESHOLD = 1e-9


def growth(nu: float, t: int) -> float:
    """``(nu**t - 1) / (nu - 1)``, i.e. ``sum_{k<t} nu**k``, stable near ``nu = 1``."""
    if t <= 0:
        return 0.0
    if abs(nu - 1.0) < NU_ONE_THRESHOLD:
        return float(t)
    if nu == 0.0:
        return 1.0
    return math.expm1(t * math.log(nu)) / (nu - 1.0)


def compose_constants(c: ConstantSet, gamma: float, T: int) -> DerivedConstants:
    """Composite rates nu, lambda and the return-Lipschitz constant L_J."""
    if not 0.0 <= gamma < 1.0:
        raise BoundInputError("gamma must lie in [0, 1)")
    if T < 0:
        raise BoundInputError("T must be nonnegative")
    nu = c.L_t1 + c.L_t2 * c.L_pi1 * c.L_phi
    lam = c.L_r1 + c.L_r2 * c.L_pi1 * c.L_phi
    terms = [
        gamma**t * (lam * c.L_t2 * c.L_pi2 * growth(nu, t) + c.L_r2 * c.L_pi2)
        for t in range(T + 1)
    ]
    return DerivedConstants(nu=nu, lam=lam, L_J=math.fsum(terms))


@dataclass(frozen=True)
class LipschitzEstimate:
    max_slope_k: float
    n_pairs: int
    pairs_skipped: int
    slopes: np.ndarray = field(repr=False, default=None)


def empirical_max_slope(fn_outer, fn_inner, samples, n_boot, seed, dedup_eps=1e-10):
    """Bootstrap max-slope estimate of the Lipschitz constant of ``fn_outer``.

    Pairs ``(s, s')`` are drawn with replacement from ``samples``; the slope of
    a pair is ``||outer(inner(s)) - outer(inner(s'))|| / ||inner(s) - inner(s')||``.
    Pairs whose denominator is below ``dedup_eps`` are skipped. The pair draws
    for ``n_boot`` are a prefix of those for any larger ``n_boot`` with the same
    seed, so the estimate is nondecreasing in ``n_boot``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if len(samples) < 2:
        raise BoundInputError("need at least two samples")
    if n_boot < 1:
        raise BoundInputError("n_boot must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(samples), size=(n_boot, 2))
    reps = fn_inner(samples)
    outs = fn_outer(reps)
    den = np.linalg.norm(reps[idx[:, 0]] - reps[idx[:, 1]], axis=-1)
    num = np.linalg.norm(outs[idx[:, 0]] - outs[idx[:, 1]], axis=-1)
    keep = den >= dedup_eps
    skipped = int(n_boot - keep.sum())
    if not keep.any():
        raise InsufficientDiversityError("all bootstrap pairs were near-duplicates")
    slopes = num[keep] / den[keep]
    return LipschitzEstimate(
        max_slope_k=float(slopes.max()), n_pairs=int(keep.sum()),
        pairs_skipped=skipped, slopes=slopes,
    )


def max_state_gap(f, samples: Sequence, t: int = 0, rng=None) -> float:
    """``max_s ||f(s) - s||`` over the samples.

    For stochastic transpose functions this is the maximum over one
    realization per sample (``f.is_stochastic`` tells the caller).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if len(samples) < 1:
        raise BoundInputError("need at least one sample")
    moved = f.apply(samples, t, rng=rng)
    return float(np.max(np.linalg.norm(moved - samples, axis=-1)))


@dataclass(frozen=True)
class AffinePolicyFamily:
    """Policies ``phi -> tanh(W phi + b)`` with ``||(W, b)|| <= K``.

    Inputs are assumed to lie in the ball of radius ``r_phi`` (the encoder
    enforces it), which makes the family ``(r_phi + 1)``-Lipschitz in the
    flattened parameters and ``K``-Lipschitz in the representation.
    """

    d_phi: int
    d_a: int
    K: float
    r_phi: float
    saturated: bool = True

    @property
    def m(self) -> int:
        return self.d_a * self.d_phi + self.d_a

    @property
    def L_pi1(self) -> float:
        return self.K

    @property
    def L_pi2(self) -> float:
        return self.r_phi + 1.0

    def unflatten(self, theta):
        theta = np.asarray(theta, dtype=float)
        nw = self.d_a * self.d_phi
        w = theta[..., :nw].reshape(*theta.shape[:-1], self.d_a, self.d_phi)
        return w, theta[..., nw:]

    def make(self, theta) -> CertifiedFunction:
        """Policy for a parameter vector, or a stacked batch for a ``(n, m)`` array."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.m:
            raise ConfigurationError(f"theta has {theta.shape[-1]} entries, family needs {self.m}")
        w, b = self.unflatten(theta)
        norms = np.linalg.norm(theta.reshape(-1, self.m), axis=-1)
        if np.any(norms > self.K * (1 + 1e-12)):
            raise ConfigurationError("theta lies outside the K-ball")
        cert = float(np.max(norms)) if theta.ndim > 1 else float(np.linalg.norm(w, 2))
        return CertifiedFunction(
            kind="affine_saturated" if self.saturated else "affine",
            weight=w, bias=b, lipschitz_cert=min(cert, self.K),
        )

    def sample_ball(self, rng, n):
        """``n`` parameter vectors uniform in the K-ball."""
        g = rng.standard_normal((n, self.m))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        r = self.K * rng.random(n) ** (1.0 / self.m)
        return g * r[:, None]

    def axis_grid(self):
        """Origin plus ``+-K`` along every parameter axis (``2m + 1`` points)."""
        eye = np.eye(self.m) * self.K
        return np.vstack([np.zeros((1, self.m)), eye, -eye])
