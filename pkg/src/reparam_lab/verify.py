"""Monte Carlo certification of the closed-form bounds.

Every gap estimator uses common random numbers: both arms of an episode are
driven by the same noise sequence, so their difference reflects only the
factor under comparison. Episodes are simulated as one batch and reduced in
episode-index order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as B
from .core_sim import discounted_return, rollout, rollout_transposed
from .distractors import EnvPerturbation, perturb_mdp
from .errors import BoundInputError
from .func_families import compose_constants

log = logging.getLogger(__name__)

DEFAULT_Z = 4.0
# relative slack for floating-point rounding in exact (zero-variance) comparisons
FLOAT_RTOL = 1e-12
# pointwise lemma checks: empirical <= bound * (1 + CHECK_RTOL) + CHECK_ATOL
CHECK_RTOL = 1e-9
CHECK_ATOL = 1e-12

HOLDS = "holds"
WITHIN_MARGIN = "holds_within_margin"
VIOLATED = "violated"


def _leq(lhs, rhs):
    return np.asarray(lhs) <= np.asarray(rhs) * (1 + CHECK_RTOL) + CHECK_ATOL


@dataclass(frozen=True, eq=False)
class PairedGapEstimate:
    mean_gap: float
    std_err: float
    n_episodes: int
    per_episode_gaps: np.ndarray  # signed J_test - J_train per episode
    mean_train: float = 0.0
    mean_test: float = 0.0
    state_gap_series: tuple = ()

    def to_dict(self):
        return {
            "mean_gap": self.mean_gap,
            "std_err": self.std_err,
            "n_episodes": self.n_episodes,
            "mean_train": self.mean_train,
            "mean_test": self.mean_test,
        }


def _paired(j_train, j_test, **extra) -> PairedGapEstimate:
    diff = np.asarray(j_test, dtype=float) - np.asarray(j_train, dtype=float)
    n = diff.size
    if n < 2:
        raise BoundInputError("need at least two episodes")
    mean_train = math.fsum(j_train) / n
    mean_test = math.fsum(j_test) / n
    return PairedGapEstimate(
        mean_gap=abs(mean_test - mean_train),
        std_err=float(np.std(diff, ddof=1) / math.sqrt(n)),
        n_episodes=n,
        per_episode_gaps=diff,
        mean_train=mean_train,
        mean_test=mean_test,
        **extra,
    )


def estimate_fixed_policy_gap(mdp, encoder, policy, f, n_episodes, seed) -> PairedGapEstimate:
    """Clean vs. distracted return on the same noise, plus ``E||f(s_t) - s_t||`` per step."""
    if n_episodes < 2:
        raise BoundInputError("n_episodes must be >= 2")
    xi = mdp.sample_noise_batch(seed, n_episodes)
    clean = rollout(mdp, encoder, policy, xi)
    rng = np.random.default_rng([seed, 1])
    dist = rollout_transposed(mdp, encoder, policy, xi, f, rng=rng)
    gaps = np.linalg.norm(dist.observations - dist.states, axis=-1).mean(axis=0)
    return _paired(
        discounted_return(clean, mdp.gamma),
        discounted_return(dist, mdp.gamma),
        state_gap_series=tuple(float(g) for g in gaps),
    )


def estimate_train_test_gap(train_mdp, test_mdp, encoder, policy, f, n_episodes, seed
                            ) -> PairedGapEstimate:
    """Clean rollout in the training MDP vs. distracted rollout in the testing MDP."""
    if n_episodes < 2:
        raise BoundInputError("n_episodes must be >= 2")
    xi = train_mdp.sample_noise_batch(seed, n_episodes)
    train = rollout(train_mdp, encoder, policy, xi)
    rng = np.random.default_rng([seed, 1])
    test = rollout_transposed(test_mdp, encoder, policy, xi, f, rng=rng)
    return _paired(discounted_return(train, train_mdp.gamma), discounted_return(test, test_mdp.gamma))


@dataclass(frozen=True, eq=False)
class DeviationSeries:
    """Per-episode, per-step deviations, each of shape ``(n_episodes, T+1)``."""

    state_dev: np.ndarray
    repr_dev: np.ndarray
    policy_dev: np.ndarray
    reward_dev: np.ndarray

    FIELDS = ("state_dev", "repr_dev", "policy_dev", "reward_dev")

    def mean(self, name):
        return getattr(self, name).mean(axis=0)

    def std(self, name):
        arr = getattr(self, name)
        return arr.std(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(arr.shape[1])

    def rows(self):
        """``(episode, t, state_dev, repr_dev, policy_dev, reward_dev)`` in episode order."""
        n, T1 = self.state_dev.shape
        for i in range(n):
            for t in range(T1):
                yield (i, t, *(float(getattr(self, k)[i, t]) for k in self.FIELDS))

    def summary_rows(self):
        for t in range(self.state_dev.shape[1]):
            row = [t]
            for k in self.FIELDS:
                row += [float(self.mean(k)[t]), float(self.std(k)[t])]
            yield tuple(row)


def estimate_deviations(mdp, encoder, policy, f, n_episodes, seed, test_mdp=None) -> DeviationSeries:
    """Representation, policy, state and reward deviations along clean trajectories.

    Without ``test_mdp`` the distractor is applied to the clean trajectory's own
    states (``state_dev`` is zero). With ``test_mdp`` the comparison is between
    the training state ``s_t`` and the testing state ``s'_t`` seen through the
    distractor: ``repr_dev = ||phi(f(s'_t)) - phi(s_t)||``. Rewards on both
    sides use the training reward function.
    """
    if n_episodes < 1:
        raise BoundInputError("n_episodes must be >= 1")
    xi = mdp.sample_noise_batch(seed, n_episodes)
    clean = rollout(mdp, encoder, policy, xi)
    other = clean if test_mdp is None else rollout(test_mdp, encoder, policy, xi)
    rng = np.random.default_rng([seed, 1])
    s, s2 = clean.states, other.states
    obs = np.stack([f.apply(s2[:, t], t, rng=rng) for t in range(s.shape[1])], axis=1)
    phi, phi_f = encoder(s), encoder(obs)
    a, a_f = policy(phi), policy(phi_f)
    return DeviationSeries(
        state_dev=np.linalg.norm(s2 - s, axis=-1),
        repr_dev=np.linalg.norm(phi_f - phi, axis=-1),
        policy_dev=np.linalg.norm(a_f - a, axis=-1),
        reward_dev=np.abs(mdp.reward(s2, a_f) - mdp.reward(s, a)),
    )


@dataclass(frozen=True, eq=False)
class LemmaChainCheck:
    policy_ok: np.ndarray
    reward_ok: np.ndarray

    @property
    def holds(self) -> bool:
        return bool(self.policy_ok.all() and self.reward_ok.all())


def check_lemma_chain(dev: DeviationSeries, constants) -> LemmaChainCheck:
    """Pointwise policy-deviation and reward-deviation inequalities."""
    c = constants
    return LemmaChainCheck(
        policy_ok=_leq(dev.policy_dev, c.L_pi1 * dev.repr_dev),
        reward_ok=_leq(dev.reward_dev, c.L_r1 * dev.state_dev + c.L_r2 * c.L_pi1 * dev.repr_dev),
    )


@dataclass(frozen=True, eq=False)
class StateRecursionCheck:
    deviation: np.ndarray  # (n, T+1) empirical ||s_t - s'_t||
    recursion_bound: np.ndarray  # (n, T+1) one-step bound from the previous step
    closed_form_bound: np.ndarray  # (T+1,)
    recursion_ok: np.ndarray  # (T+1,) all episodes satisfy the one-step bound
    closed_form_ok: np.ndarray  # (T+1,)

    @property
    def holds(self) -> bool:
        return bool(self.recursion_ok.all() and self.closed_form_ok.all())

    @property
    def max_deviation(self) -> np.ndarray:
        return self.deviation.max(axis=0)


def check_state_recursion(mdp, encoder, policy, pert: EnvPerturbation, n_episodes, seed,
                          constants=None) -> StateRecursionCheck:
    """Compare train/test state gaps with the one-step and closed-form lemmas.

    ``pert`` may set the initialization gap or the transition gap, not both.
    """
    if pert.epsilon > 0 and pert.zeta > 0:
        raise BoundInputError("perturbation must be epsilon-only or zeta-only")
    c = constants or mdp.constants
    test_mdp = perturb_mdp(mdp, EnvPerturbation(zeta=pert.zeta, epsilon=pert.epsilon), seed)
    xi = mdp.sample_noise_batch(seed, n_episodes)
    s = rollout(mdp, encoder, policy, xi).states
    s2 = rollout(test_mdp, encoder, policy, xi).states
    dev = np.linalg.norm(s - s2, axis=-1)
    repr_gap = np.linalg.norm(encoder(s) - encoder(s2), axis=-1)
    T1 = dev.shape[1]
    rec = np.empty_like(dev)
    rec[:, 0] = pert.epsilon
    rec[:, 1:] = c.L_t1 * dev[:, :-1] + c.L_t2 * c.L_pi1 * repr_gap[:, :-1] + pert.zeta
    nu = compose_constants(c, mdp.gamma, mdp.horizon).nu
    if pert.zeta > 0:
        closed = np.array([B.bound_state_dev_transition(pert.zeta, nu, t) for t in range(T1)])
    else:
        closed = np.array([B.bound_state_dev_init(pert.epsilon, nu, t) for t in range(T1)])
    return StateRecursionCheck(
        deviation=dev,
        recursion_bound=rec,
        closed_form_bound=closed,
        recursion_ok=_leq(dev, rec).all(axis=0),
        closed_form_ok=_leq(dev, closed[None, :]).all(axis=0),
    )


@dataclass(frozen=True, eq=False)
class ReturnLipschitzCheck:
    max_ratio: float
    L_J: float
    n_pairs: int
    ratios: np.ndarray = field(repr=False)

    @property
    def holds(self) -> bool:
        return bool(self.max_ratio <= self.L_J * (1 + CHECK_RTOL) + CHECK_ATOL)


def _returns_for_params(mdp, encoder, family, thetas, xi):
    policy = family.make(thetas)
    return discounted_return(rollout(mdp, encoder, policy, xi), mdp.gamma)


def check_return_lipschitz(mdp, encoder, family, n_pairs, seed, constants=None) -> ReturnLipschitzCheck:
    """Max of ``|J(theta) - J(theta')| / ||theta - theta'||`` over random pairs in the K-ball.

    Each pair shares one noise sequence. ``L_J`` uses constants valid over the
    whole family (``L_pi1 = K``, ``L_pi2 = R_phi + 1``).
    """
    if n_pairs < 1:
        raise BoundInputError("n_pairs must be >= 1")
    c = (constants or mdp.constants).replace(L_pi1=family.L_pi1, L_pi2=family.L_pi2, K=family.K)
    L_J = compose_constants(c, mdp.gamma, mdp.horizon).L_J
    rng = np.random.default_rng([seed, 2])
    th1 = family.sample_ball(rng, n_pairs)
    th2 = family.sample_ball(rng, n_pairs)
    xi = mdp.sample_noise_batch(seed, n_pairs)
    j1 = _returns_for_params(mdp, encoder, family, th1, xi)
    j2 = _returns_for_params(mdp, encoder, family, th2, xi)
    dist = np.linalg.norm(th1 - th2, axis=-1)
    gap = np.abs(j1 - j2)
    ratios = np.where(dist > 0, gap / np.where(dist > 0, dist, 1.0), 0.0)
    return ReturnLipschitzCheck(float(ratios.max()), L_J, n_pairs, ratios)


@dataclass(frozen=True)
class RademacherEstimate:
    value: float
    std_err: float
    n_episodes: int
    n_sigma_draws: int
    n_policy_grid: int
    n_noise_reps: int = 1
    lower_estimate: bool = True

    def to_dict(self):
        return {
            "value": self.value, "std_err": self.std_err, "n_episodes": self.n_episodes,
            "n_sigma_draws": self.n_sigma_draws, "n_policy_grid": self.n_policy_grid,
            "n_noise_reps": self.n_noise_reps, "lower_estimate": self.lower_estimate,
        }


def estimate_rademacher(mdp, encoder, family, policy_grid, n_episodes, n_sigma, seed,
                        n_noise_reps=1) -> RademacherEstimate:
    """Empirical Rademacher complexity of the returns over a finite policy grid.

    ``E_xi E_sigma [max_j (1/n) sum_i sigma_i J(theta_j; xi_i)]``; the maximum
    over a finite grid makes this a lower estimate of the supremum over the
    continuous parameter ball.
    """
    grid = np.atleast_2d(np.asarray(policy_grid, dtype=float))
    if grid.size == 0 or grid.shape[0] == 0:
        raise BoundInputError("policy grid is empty")
    if n_sigma < 1 or n_episodes < 1:
        raise BoundInputError("n_sigma and n_episodes must be >= 1")
    sups = []
    for rep in range(n_noise_reps):
        xi = mdp.sample_noise_batch(int(np.random.default_rng([seed, rep]).integers(2**63)), n_episodes)
        J = np.stack([_returns_for_params(mdp, encoder, family, th, xi) for th in grid])
        rng = np.random.default_rng([seed, rep, 3])
        sigma = rng.integers(0, 2, size=(n_sigma, n_episodes)) * 2.0 - 1.0
        sups.append((sigma @ J.T / n_episodes).max(axis=1))
    sups = np.concatenate(sups)
    return RademacherEstimate(
        value=float(sups.mean()),
        std_err=float(sups.std(ddof=1) / math.sqrt(sups.size)) if sups.size > 1 else 0.0,
        n_episodes=n_episodes,
        n_sigma_draws=n_sigma,
        n_policy_grid=grid.shape[0],
        n_noise_reps=n_noise_reps,
    )


@dataclass(frozen=True)
class ScalingFit:
    ns: tuple
    estimates: tuple
    std_errs: tuple
    slope: float
    intercept: float


def rademacher_scaling(mdp, encoder, family, ns=(16, 64, 256, 1024), n_sigma=2000, seed=0,
                       n_noise_reps=8) -> ScalingFit:
    """Estimates at several episode budgets and the log-log regression slope."""
    grid = family.axis_grid()
    ests = [estimate_rademacher(mdp, encoder, family, grid, n, n_sigma, seed + i, n_noise_reps)
            for i, n in enumerate(ns)]
    vals = np.array([e.value for e in ests])
    if np.any(vals <= 0):
        raise BoundInputError("nonpositive Rademacher estimate; cannot fit a log-log slope")
    slope, intercept = np.polyfit(np.log(ns), np.log(vals), 1)
    return ScalingFit(tuple(ns), tuple(vals.tolist()), tuple(e.std_err for e in ests),
                      float(slope), float(intercept))


@dataclass(frozen=True)
class BoundReport:
    bound: B.BoundValue
    empirical: PairedGapEstimate
    margin: float
    z: float
    verdict: str
    tightness: float

    def to_dict(self):
        return {
            "bound": self.bound.to_dict(),
            "empirical": self.empirical.to_dict(),
            "margin": self.margin,
            "z": self.z,
            "verdict": self.verdict,
            "tightness": self.tightness,
        }


def certify(bound: B.BoundValue, empirical: PairedGapEstimate, z: float = DEFAULT_Z) -> BoundReport:
    """Compare the Monte Carlo gap with the bound.

    The margin is ``z`` standard errors plus a ``1e-12`` relative allowance for
    floating-point rounding, so exactly tight cases are not reported violated.
    """
    if z < 0:
        raise BoundInputError("z must be >= 0")
    gap, rhs = empirical.mean_gap, bound.value
    margin = z * empirical.std_err + FLOAT_RTOL * max(1.0, abs(rhs), abs(gap))
    if gap <= rhs:
        verdict = HOLDS
    elif gap - margin <= rhs:
        verdict = WITHIN_MARGIN
    else:
        verdict = VIOLATED
    if rhs == 0:
        tightness = 0.0 if gap == 0 else math.inf
    else:
        tightness = gap / rhs
    return BoundReport(bound, empirical, margin, z, verdict, tightness)


@dataclass(frozen=True)
class ViolationFrequency:
    frequency: float
    violations: int
    n_trials: int
    delta: float
    bound_value: float

    @property
    def threshold(self) -> float:
        """``delta`` plus three binomial standard deviations."""
        return self.delta + 3.0 * math.sqrt(self.delta * (1 - self.delta) / self.n_trials)

    @property
    def holds(self) -> bool:
        return self.frequency <= self.threshold


def estimate_violation_frequency(mdp, encoder, policy, f, bound: B.BoundValue, n_trials, seed,
                                 delta) -> ViolationFrequency:
    """Fraction of independent episodes whose realized ``|Delta J|`` exceeds ``bound``.

    Each trial is one episode with fresh environment noise and fresh
    distractor draws.
    """
    est = estimate_fixed_policy_gap(mdp, encoder, policy, f, n_trials, seed)
    viol = int(np.count_nonzero(np.abs(est.per_episode_gaps) > bound.value))
    return ViolationFrequency(viol / n_trials, viol, n_trials, delta, bound.value)


def soundness_sweep(n_instances=100, n_episodes=1000, z=DEFAULT_Z, seed=0, rhs_scale=1.0):
    """Fixed-policy and linear-noise reports on random certified instances.

    Distractors alternate between fixed and time-varying additive shifts.
    Yields ``(instance, reports)`` pairs.
    """
    from .distractors import TransposeFunction
    from .instances import random_instance

    for k in range(n_instances):
        inst = random_instance(seed * 100_003 + k)
        rng = np.random.default_rng([seed, k, 5])
        eta = float(rng.uniform(0.01, 0.5))
        kind = "additive_fixed" if k % 2 == 0 else "additive_timevarying"
        f = TransposeFunction(kind, inst.mdp.d_s, eta=eta, seed=int(rng.integers(2**31)))
        est = estimate_fixed_policy_gap(inst.mdp, inst.encoder, inst.policy, f, n_episodes, k)
        inputs = B.BoundInputs(
            inst.constants, inst.mdp.gamma, inst.mdp.horizon, eta=eta,
            state_gap_series=est.state_gap_series,
        )
        reports = [
            certify(B.bound_fixed_policy_shift(inputs).scaled(rhs_scale), est, z),
            certify(B.bound_linear_noise(inputs).scaled(rhs_scale), est, z),
        ]
        yield inst, reports


@dataclass(frozen=True, eq=False)
class GumbelRowCheck:
    probs: np.ndarray
    counts: np.ndarray
    p_value: float
    alpha: float

    @property
    def holds(self) -> bool:
        # zero-probability states must never be drawn
        return bool(self.p_value > self.alpha and not np.any(self.counts[self.probs == 0]))


def check_gumbel_rows(n_rows=10, max_states=8, n_draws=100_000, seed=0, alpha=1e-3):
    """Chi-square goodness of fit of Gumbel-max draws against random categorical rows.

    Every third row gets one zero-probability state, which is excluded from the
    chi-square statistic and must receive zero draws.
    """
    from scipy.stats import chisquare

    from .core_sim import gumbel_argmax

    rng = np.random.default_rng([seed, 8])
    out = []
    for k in range(n_rows):
        S = int(rng.integers(2, max_states + 1))
        p = rng.dirichlet(np.ones(S))
        if k % 3 == 2 and S > 2:
            p[rng.integers(S)] = 0.0
            p /= p.sum()
        xi = rng.gumbel(size=(n_draws, S))
        counts = np.bincount(gumbel_argmax(p, xi), minlength=S)
        live = p > 0
        res = chisquare(counts[live], n_draws * p[live])
        out.append(GumbelRowCheck(p, counts, float(res.pvalue), alpha))
    return out
