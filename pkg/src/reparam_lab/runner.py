"""Suite orchestration: config -> certified instance -> verifiers -> reports."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as B
from . import verify as V
from .config import ExperimentConfig, load_config, validate_config
from .core_sim import discounted_return, rollout, rollout_transposed
from .distractors import CLIP_SIGMAS, EnvPerturbation, make_distractor, perturb_mdp
from .errors import ConfigurationError
from .instances import build_instance

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_clock_s: float
    summary: dict  # bound name -> verdict, in requested order
    seeds: dict
    files: list = field(default_factory=list)
    strict: bool = False

    @property
    def any_violated(self) -> bool:
        return any(v == V.VIOLATED for v in self.summary.values())

    @property
    def any_within_margin(self) -> bool:
        return any(v == V.WITHIN_MARGIN for v in self.summary.values())

    @property
    def exit_code(self) -> int:
        if self.any_violated or (self.strict and self.any_within_margin):
            return EXIT_VIOLATION
        return EXIT_OK

    def to_dict(self):
        # wall-clock lives in run_info.json so this file stays byte-identical across reruns
        return {
            "version": self.version,
            "config": self.config,
            "summary": dict(self.summary),
            "seeds": dict(self.seeds),
            "files": list(self.files),
        }


def artifact_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0.0.0"


# --- per-run context ---------------------------------------------------------------


class _Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        c = cfg.constants
        self.inst = build_instance(
            **cfg.dims.model_dump(), gamma=cfg.gamma, horizon=cfg.horizon,
            L_t1=c.L_t1, L_t2=c.L_t2, L_pi1=c.L_pi1, L_phi=c.L_phi, L_r1=c.L_r1, L_r2=c.L_r2,
            r_max=c.r_max, K=c.K, R_phi=c.R_phi, seed=cfg.seed, noise_family=cfg.noise_family,
        )
        d = cfg.distractor
        self.f = make_distractor(d.kind, cfg.dims.d_s, eta=d.eta, sigma2=d.sigma2, seed=d.seed)
        p = cfg.perturbation
        self.pert = EnvPerturbation(p.zeta, p.epsilon, p.epsilon_r)
        self.scale = cfg.test_hooks.rhs_scale
        self.deviations = None
        self.scaling = None

    @property
    def mdp(self):
        return self.inst.mdp

    def seed_for(self, index: int) -> int:
        # independent stream per bound, reproducible from the suite seed
        ss = np.random.SeedSequence([self.cfg.seed, index])
        return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))

    def max_shift(self) -> float:
        """Deterministic bound on ``||f(s) - s||`` for the configured distractor."""
        d = self.cfg.distractor
        if d.kind == "identity":
            return 0.0
        if d.kind == "stochastic":
            return d.eta + CLIP_SIGMAS * math.sqrt(d.sigma2)
        return d.eta

    def inputs(self, constants=None, **extra) -> B.BoundInputs:
        cfg = self.cfg
        c = constants or self.inst.constants
        base = dict(
            eta=cfg.distractor.eta, sigma2=cfg.distractor.sigma2, delta=cfg.delta,
            zeta=self.pert.zeta, epsilon=self.pert.epsilon, epsilon_r=self.pert.epsilon_r,
            varrho=c.L_phi * self.max_shift(), n=cfg.n_episodes,
            m=self.inst.family.m,
        )
        base.update(extra)
        return B.BoundInputs(c, cfg.gamma, cfg.horizon, **base)


def _gap_report(ctx, bound: B.BoundValue, est, seed, **details):
    rep = V.certify(bound.scaled(ctx.scale), est, ctx.cfg.z)
    out = {"kind": "gap", **rep.to_dict(), "seed": seed}
    if details:
        out["details"] = details
    return out


def _check_report(ctx, name, bound_values, empirical_values, seed, **details):
    """Pointwise ``empirical <= bound`` over arrays broadcast against each other."""
    rhs = np.asarray(bound_values, dtype=float) * ctx.scale
    lhs = np.asarray(empirical_values, dtype=float)
    ok = V._leq(lhs, rhs)
    rhs_b, lhs_b = np.broadcast_arrays(rhs, lhs)
    pos = rhs_b > 0
    if np.any(lhs_b[~pos] > 0):
        tight = math.inf
    else:
        tight = float((lhs_b[pos] / rhs_b[pos]).max()) if pos.any() else 0.0
    out = {
        "kind": "check",
        "name": name,
        "bound": rhs.tolist() if rhs.ndim else float(rhs),
        "empirical": lhs.tolist() if lhs.ndim else float(lhs),
        "verdict": V.HOLDS if bool(np.all(ok)) else V.VIOLATED,
        "tightness": tight,
        "seed": seed,
    }
    if details:
        out["details"] = details
    return out


# --- one function per bound identifier -------------------------------------------------


def _fixed_policy_shift(ctx, seed):
    inst, cfg = ctx.inst, ctx.cfg
    est = V.estimate_fixed_policy_gap(ctx.mdp, inst.encoder, inst.policy, ctx.f, cfg.n_episodes, seed)
    inputs = ctx.inputs(state_gap_series=est.state_gap_series)
    details = {"state_gap_series": list(est.state_gap_series)}
    if cfg.distractor.kind in ("identity", "additive_fixed", "additive_timevarying"):
        details["analytic_eta_bound"] = B.bound_linear_noise(inputs).value * ctx.scale
    return _gap_report(ctx, B.bound_fixed_policy_shift(inputs), est, seed, **details)


def _linear_noise(ctx, seed):
    inst, cfg = ctx.inst, ctx.cfg
    if cfg.distractor.kind == "stochastic":
        raise ConfigurationError(
            "linear_noise needs a deterministic distractor; use stochastic_distractor",
            field_path="distractor.kind",
        )
    est = V.estimate_fixed_policy_gap(ctx.mdp, inst.encoder, inst.policy, ctx.f, cfg.n_episodes, seed)
    return _gap_report(ctx, B.bound_linear_noise(ctx.inputs()), est, seed)


def _stochastic_distractor(ctx, seed):
    inst, cfg = ctx.inst, ctx.cfg
    if cfg.distractor.kind != "stochastic":
        raise ConfigurationError(
            "stochastic_distractor needs distractor.kind = stochastic", field_path="distractor.kind"
        )
    bound = B.bound_stochastic_distractor(ctx.inputs())
    est = V.estimate_fixed_policy_gap(ctx.mdp, inst.encoder, inst.policy, ctx.f, cfg.n_episodes, seed)
    freq = V.estimate_violation_frequency(
        ctx.mdp, inst.encoder, inst.policy, ctx.f, bound.scaled(ctx.scale), cfg.n_episodes,
        seed + 1, cfg.delta,
    )
    rep = _gap_report(
        ctx, bound, est, seed,
        violation_frequency=freq.frequency,
        violations=freq.violations,
        n_trials=freq.n_trials,
        frequency_threshold=freq.threshold,
    )
    if not freq.holds:
        rep["verdict"] = V.VIOLATED
    return rep


def _state_dev(ctx, seed, which):
    inst, cfg = ctx.inst, ctx.cfg
    pert = EnvPerturbation(epsilon=ctx.pert.epsilon) if which == "init" else EnvPerturbation(zeta=ctx.pert.zeta)
    chk = V.check_state_recursion(ctx.mdp, inst.encoder, inst.policy, pert, cfg.n_episodes, seed)
    name = f"state_dev_{which}"
    rep = _check_report(ctx, name, chk.closed_form_bound, chk.max_deviation, seed)
    rec_ok = V._leq(chk.deviation, chk.recursion_bound * ctx.scale)
    rep["details"] = {
        "one_step_recursion_holds": bool(rec_ok.all()),
        "perturbation": {"epsilon": pert.epsilon, "zeta": pert.zeta},
    }
    if not rec_ok.all():
        rep["verdict"] = V.VIOLATED
    return rep


def _train_test_pair(ctx, seed, with_reward):
    inst, cfg = ctx.inst, ctx.cfg
    pert = ctx.pert if with_reward else EnvPerturbation(ctx.pert.zeta, ctx.pert.epsilon)
    test_mdp = perturb_mdp(ctx.mdp, pert, cfg.seed)
    return V.estimate_train_test_gap(ctx.mdp, test_mdp, inst.encoder, inst.policy, ctx.f,
                                     cfg.n_episodes, seed)


def _train_test(ctx, seed):
    est = _train_test_pair(ctx, seed, with_reward=False)
    return _gap_report(ctx, B.bound_train_test(ctx.inputs()), est, seed)


def _reward_shift(ctx, seed):
    est = _train_test_pair(ctx, seed, with_reward=True)
    inputs = ctx.inputs()
    return _gap_report(ctx, B.bound_reward_shift(inputs, B.bound_train_test(inputs)), est, seed)


def _generalization_gap(ctx, seed):
    """``|E_test J - (1/n) sum_i J_train(xi_i)|`` with a 4n-episode test estimate."""
    inst, cfg = ctx.inst, ctx.cfg
    n = cfg.n_episodes
    xi = ctx.mdp.sample_noise_batch(seed, n)
    j_train = discounted_return(rollout(ctx.mdp, inst.encoder, inst.policy, xi), cfg.gamma)
    test_mdp = perturb_mdp(ctx.mdp, EnvPerturbation(ctx.pert.zeta, ctx.pert.epsilon), cfg.seed)
    xi_test = ctx.mdp.sample_noise_batch(seed + 1, 4 * n)
    test = rollout_transposed(test_mdp, inst.encoder, inst.policy, xi_test, ctx.f,
                              rng=np.random.default_rng([seed, 1]))
    j_test = discounted_return(test, cfg.gamma)
    mean_train = math.fsum(j_train) / n
    mean_test = math.fsum(j_test) / j_test.size
    return V.PairedGapEstimate(
        mean_gap=abs(mean_test - mean_train),
        std_err=float(np.std(j_test, ddof=1) / math.sqrt(j_test.size)),
        n_episodes=n,
        per_episode_gaps=np.asarray(j_test) - mean_train,
        mean_train=mean_train,
        mean_test=mean_test,
    )


def _generalization(ctx, seed):
    inst, cfg = ctx.inst, ctx.cfg
    rad = V.estimate_rademacher(ctx.mdp, inst.encoder, inst.family, inst.family.axis_grid(),
                                cfg.n_episodes, cfg.rademacher.n_sigma, seed + 2)
    bound = B.bound_generalization(ctx.inputs(inst.family_constants), rad.value,
                                   cfg.big_o.concentration_constant)
    return _gap_report(ctx, bound, _generalization_gap(ctx, seed), seed, rademacher=rad.to_dict())


def _final(ctx, seed):
    inst, cfg = ctx.inst, ctx.cfg
    bound = B.bound_final(ctx.inputs(inst.family_constants), cfg.big_o.concentration_constant,
                          cfg.big_o.rademacher_constant)
    return _gap_report(ctx, bound, _generalization_gap(ctx, seed), seed)


def _return_lipschitz(ctx, seed):
    inst, cfg = ctx.inst, ctx.cfg
    chk = V.check_return_lipschitz(ctx.mdp, inst.encoder, inst.family, cfg.n_pairs, seed)
    return _check_report(ctx, "return_lipschitz", chk.L_J, chk.max_ratio, seed, n_pairs=chk.n_pairs)


def _rademacher(ctx, seed):
    inst, cfg = ctx.inst, ctx.cfg
    r = cfg.rademacher
    fit = V.rademacher_scaling(ctx.mdp, inst.encoder, inst.family, tuple(r.ns), r.n_sigma, seed,
                               r.n_noise_reps)
    ctx.scaling = fit
    L_J = B.compose_constants(inst.family_constants, cfg.gamma, cfg.horizon).L_J
    caps = [B.rademacher_complexity_bound(L_J, inst.family.K, inst.family.m, n,
                                          cfg.big_o.rademacher_constant) for n in r.ns]
    rep = _check_report(ctx, "rademacher", caps, fit.estimates, seed)
    slope_ok = abs(fit.slope - r.slope_target) <= r.slope_tolerance
    rep["details"] = {
        "ns": list(fit.ns),
        "std_errs": list(fit.std_errs),
        "slope": fit.slope,
        "slope_target": r.slope_target,
        "slope_tolerance": r.slope_tolerance,
        "slope_within_tolerance": slope_ok,
        "lower_estimate": True,
    }
    if not slope_ok:
        rep["verdict"] = V.VIOLATED
    return rep


def _deviation_series(ctx, seed):
    inst, cfg = ctx.inst, ctx.cfg
    env_pert = EnvPerturbation(ctx.pert.zeta, ctx.pert.epsilon)
    test_mdp = None if (env_pert.zeta == 0 and env_pert.epsilon == 0) else perturb_mdp(
        ctx.mdp, env_pert, cfg.seed)
    return V.estimate_deviations(ctx.mdp, inst.encoder, inst.policy, ctx.f, cfg.n_episodes, seed,
                                 test_mdp=test_mdp)


def _lemma_chain(ctx, seed):
    c = ctx.inst.constants
    dev = ctx.deviations
    pol_rhs = c.L_pi1 * dev.repr_dev
    rew_rhs = c.L_r1 * dev.state_dev + c.L_r2 * c.L_pi1 * dev.repr_dev
    lhs = np.concatenate([dev.policy_dev.ravel(), dev.reward_dev.ravel()])
    rhs = np.concatenate([pol_rhs.ravel(), rew_rhs.ravel()])
    rep = _check_report(ctx, "lemma_chain", rhs, lhs, seed)
    # keep the report small: per-step maxima instead of every episode
    rep["bound"] = None
    rep["empirical"] = None
    rep["details"] = {
        "policy_dev_max": dev.policy_dev.max(axis=0).tolist(),
        "reward_dev_max": dev.reward_dev.max(axis=0).tolist(),
        "n_episodes": int(dev.state_dev.shape[0]),
    }
    return rep


def _gumbel_max(ctx, seed):
    g = ctx.cfg.gumbel
    rows = V.check_gumbel_rows(g.n_rows, g.max_states, g.n_draws, seed, g.alpha)
    return {
        "kind": "check",
        "name": "gumbel_max",
        "verdict": V.HOLDS if all(r.holds for r in rows) else V.VIOLATED,
        "seed": seed,
        "alpha": g.alpha,
        "rows": [
            {"probs": r.probs.tolist(), "counts": r.counts.tolist(), "p_value": r.p_value}
            for r in rows
        ],
    }


RUNNERS = {
    "fixed_policy_shift": _fixed_policy_shift,
    "linear_noise": _linear_noise,
    "stochastic_distractor": _stochastic_distractor,
    "state_dev_init": lambda ctx, seed: _state_dev(ctx, seed, "init"),
    "state_dev_transition": lambda ctx, seed: _state_dev(ctx, seed, "transition"),
    "train_test": _train_test,
    "reward_shift": _reward_shift,
    "generalization": _generalization,
    "final": _final,
    "return_lipschitz": _return_lipschitz,
    "rademacher": _rademacher,
    "lemma_chain": _lemma_chain,
    "gumbel_max": _gumbel_max,
}


def execute(cfg: ExperimentConfig):
    """Run every requested check; returns ``(reports, deviations, scaling, seeds)``."""
    ctx = _Context(cfg)
    seeds = {"suite": cfg.seed, "distractor": cfg.distractor.seed}
    ctx.deviations = _deviation_series(ctx, ctx.seed_for(0))
    seeds["deviations"] = ctx.seed_for(0)
    reports = {}
    for name in cfg.bounds:
        seed = ctx.seed_for(1 + list(RUNNERS).index(name))
        seeds[name] = seed
        log.info("checking %s (seed %d)", name, seed)
        reports[name] = RUNNERS[name](ctx, seed)
        reports[name]["name"] = name
        log.info("%s: %s", name, reports[name]["verdict"])
    return reports, ctx.deviations, ctx.scaling, seeds


def run_suite(config, *, seed=None, out=None, episodes=None, strict=False) -> RunManifest:
    """Validate ``config`` (a path, mapping or :class:`ExperimentConfig`), run it and write reports."""
    from .reports import emit_reports

    if isinstance(config, ExperimentConfig):
        cfg = config
    elif isinstance(config, dict):
        cfg = validate_config(config)
    else:
        cfg = load_config(config)
    cfg = cfg.with_overrides(seed=seed, out=out, episodes=episodes)

    start = time.perf_counter()
    reports, deviations, scaling, seeds = execute(cfg)
    manifest = RunManifest(
        config=cfg.model_dump(mode="json"),
        version=artifact_version(),
        wall_clock_s=time.perf_counter() - start,
        summary={name: reports[name]["verdict"] for name in cfg.bounds},
        seeds=seeds,
        strict=strict,
    )
    emit_reports(reports, manifest, Path(cfg.output_dir), deviations=deviations, scaling=scaling)
    return manifest
