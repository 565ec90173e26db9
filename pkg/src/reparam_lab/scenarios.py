"""Bundled demo configurations for ``reparam-lab demo <name>``."""

from __future__ import annotations

import copy

from .config import ExperimentConfig, validate_config

_BASE = {
    "seed": 0,
    "dims": {"d_s": 3, "d_a": 2, "d_phi": 2, "d_xi": 3},
    "horizon": 10,
    "gamma": 0.9,
    "n_episodes": 1000,
}

SCENARIOS = {
    "fixed-policy-shift": {
        "distractor": {"kind": "additive_timevarying", "eta": 0.1, "seed": 3},
        "bounds": ["fixed_policy_shift", "lemma_chain"],
    },
    "linear-noise": {
        "distractor": {"kind": "additive_fixed", "eta": 0.1, "seed": 3},
        "bounds": ["linear_noise", "fixed_policy_shift"],
    },
    "stochastic-noise": {
        "distractor": {"kind": "stochastic", "eta": 0.05, "sigma2": 0.01, "seed": 3},
        "n_episodes": 10000,
        "bounds": ["stochastic_distractor", "fixed_policy_shift"],
    },
    "train-test": {
        "distractor": {"kind": "additive_fixed", "eta": 0.05, "seed": 3},
        "perturbation": {"zeta": 0.05, "epsilon": 0.1},
        "bounds": ["state_dev_init", "state_dev_transition", "train_test", "lemma_chain"],
    },
    "return-lipschitz": {
        "bounds": ["return_lipschitz"],
    },
    "rademacher-scaling": {
        "bounds": ["rademacher", "generalization", "final"],
    },
    "reward-shift": {
        "distractor": {"kind": "additive_fixed", "eta": 0.05, "seed": 3},
        "perturbation": {"zeta": 0.02, "epsilon": 0.05, "epsilon_r": 0.1},
        "bounds": ["train_test", "reward_shift"],
    },
    "gumbel-max": {
        "bounds": ["gumbel_max"],
    },
}


def scenario_config(name: str) -> ExperimentConfig:
    if name not in SCENARIOS:
        raise KeyError(name)
    data = copy.deepcopy(_BASE)
    data.update(copy.deepcopy(SCENARIOS[name]))
    data["output_dir"] = f"out/{name}"
    return validate_config(data)
