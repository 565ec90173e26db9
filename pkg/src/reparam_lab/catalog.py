"""Human-readable list of every implemented bound and check."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CatalogEntry:
    identifier: str
    result: str
    formula: str
    function: str


CATALOG = (
    CatalogEntry(
        "fixed_policy_shift", "fixed-policy shift error",
        "|dJ| <= L_r2 L_pi1 L_phi sum_t gamma^t E||f(s_t) - s_t||",
        "bounds.bound_fixed_policy_shift",
    ),
    CatalogEntry(
        "linear_noise", "bounded additive distractor",
        "|dJ| <= L_r2 L_pi1 L_phi eta (1 - gamma^(T+1)) / (1 - gamma)",
        "bounds.bound_linear_noise",
    ),
    CatalogEntry(
        "stochastic_distractor", "random distractor with bounded mean shift and variance",
        "|dJ| <= L_r2 L_pi1 L_phi (1 - gamma^(T+1)) / (1 - gamma) (eta + sqrt(sigma2 / delta))  w.p. 1 - delta",
        "bounds.bound_stochastic_distractor",
    ),
    CatalogEntry(
        "state_dev_init", "state gap from differing initialization",
        "||s_t - s'_t|| <= nu^t epsilon",
        "bounds.bound_state_dev_init",
    ),
    CatalogEntry(
        "state_dev_transition", "state gap from differing transition",
        "||s_t - s'_t|| <= zeta (nu^t - 1) / (nu - 1)   (zeta t at nu = 1)",
        "bounds.bound_state_dev_transition",
    ),
    CatalogEntry(
        "train_test", "fixed-policy train/test gap",
        "lambda zeta sum_t gamma^t (nu^t - 1)/(nu - 1) + lambda epsilon sum_t (gamma nu)^t"
        " + L_r2 L_pi1 varrho (1 - gamma^(T+1)) / (1 - gamma)",
        "bounds.bound_train_test",
    ),
    CatalogEntry(
        "reward_shift", "train/test gap with a different testing reward",
        "train_test + epsilon_r (1 - gamma^(T+1)) / (1 - gamma)",
        "bounds.bound_reward_shift",
    ),
    CatalogEntry(
        "generalization", "generalization gap via Rademacher complexity",
        "train_test + 2 Rad + c_conc r_max sqrt(log(1/delta) / n)",
        "bounds.bound_generalization",
    ),
    CatalogEntry(
        "final", "generalization gap with the parameter-count Rademacher bound",
        "train_test + c_rad L_J K sqrt(m / n) + c_conc r_max sqrt(log(1/delta) / n)",
        "bounds.bound_final",
    ),
    CatalogEntry(
        "return_lipschitz", "return is Lipschitz in the policy parameters",
        "|J(theta) - J(theta')| <= L_J ||theta - theta'||,"
        " L_J = sum_t gamma^t (lambda L_t2 L_pi2 (nu^t - 1)/(nu - 1) + L_r2 L_pi2)",
        "func_families.compose_constants",
    ),
    CatalogEntry(
        "rademacher", "Rademacher complexity of the return class",
        "Rad_n <= c_rad L_J K sqrt(m / n), empirical slope of log Rad vs log n near -1/2",
        "bounds.rademacher_complexity_bound",
    ),
    CatalogEntry(
        "lemma_chain", "per-step policy and reward deviation",
        "||pi(phi(f(s))) - pi(phi(s))|| <= L_pi1 ||dphi||;  |dr| <= L_r1 ||ds|| + L_r2 L_pi1 ||dphi||",
        "verify.check_lemma_chain",
    ),
    CatalogEntry(
        "gumbel_max", "Gumbel-max categorical transition",
        "argmax_j (xi_j + log p_j) ~ Categorical(p), xi_j iid standard Gumbel",
        "core_sim.gumbel_max_step",
    ),
)

DERIVED = (
    ("nu", "L_t1 + L_t2 L_pi1 L_phi"),
    ("lambda", "L_r1 + L_r2 L_pi1 L_phi"),
)


def render() -> str:
    lines = []
    for sym, expr in DERIVED:
        lines.append(f"{sym} = {expr}")
    lines.append("")
    for e in CATALOG:
        lines.append(f"{e.identifier}  [{e.result}]")
        lines.append(f"    {e.formula}")
        lines.append(f"    implemented by reparam_lab.{e.function}")
    return "\n".join(lines) + "\n"
