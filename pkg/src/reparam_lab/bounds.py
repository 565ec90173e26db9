"""Closed-form right-hand sides of the generalization-gap bounds.

Every composite bound is returned as a :class:`BoundValue` whose ``terms``
add up to ``value``. Sums over the horizon use :func:`math.fsum` so long
horizons with ``gamma`` close to one keep full precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import BoundInputError
from .func_families import ConstantSet, DerivedConstants, compose_constants, growth

DEFAULT_CONCENTRATION_CONSTANT = 3.0
DEFAULT_RADEMACHER_CONSTANT = 2.0


@dataclass(frozen=True)
class BoundInputs:
    constants: ConstantSet
    gamma: float
    T: int
    eta: float = 0.0
    sigma2: float = 0.0
    delta: float = 0.1
    zeta: float = 0.0
    epsilon: float = 0.0
    epsilon_r: float = 0.0
    varrho: float = 0.0
    n: int = 1
    m: int = 1
    state_gap_series: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise BoundInputError("gamma must lie in [0, 1)")
        if self.T < 0:
            raise BoundInputError("T must be >= 0")
        if not 0.0 < self.delta < 1.0:
            raise BoundInputError("delta must lie in (0, 1)")
        if self.n < 1 or self.m < 1:
            raise BoundInputError("n and m must be >= 1")
        for name in ("eta", "sigma2", "zeta", "epsilon", "epsilon_r", "varrho"):
            if getattr(self, name) < 0:
                raise BoundInputError(f"{name} must be nonnegative")
        if any(g < 0 for g in self.state_gap_series):
            raise BoundInputError("state gaps must be nonnegative")

    @property
    def derived(self) -> DerivedConstants:
        return compose_constants(self.constants, self.gamma, self.T)

    @property
    def K(self) -> float:
        return self.constants.K

    def replace(self, **changes) -> "BoundInputs":
        return replace(self, **changes)


@dataclass(frozen=True)
class BoundValue:
    name: str
    value: float
    terms: dict = field(default_factory=dict)
    big_o_constants: dict = field(default_factory=dict)

    def scaled(self, factor: float) -> "BoundValue":
        return BoundValue(
            self.name, self.value * factor,
            {k: v * factor for k, v in self.terms.items()}, dict(self.big_o_constants),
        )

    def to_dict(self):
        return {
            "name": self.name,
            "value": self.value,
            "terms": dict(self.terms),
            "big_o_constants": dict(self.big_o_constants),
        }


def _bound(name, terms, **big_o):
    return BoundValue(name, math.fsum(terms.values()), dict(terms), big_o)


def geom_sum(gamma: float, T: int) -> float:
    """``sum_{t=0}^T gamma**t = (1 - gamma**(T+1)) / (1 - gamma)``."""
    if not 0.0 <= gamma < 1.0:
        raise BoundInputError("gamma must lie in [0, 1)")
    if T < 0:
        return 0.0
    if gamma == 0.0:
        return 1.0
    return -math.expm1((T + 1) * math.log(gamma)) / (1.0 - gamma)


def ratio_sum(gamma: float, nu: float, T: int) -> float:
    """``sum_t gamma**t (nu**t - 1)/(nu - 1)``, using ``t`` for the ratio when ``nu ~ 1``."""
    if nu < 0:
        raise BoundInputError("nu must be nonnegative")
    return math.fsum(gamma**t * growth(nu, t) for t in range(T + 1))


def discounted_power_sum(gamma: float, nu: float, T: int) -> float:
    """``sum_t (gamma * nu)**t``."""
    return math.fsum((gamma * nu) ** t for t in range(T + 1))


def _shift_coeff(c: ConstantSet) -> float:
    return c.L_r2 * c.L_pi1 * c.L_phi


def bound_fixed_policy_shift(inputs: BoundInputs) -> BoundValue:
    """``L_r2 L_pi1 L_phi sum_t gamma**t E||f(s_t) - s_t||``."""
    gaps = inputs.state_gap_series
    if len(gaps) != inputs.T + 1:
        raise BoundInputError(f"state_gap_series has {len(gaps)} entries, need T+1 = {inputs.T + 1}")
    k = _shift_coeff(inputs.constants)
    value = k * math.fsum(inputs.gamma**t * g for t, g in enumerate(gaps))
    return BoundValue("fixed_policy_shift", value, {"shift_term": value})


def bound_linear_noise(inputs: BoundInputs) -> BoundValue:
    """``L_r2 L_pi1 L_phi eta sum_t gamma**t`` for shifts bounded by ``eta``."""
    # same expression as the fixed-policy bound with a constant series, so the two agree bitwise
    k = _shift_coeff(inputs.constants)
    value = k * math.fsum(inputs.gamma**t * inputs.eta for t in range(inputs.T + 1))
    return BoundValue("linear_noise", value, {"shift_term": value})


def bound_stochastic_distractor(inputs: BoundInputs) -> BoundValue:
    """Chebyshev-style bound for a random transpose function, holding w.p. ``1 - delta``."""
    if not 0.0 < inputs.delta < 1.0:
        raise BoundInputError("delta must lie in (0, 1)")
    base = _shift_coeff(inputs.constants) * geom_sum(inputs.gamma, inputs.T)
    return _bound(
        "stochastic_distractor",
        {
            "mean_shift_term": base * inputs.eta,
            "deviation_term": base * math.sqrt(inputs.sigma2 / inputs.delta),
        },
    )


def bound_state_dev_init(epsilon: float, nu: float, t: int) -> float:
    """``nu**t * epsilon``: state gap after ``t`` steps from initial gap ``epsilon``."""
    if t < 0:
        raise BoundInputError("t must be >= 0")
    return epsilon if t == 0 else nu**t * epsilon


def bound_state_dev_transition(zeta: float, nu: float, t: int) -> float:
    """``zeta (nu**t - 1)/(nu - 1)``: state gap from per-step transition gap ``zeta``."""
    if t < 0:
        raise BoundInputError("t must be >= 0")
    return zeta * growth(nu, t)


def bound_train_test(inputs: BoundInputs) -> BoundValue:
    c, g, T = inputs.constants, inputs.gamma, inputs.T
    d = inputs.derived
    return _bound(
        "train_test",
        {
            "transition_term": d.lam * inputs.zeta * ratio_sum(g, d.nu, T),
            "init_term": d.lam * inputs.epsilon * discounted_power_sum(g, d.nu, T),
            "repr_term": c.L_r2 * c.L_pi1 * inputs.varrho * geom_sum(g, T),
        },
    )


def concentration_term(inputs: BoundInputs, concentration_constant: float) -> float:
    return concentration_constant * inputs.constants.r_max * math.sqrt(
        math.log(1.0 / inputs.delta) / inputs.n
    )


def bound_generalization(inputs: BoundInputs, rademacher_value: float,
                         concentration_constant: float = DEFAULT_CONCENTRATION_CONSTANT) -> BoundValue:
    if rademacher_value < 0:
        raise BoundInputError("rademacher_value must be nonnegative")
    terms = dict(bound_train_test(inputs).terms)
    terms["rademacher_term"] = 2.0 * rademacher_value
    terms["concentration_term"] = concentration_term(inputs, concentration_constant)
    return _bound("generalization", terms, concentration_constant=concentration_constant)


def rademacher_complexity_bound(L_J: float, K: float, m: int, n: int,
                                rademacher_constant: float = DEFAULT_RADEMACHER_CONSTANT) -> float:
    return rademacher_constant * L_J * K * math.sqrt(m / n)


def bound_final(inputs: BoundInputs,
                concentration_constant: float = DEFAULT_CONCENTRATION_CONSTANT,
                rademacher_constant: float = DEFAULT_RADEMACHER_CONSTANT) -> BoundValue:
    terms = dict(bound_train_test(inputs).terms)
    terms["rademacher_term"] = rademacher_complexity_bound(
        inputs.derived.L_J, inputs.K, inputs.m, inputs.n, rademacher_constant
    )
    terms["concentration_term"] = concentration_term(inputs, concentration_constant)
    return _bound(
        "final", terms,
        concentration_constant=concentration_constant,
        rademacher_constant=rademacher_constant,
    )


def bound_reward_shift(inputs: BoundInputs, base: BoundValue) -> BoundValue:
    """Adds ``epsilon_r * sum_t gamma**t`` for a testing reward within ``epsilon_r`` of the training one."""
    if inputs.epsilon_r < 0:
        raise BoundInputError("epsilon_r must be nonnegative")
    terms = dict(base.terms)
    terms["reward_term"] = geom_sum(inputs.gamma, inputs.T) * inputs.epsilon_r
    return _bound("reward_shift", terms, **base.big_o_constants)


def return_bound(constants: ConstantSet, gamma: float, T: int) -> float:
    """``r_max (1 - gamma**(T+1)) / (1 - gamma)``: largest possible |return|."""
    return constants.r_max * geom_sum(gamma, T)
