"""Simulation and Monte Carlo certification of generalization-gap bounds for
reparameterized reinforcement learning on Lipschitz-certified synthetic MDPs."""

from .bounds import (
    BoundInputs,
    BoundValue,
    bound_final,
    bound_fixed_policy_shift,
    bound_generalization,
    bound_linear_noise,
    bound_reward_shift,
    bound_state_dev_init,
    bound_state_dev_transition,
    bound_stochastic_distractor,
    bound_train_test,
    geom_sum,
    ratio_sum,
)
from .config import ExperimentConfig, load_config
from .core_sim import (
    DiscreteMDP,
    NoiseSequence,
    ReparamMDP,
    Trajectory,
    discounted_return,
    gumbel_max_step,
    rollout,
    rollout_transposed,
    sample_noise,
)
from .distractors import EnvPerturbation, TransposeFunction, perturb_mdp
from .errors import (
    BoundInputError,
    ConfigurationError,
    DistractorError,
    InsufficientDiversityError,
    InvalidModelError,
    NumericalDivergenceError,
    ReparamLabError,
)
from .func_families import (
    CertifiedFunction,
    ConstantSet,
    DerivedConstants,
    certify_spectral_norm,
    compose_constants,
    empirical_max_slope,
    make_affine_with_norm,
    max_state_gap,
)
from .runner import RunManifest, run_suite
from .verify import BoundReport, PairedGapEstimate, certify

__version__ = "0.1.0"
