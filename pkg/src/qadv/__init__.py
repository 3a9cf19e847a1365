"""Adversarially robust quantum classification toolkit.

Schatten-norm-bounded white-box attacks on quantum embeddings, closed-form
and numerical worst-case perturbation solvers, information-theoretic
generalization-bound calculators, Monte Carlo estimators of generalization
errors and Rademacher-based uniform deviation bounds, and a reproduction
harness for the synthetic single-qubit experiment.
"""

__version__ = "0.1.0"

from .attack import (
    AttackResult,
    AttackSpec,
    adversarial_loss,
    bloch_brute_force,
    closed_form_p1,
    closed_form_pinf,
    numerical_inner_max,
    qubit_exact,
)
from .bounds import (
    BoundInputs,
    BoundReport,
    MismatchSpec,
    StrengthRelation,
    adv_bound_general,
    adv_bound_p1,
    adv_bound_pinf,
    banchi_bound,
    mismatch_bounds,
    renyi2_mi,
    strength_compare,
    xi,
)
from .embed import (
    DataSpec,
    Dataset,
    EmbeddingSpec,
    channel_floor_check,
    eigen_floor,
    embed,
    embed_states,
    quantized_prior,
    rot_gate,
    sample_dataset,
)
from .errors import ConvergenceError, InfeasibleBudgetError, ValidationError
from .estimate import (
    DatasetSampler,
    RademacherEstimate,
    RiskReport,
    empirical_risk,
    gen_error,
    population_risk,
    rademacher_adversarial,
    rademacher_exact_binary,
    uniform_deviation_bound,
)
from .experiment import ExperimentConfig, load_config, run_experiment
from .qmat import (
    DensityMatrix,
    EigResult,
    Povm,
    hermitian_eig,
    schatten_distance,
    schatten_norm,
    trace_inner,
    validate_density,
    validate_povm,
)
from .train import TrainConfig, TrainResult, adversarial_train, project_povm
