"""Online learning with adversarial long-term constraints."""

from .comparator import (
    ComparatorResult,
    HindsightAccumulator,
    HindsightProblem,
    audit_feasibility,
    bandit_problem,
    best_feasible,
    on_average_value_closed_form,
)
from .core import (
    Box,
    EntropyMap,
    EuclideanMap,
    InputError,
    InvariantViolation,
    MirrorMap,
    OcpBounds,
    Simplex,
    SimplexVector,
    bregman_divergence,
    bregman_project,
    project_simplex,
)
from .environments import (
    DriftBanditEnvironment,
    EnvSpec,
    IidBanditEnvironment,
    LinearOcpEnvironment,
    Prop1Adversary,
    Prop1AdversaryState,
    make_policy_table,
    prop1_next,
)
from .exp4pr import EXP4PR, confidence_bonus, exp4pr_update, theorem3_params
from .exp4r import EXP4R, BanditFeedback, BanditRound, PolicyTable, exp4r_round, exp4r_update, theorem2_params
from .harness import ConfigError, RunConfig, RunTrace, aggregate, fit_rate, load_config, report, run
from .ocp import (
    ConstrainedOMD,
    ConstrainedRound,
    LinearRound,
    PrimalDualState,
    composite_loss,
    dual_grad,
    entropy_mw_step,
    omd_step,
    primal_grad,
    theorem1_params,
)

__version__ = "0.1.0"
