"""Lambda-weighted listwise preference optimization at desk scale.

The package turns multi-dimensional candidate ratings into listwise target
distributions, blends them with weight vectors from the probability simplex,
trains exactly-representable toy policies against the blended cross-entropy
objective with its analytic gradient, and schedules weight vectors from a
fitted polynomial performance surface. Plotting and CLI layers live in
`ldpo.report` and `ldpo.cli`.
"""

__version__ = "0.1.0"

from . import dataset, errors, losses, numerics, policy, scheduler, simplex, trainer
from .dataset import (
    DEFAULT_DIMENSIONS,
    Candidate,
    PreferenceTargets,
    PromptGroup,
    load_jsonl,
    mix_targets,
    pairwise_target,
    ratings_to_targets,
)
from .errors import LdpoError
from .losses import (
    GradientVector,
    LossValue,
    bt_prob,
    finite_diff_grad,
    lambda_dpo_grad,
    lambda_dpo_loss,
    listwise_grad,
    listwise_loss,
    pairwise_dpo_loss,
)
from .policy import (
    LogLinearPolicy,
    ReferencePolicy,
    TabularPolicy,
    grad_logprob,
    listwise_distribution,
    load_checkpoint,
    logprob,
    save_checkpoint,
)
from .scheduler import (
    Observation,
    PerfModel,
    PolyFeatureMap,
    SchedulerDist,
    build_candidates,
    fit,
    make_distribution,
    poly_features,
    predict,
)
from .simplex import (
    DirichletParams,
    SimplexVector,
    grid,
    one_hot,
    sample_dirichlet,
    sample_uniform,
    uniform_weights,
    validate,
)
from .trainer import TrainConfig, TrainReport, evaluate, kendall_tau, train
