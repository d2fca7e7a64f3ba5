"""Hold-out-free hyperparameter calibration for linear regression.

Calibrates regularization parameters by comparing how well a model fits the
true labels against how well it fits label-permuted copies of the same data,
so no validation split is needed.
"""

from .baselines import (
    BaselineFamily,
    CvConfig,
    cv_grid_search,
    default_lambda_grid,
    elastic_net_cd,
    lasso_cd,
)
from .core import (
    Dataset,
    PermutationSet,
    Standardizer,
    apply_permutation,
    norm_n,
    sample_permutations,
    standardize,
)
from .criterion import (
    CriterionContext,
    CriterionEval,
    CriterionGradient,
    Family,
    finite_difference_gradient,
    grid_select,
    mlr_gradient,
    mlr_value,
    mlr_value_and_grad,
)
from .datagen import (
    ScenarioSpec,
    SyntheticInstance,
    generate,
    load_csv,
    load_instance,
    save_instance,
)
from .estimators import (
    GateVector,
    HyperParams,
    aggregated_estimator,
    gate,
    predict,
    ridge,
    sparse_estimator,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    run_benchmark,
    run_curve,
    run_permutation_sweep,
)
from .metrics import (
    SupportEstimate,
    estimate_support,
    l2_error,
    mann_whitney_u,
    r2_score,
    rescale_curve,
    support_accuracy,
)
from .optimizer import (
    AdamConfig,
    FitResult,
    adam_minimize,
    fit_a_mlr,
    fit_r_mlr,
    fit_s_mlr,
)

__version__ = "0.1.0"
