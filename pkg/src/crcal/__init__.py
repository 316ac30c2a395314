"""Kernel-spectrum batch active learning with instrumented trainers.

Networks are fully-connected ReLU nets in the 1/sqrt(fan_in) scaling;
the empirical kernel is the Jacobian Gram matrix; acquisition picks
sample groups whose bordered kernel keeps the smallest positive
eigenvalue large; trainers record per-step quantities tied to the
kernel's spectrum so the convergence recursion can be checked exactly.
"""

from .errors import (
    CadenceError,
    ConfigError,
    CrcalError,
    DataError,
    EigenError,
    RunError,
)
from .nets import (
    Jacobian,
    NetworkSpec,
    ParamVector,
    accuracy,
    finite_diff_jacobian,
    forward,
    forward_batch,
    grad_mse,
    init_network,
    jacobian,
    jacobian_batch,
    mse_loss,
    one_hot,
    predict_classes,
    softmax,
    vjp_batch,
)
from .eigen import symmetric_eigh, symmetric_eigvals
from .ntk import (
    DEFAULT_POSITIVITY_THRESHOLD,
    GramMatrix,
    Spectrum,
    eigen_spectrum,
    empirical_ntk,
    gram_values,
    min_positive_eigenvalue,
    spectrum_to_csv,
)
from .pool import Pool
from .acquisition import (
    AcquisitionResult,
    GroupScore,
    confidence_acquire,
    crc_acquire,
    crc_acquire_balanced,
    egl_acquire,
    entropy_acquire,
    random_acquire,
)
from .training import (
    TrainConfig,
    TrainingTrace,
    compute_xi,
    epochs_to_convergence,
    evaluate_model,
    gd_step,
    train_mean_teacher,
    train_pi_model,
    train_supervised,
    verify_recursion,
)
from .data import (
    generate_blobs,
    generate_moons,
    initial_pool,
    initial_pool_from_indices,
    load_csv_dataset,
    moons_arc_distance,
    save_csv_dataset,
)
from .harness import (
    ExperimentConfig,
    RunRecord,
    boundary_to_csv,
    config_hash,
    decision_boundary_grid,
    emit_report,
    load_checkpoint,
    load_config,
    load_records,
    parse_config,
    report_to_csv,
    run_assl,
    run_experiment,
    save_checkpoint,
)
from .diagnostics import (
    KernelFlow,
    curvature_proxy,
    eig_concentration_report,
    eig_report_to_csv,
    first_order_gap,
    horizon_correlation,
    kernel_flow_solution,
    last_vs_full_study,
    last_vs_full_to_csv,
    linearization_gap,
    loglinear_fit,
    make_kernel_flow,
    score_vs_horizon,
    verify_suite,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionResult",
    "CadenceError",
    "ConfigError",
    "CrcalError",
    "DEFAULT_POSITIVITY_THRESHOLD",
    "DataError",
    "EigenError",
    "ExperimentConfig",
    "GramMatrix",
    "GroupScore",
    "Jacobian",
    "KernelFlow",
    "NetworkSpec",
    "ParamVector",
    "Pool",
    "RunError",
    "RunRecord",
    "Spectrum",
    "TrainConfig",
    "TrainingTrace",
    "accuracy",
    "boundary_to_csv",
    "compute_xi",
    "confidence_acquire",
    "config_hash",
    "crc_acquire",
    "crc_acquire_balanced",
    "curvature_proxy",
    "decision_boundary_grid",
    "egl_acquire",
    "eig_concentration_report",
    "eig_report_to_csv",
    "eigen_spectrum",
    "emit_report",
    "empirical_ntk",
    "entropy_acquire",
    "epochs_to_convergence",
    "evaluate_model",
    "finite_diff_jacobian",
    "first_order_gap",
    "forward",
    "forward_batch",
    "gd_step",
    "generate_blobs",
    "generate_moons",
    "grad_mse",
    "gram_values",
    "horizon_correlation",
    "init_network",
    "initial_pool",
    "initial_pool_from_indices",
    "jacobian",
    "jacobian_batch",
    "kernel_flow_solution",
    "last_vs_full_study",
    "last_vs_full_to_csv",
    "linearization_gap",
    "load_checkpoint",
    "load_config",
    "load_csv_dataset",
    "load_records",
    "loglinear_fit",
    "make_kernel_flow",
    "min_positive_eigenvalue",
    "moons_arc_distance",
    "mse_loss",
    "one_hot",
    "parse_config",
    "predict_classes",
    "random_acquire",
    "report_to_csv",
    "run_assl",
    "run_experiment",
    "save_checkpoint",
    "save_csv_dataset",
    "score_vs_horizon",
    "softmax",
    "spectrum_to_csv",
    "symmetric_eigh",
    "symmetric_eigvals",
    "train_mean_teacher",
    "train_pi_model",
    "train_supervised",
    "verify_recursion",
    "verify_suite",
    "vjp_batch",
]
