"""Joint optimization of MIMO training sequences and linear transmit precoders.

The package is organized around the pipeline of the underlying design
problem:

``channel``     correlated channel model and ordered matrix decompositions
``estimation``  LMMSE estimator, error covariance algebra, structured training
``precoder``    optimal precoder structure and effective-metric evaluators
``statcsi``     alternating water-filling solver (statistical CSI)
``estcsi``      Monte Carlo and surrogate solvers (estimated CSI)
``harness``     sweeps, validation suites, config loading
"""

from .channel import (
    ChannelRealization,
    CorrelatedChannelModel,
    complex_gaussian,
    derived_rng,
    dft_unitary,
    exponential_correlation,
    hermitian_sqrt,
    sample_channel,
    sorted_evd,
)
from .config import ConfigError, ScenarioConfig
from .estcsi import (
    McConfig,
    SigmaSpectrum,
    TrainingLengthCurve,
    mc_effective_mi,
    mc_effective_wmse,
    sigma_spectrum,
    solve_eig_approx,
    solve_uniform_training,
    uniform_training_curve,
)
from .estimation import (
    EstimationOutput,
    TrainingDesign,
    build_training,
    error_covariance,
    estimate,
    lmmse_filter,
    mse_matrix,
    training_power_mse_waterfill,
)
from .harness import (
    SweepRow,
    SweepSpec,
    UsageError,
    load_config,
    rows_to_csv,
    run_sweep,
    run_validation,
)
from .precoder import (
    EffectiveNoise,
    ObjectiveKind,
    PrecoderDesign,
    build_precoder,
    effective_channel_factor,
    effective_mi,
    effective_weighted_mse,
    equivalent_noise_scale,
    matrix_snr,
    objective_unitary,
    recover_precoder,
    transform_precoder,
)
from .statcsi import (
    DirectionParams,
    JointSolution,
    SolveStatus,
    direction_gains,
    materialize_solution,
    solve_joint_statistical,
    solve_uniform_statistical,
    waterfill_f_mi,
    waterfill_f_wmse,
    waterfill_x_mi,
    waterfill_x_wmse,
)

__version__ = "0.1.0"
