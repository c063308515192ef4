"""Sampling laboratory for quantifying collapse errors of deterministic
diffusion samplers on synthetic distributions with known scores."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Dataset,
    DatasetSpec,
    T_MIN_DEFAULT,
    gen_dataset,
    load_dataset_csv,
    rng_stream,
    save_dataset_csv,
    time_grid,
)
from .errors import (  # noqa: F401
    CheckpointError,
    CollapseLabError,
    ConfigError,
    DegenerateTailError,
    ParameterError,
    SingularityError,
    StageError,
)
from .mog import (  # noqa: F401
    MogSpec,
    mog_logpdf,
    mog_marginal_cdf,
    mog_marginal_pdf,
    mog_score,
    mog_spec_for,
    mog_velocity,
    ring,
    sample_mog,
    symmetric_pair,
)
from .samplers import (  # noqa: F401
    ModelSource,
    OracleSource,
    SamplerConfig,
    Trajectory,
    ald_run,
    corrector_step,
    ddim_step,
    default_sampler_config,
    dpm2_step,
    ode_step,
    run_sampler,
    sde_step,
)
from .schedules import (  # noqa: F401
    LINEAR_T_MAX,
    NoiseSchedule,
    drift_diffusion,
    perturb,
    schedule_coeffs,
)
from .scorenet import (  # noqa: F401
    AdamState,
    MlpParams,
    SkipWrapper,
    TrainConfig,
    TwoModelPair,
    adam_init,
    adam_step,
    eval_dsm_at,
    forward,
    init_mlp,
    load_checkpoint,
    loss_and_grad,
    make_model,
    model_score,
    model_velocity,
    save_checkpoint,
    train,
    train_two_model,
)
from .seesaw import (  # noqa: F401
    HermiteExpansion,
    hermite_eval,
    optimal_theta,
    seesaw_losses,
    seesaw_table,
    target_coeffs,
)
from .tid import (  # noqa: F401
    TidReport,
    hill_statistic,
    neighbor_counts,
    tail_ccdf,
    tid,
    tid_report,
)
from .diagnostics import (  # noqa: F401
    density_evolution,
    error_covariance,
    ks_distance,
    velocity_grid,
    velocity_mae,
)
