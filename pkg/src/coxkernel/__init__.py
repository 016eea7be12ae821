"""Kernel inference for doubly stochastic Poisson (Cox) process data.

Estimate the stochastic arrival rate of an event stream, select the
MISE-optimal bandwidth by a regression plug-in, estimate the rate's
autocorrelation function with small-lag bias correction, and attach
variance estimates and pointwise confidence intervals.  Exact simulators
and a Monte Carlo harness support calibration studies; the ``coxkernel``
CLI ties everything into a file-based analysis pipeline.
"""

from .acf import (
    AcfEstimate,
    BandwidthPolicy,
    bandwidth_policy,
    bias_correct,
    estimate_acf_curve,
    estimate_acf_raw,
    log_lag_grid,
    rate_grids_for_policy,
)
from .errors import (
    BandwidthTooLargeError,
    CoxKernelError,
    EmptyDataError,
    IngestError,
    InvalidBandwidthError,
    InvalidDataError,
    LagOutOfRangeError,
    ParameterError,
    SimulationError,
    StaticRateError,
)
from .kernels import (
    KERNELS,
    Kernel,
    abs_moment_integral,
    autoconvolution,
    eval_scaled,
    gamma_f,
    get_kernel,
    load_kernel_table,
    squared_integral,
)
from .rate import (
    ArrivalData,
    BandwidthSelection,
    RateEstimate,
    analytic_optimal_bandwidth,
    empirical_mise,
    estimate_rate,
    estimate_cprime0,
    mean_rate,
    optimal_bandwidth,
    pilot_bandwidth,
    rate_on_grid,
)
from .simulate import (
    ConstantModel,
    LogGaussianModel,
    RatePath,
    TwoStateModel,
    simulate_arrivals,
    simulate_log_gaussian_path,
    simulate_path,
    simulate_two_state_path,
    true_acf,
    true_cprime0,
    true_mean,
)
from .varci import (
    CiBand,
    confidence_band,
    confidence_interval,
    empirical_cov4,
    variance_estimate,
)

__version__ = "0.1.0"
