"""Circular filtering with observed increments and direct angular observations.

The core is the von Mises projection filter (``circkf_step``), with a particle
filter, Gaussian assumed-density filter, generalized Kalman-Bucy filter and a
K-harmonic exponential-family engine as references, plus simulators and a
Monte Carlo harness.
"""
from ._backend import BACKEND
from .circular import (
    KAPPA_FLOOR,
    FilterTrace,
    GaussAdfBelief,
    VonMisesBelief,
    circkf_step,
    filter_batch,
    gauss_adf_step,
    run_filter,
    vm_direct_update,
    vm_increment_step,
)
from .errors import (
    ConditioningError,
    DegeneracyError,
    DomainError,
    NumericalError,
    QuadratureOverflowError,
)
from .experiments import ExperimentConfig, RunSummary, empirical_precision, run_monte_carlo, sweep, timing_report
from .expfam import GvmMoments, GvmNaturalParams, gvm_direct_update, gvm_fisher, gvm_moments, gvm_step, run_gvm
from .linear import (
    DiagGaussianBelief,
    GaussianBelief,
    MultiLinearParams,
    diag_gauss_step,
    gkbf_batch,
    gkbf_step,
)
from .models import (
    CircularModelParams,
    LinearModelParams,
    TrajectoryRecord,
    observation_concentration,
    sample_direct_obs,
    simulate_circular,
    simulate_linear,
)
from .particle import ParticleEnsemble, PfEstimate, pf_estimate, pf_init, pf_step, run_pf
from .special import (
    bessel_ratio,
    circular_moment,
    kappa_from_r,
    script_F,
    vm_sample,
    wrap,
    xi,
    xi_inv,
)

__version__ = "0.1.0"
