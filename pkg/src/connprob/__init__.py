"""Connection probability between uncertain robots under a disk sensing model,
and connectivity-aware planning built on it."""

__version__ = "0.1.0"

from .baselines import SamplerConfig, bernoulli, linear, oracle, random_sampling
from .belief import EdgeObservation, JointBelief, NoiseModel, WorldState, edge_marginal, ekf_predict, ekf_update, step_truth
from .errors import (
    CannotShrink,
    ConfigError,
    ConnProbError,
    DegreeCapExceeded,
    EmptyInput,
    NotPositiveDefinite,
    NotSymmetric,
    NumericError,
    SeriesOverflow,
    SingularInnovation,
)
from .gaussian import Gaussian2, SpectralForm, relative_displacement, spectral_form
from .kernels import BACKEND
from .series import (
    ConnectionProbability,
    Method,
    SeriesCoefficients,
    adaptive_degree,
    apse,
    coeff_c,
    coeff_d,
    finite_cdf,
    g_tail,
    inverse_trace_rescale,
    three_delta_bounds,
    trace_rescale,
)
from .topology import EdgeProbabilitySet, WeightedTopology, enumerate_topologies, expected_cost, predict_edge_probabilities
from .planners import ActionSpace, PlanResult, gbs_plan, leader_guidance, osmdp_plan
from .harness import MetricsReport, Scenario, TrialLog, aggregate, cpp_benchmark, run_trial

__all__ = [name for name in dir() if not name.startswith("_")]
