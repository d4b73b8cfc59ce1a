"""Set-membership identification with primal QMIs and robust H-infinity estimator synthesis."""

from .analysis import Estimator, StateSpace, closed_loop_error_system, hinf_norm, sample_members, spectral_radius
from .experiments import ScenarioConfig, build_sets, example_config, generate_data, run_scenario
from .prior import informativity_prior, prior_from_data, stack_samples
from .qmi import MultiplierVector, Orientation, Qmi, ball_prior, contains, dualize, evaluate, from_center_shape
from .reparam import RegressionSample, ReparamConfig, reparameterize, solve_qhat
from .synth import UncertainPlant, synthesize, validate_by_sampling, verify_robust_bound

__version__ = "0.1.0"
