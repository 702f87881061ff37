"""Spectral cut-off regularisation from repeated measurements with discrepancy-type stopping."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateNoiseError, DegenerateOperatorError,
                     InsufficientSamples, InvalidArgument, NumericalFailure,
                     SpecstopError, UndefinedRelativeError)
from .estimators import (BatchSummary, cutoff_estimate, noise_level_sample,
                         noise_level_simple, relative_error, summarize)
from .noise import MeasurementBatch, NoiseModel, sample_batch, sample_gpd, true_component_variances
from .operators import (DenseOperator, SpectralProblem, make_deriv2, make_diagonal_problem,
                        svd, symmetrize)
from .stopping import (StoppingOutcome, WeightSequence, a_priori_k, algorithm1_stop,
                       algorithm1_weights, known_p_weights, modified_noise_level,
                       oracle_k, plain_discrepancy, run_algorithm1)
from .rates import (RateParams, SourceSpec, adaptive_weight_bound, exact_risk,
                    fixed_weight_bound, limit_weights, make_source_element, minimax_rate)
from .experiment import ExperimentConfig, emit_csv, load_config, run_experiment
