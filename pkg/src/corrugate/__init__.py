"""Random Nash twists of short curves and the Gaussian limit of their scaled difference."""

__version__ = "0.1.0"

from .geometry import (Curve, Frame, FrameField, frame_field, frenet_frame,
                       make_catalog_curve, rmf_frame_field, curve_derivative)
from .metric import (MetricSpec, ShortnessReport, amplitude_field_derivative,
                     residual_amplitude, shortness_report)
from .twist import (PhasePath, SignSequence, TwistedMap, build_twisted_map,
                    deterministic_phase, eval_map, isometry_defect, random_phase,
                    sample_signs, scaled_difference, scaled_difference_parts,
                    sup_difference)
from .limitlaw import (LimitBundle, covariance_kernel, euler_limit_path, limit_bundle,
                       limit_covariance, limit_covariance_matrix, sample_limit)
from .montecarlo import Ensemble, ExperimentConfig, enumerate_exact, run_ensemble
from .stats import covariance_comparison, empirical_moments, ks_gof, rate_fit
