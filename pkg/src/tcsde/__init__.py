"""Sparse polynomial SDE models of tropical-cyclone intensity.

The package learns a sparse cubic drift over nondimensional intensity and
environmental forcings from 6-hourly track observations (integral-form
sparse regression, splicing best-subset selection, ensemble Kalman
fine-tuning, residual-based diffusion calibration), and uses the learned
or built-in published model for simulation, fixed-point/bifurcation
analysis, and hazard statistics.
"""

from .basis import MonomialBasis, evaluate, full_basis
from .calibrate import bin_equal_count, bias_report, calibrate_model, compute_residuals, fit_sigma
from .dynamics import EnvConditions, bifurcation_scan, find_fixed_points, monotone_drift_check
from .enkf import EnsembleState, TrainingSchedule, forecast_ensemble, init_ensemble, kalman_update, train
from .env import NondimState, compute_alpha, compute_z, nondimensionalize
from .errors import NumericsError, TcsdeError, ValidationError
from .hazard import (
    CityRegion,
    HazardSummary,
    entropy,
    gridded_pdi_climatology,
    kl_divergence,
    landfall_distribution,
    lmi,
    lmi_distribution,
    pdi,
    persistence_baseline,
    return_periods,
    tv_distance,
)
from .model import IntensityModel, Scales, builtin_paper_model, load_model, save_model
from .select import SparsityPath, cv_path, splice_select
from .simulate import IntensitySeries, SimConfig, detect_rapid_intensification, ensemble_quantiles, simulate
from .sindy import RegressionSystem, build_system, integrate_features, least_squares
from .synthetic import generate_synthetic_tracks
from .tracks import TrackPoint, TrackSeries, load_tracks, save_tracks

__version__ = "0.1.0"
