"""Statistical toolkit for driver acceleration behaviour.

Subpackages cover univariate heavy-tailed distributions, kernel density
estimation with plug-in bandwidth selection, KL-divergence data-sufficiency
examination, maximum-likelihood model fitting with AIC/BIC ranking, the
bivariate normal/Pareto acceleration models with contour extraction,
empirical quadrant analyses, and a synthetic naturalistic-driving generator.
"""

from .bivariate import BndmParams, BpdmParams, Polyline
from .convergence import ConvergenceConfig, ConvergenceResult, examine_convergence, kl_divergence
from .distributions import ExpParams, GpdParams, NormalParams
from .fitselect import FitReport, ModelRanking, rank_models
from .kde import BandwidthMatrix, DensityGrid, GridSpec, kde_evaluate, select_bandwidth_1d
from .series import SampleSeries, TripRecord, read_trips, write_trips
from .synth import SynthConfig, synth_generate, synth_series

__version__ = "0.1.0"

__all__ = [
    "BandwidthMatrix", "BndmParams", "BpdmParams", "ConvergenceConfig",
    "ConvergenceResult", "DensityGrid", "ExpParams", "FitReport", "GpdParams",
    "GridSpec", "ModelRanking", "NormalParams", "Polyline", "SampleSeries",
    "SynthConfig", "TripRecord", "examine_convergence", "kde_evaluate",
    "kl_divergence", "rank_models", "read_trips", "select_bandwidth_1d",
    "synth_generate", "synth_series", "write_trips",
]
