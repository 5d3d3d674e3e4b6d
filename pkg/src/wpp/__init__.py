"""Wavelet-domain frequency regulation for Gaussian diffusion samplers."""

__version__ = "0.1.0"

from .diagnostics import (
    EnergyCurve,
    GapStat,
    MomentReport,
    band_gap_stats,
    energy_curves,
    gamma_recursion,
    moment_report_csv,
    pooled_band_gap,
    predicted_variance,
    simulate_bias,
    verify_grid,
    verify_recon_moments,
)
from .errors import EvaluationError, ParameterError, ProtocolError, ShapeError
from .model import (
    GaussianDataModel,
    NoisePredictor,
    OraclePredictor,
    PerturbedPredictor,
    ReconProfile,
    optimal_eps,
    perturbed_eps,
    recon_model_x0,
    reconstruct_x0,
    reverse_terminal_law,
)
from .presets import PRESETS, get_preset
from .sampler import (
    HIGH_VARIANTS,
    LOW_VARIANTS,
    SamplerConfig,
    WeightPolicy,
    ddim_step,
    ddpm_step,
    high_weight,
    low_weight,
    sample,
    wpp_regulate,
)
from .schedule import SIGMA_OPTIONS, NoiseSchedule, cosine_schedule, linear_schedule
from .search import (
    SearchContext,
    SearchResult,
    SequentialSearchResult,
    gaussian_w2_objective,
    sequential_wl_wh_search,
    two_stage_search,
)
from .tensorfile import read_tensor, write_tensor
from .wavelet import SubbandSet, dwt2, idwt2, subband_energy

__all__ = [
    "EnergyCurve",
    "EvaluationError",
    "GapStat",
    "GaussianDataModel",
    "HIGH_VARIANTS",
    "LOW_VARIANTS",
    "MomentReport",
    "NoisePredictor",
    "NoiseSchedule",
    "OraclePredictor",
    "PRESETS",
    "ParameterError",
    "PerturbedPredictor",
    "ProtocolError",
    "ReconProfile",
    "SIGMA_OPTIONS",
    "SamplerConfig",
    "SearchContext",
    "SearchResult",
    "SequentialSearchResult",
    "ShapeError",
    "SubbandSet",
    "WeightPolicy",
    "__version__",
    "band_gap_stats",
    "cosine_schedule",
    "ddim_step",
    "ddpm_step",
    "dwt2",
    "energy_curves",
    "gamma_recursion",
    "gaussian_w2_objective",
    "get_preset",
    "high_weight",
    "idwt2",
    "linear_schedule",
    "low_weight",
    "moment_report_csv",
    "optimal_eps",
    "perturbed_eps",
    "pooled_band_gap",
    "predicted_variance",
    "read_tensor",
    "recon_model_x0",
    "reconstruct_x0",
    "reverse_terminal_law",
    "sample",
    "sequential_wl_wh_search",
    "simulate_bias",
    "subband_energy",
    "two_stage_search",
    "verify_grid",
    "verify_recon_moments",
    "wpp_regulate",
    "write_tensor",
]
