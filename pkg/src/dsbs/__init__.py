"""Training-free generative sampling with data-driven Schrodinger bridges."""

__version__ = "0.1.0"

from .drift import Dataset, DriftEvaluator, GaussianMixture, gmm_drift_vp  # noqa: E402
from .sampler import SamplerConfig, sample_batch, sample_path  # noqa: E402
from .sde import ReferenceSde, TimeGrid, transition_params  # noqa: E402

__all__ = [
    "Dataset",
    "DriftEvaluator",
    "GaussianMixture",
    "ReferenceSde",
    "SamplerConfig",
    "TimeGrid",
    "gmm_drift_vp",
    "sample_batch",
    "sample_path",
    "transition_params",
]
