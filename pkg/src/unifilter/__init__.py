"""Homophily-aware polynomial bases and a linear spectral filter for node classification."""

__version__ = "0.1.0"

from .basis import (
    BasisConfig,
    BasisSet,
    build_basis,
    heterophily_basis,
    homophily_basis,
    iter_basis,
    orthonormal_basis,
    uni_basis,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    GraphFormatError,
    NumericalError,
    UniFilterError,
    UnreachableTargetError,
)
from .graph import (
    Graph,
    LabeledSplit,
    PropagationConfig,
    estimate_homophily,
    homophily_ratio,
    propagate,
)
from .model import FilterModel, Hyper, TrainReport, evaluate, forward, predict, train
from .spectral import (
    SpectrumProfile,
    consecutive_angles,
    expected_frequency_regular,
    signal_frequency,
    spectrum_profile,
)
from .synth import SynthSpec, make_synthetic, random_onehot_features, reassign_to_target

__all__ = [
    "BasisConfig", "BasisSet", "build_basis", "heterophily_basis", "homophily_basis",
    "iter_basis", "orthonormal_basis", "uni_basis",
    "ConfigurationError", "DimensionError", "GraphFormatError", "NumericalError",
    "UniFilterError", "UnreachableTargetError",
    "Graph", "LabeledSplit", "PropagationConfig", "estimate_homophily", "homophily_ratio", "propagate",
    "FilterModel", "Hyper", "TrainReport", "evaluate", "forward", "predict", "train",
    "SpectrumProfile", "consecutive_angles", "expected_frequency_regular", "signal_frequency",
    "spectrum_profile",
    "SynthSpec", "make_synthetic", "random_onehot_features", "reassign_to_target",
]
