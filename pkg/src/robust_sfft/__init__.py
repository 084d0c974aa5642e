"""Outlier-robust sparse Fourier transforms on the Boolean cube and the torus."""

from .boolean_sfft import BooleanSfftConfig, boolean_sfft
from .decode import DecodeConfig, DecodeResult, k_sparse_bruteforce, linear_decode
from .granular import GranularConfig, enumerate_granular, granular_decode
from .harness import ExperimentConfig, run_experiment, truth_generator
from .lowdeg import LowDegConfig, MonomialBasis, recover_low_degree
from .lp import LpProblem, l1_regression, l1_spectral_min, solve_lp
from .oracles import NoiseParams, NoisyOracle
from .spectral import BooleanSpectrum, CyclicSpectrum, FreqVec, TorusSpectrum
from .torus_sfft import TorusSfftConfig, torus_sfft

__version__ = "0.1.0"

__all__ = [
    "BooleanSfftConfig",
    "BooleanSpectrum",
    "CyclicSpectrum",
    "DecodeConfig",
    "DecodeResult",
    "ExperimentConfig",
    "FreqVec",
    "GranularConfig",
    "LowDegConfig",
    "LpProblem",
    "MonomialBasis",
    "NoiseParams",
    "NoisyOracle",
    "TorusSfftConfig",
    "TorusSpectrum",
    "boolean_sfft",
    "enumerate_granular",
    "granular_decode",
    "k_sparse_bruteforce",
    "l1_regression",
    "l1_spectral_min",
    "linear_decode",
    "recover_low_degree",
    "run_experiment",
    "solve_lp",
    "torus_sfft",
    "truth_generator",
]
