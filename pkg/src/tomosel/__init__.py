"""Adaptive weighted least-squares estimation of an image from noisy line integrals."""

from .estimator import CoefficientDesign, ConfigurationError, IndexSets, sigma_hat
from .model import RadonModelSelection
from .obsmodel import NoiseFamily, NoiseModel, default_noise_family, draw_samples
from .phantoms import Bump, Phantom, default_phantom, exact_radon
from .properties import property_suite
from .riskharness import RiskReport, RiskSetup, mc_risk, oracle_report, robust_risk
from .selector import WeightFamily, WeightVector, build_family, select

__all__ = [
    "Bump",
    "CoefficientDesign",
    "ConfigurationError",
    "IndexSets",
    "NoiseFamily",
    "NoiseModel",
    "Phantom",
    "RadonModelSelection",
    "RiskReport",
    "RiskSetup",
    "WeightFamily",
    "WeightVector",
    "build_family",
    "default_noise_family",
    "default_phantom",
    "draw_samples",
    "exact_radon",
    "mc_risk",
    "oracle_report",
    "property_suite",
    "robust_risk",
    "select",
    "sigma_hat",
]
