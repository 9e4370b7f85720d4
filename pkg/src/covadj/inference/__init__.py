"""Confidence machinery: chi-square quantiles, empirical likelihood, Wald regions."""

from .asymptotic import SigmaHat, sigma_from_moments, sigma_hat, wald_region, wald_statistic
from .chi2 import chi2_cdf, chi2_quantile
from .el import ELResult, el_lambda, el_ratio, el_region_slice, zero_in_hull_interior
from .oracle import OracleRn, PopulationMoments, oracle_rn, population_moments

__all__ = [
    "SigmaHat",
    "sigma_hat",
    "sigma_from_moments",
    "wald_region",
    "wald_statistic",
    "chi2_cdf",
    "chi2_quantile",
    "ELResult",
    "el_lambda",
    "el_ratio",
    "el_region_slice",
    "zero_in_hull_interior",
    "OracleRn",
    "PopulationMoments",
    "oracle_rn",
    "population_moments",
]
