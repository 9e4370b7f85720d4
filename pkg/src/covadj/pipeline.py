"""End-to-end analysis of one observed sample."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inference import ELResult, SigmaHat, el_ratio, sigma_hat
from .model import ModelSpec
from .nls import FitConfig, FitResult, fit
from .restore import DistortionFit, ObservedSample, RestoredSample, estimate_distortions, restore_sample

__all__ = ["Analysis", "analyze", "coordinate_se"]


@dataclass
class Analysis:
    model: ModelSpec
    observed: ObservedSample
    distortion: DistortionFit
    restored: RestoredSample
    fit: FitResult
    sigma: SigmaHat | None
    el_at_fit: ELResult | None


def analyze(
    observed: ObservedSample,
    model: ModelSpec,
    config: FitConfig,
    bandwidths=None,
    guard: float | None = None,
    shared_bandwidth: bool = False,
    leave_one_out: bool = False,
) -> Analysis:
    """Estimate distortions, restore, fit, and (if converged) build Sigma_hat."""
    dist = estimate_distortions(observed, bandwidths=bandwidths, guard=guard, shared_bandwidth=shared_bandwidth,
                                leave_one_out=leave_one_out)
    restored = restore_sample(observed, dist)
    res = fit(model, restored, config)
    sig = el = None
    if res.converged:
        sig = sigma_hat(model, restored, observed, res)
        el = el_ratio(model, restored, res.beta_hat)
    return Analysis(model, observed, dist, restored, res, sig, el)


def coordinate_se(analysis: Analysis) -> np.ndarray:
    """Standard errors sqrt(diag(Sigma_hat) / n)."""
    if analysis.sigma is None:
        return np.full(analysis.model.p, np.nan)
    return np.sqrt(np.clip(np.diag(analysis.sigma.sigma), 0, None) / analysis.observed.n)
