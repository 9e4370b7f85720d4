"""Seeded latent/observed data generation.

Random streams use numpy's Philox counter-based bit generator keyed by
SeedSequence([seed, replicate, role]); each variable has its own role so a
sample is reproducible and adding replicates never perturbs earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..restore import ObservedSample
from .scenarios import Scenario

__all__ = ["LatentSample", "generate", "stream", "ROLE_X", "ROLE_U", "ROLE_EPS"]

ROLE_X, ROLE_U, ROLE_EPS = 0, 1, 2


def stream(seed: int, replicate: int, role: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replicate), int(role)])))


@dataclass(frozen=True)
class LatentSample:
    u: np.ndarray
    x: np.ndarray  # (n, q)
    eps: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    phi: np.ndarray  # (n, q)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def yt(self) -> np.ndarray:
        return self.psi * self.y

    @property
    def xt(self) -> np.ndarray:
        return self.phi * self.x

    def observed(self) -> ObservedSample:
        return ObservedSample(self.u, self.xt, self.yt)


def generate(scenario: Scenario, n: int, seed: int, replicate: int = 0) -> LatentSample:
    """Draw n latent records for ``scenario``; deterministic in (seed, replicate)."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    q = scenario.model.q
    rng_x = stream(seed, replicate, ROLE_X)
    x = np.column_stack([scenario.x_dist.sample(rng_x, n) for _ in range(q)])
    u = scenario.u_dist.sample(stream(seed, replicate, ROLE_U), n)
    eps = stream(seed, replicate, ROLE_EPS).normal(0.0, scenario.eps_sd, size=n)
    y = scenario.model.f(x, scenario.beta0) + eps
    psi = np.asarray(scenario.psi(u), dtype=float)
    phi = np.column_stack([np.asarray(p(u), dtype=float) for p in scenario.phi])
    return LatentSample(u, x, eps, y, psi, phi)
