"""Simulation-only linear representation R_n(beta) of the estimating equations.

Needs latent quantities (X_i, Y_i, eps_i) that real data never provide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..model import ModelSpec

__all__ = ["PopulationMoments", "population_moments", "OracleRn", "oracle_rn"]


@dataclass(frozen=True)
class PopulationMoments:
    """Expectations entering R_n: E[Y], E[X_l], E[Y f_bk], E[X_l f_xl f_bk]."""

    ey: float
    ex: np.ndarray  # (q,)
    ey_fb: np.ndarray  # (p,)
    ex_fx_fb: np.ndarray  # (q, p)

    @property
    def eta(self) -> np.ndarray:
        return self.ey_fb / self.ey

    @property
    def nu(self) -> np.ndarray:
        return self.ex_fx_fb / self.ex[:, None]


def population_moments(model: ModelSpec, x, y, beta0) -> PopulationMoments:
    """Monte Carlo moments from a (large) latent sample."""
    x = np.asarray(x, dtype=float).reshape(len(y), model.q)
    y = np.asarray(y, dtype=float)
    J = model.dbeta(x, beta0)
    fx = model.dx(x, beta0)
    n = y.size
    return PopulationMoments(
        ey=float(y.mean()),
        ex=x.mean(axis=0),
        ey_fb=(y[:, None] * J).mean(axis=0),
        ex_fx_fb=np.einsum("il,il,ik->lk", x, fx, J) / n,
    )


@dataclass
class OracleRn:
    total: np.ndarray  # (p,)
    terms: np.ndarray  # (n, p), rows sum to ``total``
    noise: np.ndarray  # (n, p) first sum
    centred: np.ndarray  # (n, p) second sum (already halved)
    distortion: np.ndarray  # (n, p) third sum


def oracle_rn(model: ModelSpec, latent, beta0, moments: PopulationMoments) -> OracleRn:
    """Evaluate the three-sum representation of R_n(beta0) term by term.

    ``latent`` must expose ``x`` (n, q), ``y``, ``eps``, ``xt`` (n, q), ``yt``.
    """
    for name in ("x", "y", "eps", "xt", "yt"):
        if getattr(latent, name, None) is None:
            raise ValidationError(f"latent sample lacks field {name!r}")
    beta0 = np.asarray(beta0, dtype=float)
    x = np.asarray(latent.x, dtype=float).reshape(-1, model.q)
    xt = np.asarray(latent.xt, dtype=float).reshape(-1, model.q)
    y = np.asarray(latent.y, dtype=float)
    J = model.dbeta(x, beta0)
    eta, nu = moments.eta, moments.nu
    noise = np.asarray(latent.eps, dtype=float)[:, None] * J
    centred = 0.5 * ((y - moments.ey)[:, None] * eta[None, :] - (x - moments.ex) @ nu)
    distortion = (np.asarray(latent.yt) - y)[:, None] * eta[None, :] - (xt - x) @ nu
    terms = noise + centred + distortion
    return OracleRn(terms.sum(axis=0), terms, noise, centred, distortion)
