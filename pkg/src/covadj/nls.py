"""Nonlinear least squares on restored data (Levenberg-damped Gauss-Newton).

The stationarity condition of the residual sum of squares is exactly the
estimating equation G_n(beta) = sum_i (Y^_i - f(X^_i, beta)) grad_beta f = 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, ValidationError
from .model import ModelSpec
from .restore import RestoredSample

log = logging.getLogger(__name__)

RSS_ULPS = 16.0  # rounding slack for step acceptance at the optimum

__all__ = ["FitConfig", "FitResult", "score_vectors", "fit"]


@dataclass(frozen=True)
class FitConfig:
    init: tuple[float, ...]
    max_iter: int = 200
    tol_step: float = 1e-10
    tol_grad: float = 1e-8
    damping: float = 1e-3
    starts: tuple[tuple[float, ...], ...] = ()  # extra starting points, off by default

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if not (self.tol_step > 0 and self.tol_grad > 0 and self.damping > 0):
            raise ValidationError("tolerances and damping must be positive")


@dataclass
class FitResult:
    beta_hat: np.ndarray
    converged: bool
    iterations: int
    rss: float
    sigma2_hat: float
    scores: np.ndarray = field(repr=False)
    grad_norm: float = 0.0
    rss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return self.scores.shape[0]


def _residuals(model: ModelSpec, restored: RestoredSample, beta: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        r = restored.yhat - model.eval(restored.xhat, beta)
    return r


def score_vectors(model: ModelSpec, restored: RestoredSample, beta) -> np.ndarray:
    """Rows G_{n,i}(beta) = (Y^_i - f(X^_i, beta)) * grad_beta f(X^_i, beta)."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (model.p,):
        raise ValidationError(f"beta must have length {model.p}, got {beta.shape}")
    if restored.q != model.q:
        raise ValidationError(f"model expects q={model.q} predictors, data has {restored.q}")
    with np.errstate(all="ignore"):
        r = _residuals(model, restored, beta)
        J = model.dbeta(restored.xhat, beta)
        G = r[:, None] * J
    if not np.all(np.isfinite(G)):
        raise NonFiniteError(f"model {model.id!r} is not finite on the data at beta={beta.tolist()}")
    return G


def _lm(model: ModelSpec, restored: RestoredSample, beta0: np.ndarray, cfg: FitConfig):
    n = restored.n
    beta = model.clip_to_bounds(beta0.astype(float))
    r = _residuals(model, restored, beta)
    if not np.all(np.isfinite(r)):
        raise NonFiniteError(f"model {model.id!r} cannot be evaluated at init {beta0.tolist()}")
    rss = float(r @ r)
    history = [rss]
    mu = cfg.damping
    it = 0
    for it in range(1, cfg.max_iter + 1):
        J = model.dbeta(restored.xhat, beta)
        g = J.T @ r
        if np.linalg.norm(g) / n <= cfg.tol_grad:
            it -= 1
            break
        # Marquardt scaling: columns of J normalised, damped step solved as the
        # augmented least-squares problem [Js; sqrt(mu) I] z = [r; 0]
        with np.errstate(over="ignore"):
            scale = np.sqrt(np.sum(J * J, axis=0))
        if not np.all(np.isfinite(scale)):
            break  # Jacobian too large to scale; report the current iterate
        scale[scale <= 0] = 1.0
        Js = J / scale
        p = Js.shape[1]
        accepted = False
        while mu < 1e16:
            aug = np.vstack([Js, np.sqrt(mu) * np.eye(p)])
            rhs = np.concatenate([r, np.zeros(p)])
            step = np.linalg.lstsq(aug, rhs, rcond=None)[0] / scale
            cand = model.clip_to_bounds(beta + step)
            r_c = _residuals(model, restored, cand)
            with np.errstate(over="ignore"):
                rss_c = float(r_c @ r_c) if np.all(np.isfinite(r_c)) else np.inf
            if rss_c <= rss:
                accepted = True
                break
            # at the floating-point floor rss cannot discriminate; accept a step
            # that raises rss by rounding only if it shrinks the gradient
            if rss_c <= rss * (1.0 + RSS_ULPS * np.finfo(float).eps):
                J_c = model.dbeta(restored.xhat, cand)
                if np.linalg.norm(J_c.T @ r_c) < np.linalg.norm(g):
                    accepted = True
                    break
            mu *= 4.0
        if not accepted:
            break
        delta = cand - beta
        beta, r, rss = cand, r_c, rss_c
        history.append(rss)
        mu = max(mu * 0.5, 1e-12)
        # coordinate-wise relative test: parameters can differ by orders of magnitude
        if np.all(np.abs(delta) <= cfg.tol_step * (np.abs(beta) + cfg.tol_step)):
            break
    return beta, r, rss, it, history


def fit(model: ModelSpec, restored: RestoredSample, config: FitConfig) -> FitResult:
    """Minimise sum (Y^_i - f(X^_i, beta))^2 from ``config.init``.

    Non-convergence is reported through ``converged=False``; the best
    iterate is still returned.  ``converged`` means the gradient norm
    ||G_n / n|| is at most ``tol_grad``.
    """
    inits = [np.asarray(config.init, dtype=float)] + [np.asarray(s, dtype=float) for s in config.starts]
    for b in inits:
        if b.shape != (model.p,):
            raise ValidationError(f"init must have length {model.p}, got {b.shape}")
    best, first_err = None, None
    for b0 in inits:
        try:
            # wild restored values (a distortion estimate near a sign change) can overflow
            # rss; non-finite results are caught by the final score check
            with np.errstate(over="ignore"):
                out = _lm(model, restored, b0, config)
        except NonFiniteError as exc:
            first_err = first_err or exc
            continue
        if best is None or out[2] < best[2]:
            best = out
    if best is None:
        raise first_err
    beta, r, rss, it, history = best
    G = score_vectors(model, restored, beta)
    grad_norm = float(np.linalg.norm(G.sum(axis=0)) / restored.n)
    dof = max(restored.n - model.p, 1)
    res = FitResult(
        beta_hat=beta,
        converged=grad_norm <= config.tol_grad,
        iterations=it,
        rss=rss,
        sigma2_hat=rss / dof,
        scores=G,
        grad_norm=grad_norm,
        rss_history=history,
    )
    if not res.converged:
        log.debug("NLS stopped without convergence: grad_norm=%.3g after %d iterations", grad_norm, it)
    return res
