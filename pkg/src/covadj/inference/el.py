"""Empirical likelihood ratio for the estimating equations and its regions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..errors import ConvexHullError, NonFiniteError, ValidationError
from ..model import ModelSpec
from ..nls import score_vectors
from ..restore import RestoredSample
from .chi2 import chi2_quantile

__all__ = ["ELResult", "el_lambda", "el_ratio", "el_region_slice", "zero_in_hull_interior"]

MAX_INNER = 100
BACKTRACK = 0.5
DUAL_ULPS = 16.0
WEIGHT_TOL = 1e-8


@dataclass
class ELResult:
    lam: np.ndarray
    lratio: float
    converged: bool
    inner_iterations: int
    weights: np.ndarray | None

    @property
    def feasible(self) -> bool:
        return np.isfinite(self.lratio)


def zero_in_hull_interior(G: np.ndarray, tol: float = 1e-10) -> bool:
    """True iff 0 = sum p_i G_i for some weights with every p_i > 0.

    Solved as the LP  max t  s.t.  G^T p = 0, sum p = 1, p_i >= t.
    """
    n, p = G.shape
    scale = np.sqrt(np.mean(G * G, axis=0))
    scale[scale == 0] = 1.0
    Gs = G / scale
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.zeros((p + 1, n + 1))
    A_eq[:p, :n] = Gs.T
    A_eq[p, :n] = 1.0
    b_eq = np.zeros(p + 1)
    b_eq[p] = 1.0
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * n + [(None, 1.0 / n)], method="highs")
    return bool(res.status == 0 and -res.fun > tol)


def _dual(lam, Gs):
    return np.sum(np.log1p(Gs @ lam))


def el_lambda(scores) -> ELResult:
    """Solve for the Lagrange multiplier of the empirical likelihood.

    lambda maximises the concave dual D(lambda) = sum log(1 + lambda^T G_i)
    over {1 + lambda^T G_i > 1/n}; Newton steps with backtracking.  Columns
    are rescaled to unit RMS internally and the multiplier is mapped back.

    Raises ConvexHullError when zero is not an interior point of the convex
    hull of the rows (the dual is unbounded).
    """
    G = np.asarray(scores, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    n, p = G.shape
    if n < 2:
        raise ValidationError("empirical likelihood needs at least two score rows")
    if not np.all(np.isfinite(G)):
        raise NonFiniteError("non-finite score rows")
    scale = np.sqrt(np.mean(G * G, axis=0))
    if np.any(scale == 0):
        # an identically zero column puts no constraint on the weights
        scale = np.where(scale == 0, 1.0, scale)
    Gs = G / scale
    lam = np.zeros(p)
    w = np.ones(n)
    floor = 1.0 / n
    converged = False
    it = 0
    for it in range(MAX_INNER + 1):
        grad = Gs.T @ (1.0 / w)
        if np.linalg.norm(grad) <= 1e-10 * n:
            converged = True
            break
        if it == MAX_INNER:
            break
        Wg = Gs / w[:, None]
        H = Wg.T @ Wg
        step = np.linalg.lstsq(H, grad, rcond=None)[0]
        d0 = _dual(lam, Gs)
        slack = DUAL_ULPS * np.finfo(float).eps * (abs(d0) + n)
        gnorm = np.linalg.norm(grad)
        t = 1.0
        moved = False
        for _ in range(60):
            cand = lam + t * step
            wc = 1.0 + Gs @ cand
            if np.all(wc > floor):
                dc = _dual(cand, Gs)
                # near the optimum D is flat to rounding; then require a smaller gradient instead
                if dc >= d0 or (dc >= d0 - slack and np.linalg.norm(Gs.T @ (1.0 / wc)) < gnorm):
                    lam, w = cand, wc
                    moved = True
                    break
            t *= BACKTRACK
        if not moved:
            break
    weights = 1.0 / (n * w)
    # the gradient also vanishes as |lambda| -> inf when zero is outside the
    # hull; a true interior optimum has weights summing to one
    if converged and abs(weights.sum() - 1.0) > WEIGHT_TOL:
        converged = False
    if not converged and not zero_in_hull_interior(G):
        raise ConvexHullError("zero is outside the convex hull of the score rows")
    lratio = max(2.0 * float(np.sum(np.log(w))), 0.0)
    return ELResult(lam / scale, lratio, converged, it, weights)


def el_ratio(model: ModelSpec, restored: RestoredSample, beta) -> ELResult:
    """Plug-in empirical log-likelihood ratio at ``beta`` (inf if infeasible)."""
    G = score_vectors(model, restored, beta)
    try:
        return el_lambda(G)
    except ConvexHullError:
        return ELResult(np.full(model.p, np.nan), float("inf"), True, 0, None)


def el_region_slice(
    model: ModelSpec,
    restored: RestoredSample,
    center,
    pair: tuple[int, int],
    extents: tuple[tuple[float, float], tuple[float, float]],
    resolution: tuple[int, int] = (41, 41),
    alpha: float = 0.05,
) -> np.ndarray:
    """Evaluate the EL ratio on a 2-D grid through ``center``.

    Coordinates outside ``pair`` stay at their ``center`` values (a slice,
    not a profile).  Returns rows ``(beta_k1, beta_k2, lratio, inside)``
    with ``inside`` as 0/1; cells where the model cannot be evaluated get
    ``lratio = nan`` and ``inside = 0``.
    """
    center = np.asarray(center, dtype=float)
    if model.p < 2:
        raise ValidationError("region slices need at least two parameters")
    k1, k2 = pair
    if k1 == k2 or not (0 <= k1 < model.p and 0 <= k2 < model.p):
        raise ValidationError(f"invalid coordinate pair {pair}")
    c_alpha = chi2_quantile(model.p, alpha)
    g1 = np.linspace(*extents[0], resolution[0])
    g2 = np.linspace(*extents[1], resolution[1])
    rows = []
    for a in g1:
        for b in g2:
            beta = center.copy()
            beta[k1], beta[k2] = a, b
            try:
                lr = el_ratio(model, restored, beta).lratio
            except NonFiniteError:
                lr = float("nan")
            rows.append((a, b, lr, float(np.isfinite(lr) and lr <= c_alpha)))
    return np.array(rows)
