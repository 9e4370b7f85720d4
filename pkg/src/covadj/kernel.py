"""Fourth-order compact kernel, kernel-weighted sums and LOO-CV bandwidths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBandwidthError, ValidationError

__all__ = [
    "kernel_weight",
    "nw_components",
    "admissible_range",
    "cv_criterion",
    "loocv_bandwidth",
    "select_bandwidths",
    "BandwidthChoice",
    "KERNEL_SUPPORT",
]

KERNEL_SUPPORT = (-1.0, 1.0)
_C = 15.0 / 32.0


def kernel_weight(t):
    """K(t) = 15/32 (3 - 7t^2)(1 - t^2) on [-1, 1], zero elsewhere."""
    t = np.asarray(t, dtype=float)
    t2 = t * t
    return np.where(t2 <= 1.0, _C * (3.0 - 7.0 * t2) * (1.0 - t2), 0.0)


def nw_components(u, us, vs, h: float):
    """Return (ghat, phat) at point(s) ``u``.

    ghat = (1/(nh)) sum K((u - U_i)/h) v_i and phat = (1/(nh)) sum K((u - U_i)/h).
    No clamping is done: with a fourth-order kernel either may be negative.
    """
    us = np.asarray(us, dtype=float).ravel()
    vs = np.asarray(vs, dtype=float).ravel()
    if us.size == 0:
        raise ValidationError("empty sample")
    if us.shape != vs.shape:
        raise ValidationError("us and vs must have the same length")
    if not h > 0:
        raise ValidationError(f"bandwidth must be positive, got {h}")
    u_arr = np.asarray(u, dtype=float)
    w = kernel_weight((u_arr.reshape(-1, 1) - us[None, :]) / h)
    scale = 1.0 / (us.size * h)
    ghat = scale * (w @ vs)
    phat = scale * w.sum(axis=1)
    if u_arr.ndim == 0:
        return float(ghat[0]), float(phat[0])
    return ghat, phat


def admissible_range(us, n: int | None = None) -> tuple[float, float]:
    """Bandwidth window [log(n)/sqrt(n), n^(-1/8)] scaled by the sample sd of U."""
    us = np.asarray(us, dtype=float)
    n = us.size if n is None else n
    s_u = float(np.std(us, ddof=1)) if us.size > 1 else 1.0
    return np.log(n) / np.sqrt(n) * s_u, n ** (-1.0 / 8.0) * s_u


@dataclass
class BandwidthChoice:
    h: float
    criterion_value: float
    admissible_range: tuple[float, float]
    grid: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    criteria: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    skipped: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0, dtype=int))

    @property
    def n_skipped(self) -> int:
        """Observations skipped at the chosen bandwidth."""
        if self.grid.size == 0:
            return 0
        return int(self.skipped[int(np.argmin(np.abs(self.grid - self.h)))])


def default_grid(us, size: int = 30) -> np.ndarray:
    lo, hi = admissible_range(us)
    return np.geomspace(lo, hi, size)


def cv_criterion(us, vs_list, grid, guard: float | None = None):
    """Leave-one-out squared prediction error of the U-regression.

    ``vs_list`` is a sequence of response series sharing ``us``; the kernel
    matrix for each bandwidth is built once and reused.  Returns arrays
    ``(crit, skipped)`` of shape ``(len(vs_list), len(grid))``.  An
    observation is skipped when its leave-one-out denominator has magnitude
    below ``guard`` (default 1/n).
    """
    us = np.asarray(us, dtype=float).ravel()
    n = us.size
    V = np.atleast_2d(np.asarray(vs_list, dtype=float))
    guard = 1.0 / n if guard is None else guard
    d2 = (us[:, None] - us[None, :]) ** 2
    k0 = float(kernel_weight(0.0))
    crit = np.empty((V.shape[0], len(grid)))
    skipped = np.empty((V.shape[0], len(grid)), dtype=int)
    W = np.empty_like(d2)
    tmp = np.empty_like(d2)
    for j, h in enumerate(grid):
        # K as a polynomial in t^2, built in place; clipping t^2 at 1 gives exact zeros outside the support
        np.multiply(d2, 1.0 / (h * h), out=W)
        np.minimum(W, 1.0, out=W)
        np.multiply(W, 7.0, out=tmp)
        tmp -= 10.0
        tmp *= W
        tmp += 3.0
        np.multiply(tmp, _C, out=W)
        # drop the diagonal without copying: subtract K(0) contributions
        den = (W.sum(axis=1) - k0) / ((n - 1) * h)
        num = (V @ W - k0 * V) / ((n - 1) * h)
        ok = np.abs(den) >= guard
        with np.errstate(divide="ignore", invalid="ignore"):
            resid = np.where(ok, V - num / np.where(ok, den, 1.0), 0.0)
        crit[:, j] = np.sum(resid * resid, axis=1)
        skipped[:, j] = n - int(ok.sum())
    crit[skipped >= n] = np.inf
    return crit, skipped


def _pick(grid: np.ndarray, crit: np.ndarray) -> int:
    if not np.any(np.isfinite(crit)):
        raise DegenerateBandwidthError("every bandwidth left the CV criterion empty")
    best = np.min(crit)
    # ties (within rounding) go to the largest bandwidth
    tie = crit <= best + 1e-12 * max(1.0, abs(best))
    return int(np.flatnonzero(tie)[-1])


def loocv_bandwidth(us, vs, grid=None, guard: float | None = None) -> BandwidthChoice:
    """Bandwidth minimising the LOO-CV criterion over the admissible grid."""
    us = np.asarray(us, dtype=float).ravel()
    if us.size < 10:
        raise ValidationError("bandwidth selection needs n >= 10")
    grid = default_grid(us) if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ValidationError("bandwidth grid values must be positive")
    crit, skipped = cv_criterion(us, [vs], grid, guard)
    j = _pick(grid, crit[0])
    return BandwidthChoice(float(grid[j]), float(crit[0, j]), admissible_range(us), grid, crit[0], skipped[0])


def select_bandwidths(us, series, grid=None, guard: float | None = None, shared: bool = False):
    """One BandwidthChoice per series (or one shared h minimising the summed CV)."""
    us = np.asarray(us, dtype=float).ravel()
    if us.size < 10:
        raise ValidationError("bandwidth selection needs n >= 10")
    grid = default_grid(us) if grid is None else np.asarray(grid, dtype=float)
    crit, skipped = cv_criterion(us, series, grid, guard)
    rng = admissible_range(us)
    if shared:
        total = crit.sum(axis=0)
        j = _pick(grid, total)
        return [
            BandwidthChoice(float(grid[j]), float(crit[r, j]), rng, grid, crit[r], skipped[r])
            for r in range(crit.shape[0])
        ]
    out = []
    for r in range(crit.shape[0]):
        j = _pick(grid, crit[r])
        out.append(BandwidthChoice(float(grid[j]), float(crit[r, j]), rng, grid, crit[r], skipped[r]))
    return out
