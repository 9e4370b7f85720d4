"""Distortion-function estimates and restored (undistorted) data.

The distorting factors are recovered as

    psi_hat(u)   = [ghat_Y(u) / phat(u)] / mean(Y~)
    phi_r_hat(u) = [ghat_r(u) / phat(u)] / mean(X~_r)

and the latent variables as Y^ = Y~ / psi_hat(U), X^_r = X~_r / phi_r_hat(U).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MeanCheckError, ValidationError
from .kernel import BandwidthChoice, kernel_weight, select_bandwidths

__all__ = [
    "ObservedSample",
    "DistortionFit",
    "RestoredSample",
    "estimate_distortions",
    "restore_sample",
    "distortion_curve",
]

# relative size below which a sample mean counts as zero
MEAN_TOL = 1e-8


@dataclass(frozen=True)
class ObservedSample:
    """The data a user actually has: (U_i, X~_i, Y~_i)."""

    u: np.ndarray
    xt: np.ndarray  # (n, q)
    yt: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        yt = np.asarray(self.yt, dtype=float).ravel()
        xt = np.asarray(self.xt, dtype=float)
        if xt.ndim == 1:
            xt = xt.reshape(-1, 1)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "yt", yt)
        object.__setattr__(self, "xt", xt)
        n = u.size
        if yt.size != n or xt.shape[0] != n:
            raise ValidationError(f"length mismatch: u={n}, x={xt.shape[0]}, y={yt.size}")
        if n < 10:
            raise ValidationError(f"need at least 10 observations, got {n}")
        for name, arr in (("u", u), ("x", xt), ("y", yt)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite values in {name}")
        check_means(yt, xt)

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def q(self) -> int:
        return self.xt.shape[1]


def check_means(yt: np.ndarray, xt: np.ndarray) -> None:
    """Reject series whose mean is numerically zero relative to their spread."""
    series = [("y", yt)] + [(f"x{r + 1}", xt[:, r]) for r in range(xt.shape[1])]
    for name, v in series:
        m = float(np.mean(v))
        scale = float(np.mean(np.abs(v)))
        if scale == 0.0 or abs(m) <= MEAN_TOL * scale or abs(m) < 1e-12:
            raise MeanCheckError(f"mean of {name} is too close to zero ({m:.3g}); cannot normalise distortion")


@dataclass
class DistortionFit:
    psi_hat: np.ndarray
    phi_hat: np.ndarray  # (q, n)
    bandwidths: list[BandwidthChoice]  # [Y, X_1, ..., X_q]
    ybar_tilde: float
    xbar_tilde: np.ndarray
    guard: float
    n_clamped: int
    u: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.psi_hat.size

    @property
    def h_y(self) -> float:
        return self.bandwidths[0].h

    @property
    def h_x(self) -> list[float]:
        return [b.h for b in self.bandwidths[1:]]


@dataclass(frozen=True)
class RestoredSample:
    u: np.ndarray
    xhat: np.ndarray  # (n, q)
    yhat: np.ndarray
    fit: DistortionFit | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def q(self) -> int:
        return self.xhat.shape[1]

    def permuted(self, perm) -> "RestoredSample":
        return RestoredSample(self.u[perm], self.xhat[perm], self.yhat[perm], self.fit)


def _clamp(v: np.ndarray, guard: float) -> tuple[np.ndarray, int]:
    small = np.abs(v) < guard
    if not small.any():
        return v, 0
    sign = np.where(v < 0, -1.0, 1.0)
    return np.where(small, sign * guard, v), int(small.sum())


def _smooth_at(points: np.ndarray, us: np.ndarray, V: np.ndarray, h: float, drop_self: bool = False):
    """Kernel numerators for each series in V and the common denominator."""
    W = kernel_weight((points[:, None] - us[None, :]) / h)
    scale = 1.0 / (us.size * h)
    if drop_self:
        np.fill_diagonal(W, 0.0)
        scale = 1.0 / ((us.size - 1) * h)
    return scale * (W @ V.T).T, scale * W.sum(axis=1)


def estimate_distortions(
    sample: ObservedSample,
    bandwidths: float | Sequence[float] | None = None,
    guard: float | None = None,
    shared_bandwidth: bool = False,
    grid=None,
    leave_one_out: bool = False,
) -> DistortionFit:
    """Estimate psi_hat(U_i) and phi_r_hat(U_i) at every sample point.

    ``bandwidths`` may be one value for all series or ``1 + q`` values
    (response first); omitted values are chosen by leave-one-out CV.
    Denominators and final ratios whose magnitude falls below ``guard``
    (default 1/n) are replaced by +-guard and counted in ``n_clamped``.

    The sums include the evaluation point itself.  ``leave_one_out=True``
    drops it, which removes an O(1/(nh)) shrinkage of each restored value
    toward its local mean; it is off by default.
    """
    n, q = sample.n, sample.q
    guard = 1.0 / n if guard is None else float(guard)
    series = np.vstack([sample.yt[None, :], sample.xt.T])  # (1+q, n)
    means = series.mean(axis=1)

    if bandwidths is None:
        choices = select_bandwidths(sample.u, series, grid=grid, guard=guard, shared=shared_bandwidth)
    else:
        hs = np.broadcast_to(np.asarray(bandwidths, dtype=float), (1 + q,))
        if np.any(hs <= 0) or not np.all(np.isfinite(hs)):
            raise ValidationError(f"bandwidths must be positive, got {hs.tolist()}")
        choices = [BandwidthChoice(float(h), float("nan"), (float(h), float(h))) for h in hs]

    ratios = np.empty_like(series)
    n_clamped = 0
    # group series by bandwidth so each kernel matrix is built once
    for h in sorted({c.h for c in choices}):
        rows = [r for r, c in enumerate(choices) if c.h == h]
        num, den = _smooth_at(sample.u, sample.u, series[rows], h, drop_self=leave_one_out)
        den, k = _clamp(den, guard)
        n_clamped += k * len(rows)
        for j, r in enumerate(rows):
            ratios[r] = num[j] / den / means[r]
    for r in range(1 + q):
        ratios[r], k = _clamp(ratios[r], guard)
        n_clamped += k

    return DistortionFit(
        psi_hat=ratios[0],
        phi_hat=ratios[1:],
        bandwidths=list(choices),
        ybar_tilde=float(means[0]),
        xbar_tilde=means[1:].copy(),
        guard=guard,
        n_clamped=n_clamped,
        u=sample.u,
    )


def restore_sample(sample: ObservedSample, fit: DistortionFit) -> RestoredSample:
    """Divide the observed series by their estimated distortions."""
    if fit.n != sample.n or fit.phi_hat.shape != (sample.q, sample.n):
        raise ValidationError(f"distortion fit has n={fit.n}, sample has n={sample.n}")
    yhat = sample.yt / fit.psi_hat
    xhat = sample.xt / fit.phi_hat.T
    return RestoredSample(sample.u, xhat, yhat, fit)


def distortion_curve(sample: ObservedSample, fit: DistortionFit, grid) -> np.ndarray:
    """psi_hat and phi_r_hat on an arbitrary grid of u values (for plotting).

    Returns an array with columns ``u, psi, phi_1, ..., phi_q``.  The same
    clamping rule as :func:`estimate_distortions` is applied.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    series = np.vstack([sample.yt[None, :], sample.xt.T])
    means = np.concatenate([[fit.ybar_tilde], fit.xbar_tilde])
    cols = [grid]
    for r, c in enumerate(fit.bandwidths):
        num, den = _smooth_at(grid, sample.u, series[r : r + 1], c.h)
        den, _ = _clamp(den, fit.guard)
        ratio, _ = _clamp(num[0] / den / means[r], fit.guard)
        cols.append(ratio)
    return np.column_stack(cols)
