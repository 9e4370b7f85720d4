"""Plug-in asymptotic covariance of beta_hat and the normal-approximation region.

    Sigma = s2 L^-1 + (1/4) L^-1 Omega L^-1 + L^-1 Gamma L^-1
            + s2 L^-1 (eta zeta^T + zeta eta^T)/2 L^-1

Population moments are replaced by sample averages over the restored data
(X -> X^_i, Y -> Y^_i, beta0 -> beta_hat); the unobservable distortion
differences (Y~ - Y), (X~_l - X_l) become (Y~_i - Y^_i), (X~_li - X^_li).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingularMatrixError, ValidationError
from ..model import ModelSpec
from ..nls import FitResult
from ..restore import RestoredSample
from .chi2 import chi2_quantile

__all__ = ["SigmaHat", "sigma_hat", "sigma_from_moments", "wald_region", "wald_statistic"]


@dataclass
class SigmaHat:
    lambda_mat: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray
    omega: np.ndarray
    gamma_mat: np.ndarray
    sigma2: float
    sigma: np.ndarray

    @property
    def components(self) -> dict[str, np.ndarray]:
        """The four additive pieces of Sigma, keyed ``base, A, B, C``."""
        return _assemble(self.lambda_mat, self.zeta, self.eta, self.omega, self.gamma_mat, self.sigma2)[1]


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _assemble(L, zeta, eta, omega, gamma, s2):
    try:
        np.linalg.cholesky(L)
        Li = np.linalg.inv(L)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("Lambda is not positive definite") from exc
    # a Jacobian that underflows at a far-off stationary point leaves L numerically singular
    if not np.all(np.isfinite(Li)) or np.linalg.cond(L) > 1.0 / np.finfo(float).eps:
        raise SingularMatrixError("Lambda is numerically singular")
    parts = {
        "base": s2 * Li,
        "A": 0.25 * Li @ omega @ Li,
        "B": Li @ gamma @ Li,
        "C": s2 * Li @ (0.5 * np.outer(eta, zeta) + 0.5 * np.outer(zeta, eta)) @ Li,
    }
    total = _sym(sum(parts.values()))
    return total, parts


def _contrast_rows(dy, dx, eta, nu):
    """Per-observation p-vectors  dy_i * eta - sum_l dx_li * nu[l]."""
    return dy[:, None] * eta[None, :] - dx @ nu


def sigma_from_moments(x, y, yt, xt, model: ModelSpec, beta, s2: float) -> SigmaHat:
    """Assemble Sigma from (x, y) standing in for the latent variables.

    Shared by the plug-in estimator (x, y = restored data) and by tests that
    feed true latent data.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    J = model.dbeta(x, beta)  # (n, p)
    fx = model.dx(x, beta)  # (n, q)
    L = _sym(J.T @ J / n)
    zeta = J.mean(axis=0)
    ey = y.mean()
    ex = x.mean(axis=0)
    eta = (y[:, None] * J).mean(axis=0) / ey
    # nu[l, k] = E[X_l f_{x_l} f_{beta_k}] / E[X_l]
    nu = np.einsum("il,il,ik->lk", x, fx, J) / n / ex[:, None]
    a = _contrast_rows(y - ey, x - ex, eta, nu)
    b = _contrast_rows(np.asarray(yt) - y, np.asarray(xt) - x, eta, nu)
    omega = _sym(a.T @ a / n)
    gamma = _sym(b.T @ b / n)
    total, _ = _assemble(L, zeta, eta, omega, gamma, s2)
    return SigmaHat(L, zeta, eta, omega, gamma, float(s2), total)


def sigma_hat(model: ModelSpec, restored: RestoredSample, observed, fit: FitResult) -> SigmaHat:
    """Plug-in estimate of the asymptotic covariance of sqrt(n)(beta_hat - beta0).

    ``observed`` supplies the distorted series ``yt`` and ``xt``.
    """
    if not fit.converged:
        raise ValidationError("sigma_hat needs a converged fit")
    xt = np.asarray(observed.xt, dtype=float).reshape(restored.n, -1)
    return sigma_from_moments(restored.xhat, restored.yhat, observed.yt, xt, model, fit.beta_hat, fit.sigma2_hat)


def wald_statistic(beta_hat, sigma: np.ndarray, beta, n: int) -> float:
    d = np.asarray(beta_hat, dtype=float) - np.asarray(beta, dtype=float)
    S = _sym(np.atleast_2d(np.asarray(sigma, dtype=float)))
    try:
        c = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("Sigma_hat is singular or indefinite") from exc
    z = np.linalg.solve(c, d)
    return float(n * z @ z)


def wald_region(fit: FitResult, sigma: SigmaHat, beta, alpha: float = 0.05) -> tuple[float, bool]:
    """n (beta_hat - beta)^T Sigma^-1 (beta_hat - beta) and whether it is <= c_alpha."""
    stat = wald_statistic(fit.beta_hat, sigma.sigma, beta, fit.n)
    return stat, stat <= chi2_quantile(len(fit.beta_hat), alpha)
