"""Efficiency of restoration vs transformation-based estimators in the linear model.

Linear model Y = b0 + sum_k b_k X_k + e with distortions psi (response) and
phi_k (predictors).  Index 0 is the intercept (X_0 = 1, phi_0 = 1).

Expectations of centred and distortion-difference terms are expanded into raw
moments using independence of (X, e) and U and E[psi] = E[phi_k] = 1:

    E[(Y~ - Y)^2]            = Var[psi] E[Y^2]
    E[(Y~ - Y)(X~_k - X_k)]  = (E[psi phi_k] - 1) E[Y X_k]
    E[(X~_k - X_k)^2]        = Var[phi_k] E[X_k^2]
    E[Y] = b' L_0,  E[Y^2] = b' L b + s2,  E[Y X_k] = b' L_k
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, SingularMatrixError, ValidationError

__all__ = [
    "MomentSet",
    "variance_v1",
    "variance_v2",
    "ck_matrix",
    "single_predictor_entries",
    "KReport",
    "Verdict",
    "efficiency_verdict",
    "region_label",
    "efficiency_map",
    "moments_from_sample",
]


@dataclass(frozen=True)
class MomentSet:
    """Population moments for the q-predictor linear model.

    ``exx`` is the (q+1)x(q+1) matrix L(s, k) = E[X_s X_k] with X_0 = 1.
    ``var_phi`` is not needed by the comparison itself (it cancels) but the
    two variances individually depend on it.
    """

    q: int
    ex: np.ndarray
    exx: np.ndarray
    var_psi: float
    e_psiphi: np.ndarray
    sigma2: float
    beta: np.ndarray
    var_phi: np.ndarray = None  # type: ignore[assignment]
    e_psi2: float | None = None
    mode: str = "analytic"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        ex = np.atleast_1d(np.asarray(self.ex, dtype=float))
        L = np.atleast_2d(np.asarray(self.exx, dtype=float))
        e_pp = np.atleast_1d(np.asarray(self.e_psiphi, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        vphi = np.zeros(self.q) if self.var_phi is None else np.atleast_1d(np.asarray(self.var_phi, dtype=float))
        q = self.q
        if q < 1:
            raise ValidationError("q must be >= 1")
        for name, arr, size in (("ex", ex, q), ("e_psiphi", e_pp, q), ("var_phi", vphi, q), ("beta", beta, q + 1)):
            if arr.shape != (size,):
                raise ValidationError(f"{name} must have length {size}, got {arr.shape}")
        if L.shape != (q + 1, q + 1):
            raise ValidationError(f"exx must be {(q + 1, q + 1)}, got {L.shape}")
        if not np.allclose(L, L.T, rtol=0, atol=1e-12 * max(1.0, np.abs(L).max())):
            raise ValidationError("exx must be symmetric")
        if abs(L[0, 0] - 1.0) > 1e-12 or not np.allclose(L[0, 1:], ex, rtol=1e-12, atol=1e-12):
            raise ValidationError("exx must satisfy L(0,0) = 1 and L(0,k) = E[X_k]")
        try:
            np.linalg.cholesky(L)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("moment matrix Lambda is not positive definite") from exc
        if self.var_psi < 0 or np.any(vphi < 0) or self.sigma2 < 0:
            raise ValidationError("variances must be nonnegative")
        if np.any(ex == 0):
            raise ValidationError("E[X_k] must be nonzero")
        e_psi2 = self.var_psi + 1.0
        if self.e_psi2 is not None and abs(self.e_psi2 - e_psi2) > 1e-12 * max(1.0, e_psi2):
            raise ValidationError(f"e_psi2 = {self.e_psi2} contradicts var_psi + 1 = {e_psi2}")
        object.__setattr__(self, "ex", ex)
        object.__setattr__(self, "exx", L)
        object.__setattr__(self, "e_psiphi", e_pp)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "var_phi", vphi)
        object.__setattr__(self, "e_psi2", e_psi2)

    @classmethod
    def linear1(cls, ex, ex2, var_psi, e_psiphi, sigma2, beta, var_phi=0.0, mode="analytic") -> "MomentSet":
        """Single-predictor constructor from E[X] and E[X^2]."""
        L = np.array([[1.0, ex], [ex, ex2]])
        return cls(1, [ex], L, var_psi, [e_psiphi], sigma2, beta, [var_phi], mode=mode)

    def with_beta(self, beta) -> "MomentSet":
        return MomentSet(self.q, self.ex, self.exx, self.var_psi, self.e_psiphi, self.sigma2,
                         beta, self.var_phi, None, self.mode)

    # padded per-index quantities with the intercept conventions
    def _ex_full(self):
        return np.concatenate([[1.0], self.ex])

    def _epp_full(self):
        return np.concatenate([[1.0], self.e_psiphi])

    def _vphi_full(self):
        return np.concatenate([[0.0], self.var_phi])

    @property
    def lambda_inv(self) -> np.ndarray:
        return np.linalg.inv(self.exx)

    @property
    def ey(self) -> float:
        return float(self.beta @ self.exx[:, 0])

    @property
    def ey2(self) -> float:
        return float(self.beta @ self.exx @ self.beta + self.sigma2)


def _check_k(m: MomentSet, k: int):
    if not 0 <= k <= m.q:
        raise ValidationError(f"k must be in 0..{m.q}, got {k}")


def _check_ey(m: MomentSet) -> float:
    ey = m.ey
    if abs(ey) < 1e-14:
        raise ValidationError("E[Y] = 0 at this beta; the restoration variances are undefined")
    return ey


def variance_v1(m: MomentSet, k: int) -> float:
    """Asymptotic variance of sqrt(n)(b^_k - b_k) for the restoration estimator."""
    _check_k(m, k)
    ey = _check_ey(m)
    L = m.exx
    ex = m._ex_full()[k]
    exk2 = L[k, k]
    eyxk = float(m.beta @ L[:, k])
    bk2 = m.beta[k] ** 2
    base = m.sigma2 * m.lambda_inv[k, k]
    if k == 0:
        # X_0 - E[X_0] = 0 and X~_0 - X_0 = 0
        a = m.ey2 / ey**2 - 1.0
        b = m.var_psi * m.ey2 / ey**2
        return base + 0.25 * bk2 * a + bk2 * b + m.sigma2 * m.beta[0] / ey
    a = m.ey2 / ey**2 - 2.0 * eyxk / (ey * ex) + exk2 / ex**2
    b = (m.var_psi * m.ey2 / ey**2
         - 2.0 * (m.e_psiphi[k - 1] - 1.0) * eyxk / (ey * ex)
         + m.var_phi[k - 1] * exk2 / ex**2)
    return base + 0.25 * bk2 * a + bk2 * b


def variance_v2(m: MomentSet, k: int) -> float:
    """Asymptotic variance of the transformation-based estimator."""
    _check_k(m, k)
    base = m.sigma2 * m.lambda_inv[k, k]
    ex = m._ex_full()[k]
    var_diff = m.var_psi + m._vphi_full()[k] - 2.0 * (m._epp_full()[k] - 1.0)
    return base * (1.0 + m.var_psi) + m.beta[k] ** 2 * m.exx[k, k] / ex**2 * var_diff


def ck_matrix(m: MomentSet, k: int) -> np.ndarray:
    """The (q+1)x(q+1) matrix whose quadratic form decides V1 <= V2 for coordinate k."""
    _check_k(m, k)
    L = m.exx
    Li = m.lambda_inv
    L0 = L[:, 0]
    Lk = L[:, k]
    ex = m._ex_full()[k]
    epp = m._epp_full()[k]
    e2 = m.e_psi2
    s2 = m.sigma2
    bk2 = m.beta[k] ** 2
    ek = np.zeros(m.q + 1)
    ek[k] = 1.0
    C = ((-3.0 - 4.0 * e2 + 8.0 * epp) * L[k, k] / ex**2 * bk2 - 4.0 * s2 * m.var_psi * Li[k, k]) * np.outer(L0, L0)
    C = C + s2 * (-3.0 + 4.0 * e2) * np.outer(ek, ek)
    if k == 0:
        C = C + 2.0 * s2 * (np.outer(ek, Lk) + np.outer(Lk, ek))
    C = C + (3.0 - 4.0 * epp) / ex * bk2 * (np.outer(Lk, L0) + np.outer(L0, Lk))
    C = C + (-3.0 + 4.0 * e2) * bk2 * L
    return 0.5 * (C + C.T)


def single_predictor_entries(m: MomentSet) -> dict[str, float]:
    """Closed-form single-predictor entries of C_0 and C_1.

    Keys use 1-based (row, col) labels, e.g. ``C0_11``.  Kept separate from
    :func:`ck_matrix` so the general assembly can be cross-checked against it.
    """
    if m.q != 1:
        raise ValidationError("worked-example entries exist for q = 1 only")
    ex, ex2 = m.ex[0], m.exx[1, 1]
    vx = ex2 - ex**2
    vpsi, s2 = m.var_psi, m.sigma2
    e2, epp = m.e_psi2, m.e_psiphi[0]
    b0, b1 = m.beta
    return {
        "C0_11": s2 * (5.0 - 4.0 * vpsi * ex**2 / vx),
        "C0_12": s2 * ex * (2.0 - 4.0 * vpsi * ex2 / vx),
        "C0_22": b0**2 * vx * (4.0 * vpsi + 1.0),
        "C1_11": b1**2 * (-3.0 - 4.0 * e2 + 8.0 * epp) * vx / ex**2 - 4.0 * s2 * vpsi / vx,
        "C1_12": -4.0 * b1**2 * (e2 - epp) * vx / ex - 4.0 * s2 * vpsi * ex / vx,
        "C1_22": s2 * (1.0 - 4.0 * vpsi * ex**2 / vx),
    }


@dataclass(frozen=True)
class KReport:
    k: int
    quad_form: float
    v1: float
    v2: float
    holds: bool  # restoration estimator at least as efficient for coordinate k
    lambda_min: float


@dataclass(frozen=True)
class Verdict:
    reports: tuple[KReport, ...]
    label: str | None
    mode: str

    @property
    def holds_all(self) -> bool:
        return all(r.holds for r in self.reports)


def region_label(holds0: bool, holds1: bool) -> str:
    """R1 both, R2 slope only, R3 intercept only, R4 neither."""
    if holds0 and holds1:
        return "R1"
    if holds1:
        return "R2"
    if holds0:
        return "R3"
    return "R4"


def efficiency_verdict(m: MomentSet, tol: float = 1e-8) -> Verdict:
    """Quadratic-form test per coordinate, cross-checked against V1 vs V2.

    Raises ConsistencyError if b'C_k b and 4 E[Y]^2 (V1 - V2) disagree
    beyond ``tol`` relative to the magnitudes involved.
    """
    ey = _check_ey(m)
    reports = []
    for k in range(m.q + 1):
        C = ck_matrix(m, k)
        qf = float(m.beta @ C @ m.beta)
        v1, v2 = variance_v1(m, k), variance_v2(m, k)
        direct = 4.0 * ey**2 * (v1 - v2)
        scale = 1.0 + 4.0 * ey**2 * (abs(v1) + abs(v2)) + abs(m.beta) @ np.abs(C) @ abs(m.beta)
        if abs(qf - direct) > tol * scale:
            raise ConsistencyError(
                f"k={k}: quadratic form {qf!r} disagrees with 4E[Y]^2(V1-V2) = {direct!r}"
            )
        reports.append(KReport(k, qf, v1, v2, qf <= 0.0, float(np.linalg.eigvalsh(C)[0])))
    label = region_label(reports[0].holds, reports[1].holds) if m.q == 1 else None
    return Verdict(tuple(reports), label, m.mode)


def efficiency_map(m: MomentSet, b0_grid, b1_grid) -> list[tuple[float, float, str]]:
    """Label every (b0, b1) on a grid; points with E[Y] = 0 get ``NA``."""
    if m.q != 1:
        raise ValidationError("efficiency maps are defined for q = 1")
    rows = []
    for b0 in np.asarray(b0_grid, dtype=float):
        for b1 in np.asarray(b1_grid, dtype=float):
            mb = m.with_beta([b0, b1])
            try:
                label = efficiency_verdict(mb).label
            except ValidationError:
                label = "NA"
            rows.append((float(b0), float(b1), label))
    return rows


def moments_from_sample(x, psi, phi, sigma2, beta) -> MomentSet:
    """Empirical MomentSet from draws of X (n, q), psi(U) (n,), phi(U) (n, q)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, q = x.shape
    phi = np.asarray(phi, dtype=float).reshape(n, q)
    psi = np.asarray(psi, dtype=float)
    x1 = np.hstack([np.ones((n, 1)), x])
    L = x1.T @ x1 / n
    L[0, 1:] = L[1:, 0] = x.mean(axis=0)
    L[0, 0] = 1.0
    return MomentSet(
        q, x.mean(axis=0), 0.5 * (L + L.T), float(psi.var()), (psi[:, None] * phi).mean(axis=0),
        sigma2, beta, phi.var(axis=0), mode="empirical",
    )
