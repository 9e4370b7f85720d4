"""Regression functions f(x, beta) with analytic derivatives.

Every callable is vectorised over rows: ``x`` has shape ``(n, q)`` (a single
point of shape ``(q,)`` is promoted) and ``beta`` has shape ``(p,)``.

=============  ==========================================  ===  =====
id             f(x, beta)                                   p    q
=============  ==========================================  ===  =====
linear         b0 + sum_l b_l x_l                           q+1  q
expsat         b1 (1 - exp(-b2 x))                          2    1
power          b1 (1 + x)^b2,  x > -1                       2    1
mdrd-exp       b1 exp(-b2 x - b3 x^2) + b4                  4    1
=============  ==========================================  ===  =====
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteError, ValidationError

Array = np.ndarray
RowFn = Callable[[Array, Array], Array]

__all__ = [
    "ModelSpec",
    "DerivativeReport",
    "builtin_model",
    "check_derivatives",
    "MODEL_IDS",
]

MODEL_IDS = ("linear", "expsat", "power", "mdrd-exp")


def as_rows(x, q: int) -> Array:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, q) if x.shape[0] == q else x.reshape(-1, 1)
    if x.shape[1] != q:
        raise ValidationError(f"expected {q} predictor column(s), got {x.shape[1]}")
    return x


@dataclass(frozen=True)
class ModelSpec:
    """A regression function together with its first derivatives.

    ``d2_beta_x`` returns the ``(n, p, q)`` array of cross derivatives
    d^2 f / d beta_k d x_l; user models may leave it as ``None``.
    ``domain`` holds one open interval per predictor inside which the
    derivatives are bounded.
    """

    id: str
    p: int
    q: int
    eval: RowFn
    dbeta: RowFn
    dx: RowFn
    d2_beta_x: RowFn | None = None
    domain: tuple[tuple[float, float], ...] = ()
    bounds: tuple[tuple[float, float], ...] | None = None
    param_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.domain:
            object.__setattr__(self, "domain", tuple((-np.inf, np.inf) for _ in range(self.q)))
        if not self.param_names:
            object.__setattr__(self, "param_names", tuple(f"beta{k + 1}" for k in range(self.p)))

    def f(self, x, beta) -> Array:
        return self.eval(as_rows(x, self.q), np.asarray(beta, dtype=float))

    def grad_beta(self, x, beta) -> Array:
        return self.dbeta(as_rows(x, self.q), np.asarray(beta, dtype=float))

    def grad_x(self, x, beta) -> Array:
        return self.dx(as_rows(x, self.q), np.asarray(beta, dtype=float))

    def cross(self, x, beta) -> Array:
        if self.d2_beta_x is None:
            raise ValidationError(f"model {self.id!r} does not provide cross derivatives")
        return self.d2_beta_x(as_rows(x, self.q), np.asarray(beta, dtype=float))

    def in_domain(self, x) -> Array:
        x = as_rows(x, self.q)
        ok = np.ones(x.shape[0], dtype=bool)
        for l, (lo, hi) in enumerate(self.domain):
            ok &= (x[:, l] > lo) & (x[:, l] < hi)
        return ok

    def clip_to_bounds(self, beta: Array) -> Array:
        if self.bounds is None:
            return beta
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.clip(beta, lo, hi)


# -- built-in families -------------------------------------------------------


def _linear(q: int) -> ModelSpec:
    def f(x, b):
        return b[0] + x @ b[1:]

    def db(x, b):
        return np.column_stack([np.ones(x.shape[0]), x])

    def dx(x, b):
        return np.broadcast_to(b[1:], x.shape).copy()

    def d2(x, b):
        out = np.zeros((x.shape[0], q + 1, q))
        for l in range(q):
            out[:, l + 1, l] = 1.0
        return out

    names = ("beta0",) + tuple(f"beta{l + 1}" for l in range(q))
    return ModelSpec("linear", q + 1, q, f, db, dx, d2, param_names=names)


def _expsat() -> ModelSpec:
    def f(x, b):
        return b[0] * (1.0 - np.exp(-b[1] * x[:, 0]))

    def db(x, b):
        e = np.exp(-b[1] * x[:, 0])
        return np.column_stack([1.0 - e, b[0] * x[:, 0] * e])

    def dx(x, b):
        return (b[0] * b[1] * np.exp(-b[1] * x[:, 0]))[:, None]

    def d2(x, b):
        t = x[:, 0]
        e = np.exp(-b[1] * t)
        return np.stack([b[1] * e, b[0] * e * (1.0 - b[1] * t)], axis=1)[:, :, None]

    return ModelSpec("expsat", 2, 1, f, db, dx, d2)


def _power() -> ModelSpec:
    # the base is masked to NaN outside x > -1 so stencils leaving the domain
    # surface as non-finite values instead of complex/sign-flipped numbers
    def base(x):
        s = 1.0 + x[:, 0]
        return np.where(s > 0, s, np.nan)

    def f(x, b):
        return b[0] * base(x) ** b[1]

    def db(x, b):
        s = base(x)
        sp = s ** b[1]
        return np.column_stack([sp, b[0] * sp * np.log(s)])

    def dx(x, b):
        s = base(x)
        return (b[0] * b[1] * s ** (b[1] - 1.0))[:, None]

    def d2(x, b):
        s = base(x)
        sm = s ** (b[1] - 1.0)
        return np.stack([b[1] * sm, b[0] * sm * (1.0 + b[1] * np.log(s))], axis=1)[:, :, None]

    return ModelSpec("power", 2, 1, f, db, dx, d2, domain=((-1.0, np.inf),))


def _mdrd_exp() -> ModelSpec:
    def f(x, b):
        t = x[:, 0]
        return b[0] * np.exp(-b[1] * t - b[2] * t * t) + b[3]

    def db(x, b):
        t = x[:, 0]
        e = np.exp(-b[1] * t - b[2] * t * t)
        return np.column_stack([e, -b[0] * t * e, -b[0] * t * t * e, np.ones_like(t)])

    def dx(x, b):
        t = x[:, 0]
        e = np.exp(-b[1] * t - b[2] * t * t)
        return (-b[0] * (b[1] + 2.0 * b[2] * t) * e)[:, None]

    def d2(x, b):
        t = x[:, 0]
        e = np.exp(-b[1] * t - b[2] * t * t)
        g = b[1] + 2.0 * b[2] * t  # -d/dt of the exponent
        out = np.stack(
            [
                -g * e,
                -b[0] * e * (1.0 - t * g),
                -b[0] * e * (2.0 * t - t * t * g),
                np.zeros_like(t),
            ],
            axis=1,
        )
        return out[:, :, None]

    return ModelSpec("mdrd-exp", 4, 1, f, db, dx, d2)


def builtin_model(model_id: str, dims: int | None = None) -> ModelSpec:
    """Return one of the built-in regression families.

    ``dims`` is the predictor count for ``linear`` (default 1) and must be
    1 or omitted for the scalar-predictor families.
    """
    if model_id == "linear":
        q = 1 if dims is None else int(dims)
        if q < 1:
            raise ValidationError(f"linear model needs dims >= 1, got {dims}")
        return _linear(q)
    makers = {"expsat": _expsat, "power": _power, "mdrd-exp": _mdrd_exp}
    if model_id not in makers:
        raise ValidationError(f"unknown model id {model_id!r}; choose from {', '.join(MODEL_IDS)}")
    if dims not in (None, 1):
        raise ValidationError(f"model {model_id!r} has a single predictor, got dims={dims}")
    return makers[model_id]()


# -- derivative checks -------------------------------------------------------


@dataclass
class DerivativeReport:
    discrepancies: list[dict[str, float]]
    tol: float

    @property
    def max_discrepancy(self) -> float:
        return max((max(d.values()) for d in self.discrepancies), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tol


def _richardson(g: Callable[[float], Array], h: float) -> Array:
    d1 = (g(h) - g(-h)) / (2 * h)
    d2 = (g(h / 2) - g(-h / 2)) / h
    return (4.0 * d2 - d1) / 3.0


def _fd_gradient(fun: Callable[[Array], Array], z: Array, base_step: float) -> Array:
    """Central differences (one Richardson level) of a vector function of z."""
    cols = []
    for j in range(z.size):
        h = base_step * max(1.0, abs(z[j]))

        def g(s, j=j):
            zz = z.copy()
            zz[j] += s
            return np.atleast_1d(fun(zz))

        cols.append(_richardson(g, h))
    return np.stack(cols, axis=-1)


def _rel(a: Array, b: Array) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(a)))) if a.size else 0.0


def check_derivatives(
    model: ModelSpec,
    probes: Sequence[tuple[Sequence[float], Sequence[float]]],
    tol: float = 1e-6,
    step: float = 2.0**-13,
) -> DerivativeReport:
    """Compare analytic derivatives against finite differences at each probe.

    Raises NonFiniteError if any value in the analytic or finite-difference
    evaluation is not finite (e.g. the stencil touches a pole).
    """
    rows = []
    for x, beta in probes:
        x = np.asarray(x, dtype=float).reshape(model.q)
        beta = np.asarray(beta, dtype=float).reshape(model.p)
        with np.errstate(all="ignore"):
            gb = model.grad_beta(x, beta)[0]
            gx = model.grad_x(x, beta)[0]
            fd_b = _fd_gradient(lambda b: model.f(x, b), beta, step)[0]
            fd_x = _fd_gradient(lambda z: model.f(z, beta), x, step)[0]
            vals = [gb, gx, fd_b, fd_x]
            entry = {"dbeta": _rel(gb, fd_b), "dx": _rel(gx, fd_x)}
            if model.d2_beta_x is not None:
                cr = model.cross(x, beta)[0]
                fd_c = _fd_gradient(lambda z: model.grad_beta(z, beta)[0], x, step)
                vals += [cr, fd_c]
                entry["d2_beta_x"] = _rel(cr, fd_c)
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise NonFiniteError(f"non-finite derivative at x={x.tolist()}, beta={beta.tolist()}")
        rows.append(entry)
    return DerivativeReport(rows, tol)
