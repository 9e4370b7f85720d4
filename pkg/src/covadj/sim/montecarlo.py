"""Monte Carlo harness: MSE and coverage of EL and Wald regions."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import CovAdjError, ValidationError
from ..inference import chi2_quantile, el_ratio, wald_statistic
from ..nls import FitConfig
from ..pipeline import analyze
from .generate import generate
from .scenarios import Scenario, get_scenario

__all__ = ["MCSettings", "ReplicateResult", "MCReport", "run_replicate", "run_monte_carlo"]


@dataclass(frozen=True)
class MCSettings:
    shared_bandwidth: bool = False
    guard: float | None = None
    bandwidths: tuple[float, ...] | None = None
    init: tuple[float, ...] | None = None  # defaults to the scenario's documented start
    max_iter: int = 200
    leave_one_out: bool = False
    threads: int = 1


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    ok: bool
    reason: str
    beta_hat: np.ndarray
    el_lratio: float
    wald_stat: float
    n_clamped: int
    h_y: float


@dataclass
class MCReport:
    scenario: str
    n: int
    replicates: int
    seed: int
    alpha: float
    beta0: np.ndarray
    mse: np.ndarray
    coverage_el: float
    coverage_wald: float
    failures: int
    wall_time: float
    results: list[ReplicateResult] = field(repr=False, default_factory=list)

    @property
    def successes(self) -> int:
        return self.replicates - self.failures

    @property
    def el_lratios(self) -> np.ndarray:
        return np.array([r.el_lratio for r in self.results if r.ok])

    @property
    def wald_stats(self) -> np.ndarray:
        return np.array([r.wald_stat for r in self.results if r.ok])

    def header(self) -> list[str]:
        p = len(self.beta0)
        return (["scenario", "n", "replicates", "seed", "alpha"]
                + [f"mse_beta{k + 1}" for k in range(p)]
                + ["coverage_el", "coverage_wald", "failures", "wall_time_s"])

    def row(self) -> list:
        return ([self.scenario, self.n, self.replicates, self.seed, self.alpha]
                + [float(v) for v in self.mse]
                + [self.coverage_el, self.coverage_wald, self.failures, round(self.wall_time, 3)])


def run_replicate(scenario: Scenario, n: int, seed: int, r: int, alpha: float, settings: MCSettings) -> ReplicateResult:
    p = scenario.model.p
    nan = np.full(p, np.nan)
    beta0 = np.asarray(scenario.beta0)
    try:
        latent = generate(scenario, n, seed, r)
        cfg = FitConfig(init=tuple(settings.init or scenario.init), max_iter=settings.max_iter)
        an = analyze(latent.observed(), scenario.model, cfg, bandwidths=settings.bandwidths,
                     guard=settings.guard, shared_bandwidth=settings.shared_bandwidth,
                     leave_one_out=settings.leave_one_out)
        if not an.fit.converged:
            return ReplicateResult(r, False, "nls-not-converged", an.fit.beta_hat, np.nan, np.nan,
                                   an.distortion.n_clamped, an.distortion.h_y)
        el = el_ratio(scenario.model, an.restored, beta0)
        w = wald_statistic(an.fit.beta_hat, an.sigma.sigma, beta0, n)
        return ReplicateResult(r, True, "", an.fit.beta_hat, el.lratio, w, an.distortion.n_clamped, an.distortion.h_y)
    except CovAdjError as exc:
        return ReplicateResult(r, False, type(exc).__name__, nan, np.nan, np.nan, -1, np.nan)


def _worker(args):
    name_or_scenario, n, seed, r, alpha, settings = args
    sc = get_scenario(name_or_scenario) if isinstance(name_or_scenario, str) else name_or_scenario
    return run_replicate(sc, n, seed, r, alpha, settings)


def run_monte_carlo(scenario: Scenario | str, n: int, replicates: int, seed: int,
                    alpha: float = 0.05, settings: MCSettings | None = None) -> MCReport:
    """Replicate r uses streams keyed by (seed, r) only; results do not depend on ``threads``."""
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    settings = settings or MCSettings()
    sc = get_scenario(scenario) if isinstance(scenario, str) else scenario
    t0 = time.perf_counter()
    # ship the scenario by name when possible (lambdas in scenarios do not pickle)
    ref = scenario if isinstance(scenario, str) else sc
    jobs = [(ref, n, seed, r, alpha, settings) for r in range(replicates)]
    if settings.threads > 1 and isinstance(ref, str):
        with ProcessPoolExecutor(max_workers=settings.threads) as pool:
            results = list(pool.map(_worker, jobs, chunksize=max(1, replicates // (4 * settings.threads))))
    else:
        results = [run_replicate(sc, n, seed, r, alpha, settings) for r in range(replicates)]
    wall = time.perf_counter() - t0
    return summarize(sc, n, seed, alpha, results, wall)


def summarize(sc: Scenario, n: int, seed: int, alpha: float, results: list[ReplicateResult], wall: float) -> MCReport:
    beta0 = np.asarray(sc.beta0, dtype=float)
    ok = [r for r in results if r.ok]
    c = chi2_quantile(len(beta0), alpha)
    if ok:
        B = np.array([r.beta_hat for r in ok])
        mse = np.mean((B - beta0) ** 2, axis=0)
        cov_el = float(np.mean([r.el_lratio <= c for r in ok]))
        cov_w = float(np.mean([r.wald_stat <= c for r in ok]))
    else:
        mse = np.full(len(beta0), np.nan)
        cov_el = cov_w = float("nan")
    return MCReport(sc.id, n, len(results), seed, alpha, beta0, mse, cov_el, cov_w,
                    len(results) - len(ok), wall, results)


def format_table(reports: list[MCReport]) -> str:
    """Aligned text: one column per sample size, rows for coverage and MSE."""
    if not reports:
        return ""
    p = len(reports[0].beta0)
    labels = (["Empirical likelihood", "Normal approximation"]
              + [f"MSE(beta{k + 1})" for k in range(p)] + ["failures"])
    cols = []
    for rep in reports:
        cols.append([f"{rep.coverage_el:.4f}", f"{rep.coverage_wald:.4f}"]
                    + [f"{v:.4f}" for v in rep.mse] + [str(rep.failures)])
    w0 = max(len(s) for s in labels) + 2
    lines = [f"{'scenario ' + reports[0].scenario:<{w0}}" + "".join(f"{'n=' + str(r.n):>10}" for r in reports)]
    for i, lab in enumerate(labels):
        lines.append(f"{lab:<{w0}}" + "".join(f"{col[i]:>10}" for col in cols))
    return "\n".join(lines) + "\n"
