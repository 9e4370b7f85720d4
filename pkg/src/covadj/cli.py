"""Command-line interface.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines using
the long flag names; flags given on the command line win over the file.
Exit status: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .efficiency import MomentSet, efficiency_map
from .errors import CovAdjError, ValidationError
from .inference import chi2_quantile, el_region_slice, wald_statistic
from .io import config_lines, fmt, read_keyvalue, read_observed_csv, write_csv
from .kernel import select_bandwidths
from .model import MODEL_IDS, builtin_model
from .nls import FitConfig
from .pipeline import analyze, coordinate_se
from .restore import distortion_curve
from .sim import MCSettings, format_table, generate, get_scenario, run_monte_carlo

log = logging.getLogger("covadj")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

# option name -> (type, default); shared between argparse and config files
COMMON = {"config": (str, None), "out": (str, ".")}
OPTIONS = {
    "fit": {
        "input": (str, None), "model": (str, None), "init": ("floats", None), "alpha": (float, 0.05),
        "bandwidths": ("floats", None), "guard": (float, None), "shared_bandwidth": ("flag", False),
        "leave_one_out": ("flag", False), "max_iter": (int, 200), "region": ("flag", False), "curve": ("flag", False),
        "resolution": (int, 41), "span": (float, 4.0),
    },
    "simulate": {"scenario": (str, "ex41"), "n": (int, 400), "seed": (int, 1), "replicate": (int, 0)},
    "coverage": {
        "scenario": (str, "ex41"), "n": ("ints", (200, 400, 600)), "reps": (int, 500), "seed": (int, 1),
        "alpha": (float, 0.05), "threads": (int, 1), "shared_bandwidth": ("flag", False), "guard": (float, None),
        "leave_one_out": ("flag", False),
    },
    "region": {
        "input": (str, None), "fit": (str, None), "pair": ("ints", (1, 2)), "alpha": (float, 0.05),
        "resolution": (int, 41), "span": (float, 4.0),
    },
    "bandwidth": {"input": (str, None), "grid_size": (int, 30), "guard": (float, None)},
    "efficiency-map": {
        "moments": (str, None), "b0": ("floats", (-3.0, 3.0, 61)), "b1": ("floats", (-3.0, 3.0, 61)),
    },
}


def _floats(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in str(s).split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _ints(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in str(s).split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


CONVERT = {"floats": _floats, "ints": _ints, "flag": lambda s: str(s).lower() in ("1", "true", "yes", "on")}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covadj", description="Covariate-adjusted nonlinear regression.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        sp = sub.add_parser(cmd)
        for name, (kind, _) in {**COMMON, **opts}.items():
            flag = "--" + name.replace("_", "-")
            if kind == "flag":
                sp.add_argument(flag, dest=name, action="store_const", const=True, default=None)
            else:
                sp.add_argument(flag, dest=name, type=CONVERT.get(kind, kind), default=None)
    return ap


def resolve(args: argparse.Namespace) -> dict:
    """Defaults < config file < command-line flags."""
    opts = {**COMMON, **OPTIONS[args.command]}
    cfg = {k: d for k, (_, d) in opts.items()}
    if args.config:
        for k, v in read_keyvalue(args.config).items():
            if k not in opts:
                raise ValidationError(f"{args.config}: unknown key {k!r} for {args.command}")
            kind = opts[k][0]
            try:
                cfg[k] = CONVERT.get(kind, kind)(v)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ValidationError(f"{args.config}: bad value for {k!r}: {exc}") from None
    for k in opts:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["command"] = args.command
    return cfg


def _need(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise ValidationError(f"--{k.replace('_', '-')} is required for {cfg['command']}")
    if "alpha" in cfg and not 0 < cfg["alpha"] < 1:
        raise ValidationError("alpha must lie in (0, 1)")


def _report_cfg(cfg: dict) -> dict:
    # the output location does not belong in the report, so reruns elsewhere compare equal
    return {k: v for k, v in cfg.items() if k not in ("config", "out")}


# -- fit -----------------------------------------------------------------------


def _model_for(model_id: str, q: int):
    return builtin_model(model_id, dims=q if model_id == "linear" else (None if q == 1 else q))


def _analysis_from_cfg(cfg, observed):
    model = _model_for(cfg["model"], observed.q)
    init = cfg["init"]
    if init is None:
        raise ValidationError("--init is required (comma-separated starting values)")
    config = FitConfig(init=tuple(init), max_iter=cfg["max_iter"])
    return analyze(observed, model, config, bandwidths=cfg["bandwidths"], guard=cfg["guard"],
                   shared_bandwidth=bool(cfg["shared_bandwidth"]), leave_one_out=bool(cfg["leave_one_out"]))


def fit_columns(an) -> tuple[list[str], list]:
    p, q = an.model.p, an.model.q
    se = coordinate_se(an)
    header = ["model", "n", "p", "q", "converged", "iterations", "rss", "sigma2_hat", "grad_norm"]
    row = [an.model.id, an.observed.n, p, q, an.fit.converged, an.fit.iterations, an.fit.rss,
           an.fit.sigma2_hat, an.fit.grad_norm]
    header += [f"beta{k + 1}" for k in range(p)] + [f"se{k + 1}" for k in range(p)]
    row += list(an.fit.beta_hat) + list(se)
    S = an.sigma.sigma if an.sigma is not None else np.full((p, p), np.nan)
    header += [f"sigma{i + 1}{j + 1}" for i in range(p) for j in range(p)]
    row += list(S.ravel())
    header += ["h_y"] + [f"h_x{r + 1}" for r in range(q)] + ["n_clamped", "el_at_fit"]
    row += [an.distortion.h_y] + an.distortion.h_x + [an.distortion.n_clamped,
                                                      an.el_at_fit.lratio if an.el_at_fit else np.nan]
    return header, row


def fit_text(an, cfg) -> str:
    lines = [f"# {ln}" for ln in config_lines(_report_cfg(cfg))]
    p = an.model.p
    se = coordinate_se(an)
    lines += [
        f"model        {an.model.id}",
        f"n            {an.observed.n}",
        f"converged    {an.fit.converged}  (iterations {an.fit.iterations}, |G_n/n| {an.fit.grad_norm:.3e})",
        f"rss          {an.fit.rss:.10g}",
        f"sigma2_hat   {an.fit.sigma2_hat:.10g}",
        "",
        f"{'param':<8}{'estimate':>18}{'std.err':>16}",
    ]
    for k in range(p):
        lines.append(f"{'beta' + str(k + 1):<8}{an.fit.beta_hat[k]:>18.10g}{se[k]:>16.6g}")
    lines.append("")
    if an.sigma is not None:
        lines.append("Sigma_hat (asymptotic covariance of sqrt(n)(beta_hat - beta))")
        for i in range(p):
            lines.append("  " + "".join(f"{v:>16.6g}" for v in an.sigma.sigma[i]))
        lines.append("")
    hs = ", ".join(f"{h:.6g}" for h in [an.distortion.h_y] + an.distortion.h_x)
    lines.append(f"bandwidths   {hs}  (response first)")
    lines.append(f"guard        {an.distortion.guard:.6g}")
    lines.append(f"n_clamped    {an.distortion.n_clamped}")
    if an.el_at_fit is not None:
        lines.append(f"el_at_fit    {an.el_at_fit.lratio:.6g}")
    return "\n".join(lines) + "\n"


def _slice_extents(center, se, pair, span):
    return tuple((center[k] - span * se[k], center[k] + span * se[k]) for k in pair)


def _write_region(out: Path, an, center, sigma, pair, alpha, resolution, span, cfg):
    p = an.model.p
    pair = tuple(k - 1 for k in pair)
    if len(pair) != 2 or not all(0 <= k < p for k in pair) or pair[0] == pair[1]:
        raise ValidationError(f"--pair must name two distinct coordinates in 1..{p}")
    se = np.sqrt(np.clip(np.diag(sigma), 0, None) / an.observed.n)
    if not np.all(se > 0):
        raise ValidationError("cannot size the region grid: zero standard error")
    ext = _slice_extents(center, se, pair, span)
    grid = el_region_slice(an.model, an.restored, center, pair, ext, (resolution, resolution), alpha)
    write_csv(out / "region.csv", ["beta_k1", "beta_k2", "lratio", "inside"], grid, _report_cfg(cfg))
    c = chi2_quantile(p, alpha)
    rows = []
    for b1, b2 in grid[:, :2]:
        beta = np.array(center, dtype=float)
        beta[pair[0]], beta[pair[1]] = b1, b2
        w = wald_statistic(center, sigma, beta, an.observed.n)
        rows.append((b1, b2, w, w <= c))
    write_csv(out / "region_wald.csv", ["beta_k1", "beta_k2", "wald", "inside"], rows, _report_cfg(cfg))


def _write_curve(out: Path, an, cfg, points: int = 101):
    u = an.observed.u
    grid = np.linspace(u.min(), u.max(), points)
    curve = distortion_curve(an.observed, an.distortion, grid)
    header = ["u", "psi"] + [f"phi{r + 1}" for r in range(an.observed.q)]
    write_csv(out / "curve_psi.csv", header, curve, _report_cfg(cfg))


def cmd_fit(cfg) -> int:
    _need(cfg, "input", "model")
    out = Path(cfg["out"])
    observed = read_observed_csv(cfg["input"])
    an = _analysis_from_cfg(cfg, observed)
    out.mkdir(parents=True, exist_ok=True)
    (out / "fit.txt").write_text(fit_text(an, cfg))
    header, row = fit_columns(an)
    write_csv(out / "fit.csv", header, [row], _report_cfg(cfg))
    if cfg["curve"]:
        _write_curve(out, an, cfg)
    if not an.fit.converged:
        log.error("fit did not converge (|G_n/n| = %.3g)", an.fit.grad_norm)
        return EXIT_NUMERICAL
    if cfg["region"] and an.model.p >= 2:
        _write_region(out, an, an.fit.beta_hat, an.sigma.sigma, (1, 2), cfg["alpha"], cfg["resolution"],
                      cfg["span"], cfg)
    print(fit_text(an, cfg), end="")
    return EXIT_OK


def _read_fit_csv(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{path}: no such file")
    meta, body = {}, []
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        elif line.strip():
            body.append(line.split(","))
    if len(body) != 2:
        raise ValidationError(f"{path}: expected a header and one data row")
    return meta, dict(zip(body[0], body[1]))


def cmd_region(cfg) -> int:
    _need(cfg, "input", "fit")
    meta, row = _read_fit_csv(cfg["fit"])
    fit_cfg = {k: d for k, (_, d) in OPTIONS["fit"].items()}
    for k, v in meta.items():
        if k in fit_cfg:
            kind = OPTIONS["fit"][k][0]
            fit_cfg[k] = CONVERT.get(kind, kind)(v)
    fit_cfg["command"] = "fit"
    p = int(row["p"])
    observed = read_observed_csv(cfg["input"])
    # recompute restoration with the saved bandwidths so the grid matches the saved fit
    q = int(row["q"])
    fit_cfg["bandwidths"] = tuple(float(row[k]) for k in ["h_y"] + [f"h_x{r + 1}" for r in range(q)])
    an = _analysis_from_cfg(fit_cfg, observed)
    center = np.array([float(row[f"beta{k + 1}"]) for k in range(p)])
    sigma = np.array([float(row[f"sigma{i + 1}{j + 1}"]) for i in range(p) for j in range(p)]).reshape(p, p)
    if not np.all(np.isfinite(sigma)):
        raise ValidationError("saved fit has no covariance (did it converge?)")
    out = Path(cfg["out"])
    _write_region(out, an, center, sigma, tuple(cfg["pair"]), cfg["alpha"], cfg["resolution"], cfg["span"], cfg)
    return EXIT_OK


# -- simulation ----------------------------------------------------------------


def cmd_simulate(cfg) -> int:
    sc = get_scenario(cfg["scenario"])
    lat = generate(sc, cfg["n"], cfg["seed"], cfg["replicate"])
    q = sc.model.q
    out = Path(cfg["out"])
    xs = [f"x{r + 1}" for r in range(q)]
    write_csv(out / "latent.csv", ["u"] + xs + ["eps", "y", "psi"] + [f"phi{r + 1}" for r in range(q)],
              np.column_stack([lat.u, lat.x, lat.eps, lat.y, lat.psi, lat.phi]), _report_cfg(cfg))
    write_csv(out / "observed.csv", ["u"] + xs + ["y"], np.column_stack([lat.u, lat.xt, lat.yt]),
              _report_cfg(cfg))
    return EXIT_OK


def cmd_coverage(cfg) -> int:
    if cfg["reps"] < 1:
        raise ValidationError("--reps must be >= 1")
    _need(cfg)
    settings = MCSettings(shared_bandwidth=bool(cfg["shared_bandwidth"]), guard=cfg["guard"],
                          leave_one_out=bool(cfg["leave_one_out"]), threads=max(1, cfg["threads"]))
    # threads do not change results; keep them out of the embedded config
    rcfg = {k: v for k, v in _report_cfg(cfg).items() if k != "threads"}
    reports = []
    for n in cfg["n"]:
        rep = run_monte_carlo(cfg["scenario"], n, cfg["reps"], cfg["seed"], cfg["alpha"], settings)
        log.info("n=%d done in %.1fs", n, rep.wall_time)
        reports.append(rep)
    out = Path(cfg["out"])
    write_csv(out / "mc_report.csv", reports[0].header()[:-1], [r.row()[:-1] for r in reports], rcfg)
    text = "\n".join(f"# {ln}" for ln in config_lines(rcfg)) + "\n" + format_table(reports)
    (out / "mc_report.txt").write_text(text)
    print(format_table(reports), end="")
    return EXIT_OK


# -- diagnostics -----------------------------------------------------------------


def cmd_bandwidth(cfg) -> int:
    _need(cfg, "input")
    observed = read_observed_csv(cfg["input"])
    from .kernel import default_grid

    grid = default_grid(observed.u, cfg["grid_size"])
    series = np.vstack([observed.yt[None, :], observed.xt.T])
    choices = select_bandwidths(observed.u, series, grid=grid, guard=cfg["guard"])
    names = ["y"] + [f"x{r + 1}" for r in range(observed.q)]
    rows = []
    for name, ch in zip(names, choices):
        for h, c, s in zip(ch.grid, ch.criteria, ch.skipped):
            rows.append((name, h, c, int(s), h == ch.h))
    write_csv(Path(cfg["out"]) / "bandwidth.csv", ["series", "h", "cv", "skipped", "chosen"], rows, _report_cfg(cfg))
    for name, ch in zip(names, choices):
        lo, hi = ch.admissible_range
        print(f"{name:<4} h = {ch.h:.6g}  CV = {ch.criterion_value:.6g}  range [{lo:.4g}, {hi:.4g}]")
    return EXIT_OK


def read_moments(path) -> MomentSet:
    kv = read_keyvalue(path)
    try:
        ex = _floats(kv["ex"])
        q = len(ex)
        if "exx" in kv:
            inner = np.array(_floats(kv["exx"])).reshape(q, q)
        else:
            inner = np.diag(_floats(kv["ex2"])) if q == 1 else None
            if inner is None:
                raise ValidationError("give exx (row-major E[X_s X_k]) when q > 1")
        L = np.empty((q + 1, q + 1))
        L[0, 0] = 1.0
        L[0, 1:] = L[1:, 0] = ex
        L[1:, 1:] = inner
        beta = _floats(kv.get("beta", ",".join(["1"] * (q + 1))))
        return MomentSet(
            q, ex, L, float(kv["var_psi"]), _floats(kv["e_psiphi"]), float(kv["sigma2"]), beta,
            _floats(kv["var_phi"]) if "var_phi" in kv else None, mode=kv.get("mode", "analytic"),
        )
    except KeyError as exc:
        raise ValidationError(f"{path}: missing key {exc.args[0]!r}") from None
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise ValidationError(f"{path}: {exc}") from None


def cmd_efficiency_map(cfg) -> int:
    _need(cfg, "moments")
    m = read_moments(cfg["moments"])
    grids = []
    for key in ("b0", "b1"):
        spec = cfg[key]
        if len(spec) != 3 or spec[2] < 2:
            raise ValidationError(f"--{key} must be lo,hi,count with count >= 2")
        grids.append(np.linspace(spec[0], spec[1], int(spec[2])))
    rows = efficiency_map(m, *grids)
    write_csv(Path(cfg["out"]) / "efficiency_map.csv", ["beta0", "beta1", "label"], rows,
              {**_report_cfg(cfg), "moment_mode": m.mode})
    counts = {lab: sum(r[2] == lab for r in rows) for lab in ("R1", "R2", "R3", "R4", "NA")}
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit, "simulate": cmd_simulate, "coverage": cmd_coverage, "region": cmd_region,
    "bandwidth": cmd_bandwidth, "efficiency-map": cmd_efficiency_map,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve(args)
        if cfg.get("model") is not None and cfg["model"] not in MODEL_IDS:
            raise ValidationError(f"unknown model {cfg['model']!r}; choose from {', '.join(MODEL_IDS)}")
        return COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CovAdjError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
