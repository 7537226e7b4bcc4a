"""Replication engine and file-level commands behind the CLI.

A JSON config describes one experiment: a kernel family with true
parameters, a square window [0, n]^2, the tuning radius (the "n/8" rule
or an explicit value), the composite likelihood order, and the
replication count and seed.  Each replicate owns the counter-based
stream (seed, replicate_index), so parallel and serial execution produce
identical records, and outputs contain no timestamps: fixed config plus
seed gives byte-identical artifacts.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimator, geometry, inference, kernels, patterns, sampler
from .errors import ConfigError, EstimationError
from .geometry import RectWindow
from .kernels import Family, KernelModel, Theta

LAPLACE_TAIL_TOL = 5e-3
LAPLACE_MODE_CAP = 2048


def default_sampler_settings(family: Family) -> tuple[float, int]:
    """(tail_tol, max_modes) adequate for each family's spectral tail."""
    if family is Family.LAPLACE:
        return LAPLACE_TAIL_TOL, LAPLACE_MODE_CAP
    return sampler.DEFAULT_TAIL_TOL, sampler.DEFAULT_MODE_CAP


def parse_model(entry, default_nu=None) -> KernelModel:
    """Model entry: 'gaussian' | 'laplace' | 'cauchy' | {'family':..., 'nu':...}."""
    if isinstance(entry, KernelModel):
        return entry
    if isinstance(entry, dict):
        fam = Family(entry["family"])
        nu = entry.get("nu", default_nu)
    else:
        fam = Family(str(entry))
        nu = default_nu
    if fam is Family.CAUCHY:
        if nu is None:
            raise ConfigError("cauchy model requires 'nu'")
        return kernels.cauchy(float(nu))
    return KernelModel(fam)


@dataclass
class ExperimentConfig:
    """Declarative description of one simulation / estimation experiment."""

    model: object = "gaussian"          # family name or {'family','nu'}
    nu: float | None = None             # cauchy shape, fixed
    dim: int = 2
    lambda0: float = 10.0
    alpha0: float = 0.1
    n: float = 5.0
    r: object = "n/8"                   # explicit radius or the rule string
    p: int = 2
    replications: int = 1
    seed: int = 0
    alpha_box: tuple | None = None      # default (alpha0/10, 10*alpha0)
    tail_tol: float | None = None       # default per family
    max_modes: int | None = None
    normalizer: str = "limiting"
    se: bool = False
    ic: bool = False
    models: list | None = None          # candidates for compare / fit --ic
    pattern: str | None = None          # input CSV for cmd_fit
    out: str | None = None

    def kernel_model(self) -> KernelModel:
        return parse_model(self.model, self.nu)

    def theta0(self) -> Theta:
        return Theta(self.lambda0, self.alpha0)

    def window(self) -> RectWindow:
        return RectWindow.square(self.n, self.dim)

    def radius(self) -> float:
        if isinstance(self.r, str):
            rule = self.r.replace(" ", "")
            if rule != "n/8":
                raise ConfigError(f"unknown radius rule {self.r!r}")
            return self.n / 8.0
        r = float(self.r)
        if r <= 0:
            raise ConfigError("radius must be positive")
        return r

    def box(self) -> tuple:
        if self.alpha_box is not None:
            lo, hi = self.alpha_box
            return (float(lo), float(hi))
        return (self.alpha0 / 10.0, self.alpha0 * 10.0)

    def sampler_settings(self) -> tuple[float, int]:
        tol, cap = default_sampler_settings(self.kernel_model().family)
        if self.tail_tol is not None:
            tol = float(self.tail_tol)
        if self.max_modes is not None:
            cap = int(self.max_modes)
        return tol, cap

    def candidate_models(self) -> list[KernelModel]:
        entries = self.models if self.models else [self.model]
        return [parse_model(e, self.nu) for e in entries]

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        theta0 = raw.pop("theta0", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if theta0 is not None:
            cfg.lambda0 = float(theta0["lambda"])
            cfg.alpha0 = float(theta0["alpha"])
        if cfg.replications < 1:
            raise ConfigError("replications must be >= 1")
        return cfg

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            val = getattr(self, name)
            if isinstance(val, tuple):
                val = list(val)
            out[name] = val
        return out


@dataclass
class ReplicationSummary:
    """Aggregated replication results; failures are counted, not dropped."""

    config: dict
    records: list
    mean: dict
    sd: dict
    failures: dict
    n_success: int

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "summary": {
                "mean": self.mean,
                "sd": self.sd,
                "n_success": self.n_success,
                "failures": self.failures,
            },
            "records": self.records,
        }


_WORKER_STATE: dict = {}


def _prepare_run(config: ExperimentConfig):
    model = config.kernel_model()
    theta0 = config.theta0()
    window = config.window()
    tol, cap = config.sampler_settings()
    approx = sampler.build_spectral_approx(model, theta0, window, tol, cap)
    return model, theta0, window, approx


def _one_replicate(idx: int) -> dict:
    config: ExperimentConfig = _WORKER_STATE["config"]
    model = _WORKER_STATE["model"]
    window = _WORKER_STATE["window"]
    approx = _WORKER_STATE["approx"]
    candidates = _WORKER_STATE["candidates"]
    r = config.radius()
    box = config.box()
    pat = sampler.sample_dpp(approx, sampler.RngStream(config.seed, idx))
    rec = {"replicate": idx, "n_points": len(pat)}
    try:
        fit = estimator.fit_two_step(model, pat, r, box, config.p, config.normalizer)
    except EstimationError as exc:
        rec["error"] = type(exc).__name__
        return rec
    rec.update(
        lambda_hat=fit.lambda_hat,
        alpha_hat=fit.alpha_hat,
        cl_value=fit.cl_value,
        score_norm=fit.score_norm,
        n_tuples=fit.n_tuples,
        boundary_hit=fit.diagnostics["boundary_hit"],
        degenerate_pairs=fit.diagnostics["degenerate_pairs"],
    )
    if config.se:
        theta_hat = Theta(max(fit.lambda_hat, 1e-12), fit.alpha_hat)
        blocks = inference.asymptotic_blocks(model, theta_hat, window, r)
        sw = inference.sandwich(blocks, window)
        rec.update(
            se_lambda=sw.se_lambda,
            se_alpha=float(sw.se_alpha[0]),
            ci_alpha=[sw.ci_alpha[0], sw.ci_alpha[1]],
            covers_alpha0=bool(sw.ci_alpha[0] <= config.alpha0 <= sw.ci_alpha[1]),
        )
    if config.ic and len(candidates) > 1:
        reports = []
        for cand in candidates:
            try:
                cfit = estimator.fit_two_step(cand, pat, r, box, config.p, config.normalizer)
                rep = inference.ic2(cand, cfit, window, r)
                reports.append(rep)
            except EstimationError as exc:
                rec.setdefault("ic_errors", {})[cand.label] = type(exc).__name__
        if reports:
            ranked = inference.compare_models(reports)
            rec["ic"] = {rep.model_id: rep.ic_value for rep in reports}
            rec["selected"] = ranked[0].model_id
    return rec


def _run_replicates(config: ExperimentConfig, threads: int = 1) -> list:
    model, theta0, window, approx = _prepare_run(config)
    _WORKER_STATE.update(
        config=config,
        model=model,
        window=window,
        approx=approx,
        candidates=config.candidate_models(),
    )
    idxs = list(range(config.replications))
    if threads <= 1:
        return [_one_replicate(i) for i in idxs]
    # fork workers inherit _WORKER_STATE; results folded in index order
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_one_replicate, idxs, chunksize=max(1, len(idxs) // (4 * threads))))


def summarize(config: ExperimentConfig, records: list) -> ReplicationSummary:
    ok = [r for r in records if "error" not in r]
    failures: dict = {}
    for r in records:
        if "error" in r:
            failures[r["error"]] = failures.get(r["error"], 0) + 1
    boundary = sum(1 for r in ok if r.get("boundary_hit"))
    if boundary:
        failures["boundary_hits"] = boundary
    if config.replications >= 5 and len(ok) < 0.8 * config.replications:
        raise EstimationError(
            f"only {len(ok)}/{config.replications} replicates succeeded (< 80%)"
        )
    mean: dict = {}
    sd: dict = {}
    for key in ("lambda_hat", "alpha_hat"):
        vals = np.array([r[key] for r in ok], dtype=float)
        mean[key] = float(vals.mean()) if len(vals) else None
        sd[key] = float(vals.std(ddof=1)) if len(vals) >= 2 else None
    return ReplicationSummary(
        config=config.to_dict(),
        records=records,
        mean=mean,
        sd=sd,
        failures=failures,
        n_success=len(ok),
    )


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_summary_csv(path: Path, summary: ReplicationSummary) -> None:
    def fmt(v):
        return "" if v is None else format(v, ".17g")

    lines = ["estimate,mean,sd"]
    lines.append(f"lambda_hat,{fmt(summary.mean['lambda_hat'])},{fmt(summary.sd['lambda_hat'])}")
    lines.append(f"alpha_hat,{fmt(summary.mean['alpha_hat'])},{fmt(summary.sd['alpha_hat'])}")
    path.write_text("\n".join(lines) + "\n")


def cmd_simulate(config: ExperimentConfig, outdir) -> list:
    """Write one pattern CSV (plus window sidecar) per replicate."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _, _, _, approx = _prepare_run(config)
    paths = []
    for i in range(config.replications):
        pat = sampler.sample_dpp(approx, sampler.RngStream(config.seed, i))
        path = outdir / f"pattern_{i:04d}.csv"
        patterns.write_csv(pat, path)
        paths.append(path)
    return paths


def cmd_fit(config: ExperimentConfig, outpath=None) -> dict:
    """Fit the configured model(s) to a pattern file; optional SEs and IC."""
    if not config.pattern:
        raise ConfigError("fit requires 'pattern' (a CSV path) in the config")
    pat = patterns.read_csv(config.pattern)
    r = config.radius()
    if config.alpha_box is None:
        raise ConfigError("fit requires an explicit 'alpha_box'")
    box = config.box()
    window = pat.window
    results = {}
    reports = []
    for model in config.candidate_models():
        fit = estimator.fit_two_step(model, pat, r, box, config.p, config.normalizer)
        entry = {
            "lambda_hat": fit.lambda_hat,
            "alpha_hat": fit.alpha_hat,
            "cl_value": fit.cl_value,
            "score_norm": fit.score_norm,
            "normalizer": fit.normalizer,
            "n_tuples": fit.n_tuples,
            "diagnostics": fit.diagnostics,
        }
        if config.se:
            blocks = inference.asymptotic_blocks(
                model, Theta(max(fit.lambda_hat, 1e-12), fit.alpha_hat), window, r
            )
            sw = inference.sandwich(blocks, window)
            entry["se_lambda"] = sw.se_lambda
            entry["se_alpha"] = float(sw.se_alpha[0])
            entry["ci_lambda"] = list(sw.ci_lambda)
            entry["ci_alpha"] = list(sw.ci_alpha)
        if config.ic:
            rep = inference.ic2(model, fit, window, r)
            entry["ic"] = {
                "cl_at_optimum": rep.cl_at_optimum,
                "penalty": rep.penalty,
                "ic_value": rep.ic_value,
                "reliable": rep.reliable,
            }
            reports.append(rep)
        results[model.label] = entry
    payload = {"config": config.to_dict(), "fits": results}
    if reports:
        payload["ranking"] = [rep.model_id for rep in inference.compare_models(reports)]
    if outpath is not None:
        _write_json(Path(outpath), payload)
    return payload


def cmd_replicate(config: ExperimentConfig, outdir=None, threads: int = 1) -> ReplicationSummary:
    """Simulate and fit R replicates; write the mean/sd table and records."""
    records = _run_replicates(config, threads)
    summary = summarize(config, records)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "summary.json", summary.to_dict())
        _write_summary_csv(outdir / "summary.csv", summary)
    return summary


def cmd_compare(config: ExperimentConfig, outdir=None, threads: int = 1) -> dict:
    """Fit every candidate model per replicate and tabulate IC selections."""
    if not config.models or len(config.models) < 1:
        raise ConfigError("compare requires a 'models' list in the config")
    config.ic = True
    records = _run_replicates(config, threads)
    counts: dict = {}
    n_ranked = 0
    for rec in records:
        sel = rec.get("selected")
        if sel is not None:
            counts[sel] = counts.get(sel, 0) + 1
            n_ranked += 1
    freq = {k: v / n_ranked for k, v in sorted(counts.items())} if n_ranked else {}
    payload = {
        "config": config.to_dict(),
        "selection_counts": dict(sorted(counts.items())),
        "selection_frequencies": freq,
        "n_ranked": n_ranked,
        "records": records,
    }
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "compare.json", payload)
        lines = ["model,selected,frequency"]
        for k in sorted(counts):
            lines.append(f"{k},{counts[k]},{format(counts[k] / n_ranked, '.17g')}")
        (outdir / "compare.csv").write_text("\n".join(lines) + "\n")
    return payload


def resolve_threads(cli_value=None) -> int:
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get("DPPFIT_THREADS")
    if env:
        return max(1, int(env))
    return 1
