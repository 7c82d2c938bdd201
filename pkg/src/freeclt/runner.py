"""Declarative experiment runner: config parsing, orchestration, manifests.

Configs are JSON trees with a documented, versioned schema (see README).
Parsing reports every violation, not just the first.  Runs are deterministic:
per-replica work is written into pre-indexed slots and reduced in index
order, so the emitted CSV bytes do not depend on the thread count.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cltlab import (
    berry_esseen_sweep,
    estimate_radius_stationary,
    estimate_radius_ustat,
    kargin_condition_check,
    normalized_sum,
    rate_fit,
    single_coordinate_radius,
    ustat_sum,
)
from .ensembles import EnsembleSpec, GRAPHONS, KINDS, sample
from .errors import ConfigError, NoiseFloorError
from .mixing import PROFILE_KINDS, default_dictionary, frozen_l2_norm, mixing_profile
from .spectral import ComplexPoint, SemicircleLaw
from . import svgplot

EXPERIMENTS = ("spectrum", "berry", "mixing", "ustat", "radius", "kargin")

_TOP_KEYS = {
    "version",
    "experiment",
    "ensemble",
    "n_list",
    "b_list",
    "gamma_grid",
    "nu_list",
    "replicas",
    "seed",
    "radius_lag",
    "window",
    "kinds",
    "out",
}
_ENSEMBLE_KEYS = {"kind", "dim", "extent", "seed", "rho", "d", "k_n", "graphon_id"}
_GAMMA_KEYS = {"x", "nu"}


@dataclass
class ExperimentConfig:
    experiment: str
    ensemble: EnsembleSpec
    replicas: int
    seed: int
    out: str = "out"
    n_list: list = field(default_factory=list)
    b_list: list = field(default_factory=list)
    gamma_grid: list = field(default_factory=list)
    nu_list: list = field(default_factory=list)
    kinds: list = field(default_factory=list)
    radius_lag: int = 0
    window: int | None = None


def _no_duplicates(pairs):
    seen = set()
    out = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigError([f"duplicate key {k!r}"])
        seen.add(k)
        out[k] = v
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; aggregate all violations."""
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates)
    except ConfigError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON: {exc}"])
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    for key in raw:
        if key not in _TOP_KEYS:
            errors.append(f"unknown key {key!r}")
    if raw.get("version") != 1:
        errors.append("version: must be 1")
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {EXPERIMENTS}")

    spec = None
    ens = raw.get("ensemble")
    if not isinstance(ens, dict):
        errors.append("ensemble: required object")
    else:
        for key in ens:
            if key not in _ENSEMBLE_KEYS:
                errors.append(f"ensemble: unknown key {key!r}")
        if ens.get("kind") not in KINDS:
            errors.append(f"ensemble.kind: must be one of {KINDS}")
        if ens.get("graphon_id") is not None and ens["graphon_id"] not in GRAPHONS:
            errors.append(f"ensemble.graphon_id: must be one of {GRAPHONS}")
        try:
            spec = EnsembleSpec(
                kind=ens.get("kind", "GUE"),
                dim=int(ens.get("dim", 0)),
                extent=int(ens.get("extent", 0)),
                seed=int(ens.get("seed", raw.get("seed", 0))),
                rho=float(ens.get("rho", 0.0)),
                d=int(ens.get("d", 1)),
                k_n=ens.get("k_n"),
                graphon_id=ens.get("graphon_id"),
            )
        except (ValueError, TypeError) as exc:
            errors.append(f"ensemble: {exc}")

    replicas = raw.get("replicas")
    if not isinstance(replicas, int) or replicas < 1:
        errors.append("replicas: must be a positive integer")
    seed = raw.get("seed", ens.get("seed", 0) if isinstance(ens, dict) else 0)
    if not isinstance(seed, int) or seed < 0:
        errors.append("seed: must be a nonnegative integer")

    gamma_grid = []
    for i, g in enumerate(raw.get("gamma_grid", [])):
        if not isinstance(g, dict) or set(g) - _GAMMA_KEYS:
            errors.append(f"gamma_grid[{i}]: expected an object with keys x, nu")
            continue
        nu = g.get("nu", 0.0)
        if not nu > 0:
            errors.append(f"gamma_grid[{i}].nu: must be > 0 (evaluation stays off the real axis)")
            continue
        gamma_grid.append(ComplexPoint(float(g.get("x", 0.0)), float(nu)))

    n_list = raw.get("n_list", [])
    if not all(isinstance(n, int) and n >= 1 for n in n_list):
        errors.append("n_list: entries must be positive integers")
    b_list = raw.get("b_list", [])
    if not all(isinstance(b, int) and b >= 1 for b in b_list):
        errors.append("b_list: entries must be positive integers")
    nu_list = [float(v) for v in raw.get("nu_list", [])] if isinstance(raw.get("nu_list", []), list) else []
    kinds = raw.get("kinds", [])
    if not all(k in PROFILE_KINDS for k in kinds):
        errors.append(f"kinds: entries must be among {PROFILE_KINDS}")

    if experiment == "berry" and not (n_list and gamma_grid):
        errors.append("berry: needs n_list and gamma_grid")
    if experiment == "mixing" and not (b_list and kinds):
        errors.append("mixing: needs b_list and kinds")

    radius_lag = raw.get("radius_lag", 0)
    if not isinstance(radius_lag, int) or radius_lag < 0:
        errors.append("radius_lag: must be a nonnegative integer")
    window = raw.get("window")
    if window is not None and (not isinstance(window, int) or window < 1):
        errors.append("window: must be a positive integer")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        experiment=experiment,
        ensemble=spec,
        replicas=replicas,
        seed=seed,
        out=str(raw.get("out", "out")),
        n_list=list(n_list),
        b_list=list(b_list),
        gamma_grid=gamma_grid,
        nu_list=list(nu_list),
        kinds=list(kinds),
        radius_lag=radius_lag,
        window=window,
    )


@dataclass
class RunManifest:
    config_hash: str
    experiment: str
    seed: int
    seed_tree: dict
    version: str
    wall_clock_s: float
    outputs: dict
    status: str
    error: str = ""

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _indexed_map(fn, items, threads: int):
    """Evaluate fn over items into pre-indexed slots; order never depends on
    the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    results = [None] * len(items)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(fn, it): k for k, it in enumerate(items)}
        for fut, k in futures.items():
            results[k] = fut.result()
    return results


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _is_pair_indexed(spec: EnsembleSpec) -> bool:
    return spec.kind in ("UStatOuter", "UStatKernel")


def _run_spectrum(cfg: ExperimentConfig, out: Path, threads: int):
    spec = cfg.ensemble

    def cell(r):
        s = sample(spec, r)
        w = ustat_sum(s) if _is_pair_indexed(spec) else normalized_sum(s)
        return np.linalg.eigvalsh(0.5 * (w + w.conj().T))

    eigs = _indexed_map(cell, range(cfg.replicas), threads)
    rows = []
    for r, ev in enumerate(eigs):
        for v in ev:
            rows.append([spec.kind, spec.dim, spec.extent, r, repr(float(v))])
    _write_csv(out / "spectrum.csv", ["ensemble", "m", "n", "replica", "eigenvalue"], rows)
    pooled = np.sort(np.concatenate(eigs))
    sig2 = float(np.mean(pooled**2))
    law = SemicircleLaw(sig2) if sig2 > 0 else None
    overlay = None
    if law is not None:
        xs = np.linspace(pooled[0], pooled[-1], 200)
        overlay = (xs.tolist(), law.density(xs).tolist())
    svgplot.histogram_plot(
        out / "spectrum.svg",
        pooled.tolist(),
        overlay=overlay,
        title=f"{spec.kind} spectrum (m={spec.dim}, n={spec.extent})",
        xlabel="eigenvalue",
    )
    return ["spectrum.csv", "spectrum.svg"]


def _run_berry(cfg: ExperimentConfig, out: Path, threads: int):
    spec = cfg.ensemble
    report = berry_esseen_sweep(
        spec,
        cfg.n_list,
        cfg.gamma_grid,
        cfg.replicas,
        radius_lag=cfg.radius_lag,
        mapper=lambda fn, items: _indexed_map(fn, items, threads),
    )
    report.write_csv(out / "berry.csv")
    grid_rows = []
    for n in cfg.n_list:
        ds = [r.delta for r in report.rows if r.n == n]
        grid_rows.append([spec.kind, spec.dim, n, repr(max(ds)), repr(float(np.mean(ds)))])
    _write_csv(out / "berry_grid.csv", ["ensemble", "m", "n", "delta_max", "delta_mean"], grid_rows)
    fit_rows = []
    floors = 0
    for g in cfg.gamma_grid:
        try:
            f = rate_fit(report, g)
            fit_rows.append(
                [spec.kind, repr(g.x), repr(g.nu), repr(f.slope), repr(f.intercept), repr(f.residual), f.n_points]
            )
        except NoiseFloorError:
            floors += 1
    if floors == len(cfg.gamma_grid):
        raise NoiseFloorError("every gamma point is noise-dominated; nothing to fit")
    _write_csv(
        out / "fit.csv",
        ["ensemble", "gamma_re", "gamma_im", "slope", "intercept", "residual", "n_points"],
        fit_rows,
    )
    series = []
    for g in cfg.gamma_grid:
        pts = sorted((r.n, r.delta) for r in report.rows if r.gamma == g)
        series.append((f"nu={g.nu:g}", [p[0] for p in pts], [p[1] for p in pts]))
    svgplot.line_plot(
        out / "berry.svg",
        series,
        title=f"{spec.kind}: transform distance vs n",
        xlabel="n",
        ylabel="delta",
        logx=True,
        logy=True,
    )
    return ["berry.csv", "berry_grid.csv", "fit.csv", "berry.svg"]


def _run_mixing(cfg: ExperimentConfig, out: Path, threads: int):
    spec = cfg.ensemble
    outputs = []
    series = []
    l2 = frozen_l2_norm(spec)
    for kind in cfg.kinds:
        prof = mixing_profile(
            spec,
            kind,
            cfg.b_list,
            default_dictionary(),
            n_replicas=cfg.replicas,
            l2=l2,
            mapper=lambda fn, items: _indexed_map(fn, items, threads),
        )
        name = f"mixing_{kind}.csv"
        prof.write_csv(out / name)
        outputs.append(name)
        series.append((kind, [r.lag for r in prof.rows], [max(r.estimate, 1e-12) for r in prof.rows]))
    svgplot.line_plot(
        out / "mixing.svg",
        series,
        title=f"{spec.kind}: mixing profiles (m={spec.dim})",
        xlabel="lag",
        ylabel="estimate",
        logy=True,
    )
    outputs.append("mixing.svg")
    return outputs


def _run_ustat(cfg: ExperimentConfig, out: Path, threads: int):
    spec = cfg.ensemble
    window = cfg.window or max(spec.extent // 2, 1)
    lag = cfg.radius_lag

    def cell(r):
        s = sample(spec, r)
        w = ustat_sum(s)
        return s, float(np.real(np.trace(w @ w)) / w.shape[0])

    cells = _indexed_map(cell, range(cfg.replicas), threads)
    samples = [c[0] for c in cells]
    w2 = np.array([c[1] for c in cells])
    est = estimate_radius_ustat(samples, lag, window)
    single = single_coordinate_radius(samples, lag, window)
    _write_csv(
        out / "ustat.csv",
        [
            "ensemble",
            "m",
            "n",
            "window",
            "lag_cutoff",
            "eta_star",
            "single_coordinate",
            "ratio",
            "w2_mean",
            "w2_stderr",
            "replicas",
            "seed",
        ],
        [
            [
                spec.kind,
                spec.dim,
                spec.extent,
                window,
                lag,
                repr(est.sigma2_hat),
                repr(single),
                repr(est.sigma2_hat / single if single else float("nan")),
                repr(float(w2.mean())),
                repr(float(w2.std(ddof=1) / np.sqrt(len(w2)))),
                cfg.replicas,
                cfg.seed,
            ]
        ],
    )
    return ["ustat.csv"]


def _run_radius(cfg: ExperimentConfig, out: Path, threads: int):
    spec = cfg.ensemble
    samples = _indexed_map(lambda r: sample(spec, r), range(cfg.replicas), threads)
    est = estimate_radius_stationary(samples, cfg.radius_lag)
    rows = [
        [spec.kind, spec.dim, spec.extent, lag, repr(val), repr(est.sigma2_hat), repr(est.stderr), cfg.replicas, cfg.seed]
        for lag, val in sorted(est.contributions.items())
    ]
    _write_csv(
        out / "radius.csv",
        ["ensemble", "m", "n", "lag", "contribution", "sigma2_hat", "stderr", "replicas", "seed"],
        rows,
    )
    xs = sorted(est.contributions)
    svgplot.line_plot(
        out / "radius.svg",
        [("contribution", xs, [max(est.contributions[x], 1e-12) for x in xs])],
        title=f"{spec.kind}: per-lag radius contributions",
        xlabel="lag",
        ylabel="contribution",
    )
    return ["radius.csv", "radius.svg"]


def _run_kargin(cfg: ExperimentConfig, out: Path, threads: int):
    spec = cfg.ensemble
    samples = _indexed_map(lambda r: sample(spec, r), range(cfg.replicas), threads)
    r1, r2 = kargin_condition_check(samples)
    _write_csv(
        out / "kargin.csv",
        ["ensemble", "m", "n", "residual_linear", "residual_quad", "replicas", "seed"],
        [[spec.kind, spec.dim, spec.extent, repr(r1), repr(r2), cfg.replicas, cfg.seed]],
    )
    return ["kargin.csv"]


_RUNNERS = {
    "spectrum": _run_spectrum,
    "berry": _run_berry,
    "mixing": _run_mixing,
    "ustat": _run_ustat,
    "radius": _run_radius,
    "kargin": _run_kargin,
}


def run(cfg: ExperimentConfig, threads: int = 1) -> RunManifest:
    """Execute the configured experiment, write outputs and a manifest."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    canonical = json.dumps(
        {
            "experiment": cfg.experiment,
            "ensemble": asdict(cfg.ensemble),
            "replicas": cfg.replicas,
            "seed": cfg.seed,
            "n_list": cfg.n_list,
            "b_list": cfg.b_list,
            "gamma_grid": [(g.x, g.nu) for g in cfg.gamma_grid],
            "nu_list": cfg.nu_list,
            "kinds": cfg.kinds,
            "radius_lag": cfg.radius_lag,
            "window": cfg.window,
        },
        sort_keys=True,
    )
    start = time.monotonic()
    seed_tree = {
        "root": cfg.ensemble.seed,
        "streams": [f"{cfg.ensemble.kind}/replica[0..{cfg.replicas - 1}]", "bootstrap/*"],
    }
    try:
        names = _RUNNERS[cfg.experiment](cfg, out, threads)
        status, error = "ok", ""
    except Exception as exc:
        manifest = RunManifest(
            config_hash=hashlib.sha256(canonical.encode()).hexdigest(),
            experiment=cfg.experiment,
            seed=cfg.seed,
            seed_tree=seed_tree,
            version=__version__,
            wall_clock_s=time.monotonic() - start,
            outputs={p.name: _sha256(p) for p in sorted(out.glob("*.csv"))},
            status="failed",
            error=f"{type(exc).__name__}: {exc}",
        )
        manifest.write(out / "manifest.json")
        raise
    manifest = RunManifest(
        config_hash=hashlib.sha256(canonical.encode()).hexdigest(),
        experiment=cfg.experiment,
        seed=cfg.seed,
        seed_tree=seed_tree,
        version=__version__,
        wall_clock_s=time.monotonic() - start,
        outputs={name: _sha256(out / name) for name in names},
        status=status,
        error=error,
    )
    manifest.write(out / "manifest.json")
    return manifest
