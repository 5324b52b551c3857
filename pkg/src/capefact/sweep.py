"""Experiment sweep harness: grids over (epsilon, delta, N_s, S, method).

Every grid cell runs ``trials`` times with a seed derived deterministically
from the master seed and the cell coordinates, so reruns produce
byte-identical CSV.  Synthetic data is derived from coordinates that exclude
the method and the privacy parameters, which pairs the comparisons across
methods and across the epsilon grid.  Failures at extreme noise (rank
deficiency, non-positive tensor eigenvalues) become flagged rows with a NaN
metric instead of aborting the sweep.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import datagen, otd, pca
from .dp import Model, PrivacySpec, RngStream
from .protocol import InfeasibleNoiseError, InfeasiblePlanError

__all__ = [
    "ConfigError",
    "SweepConfig",
    "ResultRow",
    "SummaryRow",
    "RESULT_HEADER",
    "SUMMARY_HEADER",
    "run_sweep",
    "emit_results",
    "parse_results",
    "summarize",
    "emit_summary",
    "ingest_csv",
]


class ConfigError(ValueError):
    """Invalid sweep configuration."""


FAMILIES = ("pca", "mog", "stm")
PCA_METHODS = ("cape", "conv", "local", "pooled-dp", "non-private")
OTD_METHODS = ("cape", "conv", "local", "pooled-dp", "non-private")

RESULT_HEADER = [
    "family", "method", "epsilon", "delta", "n_s", "s", "k",
    "trial", "seed", "metric", "value", "wall_ms",
]
SUMMARY_HEADER = [
    "family", "method", "epsilon", "delta", "n_s", "s", "k",
    "metric", "mean", "stddev", "trials", "excluded",
]


@dataclass(frozen=True)
class SweepConfig:
    """One experiment grid; see the CLI for flag-level documentation."""

    family: str
    methods: tuple[str, ...] = ("cape", "conv", "local", "non-private")
    eps_grid: tuple[float, ...] = (0.1, 0.5, 1.0, 2.0, 5.0)
    delta_grid: tuple[float, ...] = (0.01,)
    ns_grid: tuple[int, ...] = ()
    sites_grid: tuple[int, ...] = (5,)
    k: int = 0
    dim: int = 0
    trials: int = 10
    seed: int = 0
    sigma_sq: float = 0.05
    words_per_doc: int = 3
    noiseless: bool = False
    trusted_sites: bool = False
    data: np.ndarray | None = field(default=None, compare=False)

    def resolved(self) -> "SweepConfig":
        """Fill family defaults for empty grids and validate."""
        cfg = self
        if cfg.family not in FAMILIES:
            raise ConfigError(f"unknown family {cfg.family!r}; choose from {FAMILIES}")
        if not cfg.ns_grid:
            cfg = replace(cfg, ns_grid=(1000,) if cfg.family == "pca" else (5000,))
        if cfg.dim <= 0:
            cfg = replace(cfg, dim=50 if cfg.family == "pca" else 10)
        if cfg.k <= 0:
            cfg = replace(cfg, k=10 if cfg.family == "pca" else 5)
        valid = PCA_METHODS if cfg.family == "pca" else OTD_METHODS
        bad = [m for m in cfg.methods if m not in valid]
        if bad:
            raise ConfigError(f"methods {bad} invalid for family {cfg.family!r}")
        if not cfg.methods:
            raise ConfigError("need at least one method")
        if cfg.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (cfg.eps_grid and cfg.delta_grid and cfg.sites_grid):
            raise ConfigError("grids must be non-empty")
        if any(e <= 0 for e in cfg.eps_grid) or any(not 0 < d < 1 for d in cfg.delta_grid):
            raise ConfigError("epsilon must be positive and delta in (0, 1)")
        if any(s < 1 for s in cfg.sites_grid) or any(n < 1 for n in cfg.ns_grid):
            raise ConfigError("site counts and sample sizes must be >= 1")
        if not 1 <= cfg.k <= cfg.dim:
            raise ConfigError(f"k must be in [1, dim]; got k={cfg.k}, dim={cfg.dim}")
        return cfg


@dataclass(frozen=True)
class ResultRow:
    family: str
    method: str
    epsilon: float
    delta: float
    n_s: int
    s: int
    k: int
    trial: int
    seed: int
    metric: str
    value: float
    wall_ms: float

    @property
    def degenerate(self) -> bool:
        return not math.isfinite(self.value)


@dataclass(frozen=True)
class SummaryRow:
    family: str
    method: str
    epsilon: float
    delta: float
    n_s: int
    s: int
    k: int
    metric: str
    mean: float
    stddev: float
    trials: int
    excluded: int


def _data_stream(cfg: SweepConfig, n_s: int, s: int, trial: int) -> RngStream:
    return RngStream(
        cfg.seed,
        f"data/{cfg.family}/d={cfg.dim}/k={cfg.k}/s={s}/ns={n_s}/trial={trial}",
    )


def _noise_stream(
    cfg: SweepConfig, method: str, eps: float, delta: float, n_s: int, s: int, trial: int
) -> RngStream:
    return RngStream(
        cfg.seed,
        f"noise/{cfg.family}/method={method}/eps={eps!r}/delta={delta!r}"
        f"/d={cfg.dim}/k={cfg.k}/s={s}/ns={n_s}/trial={trial}",
    )


def _pca_sites(cfg: SweepConfig, n_s: int, s: int, trial: int) -> list[pca.SiteDataset]:
    if cfg.data is not None:
        return pca.split_sites(pca.preprocess(cfg.data), s)
    return datagen.gen_pca_sites(cfg.dim, cfg.k, s, n_s, _data_stream(cfg, n_s, s, trial))


def _run_pca_method(cfg, method, sites, privacy, rng) -> float:
    a_ref = pca.pooled_second_moment(sites)
    if method == "cape":
        result, _ = pca.cape_pca(
            sites, privacy, cfg.k, rng,
            noiseless=cfg.noiseless, trusted_sites=cfg.trusted_sites,
        )
    elif method == "conv":
        result = pca.conv_pca(sites, privacy, cfg.k, rng, noiseless=cfg.noiseless)
    elif method == "local":
        result = pca.local_pca(
            sites[0], privacy, cfg.k, rng.generator(),
            noiseless=cfg.noiseless, a_ref=a_ref,
        )
    elif method == "pooled-dp":
        result = pca.pooled_dp_pca(
            sites, privacy, cfg.k, rng.generator(), noiseless=cfg.noiseless
        )
    elif method == "non-private":
        result = pca.nonprivate_pca(sites, cfg.k)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return result.captured_energy


def _otd_site_moments(cfg: SweepConfig, n_s: int, s: int, trial: int):
    """Per-site moment pairs plus the planted model, shared across methods."""
    stream = _data_stream(cfg, n_s, s, trial)
    if cfg.family == "mog":
        model = datagen.mog_model(cfg.dim, cfg.k, stream.child("model"), cfg.sigma_sq)
        moments = []
        for i in range(s):
            samples, _ = datagen.gen_mog(model, n_s, stream.child(f"site_{i}"))
            moments.append(otd.mog_moments(samples, cfg.sigma_sq))
    else:
        model = datagen.stm_model(
            cfg.dim, cfg.k, stream.child("model"), cfg.words_per_doc
        )
        moments = []
        for i in range(s):
            docs, _ = datagen.gen_stm(model, n_s, stream.child(f"site_{i}"))
            moments.append(otd.stm_moments(docs, cfg.dim))
    return model, moments


def _run_otd_method(cfg, method, model, moments, spec1, spec2, rng) -> float:
    if method == "cape":
        t_proj, w, _ = otd.cape_agn(
            moments, spec1, spec2, cfg.k, rng,
            noiseless=cfg.noiseless, trusted_sites=cfg.trusted_sites,
        )
    elif method == "conv":
        t_proj, w = otd.conv_otd(
            moments, spec1, spec2, cfg.k, rng, noiseless=cfg.noiseless
        )
    elif method == "local":
        t_proj, w = otd.agn(
            moments[0], spec1, spec2, cfg.k, rng.generator(), noiseless=cfg.noiseless
        )
    elif method == "pooled-dp":
        t_proj, w = otd.agn(
            otd.pool_moments(moments), spec1, spec2, cfg.k, rng.generator(),
            noiseless=cfg.noiseless,
        )
    elif method == "non-private":
        t_proj, w = otd.agn(
            otd.pool_moments(moments), None, None, cfg.k, rng.generator(),
            noiseless=True,
        )
    else:
        raise ConfigError(f"unknown method {method!r}")
    result = otd.decompose_projected(t_proj, w, rng.child("power").generator())
    recovered = result.components
    if cfg.family == "stm":
        recovered, _ = otd.stm_postprocess(recovered)
    return otd.q_comp(recovered, model.components)


def run_sweep(config: SweepConfig, *, measure_time: bool = False) -> list[ResultRow]:
    """Execute every grid cell x trial; returns rows in deterministic order.

    By default wall_ms is recorded as 0.0 so that (config, seed) maps to
    byte-identical CSV output; pass ``measure_time=True`` to fill the column
    with real per-trial wall times (at the cost of byte stability).
    """
    cfg = config.resolved()
    metric_name = "q_ce" if cfg.family == "pca" else "q_comp"
    rows: list[ResultRow] = []
    for n_s in cfg.ns_grid:
        for s in cfg.sites_grid:
            for trial in range(cfg.trials):
                if cfg.family == "pca":
                    sites = _pca_sites(cfg, n_s, s, trial)
                    model = moments = None
                else:
                    model, moments = _otd_site_moments(cfg, n_s, s, trial)
                for eps in cfg.eps_grid:
                    for delta in cfg.delta_grid:
                        for method in cfg.methods:
                            rng = _noise_stream(cfg, method, eps, delta, n_s, s, trial)
                            start = time.perf_counter()
                            try:
                                if cfg.family == "pca":
                                    value = _run_pca_method(
                                        cfg, method, sites, PrivacySpec(eps, delta), rng
                                    )
                                else:
                                    spec1, spec2 = PrivacySpec(eps, delta).split()
                                    value = _run_otd_method(
                                        cfg, method, model, moments, spec1, spec2, rng
                                    )
                            except (otd.DecompositionError, InfeasiblePlanError, InfeasibleNoiseError):
                                value = float("nan")
                            wall_ms = (
                                (time.perf_counter() - start) * 1000.0
                                if measure_time
                                else 0.0
                            )
                            rows.append(
                                ResultRow(
                                    family=cfg.family,
                                    method=method,
                                    epsilon=eps,
                                    delta=delta,
                                    n_s=n_s,
                                    s=s,
                                    k=cfg.k,
                                    trial=trial,
                                    seed=rng.derived_seed,
                                    metric=metric_name,
                                    value=float(value),
                                    wall_ms=wall_ms,
                                )
                            )
    rows.sort(
        key=lambda r: (r.family, r.method, r.epsilon, r.delta, r.n_s, r.s, r.trial)
    )
    return rows


def _fmt(x) -> str:
    # repr gives the shortest representation that round-trips exactly
    return repr(float(x)) if isinstance(x, float) else str(x)


def emit_results(rows: list[ResultRow], path) -> None:
    """Write rows as CSV with the fixed header and LF line endings."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        for r in rows:
            writer.writerow(
                [
                    r.family, r.method, _fmt(r.epsilon), _fmt(r.delta),
                    r.n_s, r.s, r.k, r.trial, r.seed, r.metric,
                    _fmt(r.value), _fmt(r.wall_ms),
                ]
            )


def parse_results(path) -> list[ResultRow]:
    """Read back a result CSV written by :func:`emit_results`."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RESULT_HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in reader:
            rows.append(
                ResultRow(
                    family=rec[0], method=rec[1],
                    epsilon=float(rec[2]), delta=float(rec[3]),
                    n_s=int(rec[4]), s=int(rec[5]), k=int(rec[6]),
                    trial=int(rec[7]), seed=int(rec[8]), metric=rec[9],
                    value=float(rec[10]), wall_ms=float(rec[11]),
                )
            )
    return rows


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    """Per-cell mean and sample stddev, excluding degenerate-flagged rows."""
    cells: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        cells.setdefault(
            (r.family, r.method, r.epsilon, r.delta, r.n_s, r.s, r.k, r.metric), []
        ).append(r)
    out = []
    for key in sorted(cells):
        group = cells[key]
        values = [r.value for r in group if not r.degenerate]
        excluded = len(group) - len(values)
        if values:
            mean = float(np.mean(values))
            stddev = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        else:
            mean, stddev = float("nan"), float("nan")
        out.append(SummaryRow(*key, mean, stddev, len(values), excluded))
    return out


def emit_summary(summary: list[SummaryRow], path) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for r in summary:
            writer.writerow(
                [
                    r.family, r.method, _fmt(r.epsilon), _fmt(r.delta),
                    r.n_s, r.s, r.k, r.metric, _fmt(r.mean), _fmt(r.stddev),
                    r.trials, r.excluded,
                ]
            )


def ingest_csv(path, has_header: bool = False, samples_as: str = "rows") -> np.ndarray:
    """Read a rectangular numeric CSV into a D x N matrix (columns = samples).

    ``samples_as`` says how the file is oriented: "rows" (each line is one
    sample; the common layout) or "columns".  Ragged or non-numeric content
    is rejected with the offending 1-based line number.
    """
    if samples_as not in ("rows", "columns"):
        raise ValueError(f"samples_as must be 'rows' or 'columns', got {samples_as!r}")
    records: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, rec in enumerate(reader, start=1):
            if lineno == 1 and has_header:
                continue
            if not rec:
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width} fields, got {len(rec)}"
                )
            try:
                records.append([float(v) for v in rec])
            except ValueError:
                bad = next(v for v in rec if not _is_float(v))
                raise ValueError(
                    f"{path}: line {lineno}: non-numeric value {bad!r}"
                ) from None
    if not records:
        raise ValueError(f"{path}: no data rows")
    data = np.array(records, dtype=float)
    return data.T if samples_as == "rows" else data


def _is_float(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False
