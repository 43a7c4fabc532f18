"""Seeded simulation harness and single-file fitting.

``run_experiment`` draws data sets from a known monotone truth, fits each
estimator, and records the L1 error and the density ratio at the origin.
``results.csv`` depends only on the spec; wall-clock times go to a separate
``timings.csv`` so the results file stays byte-reproducible.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import grenander
from .engine import PrConfig, theorem_bound
from .exceptions import ConfigurationError, DomainError, EmptyDataError, InputError, PrmixError
from .metrics import DensityPair, jump_nodes, l1_distance
from .monotone import DEFAULT_LOWER, TRUTHS, fit_monotone, get_truth, origin_estimate
from .svg import boxplot_svg, density_svg

ESTIMATORS = ("pr", "grenander")
RESULT_COLUMNS = ("truth", "estimator", "n", "replication", "l1", "origin_ratio", "bound_violations", "error")
PROBE_COUNT = 20
L1_RESOLUTION = 10_000


def sample_truth(truth_name, n, seed):
    """``n`` seeded draws from a built-in truth.

    Exponential draws use the inverse CDF ``-log(1 - U)``; half-normal draws
    are ``|Z|`` from the generator's standard normal sampler.
    """
    if truth_name not in TRUTHS:
        raise ConfigurationError(f"unknown truth {truth_name!r}; expected one of {sorted(TRUTHS)}")
    if int(n) != n or n < 1:
        raise ConfigurationError(f"sample size must be a positive integer, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    if truth_name == "exponential":
        return -np.log1p(-rng.random(int(n)))
    return np.abs(rng.standard_normal(int(n)))


def replication_seed(seed, n, replication):
    """Independent data stream per (n, replication) derived from the spec seed."""
    return np.random.SeedSequence([int(seed), int(n), int(replication)])


@dataclass(frozen=True)
class ExperimentSpec:
    """A simulation study: one truth, several sample sizes, repeated data sets."""

    truth_name: str
    sample_sizes: tuple
    replications: int = 200
    estimators: tuple = ESTIMATORS
    pr_config: PrConfig = field(default_factory=PrConfig)
    seed: int = 0
    output_dir: str = "results"
    lower: float = DEFAULT_LOWER
    workers: int = 1

    def __post_init__(self):
        if self.truth_name not in TRUTHS:
            raise ConfigurationError(f"unknown truth {self.truth_name!r}; expected one of {sorted(TRUTHS)}")
        sizes = tuple(self.sample_sizes)
        if not sizes or any(int(n) != n or n < 1 for n in sizes):
            raise ConfigurationError(f"sample_sizes must be non-empty positive integers, got {sizes}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigurationError(f"replications must be a positive integer, got {self.replications}")
        est = tuple(self.estimators)
        unknown = set(est) - set(ESTIMATORS)
        if not est or unknown:
            raise ConfigurationError(f"estimators must be a non-empty subset of {ESTIMATORS}, got {est}")
        if not isinstance(self.pr_config, PrConfig):
            raise ConfigurationError("pr_config must be a PrConfig")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not self.lower > 0:
            raise ConfigurationError(f"lower must be positive, got {self.lower}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigurationError(f"workers must be a positive integer, got {self.workers}")
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in sizes))
        object.__setattr__(self, "estimators", est)
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "workers", int(self.workers))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown spec fields: {sorted(extra)}")
        if "truth_name" not in d or "sample_sizes" not in d:
            raise ConfigurationError("spec needs truth_name and sample_sizes")
        cfg = d.pop("pr_config", None)
        if cfg is not None:
            if not isinstance(cfg, dict):
                raise ConfigurationError("pr_config must be an object")
            try:
                d["pr_config"] = PrConfig(**cfg)
            except TypeError as exc:
                raise ConfigurationError(f"bad pr_config: {exc}") from None
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read spec {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"spec {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("spec must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["sample_sizes"] = list(self.sample_sizes)
        out["estimators"] = list(self.estimators)
        out["pr_config"] = self.pr_config.to_dict()
        return out


@dataclass(frozen=True)
class ResultRow:
    truth: str
    estimator: str
    n: int
    replication: int
    l1: float
    origin_ratio: float
    wall_time_ms: float
    bound_violations: int = None
    error: str = ""

    @property
    def sort_key(self):
        return (self.truth, self.estimator, self.n, self.replication)

    def csv_fields(self):
        def num(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))

        return [
            self.truth, self.estimator, self.n, self.replication, num(self.l1), num(self.origin_ratio),
            "" if self.bound_violations is None else self.bound_violations, self.error,
        ]


def l1_to_truth(truth, estimate, support_end, jumps=()):
    """``integral_0^inf |m_star - estimate|`` for an estimate vanishing beyond ``support_end``.

    The tail beyond the integration range contributes ``1 - M_star(end)``.
    """
    end = max(float(support_end), 1.0)
    pair = DensityPair(truth.density, estimate, (0.0, end), L1_RESOLUTION, jump_nodes(*jumps))
    return l1_distance(pair) + float(1.0 - truth.cdf(end))


def run_replication(spec, n, replication):
    """Fit every estimator on one seeded data set; never raises for estimator failures."""
    truth = get_truth(spec.truth_name)
    x = sample_truth(spec.truth_name, n, replication_seed(spec.seed, n, replication))
    m0 = float(truth.density(0.0))
    rows = []
    for name in spec.estimators:
        t0 = time.perf_counter()
        l1 = ratio = math.nan
        violations = None
        error = ""
        try:
            if name == "pr":
                top = float(np.max(x))
                probes = np.linspace(0.0, top, PROBE_COUNT)
                f = fit_monotone(x, spec.pr_config, lower=spec.lower, probes=probes)
                f.mixing.check_mass()
                d = f.diagnostics
                violations = 0
                for r in range(spec.pr_config.permutations):
                    idx = d.rows(r)
                    bound = theorem_bound(spec.pr_config.initial_atom_upper, top, d.weight[idx])
                    violations += int(np.sum(d.probe_min[idx] < bound))
                l1 = l1_to_truth(truth, f.density, top, (spec.lower, top))
                ratio = origin_estimate(f) / m0
            else:
                g = grenander(x)
                l1 = l1_to_truth(truth, g, g.breakpoints[-1], g.breakpoints)
                ratio = float(g(0.0)) / m0
        except PrmixError as exc:
            error = f"{type(exc).__name__}: {exc}"
        elapsed = (time.perf_counter() - t0) * 1000.0
        rows.append(ResultRow(spec.truth_name, name, n, replication, l1, ratio, elapsed, violations, error))
    return rows


def _run_task(args):
    return run_replication(*args)


def collect_rows(spec):
    """All result rows, sorted by (truth, estimator, n, replication)."""
    tasks = [(spec, n, r) for n in spec.sample_sizes for r in range(spec.replications)]
    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * spec.workers))))
    else:
        chunks = [_run_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: r.sort_key)
    return rows


def results_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_fields())
    return buf.getvalue()


def timings_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("truth", "estimator", "n", "replication", "wall_time_ms"))
    for row in rows:
        writer.writerow((row.truth, row.estimator, row.n, row.replication, f"{row.wall_time_ms:.3f}"))
    return buf.getvalue()


def summarize(rows):
    """Medians per (estimator, n): ``{(estimator, n): {"l1": ..., "origin_ratio": ...}}``."""
    out = {}
    for key in sorted({(r.estimator, r.n) for r in rows}):
        sel = [r for r in rows if (r.estimator, r.n) == key and not r.error]
        out[key] = {
            "l1": float(np.median([r.l1 for r in sel])) if sel else math.nan,
            "origin_ratio": float(np.median([r.origin_ratio for r in sel])) if sel else math.nan,
            "failures": sum(1 for r in rows if (r.estimator, r.n) == key and r.error),
        }
    return out


def run_experiment(spec):
    """Run the study, write ``results.csv``, ``timings.csv`` and boxplot SVGs; return the rows."""
    rows = collect_rows(spec)
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(rows))
    (out / "timings.csv").write_text(timings_csv(rows))
    labels = {"l1": "L1 distance", "origin_ratio": "m_hat(0) / m(0)"}
    for metric, label in labels.items():
        for n in spec.sample_sizes:
            groups = {}
            for est in spec.estimators:
                vals = [getattr(r, metric) for r in rows if r.estimator == est and r.n == n and not r.error]
                if vals:
                    groups[est] = vals
            if groups:
                svg = boxplot_svg(groups, title=f"{spec.truth_name}, n = {n}", ylabel=label,
                                  reference=1.0 if metric == "origin_ratio" else None)
                (out / f"boxplot_{metric}_n{n}.svg").write_text(svg)
    return rows


# -- fitting a data file ----------------------------------------------------


def read_observations(path):
    """Read one numeric column; a non-numeric first line is taken as a header.

    Errors name the offending line.
    """
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    values = []
    for lineno, line in enumerate(lines, start=1):
        cells = next(csv.reader([line]), [])
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != 1:
            raise InputError(f"expected one column, found {len(cells)}", line=lineno)
        cell = cells[0].strip()
        try:
            v = float(cell)
        except ValueError:
            if not values and lineno == 1:
                continue
            raise InputError(f"not a number: {cell!r}", line=lineno) from None
        if not math.isfinite(v):
            raise InputError(f"non-finite value {cell!r}", line=lineno)
        if v < 0:
            raise DomainError(f"negative value {v!r}", line=lineno)
        values.append(v)
    if not values:
        raise EmptyDataError(f"{path} contains no observations")
    return np.array(values)


def fit_file(input_csv, config=None, output_dir=None, *, lower=DEFAULT_LOWER, with_grenander=False):
    """Fit PR (and optionally Grenander) to a single-column CSV and write the outputs.

    Writes ``<stem>.mixing.json`` (the mixing measure), ``<stem>.fit.json``
    (summary), ``<stem>.trace.csv`` (first permutation), ``<stem>.density.svg``
    and, with ``with_grenander``, ``<stem>.grenander.json``. Returns the
    summary dictionary.
    """
    config = PrConfig() if config is None else config
    x = read_observations(input_csv)
    top = float(np.max(x))
    if not lower < top:
        raise InputError(f"largest observation {top!r} must exceed the lower support bound {lower!r}")
    f = fit_monotone(x, config, lower=lower)
    f.mixing.check_mass()
    stem = Path(input_csv).stem
    out = Path(output_dir) if output_dir is not None else Path(input_csv).resolve().parent
    out.mkdir(parents=True, exist_ok=True)

    (out / f"{stem}.mixing.json").write_text(f.mixing.to_json() + "\n")
    f.diagnostics.to_csv(out / f"{stem}.trace.csv", permutation=0)
    curves = {"predictive recursion": f.density}
    summary = {
        "input": str(input_csv),
        "n_used": f.n_used,
        "n_dropped": f.n_dropped,
        "support": {"lower": f.mixing.support.lower, "upper": f.mixing.support.upper},
        "origin_density": origin_estimate(f),
        "config": config.to_dict(),
    }
    if with_grenander:
        g = grenander(x)
        (out / f"{stem}.grenander.json").write_text(g.to_json() + "\n")
        curves["Grenander"] = g
        summary["grenander_origin_density"] = float(g(0.0))
    (out / f"{stem}.density.svg").write_text(density_svg(x, curves, title=f"{stem} (n = {x.size})"))
    (out / f"{stem}.fit.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def default_workers():
    return max(1, min(8, os.cpu_count() or 1))
