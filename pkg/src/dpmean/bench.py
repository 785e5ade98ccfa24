"""Monte Carlo benchmark harness.

Runs mechanisms against synthetic populations or an ingested dataset and
reports bias, standard error, and RMSE per sweep cell, with normal
confidence radii.  Identical (config, master seed) reproduces a
bit-identical report: every trial derives its stream from
(master seed, row id, trial index), trials that fail are counted and
excluded from the moments, and reduction order is fixed.

CSV layout is part of the external contract: a fixed column order,
12-significant-digit values, and header comments that echo the full run
configuration (as one JSON line) so a report is self-describing.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .mechanisms import EstimateOutcome
from .noise import NoiseStream

__all__ = [
    "Population",
    "PointMass",
    "TwoPoint",
    "BernoulliPop",
    "Gaussian",
    "LogNormal",
    "Empirical",
    "parse_population",
    "lognormal_sigma_from_raw_variance",
    "ReportRow",
    "SweepReport",
    "SWEEP_COLUMNS",
    "monte_carlo",
    "threshold_sweep",
    "optimal_threshold",
    "kv_bias_sweep",
    "HistogramTable",
    "sampling_histogram",
    "data_histogram",
    "load_column_csv",
    "write_sweep_csv",
    "read_sweep_csv",
    "write_histogram_csv",
    "read_histogram_csv",
]

logger = logging.getLogger(__name__)

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


# ---------------------------------------------------------------------------
# populations
# ---------------------------------------------------------------------------


class Population:
    """A sampling model with a known exact mean."""

    mean: float

    def sample(self, n: int, stream: NoiseStream) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(Population):
    mu: float

    @property
    def mean(self) -> float:
        return self.mu

    def sample(self, n, stream):
        return np.full(n, self.mu, dtype=float)


@dataclass(frozen=True)
class TwoPoint(Population):
    """v * Bernoulli(p): mass 1-p at 0 and p at v."""

    v: float
    p: float

    @property
    def mean(self) -> float:
        return self.v * self.p

    def sample(self, n, stream):
        return self.v * stream.bernoulli(self.p, size=n).astype(float)


@dataclass(frozen=True)
class BernoulliPop(Population):
    p: float

    @property
    def mean(self) -> float:
        return self.p

    def sample(self, n, stream):
        return stream.bernoulli(self.p, size=n).astype(float)


@dataclass(frozen=True)
class Gaussian(Population):
    mu: float
    sigma: float = 1.0

    @property
    def mean(self) -> float:
        return self.mu

    def sample(self, n, stream):
        return self.mu + self.sigma * stream.normal(n)


@dataclass(frozen=True)
class LogNormal(Population):
    """exp(Normal(ln median, sigma_log^2)); the skewed benchmark population."""

    median: float
    sigma_log: float = 1.0

    @property
    def mean(self) -> float:
        return self.median * math.exp(self.sigma_log**2 / 2.0)

    def sample(self, n, stream):
        return self.median * np.exp(self.sigma_log * stream.normal(n))


@dataclass(frozen=True, eq=False)
class Empirical(Population):
    """A finite dataset treated as the population; sampling subsamples
    without replacement within a trial (fresh across trials)."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.size == 0:
            raise ValueError("empirical population needs at least one value")

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    def sample(self, n, stream):
        if n > self.values.size:
            raise ValueError(f"cannot subsample {n} points from a dataset of {self.values.size}")
        return self.values[_indices_without_replacement(self.values.size, n, stream)]


def _indices_without_replacement(size: int, n: int, stream: NoiseStream) -> np.ndarray:
    """Uniform n-subset of range(size).

    Small relative sizes use i.i.d. draws deduplicated in first-appearance
    order, which is exactly sequential sampling without replacement but
    O(n) instead of the O(size) cost of a full permutation.
    """
    if 3 * n >= size:
        return stream.permutation(size)[:n]
    gen = stream.generator
    collected = np.empty(0, dtype=np.int64)
    while collected.size < n:
        batch = gen.integers(0, size, size=n - collected.size + 8)
        both = np.concatenate([collected, batch])
        _, first = np.unique(both, return_index=True)
        first.sort()
        collected = both[first]
    return collected[:n]


def lognormal_sigma_from_raw_variance(median: float, variance: float) -> float:
    """Log-scale sigma such that exp(N(ln median, sigma^2)) has the given
    raw-scale variance."""
    if median <= 0 or variance <= 0:
        raise ValueError("median and variance must be positive")
    y = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * variance / median**2))
    return math.sqrt(math.log(y))


def _build_lognormal(kw: dict) -> "LogNormal":
    median = kw.pop("median")
    if "sigma_log" in kw:
        sigma = kw.pop("sigma_log")
    else:
        # alternative raw-scale parameterization, converted to log scale
        sigma = lognormal_sigma_from_raw_variance(median, kw.pop("raw_variance"))
    return LogNormal(median=median, sigma_log=sigma)


_POP_BUILDERS = {
    "point-mass": lambda kw: PointMass(mu=kw.pop("mu")),
    "two-point": lambda kw: TwoPoint(v=kw.pop("v"), p=kw.pop("p")),
    "bernoulli": lambda kw: BernoulliPop(p=kw.pop("p")),
    "gaussian": lambda kw: Gaussian(mu=kw.pop("mu"), sigma=kw.pop("sigma", 1.0)),
    "lognormal": _build_lognormal,
}


def parse_population(spec: str) -> Population:
    """Parse the population mini-grammar, e.g.

        lognormal:median=60000,sigma_log=1
        gaussian:mu=3,sigma=1
        two-point:v=2,p=0.5

    A lognormal may alternatively be given a raw-scale ``raw_variance``
    instead of ``sigma_log``.
    """
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind not in _POP_BUILDERS:
        raise ValueError(f"unknown population kind '{kind}'; expected one of {sorted(_POP_BUILDERS)}")
    kwargs: dict[str, float] = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not _:
                raise ValueError(f"bad population parameter '{item}' (expected key=value)")
            kwargs[key.strip()] = float(val)
    try:
        pop = _POP_BUILDERS[kind](dict(kwargs))
    except KeyError as exc:
        raise ValueError(f"population '{kind}' is missing parameter {exc}") from exc
    return pop


# ---------------------------------------------------------------------------
# report rows
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = [
    "mechanism",
    "eps",
    "delta",
    "param",
    "trials",
    "failures",
    "bias",
    "bias_ci",
    "se",
    "rmse",
    "rmse_ci",
]


@dataclass(frozen=True)
class ReportRow:
    mechanism: str
    eps: float
    delta: float
    param: float
    trials: int
    failures: int
    bias: float
    bias_ci: float
    se: float
    rmse: float
    rmse_ci: float


@dataclass
class SweepReport:
    rows: list[ReportRow] = field(default_factory=list)
    config: dict = field(default_factory=dict)


Mech = Callable[[np.ndarray, NoiseStream], Union[EstimateOutcome, float]]


def _row_stats(estimates: np.ndarray, true_mean: float) -> tuple[float, float, float, float, float]:
    err = estimates - true_mean
    m = err.size
    bias = float(err.mean())
    rmse = float(math.sqrt(np.mean(err**2)))
    se = float(err.std(ddof=1)) if m > 1 else 0.0
    bias_ci = Z_95 * se / math.sqrt(m) if m > 1 else math.inf
    sq = err**2
    if m > 1 and rmse > 0:
        rmse_ci = Z_95 * float(sq.std(ddof=1)) / (2.0 * rmse * math.sqrt(m))
    else:
        rmse_ci = 0.0 if rmse == 0 else math.inf
    return bias, bias_ci, se, rmse, rmse_ci


def monte_carlo(
    mech: Mech,
    pop: Population,
    n: int,
    trials: int,
    master_seed: int,
    *,
    mechanism: str = "custom",
    eps: float = 0.0,
    delta: float = 0.0,
    param: float = float("nan"),
    row_id: int = 0,
) -> ReportRow:
    """Estimate the bias / SE / RMSE of ``mech`` on n-sample draws from
    ``pop`` over independent trials.

    Trial t uses the stream (master_seed, (row_id, t)); the data and the
    mechanism consume disjoint splits of it.  Failure outcomes are
    counted in the ``failures`` column and excluded from the moments.
    """
    if trials < 2:
        raise ValueError(f"need at least 2 trials, got {trials}")
    values = np.empty(trials, dtype=float)
    kept = 0
    failures = 0
    for t in range(trials):
        trial = NoiseStream(master_seed, (row_id, t))
        data = pop.sample(n, trial.split(0))
        out = mech(data, trial.split(1))
        if isinstance(out, EstimateOutcome):
            if out.failed:
                failures += 1
                continue
            values[kept] = out.value
        else:
            values[kept] = float(out)
        kept += 1
    if kept == 0:
        nan = float("nan")
        return ReportRow(mechanism, eps, delta, param, trials, failures, nan, nan, nan, nan, nan)
    bias, bias_ci, se, rmse, rmse_ci = _row_stats(values[:kept], pop.mean)
    return ReportRow(mechanism, eps, delta, param, trials, failures, bias, bias_ci, se, rmse, rmse_ci)


def threshold_sweep(
    source: Union[Population, np.ndarray, Sequence[float]],
    thresholds: Sequence[float],
    eps_list: Sequence[float],
    n: int,
    trials: int,
    seed: int,
    *,
    config: Optional[dict] = None,
) -> SweepReport:
    """Full (eps x threshold) cross-product sweep of the clip-and-noise
    mechanism; rows are ordered eps-major, threshold-minor."""
    from .mechanisms import threshold_clipped_mean

    if not thresholds or not eps_list:
        raise ValueError("threshold and eps grids must be non-empty")
    pop = source if isinstance(source, Population) else Empirical(np.asarray(source, dtype=float))
    report = SweepReport(config=dict(config or {}))
    row_id = 0
    for eps in eps_list:
        for t in thresholds:
            mech = lambda data, s, _t=t, _e=eps: threshold_clipped_mean(data, _t, _e, s)
            report.rows.append(
                monte_carlo(
                    mech, pop, n, trials, seed,
                    mechanism="threshold", eps=eps, delta=0.0, param=t, row_id=row_id,
                )
            )
            row_id += 1
    return report


def optimal_threshold(report: SweepReport) -> SweepReport:
    """Per-eps row minimizing RMSE (ties resolved toward the smaller
    threshold); requires at least two thresholds per eps."""
    by_eps: dict[float, list[ReportRow]] = {}
    for row in report.rows:
        by_eps.setdefault(row.eps, []).append(row)
    out = SweepReport(config=dict(report.config))
    for eps in sorted(by_eps):
        rows = sorted(by_eps[eps], key=lambda r: r.param)
        if len(rows) < 2:
            raise ValueError(f"need at least 2 thresholds per eps, got {len(rows)} for eps={eps}")
        out.rows.append(min(rows, key=lambda r: (r.rmse, r.param)))
    return out


def kv_bias_sweep(
    mu_grid: Sequence[float],
    n: int,
    trials: int,
    eps: float,
    delta: float,
    seed: int,
    *,
    sigma: float = 1.0,
    c: float = 1.2,
    n1: Optional[int] = None,
    config: Optional[dict] = None,
) -> SweepReport:
    """Bias of the offset-bin estimator vs the fixed-bin baseline on
    Gaussian(mu, 1) data across a grid of true means.

    Emits two rows per grid point, mechanisms ``fine`` and ``fine-kv``
    with param = mu.  Defaults use unit bins (sigma = 1) and a clipping
    radius tight enough that the fixed-bin baseline's cyclic clipping
    bias is decisively visible at unit period (at c ~ 2 the two adjacent
    bins' conditional biases largely cancel); the offset estimator stays
    unbiased for any such choice.
    """
    from .symmetric import FineParams, fine_estimate, kv_coarse_estimate

    if not len(mu_grid):
        raise ValueError("mu grid must be non-empty")
    n1 = n // 2 if n1 is None else n1
    params = FineParams(eps=eps, delta=delta, c=c, sigma=sigma, n1=n1, n2=n - n1)
    report = SweepReport(config=dict(config or {}))
    row_id = 0
    for mu in mu_grid:
        pop = Gaussian(mu, 1.0)
        ours = lambda data, s: fine_estimate(data, params, s)
        kv = lambda data, s: fine_estimate(data, params, s, coarse_fn=kv_coarse_estimate)
        report.rows.append(
            monte_carlo(ours, pop, n, trials, seed, mechanism="fine", eps=eps, delta=delta, param=mu, row_id=row_id)
        )
        report.rows.append(
            monte_carlo(kv, pop, n, trials, seed, mechanism="fine-kv", eps=eps, delta=delta, param=mu, row_id=row_id + 1)
        )
        row_id += 2
    return report


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------


@dataclass
class HistogramTable:
    mechanism: str
    edges: np.ndarray  # bins + 1 monotone edges
    counts: np.ndarray  # per-bin counts
    data_mean: float


def sampling_histogram(
    dataset,
    mech: Mech,
    n: int,
    trials: int,
    bins: int,
    seed: int,
    *,
    mechanism: str = "custom",
    edges: Optional[np.ndarray] = None,
    row_id: int = 0,
) -> HistogramTable:
    """Histogram of a mechanism's outputs over repeated subsamples of a
    dataset, together with the dataset mean (the target the sampling
    distribution should center on)."""
    values = np.asarray(dataset, dtype=float)
    if n > values.size:
        raise ValueError(f"cannot subsample {n} points from a dataset of {values.size}")
    pop = Empirical(values)
    outputs = []
    for t in range(trials):
        trial = NoiseStream(seed, (row_id, t))
        data = pop.sample(n, trial.split(0))
        out = mech(data, trial.split(1))
        if isinstance(out, EstimateOutcome):
            if out.failed:
                continue
            outputs.append(out.value)
        else:
            outputs.append(float(out))
    outputs = np.asarray(outputs, dtype=float)
    if edges is None:
        counts, edges = np.histogram(outputs, bins=bins)
    else:
        counts, edges = np.histogram(outputs, bins=edges)
    return HistogramTable(mechanism, edges, counts, pop.mean)


def has_histogram_dip(counts, depth: float = 0.5, peak_frac: float = 0.25) -> bool:
    """Crude multimodality detector: is there an interior valley dipping
    below ``depth`` times the smaller of two flanking peaks?

    Peaks only count when they reach ``peak_frac`` of the global maximum,
    which keeps sampling noise in the tails from registering.  This is a
    heuristic for flagging the integer-clustered sampling distributions
    of the fixed-bin estimator, not a statistical test.
    """
    c = np.asarray(counts, dtype=float)
    if c.size < 3:
        return False
    floor = peak_frac * c.max()
    for i in range(1, c.size - 1):
        left = c[:i].max()
        right = c[i + 1 :].max()
        if left >= floor and right >= floor and c[i] < depth * min(left, right):
            return True
    return False


def data_histogram(values, bins: int, *, mechanism: str = "data") -> HistogramTable:
    """Plain histogram of raw values (used as the distribution silhouette
    behind sweep curves)."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("empty dataset")
    counts, edges = np.histogram(x, bins=bins)
    return HistogramTable(mechanism, edges, counts, float(x.mean()))


# ---------------------------------------------------------------------------
# dataset ingestion
# ---------------------------------------------------------------------------


def load_column_csv(path, column: str) -> np.ndarray:
    """Load one numeric column from a headered CSV.

    Errors carry enough context to act on: a missing column names the
    available headers, a value that does not parse names its row number.
    """
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IOError(f"cannot open dataset '{path}': {exc}") from exc
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise IOError(f"dataset '{path}' is empty (no header row)")
        if column not in reader.fieldnames:
            raise IOError(
                f"column '{column}' not found in '{path}'; available columns: "
                + ", ".join(reader.fieldnames)
            )
        out = []
        for i, record in enumerate(reader, start=2):  # header is line 1
            raw = record.get(column)
            try:
                out.append(float(raw))
            except (TypeError, ValueError) as exc:
                raise IOError(f"'{path}' row {i}: could not parse {raw!r} as a number") from exc
    if not out:
        raise IOError(f"dataset '{path}' has no data rows")
    values = np.asarray(out, dtype=float)
    logger.info(
        "loaded %d values from %s[%s]: mean=%.6g min=%.6g max=%.6g",
        values.size, path, column, values.mean(), values.min(), values.max(),
    )
    return values


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _write_header_comments(fh, config: dict, version: str) -> None:
    fh.write(f"# version: {version}\n")
    fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")


def _read_header_comments(lines: Iterable[str]) -> tuple[dict, str, list[str]]:
    config: dict = {}
    version = ""
    rest: list[str] = []
    it = iter(lines)
    for line in it:
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("version:"):
                version = body[len("version:"):].strip()
            elif body.startswith("config:"):
                config = json.loads(body[len("config:"):].strip())
        else:
            rest.append(line)
            break
    rest.extend(it)
    return config, version, rest


def write_sweep_csv(report: SweepReport, path, version: str = "0") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_header_comments(fh, report.config, version)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in report.rows:
            writer.writerow([_fmt(getattr(row, col)) for col in SWEEP_COLUMNS])


def read_sweep_csv(path) -> tuple[SweepReport, str]:
    """Read a sweep CSV back into a report; returns (report, version)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        config, version, rest = _read_header_comments(fh)
    reader = csv.reader(io.StringIO("".join(rest)))
    header = next(reader, None)
    if header != SWEEP_COLUMNS:
        raise IOError(f"'{path}' does not carry the sweep column contract {SWEEP_COLUMNS}, got {header}")
    report = SweepReport(config=config)
    for rec in reader:
        if not rec:
            continue
        report.rows.append(
            ReportRow(
                mechanism=rec[0],
                eps=float(rec[1]),
                delta=float(rec[2]),
                param=float(rec[3]),
                trials=int(rec[4]),
                failures=int(rec[5]),
                bias=float(rec[6]),
                bias_ci=float(rec[7]),
                se=float(rec[8]),
                rmse=float(rec[9]),
                rmse_ci=float(rec[10]),
            )
        )
    return report, version


HIST_COLUMNS = ["mechanism", "bin_left", "bin_right", "count"]


def write_histogram_csv(tables: Sequence[HistogramTable], path, config: dict, version: str = "0") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_header_comments(fh, config, version)
        for table in tables:
            fh.write(f"# data_mean[{table.mechanism}]: {_fmt(table.data_mean)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HIST_COLUMNS)
        for table in tables:
            for i in range(table.counts.size):
                writer.writerow(
                    [table.mechanism, _fmt(table.edges[i]), _fmt(table.edges[i + 1]), _fmt(table.counts[i])]
                )


def read_histogram_csv(path) -> tuple[list[HistogramTable], dict, str]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    config: dict = {}
    version = ""
    means: dict[str, float] = {}
    data_lines: list[str] = []
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("version:"):
                version = body[len("version:"):].strip()
            elif body.startswith("config:"):
                config = json.loads(body[len("config:"):].strip())
            elif body.startswith("data_mean["):
                name, _, val = body[len("data_mean["):].partition("]:")
                means[name] = float(val)
        else:
            data_lines.append(line)
    reader = csv.reader(io.StringIO("".join(data_lines)))
    header = next(reader, None)
    if header != HIST_COLUMNS:
        raise IOError(f"'{path}' does not carry the histogram column contract {HIST_COLUMNS}, got {header}")
    groups: dict[str, list[tuple[float, float, float]]] = {}
    order: list[str] = []
    for rec in reader:
        if not rec:
            continue
        name = rec[0]
        if name not in groups:
            groups[name] = []
            order.append(name)
        groups[name].append((float(rec[1]), float(rec[2]), float(rec[3])))
    tables = []
    for name in order:
        rows = groups[name]
        edges = np.asarray([r[0] for r in rows] + [rows[-1][1]], dtype=float)
        counts = np.asarray([r[2] for r in rows], dtype=float)
        tables.append(HistogramTable(name, edges, counts, means.get(name, float("nan"))))
    return tables, config, version
