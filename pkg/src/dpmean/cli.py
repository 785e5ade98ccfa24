"""Command-line frontend.

Three subcommands:

* ``estimate`` -- run one mechanism on one input source and print the
  estimate with its spent budget,
* ``sweep``    -- Monte Carlo sweeps (threshold grids, the bias
  comparison of the offset vs fixed-bin estimators, sampling-distribution
  histograms), written as self-describing CSV,
* ``bounds``   -- evaluate a named tradeoff curve over a parameter grid.

Every output file begins with header comments echoing the artifact
version and the fully resolved run configuration as one JSON line, so
re-running the printed configuration reproduces the file byte for byte.

Exit codes: 0 success, 1 usage or configuration error, 2 mechanism
failure sentinel, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__, bench, bounds
from .bench import (
    Empirical,
    data_histogram,
    kv_bias_sweep,
    load_column_csv,
    optimal_threshold,
    parse_population,
    sampling_histogram,
    threshold_sweep,
    write_histogram_csv,
    write_sweep_csv,
)
from .mechanisms import (
    MomentModel,
    PrivacyBudget,
    clipped_mean_laplace,
    combined_unbiased_mean,
    name_and_shame_mean,
    threshold_clipped_mean,
)
from .noise import NoiseStream
from .symmetric import (
    CoarseParams,
    FineParams,
    coarse_estimate,
    fine_estimate,
    gaussian_defaults,
    kv_coarse_estimate,
)
from .unknown_n import smooth_sens_mean

SEED_ENV_VAR = "DP_TRILEMMA_SEED"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BOTTOM = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


# ---------------------------------------------------------------------------
# flag helpers: every value flag is a string so the config file and the
# command line share one conversion path with errors naming the flag
# ---------------------------------------------------------------------------


def _require(ns: dict, key: str, flag: str) -> str:
    val = ns.get(key)
    if val is None:
        raise UsageError(f"missing required flag {flag}")
    return val


def _as_float(raw: str, flag: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"{flag} expects a number, got '{raw}'") from None


def _as_int(raw: str, flag: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{flag} expects an integer, got '{raw}'") from None


def _get_float(ns: dict, key: str, flag: str, default: Optional[float] = None) -> float:
    raw = ns.get(key)
    if raw is None:
        if default is None:
            raise UsageError(f"missing required flag {flag}")
        return default
    return _as_float(raw, flag)


def _get_int(ns: dict, key: str, flag: str, default: Optional[int] = None) -> int:
    raw = ns.get(key)
    if raw is None:
        if default is None:
            raise UsageError(f"missing required flag {flag}")
        return default
    return _as_int(raw, flag)


def _parse_grid(raw: str, flag: str) -> list[float]:
    """Grid syntax: comma list '0.01,0.1,1' or inclusive range 'a:b:step'."""
    raw = raw.strip()
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise UsageError(f"{flag} range syntax is start:stop:step, got '{raw}'")
        start, stop, step = (_as_float(p, flag) for p in parts)
        if step <= 0:
            raise UsageError(f"{flag} range step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    return [_as_float(item, flag) for item in raw.split(",") if item.strip()]


def _resolve_seed(ns: dict) -> int:
    if ns.get("seed") is not None:
        return _as_int(ns["seed"], "--seed")
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return _as_int(env, SEED_ENV_VAR)
    return 0


def _load_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment; keys match flag names
    without the leading dashes (e.g. ``eps = 1`` for ``--eps 1``)."""
    try:
        text = open(path, "r", encoding="utf-8").read()
    except OSError as exc:
        raise IOError(f"cannot open config '{path}': {exc}") from exc
    out: dict[str, str] = {}
    for i, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, val = body.partition("=")
        if not sep:
            raise UsageError(f"config '{path}' line {i}: expected key = value, got '{line}'")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _merge_config(args: argparse.Namespace) -> dict:
    """Resolved string-valued namespace: defaults < config file < flags."""
    ns = {k: v for k, v in vars(args).items() if v is not None and k not in ("func",)}
    if args.config:
        file_conf = _load_config_file(args.config)
        for key, val in file_conf.items():
            ns.setdefault(key, val)
    return ns


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

MECHANISM_IDS = [
    "clipped-mean",
    "threshold",
    "name-and-shame",
    "combined",
    "coarse",
    "fine",
    "fine-kv",
    "smooth-sens",
]


def _estimate_data(ns: dict, stream: NoiseStream) -> np.ndarray:
    has_input = ns.get("input") is not None
    has_pop = ns.get("pop") is not None
    if has_input == has_pop:
        raise UsageError("estimate needs exactly one input source: --input or --pop")
    if has_input:
        column = _require(ns, "column", "--column")
        return load_column_csv(ns["input"], column)
    pop = parse_population(ns["pop"])
    n = _get_int(ns, "n", "--n")
    return pop.sample(n, stream.split(0))


def _run_mechanism(ns: dict, data: np.ndarray, stream: NoiseStream):
    mech = ns.get("mech")
    if mech is None:
        raise UsageError("missing required flag --mech")
    if mech not in MECHANISM_IDS:
        raise UsageError(f"unknown mechanism '{mech}'; valid ids: {', '.join(MECHANISM_IDS)}")
    s = stream.split(1)
    if mech == "clipped-mean":
        model = MomentModel(
            a=_get_float(ns, "a", "--a"),
            b=_get_float(ns, "b", "--b"),
            lam=_get_float(ns, "lam", "--lambda", 2.0),
            psi=_get_float(ns, "psi", "--psi", 1.0),
        )
        return clipped_mean_laplace(data, model, _get_float(ns, "eps", "--eps"), _get_float(ns, "beta", "--beta"), s)
    if mech == "threshold":
        return threshold_clipped_mean(data, _get_float(ns, "threshold", "--threshold"), _get_float(ns, "eps", "--eps"), s)
    if mech == "name-and-shame":
        return name_and_shame_mean(data, _get_float(ns, "delta", "--delta"), s)
    if mech == "combined":
        model = MomentModel(
            a=_get_float(ns, "a", "--a"),
            b=_get_float(ns, "b", "--b"),
            lam=_get_float(ns, "lam", "--lambda", 4.0),
            psi=_get_float(ns, "psi", "--psi", 1.0),
        )
        budget = PrivacyBudget(_get_float(ns, "eps", "--eps"), _get_float(ns, "delta", "--delta"))
        return combined_unbiased_mean(data, model, budget, s)
    if mech == "coarse":
        params = CoarseParams(_get_float(ns, "eps", "--eps"), _get_float(ns, "delta", "--delta"))
        return coarse_estimate(data, params, s)
    if mech in ("fine", "fine-kv"):
        eps = _get_float(ns, "eps", "--eps")
        delta = _get_float(ns, "delta", "--delta")
        if ns.get("n1") is not None:
            n1 = _as_int(ns["n1"], "--n1")
            params = FineParams(
                eps=eps,
                delta=delta,
                c=_get_float(ns, "c", "--c"),
                sigma=_get_float(ns, "sigma", "--sigma", 10.0),
                n1=n1,
                n2=data.size - n1,
            )
        else:
            params = gaussian_defaults(data.size, eps, delta)
        coarse_fn = kv_coarse_estimate if mech == "fine-kv" else coarse_estimate
        return fine_estimate(data, params, s, coarse_fn=coarse_fn)
    if mech == "smooth-sens":
        return smooth_sens_mean(
            data,
            _get_float(ns, "eps", "--eps"),
            _get_float(ns, "a", "--a"),
            _get_float(ns, "b", "--b"),
            s,
        )
    raise AssertionError(mech)


def cmd_estimate(args: argparse.Namespace) -> int:
    ns = _merge_config(args)
    seed = _resolve_seed(ns)
    stream = NoiseStream(seed)
    data = _estimate_data(ns, stream)
    outcome = _run_mechanism(ns, data, stream)
    budget = outcome.budget
    print(f"budget: eps={budget.eps:.12g} delta={budget.delta:.12g}")
    if outcome.failed:
        print("estimate: bottom (mechanism declined to answer)")
        return EXIT_BOTTOM
    print(f"estimate: {outcome.value:.12g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

_FIG1_THRESHOLDS = [round(40000.0 * 1.6**j, 6) for j in range(12)]
_FIG2_THRESHOLDS = [round(20000.0 * 1.35**j, 6) for j in range(14)]

PRESETS = {
    "fig1": {
        "kind": "threshold",
        "pop": "lognormal:median=60000,sigma_log=1",
        "n": "500",
        "trials": "5000",
        "eps_grid": "0.01,0.1,1,4",
        "thresholds": ",".join(str(t) for t in _FIG1_THRESHOLDS),
    },
    "fig2": {
        "kind": "threshold",
        "n": "500",
        "trials": "5000",
        "eps_grid": "0.01,0.05,0.1,1,2,4",
        "thresholds": ",".join(str(t) for t in _FIG2_THRESHOLDS),
    },
    "table1": {
        "kind": "optimal-threshold",
        "n": "500",
        "trials": "5000",
        "eps_grid": "0.01,0.05,0.1,1,2,4",
        "thresholds": ",".join(str(t) for t in _FIG2_THRESHOLDS),
    },
    "fig3a": {
        "kind": "kv",
        "n": "400",
        "trials": "20000",
        "eps": "1",
        "delta": "1e-4",
        "mu_grid": "0:2:0.1",
    },
    "fig3b": {
        "kind": "hist",
        "n": "400",
        "trials": "20000",
        "bins": "60",
        "eps": "1",
        "delta": "0.05",
    },
}


def _sweep_source(ns: dict):
    if ns.get("input") is not None:
        column = _require(ns, "column", "--column")
        return load_column_csv(ns["input"], column), {"input": ns["input"], "column": column}
    if ns.get("pop") is not None:
        return parse_population(ns["pop"]), {"pop": ns["pop"]}
    raise UsageError("sweep needs a data source: --pop or --input")


def _provenance(ns: dict, seed: int, extra: dict) -> dict:
    # the echoed config describes the computation, not the destination:
    # output paths are excluded so reruns to new files stay byte-identical
    drop = ("func", "config", "seed", "output", "silhouette")
    keep = {
        k: v
        for k, v in ns.items()
        if k not in drop and v is not None and isinstance(v, (str, int, float))
    }
    keep.update(extra)
    keep["seed"] = seed
    keep["version"] = __version__
    return keep


def _synthetic_height_dataset(seed: int, size: int = 5000) -> np.ndarray:
    """Fixed symmetric synthetic dataset (height-like values) for the
    sampling-distribution preset."""
    stream = NoiseStream(seed, (int(1e9),))
    return 66.0 + 4.0 * stream.normal(size)


def cmd_sweep(args: argparse.Namespace) -> int:
    ns = _merge_config(args)
    preset = ns.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset '{preset}'; valid presets: {', '.join(sorted(PRESETS))}")
        for key, val in PRESETS[preset].items():
            ns.setdefault(key, val)
    kind = ns.get("kind")
    if kind is None:
        raise UsageError("missing --kind (or --preset)")
    seed = _resolve_seed(ns)
    output = _require(ns, "output", "--output")

    if kind in ("threshold", "optimal-threshold"):
        source, src_conf = _sweep_source(ns)
        thresholds = _parse_grid(_require(ns, "thresholds", "--thresholds"), "--thresholds")
        eps_grid = _parse_grid(_require(ns, "eps_grid", "--eps-grid"), "--eps-grid")
        n = _get_int(ns, "n", "--n")
        trials = _get_int(ns, "trials", "--trials")
        config = _provenance(ns, seed, src_conf)
        report = threshold_sweep(source, thresholds, eps_grid, n, trials, seed, config=config)
        if kind == "optimal-threshold":
            full_path = output + ".sweep.csv"
            write_sweep_csv(report, full_path, version=__version__)
            best = optimal_threshold(report)
            write_sweep_csv(best, output, version=__version__)
            print(f"wrote {output} (optimal rows) and {full_path} (full sweep)")
        else:
            write_sweep_csv(report, output, version=__version__)
            print(f"wrote {output} ({len(report.rows)} rows)")
        if ns.get("silhouette") is not None:
            values = source.values if isinstance(source, Empirical) else source.sample(
                100000, NoiseStream(seed, (int(2e9),))
            )
            table = data_histogram(values, 80)
            write_histogram_csv([table], ns["silhouette"], config, version=__version__)
            print(f"wrote {ns['silhouette']} (distribution silhouette)")
        return EXIT_OK

    if kind == "kv":
        mu_grid = _parse_grid(_require(ns, "mu_grid", "--mu-grid"), "--mu-grid")
        n = _get_int(ns, "n", "--n")
        trials = _get_int(ns, "trials", "--trials")
        eps = _get_float(ns, "eps", "--eps")
        delta = _get_float(ns, "delta", "--delta")
        config = _provenance(ns, seed, {})
        report = kv_bias_sweep(
            mu_grid, n, trials, eps, delta, seed,
            sigma=_get_float(ns, "sigma", "--sigma", 1.0),
            c=_get_float(ns, "c", "--c", 1.2),
            config=config,
        )
        write_sweep_csv(report, output, version=__version__)
        print(f"wrote {output} ({len(report.rows)} rows)")
        return EXIT_OK

    if kind == "hist":
        if ns.get("input") is not None:
            dataset = load_column_csv(ns["input"], _require(ns, "column", "--column"))
        else:
            dataset = _synthetic_height_dataset(seed)
        n = _get_int(ns, "n", "--n")
        trials = _get_int(ns, "trials", "--trials")
        bins = _get_int(ns, "bins", "--bins", 60)
        eps = _get_float(ns, "eps", "--eps")
        delta = _get_float(ns, "delta", "--delta")
        n1 = _get_int(ns, "n1", "--n1", n // 2)
        params = FineParams(
            eps=eps, delta=delta,
            c=_get_float(ns, "c", "--c", 2.0),
            sigma=_get_float(ns, "sigma", "--sigma", 1.0),
            n1=n1, n2=n - n1,
        )
        config = _provenance(ns, seed, {})
        ours = sampling_histogram(
            dataset, lambda d, s: fine_estimate(d, params, s), n, trials, bins, seed,
            mechanism="fine", row_id=0,
        )
        kv = sampling_histogram(
            dataset,
            lambda d, s: fine_estimate(d, params, s, coarse_fn=kv_coarse_estimate),
            n, trials, bins, seed,
            mechanism="fine-kv", edges=ours.edges, row_id=1,
        )
        write_histogram_csv([ours, kv], output, config, version=__version__)
        print(f"wrote {output} (2 histograms)")
        return EXIT_OK

    raise UsageError(f"unknown sweep kind '{kind}'")


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

BOUND_IDS = [
    "nonprivate-floor",
    "hodges-mse",
    "ksu",
    "trilemma",
    "trilemma-lambda2",
    "tightness",
    "shuffled-eps",
    "shuffling",
]

BOUND_CSV_COLUMNS = ["n", "eps", "delta", "beta", "bound_name", "value", "regime_ok"]

# grid axes, in cross-product (row-emission) order
_BOUND_AXES = ["n", "eps", "delta", "beta", "gamma", "tau", "lam", "psi", "kappa", "m", "delta1"]

_BOUND_REQUIRED = {
    "nonprivate-floor": ["n"],
    "hodges-mse": ["n"],
    "ksu": ["n", "eps", "delta"],
    "trilemma": ["n", "eps", "delta", "beta"],
    "trilemma-lambda2": ["n", "eps", "delta", "beta"],
    "tightness": ["n", "eps", "delta", "beta"],
    "shuffled-eps": ["eps", "m", "delta1"],
    "shuffling": ["n", "eps", "delta", "beta"],
}


def _eval_bound(name: str, point: dict) -> float:
    if name == "nonprivate-floor":
        return bounds.nonprivate_floor(int(point["n"]))
    if name == "hodges-mse":
        return bounds.hodges_mse(int(point["n"]))
    if name == "ksu":
        return bounds.ksu_lower_bound(int(point["n"]), point["eps"], point["delta"])
    if name == "trilemma":
        tau = point.get("tau")
        if tau is None:
            tau = bounds.tau_from_moment(point["delta"], point.get("kappa", 2.0))
        lam = point.get("lam", 2.0)
        gamma = point.get("gamma")
        if gamma is None:
            gamma = bounds.optimal_gamma(point["beta"], lam, tau, point["eps"])
        return bounds.trilemma_lower_bound(
            bounds.TrilemmaPoint(
                n=int(point["n"]), eps=point["eps"], delta=point["delta"],
                beta=point["beta"], lam=lam, tau=tau, gamma=gamma,
            )
        )
    if name == "trilemma-lambda2":
        return bounds.trilemma_lambda2(int(point["n"]), point["eps"], point["delta"], point["beta"])
    if name == "tightness":
        return bounds.tightness_upper_bound(
            int(point["n"]), point["eps"], point["delta"], point["beta"], point.get("psi", 1.0)
        )
    if name == "shuffled-eps":
        return bounds.shuffled_epsilon(point["eps"], int(point["m"]), point["delta1"]).eps
    if name == "shuffling":
        return bounds.shuffling_lower_bound(int(point["n"]), point["eps"], point["delta"], point["beta"])
    raise UsageError(f"unknown bound '{name}'; valid bounds: {', '.join(BOUND_IDS)}")


def cmd_bounds(args: argparse.Namespace) -> int:
    ns = _merge_config(args)
    name = ns.get("bound")
    if name is None:
        raise UsageError("missing required flag --bound")
    if name not in BOUND_IDS:
        raise UsageError(f"unknown bound '{name}'; valid bounds: {', '.join(BOUND_IDS)}")
    seed = _resolve_seed(ns)
    output = _require(ns, "output", "--output")

    grids: dict[str, list[float]] = {}
    for axis in _BOUND_AXES:
        raw = ns.get(axis if axis != "lam" else "lam")
        if raw is not None:
            grids[axis] = _parse_grid(raw, f"--{axis}")
    for needed in _BOUND_REQUIRED[name]:
        if needed not in grids:
            raise UsageError(f"bound '{name}' requires --{needed}")

    axes = [a for a in _BOUND_AXES if a in grids]
    points: list[dict] = [{}]
    for axis in axes:
        points = [dict(p, **{axis: v}) for p in points for v in grids[axis]]

    config = _provenance(ns, seed, {"bound": name})
    try:
        fh = open(output, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise IOError(f"cannot write '{output}': {exc}") from exc
    with fh:
        fh.write(f"# version: {__version__}\n")
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        fh.write(",".join(BOUND_CSV_COLUMNS) + "\n")
        for point in points:
            try:
                value = _eval_bound(name, point)
                ok = "true"
            except bounds.RegimeError:
                value = float("nan")
                ok = "false"
            fh.write(
                ",".join(
                    [
                        f"{point.get('n', float('nan')):.12g}",
                        f"{point.get('eps', float('nan')):.12g}",
                        f"{point.get('delta', float('nan')):.12g}",
                        f"{point.get('beta', float('nan')):.12g}",
                        name,
                        f"{value:.12g}",
                        ok,
                    ]
                )
                + "\n"
            )
    print(f"wrote {output} ({len(points)} rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------


def _add_common(p: _Parser) -> None:
    p.add_argument("--seed", help=f"decimal 64-bit master seed (fallback: ${SEED_ENV_VAR}, then 0)")
    p.add_argument("--config", help="key = value config file supplying defaults for any flag")
    p.add_argument("--output", help="output file path")
    p.add_argument("--input", help="input CSV path")
    p.add_argument("--column", help="CSV column to read")
    p.add_argument("--pop", help="population spec, e.g. lognormal:median=60000,sigma_log=1")
    p.add_argument("--n", help="sample size per trial")
    p.add_argument("--trials", help="Monte Carlo trials")
    p.add_argument("--eps", help="privacy parameter epsilon")
    p.add_argument("--delta", help="privacy parameter delta")
    p.add_argument("--beta", help="bias target / bias bound")
    p.add_argument("--lambda", dest="lam", help="moment order")
    p.add_argument("--psi", help="central moment bound")


def build_parser() -> _Parser:
    parser = _Parser(prog="dpmean", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"dpmean {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    est = sub.add_parser("estimate", help="run one mechanism on one input source")
    _add_common(est)
    est.add_argument("--mech", help=f"mechanism id, one of: {', '.join(MECHANISM_IDS)}")
    est.add_argument("--threshold", help="clipping threshold T")
    est.add_argument("--a", help="lower end of the promised mean range")
    est.add_argument("--b", help="upper end of the promised mean range")
    est.add_argument("--sigma", help="coarse-stage scale")
    est.add_argument("--c", help="fine-stage clipping radius")
    est.add_argument("--n1", help="coarse-stage sample count")
    est.set_defaults(func=cmd_estimate)

    sw = sub.add_parser("sweep", help="Monte Carlo sweeps, written as CSV")
    _add_common(sw)
    sw.add_argument("--preset", help=f"one of: {', '.join(sorted(PRESETS))}")
    sw.add_argument("--kind", help="threshold | optimal-threshold | kv | hist")
    sw.add_argument("--thresholds", help="threshold grid (comma list or start:stop:step)")
    sw.add_argument("--eps-grid", dest="eps_grid", help="epsilon grid")
    sw.add_argument("--mu-grid", dest="mu_grid", help="true-mean grid for the kv sweep")
    sw.add_argument("--bins", help="histogram bin count")
    sw.add_argument("--sigma", help="coarse-stage scale")
    sw.add_argument("--c", help="fine-stage clipping radius")
    sw.add_argument("--n1", help="coarse-stage sample count")
    sw.add_argument("--silhouette", help="also write a distribution histogram CSV here")
    sw.set_defaults(func=cmd_sweep)

    bd = sub.add_parser("bounds", help="evaluate a tradeoff curve over a grid")
    _add_common(bd)
    bd.add_argument("--bound", help=f"bound id, one of: {', '.join(BOUND_IDS)}")
    bd.add_argument("--gamma", help="free parameter grid of the trilemma bound")
    bd.add_argument("--tau", help="tail parameter grid (defaults to delta^(1-1/kappa))")
    bd.add_argument("--kappa", help="error moment order for the tau default")
    bd.add_argument("--m", help="block count for the shuffling bounds")
    bd.add_argument("--delta1", help="amplification delta_1 grid")
    bd.set_defaults(func=cmd_bounds)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
