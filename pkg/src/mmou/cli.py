"""Batch front-end: ``mmou <command> --config <file> [--seed S] [--threads K] [--out DIR]``.

Each run writes one CSV (schema documented in docs/io.md; column order is
part of the contract) plus a ``manifest.json`` echoing the canonical
config, seed, library versions and wall time.  Identical config and seed
give byte-identical CSVs at any thread count.  Exit codes: 0 success,
2 config/validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .chain import deviation_set, stationary_distribution
from .config import COMMANDS, RunConfig, canonical_json, parse_config
from .errors import ConfigError, MmouError
from .moments import (
    covariance_lag,
    higher_moments_transient,
    multi_cross_moment,
    multi_stationary_mixed_moments,
    multi_transient_covariance,
    nonneg_definite_check,
    stationary_moments,
    transient_first_moment,
    transient_second_moment,
    two_state_example,
)
from .process import MmouSpec, MultiOuSpec, sample_multi_terminal_batch, sample_terminal_batch
from .scaling import ScalingConfig, beta_exponent, run_clt_experiment
from .transforms import estimate_transform


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_validate(cfg: RunConfig, out: Path) -> list[Path]:
    model = cfg.model
    rows = []
    chain = model.chain
    pi = stationary_distribution(chain)
    dev = deviation_set(chain)
    d = chain.d
    ident = np.eye(d)
    rows.append(("row_sum_max_abs", np.abs(chain.q.sum(axis=1)).max()))
    rows.append(("pi_stationarity", np.abs(pi @ chain.q).max()))
    rows.append(("qf_identity", np.abs(chain.q @ dev.fundamental - (dev.ergodic - ident)).max()))
    rows.append(("deviation_rowsum", np.abs(dev.deviation.sum(axis=1)).max()))
    rows.append(("pi_deviation", np.abs(pi @ dev.deviation).max()))
    rows.append(("nnd_min_eigenvalue", nonneg_definite_check(chain)))
    path = out / "validate.csv"
    _write_csv(path, ["check", "value"], rows)
    return [path]


def _cmd_simulate(cfg: RunConfig, out: Path) -> list[Path]:
    t = cfg.params["t"]
    n = cfg.params["n_paths"]
    path = out / "simulate.csv"
    if isinstance(cfg.model, MultiOuSpec):
        values, states = sample_multi_terminal_batch(cfg.model, n, t, cfg.seed)
        header = ["path"] + [f"value_{j + 1}" for j in range(cfg.model.j_dim)] + ["state"]
        rows = (
            [i] + [values[i, j] for j in range(values.shape[1])] + [states[i] + 1]
            for i in range(n)
        )
    else:
        values, states = sample_terminal_batch(cfg.model, n, t, cfg.seed)
        header = ["path", "value", "state"]
        rows = ([i, values[i], states[i] + 1] for i in range(n))
    _write_csv(path, header, rows)
    return [path]


def _cmd_moments(cfg: RunConfig, out: Path) -> list[Path]:
    spec: MmouSpec = cfg.model
    times = cfg.params["times"]
    max_order = cfg.params["max_order"]
    first = transient_first_moment(spec, times)
    second = transient_second_moment(spec, times)
    d = spec.d
    header = (
        ["t", "mu", "v"]
        + [f"nu_{i + 1}" for i in range(d)]
        + [f"w_{i + 1}" for i in range(d)]
        + [f"m{k}" for k in range(3, max_order + 1)]
    )
    extra = None
    if max_order > 2:
        extra = higher_moments_transient(spec, max_order, times)
    rows = []
    for k, t in enumerate(times):
        row = [t, first.aggregate[k], second.variance[k]]
        row += list(first.per_state[k])
        row += list(second.per_state[k])
        if extra is not None:
            row += [extra[order].aggregate[k] for order in range(3, max_order + 1)]
        rows.append(row)
    path = out / "moments.csv"
    _write_csv(path, header, rows)
    return [path]


def _cmd_covariance(cfg: RunConfig, out: Path) -> list[Path]:
    spec: MmouSpec = cfg.model
    rows = [(t, u, covariance_lag(spec, t, u)) for t, u in cfg.params["pairs"]]
    path = out / "covariance.csv"
    _write_csv(path, ["t", "u", "c"], rows)
    return [path]


def _cmd_transform(cfg: RunConfig, out: Path) -> list[Path]:
    spec: MmouSpec = cfg.model
    th = cfg.params["theta"]
    theta = np.linspace(th["lo"], th["hi"], th["n"]) if isinstance(th, dict) else np.asarray(th)
    surface = estimate_transform(spec, theta, cfg.params["times"], cfg.params["n_paths"], cfg.seed)
    rows = []
    for k, t in enumerate(surface.times):
        for j, thv in enumerate(surface.theta):
            for i in range(spec.d):
                rows.append((t, thv, i + 1, surface.values[k, j, i], surface.stderr[k, j, i]))
    path = out / "transform.csv"
    _write_csv(path, ["t", "theta", "state", "estimate", "stderr"], rows)
    return [path]


def _cmd_scaling(cfg: RunConfig, out: Path) -> list[Path]:
    spec: MmouSpec = cfg.model
    rows = []
    for n_scale in cfg.params["n_values"]:
        for h in cfg.params["h_values"]:
            rep = run_clt_experiment(
                ScalingConfig(
                    base=spec,
                    n_scale=n_scale,
                    h=h,
                    t_eval=cfg.params["t"],
                    n_paths=cfg.params["n_paths"],
                    seed=cfg.seed,
                )
            )
            rows.append(
                (
                    n_scale,
                    h,
                    cfg.params["t"],
                    beta_exponent(h),
                    cfg.params["n_paths"],
                    rep.empirical_variance,
                    rep.limit_variance,
                    rep.predicted_pd_variance,
                    rep.ks_statistic,
                    rep.ks_p,
                )
            )
    path = out / "scaling.csv"
    _write_csv(
        path,
        ["N", "h", "t", "beta", "n_paths", "empirical_variance", "limit_variance", "pd_variance", "ks_statistic", "ks_p"],
        rows,
    )
    return [path]


def _cmd_multi(cfg: RunConfig, out: Path) -> list[Path]:
    model: MultiOuSpec = cfg.model
    t = cfg.params["t"]
    n = cfg.params["n_paths"]
    rows: list[tuple[str, float]] = []
    jd = model.j_dim
    for j in range(jd):
        sm = stationary_moments(model.coordinate(j), 2)
        rows.append((f"stationary_mean_{j + 1}", sm.mu_inf))
        rows.append((f"stationary_var_{j + 1}", sm.v_inf))
    for j in range(jd):
        for k in range(j + 1, jd):
            rows.append((f"limit_cov_{j + 1}_{k + 1}", multi_transient_covariance(model, j, k)))
    if jd >= 2:
        rows.append(("cross_moment_fast_path", multi_cross_moment(model)))
    for order in cfg.params["orders"]:
        label = "moment_" + "_".join(str(x) for x in order)
        rows.append((label, float(multi_stationary_mixed_moments(model, order).sum())))
    if jd == 2 and model.d == 2:
        q = model.chain.q
        summary = two_state_example(q[0, 1], q[1, 0], model.coords)
        rows.append(("two_state_cov", summary.covariance))
        rows.append(("two_state_corr", summary.correlation))
        rows.append(("two_state_corr_sigma0", summary.correlation_sigma0))
    values, _ = sample_multi_terminal_batch(model, n, t, cfg.seed)
    for j in range(jd):
        rows.append((f"mc_mean_{j + 1}", values[:, j].mean()))
        rows.append((f"mc_var_{j + 1}", values[:, j].var(ddof=1)))
    for j in range(jd):
        for k in range(j + 1, jd):
            cov = np.cov(values[:, j], values[:, k], ddof=1)
            rows.append((f"mc_cov_{j + 1}_{k + 1}", cov[0, 1]))
            rows.append(
                (f"mc_corr_{j + 1}_{k + 1}", cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]))
            )
    path = out / "multi.csv"
    _write_csv(path, ["quantity", "value"], rows)
    return [path]


_DISPATCH = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "moments": _cmd_moments,
    "covariance": _cmd_covariance,
    "transform": _cmd_transform,
    "scaling": _cmd_scaling,
    "multi": _cmd_multi,
}


def _set_threads(k: int | None) -> int:
    import numba

    if k is None:
        return numba.get_num_threads()
    k = max(1, min(int(k), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(k)
    return k


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmou",
        description="Regime-switching OU toolkit: batch experiments from a JSON config.",
    )
    parser.add_argument("command", choices=list(COMMANDS) + ["emit-config"])
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (results identical for any value)")
    parser.add_argument("--out", default=None, help="output directory (overrides config output_dir)")
    args = parser.parse_args(argv)

    started = time.perf_counter()
    try:
        file_command = None if args.command == "emit-config" else args.command
        cfg = parse_config(args.config, command=file_command, seed_override=args.seed)
    except ConfigError as exc:
        print(f"mmou: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mmou: cannot read config: {exc}", file=sys.stderr)
        return 2

    if args.command == "emit-config":
        text = canonical_json(cfg)
        if args.out is not None:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "config.json").write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return 0

    threads = _set_threads(args.threads)
    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        outputs = _DISPATCH[cfg.command](cfg, out)
    except MmouError as exc:
        print(f"mmou: {exc}", file=sys.stderr)
        return 3

    manifest = {
        "command": cfg.command,
        "config": cfg.echo,
        "seed": cfg.seed,
        "threads": threads,
        "versions": _versions(),
        "wall_time_s": round(time.perf_counter() - started, 3),
        "outputs": [p.name for p in outputs],
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return 0


def _versions() -> dict:
    import numba
    import scipy

    return {
        "mmou": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
