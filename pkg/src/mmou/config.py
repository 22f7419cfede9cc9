"""Run-configuration parsing, validation and canonical serialization.

Configs are single JSON documents.  Parsing validates every model
invariant with field-level error messages ("gamma[2]: ..."), fills
defaults, and keeps a normalized echo of the document whose canonical
serialization is byte-stable under parse/emit round trips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chain import GeneratorMatrix
from .errors import ConfigError, MmouError
from .process import CoordOu, MmouSpec, MultiOuSpec, NormalInitial

COMMANDS = ("validate", "simulate", "moments", "covariance", "transform", "scaling", "multi")

_DEFAULT_PARAMS = {
    "validate": {},
    "simulate": {"t": 1.0, "n_paths": 10_000},
    "moments": {"times": [0.0, 0.5, 1.0], "max_order": 2},
    "covariance": {"pairs": [[1.0, 0.0], [1.0, 0.5]]},
    "transform": {"theta": {"lo": -1.0, "hi": 2.0, "n": 61}, "times": [0.5, 1.0, 1.5], "n_paths": 10_000},
    "scaling": {"n_values": [16, 64, 256], "h_values": [0.5, 1.5], "t": 1.0, "n_paths": 10_000},
    "multi": {"t": 40.0, "n_paths": 100_000, "orders": [[1, 1]]},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; ``echo`` is the normalized document."""

    command: str
    model: MmouSpec | MultiOuSpec
    params: dict
    seed: int
    output_dir: str
    echo: dict


def _need(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise ConfigError("missing required field", field=f"{where}{key}")
    val = obj[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return int(val)
    if kind is list and isinstance(val, list):
        return val
    raise ConfigError(f"expected {kind.__name__}", field=f"{where}{key}")


def _float_list(val, where: str) -> list[float]:
    if not isinstance(val, list) or not val:
        raise ConfigError("expected a nonempty list of numbers", field=where)
    out = []
    for k, x in enumerate(val):
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise ConfigError("expected a number", field=f"{where}[{k}]")
        out.append(float(x))
    return out


def _parse_m0(val, where: str):
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if isinstance(val, dict):
        mean = _need(val, "mean", float, f"{where}.")
        var = _need(val, "var", float, f"{where}.")
        if var < 0.0:
            raise ConfigError("initial variance must be nonnegative", field=f"{where}.var")
        return NormalInitial(mean, var)
    raise ConfigError("expected a number or {mean, var}", field=where)


def _parse_matrix(val, where: str) -> np.ndarray:
    if not isinstance(val, list) or not val:
        raise ConfigError("expected a list of rows", field=where)
    rows = []
    for i, row in enumerate(val):
        rows.append(_float_list(row, f"{where}[{i}]"))
        if len(rows[-1]) != len(rows[0]):
            raise ConfigError("ragged matrix rows", field=f"{where}[{i}]")
    return np.array(rows)


def _parse_coord(obj: dict, d: int, where: str) -> CoordOu:
    alpha = np.array(_float_list(_need(obj, "alpha", list, f"{where}."), f"{where}.alpha"))
    gamma = np.array(_float_list(_need(obj, "gamma", list, f"{where}."), f"{where}.gamma"))
    sigma2 = np.array(_float_list(_need(obj, "sigma2", list, f"{where}."), f"{where}.sigma2"))
    for name, vec in (("alpha", alpha), ("gamma", gamma), ("sigma2", sigma2)):
        if vec.size != d:
            raise ConfigError(f"expected {d} entries", field=f"{where}.{name}")
    for k, gk in enumerate(gamma):
        if gk <= 0.0:
            raise ConfigError("must be positive", field=f"{where}.gamma[{k}]")
    for k, sk in enumerate(sigma2):
        if sk < 0.0:
            raise ConfigError("must be nonnegative", field=f"{where}.sigma2[{k}]")
    m0 = _parse_m0(obj.get("m0", 0.0), f"{where}.m0")
    return CoordOu(alpha, gamma, sigma2, m0)


def _parse_model(obj, command: str):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", field="model")
    q = _parse_matrix(_need(obj, "q", list, "model."), "model.q")
    try:
        chain = GeneratorMatrix(q, allow_absorbing=bool(obj.get("allow_absorbing", False)))
    except MmouError as exc:
        raise ConfigError(str(exc), field="model.q") from exc
    d = chain.d
    p0_raw = obj.get("p0", "stationary")
    if isinstance(p0_raw, str):
        if p0_raw != "stationary":
            raise ConfigError("expected a vector or 'stationary'", field="model.p0")
        p0 = None
    else:
        p0 = np.array(_float_list(p0_raw, "model.p0"))
    try:
        if command == "multi":
            coords_raw = _need(obj, "coords", list, "model.")
            coords = []
            for k, c in enumerate(coords_raw):
                if not isinstance(c, dict):
                    raise ConfigError("expected an object", field=f"model.coords[{k}]")
                coords.append(_parse_coord(c, d, f"model.coords[{k}]"))
            return MultiOuSpec(chain, coords, p0)
        coord = _parse_coord(obj, d, "model")
        return MmouSpec(chain, coord.alpha, coord.gamma, coord.sigma2, coord.m0, p0)
    except ConfigError:
        raise
    except MmouError as exc:
        raise ConfigError(str(exc), field="model") from exc


def _validate_params(command: str, params: dict) -> dict:
    merged = json.loads(json.dumps(_DEFAULT_PARAMS[command]))
    for key in params:
        if key not in merged:
            raise ConfigError("unknown parameter", field=f"params.{key}")
    merged.update(params)
    w = "params."
    if command == "simulate":
        merged["t"] = _need(merged, "t", float, w)
        merged["n_paths"] = _need(merged, "n_paths", int, w)
        if merged["t"] < 0.0:
            raise ConfigError("must be nonnegative", field="params.t")
        if merged["n_paths"] < 1:
            raise ConfigError("must be positive", field="params.n_paths")
    elif command == "moments":
        merged["times"] = _float_list(merged["times"], "params.times")
        if any(t < 0.0 for t in merged["times"]):
            raise ConfigError("times must be nonnegative", field="params.times")
        merged["max_order"] = _need(merged, "max_order", int, w)
        if merged["max_order"] < 2:
            raise ConfigError("must be at least 2", field="params.max_order")
    elif command == "covariance":
        pairs = merged["pairs"]
        if not isinstance(pairs, list) or not pairs:
            raise ConfigError("expected a nonempty list of [t, u] pairs", field="params.pairs")
        merged["pairs"] = [
            _float_list(p, f"params.pairs[{k}]") for k, p in enumerate(pairs)
        ]
        for k, p in enumerate(merged["pairs"]):
            if len(p) != 2 or p[0] < 0.0 or p[1] < 0.0:
                raise ConfigError("expected nonnegative [t, u]", field=f"params.pairs[{k}]")
    elif command == "transform":
        th = merged["theta"]
        if isinstance(th, dict):
            lo = _need(th, "lo", float, "params.theta.")
            hi = _need(th, "hi", float, "params.theta.")
            n = _need(th, "n", int, "params.theta.")
            if n < 5 or hi <= lo:
                raise ConfigError("need hi > lo and n >= 5", field="params.theta")
            merged["theta"] = {"lo": lo, "hi": hi, "n": n}
        else:
            merged["theta"] = _float_list(th, "params.theta")
        merged["times"] = _float_list(merged["times"], "params.times")
        merged["n_paths"] = _need(merged, "n_paths", int, w)
        if merged["n_paths"] < 100:
            raise ConfigError("need at least 100 paths", field="params.n_paths")
    elif command == "scaling":
        merged["n_values"] = [int(x) for x in _float_list(merged["n_values"], "params.n_values")]
        merged["h_values"] = _float_list(merged["h_values"], "params.h_values")
        merged["t"] = _need(merged, "t", float, w)
        merged["n_paths"] = _need(merged, "n_paths", int, w)
        if any(n < 1 for n in merged["n_values"]):
            raise ConfigError("N values must be >= 1", field="params.n_values")
        if any(h < 0.0 for h in merged["h_values"]):
            raise ConfigError("h values must be >= 0", field="params.h_values")
        if merged["n_paths"] < 1000:
            raise ConfigError("KS runs need at least 1000 paths", field="params.n_paths")
    elif command == "multi":
        merged["t"] = _need(merged, "t", float, w)
        merged["n_paths"] = _need(merged, "n_paths", int, w)
        orders = merged["orders"]
        if not isinstance(orders, list):
            raise ConfigError("expected a list of multi-indices", field="params.orders")
        merged["orders"] = [
            [int(x) for x in _float_list(o, f"params.orders[{k}]")]
            for k, o in enumerate(orders)
        ]
    return merged


def parse_config_data(doc, command: str | None = None, seed_override: int | None = None) -> RunConfig:
    """Validate a parsed JSON document into a RunConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("top-level document must be an object")
    file_command = doc.get("command")
    if file_command is not None and file_command not in COMMANDS:
        raise ConfigError(f"unknown command {file_command!r}", field="command")
    if command is None:
        command = file_command
    if command is None:
        raise ConfigError("no command given (in file or on the command line)", field="command")
    if file_command is not None and file_command != command:
        raise ConfigError(
            f"config file names command {file_command!r} but {command!r} was requested",
            field="command",
        )

    seed = seed_override if seed_override is not None else doc.get("seed")
    if seed is None:
        raise ConfigError("seed is required (wall-clock seeding is not supported)", field="seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer", field="seed")

    model = _parse_model(doc.get("model"), command)
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("expected an object", field="params")
    params = _validate_params(command, params)
    output_dir = doc.get("output_dir", ".")
    if not isinstance(output_dir, str):
        raise ConfigError("expected a string", field="output_dir")

    echo = {
        "command": command,
        "seed": seed,
        "output_dir": output_dir,
        "model": _echo_model(doc.get("model"), model),
        "params": params,
    }
    return RunConfig(command, model, params, seed, output_dir, echo)


def _echo_model(raw: dict, model) -> dict:
    out = {"q": [[float(x) for x in row] for row in model.chain.q]}
    if raw.get("allow_absorbing"):
        out["allow_absorbing"] = True
    out["p0"] = (
        "stationary"
        if isinstance(raw.get("p0", "stationary"), str)
        else [float(x) for x in model.p0]
    )

    def coord_dict(c) -> dict:
        m0 = c.m0
        return {
            "alpha": [float(x) for x in c.alpha],
            "gamma": [float(x) for x in c.gamma],
            "sigma2": [float(x) for x in c.sigma2],
            "m0": {"mean": m0.a, "var": m0.b2} if isinstance(m0, NormalInitial) else float(m0),
        }

    if isinstance(model, MultiOuSpec):
        out["coords"] = [coord_dict(c) for c in model.coords]
    else:
        out.update(coord_dict(model))
    return out


def parse_config(path, command: str | None = None, seed_override: int | None = None) -> RunConfig:
    """Load and validate a JSON config file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config_data(doc, command, seed_override)


def canonical_json(cfg: RunConfig) -> str:
    """Byte-stable serialization of the normalized document."""
    return json.dumps(cfg.echo, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
