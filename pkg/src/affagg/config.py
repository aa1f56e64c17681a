"""Experiment configuration: JSON schema, validation, and object builders.

A config is one JSON document.  Command-line ``--set a.b.c=value`` overrides
splice into it before validation.  Validation errors carry the dotted field
path so the CLI can print actionable diagnostics and exit with status 2.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .criteria import Prior
from .errors import ConfigError
from .estimators import AffineEstimator, make_projection, smoothness_estimators, smoothness_grid
from .simulation import NoiseModel

EXPERIMENTS = ("aggregate", "simulate", "tail-check", "identity-check", "maurey-check",
               "sparsity", "convex", "kregressor")

SCHEMA_VERSION = 1


def _req(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError("required field is missing", field=f"{path}.{key}" if path else key)
    return mapping[key]


def _as_int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"expected an integer, got {value!r}", field=path)
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", field=path)
    return value


def _as_float(value, path: str, minimum: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=path)
    value = float(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", field=path)
    return value


def load_csv_matrix(path: str) -> np.ndarray:
    """Header-free, row-major CSV matrix."""
    if not os.path.exists(path):
        raise ConfigError(f"file does not exist: {path}")
    return np.loadtxt(path, delimiter=",", ndmin=2)


def load_csv_vector(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise ConfigError(f"file does not exist: {path}")
    return np.loadtxt(path, delimiter=",").reshape(-1)


# -- piecewise builders -------------------------------------------------------


def build_estimator(spec: dict, path: str) -> AffineEstimator:
    kind = _req(spec, "kind", path)
    offset = None
    if "offset" in spec:
        offset = np.asarray(spec["offset"], dtype=float)
    elif "offset_csv" in spec:
        offset = load_csv_vector(spec["offset_csv"])
    admissible = bool(spec.get("admissible", False))
    try:
        if kind == "dense":
            matrix = (load_csv_matrix(spec["matrix_csv"]) if "matrix_csv" in spec
                      else np.asarray(_req(spec, "matrix", path), dtype=float))
            return AffineEstimator.dense(matrix, offset, admissible=admissible)
        if kind == "diagonal":
            return AffineEstimator.diagonal(np.asarray(_req(spec, "weights", path), dtype=float),
                                            offset, admissible=admissible)
        if kind == "projector":
            basis = (load_csv_matrix(spec["basis_csv"]) if "basis_csv" in spec
                     else np.asarray(_req(spec, "basis", path), dtype=float))
            return AffineEstimator.projector(basis, offset)
        if kind == "scaled_identity":
            n = _as_int(_req(spec, "dim", path), f"{path}.dim", minimum=1)
            return AffineEstimator.scaled_identity(_as_float(_req(spec, "scale", path),
                                                             f"{path}.scale"), n, offset,
                                                   admissible=admissible)
        if kind == "zero":
            n = _as_int(_req(spec, "dim", path), f"{path}.dim", minimum=1)
            return AffineEstimator.zero(n, offset)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc), field=path) from exc
    raise ConfigError(f"unknown estimator kind {kind!r}", field=f"{path}.kind")


def build_bank_estimators(spec: dict, path: str = "bank") -> list[AffineEstimator]:
    kind = _req(spec, "kind", path)
    if kind == "list":
        entries = _req(spec, "estimators", path)
        if not isinstance(entries, list) or not entries:
            raise ConfigError("estimators must be a non-empty list", field=f"{path}.estimators")
        return [build_estimator(e, f"{path}.estimators[{i}]") for i, e in enumerate(entries)]
    if kind == "scaled_identity_grid":
        n = _as_int(_req(spec, "n", path), f"{path}.n", minimum=1)
        count = _as_int(_req(spec, "count", path), f"{path}.count", minimum=1)
        start = _as_float(_req(spec, "start", path), f"{path}.start")
        stop = _as_float(_req(spec, "stop", path), f"{path}.stop")
        scales = np.linspace(start, stop, count)
        return [AffineEstimator.scaled_identity(float(s), n) for s in scales]
    if kind == "nested_projectors":
        n = _as_int(_req(spec, "n", path), f"{path}.n", minimum=1)
        if "dims" in spec:
            dims = [_as_int(d, f"{path}.dims", minimum=1) for d in spec["dims"]]
        else:
            count = _as_int(_req(spec, "count", path), f"{path}.count", minimum=1)
            dims = [max(1, round(n * (j + 1) / count)) for j in range(count)]
        if max(dims) > n:
            raise ConfigError(f"projector dimension {max(dims)} exceeds n={n}",
                              field=f"{path}.dims")
        eye = np.eye(n)
        return [make_projection(eye, range(d)).estimator for d in dims]
    if kind == "smoothness_filters":
        n = _as_int(_req(spec, "n", path), f"{path}.n", minimum=3)
        return smoothness_estimators(smoothness_grid(n))
    raise ConfigError(f"unknown bank kind {kind!r}", field=f"{path}.kind")


def build_signal(spec: dict, path: str = "f") -> np.ndarray:
    kind = _req(spec, "kind", path)
    if kind == "zero":
        return np.zeros(_as_int(_req(spec, "n", path), f"{path}.n", minimum=1))
    if kind == "spike":
        n = _as_int(_req(spec, "n", path), f"{path}.n", minimum=1)
        k = _as_int(_req(spec, "k", path), f"{path}.k", minimum=0)
        if k > n:
            raise ConfigError(f"spike width {k} exceeds n={n}", field=f"{path}.k")
        amplitude = _as_float(_req(spec, "amplitude", path), f"{path}.amplitude")
        f = np.zeros(n)
        f[:k] = amplitude
        return f
    if kind == "smooth_decay":
        n = _as_int(_req(spec, "n", path), f"{path}.n", minimum=1)
        rate = _as_float(spec.get("rate", 1.0), f"{path}.rate", minimum=0.0)
        scale = _as_float(spec.get("scale", 1.0), f"{path}.scale")
        return scale * np.arange(1, n + 1, dtype=float) ** (-rate)
    if kind == "file":
        return load_csv_vector(_req(spec, "path", path))
    raise ConfigError(f"unknown signal kind {kind!r}", field=f"{path}.kind")


def build_noise(spec: dict, path: str = "noise") -> NoiseModel:
    kind = _req(spec, "kind", path)
    sigma = _as_float(_req(spec, "sigma", path), f"{path}.sigma")
    sbar = spec.get("subgaussian_bound")
    try:
        return NoiseModel(kind, sigma, None if sbar is None else float(sbar))
    except Exception as exc:
        raise ConfigError(str(exc), field=path) from exc


def build_prior(spec: Optional[dict], m: int, path: str = "prior") -> Prior:
    if spec is None or spec.get("kind", "uniform") == "uniform":
        return Prior.uniform(m)
    if spec["kind"] == "weights":
        values = np.asarray(_req(spec, "values", path), dtype=float)
        if values.shape[0] != m:
            raise ConfigError(f"prior has {values.shape[0]} weights for M={m} estimators",
                              field=f"{path}.values")
        try:
            return Prior.normalized(values)
        except Exception as exc:
            raise ConfigError(str(exc), field=path) from exc
    raise ConfigError(f"unknown prior kind {spec['kind']!r}", field=f"{path}.kind")


def build_design(spec: dict, path: str = "design") -> np.ndarray:
    kind = _req(spec, "kind", path)
    if kind == "identity":
        return np.eye(_as_int(_req(spec, "n", path), f"{path}.n", minimum=1))
    if kind == "gaussian":
        n = _as_int(_req(spec, "n", path), f"{path}.n", minimum=1)
        p = _as_int(_req(spec, "p", path), f"{path}.p", minimum=1)
        seed = _as_int(spec.get("seed", 0), f"{path}.seed")
        rng = np.random.Generator(np.random.Philox(key=seed & (2 ** 64 - 1)))
        return rng.standard_normal((n, p))
    if kind == "file":
        return load_csv_matrix(_req(spec, "path", path))
    raise ConfigError(f"unknown design kind {kind!r}", field=f"{path}.kind")


# -- whole-document handling --------------------------------------------------


def apply_override(document: dict, dotted: str, raw_value: str) -> None:
    """Set ``a.b.c`` to the JSON value parsed from raw_value (bare strings
    allowed)."""
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    keys = dotted.split(".")
    node = document
    for key in keys[:-1]:
        nxt = node.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            node[key] = nxt
        node = nxt
    node[keys[-1]] = value


def load_config_document(path: str, overrides: list[str]) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file does not exist: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(document, dict):
        raise ConfigError("config root must be a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        dotted, raw = item.split("=", 1)
        apply_override(document, dotted, raw)
    return document


@dataclass
class ExperimentConfig:
    """Validated experiment description plus the raw document for echoing."""

    experiment: str
    document: dict
    base_seed: int
    threads: int
    out_dir: str
    trials: int = 0
    x_levels: tuple[float, ...] = ()

    def echo(self) -> dict:
        resolved = dict(self.document)
        resolved["experiment"] = self.experiment
        resolved["base_seed"] = self.base_seed
        resolved["threads"] = self.threads
        resolved["out"] = self.out_dir
        return resolved


def parse_config(experiment: str, document: dict, seed_flag: Optional[int],
                 threads_flag: Optional[int], out_flag: Optional[str]) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
    seed = seed_flag
    if seed is None and "base_seed" in document:
        seed = _as_int(document["base_seed"], "base_seed")
    if seed is None and os.environ.get("AFFAGG_SEED"):
        try:
            seed = int(os.environ["AFFAGG_SEED"])
        except ValueError as exc:
            raise ConfigError("AFFAGG_SEED must be an integer") from exc
    if seed is None:
        seed = 0
    threads = threads_flag
    if threads is None:
        threads = _as_int(document.get("threads", os.cpu_count() or 1), "threads", minimum=1)
    out_dir = out_flag or document.get("out") or "affagg-out"
    trials = _as_int(document.get("trials", 0), "trials")
    x_levels = tuple(_as_float(x, "x_levels") for x in document.get("x_levels", (1.0, 2.0)))
    if any(x <= 0 for x in x_levels):
        raise ConfigError("x_levels must be positive", field="x_levels")
    cfg = ExperimentConfig(experiment, document, seed, threads, str(out_dir), trials, x_levels)
    _validate_sections(cfg)
    return cfg


def _validate_sections(cfg: ExperimentConfig) -> None:
    doc = cfg.document
    kind = cfg.experiment
    needs_trials = kind in ("simulate", "sparsity", "convex", "kregressor")
    if needs_trials and cfg.trials < 1:
        raise ConfigError("trials must be >= 1 for this experiment", field="trials")
    if kind in ("aggregate", "simulate", "convex"):
        _req(doc, "bank", "")
        _req(doc, "noise", "")
        if kind != "aggregate" or "y" not in doc:
            _req(doc, "f", "")
    if kind in ("sparsity", "kregressor"):
        _req(doc, "design", "")
        _req(doc, "noise", "")
        _req(doc, "f", "")
    if kind == "tail-check":
        _req(doc, "noise", "")
        if cfg.trials < 10_000:
            raise ConfigError("tail-check needs trials >= 10000", field="trials")
