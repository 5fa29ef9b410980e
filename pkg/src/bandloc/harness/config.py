"""Experiment configuration: schema, validation and JSON round-trip."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

from ..ensemble import BandMatrixSpec

__all__ = [
    "ESTIMATORS",
    "NEEDS_ENSEMBLE",
    "ConfigError",
    "ExperimentConfig",
    "validate",
    "load_config",
    "config_hash",
]


class ConfigError(ValueError):
    """One or more validation errors, each prefixed by its field path."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _nums(x) -> bool:
    return isinstance(x, (list, tuple)) and len(x) > 0 and all(_num(v) for v in x)


def _ints(x) -> bool:
    return isinstance(x, (list, tuple)) and len(x) > 0 and all(_int(v) for v in x)


def _pair(x) -> bool:
    return isinstance(x, (list, tuple)) and len(x) == 2 and all(_num(v) for v in x) and x[0] < x[1]


def _optional(check: Callable) -> Callable:
    return lambda x: x is None or check(x)


def _open_unit(x) -> bool:
    return _num(x) and 0 < x < 1


# name -> (check, default, message)
_S = (_open_unit, 0.5, "must lie in the open interval (0, 1)")
_LAM = (_num, 0.0, "must be a real number")

ESTIMATORS: dict[str, dict[str, tuple]] = {
    "sample": {
        "index": (lambda x: _int(x) and x >= 0, 0, "must be a non-negative integer"),
    },
    "resolvent": {
        "lambda": _LAM,
        "x": (lambda x: _int(x) and x >= 1, 1, "must be a positive integer"),
        "y": (_optional(lambda x: _int(x) and x >= 1), None, "must be a positive integer"),
        "index": (lambda x: _int(x) and x >= 0, 0, "must be a non-negative integer"),
        "oracle": (lambda x: isinstance(x, bool), True, "must be a boolean"),
    },
    "moments": {
        "lambda": _LAM,
        "x": (lambda x: _int(x) and x >= 1, 1, "must be a positive integer"),
        "y": (lambda x: _int(x) and x >= 1, 1, "must be a positive integer"),
        "s": _S,
        "t_grid": (_optional(_nums), None, "must be a list of positive increasing numbers"),
    },
    "decay": {
        "lambda": _LAM,
        "s": _S,
        "x0": (lambda x: _int(x) and x >= 1, 1, "must be a positive integer"),
        "distances": (_optional(_ints), None, "must be a list of integers"),
        "fit_window": (_optional(_int), None, "must be an integer"),
    },
    "scan": {
        "lambda": _LAM,
        "s": _S,
        "x0": (lambda x: _int(x) and x >= 1, 1, "must be a positive integer"),
        "widths": (_ints, [1, 2, 4], "must be a list of positive integers"),
        "blocks": (lambda x: _int(x) and x >= 1, 100, "must be a positive integer"),
    },
    "dos": {
        "bins": (lambda x: _int(x) and x >= 1, 32, "must be a positive integer"),
        "lim": (lambda x: _num(x) and x > 0, 2.05, "must be positive"),
    },
    "spacing": {
        "lambda0": _LAM,
        "window": (_optional(lambda x: _num(x) and x > 0), None, "must be positive"),
        "unfolding": (lambda x: x in ("empirical", "semicircle"), "empirical",
                      "must be 'empirical' or 'semicircle'"),
    },
    "minami": {
        "lambda0": _LAM,
        "lengths": (_optional(_nums), None, "must be a list of non-negative numbers"),
        "decade": (_optional(lambda x: _num(x) and x > 0), 0.05,
                   "must be positive (lower end of the fitted decade in mean spacings)"),
        "points": (lambda x: _int(x) and x >= 2, 11, "must be an integer >= 2"),
    },
    "eigvec": {
        "r": (lambda x: _num(x) and x > 0, 1.0, "must be positive"),
        "x0": (lambda x: _int(x) and x >= 1, 1, "must be a positive integer"),
        "fit_window": (_optional(_int), None, "must be an integer"),
    },
    "wegner": {
        "t_grid": (_nums, [1, 2, 4, 8, 16, 32, 64], "must be a list of positive numbers"),
        "shift": (lambda x: x in ("zero", "random"), "zero", "must be 'zero' or 'random'"),
        "two_block": (lambda x: isinstance(x, bool), False, "must be a boolean"),
    },
    "holder": {
        "law": (lambda x: x in ("gaussian", "uniform", "two_point"), "gaussian",
                "must be one of gaussian, uniform, two_point"),
        "mean": (_num, 0.0, "must be a real number"),
        "r": (lambda x: _num(x) and x > 0, 0.25, "must be positive"),
        "s": (lambda x: _num(x) and x > 0, 0.5, "must be positive"),
    },
    "domination": {
        "n": (lambda x: _int(x) and x >= 1, 10, "must be a positive integer"),
        "delta": (lambda x: _num(x) and x > 0, 1.0, "must be positive"),
        "p0": (lambda x: _num(x) and 0 < x <= 1, 0.5, "must lie in (0, 1]"),
        "model": (lambda x: x in ("iid", "markov", "constant"), "iid", "must be iid, markov or constant"),
    },
    "acceptance": {
        "determinism": (lambda x: isinstance(x, bool), False, "must be a boolean"),
    },
}

NEEDS_ENSEMBLE = {"sample", "resolvent", "moments", "decay", "scan", "dos", "spacing", "minami",
                  "eigvec", "wegner"}


@dataclass
class ExperimentConfig:
    name: str
    estimator: str
    ensemble: dict | None = None
    params: dict = field(default_factory=dict)
    samples: int = 1000
    workers: int = 1
    seed: int = 0
    output_dir: str = "results"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        errs = validate(d)
        if errs:
            raise ConfigError(errs)
        return cls(**{k: copy.deepcopy(v) for k, v in d.items()})

    def resolved_params(self) -> dict:
        """Parameters with defaults filled in."""
        schema = ESTIMATORS[self.estimator]
        out = {k: copy.deepcopy(v[1]) for k, v in schema.items()}
        out.update(self.params or {})
        return out

    def spec(self) -> BandMatrixSpec:
        d = dict(self.ensemble)
        d["seed"] = self.seed
        return BandMatrixSpec.from_dict(d)


_TOP = {"name", "estimator", "ensemble", "params", "samples", "workers", "seed", "output_dir"}


def _validate_ensemble(e: Any, errors: list[str]):
    if not isinstance(e, dict):
        errors.append("ensemble: must be an object")
        return None
    W = e.get("W")
    if not (_int(W) and W >= 1):
        errors.append("ensemble.W: must be a positive integer")
        return None
    if "n" in e:
        if not (_int(e["n"]) and e["n"] >= 1):
            errors.append("ensemble.n: must be a positive integer")
    elif "N" in e:
        N = e["N"]
        if not (_int(N) and N >= 1):
            errors.append("ensemble.N: must be a positive integer")
        elif N % W:
            errors.append(f"ensemble.N: N={N} must be a multiple of W={W}")
    else:
        errors.append("ensemble: needs n or N")
    if errors:
        return None
    try:
        return BandMatrixSpec.from_dict({**e, "seed": 0})
    except (ValueError, TypeError, KeyError) as exc:
        errors.append(f"ensemble: {exc}")
        return None


def validate(config) -> list[str]:
    """All schema and cross-field errors of a config (empty list when valid)."""
    d = config.to_dict() if isinstance(config, ExperimentConfig) else config
    errors: list[str] = []
    if not isinstance(d, dict):
        return ["config: must be a JSON object"]
    for k in d:
        if k not in _TOP:
            errors.append(f"{k}: unknown field")
    if not isinstance(d.get("name"), str) or not d.get("name"):
        errors.append("name: must be a non-empty string")
    elif any(c in d["name"] for c in "/\\"):
        errors.append("name: must not contain path separators")
    est = d.get("estimator")
    if est not in ESTIMATORS:
        errors.append(f"estimator: unknown estimator {est!r}; expected one of {sorted(ESTIMATORS)}")
    for key, lo in (("samples", 1), ("workers", 1)):
        if key in d and not (_int(d[key]) and d[key] >= lo):
            errors.append(f"{key}: must be an integer >= {lo}")
    if "seed" in d and not (_int(d["seed"]) and 0 <= d["seed"] < 2**64):
        errors.append("seed: must be a 64-bit non-negative integer")
    if "output_dir" in d and not isinstance(d["output_dir"], str):
        errors.append("output_dir: must be a string")
    spec = None
    if est in NEEDS_ENSEMBLE:
        if d.get("ensemble") is None:
            errors.append(f"ensemble: required by estimator {est!r}")
        else:
            spec = _validate_ensemble(d["ensemble"], errors)
    elif d.get("ensemble") is not None:
        _validate_ensemble(d["ensemble"], errors)
    params = d.get("params", {}) or {}
    if not isinstance(params, dict):
        errors.append("params: must be an object")
        return errors
    if est in ESTIMATORS:
        schema = ESTIMATORS[est]
        for k, v in params.items():
            if k not in schema:
                errors.append(f"params.{k}: unknown parameter for estimator {est!r}")
                continue
            check, _, msg = schema[k]
            if not check(v):
                errors.append(f"params.{k}: {msg}, got {v!r}")
        full = {k: v[1] for k, v in schema.items()}
        full.update({k: v for k, v in params.items() if k in schema})
        errors.extend(_cross_checks(est, full, spec, d))
    return errors


def _cross_checks(est: str, p: dict, spec: BandMatrixSpec | None, d: dict) -> list[str]:
    errs = []
    if est == "holder" and _num(p.get("r")) and _num(p.get("s")) and not p["r"] < p["s"]:
        errs.append("params.r: must be smaller than params.s")
    if est == "moments" and p.get("t_grid") is not None and _nums(p["t_grid"]):
        t = p["t_grid"]
        if any(v <= 0 for v in t) or any(b <= a for a, b in zip(t, t[1:])):
            errs.append("params.t_grid: must be positive and strictly increasing")
    if est in ("moments", "decay", "scan") and _num(p.get("s")) and p["s"] > 0.9:
        errs.append("params.s: fractional exponent is capped at 0.9")
    if spec is None:
        return errs
    if est in ("decay", "eigvec") and _int(p.get("fit_window")) and p["fit_window"] < 3 * spec.W:
        errs.append(f"params.fit_window: must be at least 3W = {3 * spec.W}")
    for key in ("x", "y", "x0"):
        if key in p and _int(p[key]) and p[key] > spec.N:
            errs.append(f"params.{key}: site {p[key]} exceeds N = {spec.N}")
    if est == "resolvent" and d.get("samples", 1) and p.get("index", 0) < 0:
        errs.append("params.index: must be non-negative")
    return errs


def load_config(path_or_dict, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config (path or dict) and apply top-level overrides."""
    if isinstance(path_or_dict, dict):
        d = copy.deepcopy(path_or_dict)
    else:
        with open(path_or_dict, encoding="utf-8") as fh:
            d = json.load(fh)
    for k, v in (overrides or {}).items():
        if v is not None:
            d[k] = v
    return ExperimentConfig.from_dict(d)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON of everything that determines the outputs."""
    d = config.to_dict()
    d.pop("workers", None)
    d.pop("output_dir", None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
