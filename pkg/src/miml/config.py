"""Flat ``key = value`` run configuration.

Every recognised key, its type and default live in :data:`SCHEMA`.  Unknown
keys and unparsable values are rejected before any computation starts.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Mapping

from miml.errors import ConfigError


def parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    if text is None or str(text).strip().lower() in ("", "auto", "none"):
        return None
    return int(text)


def _gamma(text):
    if str(text).strip().lower() == "scale":
        return "scale"
    return float(text)


def _opt_str(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return str(text)


# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[Any], Any], Any]] = {
    "dataset.path": (_opt_str, None),
    "dataset.format": (str, "bag-jsonl"),
    "method": (str, "chain-ga"),
    "output": (_opt_str, None),
    "cv.n_folds": (int, 5),
    "cv.seed": (int, 0),
    "distance.variant": (str, "max"),
    "cluster.k": (_opt_int, None),
    "cluster.max_iter": (int, 100),
    "cluster.n_init": (int, 10),
    "cluster.seed": (int, 0),
    "svm.C": (float, 1e-3),
    "svm.kernel": (str, "polynomial"),
    "svm.degree": (int, 3),
    "svm.coef0": (float, 0.0),
    "svm.gamma": (_gamma, "scale"),
    "svm.tol": (float, 1e-3),
    "ga.population": (int, 10),
    "ga.tournament": (int, 3),
    "ga.generations": (int, 20),
    "ga.mutation_len": (int, 2),
    "ga.crossover_rate": (float, 0.9),
    "ga.mutation_rate": (float, 0.3),
    "ga.stagnation": (int, 5),
    "ga.val_fraction": (float, 0.25),
    "ga.seed": (int, 0),
    "criterion.kind": (str, "T"),
    "criterion.c_threshold": (float, 0.0),
    "oversample.n_bags": (int, 0),
    "oversample.max_bag_size": (_opt_int, None),
    "oversample.seed": (int, 0),
}

METHODS = ("chain-ga", "mimlsvm-baseline")


def defaults() -> dict[str, Any]:
    return {k: d for k, (_, d) in SCHEMA.items()}


def parse_value(key: str, text) -> Any:
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parser = SCHEMA[key][0]
    try:
        return parser(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def parse_text(text: str, source: str = "<config>") -> dict[str, Any]:
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = parse_value(key, value)
    return out


def load_config(path=None, overrides: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Defaults, then the file at ``path``, then ``overrides`` (raw strings or values)."""
    cfg = defaults()
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg.update(parse_text(text, str(path)))
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = parse_value(key, value) if isinstance(value, str) else value
    validate(cfg)
    return cfg


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def validate(cfg: Mapping[str, Any]) -> None:
    unknown = set(cfg) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg["method"] not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {cfg['method']!r}")
    if cfg["cv.n_folds"] < 2:
        raise ConfigError("cv.n_folds must be >= 2")
    if cfg["cluster.k"] is not None and cfg["cluster.k"] < 1:
        raise ConfigError("cluster.k must be >= 1")
    if cfg["cluster.max_iter"] < 1 or cfg["cluster.n_init"] < 1:
        raise ConfigError("cluster.max_iter and cluster.n_init must be >= 1")
    if not 0.0 < cfg["ga.val_fraction"] < 1.0:
        raise ConfigError("ga.val_fraction must lie in (0, 1)")
    # constructing the typed objects runs their own range checks
    from miml.harness import criterion_from, ga_config_from, oversample_from, svm_config_from
    from miml.hausdorff import VARIANTS
    from miml.bagdata import FORMATS

    if cfg["distance.variant"] not in VARIANTS:
        raise ConfigError(f"distance.variant must be one of {VARIANTS}")
    if cfg["dataset.format"] not in FORMATS:
        raise ConfigError(f"dataset.format must be one of {FORMATS}")
    svm_config_from(cfg)
    ga_config_from(cfg)
    criterion_from(cfg)
    oversample_from(cfg)


def complete(cfg: Mapping[str, Any]) -> dict[str, Any]:
    """Defaults overlaid with ``cfg``, validated."""
    out = defaults()
    out.update(cfg)
    validate(out)
    return out


def echo(cfg: Mapping[str, Any]) -> dict[str, Any]:
    """JSON-friendly copy with keys sorted."""
    return {k: cfg[k] for k in sorted(cfg)}
