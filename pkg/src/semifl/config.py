"""Run configuration: flat ``key = value`` files.

Lines are ``key = value`` pairs; blank lines and ``#`` comments (full-line or
trailing) are ignored.  Unknown keys, malformed values, and duplicate keys are
reported with the file name and line number.  Every key has a default, so an
empty file is a valid all-defaults run configuration.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, fields

from .errors import ConfigError

DATA_DIR_ENV = "SEMIFL_DATA_DIR"


@dataclass
class ExperimentConfig:
    """Fully resolved run specification (defaults mirror the reference setup)."""

    mode: str = "semifl"            # semifl | fl | cl
    arch: str = "cnn"               # cnn | mlp
    dataset: str = "mnist"          # mnist | synthetic:<classes>x<per_class>
    data_dir: str = ""              # IDX directory; falls back to $SEMIFL_DATA_DIR
    train_images: str = ""          # explicit IDX paths override data_dir
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    partition: str = "noniid"       # iid | noniid
    clients: int = 100
    per_client: int = 600
    pattern: str = "c3"             # c1 | c2 | c3 | c4 | explicit
    assignment_file: str = ""
    cluster_order: str = "fixed"    # fixed | shuffled:<seed>
    rounds: int = 200
    local_epochs: int = 5
    local_batch: int = 20
    learning_rate: float = 0.01
    client_fraction: float = 1.0
    cl_batch: int = 200
    eval_every: int = 5
    checkpoint_every: int = 0       # 0 = final checkpoint only
    master_seed: int = 0
    partition_seed: int = -1        # -1 = reuse master_seed

    @property
    def clusters(self) -> int:
        """Cluster count implied by the patterns (groups of ten clients)."""
        return self.clients // 10

    @property
    def effective_partition_seed(self) -> int:
        return self.master_seed if self.partition_seed == -1 else self.partition_seed

    def dataset_kind(self) -> tuple[str, tuple[int, int] | None]:
        """Split the dataset spec: ("mnist", None) or ("synthetic", (classes, per_class))."""
        if self.dataset == "mnist":
            return "mnist", None
        m = re.fullmatch(r"synthetic:(\d+)x(\d+)", self.dataset)
        if not m:
            raise ConfigError(f"dataset must be 'mnist' or 'synthetic:<classes>x<per_class>', "
                              f"got {self.dataset!r}")
        return "synthetic", (int(m.group(1)), int(m.group(2)))

    def order_spec(self) -> tuple[str, int]:
        """Split cluster_order: ("fixed", 0) or ("shuffled", seed)."""
        if self.cluster_order == "fixed":
            return "fixed", 0
        m = re.fullmatch(r"shuffled:(\d+)", self.cluster_order)
        if not m:
            raise ConfigError(f"cluster_order must be 'fixed' or 'shuffled:<seed>', "
                              f"got {self.cluster_order!r}")
        return "shuffled", int(m.group(1))


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}

_CHOICES = {
    "mode": ("semifl", "fl", "cl"),
    "arch": ("cnn", "mlp"),
    "partition": ("iid", "noniid"),
    "pattern": ("c1", "c2", "c3", "c4", "explicit"),
}

_POSITIVE = ("clients", "per_client", "rounds", "local_epochs", "local_batch",
             "cl_batch", "eval_every")
_NON_NEGATIVE = ("checkpoint_every", "master_seed")


def _convert(key: str, raw: str, where: str):
    ftype = _FIELD_TYPES[key]
    if ftype in ("int", int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: key {key!r} needs an integer, got {raw!r}") from None
    if ftype in ("float", float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where}: key {key!r} needs a number, got {raw!r}") from None
    return raw


def _bad(where: str, key: str, msg: str):
    exc = ConfigError(f"{where}: {msg}")
    exc.key = key  # lets parse_config upgrade `where` to file:line
    raise exc


def validate_config(cfg: ExperimentConfig, where: str = "config") -> ExperimentConfig:
    """Cross-field checks; raises :class:`ConfigError` naming the offender."""
    for key, allowed in _CHOICES.items():
        if getattr(cfg, key) not in allowed:
            _bad(where, key, f"{key} must be one of {', '.join(allowed)}, "
                             f"got {getattr(cfg, key)!r}")
    for key in _POSITIVE:
        if getattr(cfg, key) < 1:
            _bad(where, key, f"{key} must be >= 1, got {getattr(cfg, key)}")
    for key in _NON_NEGATIVE:
        if getattr(cfg, key) < 0:
            _bad(where, key, f"{key} must be >= 0, got {getattr(cfg, key)}")
    if cfg.partition_seed < -1:
        _bad(where, "partition_seed",
             f"partition_seed must be -1 (reuse master_seed) or >= 0, "
             f"got {cfg.partition_seed}")
    if cfg.learning_rate < 0:
        _bad(where, "learning_rate",
             f"learning_rate must be >= 0, got {cfg.learning_rate}")
    if not 0.0 < cfg.client_fraction <= 1.0:
        _bad(where, "client_fraction",
             f"client_fraction must be in (0, 1], got {cfg.client_fraction}")
    if cfg.pattern == "explicit" and not cfg.assignment_file:
        _bad(where, "assignment_file", "pattern=explicit requires assignment_file")
    try:
        cfg.dataset_kind()
    except ConfigError as exc:
        _bad(where, "dataset", str(exc))
    try:
        cfg.order_spec()
    except ConfigError as exc:
        _bad(where, "cluster_order", str(exc))
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a config file."""
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    cfg = ExperimentConfig()
    seen: dict[str, int] = {}
    for ln, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{ln}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{path}:{ln}: duplicate key {key!r} "
                              f"(first set on line {seen[key]})")
        seen[key] = ln
        setattr(cfg, key, _convert(key, raw, f"{path}:{ln}"))
    try:
        return validate_config(cfg, where=path)
    except ConfigError as exc:
        key = getattr(exc, "key", None)
        if key in seen:  # point at the offending line
            msg = str(exc).split(": ", 1)[1] if ": " in str(exc) else str(exc)
            raise ConfigError(f"{path}:{seen[key]}: {msg}") from None
        raise


def render_config(cfg: ExperimentConfig) -> str:
    """Emit the full resolved configuration in re-parseable key = value form."""
    out = ["# resolved configuration"]
    for f in fields(ExperimentConfig):
        out.append(f"{f.name} = {getattr(cfg, f.name)}")
    return "\n".join(out) + "\n"


def resolve_data_dir(cfg: ExperimentConfig) -> str:
    """Directory that should contain the IDX files (may be empty if unset)."""
    return cfg.data_dir or os.environ.get(DATA_DIR_ENV, "")
