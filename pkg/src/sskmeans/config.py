"""Experiment configuration: flat ``section.key = value`` text files.

Lines starting with ``#`` are comments. Lists use ``,`` between coordinates
and ``;`` between items, e.g. ``data.means = -5, 0; 5, 0``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

OUTPUT_ENV = "SSKMEANS_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _matrix(s: str) -> list[list[float]]:
    return [[float(x) for x in row.split(",") if x.strip()] for row in s.split(";") if row.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _init(s: str) -> str | list[list[float]]:
    return s.strip() if s.strip() == "uniform" else _matrix(s)


@dataclass
class SimConfig:
    run_id: str = "run"
    seed: int = 0
    output_dir: str | None = None

    topology_kind: str = "erdos_renyi"
    n: int | None = None
    topology_prob: float = 0.5
    topology_radius: float = 0.5
    topology_seed: int | None = None
    topology_file: str | None = None

    data_file: str | None = None
    data_means: list[list[float]] = field(default_factory=lambda: [[-5.0], [5.0]])
    data_std: list[float] = field(default_factory=lambda: [1.0])
    data_weights: list[float] | None = None
    data_x_max: float | None = None
    data_decimals: int = 0
    data_seed: int | None = None

    k: int = 2
    T: int = 50
    init: Any = "uniform"
    init_seed: int | None = None

    scale: int = 1
    protocol: str = "tree"
    budget: int | None = None
    trace: bool = False

    corrupted: list[int] | None = None
    corrupt_fraction: float | None = None
    corrupt_seed: int | None = None

    base_dir: str = "."

    def derived_seed(self, name: str) -> int:
        """Sub-seed for one purpose, so varying ``seed`` alone varies every stream."""
        digest = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
        return int.from_bytes(digest[:4], "big")

    def seed_for(self, name: str) -> int:
        explicit = getattr(self, f"{name}_seed")
        return explicit if explicit is not None else self.derived_seed(name)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def default_output(self) -> Path:
        if self.output_dir:
            return self.resolve(self.output_dir)
        root = os.environ.get(OUTPUT_ENV, "runs")
        return Path(root) / self.run_id

    def with_seed(self, seed: int) -> "SimConfig":
        return dataclasses.replace(self, seed=seed)

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("kmeans.k must be >= 1")
        if self.T < 0:
            raise ConfigError("kmeans.T must be >= 0")
        if self.scale < 1:
            raise ConfigError("codec.scale must be >= 1")
        if self.protocol not in ("sync", "gossip", "tree"):
            raise ConfigError(f"averaging.protocol must be sync, gossip or tree, got {self.protocol!r}")
        if self.data_file is None:
            dims = {len(m) for m in self.data_means}
            if len(dims) != 1 or dims.pop() < 1:
                raise ConfigError("data.means must list components of one common dimension >= 1")
        if self.corrupted is not None and self.corrupt_fraction is not None:
            raise ConfigError("set adversary.corrupted or adversary.fraction, not both")
        if self.corrupt_fraction is not None and not 0 <= self.corrupt_fraction < 1:
            raise ConfigError("adversary.fraction must lie in [0, 1)")

    def dump(self) -> str:
        lines = []
        for key, (attr, _) in KEYS.items():
            value = getattr(self, attr)
            if value is None:
                continue
            if isinstance(value, list):
                if value and isinstance(value[0], list):
                    value = "; ".join(", ".join(repr(x) for x in row) for row in value)
                else:
                    value = ", ".join(repr(x) for x in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


KEYS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "run.id": ("run_id", str),
    "run.seed": ("seed", int),
    "run.output_dir": ("output_dir", str),
    "topology.kind": ("topology_kind", str),
    "topology.n": ("n", int),
    "topology.prob": ("topology_prob", float),
    "topology.radius": ("topology_radius", float),
    "topology.seed": ("topology_seed", int),
    "topology.file": ("topology_file", str),
    "data.file": ("data_file", str),
    "data.means": ("data_means", _matrix),
    "data.std": ("data_std", _floats),
    "data.weights": ("data_weights", _floats),
    "data.x_max": ("data_x_max", float),
    "data.decimals": ("data_decimals", int),
    "data.seed": ("data_seed", int),
    "kmeans.k": ("k", int),
    "kmeans.T": ("T", int),
    "kmeans.init": ("init", _init),
    "kmeans.init_seed": ("init_seed", int),
    "codec.scale": ("scale", int),
    "averaging.protocol": ("protocol", str),
    "averaging.budget": ("budget", int),
    "averaging.trace": ("trace", _bool),
    "adversary.corrupted": ("corrupted", _ints),
    "adversary.fraction": ("corrupt_fraction", float),
    "adversary.seed": ("corrupt_seed", int),
}


def parse_config(text: str, base_dir: str | Path = ".") -> SimConfig:
    cfg = SimConfig(base_dir=str(base_dir))
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = KEYS[key]
        try:
            setattr(cfg, attr, conv(value))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)
