"""Experiment configuration: a small dataclass loaded from JSON or YAML."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..errors import InvalidArgument

KINDS = ("orbit", "hits", "weyl", "badset", "paste", "localize", "resonance")
FORMATS = ("csv", "json")

SPEC_PARAM_KEYS = {"seed", "d", "gamma", "C1", "K_max", "v_degree"}


@dataclass
class ExperimentConfig:
    kind: str
    # either {"path": file} or sample_random_spec parameters
    spec: dict = field(default_factory=dict)
    seed: int = 0
    samples: int = 100
    out: str = "results"
    format: str = "csv"
    # sweep grids
    n: list = field(default_factory=lambda: [0, 1, 10, 100, 1000])
    L: list = field(default_factory=lambda: [1000, 10000])
    N: list = field(default_factory=lambda: [64])
    epsilon: list = field(default_factory=lambda: [0.05, 0.1, 0.2])
    E: list | None = None  # None: 16 energies across the observed spectrum
    gamma: list | None = None  # None: the spec's own gamma
    N1: list = field(default_factory=lambda: [64])
    # scalar parameters
    K: int = 2
    M: int = 32
    c0: float = 0.01
    slack: float = 0.005
    rate_floor: float = 0.01
    norm_exponent: float = 0.9

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise InvalidArgument(f"kind must be one of {', '.join(KINDS)}; got {self.kind!r}")
        if self.format not in FORMATS:
            raise InvalidArgument(f"format must be csv or json; got {self.format!r}")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise InvalidArgument("samples must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidArgument("seed must be a non-negative integer")
        for name in ("L", "N", "epsilon", "N1"):
            grid = getattr(self, name)
            if not isinstance(grid, list) or not grid or any(not _is_num(v) or v <= 0 for v in grid):
                raise InvalidArgument(f"{name} must be a nonempty list of positive numbers")
        for name in ("L", "N", "N1"):
            if any(not isinstance(v, int) for v in getattr(self, name)):
                raise InvalidArgument(f"{name} entries must be integers")
        # orbit times may start at 0, energies may be any real number
        if not self.n or any(not isinstance(v, int) or v < 0 for v in self.n):
            raise InvalidArgument("n must be a nonempty list of integers >= 0")
        if self.E is not None and (not self.E or any(not _is_num(v) for v in self.E)):
            raise InvalidArgument("E must be null or a nonempty list of numbers")
        if self.gamma is not None and (not self.gamma or any(not _is_num(v) or v <= 0 for v in self.gamma)):
            raise InvalidArgument("gamma must be null or a nonempty list of positive numbers")
        for name in ("K", "M"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be a positive integer")
        for name in ("c0", "slack", "rate_floor", "norm_exponent"):
            if not _is_num(getattr(self, name)) or getattr(self, name) <= 0:
                raise InvalidArgument(f"{name} must be positive")
        if not isinstance(self.spec, dict):
            raise InvalidArgument("spec must be a mapping")
        if "path" in self.spec:
            if set(self.spec) != {"path"}:
                raise InvalidArgument("a spec given by path takes no other keys")
            if self.gamma is not None:
                raise InvalidArgument("a gamma sweep needs a sampled spec, not a spec file")
        elif set(self.spec) - SPEC_PARAM_KEYS:
            bad = sorted(set(self.spec) - SPEC_PARAM_KEYS)
            raise InvalidArgument(f"unknown spec keys: {', '.join(bad)}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise InvalidArgument("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidArgument(f"unknown config keys: {', '.join(unknown)}")
        if "kind" not in data:
            raise InvalidArgument("config needs a 'kind'")
        return cls(**data).validate()


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a JSON or YAML config; a run manifest is accepted too (its config echo is used).

    Keyword overrides with value None are ignored.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise InvalidArgument(f"cannot parse config {path}: {exc}") from None
    if isinstance(data, dict) and "config" in data and "tool_version" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise InvalidArgument("config must be a mapping")
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)
