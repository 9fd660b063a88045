"""Experiment configuration (TOML, or JSON when the file ends in .json)."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .lab import InvalidRecipe, Recipe
from .observatory import DEFAULT_BASE, DEFAULT_EPOCH


class ConfigError(ValueError):
    pass


@dataclass
class UdpSettings:
    targets: list[str] = field(default_factory=list)
    bind: str = "0.0.0.0"
    port: int = 53
    target_port: int = 53
    timeout: float = 2.0
    settle: float = 2.0
    rate_limit: float = 500.0


@dataclass
class ExperimentConfig:
    mode: str = "sim"
    base: str = DEFAULT_BASE
    epoch: int = DEFAULT_EPOCH
    seed: int = 0
    # Probes per second.  In sim mode this paces the virtual clock only.
    rate_limit: float | None = 10000.0
    out: Path = Path("out")
    exclude: Path | None = None
    org_map: Path | None = None
    recipe: Recipe | None = field(default_factory=Recipe)
    udp: UdpSettings = field(default_factory=UdpSettings)

    def validate(self) -> None:
        if self.mode not in ("sim", "udp"):
            raise ConfigError(f"mode must be 'sim' or 'udp', got {self.mode!r}")
        if self.mode == "sim" and self.recipe is None:
            raise ConfigError("sim mode needs a population recipe ([population] table or recipe = <path>)")
        if self.mode == "udp" and not self.udp.targets:
            raise ConfigError("udp mode needs an explicit target list ([udp] targets or targets_file)")
        if self.rate_limit is not None and self.rate_limit <= 0:
            raise ConfigError("rate_limit must be positive")
        for p in (self.exclude, self.org_map):
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"no such file: {p}")


def read_document(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _recipe(doc: Mapping[str, Any], where: Path) -> Recipe:
    try:
        return Recipe.from_mapping(doc)
    except (InvalidRecipe, TypeError) as exc:
        raise ConfigError(f"bad population recipe in {where}: {exc}") from exc


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Read a config file (if any) and apply non-None keyword overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        path = Path(path)
        doc = read_document(path)
        known = {"mode", "base", "epoch", "seed", "rate_limit", "out", "exclude", "org_map", "population", "recipe", "udp"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("mode", "base", "epoch", "seed", "rate_limit"):
            if key in doc:
                setattr(cfg, key, doc[key])
        for key in ("out", "exclude", "org_map"):
            if key in doc:
                setattr(cfg, key, (path.parent / doc[key]) if doc[key] else None)
        if "population" in doc:
            cfg.recipe = _recipe(doc["population"], path)
        elif "recipe" in doc:
            rpath = path.parent / doc["recipe"]
            rdoc = read_document(rpath)
            cfg.recipe = _recipe(rdoc.get("population", rdoc), rpath)
        elif cfg.mode == "sim":
            cfg.recipe = None
        if "udp" in doc:
            udp = dict(doc["udp"])
            tfile = udp.pop("targets_file", None)
            try:
                cfg.udp = UdpSettings(**udp)
            except TypeError as exc:
                raise ConfigError(f"bad [udp] table: {exc}") from exc
            if tfile:
                lines = (path.parent / tfile).read_text().splitlines()
                cfg.udp.targets += [ln.split("#", 1)[0].strip() for ln in lines if ln.split("#", 1)[0].strip()]
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, Path(value) if key in ("out", "exclude", "org_map") else value)
    if not isinstance(cfg.seed, int):
        raise ConfigError("seed must be an integer")
    cfg.validate()
    return cfg
