"""Run configuration: dataclasses, YAML round-trip and validation.

Key schema (YAML)::

    seed: 0
    output: results/run
    networks:
      - {name: karate, path: data/karate.txt, beta: 10}
    task: {kind: deception, detector: greedy, seed_count: 10, ic_prob: 0.05, ic_samples: 100}
    ea: {population: 100, generations: 200, crossover_prob: 0.5, mutation_prob: 0.1, elite_fraction: 0.1}
    transfer: {enabled: true, k: 5, total: 30, assisted_override: null, swap_mutation_candidates: false}
    learn:
      gae: {hidden: 32, embed_dim: 16, epochs: 300, learning_rate: 0.01, seed: 0, optimizer: gd}
      align: {epochs: 500, lr: 0.01, seed: 0, automap_reduction: mean, anchor_ties: id}
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml

from .alignment import AlignHyper
from .community import DETECTORS
from .embedding import GaeHyper
from .evo import EAConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    name: str
    path: str = ""
    beta: int = 10


@dataclass(frozen=True)
class TaskConfig:
    kind: str = "deception"
    detector: str = "greedy"
    seed_count: int = 10  # influence maximisation: seed-set size (overrides beta)
    ic_prob: float = 0.05
    ic_samples: int = 100


@dataclass(frozen=True)
class TransferConfig:
    enabled: bool = True
    k: int = 5
    total: int = 30
    assisted_override: int | None = None
    swap_mutation_candidates: bool = False


@dataclass(frozen=True)
class LearnConfig:
    gae: GaeHyper = GaeHyper()
    align: AlignHyper = AlignHyper()


@dataclass(frozen=True)
class RunConfig:
    networks: tuple = ()
    task: TaskConfig = TaskConfig()
    ea: EAConfig = EAConfig()
    transfer: TransferConfig = TransferConfig()
    learn: LearnConfig = LearnConfig()
    seed: int = 0
    output: str = "results"

    def with_(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def validate(self, check_paths: bool = True) -> "RunConfig":
        errs = []
        for name, p in (("ea.crossover_prob", self.ea.crossover_prob),
                        ("ea.mutation_prob", self.ea.mutation_prob),
                        ("ea.elite_fraction", self.ea.elite_fraction),
                        ("task.ic_prob", self.task.ic_prob)):
            if not 0.0 <= p <= 1.0:
                errs.append(f"{name}={p} is not a probability")
        if self.transfer.k < 1:
            errs.append("transfer.k must be >= 1")
        if self.transfer.total < 0:
            errs.append("transfer.total must be >= 0")
        if self.transfer.assisted_override is not None and self.transfer.assisted_override < 1:
            errs.append("transfer.assisted_override must be >= 1")
        if self.ea.population < 2:
            errs.append("ea.population must be >= 2")
        if self.ea.generations < 0:
            errs.append("ea.generations must be >= 0")
        if self.task.kind not in ("deception", "influence"):
            errs.append(f"task.kind {self.task.kind!r} must be 'deception' or 'influence'")
        if self.task.detector not in DETECTORS:
            errs.append(f"task.detector {self.task.detector!r} must be one of {sorted(DETECTORS)}")
        if self.task.ic_samples < 1:
            errs.append("task.ic_samples must be >= 1")
        names = [n.name for n in self.networks]
        if len(set(names)) != len(names):
            errs.append("network names must be unique")
        for n in self.networks:
            if n.beta < 0:
                errs.append(f"network {n.name}: beta must be >= 0")
            if check_paths and not Path(n.path).is_file():
                errs.append(f"network {n.name}: edge list {n.path!r} not found")
        for name, v in (("learn.gae.epochs", self.learn.gae.epochs), ("learn.align.epochs", self.learn.align.epochs),
                        ("learn.gae.hidden", self.learn.gae.hidden), ("learn.gae.embed_dim", self.learn.gae.embed_dim)):
            if v < 1:
                errs.append(f"{name} must be >= 1")
        if errs:
            raise ConfigError("invalid config:\n  " + "\n  ".join(errs))
        return self


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    allowed = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    learn = data.get("learn") or {}
    if set(learn) - {"gae", "align"}:
        raise ConfigError(f"learn: unknown keys {sorted(set(learn) - {'gae', 'align'})}")
    try:
        return RunConfig(
            networks=tuple(_build(NetworkConfig, n, "networks[]") for n in data.get("networks") or ()),
            task=_build(TaskConfig, data.get("task"), "task"),
            ea=_build(EAConfig, data.get("ea"), "ea"),
            transfer=_build(TransferConfig, data.get("transfer"), "transfer"),
            learn=LearnConfig(_build(GaeHyper, learn.get("gae"), "learn.gae"),
                              _build(AlignHyper, learn.get("align"), "learn.align")),
            seed=int(data.get("seed", 0)),
            output=str(data.get("output", "results")),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["networks"] = [dict(n) for n in d["networks"]]
    return d


def load_config(path) -> RunConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    cfg = from_dict(data or {})
    base = Path(path).resolve().parent
    nets = tuple(dataclasses.replace(n, path=str((base / n.path)) if n.path and not Path(n.path).is_absolute() else n.path)
                 for n in cfg.networks)
    return cfg.with_(networks=nets)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(dump_config(cfg))
