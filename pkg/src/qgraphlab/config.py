"""Experiment configuration: versioned, strict, round-trippable JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

from .errors import ConfigurationError

CONFIG_SCHEMA = "qgraphlab.config/1"

EXPERIMENT_KINDS = (
    "closed-spectrum",
    "closed-stats",
    "open-scatter",
    "goe-spectrum",
    "goe-scatter",
    "pf-analysis",
    "compare",
)


@dataclass
class GraphParams:
    vertex_count: int = 6
    length_min: float = 1.0
    length_max: float = 2.0
    condition_kind: str = "neumann"
    lengths: list | None = None           # explicit lengths bypass sampling
    channel_count: int = 0
    weights: list | None = None           # per-channel Householder weights
    target_transmissions: list | None = None


@dataclass
class SolverParams:
    k_min: float = 10.0
    k_max: float = 30.0
    target_tol: float = 1e-10
    grid_step: float | None = None
    levels_per_window: float = 48.0


@dataclass
class GoeParams:
    size: int = 500
    scale: float = 1.0
    realizations: int = 200
    grid_step: float | None = None


@dataclass
class ScatterParams:
    k_min: float = 10.0
    k_max: float = 40.0
    grid_step: float | None = None
    channel_pairs: list = field(default_factory=lambda: [[0, 0]])
    unfolded_offsets: list | None = None  # offsets in mean-spacing units


@dataclass
class StatsParams:
    measures: list = field(default_factory=lambda: ["nns"])
    subsequence_length: int = 500
    bin_width: float = 0.05
    tau_max: float = 3.0
    tau_bin: float = 0.02
    smoothing: float = 0.06
    l_grid: list | None = None
    placements: int = 400
    eps: float = 0.5
    offsets: list | None = None           # density-correlator offsets


@dataclass
class PfParams:
    n_steps: int = 60
    scan_sizes: list | None = None        # extra gap-vs-size survey


@dataclass
class CompareParams:
    run_a: str = ""
    run_b: str = ""
    measure: str = "nns"
    tolerance: float | None = None
    sigma_tolerance: float | None = None


@dataclass
class ExperimentConfig:
    kind: str = "closed-spectrum"
    seed: int = 0
    workers: int = 1
    out_dir: str = "runs/out"
    graph: GraphParams = field(default_factory=GraphParams)
    solver: SolverParams = field(default_factory=SolverParams)
    goe: GoeParams = field(default_factory=GoeParams)
    scatter: ScatterParams = field(default_factory=ScatterParams)
    stats: StatsParams = field(default_factory=StatsParams)
    pf: PfParams = field(default_factory=PfParams)
    compare: CompareParams = field(default_factory=CompareParams)


_SECTIONS = {
    "graph": GraphParams,
    "solver": SolverParams,
    "goe": GoeParams,
    "scatter": ScatterParams,
    "stats": StatsParams,
    "pf": PfParams,
    "compare": CompareParams,
}


def _build_section(name: str, cls, payload) -> object:
    if not isinstance(payload, dict):
        raise ConfigurationError(f"section '{name}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigurationError(
            f"unknown field '{sorted(unknown)[0]}' in section '{name}'")
    return cls(**payload)


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    data = dict(data)
    schema = data.pop("schema_version", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigurationError(f"unsupported config schema {schema!r}")

    top_known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - top_known
    if unknown:
        raise ConfigurationError(f"unknown config field '{sorted(unknown)[0]}'")

    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(key, _SECTIONS[key], value)
        else:
            kwargs[key] = value
    cfg = ExperimentConfig(**kwargs)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(
            f"unknown experiment kind {cfg.kind!r}; expected one of "
            f"{', '.join(EXPERIMENT_KINDS)}")
    if cfg.workers < 1:
        raise ConfigurationError("workers must be at least 1")
    g = cfg.graph
    if g.vertex_count < 2:
        raise ConfigurationError("graph.vertex_count must be at least 2")
    if not 0 < g.length_min < g.length_max:
        raise ConfigurationError("need 0 < graph.length_min < graph.length_max")
    if g.channel_count < 0 or g.channel_count > g.vertex_count:
        raise ConfigurationError(
            f"graph.channel_count {g.channel_count} must be between 0 and "
            f"vertex_count {g.vertex_count}")
    if cfg.solver.k_min < 0 or cfg.solver.k_max <= cfg.solver.k_min:
        raise ConfigurationError("need 0 <= solver.k_min < solver.k_max")
    if cfg.solver.target_tol <= 0:
        raise ConfigurationError("solver.target_tol must be positive")
    if cfg.kind in ("open-scatter", "goe-scatter"):
        if cfg.kind == "open-scatter" and g.channel_count < 1:
            raise ConfigurationError(
                "open-scatter needs graph.channel_count >= 1")
        if g.weights is None and g.target_transmissions is None:
            raise ConfigurationError(
                "scatter runs need graph.weights or graph.target_transmissions")
        n_chan = g.channel_count if cfg.kind == "open-scatter" else None
        for name in ("weights", "target_transmissions"):
            vals = getattr(g, name)
            if vals is None:
                continue
            if n_chan is not None and len(vals) != n_chan:
                raise ConfigurationError(
                    f"graph.{name} has {len(vals)} entries for "
                    f"channel_count {n_chan}")
    if cfg.kind == "compare":
        if not cfg.compare.run_a or not cfg.compare.run_b:
            raise ConfigurationError("compare needs compare.run_a and run_b")
    from .stats import MEASURE_KINDS

    bad = set(cfg.stats.measures) - set(MEASURE_KINDS)
    if bad:
        raise ConfigurationError(f"unknown measure '{sorted(bad)[0]}'")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    out["schema_version"] = CONFIG_SCHEMA
    return out


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}")
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
