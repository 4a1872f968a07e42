"""Simulation configuration: JSON schema, defaults, validation.

See configs/default.json for a full-default example. Unknown keys are
rejected so typos fail loudly at load time.
"""

import json
import os
from dataclasses import dataclass, field

from .addrmap import MappingScheme
from .core import Geometry, TimingParams
from .scheduler import SchedulerConfig
from .trace import SyntheticConfig


class ConfigError(ValueError):
    pass


_SECTIONS = ("geometry", "timing", "mapping", "scheduler", "power", "trace",
             "queue_capacity", "output_dir", "seed")


@dataclass
class SimConfig:
    geometry: Geometry = field(default_factory=Geometry)
    timing: TimingParams = field(default_factory=TimingParams)
    scheme: MappingScheme | None = None
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    p_sa: float = 0.12
    p_wd: float = 0.24
    trace_file: str | None = None
    synthetic: SyntheticConfig | None = None
    queue_capacity: int | None = None
    output_dir: str = "out"
    seed: int = 1

    def __post_init__(self):
        if self.scheme is None:
            self.scheme = MappingScheme.for_geometry("DEFAULT_MICRON", self.geometry)
        if self.p_sa < 0 or self.p_wd < 0:
            raise ConfigError("power parameters must be >= 0")
        if self.queue_capacity is not None and self.queue_capacity < 1:
            raise ConfigError("queue_capacity must be >= 1 (or null for unbounded)")
        if self.trace_file is not None and self.synthetic is not None:
            raise ConfigError("configure either a trace file or a synthetic trace")

    def echo(self) -> dict:
        """Configuration snapshot embedded in reports."""
        out = {
            "geometry": vars(self.geometry).copy(),
            "timing": vars(self.timing).copy(),
            "mapping": self.scheme.name,
            "scheduler": vars(self.scheduler).copy(),
            "power": {"p_sa": self.p_sa, "p_wd": self.p_wd},
            "queue_capacity": self.queue_capacity,
            "seed": self.seed,
        }
        if self.trace_file is not None:
            out["trace"] = {"file": self.trace_file}
        elif self.synthetic is not None:
            out["trace"] = {"synthetic": vars(self.synthetic).copy()}
        else:
            out["trace"] = None
        return out


def _build_dataclass(cls, data: dict, section: str):
    fields = cls.__dataclass_fields__
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _build_scheme(data: dict, geometry: Geometry) -> MappingScheme:
    name = data.get("name", "DEFAULT_MICRON")
    unknown = set(data) - {"name", "fields"}
    if unknown:
        raise ConfigError(f"mapping: unknown keys {sorted(unknown)}")
    try:
        if name == "CUSTOM":
            if "fields" not in data:
                raise ConfigError("mapping: CUSTOM needs a `fields` list")
            return MappingScheme.custom(data["fields"])
        return MappingScheme.for_geometry(name, geometry)
    except ValueError as exc:
        raise ConfigError(f"mapping: {exc}") from None


def from_dict(data: dict, base_dir: str = ".") -> SimConfig:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")

    seed = data.get("seed", 1)
    geometry = _build_dataclass(Geometry, data.get("geometry", {}), "geometry")
    timing = _build_dataclass(TimingParams, data.get("timing", {}), "timing")
    scheme = _build_scheme(data.get("mapping", {}), geometry)
    scheduler = _build_dataclass(
        SchedulerConfig, data.get("scheduler", {}), "scheduler"
    )
    power = data.get("power", {})
    unknown = set(power) - {"p_sa", "p_wd"}
    if unknown:
        raise ConfigError(f"power: unknown keys {sorted(unknown)}")

    trace_file = None
    synthetic = None
    trace = data.get("trace")
    if trace is not None:
        unknown = set(trace) - {"file", "synthetic"}
        if unknown:
            raise ConfigError(f"trace: unknown keys {sorted(unknown)}")
        if "file" in trace and "synthetic" in trace:
            raise ConfigError("trace: give either `file` or `synthetic`, not both")
        if "file" in trace:
            trace_file = trace["file"]
            if not os.path.isabs(trace_file):
                trace_file = os.path.join(base_dir, trace_file)
            if not os.path.exists(trace_file):
                raise ConfigError(f"trace file not found: {trace_file}")
        elif "synthetic" in trace:
            syn = dict(trace["synthetic"])
            syn.setdefault("seed", seed)
            synthetic = _build_dataclass(SyntheticConfig, syn, "trace.synthetic")

    return SimConfig(
        geometry=geometry,
        timing=timing,
        scheme=scheme,
        scheduler=scheduler,
        p_sa=power.get("p_sa", 0.12),
        p_wd=power.get("p_wd", 0.24),
        trace_file=trace_file,
        synthetic=synthetic,
        queue_capacity=data.get("queue_capacity"),
        output_dir=data.get("output_dir", "out"),
        seed=seed,
    )


def load(path: str | None, overrides: dict | None = None) -> SimConfig:
    """Load a config file and apply flag overrides (flags > file > defaults)."""
    data: dict = {}
    base_dir = "."
    if path is not None:
        try:
            with open(path) as f:
                data = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        base_dir = os.path.dirname(os.path.abspath(path))
    for dotted, value in (overrides or {}).items():
        node = data
        *parents, leaf = dotted.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return from_dict(data, base_dir)
