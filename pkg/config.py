#!/usr/bin/env python3
"""
Configuration
=============

Two layers:

- ConfigManager: simulator settings (integrator, pulse window, threads,
  tuner defaults, logging) from built-in defaults merged with a JSON file
  under configs/ and the IGS_THREADS environment variable.
- Run documents: pydantic models for the JSON experiment files accepted by
  the command line, one payload per subcommand.
"""

import copy
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from algorithm import AlgorithmConfig, default_marked_bits
from dynamics import IntegratorSettings, PulseParams
from exceptions import ConfigurationError
from hilbert import IonConfig, parse_ion_bits, validate_marked_bits
from ideal_search import Database
from tuner import TuneTarget

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent / "configs"
DEFAULT_CONFIG_PATH = CONFIG_DIR / "default_config.json"
SCHEMA_VERSION = 1

DEFAULT_SETTINGS: Dict[str, Any] = {
    "integrator": {
        "method": "dop853",
        "rtol": 1e-12,
        "atol": 1e-13,
        "max_rhs_evaluations": 5_000_000,
        "cfet_steps": 4000,
        "norm_tolerance": 1e-9,
    },
    "pulse": {
        "window": 4.0,
        "detuning_frame": "chain",
    },
    "concurrency": {
        "threads": None,
    },
    "tuner": {
        "grid_density": 24,
        "refine_tolerance": 1e-6,
        "objective_threshold": 0.05,
        "max_refine_evaluations": 400,
    },
    "logging": {
        "level": "warning",
        "log_dir": None,
    },
    "output": {
        "schema_version": SCHEMA_VERSION,
    },
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """Manage simulator settings."""

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        self.config_path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
        self.logger = logging.getLogger(__name__)
        self.config = self.load_config()

    def load_config(self) -> Dict[str, Any]:
        """Load settings, merging the JSON file over the built-in defaults."""
        config = copy.deepcopy(DEFAULT_SETTINGS)
        if not self.config_path.exists():
            if self.config_path != DEFAULT_CONFIG_PATH:
                raise ConfigurationError(f"settings file {self.config_path} does not exist")
            return config
        try:
            with open(self.config_path, "r") as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read settings {self.config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"settings {self.config_path} must be a JSON object")
        return deep_merge(config, loaded)

    def get_threads(self) -> int:
        """Worker threads: the configured value (or CPU count, at most 8), capped by IGS_THREADS."""
        threads = self.config["concurrency"].get("threads") or min(os.cpu_count() or 1, 8)
        cap = os.environ.get("IGS_THREADS")
        if cap:
            try:
                threads = min(threads, max(1, int(cap)))
            except ValueError:
                raise ConfigurationError(f"IGS_THREADS must be an integer, got {cap!r}") from None
        return max(1, int(threads))

    def get_integrator_settings(self) -> IntegratorSettings:
        section = self.config["integrator"]
        return IntegratorSettings(
            method=section["method"],
            rtol=float(section["rtol"]),
            atol=float(section["atol"]),
            max_rhs_evaluations=int(section["max_rhs_evaluations"]),
            cfet_steps=int(section["cfet_steps"]),
            norm_tolerance=float(section["norm_tolerance"]),
            threads=self.get_threads(),
        )

    def get_window(self) -> float:
        return float(self.config["pulse"]["window"])

    def get_frame(self) -> str:
        return str(self.config["pulse"]["detuning_frame"])

    def get_tuner_defaults(self) -> Dict[str, Any]:
        return dict(self.config["tuner"])

    def get_logging_config(self) -> Dict[str, Any]:
        return dict(self.config["logging"])

    @property
    def schema_version(self) -> int:
        return int(self.config["output"]["schema_version"])


Frame = Literal["chain", "addressed"]


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PulseSpec(_Document):
    g0T: float = Field(ge=0)
    deltaT: float

    def as_tuple(self) -> Tuple[float, float]:
        return self.g0T, self.deltaT


class SimulateDocument(_Document):
    """Mirror of AlgorithmConfig; ion 1 is the leftmost character of marked_bits."""
    n_ions: int
    marked_bits: Optional[str] = None
    oracle: PulseSpec
    reflection: PulseSpec
    n_steps: Optional[int] = Field(default=None, ge=0)
    window: Optional[float] = Field(default=None, gt=0)
    frame: Optional[Frame] = None
    rng_seed: int = 0
    n_shots: int = Field(default=1000, ge=0)
    record_mid_step: bool = False
    trace_points: int = Field(default=0, ge=0)
    extract_phases: bool = True

    def resolved(self, settings: ConfigManager) -> "SimulateDocument":
        """Copy with every default made explicit, so the document reproduces the run alone."""
        ions = IonConfig(self.n_ions)
        marked = self.marked_bits or default_marked_bits(self.n_ions)
        validate_marked_bits(ions, marked)
        return self.model_copy(update={
            "marked_bits": marked,
            "window": self.window if self.window is not None else settings.get_window(),
            "frame": self.frame or settings.get_frame(),
        })

    def to_algorithm_config(self, settings: ConfigManager) -> AlgorithmConfig:
        doc = self.resolved(settings)
        return AlgorithmConfig.create(
            doc.n_ions, doc.marked_bits, doc.oracle.as_tuple(), doc.reflection.as_tuple(),
            window=doc.window, frame=doc.frame, n_steps=doc.n_steps, rng_seed=doc.rng_seed,
            n_shots=doc.n_shots, record_mid_step=doc.record_mid_step,
            trace_points=doc.trace_points, extract_phases=doc.extract_phases,
        )

    @classmethod
    def from_algorithm_config(cls, config: AlgorithmConfig) -> "SimulateDocument":
        return cls(
            n_ions=config.ions.n_ions,
            marked_bits=config.marked_bits,
            oracle=PulseSpec(g0T=config.oracle_pulse.g0T, deltaT=config.oracle_pulse.deltaT),
            reflection=PulseSpec(g0T=config.reflection_pulse.g0T, deltaT=config.reflection_pulse.deltaT),
            n_steps=config.n_steps,
            window=config.oracle_pulse.window,
            frame=config.oracle_pulse.frame,
            rng_seed=config.rng_seed,
            n_shots=config.n_shots,
            record_mid_step=config.record_mid_step,
            trace_points=config.trace_points,
            extract_phases=config.extract_phases,
        )


class TuneDocument(_Document):
    kind: Literal["reflection", "oracle"]
    n_ions: int
    marked_bits: Optional[str] = None
    g0T_range: Tuple[float, float] = (1.0, 40.0)
    deltaT_range: Tuple[float, float] = (1.0, 40.0)
    target_phase: float = math.pi
    grid_density: Optional[int] = Field(default=None, ge=1)
    refine_tolerance: Optional[float] = Field(default=None, gt=0)
    objective_threshold: Optional[float] = Field(default=None, ge=0)
    max_refine_evaluations: Optional[int] = Field(default=None, ge=0)
    window: Optional[float] = Field(default=None, gt=0)
    frame: Optional[Frame] = None
    subspace: Literal["database", "symmetric"] = "database"
    evaluation: Literal["reduced", "sector"] = "reduced"

    def resolved(self, settings: ConfigManager) -> "TuneDocument":
        defaults = settings.get_tuner_defaults()
        update: Dict[str, Any] = {
            "window": self.window if self.window is not None else settings.get_window(),
            "frame": self.frame or settings.get_frame(),
        }
        for name in ("grid_density", "refine_tolerance", "objective_threshold", "max_refine_evaluations"):
            if getattr(self, name) is None:
                update[name] = defaults[name]
        if self.kind == "oracle" and self.marked_bits is None:
            update["marked_bits"] = default_marked_bits(self.n_ions)
        return self.model_copy(update=update)

    def to_target(self, settings: ConfigManager) -> TuneTarget:
        doc = self.resolved(settings)
        return TuneTarget(
            operator_kind=doc.kind,
            ions=IonConfig(doc.n_ions),
            g0T_bounds=tuple(doc.g0T_range),
            deltaT_bounds=tuple(doc.deltaT_range),
            target_phase=doc.target_phase,
            marked_bits=doc.marked_bits,
            grid_density=doc.grid_density,
            refine_tolerance=doc.refine_tolerance,
            objective_threshold=doc.objective_threshold,
            max_refine_evaluations=doc.max_refine_evaluations,
            window=doc.window,
            frame=doc.frame,
            subspace=doc.subspace,
            evaluation=doc.evaluation,
        )


class IdealDocument(_Document):
    dimension: int = Field(ge=2)
    marked: int = Field(default=0, ge=0)
    phi: float = math.pi
    phi_s: Optional[float] = None
    n_steps: Optional[int] = Field(default=None, ge=0)
    method: Literal["rank_one", "dense"] = "rank_one"

    def to_database(self) -> Database:
        return Database(self.dimension, self.marked)


class BasisDocument(_Document):
    n_ions: int
    chains: bool = False


class PulseDocument(_Document):
    """A single pulse and the probes to extract its phases with."""
    n_ions: int
    g0T: float = Field(ge=0)
    deltaT: float
    addressed: str = "all"
    marked_bits: Optional[str] = None
    window: Optional[float] = Field(default=None, gt=0)
    frame: Optional[Frame] = None
    probes: Optional[Literal["chains", "phi", "dicke", "database"]] = None

    @field_validator("addressed")
    @classmethod
    def _check_addressed(cls, value: str) -> str:
        if value not in ("all", "markedhalf") and (not value or set(value) - {"0", "1"}):
            raise ValueError("addressed must be 'all', 'markedhalf' or a 0/1 string with ion 1 leftmost")
        return value

    def resolved(self, settings: ConfigManager) -> "PulseDocument":
        update: Dict[str, Any] = {
            "window": self.window if self.window is not None else settings.get_window(),
            "frame": self.frame or settings.get_frame(),
        }
        probes = self.probes or ("chains" if self.addressed == "all" else "phi")
        update["probes"] = probes
        if self.marked_bits is None and (self.addressed == "markedhalf" or probes == "phi"):
            update["marked_bits"] = default_marked_bits(self.n_ions)
        return self.model_copy(update=update)

    def addressed_mask(self, ions: IonConfig) -> int:
        if self.addressed == "all":
            return ions.all_ions
        if self.addressed == "markedhalf":
            if self.marked_bits is None:
                raise ConfigurationError("addressed 'markedhalf' needs marked_bits")
            return validate_marked_bits(ions, self.marked_bits)
        if len(self.addressed) != ions.n_ions:
            raise ConfigurationError(f"addressed bitmask must have {ions.n_ions} characters, got {self.addressed!r}")
        return parse_ion_bits(self.addressed)

    def to_pulse(self, settings: ConfigManager) -> Tuple[IonConfig, PulseParams]:
        doc = self.resolved(settings)
        ions = IonConfig(doc.n_ions)
        return ions, PulseParams(doc.g0T, doc.deltaT, doc.addressed_mask(ions), doc.window, doc.frame)


COMMANDS = ("simulate", "tune", "ideal", "basis", "pulse")


class ExperimentConfig(_Document):
    """One experiment: exactly one command payload plus output options."""
    schema_version: int = SCHEMA_VERSION
    simulate: Optional[SimulateDocument] = None
    tune: Optional[TuneDocument] = None
    ideal: Optional[IdealDocument] = None
    basis: Optional[BasisDocument] = None
    pulse: Optional[PulseDocument] = None
    output_path: Optional[str] = None
    format: Literal["csv", "json"] = "csv"

    @model_validator(mode="after")
    def _exactly_one_payload(self) -> "ExperimentConfig":
        present = [name for name in COMMANDS if getattr(self, name) is not None]
        if len(present) != 1:
            raise ValueError(f"exactly one command payload is required, got {present or 'none'}")
        return self

    @property
    def command(self) -> str:
        return next(name for name in COMMANDS if getattr(self, name) is not None)

    @property
    def payload(self) -> _Document:
        return getattr(self, self.command)

    def payload_dict(self) -> Dict[str, Any]:
        return self.payload.model_dump(mode="json", exclude_unset=True)
