"""Declarative run configuration: JSON schema, parsing, provenance.

A config document describes the plan, the engineered noise, statics,
simulation and estimation parameters, and optional study sections.  The
parsed form carries a hash of the canonical document (minus the output
directory) so every artifact can state exactly what produced it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json

import jsonschema

from .errors import ConfigError
from .estimation import InversionOptions
from .filters import FrequencyGrid, ReconstructionSystem, \
    build_reconstruction_system
from .noise import ArmaSpec, BandpassSpec, NoiseComponent, NoiseProcessSpec, \
    OuSpec
from .oracle import StaticParams
from .sequences import ExperimentPlan, build_plan
from .simulator import PulseModel, ReadoutModel

__all__ = [
    "CONFIG_SCHEMA",
    "RunConfig",
    "load_config",
    "parse_config",
]

_COMPONENT_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {
                "type": {"const": "ou"},
                "sigma": {"type": "number", "minimum": 0},
                "theta": {"type": "number", "exclusiveMinimum": 0},
                "mu": {"type": "number"},
                "scale": {"type": "number"},
                "delay": {"type": "number", "minimum": 0},
                "name": {"type": ["string", "null"]},
            },
            "required": ["type", "sigma", "theta"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "type": {"const": "bandpass"},
                "amplitude": {"type": "number", "minimum": 0},
                "omega_low": {"type": "number", "minimum": 0},
                "omega_high": {"type": "number", "exclusiveMinimum": 0},
                "scale": {"type": "number"},
                "delay": {"type": "number", "minimum": 0},
                "name": {"type": ["string", "null"]},
            },
            "required": ["type", "amplitude", "omega_low", "omega_high"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "type": {"const": "arma"},
                "ar": {"type": "array", "items": {"type": "number"}},
                "ma": {"type": "array", "items": {"type": "number"},
                       "minItems": 1},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "scale": {"type": "number"},
                "delay": {"type": "number", "minimum": 0},
                "name": {"type": ["string", "null"]},
            },
            "required": ["type", "ar", "ma", "dt"],
            "additionalProperties": False,
        },
    ],
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema": {"const": "qns-config-v1"},
        "plan": {
            "type": "object",
            "properties": {
                "K": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1, "maximum": 14},
                "tau_pi": {"type": "number", "exclusiveMinimum": 0},
                "repetitions": {"type": "integer", "minimum": 1},
            },
            "required": ["K", "m", "tau_pi"],
            "additionalProperties": False,
        },
        "statics": {
            "type": "object",
            "properties": {
                "delta1": {"type": "number"},
                "delta2": {"type": "number"},
                "j_zz": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "noise": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "channel": {"enum": ["qubit1", "qubit2", "crosstalk"]},
                    "components": {"type": "array",
                                   "items": _COMPONENT_SCHEMA},
                },
                "required": ["channel", "components"],
                "additionalProperties": False,
            },
        },
        "simulation": {
            "type": "object",
            "properties": {
                "trajectories": {"type": "integer", "minimum": 1},
                "shots": {"type": ["integer", "null"], "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "oversample": {"type": "integer", "minimum": 1},
                "threads": {"type": "integer", "minimum": 1},
                "sampling": {"enum": ["iid", "stratified"]},
                "pulse": {
                    "type": "object",
                    "properties": {
                        "width": {"type": "number", "minimum": 0},
                        "substeps": {"type": "integer", "minimum": 8},
                    },
                    "required": ["width"],
                    "additionalProperties": False,
                },
                "readout": {
                    "type": "object",
                    "properties": {
                        "flip1": {"type": "number", "minimum": 0,
                                  "exclusiveMaximum": 0.5},
                        "flip2": {"type": "number", "minimum": 0,
                                  "exclusiveMaximum": 0.5},
                    },
                    "required": ["flip1"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "estimation": {
            "type": "object",
            "properties": {
                "nonnegative": {"type": "boolean"},
                "drop_flagged": {"type": "boolean"},
                "bootstrap_resamples": {"type": "integer", "minimum": 0},
                "confidence": {"type": "number", "exclusiveMinimum": 0,
                               "exclusiveMaximum": 1},
            },
            "additionalProperties": False,
        },
        "study": {
            "type": "object",
            "properties": {
                "delay_sweep": {"type": "object"},
                "comb_compare": {"type": "object"},
                "pulse_width": {"type": "object"},
                "mitigation_compare": {"type": "object"},
            },
            "additionalProperties": False,
        },
        "output_dir": {"type": "string"},
    },
    "required": ["schema", "plan"],
    "additionalProperties": False,
}


def _build_component(doc: dict) -> NoiseComponent:
    kind = doc["type"]
    try:
        if kind == "ou":
            gen = OuSpec(sigma=doc["sigma"], theta=doc["theta"],
                         mu=doc.get("mu", 0.0))
        elif kind == "bandpass":
            gen = BandpassSpec(amplitude=doc["amplitude"],
                               omega_low=doc["omega_low"],
                               omega_high=doc["omega_high"])
        else:
            gen = ArmaSpec(ar_coeffs=tuple(doc["ar"]),
                           ma_coeffs=tuple(doc["ma"]), dt=doc["dt"])
        return NoiseComponent(generator=gen, scale=doc.get("scale", 1.0),
                              delay=doc.get("delay", 0.0),
                              name=doc.get("name"))
    except ValueError as exc:
        raise ConfigError(f"invalid noise component: {exc}") from exc


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Parsed and cross-checked run configuration."""

    raw: dict
    sha256: str
    K: int
    m: int
    tau_pi: float
    repetitions: int
    statics: StaticParams
    noise: tuple[NoiseProcessSpec, ...]
    trajectories: int
    shots: int | None
    seed: int
    oversample: int
    threads: int
    sampling: str
    pulse: PulseModel | None
    readout: ReadoutModel | None
    options: InversionOptions
    bootstrap_resamples: int
    confidence: float
    study: dict
    output_dir: str | None

    @property
    def base_duration(self) -> float:
        return 2 ** (self.m + 1) * self.tau_pi

    @property
    def fine_dt(self) -> float:
        return self.tau_pi / self.oversample

    def build_plan(self) -> ExperimentPlan:
        return build_plan(K=self.K, m=self.m, tau_pi=self.tau_pi,
                          reps=self.repetitions)

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid.for_orders(self.K - 1, self.base_duration)

    def system(self) -> ReconstructionSystem:
        return build_reconstruction_system(self.build_plan(), self.grid())

    def provenance(self) -> dict:
        return {"config_sha256": self.sha256, "seed": self.seed}


def _cross_checks(cfg: RunConfig) -> None:
    fine = cfg.fine_dt
    shared: dict[str, object] = {}
    for spec in cfg.noise:
        for comp in spec.components:
            if comp.name is not None:
                prev = shared.setdefault(comp.name, comp.generator)
                if prev != comp.generator:
                    raise ConfigError(
                        f"shared component {comp.name!r} has conflicting "
                        f"generators across channels")
            if isinstance(comp.generator, ArmaSpec):
                if abs(comp.generator.dt - fine) > 1e-9 * fine:
                    raise ConfigError(
                        f"arma component dt {comp.generator.dt:.6g} does not "
                        f"match the simulation step {fine:.6g} "
                        f"(tau_pi / oversample)")
            steps = comp.delay / fine
            if abs(steps - round(steps)) > 1e-6:
                raise ConfigError(
                    f"component delay {comp.delay:.6g} s is not an integer "
                    f"multiple of the simulation step {fine:.6g} s")
    if cfg.K > 2 ** cfg.m:
        raise ConfigError(f"K={cfg.K} exceeds the 2^m={2 ** cfg.m} distinct "
                          f"orders available at m={cfg.m}")


def parse_config(doc: dict, seed_override: int | None = None) -> RunConfig:
    """Validate a config document and build the run objects."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "".join(f"[{p!r}]" for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config{path}: {exc.message}") from exc

    doc = json.loads(json.dumps(doc))  # private copy
    sim = doc.get("simulation", {})
    if seed_override is not None:
        sim = dict(sim, seed=seed_override)
        doc["simulation"] = sim

    hashed = {k: v for k, v in doc.items() if k != "output_dir"}
    canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode()).hexdigest()

    statics_doc = doc.get("statics", {})
    statics = StaticParams(delta1=statics_doc.get("delta1", 0.0),
                           delta2=statics_doc.get("delta2", 0.0),
                           j_zz=statics_doc.get("j_zz", 0.0))

    seen = set()
    noise = []
    for entry in doc.get("noise", []):
        if entry["channel"] in seen:
            raise ConfigError(f"channel {entry['channel']!r} appears twice")
        seen.add(entry["channel"])
        noise.append(NoiseProcessSpec(
            label=entry["channel"],
            components=tuple(_build_component(c)
                             for c in entry["components"])))

    pulse = None
    if "pulse" in sim:
        try:
            pulse = PulseModel(width=sim["pulse"]["width"],
                               substeps=sim["pulse"].get("substeps", 8))
        except ValueError as exc:
            raise ConfigError(f"invalid pulse model: {exc}") from exc
    readout = None
    if "readout" in sim:
        readout = ReadoutModel.symmetric(sim["readout"]["flip1"],
                                         sim["readout"].get("flip2"))

    est = doc.get("estimation", {})
    cfg = RunConfig(
        raw=doc,
        sha256=digest,
        K=doc["plan"]["K"],
        m=doc["plan"]["m"],
        tau_pi=doc["plan"]["tau_pi"],
        repetitions=doc["plan"].get("repetitions", 1),
        statics=statics,
        noise=tuple(noise),
        trajectories=sim.get("trajectories", 1000),
        shots=sim.get("shots"),
        seed=sim.get("seed", 0),
        oversample=sim.get("oversample", 1),
        threads=sim.get("threads", 1),
        sampling=sim.get("sampling", "iid"),
        pulse=pulse,
        readout=readout,
        options=InversionOptions(
            nonnegative=est.get("nonnegative", False),
            drop_flagged=est.get("drop_flagged", False)),
        bootstrap_resamples=est.get("bootstrap_resamples", 0),
        confidence=est.get("confidence", 0.95),
        study=doc.get("study", {}),
        output_dir=doc.get("output_dir"),
    )
    _cross_checks(cfg)
    return cfg


def load_config(path, seed_override: int | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, seed_override=seed_override)
