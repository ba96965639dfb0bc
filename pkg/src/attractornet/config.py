"""Experiment configuration files.

A configuration is a flat INI-style file with up to four sections --
``[network]``, ``[neuron]``, ``[synapse]``, ``[schedule]`` -- each holding
``key = value`` pairs that override the built-in defaults.  Every key has a
default, so an empty (or absent) file is a complete configuration.  Unknown
sections or keys are hard errors: a typo must never silently fall back to a
default.

``save_config`` writes the fully merged, effective configuration back out in
the same format, so every run directory records exactly what it ran with.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .neuron import NeuronParams
from .network import NetworkConfig
from .synapse import SynapseParams

__all__ = [
    "ConfigError",
    "ScheduleConfig",
    "ExperimentConfig",
    "load_config",
    "save_config",
]


class ConfigError(Exception):
    """Raised for malformed files, unknown keys, or unparsable values."""


@dataclass
class ScheduleConfig:
    """Stimulation schedule and readout settings for learning runs."""

    patterns: int = 2          # number of disjoint patterns (2 = happy/sad faces)
    n_rounds: int = 20         # presentations per pattern
    duration: float = 1.0      # stimulus-on time per presentation, s
    period: float = 7.5        # presentation-to-presentation spacing, s
    rate_on: float = 500.0     # retina event rate for lit macro-pixels, Hz
    rate_off: float = 0.0      # retina event rate for dark macro-pixels, Hz
    snapshot_every: int = 2    # synaptic snapshot cadence, in presentations

    def __post_init__(self) -> None:
        if self.patterns < 1:
            raise ValueError("patterns must be >= 1")
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if not 0 < self.duration <= self.period:
            raise ValueError("need 0 < duration <= period")
        if self.rate_on < 0 or self.rate_off < 0:
            raise ValueError("rates must be >= 0")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


# network keys are the scalar NetworkConfig fields; nested parameter objects
# get their own sections.
_NETWORK_SKIP = {"neuron", "synapse", "stream_seeds"}


def _section_fields(cls, skip=()):
    return {f.name: f.type for f in fields(cls) if f.name not in skip}


_SECTIONS = {
    "network": _section_fields(NetworkConfig, _NETWORK_SKIP),
    "neuron": _section_fields(NeuronParams),
    "synapse": _section_fields(SynapseParams),
    "schedule": _section_fields(ScheduleConfig),
}

_INT_KEYS = {
    ("network", "n_exc"),
    ("network", "n_inh"),
    ("network", "seed"),
    ("schedule", "patterns"),
    ("schedule", "n_rounds"),
    ("schedule", "snapshot_every"),
}


@dataclass
class ExperimentConfig:
    """Fully resolved settings for one command invocation."""

    network: NetworkConfig = field(default_factory=NetworkConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)


def _coerce(section: str, key: str, raw: str):
    raw = raw.strip()
    try:
        if (section, key) in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        kind = "an integer" if (section, key) in _INT_KEYS else "a number"
        raise ConfigError(f"[{section}] {key}: expected {kind}, got {raw!r}") from None


def _parse_file(path) -> dict[str, dict[str, object]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc

    values: dict[str, dict[str, object]] = {name: {} for name in _SECTIONS}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(
                f"unknown section [{section}]; expected one of "
                f"{', '.join(sorted(_SECTIONS))}"
            )
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = _coerce(section, key, raw)
    return values


def _apply_overrides(values, overrides) -> None:
    """Apply ``section.key=value`` strings on top of file values."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section, key = dotted.strip().split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in override {item!r}")
        if key not in _SECTIONS[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        values[section][key] = _coerce(section, key, raw)


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional file plus CLI overrides.

    ``path=None`` means pure defaults.  ``overrides`` is an iterable of
    ``section.key=value`` strings applied after the file.
    """
    values = {name: {} for name in _SECTIONS} if path is None else _parse_file(path)
    _apply_overrides(values, overrides)
    try:
        network = NetworkConfig(
            neuron=NeuronParams(**values["neuron"]),
            synapse=SynapseParams(**values["synapse"]),
            **values["network"],
        )
        schedule = ScheduleConfig(**values["schedule"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(network=network, schedule=schedule)


def save_config(config: ExperimentConfig, path) -> None:
    """Write the effective configuration, every key explicit, to ``path``."""
    parser = configparser.ConfigParser(interpolation=None)
    sources = {
        "network": config.network,
        "neuron": config.network.neuron,
        "synapse": config.network.synapse,
        "schedule": config.schedule,
    }
    for section, obj in sources.items():
        parser[section] = {
            key: repr(getattr(obj, key)) for key in _SECTIONS[section]
        }
    with open(path, "w") as fh:
        parser.write(fh)
