"""Scenario files: a sectioned key = value format read with configparser.

Sections: ``[system]`` (preset name), ``[machine]``, ``[line]``,
``[excitation]``, ``[governor]`` (per-field overrides of the preset),
``[pss]`` (T_w), ``[ga]``, ``[pso]``, ``[sim]``, ``[study]`` and one
``[scenario <id>]`` per operating condition.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .model import (
    ExcitationParams,
    GovernorTurbineParams,
    LineLoadParams,
    MachineParams,
    OperatingCondition,
    PssParams,
    SystemParams,
)
from .optimizers import FITNESS_SCOPES, GaConfig, PsoConfig
from .timesim import SimConfig

PRESETS: dict[str, SystemParams] = {
    "paper-appendix-1": SystemParams(),
    # same machine and network with textbook IEEE Type 1 exciter constants
    "ieee-type1-typical": SystemParams(
        exc=ExcitationParams(K_A=190.0, T_A=0.05, K_E=1.0, T_E=0.05, K_F=0.025, T_F=1.0)
    ),
}

_BLOCKS = {
    "machine": MachineParams,
    "line": LineLoadParams,
    "excitation": ExcitationParams,
    "governor": GovernorTurbineParams,
}
_SYSTEM_ATTR = {"machine": "machine", "line": "line", "excitation": "exc", "governor": "gt"}
_SCENARIO_RE = re.compile(r"^scenario\s+(\S+)$")


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.message, self.source, self.line = message, source, line
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Scenario:
    id: str
    op: OperatingCondition
    cpss: PssParams | None = None
    description: str = ""


@dataclass(frozen=True)
class ScenarioFile:
    system: SystemParams
    scenarios: tuple[Scenario, ...]
    ga: GaConfig = GaConfig()
    pso: PsoConfig = PsoConfig()
    sim: SimConfig = SimConfig()
    seeds: tuple[int, ...] = (0,)
    zeta_threshold: float = 0.06
    T_w: float = 10.0
    fitness_scope: str = "all"

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("at least one [scenario <id>] section is required")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        ids = [s.id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            raise ConfigError("scenario ids must be unique")

    def with_seeds(self, seeds) -> "ScenarioFile":
        return dataclasses.replace(self, seeds=tuple(seeds))


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """(section, key) -> 1-based line number; key None marks the header."""
    index: dict[tuple[str, str | None], int] = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            index[(section, None)] = n
        elif section is not None:
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            index[(section, key)] = n
    return index


class _Reader:
    def __init__(self, text: str, source: str):
        self.source = source
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        self.cp.optionxform = str  # keys are case sensitive (x_d vs X_e)
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(str(exc).splitlines()[0], source, line) from None
        self.lines = _line_index(text)

    def error(self, msg: str, section: str, key: str | None = None) -> ConfigError:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        return ConfigError(msg, self.source, line)

    def number(self, section: str, key: str, kind=float):
        raw = self.cp[section][key]
        try:
            if kind is bool:
                return self.cp[section].getboolean(key)
            return kind(raw)
        except ValueError:
            raise self.error(f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}", section, key) from None

    def vector(self, section: str, key: str) -> tuple[float, ...]:
        raw = self.cp[section][key]
        try:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        except ValueError:
            raise self.error(f"[{section}] {key}: expected numbers, got {raw!r}", section, key) from None

    def build(self, cls, section: str, base=None, extra: dict | None = None):
        """Instantiate dataclass ``cls`` from ``section``, starting from
        ``base`` (an instance) or class defaults."""
        values = dataclasses.asdict(base) if base is not None else {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        if section in self.cp:
            for key in self.cp[section]:
                if key not in types:
                    raise self.error(f"[{section}] unknown key {key!r}", section, key)
                kind = {"int": int, "bool": bool}.get(str(types[key]), float)
                values[key] = self.number(section, key, kind)
        values.update(extra or {})
        try:
            return cls(**values)
        except ValueError as exc:
            raise self.error(f"[{section}] {exc}", section) from None


def parse_config(text: str, source: str = "<config>") -> ScenarioFile:
    r = _Reader(text, source)
    cp = r.cp

    known = {"system", "pss", "ga", "pso", "sim", "study", *_BLOCKS}
    for name in cp.sections():
        if name not in known and not _SCENARIO_RE.match(name):
            raise r.error(f"unknown section [{name}]", name)

    preset = "paper-appendix-1"
    if "system" in cp:
        for key in cp["system"]:
            if key != "preset":
                raise r.error(f"[system] unknown key {key!r}", "system", key)
        preset = cp["system"].get("preset", preset)
    if preset not in PRESETS:
        raise r.error(f"unknown preset {preset!r} (known: {', '.join(PRESETS)})", "system", "preset")
    system = PRESETS[preset]
    for section, cls in _BLOCKS.items():
        attr = _SYSTEM_ATTR[section]
        system = dataclasses.replace(system, **{attr: r.build(cls, section, getattr(system, attr))})

    T_w = 10.0
    if "pss" in cp:
        for key in cp["pss"]:
            if key != "T_w":
                raise r.error(f"[pss] unknown key {key!r}", "pss", key)
        T_w = r.number("pss", "T_w")
        if T_w <= 0:
            raise r.error("[pss] T_w must be positive", "pss", "T_w")

    ga = r.build(GaConfig, "ga")
    pso = r.build(PsoConfig, "pso")

    seeds: tuple[int, ...] = (0,)
    zeta_threshold = 0.06
    fitness_scope = "all"
    if "study" in cp:
        for key in cp["study"]:
            if key == "seeds":
                try:
                    seeds = tuple(int(v) for v in cp["study"][key].replace(",", " ").split())
                except ValueError:
                    raise r.error("[study] seeds must be integers", "study", key) from None
            elif key == "zeta_threshold":
                zeta_threshold = r.number("study", key)
            elif key == "fitness_scope":
                fitness_scope = cp["study"][key].strip()
                if fitness_scope not in FITNESS_SCOPES:
                    raise r.error(f"[study] fitness_scope must be one of {', '.join(FITNESS_SCOPES)}", "study", key)
            else:
                raise r.error(f"[study] unknown key {key!r}", "study", key)
    if "sim" in cp and "disturbance" in cp["sim"]:
        raise r.error("[sim] the disturbance is set per scenario (delta_P_L)", "sim", "disturbance")
    sim = r.build(SimConfig, "sim")

    scenarios = []
    for name in cp.sections():
        m = _SCENARIO_RE.match(name)
        if not m:
            continue
        sec = cp[name]
        op_keys = {f.name for f in dataclasses.fields(OperatingCondition)}
        op_vals, cpss, description = {}, None, ""
        for key in sec:
            if key in op_keys:
                op_vals[key] = r.number(name, key)
            elif key == "cpss":
                vec = r.vector(name, key)
                if len(vec) != 3:
                    raise r.error(f"[{name}] cpss needs K_s, T1, T2", name, key)
                cpss = PssParams.from_vector(vec, T_w)
            elif key == "description":
                description = sec[key]
            else:
                raise r.error(f"[{name}] unknown key {key!r}", name, key)
        for req in ("P", "Q"):
            if req not in op_vals:
                raise r.error(f"[{name}] missing required key {req!r}", name)
        try:
            op = OperatingCondition(**op_vals)
        except ValueError as exc:
            raise r.error(f"[{name}] {exc}", name) from None
        scenarios.append(Scenario(m.group(1), op, cpss, description))

    if not scenarios:
        raise ConfigError("at least one [scenario <id>] section is required", source)
    if not seeds:
        raise r.error("[study] seeds must not be empty", "study", "seeds")
    return ScenarioFile(system, tuple(scenarios), ga, pso, sim, seeds, zeta_threshold, T_w, fitness_scope)


def load_config(path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


def default_config_text(name: str = "default.ini") -> str:
    return resources.files("smib_pss").joinpath("data", name).read_text()


def default_config(name: str = "default.ini") -> ScenarioFile:
    return parse_config(default_config_text(name), f"<builtin {name}>")
