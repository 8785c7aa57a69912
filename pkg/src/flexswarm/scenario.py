"""Scenario and sweep documents.

A scenario is a flat YAML mapping (JSON is accepted too, being a subset)::

    agentCount: 120
    placement: hexGrid
    policy: flexibleRNG
    r_max: 0.5
    steeringMode: externalObserver
    goal: [56.6, 56.6]
    receptionProbability: 0.8
    tasks:
      - {position: [1.0, 0.5], demand: 2, sensingRadius: 1.0}
    steps: 1000
    seed: 7

Omitted keys take the engine defaults.  ``scenario_to_dict`` gives the fully
resolved form, which parses back to an equal config.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import yaml

from .dynamics import InfluenceConfig, Policy, Task
from .engine import HEX_GRID, UNIFORM_DISK, ScenarioConfig
from .errors import ConfigError
from .steering import SteeringConfig, SteeringMode


class _Loader(yaml.SafeLoader):
    pass


# only true/false are booleans, so `steeringMode: off` stays a string
_Loader.yaml_implicit_resolvers = {
    first: [(tag, rx) for tag, rx in resolvers if tag != "tag:yaml.org,2002:bool"]
    for first, resolvers in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:bool", re.compile(r"^(?:true|True|TRUE|false|False|FALSE)$"), list("tTfF")
)

# YAML 1.1 wants a dot in floats; accept JSON-style 1e-12 as a float too
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+][0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def _fail(key: str, line: int | None, msg: str):
    where = f"line {line}: " if line is not None else ""
    raise ConfigError(f"{where}key '{key}': {msg}")


def _as_int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return v


def _as_float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("expected a number")
    v = float(v)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _as_bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _as_point(v):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise TypeError("expected a pair [x, y]")
    return (_as_float(v[0]), _as_float(v[1]))


def _choice(*options):
    def conv(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return conv


_TASK_KEYS = {"position": _as_point, "demand": _as_int, "sensingRadius": _as_float}


def _as_tasks(v):
    if not isinstance(v, list):
        raise TypeError("expected a list of task mappings")
    out = []
    for k, entry in enumerate(v):
        if not isinstance(entry, dict):
            raise TypeError(f"task {k} is not a mapping")
        unknown = set(entry) - set(_TASK_KEYS)
        if unknown:
            raise ValueError(f"task {k} has unknown keys {sorted(unknown)}")
        if "position" not in entry:
            raise ValueError(f"task {k} needs a position")
        vals = {name: conv(entry[name]) for name, conv in _TASK_KEYS.items() if name in entry}
        out.append(Task(position=vals["position"], demand=vals.get("demand", 1),
                        sensing_radius=vals.get("sensingRadius", 1.0)))
    return tuple(out)


_POLICIES = tuple(p.value for p in Policy)
_MODES = tuple(m.value for m in SteeringMode)

# document key -> converter; order here is the canonical output order
SCENARIO_KEYS: dict[str, Callable[[Any], Any]] = {
    "agentCount": _as_int,
    "placement": _choice(HEX_GRID, UNIFORM_DISK),
    "spacing": _as_float,
    "placementRadius": _as_float,
    "policy": _choice(*_POLICIES),
    "repulsionEnabled": _as_bool,
    "V_a": _as_float,
    "delta": _as_float,
    "r_max": _as_float,
    "repulsionGain": _as_float,
    "attractionGain": _as_float,
    "zeroVelocityEpsilon": _as_float,
    "steeringMode": _choice(*_MODES),
    "goal": _as_point,
    "receptionProbability": _as_float,
    "informedCount": _as_int,
    "leaderGain": _as_float,
    "tasks": _as_tasks,
    "satisfactionWindow": _as_int,
    "steps": _as_int,
    "seed": _as_int,
}

_RANGES = {
    "agentCount": lambda v: v >= 1,
    "spacing": lambda v: v > 0,
    "placementRadius": lambda v: v >= 0,
    "V_a": lambda v: v > 0,
    "delta": lambda v: v > 0,
    "r_max": lambda v: v >= 0,
    "repulsionGain": lambda v: v >= 0,
    "attractionGain": lambda v: v >= 0,
    "zeroVelocityEpsilon": lambda v: v > 0,
    "receptionProbability": lambda v: 0.0 <= v <= 1.0,
    "informedCount": lambda v: v >= 0,
    "leaderGain": lambda v: v >= 0,
    "satisfactionWindow": lambda v: v >= 1,
    "steps": lambda v: v >= 0,
    "seed": lambda v: 0 <= v < 2**64,
}


def _load_mapping(text: str, what: str) -> tuple[dict, dict[str, int]]:
    try:
        node = yaml.compose(text, Loader=_Loader)
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{line}malformed {what}: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        return {}, {}
    if not isinstance(data, dict) or not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{what} must be a mapping of keys to values")
    lines = {k.value: k.start_mark.line + 1 for k, _ in node.value}
    return data, lines


def scenario_from_dict(doc: dict, lines: dict[str, int] | None = None) -> ScenarioConfig:
    lines = lines or {}
    vals = {}
    for key, raw in doc.items():
        conv = SCENARIO_KEYS.get(key)
        if conv is None:
            _fail(str(key), lines.get(key), "unknown key")
        try:
            v = conv(raw)
        except (TypeError, ValueError, ConfigError) as exc:
            _fail(key, lines.get(key), str(exc))
        check = _RANGES.get(key)
        if check is not None and not check(v):
            _fail(key, lines.get(key), f"value {raw!r} out of range")
        vals[key] = v
    try:
        influence = InfluenceConfig(**{
            dst: vals[src] for src, dst in [
                ("V_a", "visibility"), ("delta", "delta"), ("r_max", "r_max"),
                ("repulsionGain", "repulsion_gain"), ("attractionGain", "attraction_gain"),
                ("zeroVelocityEpsilon", "zero_velocity_epsilon"),
            ] if src in vals
        })
        steering = SteeringConfig(**{
            dst: vals[src] for src, dst in [
                ("steeringMode", "mode"), ("goal", "goal"),
                ("receptionProbability", "reception_probability"),
                ("informedCount", "informed_count"), ("leaderGain", "leader_gain"),
            ] if src in vals
        })
        return ScenarioConfig(influence=influence, steering=steering, **{
            dst: vals[src] for src, dst in [
                ("agentCount", "agent_count"), ("placement", "placement"),
                ("spacing", "spacing"), ("placementRadius", "placement_radius"),
                ("policy", "policy"), ("repulsionEnabled", "repulsion_enabled"),
                ("tasks", "tasks"), ("satisfactionWindow", "satisfaction_window"),
                ("steps", "steps"), ("seed", "seed"),
            ] if src in vals
        })
    except ConfigError as exc:
        raise ConfigError(f"inconsistent scenario: {exc}") from None


def parse_scenario(text: str) -> ScenarioConfig:
    doc, lines = _load_mapping(text, "scenario")
    return scenario_from_dict(doc, lines)


def load_scenario(path) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text())


def scenario_to_dict(config: ScenarioConfig) -> dict:
    inf, st = config.influence, config.steering
    return {
        "agentCount": config.agent_count,
        "placement": config.placement,
        "spacing": config.spacing,
        "placementRadius": config.placement_radius,
        "policy": config.policy.value,
        "repulsionEnabled": config.repulsion_enabled,
        "V_a": inf.visibility,
        "delta": inf.delta,
        "r_max": inf.r_max,
        "repulsionGain": inf.repulsion_gain,
        "attractionGain": inf.attraction_gain,
        "zeroVelocityEpsilon": inf.zero_velocity_epsilon,
        "steeringMode": st.mode.value,
        "goal": [st.goal[0], st.goal[1]],
        "receptionProbability": st.reception_probability,
        "informedCount": st.informed_count,
        "leaderGain": st.leader_gain,
        "tasks": [
            {"position": [t.position[0], t.position[1]], "demand": t.demand,
             "sensingRadius": t.sensing_radius}
            for t in config.tasks
        ],
        "satisfactionWindow": config.satisfaction_window,
        "steps": config.steps,
        "seed": config.seed,
    }


def dump_scenario(config: ScenarioConfig) -> str:
    return yaml.safe_dump(scenario_to_dict(config), sort_keys=False, default_flow_style=None)


def scenario_json(config: ScenarioConfig) -> str:
    """One-line JSON form, used in output headers."""
    return json.dumps(scenario_to_dict(config), separators=(",", ":"))


# -- sweeps -------------------------------------------------------------------

SWEEP_AXES = ("agentCount", "receptionProbability", "r_max", "policy", "repulsionEnabled")


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig
    axes: tuple[tuple[str, tuple], ...]
    seeds_per_cell: int = 1

    def cells(self):
        """Deterministic enumeration of ``(overrides, seed)`` pairs: axes vary
        in declared order (first axis slowest), seeds innermost."""
        combos = [{}]
        for name, values in self.axes:
            combos = [dict(c, **{name: v}) for c in combos for v in values]
        for combo in combos:
            for k in range(self.seeds_per_cell):
                yield combo, self.base.seed + k

    def cell_config(self, overrides: dict, seed: int) -> ScenarioConfig:
        doc = scenario_to_dict(self.base)
        doc.update(overrides)
        doc["seed"] = seed
        return scenario_from_dict(doc)


def parse_sweep(text: str, base_dir=".") -> SweepSpec:
    doc, lines = _load_mapping(text, "sweep")
    known = {"base", "axis", "values", "axes", "seedsPerCell"}
    for key in doc:
        if key not in known:
            _fail(str(key), lines.get(key), "unknown key")
    base = doc.get("base")
    if isinstance(base, str):
        path = Path(base_dir) / base
        try:
            base_cfg = load_scenario(path)
        except OSError as exc:
            _fail("base", lines.get("base"), f"cannot read {path}: {exc.strerror}")
    elif isinstance(base, dict):
        base_cfg = scenario_from_dict(base)
    else:
        _fail("base", lines.get("base"), "expected a scenario file path or an inline mapping")
    if "axes" in doc and ("axis" in doc or "values" in doc):
        _fail("axes", lines.get("axes"), "use either axis/values or axes, not both")
    if "axes" in doc:
        raw_axes = doc["axes"]
        if not isinstance(raw_axes, dict) or not raw_axes:
            _fail("axes", lines.get("axes"), "expected a mapping of axis name to value list")
        axes = list(raw_axes.items())
        where = "axes"
    else:
        if "axis" not in doc or "values" not in doc:
            _fail("axis", lines.get("axis"), "a sweep needs axis and values (or axes)")
        axes = [(doc["axis"], doc["values"])]
        where = "axis"
    checked = []
    for name, values in axes:
        if name not in SWEEP_AXES:
            _fail(where, lines.get(where), f"axis {name!r} is not one of {', '.join(SWEEP_AXES)}")
        if not isinstance(values, list) or not values:
            _fail(where, lines.get(where), f"axis {name!r} needs a nonempty list of values")
        conv = SCENARIO_KEYS[name]
        try:
            values = tuple(conv(v) for v in values)
        except (TypeError, ValueError) as exc:
            _fail(where, lines.get(where), f"axis {name!r}: {exc}")
        checked.append((name, values))
    seeds = doc.get("seedsPerCell", 1)
    try:
        seeds = _as_int(seeds)
    except TypeError as exc:
        _fail("seedsPerCell", lines.get("seedsPerCell"), str(exc))
    if seeds < 1:
        _fail("seedsPerCell", lines.get("seedsPerCell"), "must be at least 1")
    spec = SweepSpec(base_cfg, tuple(checked), seeds)
    for overrides, seed in spec.cells():
        try:
            spec.cell_config(overrides, seed)
        except ConfigError as exc:
            raise ConfigError(f"sweep cell {overrides} (seed {seed}): {exc}") from None
    return spec
