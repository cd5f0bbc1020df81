"""Driving-scene schema: dimension registry and frame vectorization.

Each frame of an aligned recording is encoded as a fixed-length integer
vector. Every vector slot is one schema dimension: either the presence of an
object type (vehicle, traffic light, crosswalk, ...) or a property of a
present object (subtype, action, light color, ...). Code 0 is reserved in
every dimension for "none"; all real codes are positive and unique within
their dimension. The default registry additionally keeps codes unique across
the whole vector, which makes raw vectors readable on their own.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .recording import AlignedRecording, Frame, MessageKind

PRESENCE = "presence"
PROPERTY = "property"

ALWAYS_KEEP_DEFAULT = frozenset({"stop_sign", "intersection", "crosswalk"})

MODULE_KINDS = ("traffic_light", "obstacle", "prediction", "planning")

# Channels each pipeline module subscribes or publishes. Filtering a vector
# for a module keeps exactly the dimensions sourced from these channels.
MODULE_CHANNELS: Mapping[str, frozenset[MessageKind]] = {
    "traffic_light": frozenset({MessageKind.IMAGE_REF, MessageKind.TRAFFIC_LIGHT}),
    "obstacle": frozenset({MessageKind.IMAGE_REF, MessageKind.OBSTACLE}),
    "prediction": frozenset(
        {
            MessageKind.LOCALIZATION,
            MessageKind.TRAFFIC_LIGHT,
            MessageKind.OBSTACLE,
            MessageKind.PREDICTION,
        }
    ),
    "planning": frozenset(
        {
            MessageKind.LOCALIZATION,
            MessageKind.TRAFFIC_LIGHT,
            MessageKind.OBSTACLE,
            MessageKind.PREDICTION,
            MessageKind.PLANNING,
        }
    ),
    "all": frozenset(MessageKind),
}

# Payload field values mapped onto presence dimensions.
_ACTOR_DIMS = {
    "vehicle": "vehicle",
    "pedestrian": "pedestrian",
    "cyclist": "cyclist",
    "unknown": "unknown_actor",
}
_STATIC_DIMS = {
    "stop_sign": "stop_sign",
    "crosswalk": "crosswalk",
    "intersection": "intersection",
    "traffic_cone": "traffic_cone",
    "unknown": "unknown_static",
}


class SchemaError(ValueError):
    """Invalid registry definition or unencodable payload value."""


@dataclass(frozen=True)
class DimensionSpec:
    """One vector slot: its name, kind, source channel, and code table."""

    name: str
    kind: str
    source_channel: MessageKind
    codes: Mapping[str, int]
    parent: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (PRESENCE, PROPERTY):
            raise SchemaError(f"dimension {self.name!r}: unknown kind {self.kind!r}")
        values = list(self.codes.values())
        if any(not isinstance(c, int) or c <= 0 for c in values):
            raise SchemaError(f"dimension {self.name!r}: codes must be positive integers")
        if len(set(values)) != len(values):
            raise SchemaError(f"dimension {self.name!r}: duplicate codes")

    def code(self, value: str) -> int:
        try:
            return self.codes[value]
        except KeyError:
            raise SchemaError(f'dimension "{self.name}": unknown value "{value}"') from None


@dataclass(frozen=True)
class SchemaRegistry:
    """Ordered dimension list plus the always-preserved dimension names."""

    dimensions: tuple[DimensionSpec, ...]
    always_keep: frozenset[str]

    def __post_init__(self) -> None:
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate dimension names")
        by_name = {d.name: d for d in self.dimensions}
        for d in self.dimensions:
            if d.parent is not None:
                parent = by_name.get(d.parent)
                if parent is None or parent.kind != PRESENCE:
                    raise SchemaError(
                        f"dimension {d.name!r}: parent {d.parent!r} is not a presence dimension"
                    )
                if d.kind != PROPERTY:
                    raise SchemaError(f"dimension {d.name!r}: only property dimensions take a parent")
        missing = self.always_keep - set(names)
        if missing:
            raise SchemaError(f"always_keep names unknown dimensions: {sorted(missing)}")

    def __len__(self) -> int:
        return len(self.dimensions)

    def index(self, name: str) -> int:
        for i, d in enumerate(self.dimensions):
            if d.name == name:
                return i
        raise SchemaError(f"unknown dimension {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def children(self, name: str) -> tuple[DimensionSpec, ...]:
        return tuple(d for d in self.dimensions if d.parent == name)


@dataclass(frozen=True)
class FrameVector:
    """Encoded frame: one integer per registry dimension plus the frame time."""

    values: tuple[int, ...]
    t_ns: int


@dataclass(frozen=True)
class ModuleFilter:
    """Dimension subset relevant to one pipeline module."""

    module: str
    retained_dimensions: frozenset[str]

    @classmethod
    def for_module(cls, module: str, registry: SchemaRegistry) -> "ModuleFilter":
        if module not in MODULE_CHANNELS:
            raise SchemaError(f"unknown module {module!r}")
        channels = MODULE_CHANNELS[module]
        retained = {d.name for d in registry.dimensions if d.source_channel in channels}
        retained |= registry.always_keep
        return cls(module, frozenset(retained))


def default_registry() -> SchemaRegistry:
    """The built-in scene schema.

    Presence dimensions cover dynamic actors and static scene objects; each
    actor presence is followed by its property dimensions so related slots
    stay consecutive. Codes are assigned sequentially across the registry,
    starting at 1, so every code is globally unique and 0 always means
    "none". Ego dimensions are top-level properties without a parent.
    """
    actions = ("stop", "cruise", "change_lane", "overtake", "cross")
    layout: list[tuple[str, str, MessageKind, Sequence[str], str | None]] = [
        ("vehicle", PRESENCE, MessageKind.OBSTACLE, ("vehicle",), None),
        ("vehicle.subtype", PROPERTY, MessageKind.OBSTACLE, ("truck", "car", "bus", "van"), "vehicle"),
        ("vehicle.action", PROPERTY, MessageKind.PREDICTION, actions, "vehicle"),
        ("pedestrian", PRESENCE, MessageKind.OBSTACLE, ("pedestrian",), None),
        ("pedestrian.action", PROPERTY, MessageKind.PREDICTION, actions, "pedestrian"),
        ("cyclist", PRESENCE, MessageKind.OBSTACLE, ("cyclist",), None),
        (
            "cyclist.subtype",
            PROPERTY,
            MessageKind.OBSTACLE,
            ("bicyclist", "motorcyclist", "tricyclist"),
            "cyclist",
        ),
        ("cyclist.action", PROPERTY, MessageKind.PREDICTION, actions, "cyclist"),
        ("unknown_actor", PRESENCE, MessageKind.OBSTACLE, ("unknown_actor",), None),
        ("unknown_actor.action", PROPERTY, MessageKind.PREDICTION, actions, "unknown_actor"),
        ("traffic_light", PRESENCE, MessageKind.TRAFFIC_LIGHT, ("traffic_light",), None),
        (
            "traffic_light.color",
            PROPERTY,
            MessageKind.TRAFFIC_LIGHT,
            ("red", "green", "yellow", "black"),
            "traffic_light",
        ),
        ("traffic_light.shape", PROPERTY, MessageKind.TRAFFIC_LIGHT, ("square", "round"), "traffic_light"),
        (
            "traffic_light.orientation",
            PROPERTY,
            MessageKind.TRAFFIC_LIGHT,
            ("vertical", "horizontal"),
            "traffic_light",
        ),
        ("stop_sign", PRESENCE, MessageKind.OBSTACLE, ("stop_sign",), None),
        ("crosswalk", PRESENCE, MessageKind.OBSTACLE, ("crosswalk",), None),
        ("intersection", PRESENCE, MessageKind.OBSTACLE, ("intersection",), None),
        ("traffic_cone", PRESENCE, MessageKind.OBSTACLE, ("traffic_cone",), None),
        ("unknown_static", PRESENCE, MessageKind.OBSTACLE, ("unknown_static",), None),
        ("ego.action", PROPERTY, MessageKind.PLANNING, ("stop", "cruise", "change_lane", "overtake"), None),
        ("ego.stop_cause", PROPERTY, MessageKind.PLANNING, ("traffic_light", "stop_sign"), None),
    ]
    dims = []
    next_code = 1
    for name, kind, source, values, parent in layout:
        codes = {}
        for v in values:
            codes[v] = next_code
            next_code += 1
        dims.append(DimensionSpec(name, kind, source, codes, parent))
    return SchemaRegistry(tuple(dims), ALWAYS_KEEP_DEFAULT)


def _enforce_child_zeroing(values: list[int], registry: SchemaRegistry) -> None:
    # An absent object has no properties, whatever the payload claimed.
    index = {d.name: i for i, d in enumerate(registry.dimensions)}
    for d in registry.dimensions:
        if d.parent is not None and values[index[d.parent]] == 0:
            values[index[d.name]] = 0


def encode_frame(frame: Frame, registry: SchemaRegistry) -> FrameVector:
    """Encode one frame. Missing channels mean "nothing detected".

    When a payload reports several objects of the same presence dimension,
    the dimension records presence once and takes its property values from
    the first such object in payload order.
    """
    index = {d.name: i for i, d in enumerate(registry.dimensions)}
    dims = {d.name: d for d in registry.dimensions}
    values = [0] * len(registry.dimensions)

    def put(name: str, value: str) -> None:
        if name in index:
            values[index[name]] = dims[name].code(value)

    def put_presence(name: str) -> None:
        if name in index:
            values[index[name]] = dims[name].code(name)

    claimed: set[str] = set()
    for kind in MessageKind:
        for msg in frame.by_kind(kind):
            payload = msg.payload
            if kind is MessageKind.TRAFFIC_LIGHT:
                lights = payload.get("lights") or []
                if lights and "traffic_light" not in claimed:
                    claimed.add("traffic_light")
                    put_presence("traffic_light")
                    first = lights[0]
                    for prop in ("color", "shape", "orientation"):
                        if first.get(prop) is not None:
                            put(f"traffic_light.{prop}", first[prop])
            elif kind is MessageKind.OBSTACLE:
                for obj in payload.get("obstacles") or []:
                    actor = obj.get("actor")
                    dim = _ACTOR_DIMS.get(actor)
                    if dim is None:
                        raise SchemaError(f'dimension "actor": unknown value "{actor}"')
                    if dim not in claimed:
                        claimed.add(dim)
                        put_presence(dim)
                        if obj.get("subtype") is not None:
                            put(f"{dim}.subtype", obj["subtype"])
                    if obj.get("on_crosswalk"):
                        put_presence("crosswalk")
                    if obj.get("at_intersection"):
                        put_presence("intersection")
                for name in payload.get("objects") or []:
                    dim = _STATIC_DIMS.get(name)
                    if dim is None:
                        raise SchemaError(f'dimension "objects": unknown value "{name}"')
                    put_presence(dim)
            elif kind is MessageKind.PREDICTION:
                for track in payload.get("tracks") or []:
                    actor = track.get("actor")
                    dim = _ACTOR_DIMS.get(actor)
                    if dim is None:
                        raise SchemaError(f'dimension "actor": unknown value "{actor}"')
                    target = f"{dim}.action"
                    if target not in claimed and track.get("action") is not None:
                        claimed.add(target)
                        put(target, track["action"])
            elif kind is MessageKind.PLANNING:
                if payload.get("ego_action") is not None and "ego.action" not in claimed:
                    claimed.add("ego.action")
                    put("ego.action", payload["ego_action"])
                if payload.get("stop_cause") is not None and "ego.stop_cause" not in claimed:
                    claimed.add("ego.stop_cause")
                    put("ego.stop_cause", payload["stop_cause"])
            # localization and image_ref carry no schema dimensions

    _enforce_child_zeroing(values, registry)
    return FrameVector(tuple(values), frame.t_ns)


def apply_filter(vector: FrameVector, flt: ModuleFilter, registry: SchemaRegistry) -> FrameVector:
    """Zero out dimensions outside the filter; vector length is unchanged."""
    if len(vector.values) != len(registry.dimensions):
        raise SchemaError(
            f"vector length {len(vector.values)} does not match registry size {len(registry.dimensions)}"
        )
    values = [
        v if d.name in flt.retained_dimensions else 0
        for v, d in zip(vector.values, registry.dimensions)
    ]
    _enforce_child_zeroing(values, registry)
    return FrameVector(tuple(values), vector.t_ns)


def encode_recording(
    ar: AlignedRecording, registry: SchemaRegistry, flt: ModuleFilter | None = None
) -> list[FrameVector]:
    """Vectorize every frame, optionally filtered down to one module's view."""
    vectors = [encode_frame(f, registry) for f in ar.frames]
    if flt is not None:
        vectors = [apply_filter(v, flt, registry) for v in vectors]
    return vectors


def registry_to_json(registry: SchemaRegistry) -> dict[str, Any]:
    return {
        "dimensions": [
            {
                "name": d.name,
                "kind": d.kind,
                "parent": d.parent,
                "source_channel": d.source_channel.value,
                "codes": dict(d.codes),
            }
            for d in registry.dimensions
        ],
        "always_keep": sorted(registry.always_keep),
    }


def registry_from_json(data: Mapping[str, Any]) -> SchemaRegistry:
    try:
        dims = tuple(
            DimensionSpec(
                name=d["name"],
                kind=d["kind"],
                source_channel=MessageKind(d["source_channel"]),
                codes={k: int(v) for k, v in d["codes"].items()},
                parent=d.get("parent"),
            )
            for d in data["dimensions"]
        )
        keep = frozenset(data.get("always_keep") or ())
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid schema document: {exc}") from exc
    return SchemaRegistry(dims, keep)


def save_registry(registry: SchemaRegistry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(registry_to_json(registry), indent=2, sort_keys=True) + "\n")


def load_registry(path: str | Path) -> SchemaRegistry:
    return registry_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
