"""Synthetic recording generator, toy pipeline modules, and mutation harness.

The harness builds recordings by running a deterministic four-module toy
pipeline (traffic light detection, obstacle detection, prediction, planning)
over scripted scenes. Sensor input is an image-reference channel whose
payload carries numeric stand-ins for pixels: hue and brightness for lights,
body geometry and motion for actors, confidence for static objects. Each
module classifies those numerics with named threshold parameters; a mutant
changes exactly one parameter or flips exactly one named condition, so
injected faults are single localized changes.

Because every module output is a pure function of its recorded inputs and
parameters, replaying an unmutated module over its own glitch-free recording
reproduces the recorded channel exactly. Modules replay at their native
rate: the predictor only recomputes on its emission ticks and repeats its
held output in between, which is why replays include a warm-up prefix.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .evaluation import (
    FaultVerdict,
    MetricsReport,
    SuiteTotals,
    WHOLE_RECORDING_SEGMENT_ID,
    compare_outputs,
    evaluate_plan,
    fault_coverage,
    reduction_pct,
)
from .prioritization import (
    PrioritizedPlan,
    prioritize_cc,
    prioritize_ch,
    prioritize_rd,
    prioritize_rsc,
    prioritize_sc,
)
from .recording import (
    AlignedRecording,
    Channel,
    Frame,
    Message,
    MessageKind,
    Recording,
    align_recording,
)
from .reduction import ReductionConfig, Segment, reduce_recording
from .schema import (
    FrameVector,
    ModuleFilter,
    MODULE_KINDS,
    SchemaRegistry,
    apply_filter,
    default_registry,
    encode_frame,
    encode_recording,
)

NS_PER_SEC = 1_000_000_000

# Per-channel publish offsets within a frame period; module outputs land
# shortly after the sensor tick that produced them.
CHANNEL_OFFSETS_NS: Mapping[str, int] = {
    "image": 0,
    "localization": 0,
    "traffic_light": 1_000_000,
    "obstacle": 2_000_000,
    "prediction": 3_000_000,
    "planning": 4_000_000,
}

CHANNEL_KINDS: Mapping[str, MessageKind] = {
    "image": MessageKind.IMAGE_REF,
    "localization": MessageKind.LOCALIZATION,
    "traffic_light": MessageKind.TRAFFIC_LIGHT,
    "obstacle": MessageKind.OBSTACLE,
    "prediction": MessageKind.PREDICTION,
    "planning": MessageKind.PLANNING,
}

MUTATION_OPERATORS = ("replace_arith", "change_constant", "change_variable", "flip_condition")

# Numeric stand-ins the generator embeds in image payloads and the toy
# modules classify back into symbols. Classification of every canonical
# value must round-trip exactly under default parameters.
LIGHT_HUE = {"red": 10.0, "yellow": 55.0, "green": 120.0, "black": 10.0}
LIGHT_CIRCULARITY = {"round": 0.9, "square": 0.3}
LIGHT_TILT = {"vertical": 90.0, "horizontal": 0.0}
ACTION_MOTION = {
    "stop": (0.0, 0.0),
    "cruise": (8.0, 0.0),
    "change_lane": (8.0, 1.5),
    "overtake": (14.0, 1.5),
    "cross": (1.5, 1.2),
}
# (wheels, height_m, length_m, motor_power)
ACTOR_BODY = {
    ("vehicle", "car"): (4.0, 1.6, 4.5, 1.0),
    ("vehicle", "truck"): (6.0, 1.8, 7.0, 1.0),
    ("vehicle", "bus"): (6.0, 2.8, 10.0, 1.0),
    ("vehicle", "van"): (4.0, 2.0, 5.0, 1.0),
    ("cyclist", "bicyclist"): (2.0, 1.6, 1.8, 0.0),
    ("cyclist", "motorcyclist"): (2.0, 1.4, 2.0, 1.0),
    ("cyclist", "tricyclist"): (3.0, 1.5, 2.2, 0.0),
    ("pedestrian", None): (0.0, 1.7, 0.5, 0.0),
    ("unknown", None): (0.0, 0.8, 1.0, 0.0),
}
_DEFAULT_SUBTYPE = {"vehicle": "car", "cyclist": "bicyclist"}
STATIC_CONFIDENCE = 0.9
STATIC_NOMINAL_DISTANCE_M = 15.0

_GLITCH_COLOR = {"red": "green", "green": "red", "yellow": "black", "black": "yellow"}
_GLITCH_ACTION = {
    "stop": "cruise",
    "cruise": "stop",
    "change_lane": "overtake",
    "overtake": "change_lane",
    "cross": "stop",
}


class SynthError(ValueError):
    """Invalid script, mutant, or replay input."""


@dataclass(frozen=True)
class SceneEvent:
    """State delta applied from a given frame onward."""

    frame: int
    set: Mapping[str, Any] = field(default_factory=dict)
    unset: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScenarioScript:
    """Scripted scene timeline driving the generator."""

    duration_frames: int
    fps: int = 15
    glitch_rate: float = 0.0
    events: tuple[SceneEvent, ...] = ()

    def __post_init__(self) -> None:
        if self.duration_frames < 1:
            raise SynthError(f"duration_frames must be positive, got {self.duration_frames}")
        if self.fps < 1:
            raise SynthError(f"fps must be positive, got {self.fps}")
        if not (0.0 <= self.glitch_rate < 1.0):
            raise SynthError(f"glitch_rate must be in [0, 1), got {self.glitch_rate}")
        for e in self.events:
            if not (0 <= e.frame < self.duration_frames):
                raise SynthError(f"event frame {e.frame} outside [0, {self.duration_frames})")


def script_to_json(script: ScenarioScript) -> dict[str, Any]:
    return {
        "duration_frames": script.duration_frames,
        "fps": script.fps,
        "glitch_rate": script.glitch_rate,
        "events": [
            {"frame": e.frame, "set": dict(e.set), "unset": list(e.unset)} for e in script.events
        ],
    }


def script_from_json(doc: Mapping[str, Any]) -> ScenarioScript:
    try:
        events = tuple(
            SceneEvent(
                frame=e["frame"],
                set=e.get("set") or {},
                unset=tuple(e.get("unset") or ()),
            )
            for e in doc.get("events") or ()
        )
        return ScenarioScript(
            duration_frames=doc["duration_frames"],
            fps=doc.get("fps", 15),
            glitch_rate=doc.get("glitch_rate", 0.0),
            events=events,
        )
    except (KeyError, TypeError) as exc:
        raise SynthError(f"invalid scenario script: {exc}") from exc


def load_script(path: str | Path) -> ScenarioScript:
    return script_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class Mutant:
    """One parameter or condition change applied to one module."""

    id: str
    module: str
    target: str
    operator: str
    delta: float = 0.0

    def __post_init__(self) -> None:
        if self.module not in MODULE_KINDS:
            raise SynthError(f"mutant {self.id!r}: unknown module {self.module!r}")
        if self.operator not in MUTATION_OPERATORS:
            raise SynthError(f"mutant {self.id!r}: unknown operator {self.operator!r}")


def mutants_to_json(mutants: Sequence[Mutant]) -> list[dict[str, Any]]:
    return [
        {"id": m.id, "module": m.module, "target": m.target, "operator": m.operator, "delta": m.delta}
        for m in mutants
    ]


def mutants_from_json(doc: Sequence[Mapping[str, Any]]) -> list[Mutant]:
    try:
        return [
            Mutant(
                id=row["id"],
                module=row["module"],
                target=row["target"],
                operator=row["operator"],
                delta=float(row.get("delta", 0.0)),
            )
            for row in doc
        ]
    except (KeyError, TypeError) as exc:
        raise SynthError(f"invalid mutants document: {exc}") from exc


def load_mutants(path: str | Path) -> list[Mutant]:
    return mutants_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


class ToyModule:
    """Base class for the deterministic pipeline stand-ins.

    Subclasses classify numeric inputs with self.params thresholds and route
    every branch decision through self._cond so flip_condition mutants can
    invert exactly one named comparison. call_log counts classifier calls
    per replay; replays always work on a fresh copy so counters are never
    shared.
    """

    kind: str = ""
    publish_kind: MessageKind = MessageKind.PLANNING
    input_kinds: frozenset[MessageKind] = frozenset()
    DEFAULT_PARAMS: Mapping[str, float] = {}
    CONDITIONS: frozenset[str] = frozenset()
    # Maps each parameter and condition to the classifier that uses it, for
    # call-count prioritization.
    PARAM_FUNCTIONS: Mapping[str, str] = {}

    def __init__(self, params: Mapping[str, float] | None = None, flipped: Iterable[str] = ()):
        self.params: dict[str, float] = dict(self.DEFAULT_PARAMS)
        if params:
            self.params.update(params)
        self.flipped = frozenset(flipped)
        unknown = self.flipped - self.CONDITIONS
        if unknown:
            raise SynthError(f"unknown condition(s) {sorted(unknown)} for module {self.kind!r}")
        self.call_log: Counter[str] = Counter()

    def fresh(self) -> "ToyModule":
        return type(self)(self.params, self.flipped)

    def emits_at(self, frame_index: int) -> bool:
        return True

    def _cond(self, name: str, outcome: bool) -> bool:
        return (not outcome) if name in self.flipped else outcome

    def compute(self, inputs: Mapping[MessageKind, Mapping[str, Any]]) -> dict[str, Any]:
        raise NotImplementedError


class TrafficLightDetector(ToyModule):
    """Classifies light color, shape, and orientation from image numerics."""

    kind = "traffic_light"
    publish_kind = MessageKind.TRAFFIC_LIGHT
    input_kinds = frozenset({MessageKind.IMAGE_REF})
    DEFAULT_PARAMS = {
        "lit_min_brightness": 0.5,
        "green_min_hue": 100.0,
        "yellow_min_hue": 40.0,
        "round_min_circularity": 0.7,
        "vertical_min_tilt": 45.0,
    }
    CONDITIONS = frozenset({"lit_check", "green_check", "yellow_check", "round_check", "vertical_check"})
    PARAM_FUNCTIONS = {
        "lit_min_brightness": "classify_color",
        "green_min_hue": "classify_color",
        "yellow_min_hue": "classify_color",
        "lit_check": "classify_color",
        "green_check": "classify_color",
        "yellow_check": "classify_color",
        "round_min_circularity": "classify_shape",
        "round_check": "classify_shape",
        "vertical_min_tilt": "classify_orientation",
        "vertical_check": "classify_orientation",
    }

    def _classify_color(self, light: Mapping[str, float]) -> str:
        self.call_log["classify_color"] += 1
        p = self.params
        if not self._cond("lit_check", light["brightness"] >= p["lit_min_brightness"]):
            return "black"
        if self._cond("green_check", light["hue_deg"] >= p["green_min_hue"]):
            return "green"
        if self._cond("yellow_check", light["hue_deg"] >= p["yellow_min_hue"]):
            return "yellow"
        return "red"

    def _classify_shape(self, light: Mapping[str, float]) -> str:
        self.call_log["classify_shape"] += 1
        ok = self._cond("round_check", light["circularity"] >= self.params["round_min_circularity"])
        return "round" if ok else "square"

    def _classify_orientation(self, light: Mapping[str, float]) -> str:
        self.call_log["classify_orientation"] += 1
        ok = self._cond("vertical_check", light["tilt_deg"] >= self.params["vertical_min_tilt"])
        return "vertical" if ok else "horizontal"

    def compute(self, inputs: Mapping[MessageKind, Mapping[str, Any]]) -> dict[str, Any]:
        scene = inputs[MessageKind.IMAGE_REF].get("scene") or {}
        lights = [
            {
                "color": self._classify_color(lt),
                "shape": self._classify_shape(lt),
                "orientation": self._classify_orientation(lt),
            }
            for lt in scene.get("lights") or []
        ]
        return {"lights": lights}


def _classify_action(module: ToyModule, speed: float, lateral: float) -> str:
    p = module.params
    if module._cond("stop_check", speed < p["stop_max_speed"]):
        return "stop"
    if module._cond("lateral_check", abs(lateral) >= p["lateral_min"]):
        if module._cond("overtake_check", speed >= p["overtake_min_speed"]):
            return "overtake"
        if module._cond("cross_check", speed <= p["cross_max_speed"]):
            return "cross"
        return "change_lane"
    return "cruise"


_MOTION_PARAMS = {
    "stop_max_speed": 0.3,
    "lateral_min": 0.8,
    "overtake_min_speed": 11.0,
    "cross_max_speed": 3.0,
}
_MOTION_CONDITIONS = frozenset({"stop_check", "lateral_check", "overtake_check", "cross_check"})


class ObstacleDetector(ToyModule):
    """Classifies actors and filters static objects from image numerics."""

    kind = "obstacle"
    publish_kind = MessageKind.OBSTACLE
    input_kinds = frozenset({MessageKind.IMAGE_REF})
    DEFAULT_PARAMS = {
        "vehicle_min_wheels": 3.5,
        "cyclist_min_wheels": 1.5,
        "tricycle_min_wheels": 2.5,
        "motor_min_power": 0.5,
        "pedestrian_min_height": 1.2,
        "bus_min_length": 8.5,
        "truck_min_length": 6.0,
        "van_min_height": 1.9,
        "static_min_confidence": 0.5,
        **_MOTION_PARAMS,
    }
    CONDITIONS = frozenset(
        {
            "vehicle_check",
            "cyclist_check",
            "tricycle_check",
            "motor_check",
            "pedestrian_check",
            "bus_check",
            "truck_check",
            "van_check",
            "static_check",
        }
    ) | _MOTION_CONDITIONS
    PARAM_FUNCTIONS = {
        "vehicle_min_wheels": "classify_actor",
        "cyclist_min_wheels": "classify_actor",
        "tricycle_min_wheels": "classify_actor",
        "motor_min_power": "classify_actor",
        "pedestrian_min_height": "classify_actor",
        "bus_min_length": "classify_actor",
        "truck_min_length": "classify_actor",
        "van_min_height": "classify_actor",
        "vehicle_check": "classify_actor",
        "cyclist_check": "classify_actor",
        "tricycle_check": "classify_actor",
        "motor_check": "classify_actor",
        "pedestrian_check": "classify_actor",
        "bus_check": "classify_actor",
        "truck_check": "classify_actor",
        "van_check": "classify_actor",
        "static_min_confidence": "filter_static",
        "static_check": "filter_static",
        **{name: "classify_motion" for name in _MOTION_PARAMS},
        **{name: "classify_motion" for name in _MOTION_CONDITIONS},
    }

    def _classify_actor(self, body: Mapping[str, float]) -> tuple[str, str | None]:
        self.call_log["classify_actor"] += 1
        p = self.params
        wheels, height, length = body["wheels"], body["height_m"], body["length_m"]
        if self._cond("vehicle_check", wheels >= p["vehicle_min_wheels"]):
            if self._cond("bus_check", length >= p["bus_min_length"]):
                return "vehicle", "bus"
            if self._cond("truck_check", length >= p["truck_min_length"]):
                return "vehicle", "truck"
            if self._cond("van_check", height >= p["van_min_height"]):
                return "vehicle", "van"
            return "vehicle", "car"
        if self._cond("cyclist_check", wheels >= p["cyclist_min_wheels"]):
            if self._cond("tricycle_check", wheels >= p["tricycle_min_wheels"]):
                return "cyclist", "tricyclist"
            if self._cond("motor_check", body["motor_power"] >= p["motor_min_power"]):
                return "cyclist", "motorcyclist"
            return "cyclist", "bicyclist"
        if self._cond("pedestrian_check", height >= p["pedestrian_min_height"]):
            return "pedestrian", None
        return "unknown", None

    def compute(self, inputs: Mapping[MessageKind, Mapping[str, Any]]) -> dict[str, Any]:
        scene = inputs[MessageKind.IMAGE_REF].get("scene") or {}
        obstacles = []
        for body in scene.get("actors") or []:
            actor, subtype = self._classify_actor(body)
            self.call_log["classify_motion"] += 1
            entry: dict[str, Any] = {
                "actor": actor,
                "action": _classify_action(self, body["speed_mps"], body["lateral_mps"]),
                "on_crosswalk": bool(body.get("on_crosswalk", False)),
                "at_intersection": bool(body.get("at_intersection", False)),
                "speed_mps": body["speed_mps"],
                "lateral_mps": body["lateral_mps"],
            }
            if subtype is not None:
                entry["subtype"] = subtype
            obstacles.append(entry)
        objects = []
        for static in scene.get("statics") or []:
            self.call_log["filter_static"] += 1
            if self._cond("static_check", static["confidence"] >= self.params["static_min_confidence"]):
                objects.append(static["name"])
        return {"obstacles": obstacles, "objects": objects}


class TrajectoryPredictor(ToyModule):
    """Predicts per-actor actions from obstacle motion numerics.

    Runs every 1.5 frames (rounded), so it emits on frame indices congruent
    to 0 or 2 modulo 3 and repeats its held output in between.
    """

    kind = "prediction"
    publish_kind = MessageKind.PREDICTION
    input_kinds = frozenset({MessageKind.OBSTACLE})
    DEFAULT_PARAMS = dict(_MOTION_PARAMS)
    CONDITIONS = _MOTION_CONDITIONS
    PARAM_FUNCTIONS = {
        **{name: "predict_action" for name in _MOTION_PARAMS},
        **{name: "predict_action" for name in _MOTION_CONDITIONS},
    }

    def emits_at(self, frame_index: int) -> bool:
        return frame_index % 3 != 1

    def compute(self, inputs: Mapping[MessageKind, Mapping[str, Any]]) -> dict[str, Any]:
        tracks = []
        for obstacle in inputs[MessageKind.OBSTACLE].get("obstacles") or []:
            self.call_log["predict_action"] += 1
            tracks.append(
                {
                    "actor": obstacle["actor"],
                    "action": _classify_action(
                        self, obstacle["speed_mps"], obstacle["lateral_mps"]
                    ),
                }
            )
        return {"tracks": tracks}


class MotionPlanner(ToyModule):
    """Decides the ego action from lights, static objects, and tracks."""

    kind = "planning"
    publish_kind = MessageKind.PLANNING
    input_kinds = frozenset(
        {MessageKind.TRAFFIC_LIGHT, MessageKind.OBSTACLE, MessageKind.PREDICTION}
    )
    DEFAULT_PARAMS = {"sign_stop_range_m": 30.0, "passing_mode": 1.0}
    CONDITIONS = frozenset({"red_light_stop", "stop_sign_stop", "yield_crossing", "lead_blocked"})
    PARAM_FUNCTIONS = {
        "sign_stop_range_m": "plan_step",
        "passing_mode": "plan_step",
        "red_light_stop": "plan_step",
        "stop_sign_stop": "plan_step",
        "yield_crossing": "plan_step",
        "lead_blocked": "plan_step",
    }

    def compute(self, inputs: Mapping[MessageKind, Mapping[str, Any]]) -> dict[str, Any]:
        self.call_log["plan_step"] += 1
        lights = inputs[MessageKind.TRAFFIC_LIGHT].get("lights") or []
        objects = inputs[MessageKind.OBSTACLE].get("objects") or []
        tracks = inputs[MessageKind.PREDICTION].get("tracks") or []
        p = self.params
        if self._cond("red_light_stop", any(lt.get("color") == "red" for lt in lights)):
            return {"ego_action": "stop", "stop_cause": "traffic_light"}
        if "stop_sign" in objects and self._cond(
            "stop_sign_stop", STATIC_NOMINAL_DISTANCE_M <= p["sign_stop_range_m"]
        ):
            return {"ego_action": "stop", "stop_cause": "stop_sign"}
        if self._cond("yield_crossing", any(t.get("action") == "cross" for t in tracks)):
            return {"ego_action": "stop", "stop_cause": None}
        if self._cond(
            "lead_blocked",
            any(t.get("actor") == "vehicle" and t.get("action") == "stop" for t in tracks),
        ):
            action = "overtake" if p["passing_mode"] >= 0.5 else "change_lane"
            return {"ego_action": action, "stop_cause": None}
        return {"ego_action": "cruise", "stop_cause": None}


_MODULE_CLASSES = {
    "traffic_light": TrafficLightDetector,
    "obstacle": ObstacleDetector,
    "prediction": TrajectoryPredictor,
    "planning": MotionPlanner,
}


def make_module(kind: str) -> ToyModule:
    try:
        return _MODULE_CLASSES[kind]()
    except KeyError:
        raise SynthError(f"unknown module kind {kind!r}") from None


def apply_mutant(module: ToyModule, mutant: Mutant) -> ToyModule:
    """Return a new module with exactly one parameter or condition changed."""
    if mutant.module != module.kind:
        raise SynthError(
            f"mutant {mutant.id!r} targets module {mutant.module!r}, not {module.kind!r}"
        )
    if mutant.operator == "flip_condition":
        if mutant.target not in module.CONDITIONS:
            raise SynthError(f"mutant {mutant.id!r}: unknown condition {mutant.target!r}")
        return type(module)(module.params, module.flipped | {mutant.target})
    if mutant.target not in module.params:
        raise SynthError(f"mutant {mutant.id!r}: unknown parameter {mutant.target!r}")
    params = dict(module.params)
    old = params[mutant.target]
    if mutant.operator == "change_constant":
        params[mutant.target] = mutant.delta
    elif mutant.operator == "change_variable":
        params[mutant.target] = old + mutant.delta
    else:  # replace_arith: rescale, modeling an operator swap in the expression
        params[mutant.target] = old * mutant.delta
    return type(module)(params, module.flipped)


def mutable_targets(kind: str) -> dict[str, list[str]]:
    """Parameter and condition names a mutant may target for one module."""
    cls = _MODULE_CLASSES.get(kind)
    if cls is None:
        raise SynthError(f"unknown module kind {kind!r}")
    return {"params": sorted(cls.DEFAULT_PARAMS), "conditions": sorted(cls.CONDITIONS)}


def _frame_t_ns(index: int, fps: int) -> int:
    return index * NS_PER_SEC // fps


def _frame_index(t_ns: int, fps: int) -> int:
    return round(t_ns * fps / NS_PER_SEC)


def _light_features(light: Mapping[str, str]) -> dict[str, float]:
    color = light.get("color", "red")
    if color not in LIGHT_HUE:
        raise SynthError(f"script light color {color!r} is not canonical")
    shape = light.get("shape", "round")
    orientation = light.get("orientation", "vertical")
    return {
        "hue_deg": LIGHT_HUE[color],
        "brightness": 0.0 if color == "black" else 1.0,
        "circularity": LIGHT_CIRCULARITY[shape],
        "tilt_deg": LIGHT_TILT[orientation],
    }


def _actor_features(obstacle: Mapping[str, Any]) -> dict[str, Any]:
    actor = obstacle.get("actor")
    subtype = obstacle.get("subtype") or _DEFAULT_SUBTYPE.get(actor)
    key = (actor, subtype)
    if key not in ACTOR_BODY:
        raise SynthError(f"script actor {actor!r}/{subtype!r} is not canonical")
    action = obstacle.get("action", "cruise")
    if action not in ACTION_MOTION:
        raise SynthError(f"script action {action!r} is not canonical")
    wheels, height, length, motor = ACTOR_BODY[key]
    speed, lateral = ACTION_MOTION[action]
    return {
        "wheels": wheels,
        "height_m": height,
        "length_m": length,
        "motor_power": motor,
        "speed_mps": speed,
        "lateral_mps": lateral,
        "on_crosswalk": bool(obstacle.get("on_crosswalk", False)),
        "at_intersection": bool(obstacle.get("at_intersection", False)),
    }


def _scene_truth(state: Mapping[str, Any]) -> dict[str, Any]:
    return {
        "lights": [_light_features(lt) for lt in state.get("lights") or []],
        "actors": [_actor_features(ob) for ob in state.get("obstacles") or []],
        "statics": [
            {"name": name, "confidence": STATIC_CONFIDENCE, "distance_m": STATIC_NOMINAL_DISTANCE_M}
            for name in state.get("objects") or []
        ],
    }


def _glitch_payload(kind: MessageKind, payload: Mapping[str, Any]) -> dict[str, Any]:
    """Deterministic one-frame corruption of a module output."""
    if kind is MessageKind.TRAFFIC_LIGHT:
        lights = payload.get("lights") or []
        if not lights:
            return {"lights": [{"color": "red", "shape": "round", "orientation": "vertical"}]}
        return {
            "lights": [{**lt, "color": _GLITCH_COLOR.get(lt.get("color"), "red")} for lt in lights]
        }
    if kind is MessageKind.OBSTACLE:
        if payload.get("obstacles") or payload.get("objects"):
            return {"obstacles": [], "objects": []}
        return {
            "obstacles": [
                {
                    "actor": "pedestrian",
                    "action": "cross",
                    "on_crosswalk": False,
                    "at_intersection": False,
                    "speed_mps": 1.5,
                    "lateral_mps": 1.2,
                }
            ],
            "objects": [],
        }
    if kind is MessageKind.PREDICTION:
        tracks = payload.get("tracks") or []
        if not tracks:
            return {"tracks": [{"actor": "vehicle", "action": "stop"}]}
        return {
            "tracks": [{**t, "action": _GLITCH_ACTION.get(t.get("action"), "stop")} for t in tracks]
        }
    if kind is MessageKind.PLANNING:
        return {
            "ego_action": _GLITCH_ACTION.get(payload.get("ego_action"), "stop"),
            "stop_cause": None,
        }
    raise SynthError(f"channel kind {kind.value!r} does not glitch")


def generate_recording(script: ScenarioScript, seed: int) -> Recording:
    """Run the unmutated toy pipeline over the scripted scenes.

    Channels publish at deliberately different rates: image, localization,
    traffic light, obstacle and planning every frame, prediction every 1.5
    frames rounded. Glitches replace a module's output for one emission with
    probability glitch_rate per channel per frame; downstream modules consume
    the glitched message, exactly as subscribers would.
    """
    rng = random.Random(seed)
    events = sorted(script.events, key=lambda e: e.frame)
    modules = {kind: make_module(kind) for kind in MODULE_KINDS}
    held_prediction: dict[str, Any] = {"tracks": []}
    messages: dict[str, list[Message]] = {name: [] for name in CHANNEL_OFFSETS_NS}
    state: dict[str, Any] = {}
    next_event = 0

    for i in range(script.duration_frames):
        while next_event < len(events) and events[next_event].frame == i:
            ev = events[next_event]
            for key in ev.unset:
                state.pop(key, None)
            state.update(ev.set)
            next_event += 1
        t = _frame_t_ns(i, script.fps)
        truth = _scene_truth(state)

        def emit(name: str, payload: Mapping[str, Any]) -> Message:
            msg = Message(name, t + CHANNEL_OFFSETS_NS[name], CHANNEL_KINDS[name], payload)
            messages[name].append(msg)
            return msg

        image = emit("image", {"ref": f"frame_{i:06d}", "scene": truth})
        emit("localization", {"x": round(i * 0.5, 3), "y": 0.0, "heading": 0.0})

        inputs: dict[MessageKind, Mapping[str, Any]] = {MessageKind.IMAGE_REF: image.payload}
        for kind in MODULE_KINDS:
            module = modules[kind]
            if not module.emits_at(i):
                inputs[module.publish_kind] = held_prediction if kind == "prediction" else {}
                continue
            payload = module.compute(inputs)
            if script.glitch_rate and rng.random() < script.glitch_rate:
                payload = _glitch_payload(module.publish_kind, payload)
            if kind == "prediction":
                held_prediction = payload
            inputs[module.publish_kind] = payload
            emit(kind, payload)

    channels = {
        name: Channel(name, CHANNEL_KINDS[name], tuple(msgs))
        for name, msgs in messages.items()
        if msgs
    }
    return Recording(channels)


@dataclass(frozen=True)
class ReplayResult:
    """Per-frame module outputs plus replay bookkeeping."""

    messages: tuple[Message, ...]
    warmup_frames: int
    call_counts: Mapping[str, int]

    @property
    def comparable(self) -> tuple[Message, ...]:
        return self.messages[self.warmup_frames :]


def replay_segment(
    module: ToyModule, frames: Sequence[Frame], warmup_frames: int = 0, fps: int = 15
) -> ReplayResult:
    """Replay one module over aligned frames, one output per frame.

    The first warmup_frames outputs are produced but flagged non-comparable;
    they let rate-held module state synchronize with the recording before
    comparison starts. The module recomputes only on its native emission
    ticks (derived from frame timestamps) and repeats its held output in
    between; the first frame always computes, which is the cold start the
    warm-up absorbs.
    """
    if not frames:
        raise SynthError("replay needs at least one frame")
    if not (0 <= warmup_frames < len(frames)):
        raise SynthError(f"warmup_frames {warmup_frames} outside [0, {len(frames)})")
    kinds_present = {m.kind for m in frames[0].messages.values()}
    missing = module.input_kinds - kinds_present
    if missing:
        raise SynthError(
            f"module {module.kind!r} needs channel kind(s) "
            f"{sorted(k.value for k in missing)} absent from the frames"
        )
    out_channels = [
        name for name, m in frames[0].messages.items() if m.kind is module.publish_kind
    ]
    if len(out_channels) > 1:
        raise SynthError(
            f"frames carry {len(out_channels)} channels of kind {module.publish_kind.value!r}"
        )
    out_channel = out_channels[0] if out_channels else module.kind

    fresh = module.fresh()
    held: dict[str, Any] | None = None
    outputs = []
    for k, frame in enumerate(frames):
        if held is None or fresh.emits_at(_frame_index(frame.t_ns, fps)):
            inputs = {m.kind: m.payload for m in frame.messages.values()}
            held = fresh.compute(inputs)
        outputs.append(Message(out_channel, frame.t_ns, module.publish_kind, held))
    return ReplayResult(tuple(outputs), warmup_frames, dict(fresh.call_log))


def _swap_channel(frame: Frame, message: Message) -> Frame:
    return Frame(frame.t_ns, {**frame.messages, message.channel: message})


def _replayed_vectors(
    ar: AlignedRecording,
    result: ReplayResult,
    lo: int,
    registry: SchemaRegistry,
    flt: ModuleFilter,
) -> list[FrameVector]:
    vectors = []
    for offset, msg in enumerate(result.comparable):
        frame = _swap_channel(ar.frames[lo + result.warmup_frames + offset], msg)
        vectors.append(apply_filter(encode_frame(frame, registry), flt, registry))
    return vectors


def run_regression(
    recording: Recording,
    module_kind: str,
    mutants: Sequence[Mutant],
    strategies: Sequence[str] = ("RSC", "SC", "CH", "RD", "CC"),
    cfg: ReductionConfig = ReductionConfig(),
    *,
    registry: SchemaRegistry | None = None,
    seed: int = 0,
    repetitions: int = 100,
    rarity_mode: str = "indicator",
    fps: int = 15,
    jobs: int = 1,
) -> MetricsReport:
    """Reduce a recording, replay mutants, and score prioritization plans.

    Only the named module is replayed. Mutants targeting other modules
    cannot change this module's outputs (every toy module is a pure function
    of its inputs and its own parameters), so they are recorded as clean
    verdicts without replay.
    """
    if module_kind not in MODULE_KINDS:
        raise SynthError(f"unknown module kind {module_kind!r}")
    registry = registry or default_registry()
    ar = align_recording(recording)
    flt = ModuleFilter.for_module(module_kind, registry)
    vectors = encode_recording(ar, registry, flt)
    segments, _ = reduce_recording(ar, vectors, cfg)
    module = make_module(module_kind)
    n_frames = len(ar.frames)

    own = [m for m in mutants if m.module == module_kind]
    foreign = [m for m in mutants if m.module != module_kind]

    def evaluate_mutant(mutant: Mutant) -> dict[str, Any]:
        mutated = apply_mutant(module, mutant)
        whole = Segment(WHOLE_RECORDING_SEGMENT_ID, 0, n_frames - 1, vectors[0], 0)
        full_replay = replay_segment(mutated, ar.frames, 0, fps)
        full_verdict = compare_outputs(
            vectors, _replayed_vectors(ar, full_replay, 0, registry, flt), whole
        )
        seg_verdicts = {}
        for s in segments:
            result = replay_segment(
                mutated,
                ar.frames[s.warmup_start_idx : s.end_idx + 1],
                s.start_idx - s.warmup_start_idx,
                fps,
            )
            replayed = _replayed_vectors(ar, result, s.warmup_start_idx, registry, flt)
            seg_verdicts[s.id] = compare_outputs(
                vectors[s.start_idx : s.end_idx + 1], replayed, s
            )
        return {"mutant": mutant, "full": full_verdict, "segments": seg_verdicts}

    if jobs > 1 and len(own) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            evaluated = list(pool.map(evaluate_mutant, own))
    else:
        evaluated = [evaluate_mutant(m) for m in own]

    clean = {s.id: FaultVerdict(s.id, 0, s.length) for s in segments}
    results = {e["mutant"].id: e for e in evaluated}
    for m in foreign:
        results[m.id] = {
            "mutant": m,
            "full": FaultVerdict(WHOLE_RECORDING_SEGMENT_ID, 0, n_frames),
            "segments": dict(clean),
        }

    detected_full = {mid for mid, e in results.items() if e["full"].is_fault}
    detected_reduced = {
        mid for mid, e in results.items() if any(v.is_fault for v in e["segments"].values())
    }
    fault_sets = {
        s.id: frozenset(
            mid for mid, e in results.items() if e["segments"][s.id].is_fault
        )
        for s in segments
    }

    # Call counts for CC: unmutated replay of each segment body, counting
    # calls of the functions the mutant set touches.
    functions = {module.PARAM_FUNCTIONS.get(m.target) for m in own}
    functions.discard(None)
    call_counts = []
    for s in segments:
        counts = replay_segment(module, ar.frames[s.start_idx : s.end_idx + 1], 0, fps).call_counts
        call_counts.append(sum(counts.get(f, 0) for f in functions))

    plans: dict[str, list[PrioritizedPlan]] = {}
    for strategy in strategies:
        name = strategy.upper()
        if name == "RSC":
            plans[name] = [prioritize_rsc(segments, vectors, rarity_mode=rarity_mode)]
        elif name == "SC":
            plans[name] = [prioritize_sc(segments)]
        elif name == "CH":
            plans[name] = [prioritize_ch(segments)]
        elif name == "RD":
            plans[name] = prioritize_rd(segments, seed, repetitions)
        elif name == "CC":
            plans[name] = [prioritize_cc(segments, call_counts)]
        else:
            raise SynthError(f"unknown strategy {strategy!r}")

    apfd_by: dict[str, float | None] = {}
    topk_by: dict[str, float | None] = {}
    strategy_details: dict[str, Any] = {}
    for name, plan_list in plans.items():
        scores = [evaluate_plan(p, fault_sets) for p in plan_list]
        apfds = [a for a, _ in scores if a is not None]
        topks = [k for _, k in scores if k is not None]
        apfd_by[name] = (sum(apfds) / len(apfds)) if apfds else None
        topk_by[name] = (sum(topks) / len(topks)) if topks else None
        detail: dict[str, Any] = {"plans": len(plan_list)}
        if len(plan_list) == 1:
            detail["order"] = list(plan_list[0].order)
            detail["scores"] = list(plan_list[0].scores)
        else:
            detail["seed"] = seed
        strategy_details[name] = detail

    reduced = sum(s.length for s in segments)
    reduced_wu = sum(s.length_with_warmup for s in segments)
    totals = SuiteTotals(
        original_frames=n_frames,
        reduced_frames=reduced,
        reduced_frames_with_warmup=reduced_wu,
        segments_before_dedup=len(segment_ids_before_dedup(vectors, cfg)),
        segments_after_dedup=len(segments),
    )
    details = {
        "module": module_kind,
        "config": {
            "window_w": cfg.window_w,
            "clip_n": cfg.clip_n,
            "warmup_frames": cfg.warmup_frames,
            "seed": seed,
            "repetitions": repetitions,
            "rarity_mode": rarity_mode,
        },
        "mutants": {
            mid: {
                "module": e["mutant"].module,
                "detected_full": e["full"].is_fault,
                "detected_reduced": any(v.is_fault for v in e["segments"].values()),
                "segments": {
                    str(sid): {
                        "mismatched_frames": v.mismatched_frames,
                        "total_frames": v.total_frames,
                        "is_fault": v.is_fault,
                    }
                    for sid, v in sorted(e["segments"].items())
                },
            }
            for mid, e in sorted(results.items())
        },
        "detected_full": sorted(detected_full),
        "detected_reduced": sorted(detected_reduced),
        "undetected": sorted(set(results) - detected_full - detected_reduced),
        "strategies": strategy_details,
        "call_counts": call_counts,
        "segment_ids": [s.id for s in segments],
    }
    # Warm-up frames can overlap across segments, so this figure may
    # legitimately go negative for pathological configs; report it raw.
    return MetricsReport(
        reduction_pct=reduction_pct(n_frames, reduced),
        reduction_pct_with_warmup=float(1 - Fraction(reduced_wu, n_frames)),
        fault_coverage=fault_coverage(detected_reduced, detected_full),
        apfd=apfd_by,
        top_k=topk_by,
        totals=totals,
        details=details,
    )


def segment_ids_before_dedup(vectors: Sequence[FrameVector], cfg: ReductionConfig) -> list[int]:
    """Chronological segment ids prior to deduplication."""
    from .reduction import segment, smooth

    return [s.id for s in segment(smooth(vectors, cfg.window_w))]


def run_benchmark(
    recording: Recording,
    mutants: Sequence[Mutant],
    strategies: Sequence[str] = ("RSC", "SC", "CH", "RD", "CC"),
    cfg: ReductionConfig = ReductionConfig(),
    **kwargs: Any,
) -> MetricsReport:
    """Run one regression per module kind and aggregate the results.

    Each module runs with its own dimension filter and its own mutants.
    Coverage aggregates over all mutants; APFD and Top-K are averaged over
    the module runs where they are defined; frame totals are summed.
    """
    sub: dict[str, MetricsReport] = {}
    for kind in MODULE_KINDS:
        own = [m for m in mutants if m.module == kind]
        sub[kind] = run_regression(recording, kind, own, strategies, cfg, **kwargs)

    reduced_detected: set[str] = set()
    full_detected: set[str] = set()
    for report in sub.values():
        reduced_detected.update(report.details["detected_reduced"])
        full_detected.update(report.details["detected_full"])

    strategies_upper = [s.upper() for s in strategies]
    apfd_by: dict[str, float | None] = {}
    topk_by: dict[str, float | None] = {}
    for name in strategies_upper:
        apfds = [r.apfd[name] for r in sub.values() if r.apfd.get(name) is not None]
        topks = [r.top_k[name] for r in sub.values() if r.top_k.get(name) is not None]
        apfd_by[name] = sum(apfds) / len(apfds) if apfds else None
        topk_by[name] = sum(topks) / len(topks) if topks else None

    totals = SuiteTotals(
        original_frames=sum(r.totals.original_frames for r in sub.values()),
        reduced_frames=sum(r.totals.reduced_frames for r in sub.values()),
        reduced_frames_with_warmup=sum(r.totals.reduced_frames_with_warmup for r in sub.values()),
        segments_before_dedup=sum(r.totals.segments_before_dedup for r in sub.values()),
        segments_after_dedup=sum(r.totals.segments_after_dedup for r in sub.values()),
    )
    return MetricsReport(
        reduction_pct=sum(r.reduction_pct for r in sub.values()) / len(sub),
        reduction_pct_with_warmup=sum(r.reduction_pct_with_warmup for r in sub.values()) / len(sub),
        fault_coverage=fault_coverage(reduced_detected, full_detected),
        apfd=apfd_by,
        top_k=topk_by,
        totals=totals,
        details={
            "aggregate": "per-module mean",
            "detected_full": sorted(full_detected),
            "detected_reduced": sorted(reduced_detected),
            "undetected": sorted({m.id for m in mutants} - full_detected - reduced_detected),
            "modules": {kind: report_details_json(r) for kind, r in sub.items()},
        },
    )


def report_details_json(report: MetricsReport) -> dict[str, Any]:
    from .evaluation import report_to_json

    return report_to_json(report)
