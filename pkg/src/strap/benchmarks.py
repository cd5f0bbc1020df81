"""Bundled scenario scripts and mutant sets for benchmarking.

Three scripts ship with the package:

- "benchmark": eight 300-frame scenarios exercising every schema dimension,
  with a 1% glitch rate. Long stable scenes make it highly reducible.
- "noisy-prediction": a 600-frame stable scene followed by 180 distinct
  5-frame scene combinations. The rapid churn caps how much reduction can
  achieve, which is the point.
- "rare-fault": six 300-frame scenes where the last one stacks every rare
  feature. Its paired mutants only misbehave in that rare scene, so
  rarity-weighted prioritization should surface them first.
"""

from __future__ import annotations

from math import prod
from typing import Any, Callable, Mapping, Sequence

from .synth import Mutant, ScenarioScript, SceneEvent

SCENARIO_FRAMES = 300


def _scene_events(scenes: Sequence[Mapping[str, Any]]) -> tuple[SceneEvent, ...]:
    # Every event rewrites the whole scene so nothing leaks between scenarios.
    return tuple(
        SceneEvent(
            frame=i * SCENARIO_FRAMES,
            set={
                "lights": scene.get("lights", []),
                "obstacles": scene.get("obstacles", []),
                "objects": scene.get("objects", []),
            },
        )
        for i, scene in enumerate(scenes)
    )


def benchmark_script() -> ScenarioScript:
    """Eight scenarios, 2400 frames, 1% glitch rate."""
    scenes: list[dict[str, Any]] = [
        {},
        {
            "lights": [{"color": "red", "shape": "round", "orientation": "vertical"}],
            "obstacles": [{"actor": "vehicle", "subtype": "car", "action": "stop"}],
        },
        {
            "lights": [{"color": "green", "shape": "round", "orientation": "vertical"}],
            "obstacles": [{"actor": "vehicle", "subtype": "car", "action": "cruise"}],
        },
        {
            "obstacles": [{"actor": "vehicle", "subtype": "truck", "action": "stop"}],
            "objects": ["stop_sign"],
        },
        {
            "obstacles": [{"actor": "pedestrian", "action": "cross", "on_crosswalk": True}],
            "objects": ["crosswalk"],
        },
        {
            "obstacles": [
                {"actor": "vehicle", "subtype": "bus", "action": "stop"},
                {"actor": "vehicle", "subtype": "car", "action": "cruise"},
            ],
        },
        {
            "lights": [{"color": "yellow", "shape": "square", "orientation": "horizontal"}],
            "obstacles": [{"actor": "cyclist", "subtype": "bicyclist", "action": "cruise"}],
            "objects": ["traffic_cone"],
        },
        {
            "obstacles": [
                {"actor": "cyclist", "subtype": "motorcyclist", "action": "change_lane",
                 "at_intersection": True},
                {"actor": "unknown", "action": "stop"},
                {"actor": "pedestrian", "action": "stop"},
            ],
            "objects": ["intersection"],
        },
    ]
    return ScenarioScript(
        duration_frames=len(scenes) * SCENARIO_FRAMES,
        glitch_rate=0.01,
        events=_scene_events(scenes),
    )


_NOISY_RADICES = (4, 5, 3, 2, 2)
_NOISY_VEHICLES = ("car", "truck", "bus", "van")
_NOISY_ACTIONS = ("cruise", "stop", "change_lane", "overtake", "cross")
_NOISY_CYCLISTS = ("bicyclist", "motorcyclist", "tricyclist")
NOISY_BASE_FRAMES = 600
NOISY_COMBO_FRAMES = 5
NOISY_COMBOS = 180


def _gray_tuple(k: int, radices: Sequence[int]) -> tuple[int, ...]:
    """k-th tuple of the reflected mixed-radix sequence.

    Consecutive tuples differ in exactly one digit by one step, so each scene
    change touches a single feature and never repeats a combination.
    """
    digits = []
    for i in range(len(radices)):
        block = prod(radices[i + 1 :])
        a, k = divmod(k, block)
        digits.append(a)
        if a % 2 == 1:
            k = block - 1 - k
    return tuple(digits)


def _noisy_combo_scene(combo: int) -> dict[str, Any]:
    vsub, vact, csub, cone, crosswalk = _gray_tuple(combo, _NOISY_RADICES)
    objects = []
    if cone:
        objects.append("traffic_cone")
    if crosswalk:
        objects.append("crosswalk")
    return {
        "lights": [],
        "obstacles": [
            {"actor": "vehicle", "subtype": _NOISY_VEHICLES[vsub], "action": _NOISY_ACTIONS[vact]},
            {"actor": "cyclist", "subtype": _NOISY_CYCLISTS[csub], "action": "cruise"},
        ],
        "objects": objects,
    }


def noisy_prediction_script() -> ScenarioScript:
    """A stable first act, then 180 distinct five-frame scene combinations."""
    events = [
        SceneEvent(
            frame=0,
            set={
                "lights": [{"color": "red", "shape": "round", "orientation": "vertical"}],
                "obstacles": [{"actor": "vehicle", "subtype": "car", "action": "stop"}],
                "objects": [],
            },
        )
    ]
    for c in range(NOISY_COMBOS):
        events.append(
            SceneEvent(frame=NOISY_BASE_FRAMES + c * NOISY_COMBO_FRAMES, set=_noisy_combo_scene(c))
        )
    return ScenarioScript(
        duration_frames=NOISY_BASE_FRAMES + NOISY_COMBOS * NOISY_COMBO_FRAMES,
        glitch_rate=0.0,
        events=tuple(events),
    )


def rare_fault_script() -> ScenarioScript:
    """Six scenes; the last stacks every rare feature in one place."""
    scenes: list[dict[str, Any]] = [
        {},
        {"lights": [{"color": "red", "shape": "round", "orientation": "vertical"}]},
        {"lights": [{"color": "green", "shape": "round", "orientation": "vertical"}]},
        {
            "lights": [{"color": "red", "shape": "round", "orientation": "vertical"}],
            "objects": ["stop_sign"],
        },
        {
            "lights": [{"color": "green", "shape": "round", "orientation": "vertical"}],
            "objects": ["crosswalk"],
        },
        {
            "lights": [{"color": "yellow", "shape": "square", "orientation": "horizontal"}],
            "obstacles": [
                {"actor": "cyclist", "subtype": "tricyclist", "action": "cruise"},
                {"actor": "pedestrian", "action": "cross", "on_crosswalk": True},
            ],
            "objects": ["stop_sign", "crosswalk", "intersection", "traffic_cone"],
        },
    ]
    return ScenarioScript(
        duration_frames=len(scenes) * SCENARIO_FRAMES,
        glitch_rate=0.0,
        events=_scene_events(scenes),
    )


def benchmark_mutants() -> list[Mutant]:
    """Twenty mutants, five per module; eight are deliberate no-ops."""
    return [
        # traffic light detector
        Mutant("d1", "traffic_light", "green_min_hue", "change_constant", 0.0),
        Mutant("d2", "traffic_light", "lit_min_brightness", "change_constant", 2.0),
        Mutant("d3", "traffic_light", "vertical_check", "flip_condition"),
        Mutant("d4", "traffic_light", "yellow_min_hue", "change_variable", 0.0),
        Mutant("d5", "traffic_light", "round_min_circularity", "replace_arith", 1.0),
        # obstacle detector
        Mutant("o1", "obstacle", "vehicle_min_wheels", "change_constant", 10.0),
        Mutant("o2", "obstacle", "pedestrian_min_height", "change_constant", 5.0),
        Mutant("o3", "obstacle", "static_min_confidence", "change_constant", 0.95),
        Mutant("o4", "obstacle", "cyclist_min_wheels", "change_variable", 0.0),
        Mutant("o5", "obstacle", "bus_min_length", "replace_arith", 1.0),
        # trajectory predictor
        Mutant("p1", "prediction", "stop_max_speed", "change_constant", 9.0),
        Mutant("p2", "prediction", "overtake_min_speed", "change_constant", 6.0),
        Mutant("p3", "prediction", "stop_check", "flip_condition"),
        Mutant("p4", "prediction", "lateral_min", "change_variable", 0.0),
        Mutant("p5", "prediction", "cross_max_speed", "replace_arith", 1.0),
        # motion planner
        Mutant("pl1", "planning", "sign_stop_range_m", "change_constant", 1.0),
        Mutant("pl2", "planning", "passing_mode", "change_constant", 0.0),
        Mutant("pl3", "planning", "red_light_stop", "flip_condition"),
        Mutant("pl4", "planning", "sign_stop_range_m", "change_variable", 0.0),
        Mutant("pl5", "planning", "passing_mode", "replace_arith", 1.0),
    ]


def rare_fault_mutants() -> list[Mutant]:
    """Two detector mutants that only misclassify the rare scene's light."""
    return [
        Mutant("rf1", "traffic_light", "yellow_min_hue", "change_constant", 200.0),
        Mutant("rf2", "traffic_light", "round_min_circularity", "replace_arith", 0.2),
    ]


BUILTIN_SCRIPTS: Mapping[str, Callable[[], ScenarioScript]] = {
    "benchmark": benchmark_script,
    "noisy-prediction": noisy_prediction_script,
    "rare-fault": rare_fault_script,
}

BUILTIN_MUTANTS: Mapping[str, Callable[[], list[Mutant]]] = {
    "benchmark": benchmark_mutants,
    "rare-fault": rare_fault_mutants,
}
