"""Scene schema: registry invariants, frame encoding, module filters."""

from __future__ import annotations

import pytest

from strap.recording import Frame, Message, MessageKind
from strap.schema import (
    MODULE_KINDS,
    DimensionSpec,
    ModuleFilter,
    SchemaError,
    SchemaRegistry,
    apply_filter,
    default_registry,
    encode_frame,
    load_registry,
    registry_from_json,
    registry_to_json,
    save_registry,
)


def frame(t=0, **by_kind):
    msgs = {}
    for kind_name, payload in by_kind.items():
        kind = MessageKind(kind_name)
        msgs[kind_name] = Message(kind_name, t, kind, payload)
    return Frame(t, msgs)


class TestRegistry:
    def test_shape(self, registry):
        assert len(registry) == 21
        assert registry.always_keep == frozenset({"stop_sign", "crosswalk", "intersection"})

    def test_codes_are_sequential_and_globally_unique(self, registry):
        codes = [c for d in registry.dimensions for c in d.codes.values()]
        assert sorted(codes) == list(range(1, 52))

    def test_zero_means_absent_everywhere(self, registry):
        assert 0 not in {c for d in registry.dimensions for c in d.codes.values()}

    def test_property_dims_name_their_parent(self, registry):
        by_name = {d.name: d for d in registry.dimensions}
        assert by_name["vehicle.subtype"].parent == "vehicle"
        assert by_name["cyclist.action"].parent == "cyclist"
        # Ego dimensions describe the vehicle under test, not a detected object.
        assert by_name["ego.action"].parent is None
        assert by_name["ego.stop_cause"].parent is None

    def test_unknown_value_message(self, registry):
        dim = registry.dimensions[registry.index("traffic_light.color")]
        with pytest.raises(SchemaError, match='dimension "traffic_light.color": unknown value "purple"'):
            dim.code("purple")

    def test_duplicate_codes_rejected(self):
        with pytest.raises(SchemaError, match="duplicate codes"):
            DimensionSpec("x", "property", MessageKind.PLANNING, {"a": 1, "b": 1})

    def test_parent_must_be_presence(self):
        dims = (
            DimensionSpec("a", "property", MessageKind.PLANNING, {"v": 1}),
            DimensionSpec("b", "property", MessageKind.PLANNING, {"w": 2}, parent="a"),
        )
        with pytest.raises(SchemaError, match="not a presence"):
            SchemaRegistry(dims, frozenset())

    def test_json_round_trip(self, registry, tmp_path):
        p = tmp_path / "schema.json"
        save_registry(registry, p)
        again = load_registry(p)
        assert registry_to_json(again) == registry_to_json(registry)

    def test_bad_document(self):
        with pytest.raises(SchemaError, match="invalid schema document"):
            registry_from_json({"dimensions": [{"name": "x"}]})


class TestEncode:
    def test_full_frame_hand_traced(self, registry):
        f = frame(
            t=7,
            traffic_light={"lights": [{"color": "red", "shape": "round", "orientation": "vertical"}]},
            obstacle={
                "obstacles": [{"actor": "vehicle", "subtype": "car", "on_crosswalk": True}],
                "objects": ["stop_sign"],
            },
            prediction={"tracks": [{"actor": "vehicle", "action": "stop"}]},
            planning={"ego_action": "stop", "stop_cause": "traffic_light"},
        )
        v = encode_frame(f, registry)
        assert v.t_ns == 7
        expected = {
            "vehicle": 1,
            "vehicle.subtype": 3,
            "vehicle.action": 6,
            "traffic_light": 32,
            "traffic_light.color": 33,
            "traffic_light.shape": 38,
            "traffic_light.orientation": 39,
            "stop_sign": 41,
            "crosswalk": 42,
            "ego.action": 46,
            "ego.stop_cause": 50,
        }
        for name, code in zip(registry.names, v.values):
            assert code == expected.get(name, 0), name

    def test_empty_frame_is_all_zero(self, registry):
        v = encode_frame(frame(localization={"x": 0.0}), registry)
        assert set(v.values) == {0}

    def test_orphan_action_is_zeroed(self, registry):
        # A predicted track with no matching detection claims nothing.
        f = frame(prediction={"tracks": [{"actor": "pedestrian", "action": "cross"}]})
        v = encode_frame(f, registry)
        assert v.values[registry.index("pedestrian")] == 0
        assert v.values[registry.index("pedestrian.action")] == 0

    def test_first_object_of_a_kind_wins(self, registry):
        f = frame(
            obstacle={
                "obstacles": [
                    {"actor": "vehicle", "subtype": "truck"},
                    {"actor": "vehicle", "subtype": "bus"},
                ]
            }
        )
        v = encode_frame(f, registry)
        assert v.values[registry.index("vehicle.subtype")] == 2

    def test_first_light_provides_properties(self, registry):
        f = frame(traffic_light={"lights": [{"color": "green"}, {"color": "red"}]})
        v = encode_frame(f, registry)
        assert v.values[registry.index("traffic_light")] == 32
        assert v.values[registry.index("traffic_light.color")] == 34
        assert v.values[registry.index("traffic_light.shape")] == 0

    def test_unknown_actor_value_raises(self, registry):
        f = frame(obstacle={"obstacles": [{"actor": "dragon"}]})
        with pytest.raises(SchemaError, match='unknown value "dragon"'):
            encode_frame(f, registry)

    def test_crosswalk_inferred_from_obstacle_flag(self, registry):
        f = frame(obstacle={"obstacles": [{"actor": "pedestrian", "on_crosswalk": True}]})
        v = encode_frame(f, registry)
        assert v.values[registry.index("crosswalk")] == 42


class TestFilter:
    def test_module_filters_cover_expected_dimensions(self, registry):
        tl = ModuleFilter.for_module("traffic_light", registry)
        assert tl.retained_dimensions == frozenset(
            {
                "traffic_light",
                "traffic_light.color",
                "traffic_light.shape",
                "traffic_light.orientation",
                "stop_sign",
                "crosswalk",
                "intersection",
            }
        )
        ob = ModuleFilter.for_module("obstacle", registry)
        assert "vehicle" in ob.retained_dimensions
        assert "vehicle.action" not in ob.retained_dimensions
        assert "ego.action" not in ob.retained_dimensions
        assert ModuleFilter.for_module("all", registry).retained_dimensions == frozenset(
            registry.names
        )

    def test_unknown_module_rejected(self, registry):
        with pytest.raises(SchemaError, match="unknown module"):
            ModuleFilter.for_module("radar", registry)

    def test_filter_zeroes_and_keeps_length(self, registry):
        f = frame(
            traffic_light={"lights": [{"color": "red"}]},
            planning={"ego_action": "cruise"},
        )
        v = encode_frame(f, registry)
        out = apply_filter(v, ModuleFilter.for_module("traffic_light", registry), registry)
        assert len(out.values) == len(v.values)
        assert out.values[registry.index("traffic_light.color")] == 33
        assert out.values[registry.index("ego.action")] == 0

    def test_filter_re_zeroes_orphaned_children(self, registry):
        f = frame(
            obstacle={"obstacles": [{"actor": "vehicle", "subtype": "van"}]},
        )
        v = encode_frame(f, registry)
        assert v.values[registry.index("vehicle.subtype")] == 5
        flt = ModuleFilter("custom", frozenset({"vehicle.subtype"}))
        out = apply_filter(v, flt, registry)
        assert out.values[registry.index("vehicle.subtype")] == 0

    def test_length_mismatch_rejected(self, registry):
        from strap.schema import FrameVector

        with pytest.raises(SchemaError, match="does not match registry size"):
            apply_filter(FrameVector((1, 2), 0), ModuleFilter("all", frozenset()), registry)


def test_module_kinds_order():
    assert MODULE_KINDS == ("traffic_light", "obstacle", "prediction", "planning")
