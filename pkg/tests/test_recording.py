"""Recording model, JSONL round-trips, and alignment semantics."""

from __future__ import annotations

import pytest

from strap.recording import (
    AlignedRecording,
    AlignmentError,
    Channel,
    Frame,
    Message,
    MessageKind,
    Recording,
    RecordingLoadError,
    align_recording,
    dump_recording_jsonl,
    load_recording,
    slice_recording,
)


def msg(channel, t, kind=MessageKind.LOCALIZATION, **payload):
    return Message(channel, t, kind, payload or {"n": t})


def chan(name, times, kind=MessageKind.LOCALIZATION):
    return Channel(name, kind, tuple(msg(name, t, kind) for t in times))


def rec(*channels):
    return Recording({c.name: c for c in channels})


class TestModel:
    def test_negative_timestamp_rejected(self):
        with pytest.raises(ValueError, match="negative timestamp"):
            Message("a", -1, MessageKind.LOCALIZATION, {})

    def test_channel_rejects_kind_mismatch(self):
        m = msg("a", 0, MessageKind.PLANNING)
        with pytest.raises(ValueError, match="declared"):
            Channel("a", MessageKind.LOCALIZATION, (m,))

    def test_channel_rejects_decreasing_times(self):
        with pytest.raises(ValueError, match="decrease"):
            chan("a", [5, 3])

    def test_recording_needs_messages(self):
        with pytest.raises(ValueError, match="no channels"):
            Recording({})
        with pytest.raises(ValueError, match="no messages"):
            Recording({"a": Channel("a", MessageKind.LOCALIZATION, ())})

    def test_recording_key_must_match_channel_name(self):
        with pytest.raises(ValueError, match="does not match"):
            Recording({"b": chan("a", [0])})

    def test_epoch_is_earliest_message(self):
        r = rec(chan("a", [30, 40]), chan("b", [10, 50]))
        assert r.epoch == 10

    def test_frame_rejects_foreign_timestamps(self):
        with pytest.raises(ValueError, match="holds channel"):
            Frame(5, {"a": msg("a", 7)})

    def test_by_kind_sorted_by_channel_name(self):
        f = Frame(
            0,
            {
                "b": msg("b", 0, MessageKind.PLANNING),
                "a": msg("a", 0, MessageKind.PLANNING),
                "c": msg("c", 0),
            },
        )
        assert [m.channel for m in f.by_kind(MessageKind.PLANNING)] == ["a", "b"]


class TestLoadDump:
    def test_round_trip(self, tmp_path):
        r = rec(chan("cam", [0, 100], MessageKind.IMAGE_REF), chan("loc", [0, 100]))
        p = tmp_path / "r.jsonl"
        p.write_text(dump_recording_jsonl(r))
        r2 = load_recording(p)
        assert dump_recording_jsonl(r2) == dump_recording_jsonl(r)

    def test_dump_sorted_by_time_then_channel(self):
        r = rec(chan("z", [0, 50]), chan("a", [0, 70]))
        lines = dump_recording_jsonl(r).splitlines()
        keys = [(l.find('"t_ns": '), l) for l in lines]
        import json

        rows = [json.loads(l) for l in lines]
        assert [(r_["t_ns"], r_["channel"]) for r_ in rows] == [
            (0, "a"),
            (0, "z"),
            (50, "z"),
            (70, "a"),
        ]

    @pytest.mark.parametrize(
        "line,err",
        [
            ("{not json", "line 1: invalid JSON"),
            ('["x"]', "line 1: expected a JSON object"),
            ('{"channel": "a", "t_ns": 0, "kind": "localization"}', "missing field 'payload'"),
            (
                '{"channel": "a", "t_ns": 0, "kind": "sonar", "payload": {}}',
                "unknown message kind 'sonar'",
            ),
            (
                '{"channel": "a", "t_ns": 1.5, "kind": "localization", "payload": {}}',
                "t_ns must be an integer",
            ),
            (
                '{"channel": "a", "t_ns": -3, "kind": "localization", "payload": {}}',
                "negative timestamp -3",
            ),
            (
                '{"channel": "a", "t_ns": 0, "kind": "localization", "payload": 7}',
                "payload must be a JSON object",
            ),
        ],
    )
    def test_line_errors_carry_line_numbers(self, tmp_path, line, err):
        p = tmp_path / "bad.jsonl"
        p.write_text(line + "\n")
        with pytest.raises(RecordingLoadError, match=err):
            load_recording(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.jsonl"
        p.write_text("\n\n")
        with pytest.raises(RecordingLoadError, match="empty recording"):
            load_recording(p)

    def test_kind_flip_names_both_lines(self, tmp_path):
        p = tmp_path / "flip.jsonl"
        p.write_text(
            '{"channel": "a", "t_ns": 0, "kind": "planning", "payload": {}}\n'
            '{"channel": "a", "t_ns": 1, "kind": "obstacle", "payload": {}}\n'
        )
        with pytest.raises(RecordingLoadError, match=r"line 2.*declared at line 1"):
            load_recording(p)

    def test_out_of_order_sorted_with_warning(self, tmp_path):
        p = tmp_path / "ooo.jsonl"
        p.write_text(
            '{"channel": "a", "t_ns": 10, "kind": "localization", "payload": {"n": 10}}\n'
            '{"channel": "a", "t_ns": 5, "kind": "localization", "payload": {"n": 5}}\n'
        )
        with pytest.warns(UserWarning, match="re-sorted"):
            r = load_recording(p)
        assert [m.t_ns for m in r.channels["a"].messages] == [5, 10]

    def test_duplicate_timestamps_keep_first(self, tmp_path):
        p = tmp_path / "dup.jsonl"
        p.write_text(
            '{"channel": "a", "t_ns": 5, "kind": "localization", "payload": {"n": 1}}\n'
            '{"channel": "a", "t_ns": 5, "kind": "localization", "payload": {"n": 2}}\n'
        )
        with pytest.warns(UserWarning, match="duplicate-timestamp"):
            r = load_recording(p)
        assert len(r.channels["a"].messages) == 1
        assert r.channels["a"].messages[0].payload == {"n": 1}


class TestAlignment:
    def test_reference_is_largest_channel(self):
        ar = align_recording(rec(chan("cam", [0, 100, 200]), chan("det", [0, 100])))
        assert [f.t_ns for f in ar.frames] == [0, 100, 200]

    def test_reference_tie_breaks_on_name(self):
        # "a" and "b" both have 2 messages; grid must come from "a".
        ar = align_recording(rec(chan("b", [5, 105]), chan("a", [0, 100])))
        assert [f.t_ns for f in ar.frames] == [0, 100]

    def test_bucket_keeps_last_and_gaps_fill_forward(self):
        # Hand-walked: det slots for grid [0,100,200,300] are
        # [m50, m140, fill(m140), fill(m140)]; m410 is past the grid.
        ar = align_recording(
            rec(chan("cam", [0, 100, 200, 300]), chan("det", [50, 140, 410]))
        )
        assert [f.messages["det"].payload["n"] for f in ar.frames] == [50, 140, 140, 140]
        assert all(f.messages["det"].t_ns == f.t_ns for f in ar.frames)

    def test_two_in_bucket_keeps_last(self):
        # Tie on message count, so "cam" wins the reference role by name.
        ar = align_recording(rec(chan("cam", [0, 100, 200]), chan("det", [10, 60, 110])))
        assert [f.messages["det"].payload["n"] for f in ar.frames] == [60, 110, 110]

    def test_message_before_grid_seeds_fill(self):
        ar = align_recording(rec(chan("cam", [100, 200]), chan("det", [40])))
        assert [f.messages["det"].payload["n"] for f in ar.frames] == [40, 40]

    def test_leading_frames_dropped_until_covered(self):
        # det first appears in the [200, 300) bucket, so frames 0 and 100 go.
        ar = align_recording(
            rec(chan("cam", [0, 100, 200, 300]), chan("det", [210]))
        )
        assert [f.t_ns for f in ar.frames] == [200, 300]

    def test_never_overlapping_channel_errors(self):
        with pytest.raises(AlignmentError, match="never overlaps"):
            align_recording(rec(chan("cam", [0, 100]), chan("det", [500, 600])))

    def test_alignment_is_idempotent(self):
        ar = align_recording(
            rec(chan("cam", [0, 100, 200, 300]), chan("det", [50, 140]), chan("loc", [0, 150, 290]))
        )
        again = align_recording(ar.to_recording())
        assert [f.t_ns for f in again.frames] == [f.t_ns for f in ar.frames]
        for f1, f2 in zip(ar.frames, again.frames):
            assert {n: m.payload for n, m in f1.messages.items()} == {
                n: m.payload for n, m in f2.messages.items()
            }

    def test_aligned_recording_validates_coverage(self):
        f0 = Frame(0, {"a": msg("a", 0)})
        f1 = Frame(10, {"a": msg("a", 10), "b": msg("b", 10)})
        with pytest.raises(ValueError, match="does not cover"):
            AlignedRecording((f0, f1), ("a", "b"))

    def test_aligned_recording_requires_increasing_times(self):
        f0 = Frame(10, {"a": msg("a", 10)})
        f1 = Frame(10, {"a": msg("a", 10)})
        with pytest.raises(ValueError, match="strictly increasing"):
            AlignedRecording((f0, f1), ("a",))


class TestSlice:
    def test_slice_bounds(self):
        ar = align_recording(rec(chan("cam", [0, 100, 200, 300])))
        sub = slice_recording(ar, 1, 2)
        assert [f.t_ns for f in sub.frames] == [100, 200]
        with pytest.raises(ValueError, match="out of range"):
            slice_recording(ar, 2, 9)
        with pytest.raises(ValueError, match="out of range"):
            slice_recording(ar, -1, 2)
