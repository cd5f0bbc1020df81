"""Recording data model and cross-channel message alignment.

A recording is a set of named pub-sub channels, each carrying a time-ordered
stream of messages. Channels publish at different rates, so downstream
analysis first aligns them onto the timestamp grid of a reference channel,
producing frames in which every channel contributes exactly one message.
"""

from __future__ import annotations

import json
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

TimestampNs = int


class MessageKind(str, Enum):
    """Payload kinds a channel may carry."""

    TRAFFIC_LIGHT = "traffic_light"
    OBSTACLE = "obstacle"
    PREDICTION = "prediction"
    PLANNING = "planning"
    LOCALIZATION = "localization"
    IMAGE_REF = "image_ref"


class RecordingLoadError(ValueError):
    """A recording file could not be parsed into a valid Recording."""


class AlignmentError(ValueError):
    """A recording could not be aligned into frames."""


@dataclass(frozen=True)
class Message:
    """One channel message. Payloads are treated as immutable by convention."""

    channel: str
    t_ns: TimestampNs
    kind: MessageKind
    payload: Mapping[str, Any]

    def __post_init__(self) -> None:
        if self.t_ns < 0:
            raise ValueError(f"negative timestamp {self.t_ns} on channel {self.channel!r}")

    def retimed(self, t_ns: TimestampNs) -> "Message":
        """Copy of this message stamped with a new timestamp."""
        return Message(self.channel, t_ns, self.kind, self.payload)


@dataclass(frozen=True)
class Channel:
    """A named message stream of a single kind with non-decreasing timestamps."""

    name: str
    kind: MessageKind
    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        prev = -1
        for m in self.messages:
            if m.kind is not self.kind:
                raise ValueError(
                    f"channel {self.name!r} declared {self.kind.value!r} "
                    f"but holds a {m.kind.value!r} message"
                )
            if m.t_ns < prev:
                raise ValueError(f"channel {self.name!r} timestamps decrease at t={m.t_ns}")
            prev = m.t_ns


@dataclass(frozen=True)
class Recording:
    """A bundle of channels keyed by channel name."""

    channels: Mapping[str, Channel]

    def __post_init__(self) -> None:
        if not self.channels:
            raise ValueError("recording has no channels")
        for name, ch in self.channels.items():
            if name != ch.name:
                raise ValueError(f"channel key {name!r} does not match channel name {ch.name!r}")
        if self.message_count() == 0:
            raise ValueError("recording has no messages")

    def message_count(self) -> int:
        return sum(len(ch.messages) for ch in self.channels.values())

    @property
    def epoch(self) -> TimestampNs:
        """Timestamp of the earliest message across all channels."""
        return min(ch.messages[0].t_ns for ch in self.channels.values() if ch.messages)


@dataclass(frozen=True)
class Frame:
    """One aligned time slice: exactly one message per channel, all at t_ns."""

    t_ns: TimestampNs
    messages: Mapping[str, Message]

    def __post_init__(self) -> None:
        for name, m in self.messages.items():
            if m.t_ns != self.t_ns:
                raise ValueError(
                    f"frame at t={self.t_ns} holds channel {name!r} message at t={m.t_ns}"
                )

    def by_kind(self, kind: MessageKind) -> tuple[Message, ...]:
        """Messages of the given kind, ordered by channel name."""
        return tuple(
            self.messages[name] for name in sorted(self.messages) if self.messages[name].kind is kind
        )


@dataclass(frozen=True)
class AlignedRecording:
    """Frames on the reference channel's timestamp grid."""

    frames: tuple[Frame, ...]
    channel_names: tuple[str, ...]

    def __post_init__(self) -> None:
        expected = set(self.channel_names)
        prev = -1
        for f in self.frames:
            if f.t_ns <= prev:
                raise ValueError(f"frame timestamps not strictly increasing at t={f.t_ns}")
            prev = f.t_ns
            if set(f.messages) != expected:
                raise ValueError(f"frame at t={f.t_ns} does not cover all channels")

    def __len__(self) -> int:
        return len(self.frames)

    def to_recording(self) -> Recording:
        """Reinterpret the aligned frames as a plain recording."""
        channels = {}
        for name in self.channel_names:
            msgs = tuple(f.messages[name] for f in self.frames)
            channels[name] = Channel(name, msgs[0].kind, msgs)
        return Recording(channels)


def _parse_line(line: str, lineno: int) -> Message:
    try:
        row = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordingLoadError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(row, dict):
        raise RecordingLoadError(f"line {lineno}: expected a JSON object")
    for key in ("channel", "t_ns", "kind", "payload"):
        if key not in row:
            raise RecordingLoadError(f"line {lineno}: missing field {key!r}")
    try:
        kind = MessageKind(row["kind"])
    except ValueError:
        raise RecordingLoadError(f"line {lineno}: unknown message kind {row['kind']!r}") from None
    t_ns = row["t_ns"]
    if not isinstance(t_ns, int) or isinstance(t_ns, bool):
        raise RecordingLoadError(f"line {lineno}: t_ns must be an integer")
    if t_ns < 0:
        raise RecordingLoadError(f"line {lineno}: negative timestamp {t_ns}")
    payload = row["payload"]
    if not isinstance(payload, dict):
        raise RecordingLoadError(f"line {lineno}: payload must be a JSON object")
    return Message(str(row["channel"]), t_ns, kind, payload)


def load_recording(path: str | Path) -> Recording:
    """Parse a JSONL recording file.

    Messages are grouped per channel and stably sorted by timestamp; a warning
    is emitted for out-of-order channels. Exact duplicate timestamps within a
    channel keep the first message in file order and warn.
    """
    text = Path(path).read_text(encoding="utf-8")
    per_channel: dict[str, list[Message]] = {}
    kinds: dict[str, tuple[MessageKind, int]] = {}
    lineno = 0
    for raw in text.splitlines():
        lineno += 1
        if not raw.strip():
            continue
        msg = _parse_line(raw, lineno)
        seen = kinds.get(msg.channel)
        if seen is None:
            kinds[msg.channel] = (msg.kind, lineno)
        elif seen[0] is not msg.kind:
            raise RecordingLoadError(
                f"line {lineno}: channel {msg.channel!r} is {seen[0].value!r} "
                f"(declared at line {seen[1]}) but carries {msg.kind.value!r}"
            )
        per_channel.setdefault(msg.channel, []).append(msg)
    if not per_channel:
        raise RecordingLoadError("empty recording")

    channels = {}
    for name, msgs in per_channel.items():
        ordered = sorted(msgs, key=lambda m: m.t_ns)
        if [m.t_ns for m in ordered] != [m.t_ns for m in msgs]:
            warnings.warn(f"channel {name!r}: out-of-order timestamps were re-sorted", stacklevel=2)
        deduped: list[Message] = []
        dropped = 0
        for m in ordered:
            if deduped and deduped[-1].t_ns == m.t_ns:
                dropped += 1
                continue
            deduped.append(m)
        if dropped:
            warnings.warn(
                f"channel {name!r}: {dropped} duplicate-timestamp message(s) dropped, "
                "keeping the first in file order",
                stacklevel=2,
            )
        channels[name] = Channel(name, deduped[0].kind, tuple(deduped))
    return Recording(channels)


def dump_recording_jsonl(rec: Recording) -> str:
    """Serialize a recording as JSONL, globally sorted by (t_ns, channel)."""
    rows = []
    for name in sorted(rec.channels):
        for m in rec.channels[name].messages:
            rows.append((m.t_ns, name, m))
    lines = []
    for _, _, m in sorted(rows, key=lambda r: (r[0], r[1])):
        lines.append(
            json.dumps(
                {"channel": m.channel, "t_ns": m.t_ns, "kind": m.kind.value, "payload": m.payload},
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def align_recording(rec: Recording) -> AlignedRecording:
    """Align all channels onto the reference channel's timestamp grid.

    The reference channel is the one with the most messages (ties broken by
    lexicographically smallest name). For each reference timestamp t_i, a
    target channel contributes the last of its messages with timestamp in
    [t_i, t_{i+1}), retimed to t_i. Reference timestamps where a target has
    no such message receive a copy of the target's most recent earlier
    message. Leading reference timestamps for which some channel has no
    message at or before the next reference tick are dropped; messages after
    the final reference timestamp are never aligned.
    """
    for name, ch in rec.channels.items():
        if not ch.messages:
            raise AlignmentError(f"channel {name!r} has no messages")
    ref = min(rec.channels.values(), key=lambda c: (-len(c.messages), c.name))
    ref_times = sorted({m.t_ns for m in ref.messages})
    n = len(ref_times)

    slotted: dict[str, list[Message | None]] = {}
    start = 0
    for name in sorted(rec.channels):
        slots: list[Message | None] = [None] * n
        prior: Message | None = None
        for m in rec.channels[name].messages:
            if m.t_ns < ref_times[0]:
                prior = m
                continue
            if m.t_ns > ref_times[-1]:
                continue
            slots[bisect_right(ref_times, m.t_ns) - 1] = m
        held = prior
        first = None
        for i in range(n):
            if slots[i] is None:
                slots[i] = held
            else:
                held = slots[i]
            if first is None and slots[i] is not None:
                first = i
        if first is None:
            raise AlignmentError(f"no alignable frames: channel {name!r} never overlaps the reference")
        start = max(start, first)
        slotted[name] = slots

    frames = []
    for i in range(start, n):
        t = ref_times[i]
        frames.append(Frame(t, {name: slotted[name][i].retimed(t) for name in slotted}))
    if not frames:
        raise AlignmentError("no alignable frames")
    return AlignedRecording(tuple(frames), tuple(sorted(rec.channels)))


def slice_recording(ar: AlignedRecording, start_idx: int, end_idx: int) -> AlignedRecording:
    """Contiguous frame window [start_idx, end_idx], both ends inclusive."""
    if not (0 <= start_idx <= end_idx < len(ar.frames)):
        raise ValueError(
            f"slice [{start_idx}, {end_idx}] out of range for {len(ar.frames)} frames"
        )
    return AlignedRecording(ar.frames[start_idx : end_idx + 1], ar.channel_names)
