"""Recording reduction: smoothing, segmentation, clipping, deduplication.

A vectorized recording is reduced in four steps: a sliding-window majority
vote removes one-off detection glitches, run-length segmentation groups
consecutive identical vectors into scenario segments, each segment is clipped
to its first clip_n frames, and segments whose vector already occurred are
dropped. Segment ids are assigned chronologically before deduplication so
surviving ids still order segments by time.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

from .recording import AlignedRecording
from .schema import FrameVector


@dataclass(frozen=True)
class ReductionConfig:
    """Tunables for the reduction pipeline."""

    window_w: int = 5
    clip_n: int = 45
    warmup_frames: int = 15

    def __post_init__(self) -> None:
        if self.window_w < 1 or self.window_w % 2 == 0:
            raise ValueError(f"window_w must be odd and positive, got {self.window_w}")
        if self.clip_n < 1:
            raise ValueError(f"clip_n must be at least 1, got {self.clip_n}")
        if self.warmup_frames < 0:
            raise ValueError(f"warmup_frames must be non-negative, got {self.warmup_frames}")


@dataclass(frozen=True)
class Segment:
    """A run of frames sharing one vector. Indices are inclusive."""

    id: int
    start_idx: int
    end_idx: int
    vector: FrameVector
    warmup_start_idx: int

    def __post_init__(self) -> None:
        if not (0 <= self.warmup_start_idx <= self.start_idx <= self.end_idx):
            raise ValueError(
                f"segment {self.id}: bad indices "
                f"({self.warmup_start_idx}, {self.start_idx}, {self.end_idx})"
            )

    @property
    def length(self) -> int:
        return self.end_idx - self.start_idx + 1

    @property
    def length_with_warmup(self) -> int:
        return self.end_idx - self.warmup_start_idx + 1


def smooth(vectors: Sequence[FrameVector], w: int) -> list[FrameVector]:
    """Majority-vote each frame against a w-wide window of whole vectors.

    Windows are centered and shifted inward at the edges so every window has
    exactly min(w, N) elements. The most frequent vector in the window wins;
    if the top count is tied, the original center vector is kept. Frame
    timestamps are preserved.
    """
    if w < 1 or w % 2 == 0:
        raise ValueError(f"window width must be odd and positive, got {w}")
    n = len(vectors)
    if n == 0 or w == 1:
        return list(vectors)
    width = min(w, n)
    half = w // 2
    out = []
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        counts = Counter(v.values for v in vectors[lo : lo + width])
        top = counts.most_common()
        if len(top) > 1 and top[0][1] == top[1][1]:
            winner = vectors[i].values
        else:
            winner = top[0][0]
        out.append(FrameVector(winner, vectors[i].t_ns))
    return out


def segment(vectors: Sequence[FrameVector]) -> list[Segment]:
    """Run-length encode the stream into maximal constant-vector segments."""
    if not vectors:
        return []
    segments = []
    start = 0
    for i in range(1, len(vectors)):
        if vectors[i].values != vectors[start].values:
            segments.append(
                Segment(len(segments), start, i - 1, vectors[start], warmup_start_idx=start)
            )
            start = i
    segments.append(
        Segment(len(segments), start, len(vectors) - 1, vectors[start], warmup_start_idx=start)
    )
    return segments


def clip(segments: Sequence[Segment], n: int) -> list[Segment]:
    """Keep only the first n frames of each segment."""
    if n < 1:
        raise ValueError(f"clip length must be at least 1, got {n}")
    return [
        s if s.length <= n else replace(s, end_idx=s.start_idx + n - 1) for s in segments
    ]


def dedup(segments: Sequence[Segment]) -> list[Segment]:
    """Drop segments whose vector already occurred, keeping first occurrences."""
    seen: set[tuple[int, ...]] = set()
    kept = []
    for s in segments:
        if s.vector.values in seen:
            continue
        seen.add(s.vector.values)
        kept.append(s)
    return kept


def reduce_vectors(
    vectors: Sequence[FrameVector], cfg: ReductionConfig
) -> tuple[list[Segment], list[FrameVector]]:
    """Smooth, segment, clip, and dedup a vector stream.

    Returns the surviving segments (warm-up indices attached) and their
    vectors in the same order.
    """
    smoothed = smooth(vectors, cfg.window_w)
    segments = dedup(clip(segment(smoothed), cfg.clip_n))
    segments = [
        replace(s, warmup_start_idx=max(0, s.start_idx - cfg.warmup_frames)) for s in segments
    ]
    return segments, [s.vector for s in segments]


def reduce_recording(
    ar: AlignedRecording, vectors: Sequence[FrameVector], cfg: ReductionConfig
) -> tuple[list[Segment], list[FrameVector]]:
    """Reduce an aligned recording given its per-frame vectors."""
    if len(vectors) != len(ar.frames):
        raise ValueError(
            f"{len(vectors)} vectors for {len(ar.frames)} frames; one vector per frame required"
        )
    return reduce_vectors(vectors, cfg)


def segments_to_manifest(
    segments: Sequence[Segment],
    cfg: ReductionConfig,
    frame_times_ns: Sequence[int],
    module: str | None = None,
) -> dict[str, Any]:
    """Build the segments.json document."""
    config: dict[str, Any] = {
        "window_w": cfg.window_w,
        "clip_n": cfg.clip_n,
        "warmup_frames": cfg.warmup_frames,
    }
    if module is not None:
        config["module"] = module
    return {
        "config": config,
        "segments": [
            {
                "id": s.id,
                "start_idx": s.start_idx,
                "end_idx": s.end_idx,
                "warmup_start_idx": s.warmup_start_idx,
                "start_t_ns": frame_times_ns[s.start_idx],
                "end_t_ns": frame_times_ns[s.end_idx],
                "vector": list(s.vector.values),
            }
            for s in segments
        ],
    }


def segments_from_manifest(doc: Mapping[str, Any]) -> tuple[list[Segment], ReductionConfig]:
    """Parse a segments.json document back into segments and their config."""
    try:
        cfg = ReductionConfig(
            window_w=doc["config"]["window_w"],
            clip_n=doc["config"]["clip_n"],
            warmup_frames=doc["config"]["warmup_frames"],
        )
        segments = [
            Segment(
                id=row["id"],
                start_idx=row["start_idx"],
                end_idx=row["end_idx"],
                vector=FrameVector(tuple(row["vector"]), row["start_t_ns"]),
                warmup_start_idx=row["warmup_start_idx"],
            )
            for row in doc["segments"]
        ]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"invalid segments manifest: {exc}") from exc
    return segments, cfg
