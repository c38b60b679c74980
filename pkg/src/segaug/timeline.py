"""Frame-index to document-time mapping shared by probabilities and emissions."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence


class TimelineError(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    """A contiguous run of frames starting at ``doc_start_s`` in document time."""

    first_frame: int
    frame_count: int
    doc_start_s: float

    def to_json(self) -> dict:
        return {
            "first_frame": self.first_frame,
            "frame_count": self.frame_count,
            "doc_start_s": self.doc_start_s,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "Block":
        return cls(int(rec["first_frame"]), int(rec["frame_count"]), float(rec["doc_start_s"]))


class Timeline:
    """Ordered, contiguous list of blocks with a fixed frame period."""

    def __init__(self, blocks: Sequence[Block], frame_period_s: float):
        self.blocks = list(blocks)
        self.frame_period_s = float(frame_period_s)
        validate_blocks(self.blocks, self.frame_period_s)
        self._firsts = [b.first_frame for b in self.blocks]

    @classmethod
    def single(cls, n_frames: int, frame_period_s: float, doc_start_s: float = 0.0) -> "Timeline":
        return cls([Block(0, n_frames, doc_start_s)], frame_period_s)

    @property
    def n_frames(self) -> int:
        return sum(b.frame_count for b in self.blocks)

    def block_of(self, frame: int) -> Block:
        i = bisect.bisect_right(self._firsts, frame) - 1
        if i < 0 or frame >= self.blocks[i].first_frame + self.blocks[i].frame_count:
            raise TimelineError(f"frame {frame} is outside every block")
        return self.blocks[i]

    def time_of(self, frame: int) -> float:
        return frame_to_doc_time(frame, self)

    def end_time_of(self, last_frame: int) -> float:
        """Document time at which frame ``last_frame`` ends."""
        return frame_to_doc_time(last_frame, self) + self.frame_period_s

    def __eq__(self, other):
        return (
            isinstance(other, Timeline)
            and self.blocks == other.blocks
            and self.frame_period_s == other.frame_period_s
        )

    def __repr__(self):
        return f"Timeline({self.blocks!r}, frame_period_s={self.frame_period_s})"


def validate_blocks(blocks: Sequence[Block], frame_period_s: float) -> None:
    if frame_period_s <= 0:
        raise TimelineError("frame_period_s must be positive")
    expected_first = 0
    prev_end = None
    for i, b in enumerate(blocks):
        if b.first_frame != expected_first:
            raise TimelineError(f"block {i} starts at frame {b.first_frame}, expected {expected_first}")
        if b.frame_count < 0:
            raise TimelineError(f"block {i} has negative frame_count")
        if prev_end is not None and b.doc_start_s < prev_end - 1e-9:
            raise TimelineError(f"block {i} overlaps the previous block in document time")
        if prev_end is not None and i > 0 and b.doc_start_s <= blocks[i - 1].doc_start_s:
            raise TimelineError(f"block {i} doc_start_s is not strictly increasing")
        expected_first += b.frame_count
        prev_end = b.doc_start_s + b.frame_count * frame_period_s


def frame_to_doc_time(frame: int, timeline: Timeline) -> float:
    """Start time in document seconds of ``frame``."""
    block = timeline.block_of(frame)
    return block.doc_start_s + (frame - block.first_frame) * timeline.frame_period_s
