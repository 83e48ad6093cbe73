"""
Domain types shared by every horizon-eval module.

No I/O and no algorithms live here. All types are immutable after
construction; frame indices are 1-based everywhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

from horizon_eval.core.errors import ContractError, FormatError


class Role(str, enum.Enum):
    GT = "gt"
    PRED = "pred"

    def other(self) -> "Role":
        return Role.PRED if self is Role.GT else Role.GT


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in pixels (MOTChallenge left/top/width/height)."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ContractError(f"box must have positive size, got {self.width}x{self.height}")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return self.width * self.height

    def translated(self, dx: float, dy: float) -> "Box":
        return Box(self.left + dx, self.top + dy, self.width, self.height)


@dataclass(frozen=True, eq=False)
class Track:
    """One track: a label and its boxes keyed by frame. The key set is the visibility set."""

    external_id: int
    boxes: Mapping[int, Box]

    def __post_init__(self):
        if not self.boxes:
            raise ContractError(f"track {self.external_id} has no boxes")
        ordered = dict(sorted(self.boxes.items()))
        for frame in ordered:
            if frame < 1:
                raise ContractError(f"track {self.external_id}: frame {frame} < 1")
        object.__setattr__(self, "boxes", MappingProxyType(ordered))

    @property
    def frames(self) -> Tuple[int, ...]:
        return tuple(self.boxes.keys())

    @property
    def first_frame(self) -> int:
        return next(iter(self.boxes))

    @property
    def last_frame(self) -> int:
        return next(reversed(self.boxes.keys()))

    def __len__(self) -> int:
        return len(self.boxes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Track):
            return NotImplemented
        return self.external_id == other.external_id and dict(self.boxes) == dict(other.boxes)

    def __hash__(self) -> int:
        return hash((self.external_id, tuple(self.boxes.items())))


@dataclass(frozen=True)
class TrackSet:
    """All tracks of one role in one sequence; list position is the track index."""

    tracks: Tuple[Track, ...]
    role: Role

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        seen = set()
        for track in self.tracks:
            if track.external_id in seen:
                raise FormatError(f"duplicate {self.role.value} track id {track.external_id}")
            seen.add(track.external_id)

    @classmethod
    def empty(cls, role: Role) -> "TrackSet":
        return cls((), role)

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self) -> Iterator[Track]:
        return iter(self.tracks)

    def __getitem__(self, index: int) -> Track:
        return self.tracks[index]

    @property
    def num_tracks(self) -> int:
        return len(self.tracks)

    @property
    def num_boxes(self) -> int:
        return sum(len(t) for t in self.tracks)

    @property
    def max_frame(self) -> int:
        return max((t.last_frame for t in self.tracks), default=0)

    def ids(self) -> Tuple[int, ...]:
        return tuple(t.external_id for t in self.tracks)

    def with_role(self, role: Role) -> "TrackSet":
        return TrackSet(self.tracks, role)


@dataclass(frozen=True)
class Sequence:
    """One video: T frames, its frame rate and both track sets."""

    name: str
    num_frames: int
    fps: float
    gt: TrackSet
    pred: TrackSet

    def __post_init__(self):
        if self.num_frames < 0:
            raise ContractError(f"{self.name}: negative frame count {self.num_frames}")
        if not self.fps > 0:
            raise ContractError(f"{self.name}: fps must be positive, got {self.fps}")
        for tracks in (self.gt, self.pred):
            if tracks.max_frame > self.num_frames:
                raise FormatError(
                    f"{self.name}: {tracks.role.value} frame {tracks.max_frame} "
                    f"exceeds sequence length {self.num_frames}"
                )

    @property
    def is_empty(self) -> bool:
        return self.num_frames == 0

    def swapped(self) -> "Sequence":
        """Exchange the roles of ground truth and predictions."""
        return Sequence(
            name=self.name,
            num_frames=self.num_frames,
            fps=self.fps,
            gt=self.pred.with_role(Role.GT),
            pred=self.gt.with_role(Role.PRED),
        )


@dataclass(frozen=True)
class Matching:
    """One-to-one correspondence between gt indices i and pred indices j."""

    pairs: Tuple[Tuple[int, int], ...]
    objective: float = 0.0

    def __post_init__(self):
        pairs = tuple(sorted((int(i), int(j)) for i, j in self.pairs))
        rows = [i for i, _ in pairs]
        cols = [j for _, j in pairs]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise ContractError(f"matching is not one-to-one: {pairs}")
        if self.objective < 0:
            raise ContractError(f"negative matching objective {self.objective}")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def gt_to_pred(self) -> Dict[int, int]:
        return dict(self.pairs)

    def pred_to_gt(self) -> Dict[int, int]:
        return {j: i for i, j in self.pairs}


@dataclass(frozen=True)
class MetricAccumulator:
    """Numerator/denominator pair; ratios are only formed at the very end."""

    numerator: float = 0.0
    denominator: float = 0.0

    def value(self) -> float:
        if self.denominator > 0:
            return self.numerator / self.denominator
        return 0.0

    def __add__(self, other: "MetricAccumulator") -> "MetricAccumulator":
        return accumulator_merge(self, other)

    @classmethod
    def total(cls, items: Iterable["MetricAccumulator"]) -> "MetricAccumulator":
        """Exactly rounded sum of many accumulators, independent of their order."""
        items = list(items)
        return cls(
            math.fsum(a.numerator for a in items),
            math.fsum(a.denominator for a in items),
        )

    def to_dict(self, decimals: int = 6) -> Dict[str, float]:
        return {
            "value": round(self.value(), decimals),
            "numerator": self.numerator,
            "denominator": self.denominator,
        }


def accumulator_merge(a: MetricAccumulator, b: MetricAccumulator) -> MetricAccumulator:
    return MetricAccumulator(a.numerator + b.numerator, a.denominator + b.denominator)


def ratio(numerator: float, denominator: float) -> float:
    """numerator / denominator, with 0/0 defined as 0."""
    return numerator / denominator if denominator > 0 else 0.0


def optional_ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator > 0 else None
