"""
Perturbations that turn a ground-truth TrackSet into a synthetic prediction.

Each perturbation injects one kind of error: a split, a merge, missed boxes,
spurious tracks or localisation noise. The result depends only on the
input, the perturbation list and the seed.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence as Seq, Tuple

import numpy as np

from horizon_eval.core.errors import ContractError
from horizon_eval.core.model import Box, Role, Track, TrackSet

log = logging.getLogger(__name__)

# spurious boxes are placed this far to the right of every ground-truth box
SPURIOUS_MARGIN = 1000.0


class PerturbationKind(str, enum.Enum):
    SPLIT = "split-at-frame"
    MERGE = "merge-tracks"
    DROP = "drop-frames"
    SPURIOUS = "add-spurious"
    JITTER = "jitter-boxes"


@dataclass(frozen=True)
class Perturbation:
    kind: PerturbationKind
    track_ids: Tuple[int, ...] = ()
    frame: Optional[int] = None       # split point
    frames: Tuple[int, ...] = ()      # explicit frames to drop
    rate: float = 0.0                 # fraction of boxes to drop
    count: int = 0                    # spurious tracks to add
    length: int = 0                   # frames per spurious track
    magnitude: float = 0.0            # jitter, pixels

    def __post_init__(self):
        object.__setattr__(self, "kind", PerturbationKind(self.kind))
        object.__setattr__(self, "track_ids", tuple(self.track_ids))
        object.__setattr__(self, "frames", tuple(self.frames))
        if not 0.0 <= self.rate <= 1.0:
            raise ContractError(f"drop rate must be in [0, 1], got {self.rate}")
        if self.magnitude < 0:
            raise ContractError(f"jitter magnitude must be >= 0, got {self.magnitude}")

    @classmethod
    def split(cls, track_id: int, frame: int) -> "Perturbation":
        return cls(PerturbationKind.SPLIT, track_ids=(track_id,), frame=frame)

    @classmethod
    def merge(cls, first: int, second: int) -> "Perturbation":
        return cls(PerturbationKind.MERGE, track_ids=(first, second))

    @classmethod
    def drop(cls, track_ids: Seq[int] = (), frames: Seq[int] = (), rate: float = 0.0) -> "Perturbation":
        """Drop `frames` (or all frames when neither frames nor rate is given) or a random `rate`."""
        return cls(PerturbationKind.DROP, track_ids=tuple(track_ids), frames=tuple(frames), rate=rate)

    @classmethod
    def spurious(cls, count: int, length: int) -> "Perturbation":
        return cls(PerturbationKind.SPURIOUS, count=count, length=length)

    @classmethod
    def jitter(cls, magnitude: float, track_ids: Seq[int] = ()) -> "Perturbation":
        return cls(PerturbationKind.JITTER, track_ids=tuple(track_ids), magnitude=magnitude)

    @classmethod
    def from_dict(cls, data: Dict) -> "Perturbation":
        """Build from a catalog entry: {kind: ..., <parameter>: ...}."""
        data = dict(data)
        kind = PerturbationKind(data.pop("kind"))
        try:
            return cls(kind, **data)
        except TypeError as e:
            raise ContractError(f"bad parameters for {kind.value}: {e}") from None


def _require(tracks: Dict[int, Dict[int, Box]], track_id: int, kind: PerturbationKind) -> Dict[int, Box]:
    if track_id not in tracks:
        raise ContractError(f"{kind.value}: no track with id {track_id}")
    return tracks[track_id]


def _selected(tracks: Dict[int, Dict[int, Box]], p: Perturbation) -> List[int]:
    if not p.track_ids:
        return sorted(tracks)
    for track_id in p.track_ids:
        _require(tracks, track_id, p.kind)
    return list(p.track_ids)


def _split(tracks, p: Perturbation, rng) -> None:
    (track_id,) = p.track_ids
    boxes = _require(tracks, track_id, p.kind)
    if p.frame is None:
        raise ContractError("split-at-frame needs a frame")
    tail = {f: b for f, b in boxes.items() if f >= p.frame}
    head = {f: b for f, b in boxes.items() if f < p.frame}
    if not head or not tail:
        log.debug("split of track %d at frame %d leaves it whole", track_id, p.frame)
        return
    tracks[track_id] = head
    tracks[max(tracks) + 1] = tail


def _merge(tracks, p: Perturbation, rng) -> None:
    if len(p.track_ids) != 2:
        raise ContractError("merge-tracks needs exactly two track ids")
    first, second = p.track_ids
    a = _require(tracks, first, p.kind)
    b = _require(tracks, second, p.kind)
    shared = sorted(set(a) & set(b))
    if shared:
        raise ContractError(f"cannot merge tracks {first} and {second}: both present in frames {shared[:5]}")
    a.update(b)
    del tracks[second]


def _drop(tracks, p: Perturbation, rng) -> None:
    for track_id in _selected(tracks, p):
        boxes = tracks[track_id]
        frames = sorted(boxes)
        if p.frames:
            doomed = set(p.frames)
        elif p.rate > 0:
            k = int(round(p.rate * len(frames)))
            doomed = set(rng.choice(frames, size=k, replace=False).tolist()) if k else set()
        else:
            doomed = set(frames)
        for f in doomed:
            boxes.pop(f, None)
        if not boxes:
            del tracks[track_id]


def _spurious(tracks, p: Perturbation, rng, num_frames: int, far_right: float) -> None:
    if p.count <= 0:
        return
    if num_frames <= 0:
        raise ContractError("add-spurious needs a non-empty sequence")
    length = max(1, min(p.length or num_frames, num_frames))
    for k in range(p.count):
        start = int(rng.integers(1, num_frames - length + 2))
        box = Box(far_right + k * 2 * SPURIOUS_MARGIN, 0.0, 10.0, 10.0)
        new_id = max(tracks, default=0) + 1
        tracks[new_id] = {f: box for f in range(start, start + length)}


def _jitter(tracks, p: Perturbation, rng) -> None:
    if p.magnitude == 0:
        return
    for track_id in _selected(tracks, p):
        boxes = tracks[track_id]
        for f in sorted(boxes):
            dx, dy = rng.uniform(-p.magnitude, p.magnitude, size=2)
            boxes[f] = boxes[f].translated(float(dx), float(dy))


def apply(gt: TrackSet, perturbations: Seq[Perturbation], seed: int = 0, num_frames: Optional[int] = None) -> TrackSet:
    """Perturbed copy of `gt` as a prediction TrackSet; perturbations apply in order."""
    rng = np.random.default_rng(seed)
    tracks: Dict[int, Dict[int, Box]] = {t.external_id: dict(t.boxes) for t in gt}
    T = num_frames if num_frames is not None else gt.max_frame
    far_right = max((b.right for t in gt for b in t.boxes.values()), default=0.0) + SPURIOUS_MARGIN

    for p in perturbations:
        if p.kind is PerturbationKind.SPLIT:
            _split(tracks, p, rng)
        elif p.kind is PerturbationKind.MERGE:
            _merge(tracks, p, rng)
        elif p.kind is PerturbationKind.DROP:
            _drop(tracks, p, rng)
        elif p.kind is PerturbationKind.SPURIOUS:
            _spurious(tracks, p, rng, T, far_right)
        elif p.kind is PerturbationKind.JITTER:
            _jitter(tracks, p, rng)

    return TrackSet(
        tuple(Track(tid, boxes) for tid, boxes in sorted(tracks.items()) if boxes),
        Role.PRED,
    )
