"""
Turn parsed MOTChallenge rows into a Sequence: class, visibility and score
filtering, grouping by id, and automatic score-threshold selection.
"""

import bisect
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence as Seq, Tuple, Union

from horizon_eval.core.errors import ContractError
from horizon_eval.core.model import Role, Sequence, Track, TrackSet, ratio
from horizon_eval.ingest.mot import RawEntry
from horizon_eval.metrics.overlap import build_overlap_series, match_frame

log = logging.getLogger(__name__)

AUTO = "auto"

ScoreThreshold = Union[float, Mapping[int, float], str]


@dataclass(frozen=True)
class IngestConfig:
    iou_threshold: float = 0.5
    gt_classes: FrozenSet[int] = frozenset({1})
    min_visibility: float = 0.0
    # a single value, a per-class mapping, or "auto"
    score_threshold: ScoreThreshold = 0.0
    fps_override: Optional[float] = None
    filter_pred_classes: bool = False

    def __post_init__(self):
        if not (0 < self.iou_threshold <= 1):
            raise ContractError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        object.__setattr__(self, "gt_classes", frozenset(self.gt_classes))
        if isinstance(self.score_threshold, str) and self.score_threshold != AUTO:
            raise ContractError(f"score_threshold must be a number, a mapping or 'auto', got {self.score_threshold!r}")

    def for_class(self, class_id: int) -> "IngestConfig":
        """Copy restricted to a single class, with a per-class threshold resolved."""
        threshold = self.score_threshold
        if isinstance(threshold, Mapping):
            threshold = threshold.get(class_id, 0.0)
        return replace(self, gt_classes=frozenset({class_id}), score_threshold=threshold)


def _group(entries: Iterable[RawEntry], role: Role) -> TrackSet:
    boxes: Dict[int, Dict[int, object]] = defaultdict(dict)
    for e in entries:
        boxes[e.id][e.frame] = e.box
    return TrackSet(tuple(Track(tid, frames) for tid, frames in sorted(boxes.items())), role)


def filter_gt(entries: Iterable[RawEntry], cfg: IngestConfig) -> List[RawEntry]:
    return [e for e in entries if e.class_id in cfg.gt_classes and e.visibility >= cfg.min_visibility]


def filter_pred_classes(entries: Iterable[RawEntry], cfg: IngestConfig) -> List[RawEntry]:
    if not cfg.filter_pred_classes:
        return list(entries)
    return [e for e in entries if e.class_id in cfg.gt_classes]


def _threshold_for(cfg: IngestConfig) -> float:
    threshold = cfg.score_threshold
    if isinstance(threshold, Mapping):
        if len(cfg.gt_classes) != 1:
            raise ContractError("per-class score thresholds need a single-class config (see for_class)")
        (class_id,) = cfg.gt_classes
        return float(threshold.get(class_id, 0.0))
    return float(threshold)


def build_sequence(
    name: str,
    gt_entries: Seq[RawEntry],
    pred_entries: Seq[RawEntry],
    cfg: IngestConfig,
    fps: float,
    num_frames: Optional[int] = None,
) -> Sequence:
    """
    Filter and group rows into a Sequence.

    T is the last frame of any surviving box unless `num_frames` (seqLength
    metadata) is given. An all-empty input yields a T = 0 sequence.
    """
    if not fps > 0:
        raise ContractError(f"fps must be positive, got {fps}")
    gt_kept = filter_gt(gt_entries, cfg)
    pred_kept = filter_pred_classes(pred_entries, cfg)

    if cfg.score_threshold == AUTO:
        threshold = select_score_threshold(gt_kept, pred_kept, cfg)
        log.info("%s: selected score threshold %.4f", name, threshold)
    else:
        threshold = _threshold_for(cfg)
    pred_kept = [e for e in pred_kept if e.conf >= threshold]

    gt = _group(gt_kept, Role.GT)
    pred = _group(pred_kept, Role.PRED)
    T = num_frames if num_frames is not None else max(gt.max_frame, pred.max_frame)
    if T == 0:
        log.warning("%s: no ground-truth or predicted boxes survive filtering", name)
    return Sequence(name=name, num_frames=T, fps=fps, gt=gt, pred=pred)


@dataclass(frozen=True)
class _DetectionSteps:
    """Per-frame detection counts of one sequence as step functions of the threshold."""

    steps: List[Tuple[List[float], List[int]]]
    confidences: List[float]
    num_gt: int


def _detection_steps(gt_entries: Seq[RawEntry], pred_entries: Seq[RawEntry], cfg: IngestConfig) -> _DetectionSteps:
    gt_kept = filter_gt(gt_entries, cfg)
    pred_kept = filter_pred_classes(pred_entries, cfg)
    relaxed = replace(cfg, score_threshold=float("-inf"))
    seq = build_sequence("threshold-search", gt_kept, pred_kept, relaxed, fps=1.0)
    series = build_overlap_series(seq, cfg.iou_threshold)

    index_of = {track.external_id: j for j, track in enumerate(seq.pred)}
    conf = {(index_of[e.id], e.frame): e.conf for e in pred_kept}

    # Per frame the detection count only changes at the confidences of that
    # frame's overlapping boxes.
    steps = []
    for t in range(1, series.num_frames + 1):
        entries = series.entries(t)
        if not entries:
            continue
        levels = sorted({conf[(j, t)] for _, j, _ in entries})
        counts = [len(match_frame([x for x in entries if conf[(x[1], t)] >= level])) for level in levels]
        steps.append((levels, counts))
    return _DetectionSteps(steps, [e.conf for e in pred_kept], seq.gt.num_boxes)


def select_dataset_threshold(
    samples: Seq[Tuple[Seq[RawEntry], Seq[RawEntry]]],
    cfg: IngestConfig,
    candidates: Optional[Seq[float]] = None,
) -> float:
    """
    One threshold for a set of (gt rows, prediction rows) sequences: the
    candidate whose surviving predictions maximise DetF1 over all of them.

    Ties go to the larger threshold. Candidates default to the distinct
    confidences present. Only boxes with conf >= threshold survive.
    """
    if candidates is None:
        candidates = sorted({e.conf for _, pred in samples for e in filter_pred_classes(pred, cfg)})
        if not candidates:
            return 0.0
    if not candidates:
        raise ContractError("select_score_threshold needs at least one candidate")

    parts = [_detection_steps(gt, pred, cfg) for gt, pred in samples]
    steps = [step for part in parts for step in part.steps]
    all_conf = sorted(c for part in parts for c in part.confidences)
    num_gt = sum(part.num_gt for part in parts)

    best_threshold, best_score = None, -1.0
    for threshold in sorted(set(candidates), reverse=True):
        tp = 0
        for levels, counts in steps:
            k = bisect.bisect_left(levels, threshold)
            if k < len(levels):
                tp += counts[k]
        num_pred = len(all_conf) - bisect.bisect_left(all_conf, threshold)
        score = ratio(tp, (num_gt + num_pred) / 2)
        if score > best_score:
            best_threshold, best_score = threshold, score
    log.debug("best score threshold %.4f with DetF1 %.6f over %d sequences", best_threshold, best_score, len(samples))
    return float(best_threshold)


def select_score_threshold(
    gt_entries: Seq[RawEntry],
    pred_entries: Seq[RawEntry],
    cfg: IngestConfig,
    candidates: Optional[Seq[float]] = None,
) -> float:
    """Threshold maximising DetF1 on a single sequence."""
    return select_dataset_threshold([(gt_entries, pred_entries)], cfg, candidates)
