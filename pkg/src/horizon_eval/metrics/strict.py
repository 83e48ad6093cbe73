"""
Whole-sequence metrics: DetF1, IDF1 (IDR/IDP), ATA (ATR/ATP) and a
reference MOTA with identity-switch counting.

MOTA here is a reconstruction of CLEAR-MOT for comparative analysis, not an
official reimplementation: a pair is kept from the previous frame while it
still overlaps, remaining boxes are matched by maximum cardinality, and a
switch is counted against the most recent earlier partner of each gt track.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from horizon_eval.core.base import window_accumulator
from horizon_eval.core.model import Matching, MetricAccumulator, Sequence, optional_ratio, ratio
from horizon_eval.metrics.assign import max_weight_matching
from horizon_eval.metrics.overlap import OverlapSeries, match_frame

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionResult:
    accumulator: MetricAccumulator
    det_tp: int
    det_fn: int
    det_fp: int
    per_frame_tp: Tuple[int, ...]

    @property
    def det_f1(self) -> float:
        return self.accumulator.value()


@dataclass(frozen=True)
class IdentityResult:
    idf1: float
    idr: float
    idp: float
    idtp: float
    accumulator: MetricAccumulator
    matching: Matching


@dataclass(frozen=True)
class TrackAccuracyResult:
    ata: float
    atr: float
    atp: float
    track_tp: float
    accumulator: MetricAccumulator
    matching: Matching


@dataclass(frozen=True)
class MotaResult:
    mota: float
    id_switches: int
    det_tp: int
    det_fn: int
    det_fp: int
    # numerator FN + FP + IDSw over denominator N, i.e. 1 - MOTA
    error_accumulator: MetricAccumulator


@dataclass(frozen=True)
class StrictMetrics:
    det_f1: float
    idf1: float
    idr: float
    idp: float
    ata: float
    atr: float
    atp: float
    idtp: float
    track_tp: float
    mota: float
    id_switches: int
    det_tp: int
    det_fn: int
    det_fp: int
    num_gt_tracks: int
    num_pred_tracks: int
    num_gt_boxes: int
    num_pred_boxes: int
    det_f1_acc: MetricAccumulator
    idf1_acc: MetricAccumulator
    ata_acc: MetricAccumulator
    mota_error_acc: MetricAccumulator

    def accumulators(self) -> Dict[str, MetricAccumulator]:
        return {
            "det_f1": self.det_f1_acc,
            "idf1": self.idf1_acc,
            "ata": self.ata_acc,
            "mota_error": self.mota_error_acc,
        }


def det_f1(s: OverlapSeries, seq: Sequence) -> DetectionResult:
    """Per-frame maximum-cardinality detection F1."""
    per_frame = [len(match_frame(s.entries(t))) for t in range(1, s.num_frames + 1)]
    gt_counts = np.diff(s.gt_presence_prefix, axis=0).sum(axis=1)
    pred_counts = np.diff(s.pred_presence_prefix, axis=0).sum(axis=1)
    masses = (gt_counts + pred_counts).tolist()
    det_tp = sum(per_frame)
    N, N_hat = seq.gt.num_boxes, seq.pred.num_boxes
    return DetectionResult(
        accumulator=window_accumulator(per_frame, masses, s.num_frames),
        det_tp=det_tp,
        det_fn=N - det_tp,
        det_fp=N_hat - det_tp,
        per_frame_tp=tuple(per_frame),
    )


def idf1(s: OverlapSeries, seq: Sequence) -> IdentityResult:
    matching = max_weight_matching(s.overlap_matrix())
    idtp = matching.objective
    N, N_hat = seq.gt.num_boxes, seq.pred.num_boxes
    acc = MetricAccumulator(idtp, (N + N_hat) / 2)
    return IdentityResult(
        idf1=acc.value(),
        idr=ratio(idtp, N),
        idp=ratio(idtp, N_hat),
        idtp=idtp,
        accumulator=acc,
        matching=matching,
    )


def temporal_iou_matrix(overlaps: np.ndarray, unions: np.ndarray) -> np.ndarray:
    """Q = B / |V_i u V_j| with 0 where the pair never overlaps."""
    return np.divide(overlaps, unions, out=np.zeros_like(overlaps, dtype=np.float64), where=overlaps > 0)


def ata(s: OverlapSeries, seq: Sequence) -> TrackAccuracyResult:
    Q = temporal_iou_matrix(s.overlap_matrix(), s.union_matrix())
    matching = max_weight_matching(Q)
    track_tp = matching.objective
    K, K_hat = seq.gt.num_tracks, seq.pred.num_tracks
    acc = MetricAccumulator(track_tp, (K + K_hat) / 2)
    return TrackAccuracyResult(
        ata=acc.value(),
        atr=ratio(track_tp, K),
        atp=ratio(track_tp, K_hat),
        track_tp=track_tp,
        accumulator=acc,
        matching=matching,
    )


def mota(s: OverlapSeries, seq: Sequence) -> MotaResult:
    previous: Dict[int, int] = {}
    last_partner: Dict[int, int] = {}
    switches = 0
    det_tp = 0
    for t in range(1, s.num_frames + 1):
        entries = s.entries(t)
        overlapping = {(i, j) for i, j, _ in entries}
        kept = [(i, j) for i, j in sorted(previous.items()) if (i, j) in overlapping]
        fresh = match_frame(
            entries,
            exclude_gt=[i for i, _ in kept],
            exclude_pred=[j for _, j in kept],
        )
        current = sorted(kept + list(fresh.pairs))
        for i, j in current:
            if i in last_partner and last_partner[i] != j:
                switches += 1
            last_partner[i] = j
        det_tp += len(current)
        previous = dict(current)

    N, N_hat = seq.gt.num_boxes, seq.pred.num_boxes
    det_fn, det_fp = N - det_tp, N_hat - det_tp
    errors = MetricAccumulator(float(det_fn + det_fp + switches), float(N))
    if N == 0:
        log.debug("%s: no ground-truth boxes, MOTA reported as 0", seq.name)
        value = 0.0
    else:
        value = 1.0 - errors.value()
    return MotaResult(
        mota=value,
        id_switches=switches,
        det_tp=det_tp,
        det_fn=det_fn,
        det_fp=det_fp,
        error_accumulator=errors,
    )


def association_fraction(tracking: float, detection: float) -> Optional[float]:
    """Tracking metric as a fraction of DetF1; None when DetF1 is 0."""
    return optional_ratio(tracking, detection)


def evaluate_strict(s: OverlapSeries, seq: Sequence) -> StrictMetrics:
    det = det_f1(s, seq)
    ident = idf1(s, seq)
    track = ata(s, seq)
    clear = mota(s, seq)
    return StrictMetrics(
        det_f1=det.det_f1,
        idf1=ident.idf1,
        idr=ident.idr,
        idp=ident.idp,
        ata=track.ata,
        atr=track.atr,
        atp=track.atp,
        idtp=ident.idtp,
        track_tp=track.track_tp,
        mota=clear.mota,
        id_switches=clear.id_switches,
        det_tp=det.det_tp,
        det_fn=det.det_fn,
        det_fp=det.det_fp,
        num_gt_tracks=seq.gt.num_tracks,
        num_pred_tracks=seq.pred.num_tracks,
        num_gt_boxes=seq.gt.num_boxes,
        num_pred_boxes=seq.pred.num_boxes,
        det_f1_acc=det.accumulator,
        idf1_acc=ident.accumulator,
        ata_acc=track.accumulator,
        mota_error_acc=clear.error_accumulator,
    )
