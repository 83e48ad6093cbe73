"""
Approximate decomposition of ATA / ALTA error into FN, FP, split and merge.

An independent per-frame correspondence C(t) replaces the overlap B(t);
the approximate TrackTP is computed on C and, for each track, the chain of
coverage ratios

    Q~ <= rho_pi <= rho_best <= rho_det <= 1

splits the track's error 1 - Q~ into four gaps: missed frames,
frames given to other tracks (split), the best partner being taken
(merge), and frames where only the partner exists (union gap). The union
gap is divided in proportion to how the partner's extra frames are used.
Precision uses the same chain with roles exchanged and labels swapped.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from horizon_eval.core.base import window_bounds
from horizon_eval.core.model import Matching, MetricAccumulator, Sequence, ratio
from horizon_eval.metrics.assign import max_weight_matching
from horizon_eval.metrics.local import Horizon
from horizon_eval.metrics.overlap import OverlapSeries, match_frame

log = logging.getLogger(__name__)

NO_ERROR_TOLERANCE = 1e-12

# Column order of the per-track mass arrays.
RECALL_FIELDS = ("fn", "split", "merge", "union_fp", "union_merge")
PRECISION_FIELDS = ("fp", "merge", "split", "union_fn", "union_split")


class ErrorType(str, enum.Enum):
    DET_FN = "det_fn"
    DET_FP = "det_fp"
    SPLIT = "split"
    MERGE = "merge"


@dataclass(frozen=True, eq=False)
class FrameCorrespondence:
    """C(t) for every frame, its running sums and per-frame matched flags."""

    series: OverlapSeries
    frames: Tuple[Matching, ...]
    pairs: np.ndarray               # (M, 2) pairs matched in some frame
    pair_prefix: np.ndarray         # (T + 1, M)
    gt_presence: np.ndarray         # (K, T) bool
    pred_presence: np.ndarray       # (K_hat, T) bool
    gt_matched: np.ndarray          # (K, T) bool, gt matched in C(t)
    pred_matched: np.ndarray        # (K_hat, T) bool

    @property
    def num_frames(self) -> int:
        return self.series.num_frames

    @property
    def det_tp(self) -> int:
        return sum(len(m) for m in self.frames)

    def counts(self, a: Optional[int] = None, b: Optional[int] = None) -> np.ndarray:
        """Dense C over [a, b]; the whole sequence by default."""
        s = self.series
        out = np.zeros((s.num_gt, s.num_pred), dtype=np.float64)
        if self.num_frames == 0 or not len(self.pairs):
            return out
        a = 1 if a is None else a
        b = self.num_frames if b is None else b
        out[self.pairs[:, 0], self.pairs[:, 1]] = self.pair_prefix[b] - self.pair_prefix[a - 1]
        return out


def frame_correspondence(s: OverlapSeries, seq: Sequence) -> FrameCorrespondence:
    """Independent maximum-cardinality matching of every frame (IOU tie-break)."""
    T = s.num_frames
    frames = tuple(match_frame(s.entries(t)) for t in range(1, T + 1))
    pair_list = sorted({pair for m in frames for pair in m.pairs})
    column = {pair: c for c, pair in enumerate(pair_list)}
    indicator = np.zeros((T, len(pair_list)), dtype=np.int32)
    gt_matched = np.zeros((s.num_gt, T), dtype=bool)
    pred_matched = np.zeros((s.num_pred, T), dtype=bool)
    for t, matching in enumerate(frames):
        for i, j in matching.pairs:
            indicator[t, column[(i, j)]] = 1
            gt_matched[i, t] = True
            pred_matched[j, t] = True
    pair_prefix = np.zeros((T + 1, len(pair_list)), dtype=np.int32)
    if T:
        pair_prefix[1:] = np.cumsum(indicator, axis=0)
    return FrameCorrespondence(
        series=s,
        frames=frames,
        pairs=np.array(pair_list, dtype=np.intp).reshape(-1, 2),
        pair_prefix=pair_prefix,
        gt_presence=np.diff(s.gt_presence_prefix, axis=0).T.astype(bool),
        pred_presence=np.diff(s.pred_presence_prefix, axis=0).T.astype(bool),
        gt_matched=gt_matched,
        pred_matched=pred_matched,
    )


@dataclass(frozen=True)
class ApproxTrackAccuracy:
    approx_track_tp: float
    approx_ata: float
    approx_atr: float
    approx_atp: float
    matching: Matching  # pi: gt index -> pred index


@dataclass(frozen=True)
class RecallMasses:
    """Error mass of one ground-truth track (sums to 1 - Q~ in the strict case)."""

    track_id: int
    fn: float
    split: float
    merge: float
    union_fp: float
    union_merge: float
    approx_tiou: float

    @property
    def total(self) -> float:
        return math.fsum((self.fn, self.split, self.merge, self.union_fp, self.union_merge))


@dataclass(frozen=True)
class PrecisionMasses:
    """Error mass of one predicted track."""

    track_id: int
    fp: float
    merge: float
    split: float
    union_fn: float
    union_split: float
    approx_tiou: float

    @property
    def total(self) -> float:
        return math.fsum((self.fp, self.merge, self.split, self.union_fn, self.union_split))


@dataclass(frozen=True)
class OverallDecomposition:
    """Error per type: raw share of (K + K_hat) and share of the total error."""

    raw: Dict[str, float]
    fractions: Dict[str, float]
    total_error: float
    no_error: bool
    accumulators: Dict[str, MetricAccumulator]


@dataclass(frozen=True)
class WindowErrors:
    """Error masses of the window centred on frame t."""

    frame: int
    det_fn: float
    det_fp: float
    split: float
    merge: float
    approx_track_tp: float
    num_tracks: int


@dataclass(frozen=True)
class DecompositionReport:
    horizon: Horizon
    frames: Optional[int]
    recall: Tuple[RecallMasses, ...]
    precision: Tuple[PrecisionMasses, ...]
    overall: OverallDecomposition
    approx_atr: float
    approx_atp: float
    approx_ata: float
    approx_acc: MetricAccumulator
    timeline: Tuple[WindowErrors, ...]


@dataclass
class _WindowResult:
    recall: np.ndarray        # (K, 5) in RECALL_FIELDS order
    precision: np.ndarray     # (K_hat, 5) in PRECISION_FIELDS order
    recall_q: np.ndarray      # (K,) Q~ with the assigned partner
    precision_q: np.ndarray   # (K_hat,)
    matching: Matching
    num_gt: int
    num_pred: int


def _chain(counts: np.ndarray, sizes: np.ndarray, partner_counts: np.ndarray, live: np.ndarray):
    """rho_det, rho_best, rho_pi along axis 1 of `counts` for rows with sizes > 0."""
    safe = np.where(live, sizes, 1.0)
    rho_det = np.where(live, counts.sum(axis=1) / safe, 0.0)
    best = counts.max(axis=1) if counts.shape[1] else np.zeros(counts.shape[0])
    rho_best = np.where(live, best / safe, 0.0)
    rho_pi = np.where(live, partner_counts / safe, 0.0)
    return rho_det, rho_best, rho_pi


def _decompose_window(c: FrameCorrespondence, a: int, b: int, pi: Optional[Matching] = None) -> _WindowResult:
    s = c.series
    K, K_hat = s.num_gt, s.num_pred
    gt_sizes = s.window_gt_presence(a, b).astype(np.float64)
    pred_sizes = s.window_pred_presence(a, b).astype(np.float64)
    counts = c.counts(a, b)
    unions = s.union_matrix(a, b)
    q = np.divide(counts, unions, out=np.zeros_like(counts), where=counts > 0)
    if pi is None:
        pi = max_weight_matching(q)

    gt_partner = np.zeros(K)
    pred_partner = np.zeros(K_hat)
    recall_q = np.zeros(K)
    precision_q = np.zeros(K_hat)
    for i, j in pi.pairs:
        gt_partner[i] = pred_partner[j] = counts[i, j]
        recall_q[i] = precision_q[j] = q[i, j]

    gt_live, pred_live = gt_sizes > 0, pred_sizes > 0
    r_det, r_best, r_pi = _chain(counts, gt_sizes, gt_partner, gt_live)
    p_det, p_best, p_pi = _chain(counts.T, pred_sizes, pred_partner, pred_live)

    recall = np.zeros((K, 5))
    recall[:, 0] = np.where(gt_live, 1.0 - r_det, 0.0)
    recall[:, 1] = r_det - r_best
    recall[:, 2] = r_best - r_pi
    precision = np.zeros((K_hat, 5))
    precision[:, 0] = np.where(pred_live, 1.0 - p_det, 0.0)
    precision[:, 1] = p_det - p_best
    precision[:, 2] = p_best - p_pi

    window = slice(a - 1, b)
    for i, j in pi.pairs:
        gt_here = c.gt_presence[i, window]
        pred_here = c.pred_presence[j, window]

        # frames of the partner where the gt track is absent
        gap = r_pi[i] - recall_q[i]
        only_pred = pred_here & ~gt_here
        total = int(only_pred.sum())
        if total:
            merged = int((only_pred & c.pred_matched[j, window]).sum())
            recall[i, 3] = gap * (total - merged) / total
            recall[i, 4] = gap * merged / total

        gap = p_pi[j] - precision_q[j]
        only_gt = gt_here & ~pred_here
        total = int(only_gt.sum())
        if total:
            split = int((only_gt & c.gt_matched[i, window]).sum())
            precision[j, 3] = gap * (total - split) / total
            precision[j, 4] = gap * split / total

    return _WindowResult(
        recall=recall,
        precision=precision,
        recall_q=recall_q,
        precision_q=precision_q,
        matching=pi,
        num_gt=int(gt_live.sum()),
        num_pred=int(pred_live.sum()),
    )


def _full_window(c: FrameCorrespondence, pi: Optional[Matching] = None) -> Optional[_WindowResult]:
    if c.num_frames == 0:
        return None
    return _decompose_window(c, 1, c.num_frames, pi)


def approx_ata(c: FrameCorrespondence, seq: Sequence) -> ApproxTrackAccuracy:
    """ATA with B replaced by the per-frame correspondence counts C."""
    K, K_hat = seq.gt.num_tracks, seq.pred.num_tracks
    result = _full_window(c)
    if result is None:
        return ApproxTrackAccuracy(0.0, 0.0, 0.0, 0.0, Matching(()))
    tp = result.matching.objective
    return ApproxTrackAccuracy(
        approx_track_tp=tp,
        approx_ata=ratio(tp, (K + K_hat) / 2),
        approx_atr=ratio(tp, K),
        approx_atp=ratio(tp, K_hat),
        matching=result.matching,
    )


def _recall_masses(seq: Sequence, rows: np.ndarray, q: np.ndarray) -> Tuple[RecallMasses, ...]:
    return tuple(
        RecallMasses(track.external_id, *map(float, rows[i]), approx_tiou=float(q[i]))
        for i, track in enumerate(seq.gt)
    )


def _precision_masses(seq: Sequence, rows: np.ndarray, q: np.ndarray) -> Tuple[PrecisionMasses, ...]:
    return tuple(
        PrecisionMasses(track.external_id, *map(float, rows[j]), approx_tiou=float(q[j]))
        for j, track in enumerate(seq.pred)
    )


def decompose_recall(c: FrameCorrespondence, pi: Matching, seq: Sequence) -> Tuple[RecallMasses, ...]:
    result = _full_window(c, pi)
    if result is None:
        return ()
    return _recall_masses(seq, result.recall, result.recall_q)


def decompose_precision(c: FrameCorrespondence, pi: Matching, seq: Sequence) -> Tuple[PrecisionMasses, ...]:
    result = _full_window(c, pi)
    if result is None:
        return ()
    return _precision_masses(seq, result.precision, result.precision_q)


def _fold(recall: np.ndarray, precision: np.ndarray) -> Dict[str, float]:
    """Per-type mass: union_fp counts as FP, union_fn as FN, and so on."""
    r = recall.sum(axis=0) if recall.size else np.zeros(5)
    p = precision.sum(axis=0) if precision.size else np.zeros(5)
    return {
        ErrorType.DET_FN.value: math.fsum((r[0], p[3])),
        ErrorType.DET_FP.value: math.fsum((p[0], r[3])),
        ErrorType.SPLIT.value: math.fsum((r[1], p[2], p[4])),
        ErrorType.MERGE.value: math.fsum((r[2], r[4], p[1])),
    }


def _overall(masses: Dict[str, MetricAccumulator]) -> OverallDecomposition:
    raw = {name: acc.value() for name, acc in masses.items()}
    total = math.fsum(raw.values())
    no_error = total <= NO_ERROR_TOLERANCE
    if no_error:
        fractions = {name: 0.0 for name in raw}
    else:
        fractions = {name: value / total for name, value in raw.items()}
    return OverallDecomposition(raw, fractions, total, no_error, dict(masses))


def decompose_overall(
    recall: Tuple[RecallMasses, ...],
    precision: Tuple[PrecisionMasses, ...],
    K: int,
    K_hat: int,
) -> OverallDecomposition:
    """1 - ATA~ = [sum_i (1 - Q~_i) + sum_j (1 - Q~_j)] / (K + K_hat), split by type."""
    r = np.array([[getattr(m, f) for f in RECALL_FIELDS] for m in recall]).reshape(-1, 5)
    p = np.array([[getattr(m, f) for f in PRECISION_FIELDS] for m in precision]).reshape(-1, 5)
    folded = _fold(r, p)
    return _overall({name: MetricAccumulator(mass, float(K + K_hat)) for name, mass in folded.items()})


def decompose_at_horizon(s: OverlapSeries, seq: Sequence, r: Horizon) -> DecompositionReport:
    """Windowed decomposition, accumulated like ALTA: (1/T) sums over all windows."""
    T = s.num_frames
    radius = r.resolve(seq.fps)
    c = frame_correspondence(s, seq)
    K, K_hat = s.num_gt, s.num_pred

    if T == 0:
        windows: List[Tuple[int, int, int]] = []
        weight = 1.0
    elif radius is None:
        windows = [(1, 1, T)]
        weight = 1.0
    else:
        windows = [(t, *window_bounds(t, radius, T)) for t in range(1, T + 1)]
        weight = 1.0 / T

    recall_sum = np.zeros((K, 5))
    precision_sum = np.zeros((K_hat, 5))
    recall_q = np.zeros(K)
    precision_q = np.zeros(K_hat)
    tp_values: List[float] = []
    gt_counts: List[int] = []
    pred_counts: List[int] = []
    type_masses: Dict[str, List[float]] = {e.value: [] for e in ErrorType}
    timeline: List[WindowErrors] = []
    # windows with the same clipped bounds share one result
    cache: Dict[Tuple[int, int], _WindowResult] = {}
    for t, a, b in windows:
        if (a, b) not in cache:
            cache[(a, b)] = _decompose_window(c, a, b)
        w = cache[(a, b)]
        recall_sum += w.recall
        precision_sum += w.precision
        recall_q += w.recall_q
        precision_q += w.precision_q
        tp_values.append(w.matching.objective)
        gt_counts.append(w.num_gt)
        pred_counts.append(w.num_pred)
        folded = _fold(w.recall, w.precision)
        for name, mass in folded.items():
            type_masses[name].append(mass)
        timeline.append(WindowErrors(t, *(folded[e.value] for e in ErrorType),
                                     approx_track_tp=w.matching.objective,
                                     num_tracks=w.num_gt + w.num_pred))

    track_total = weight * math.fsum(gt_counts + pred_counts)
    masses = {
        name: MetricAccumulator(weight * math.fsum(values), track_total)
        for name, values in type_masses.items()
    }
    tp = weight * math.fsum(tp_values)
    approx_acc = MetricAccumulator(tp, track_total / 2)
    gt_total = weight * math.fsum(gt_counts)
    pred_total = weight * math.fsum(pred_counts)

    report = DecompositionReport(
        horizon=r,
        frames=radius,
        recall=_recall_masses(seq, weight * recall_sum, weight * recall_q),
        precision=_precision_masses(seq, weight * precision_sum, weight * precision_q),
        overall=_overall(masses),
        approx_atr=ratio(tp, gt_total),
        approx_atp=ratio(tp, pred_total),
        approx_ata=approx_acc.value(),
        approx_acc=approx_acc,
        timeline=tuple(timeline),
    )
    log.debug("%s @ %s: approx %.6f, errors %s", seq.name, r.label, report.approx_ata, report.overall.raw)
    return report


def combine_decompositions(reports: List[DecompositionReport]) -> OverallDecomposition:
    """Overall decomposition of several sequences (or classes) at one horizon."""
    names = [e.value for e in ErrorType]
    masses = {name: MetricAccumulator.total(rep.overall.accumulators[name] for rep in reports) for name in names}
    return _overall(masses)
