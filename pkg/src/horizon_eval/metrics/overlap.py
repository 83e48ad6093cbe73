"""
Per-frame binary overlap B(t) and prefix sums over it.

For each frame the series keeps the sparse list of (gt, pred, iou) pairs
with iou >= threshold. Cumulative counts (summed area tables along time)
are kept for pair overlap, per-track presence and pair co-presence, so any
interval [a, b] is answered by one subtraction.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from horizon_eval.core.errors import ContractError
from horizon_eval.core.model import Box, Matching, Sequence
from horizon_eval.metrics.assign import max_cardinality_matching

log = logging.getLogger(__name__)

FrameEntry = Tuple[int, int, float]


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    inter_w = min(a.right, b.right) - max(a.left, b.left)
    inter_h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    inter = inter_w * inter_h
    return inter / (a.area + b.area - inter)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IOU of (n, 4) and (m, 4) arrays of [left, top, width, height]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    a_l, a_t = a[:, 0:1], a[:, 1:2]
    a_r, a_b = a_l + a[:, 2:3], a_t + a[:, 3:4]
    b_l, b_t = b[:, 0][None, :], b[:, 1][None, :]
    b_r, b_b = b_l + b[:, 2][None, :], b_t + b[:, 3][None, :]
    inter_w = np.clip(np.minimum(a_r, b_r) - np.maximum(a_l, b_l), 0.0, None)
    inter_h = np.clip(np.minimum(a_b, b_b) - np.maximum(a_t, b_t), 0.0, None)
    inter = inter_w * inter_h
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    return np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)


def _prefix(indicator: np.ndarray) -> np.ndarray:
    """(T, n) indicator -> (T + 1, n) cumulative counts with a leading zero row."""
    out = np.zeros((indicator.shape[0] + 1, indicator.shape[1]), dtype=np.int32)
    if indicator.shape[0]:
        out[1:] = np.cumsum(indicator, axis=0, dtype=np.int32)
    return out


class IntervalCounts(NamedTuple):
    overlap: int
    presence_i: int
    presence_j: int
    union: int


@dataclass(frozen=True, eq=False)
class OverlapSeries:
    """
    Immutable overlap data of one sequence at one IOU threshold.

    Prefix arrays are laid out (T + 1, n): row t holds counts over frames 1..t.
    """

    num_frames: int
    num_gt: int
    num_pred: int
    threshold: float
    frame_entries: Tuple[Tuple[FrameEntry, ...], ...]
    pairs: np.ndarray                     # (P, 2) pairs that overlap in some frame
    pair_overlap_prefix: np.ndarray       # (T + 1, P)
    gt_presence_prefix: np.ndarray        # (T + 1, K)
    pred_presence_prefix: np.ndarray      # (T + 1, K_hat)
    copresence_pairs: np.ndarray          # (Q, 2) pairs visible together in some frame
    copresence_prefix: np.ndarray         # (T + 1, Q)
    overlap_to_copresence: np.ndarray     # (P,) column of each overlap pair in copresence
    _pair_index: Dict[Tuple[int, int], int] = field(default_factory=dict, repr=False)
    _copresence_index: Dict[Tuple[int, int], int] = field(default_factory=dict, repr=False)

    def entries(self, t: int) -> Tuple[FrameEntry, ...]:
        """Sparse B(t): (i, j, iou) triples sorted by (i, j)."""
        return self.frame_entries[t - 1]

    def _check_interval(self, a: int, b: int) -> None:
        if not (1 <= a <= b <= self.num_frames):
            raise ContractError(f"interval [{a}, {b}] outside [1, {self.num_frames}]")

    def window_overlaps(self, a: int, b: int) -> np.ndarray:
        return self.pair_overlap_prefix[b] - self.pair_overlap_prefix[a - 1]

    def window_gt_presence(self, a: int, b: int) -> np.ndarray:
        return self.gt_presence_prefix[b] - self.gt_presence_prefix[a - 1]

    def window_pred_presence(self, a: int, b: int) -> np.ndarray:
        return self.pred_presence_prefix[b] - self.pred_presence_prefix[a - 1]

    def window_copresence(self, a: int, b: int) -> np.ndarray:
        return self.copresence_prefix[b] - self.copresence_prefix[a - 1]

    def overlap_matrix(self, a: Optional[int] = None, b: Optional[int] = None) -> np.ndarray:
        """Dense K x K_hat matrix of sum_{t in [a, b]} B(t); the full sequence by default."""
        out = np.zeros((self.num_gt, self.num_pred), dtype=np.float64)
        if self.num_frames == 0 or not len(self.pairs):
            return out
        a = 1 if a is None else a
        b = self.num_frames if b is None else b
        out[self.pairs[:, 0], self.pairs[:, 1]] = self.window_overlaps(a, b)
        return out

    def union_matrix(self, a: Optional[int] = None, b: Optional[int] = None) -> np.ndarray:
        """Dense |V_i u V_j| over [a, b] for all pairs."""
        if self.num_frames == 0:
            return np.zeros((self.num_gt, self.num_pred), dtype=np.float64)
        a = 1 if a is None else a
        b = self.num_frames if b is None else b
        gt = self.window_gt_presence(a, b).astype(np.float64)
        pred = self.window_pred_presence(a, b).astype(np.float64)
        out = gt[:, None] + pred[None, :]
        if len(self.copresence_pairs):
            cop = self.window_copresence(a, b)
            out[self.copresence_pairs[:, 0], self.copresence_pairs[:, 1]] -= cop
        return out

    def pair_column(self, i: int, j: int) -> Optional[int]:
        return self._pair_index.get((i, j))

    def copresence_column(self, i: int, j: int) -> Optional[int]:
        return self._copresence_index.get((i, j))


def interval_counts(s: OverlapSeries, i: int, j: int, a: int, b: int) -> IntervalCounts:
    """Overlap, both presences and union frame counts of pair (i, j) within [a, b]."""
    s._check_interval(a, b)
    presence_i = int(s.gt_presence_prefix[b, i] - s.gt_presence_prefix[a - 1, i])
    presence_j = int(s.pred_presence_prefix[b, j] - s.pred_presence_prefix[a - 1, j])
    col = s.pair_column(i, j)
    overlap = 0 if col is None else int(s.pair_overlap_prefix[b, col] - s.pair_overlap_prefix[a - 1, col])
    col = s.copresence_column(i, j)
    copresence = 0 if col is None else int(s.copresence_prefix[b, col] - s.copresence_prefix[a - 1, col])
    return IntervalCounts(overlap, presence_i, presence_j, presence_i + presence_j - copresence)


def _index_boxes(tracks, num_frames: int):
    """Per-frame (indices, ltwh array) and a dense (K, T) presence mask."""
    by_frame: Dict[int, List[Tuple[int, Box]]] = defaultdict(list)
    presence = np.zeros((len(tracks), num_frames), dtype=bool)
    for index, track in enumerate(tracks):
        for frame, box in track.boxes.items():
            by_frame[frame].append((index, box))
            presence[index, frame - 1] = True
    packed = {}
    for frame, items in by_frame.items():
        idx = np.array([i for i, _ in items], dtype=np.intp)
        boxes = np.array([[b.left, b.top, b.width, b.height] for _, b in items], dtype=np.float64)
        packed[frame] = (idx, boxes)
    return packed, presence


def _copresence(gt_presence: np.ndarray, pred_presence: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs ever visible together, and their (T, Q) co-presence indicator."""
    pairs: List[Tuple[int, int]] = []
    columns: List[np.ndarray] = []
    for i in range(gt_presence.shape[0]):
        mask = gt_presence[i][None, :] & pred_presence
        for j in np.flatnonzero(mask.any(axis=1)).tolist():
            pairs.append((i, j))
            columns.append(mask[j])
    num_frames = gt_presence.shape[1]
    indicator = np.stack(columns, axis=1) if columns else np.zeros((num_frames, 0), dtype=bool)
    return np.array(pairs, dtype=np.intp).reshape(-1, 2), indicator


def build_overlap_series(seq: Sequence, threshold: float = 0.5) -> OverlapSeries:
    """Compute B(t) for every frame plus the interval prefix structures."""
    if not (0 < threshold <= 1):
        raise ContractError(f"IOU threshold must be in (0, 1], got {threshold}")

    T, K, K_hat = seq.num_frames, seq.gt.num_tracks, seq.pred.num_tracks
    gt_boxes, gt_presence = _index_boxes(seq.gt, T)
    pred_boxes, pred_presence = _index_boxes(seq.pred, T)

    frame_entries: List[Tuple[FrameEntry, ...]] = []
    overlap_frames: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for t in range(1, T + 1):
        if t not in gt_boxes or t not in pred_boxes:
            frame_entries.append(())
            continue
        g_idx, g_arr = gt_boxes[t]
        p_idx, p_arr = pred_boxes[t]
        ious = iou_matrix(g_arr, p_arr)
        rows, cols = np.nonzero(ious >= threshold)
        entries = sorted(
            (int(g_idx[r]), int(p_idx[c]), float(ious[r, c])) for r, c in zip(rows, cols)
        )
        for i, j, _ in entries:
            overlap_frames[(i, j)].append(t)
        frame_entries.append(tuple(entries))

    pair_list = sorted(overlap_frames)
    pairs = np.array(pair_list, dtype=np.intp).reshape(-1, 2)
    overlap_indicator = np.zeros((T, len(pair_list)), dtype=bool)
    for col, pair in enumerate(pair_list):
        overlap_indicator[np.asarray(overlap_frames[pair]) - 1, col] = True

    cop_pairs, cop_indicator = _copresence(gt_presence, pred_presence)
    cop_index = {(int(i), int(j)): col for col, (i, j) in enumerate(cop_pairs)}
    pair_index = {pair: col for col, pair in enumerate(pair_list)}
    overlap_to_cop = np.array([cop_index[p] for p in pair_list], dtype=np.intp)

    log.debug(
        "%s: T=%d K=%d K_hat=%d overlap pairs=%d co-present pairs=%d",
        seq.name, T, K, K_hat, len(pair_list), len(cop_pairs),
    )
    return OverlapSeries(
        num_frames=T,
        num_gt=K,
        num_pred=K_hat,
        threshold=threshold,
        frame_entries=tuple(frame_entries),
        pairs=pairs,
        pair_overlap_prefix=_prefix(overlap_indicator),
        gt_presence_prefix=_prefix(gt_presence.T),
        pred_presence_prefix=_prefix(pred_presence.T),
        copresence_pairs=cop_pairs,
        copresence_prefix=_prefix(cop_indicator),
        overlap_to_copresence=overlap_to_cop,
        _pair_index=pair_index,
        _copresence_index=cop_index,
    )


def match_frame(
    entries: Iterable[FrameEntry],
    exclude_gt: Iterable[int] = (),
    exclude_pred: Iterable[int] = (),
) -> Matching:
    """
    Maximum-cardinality correspondence within one frame, ties broken by IOU.

    Entries touching an excluded gt or pred index are ignored. The returned
    pairs use sequence-wide track indices.
    """
    skip_gt, skip_pred = set(exclude_gt), set(exclude_pred)
    live = [(i, j, v) for i, j, v in entries if i not in skip_gt and j not in skip_pred]
    if not live:
        return Matching((), 0.0)
    gts = sorted({i for i, _, _ in live})
    preds = sorted({j for _, j, _ in live})
    row = {i: r for r, i in enumerate(gts)}
    col = {j: c for c, j in enumerate(preds)}
    edges = np.zeros((len(gts), len(preds)))
    ties = np.zeros_like(edges)
    for i, j, v in live:
        edges[row[i], col[j]] = 1.0
        ties[row[i], col[j]] = v
    local = max_cardinality_matching(edges, ties)
    pairs = tuple((gts[r], preds[c]) for r, c in local.pairs)
    return Matching(pairs, local.objective)
