"""
Brute-force reference implementations for small instances.

Everything is recomputed from the boxes: no prefix sums, no solver. Every
partial one-to-one matching is enumerated, so only use these with a handful
of tracks per side.
"""

import itertools
import math
from typing import Dict, Iterator, List, Optional, Set, Tuple

from horizon_eval.core.errors import ContractError
from horizon_eval.core.model import Box, Sequence

Pair = Tuple[int, int]

MAX_ENUMERATION = 200_000


def box_iou(a: Box, b: Box) -> float:
    w = min(a.right, b.right) - max(a.left, b.left)
    h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    return inter / (a.area + b.area - inter)


def matchings(rows: int, cols: int) -> Iterator[Tuple[Pair, ...]]:
    """Every partial one-to-one matching between range(rows) and range(cols)."""
    if (max(rows, cols) + 1) ** min(rows, cols) > MAX_ENUMERATION:
        raise ContractError(f"{rows}x{cols} is too large for exhaustive enumeration")
    if rows > cols:
        for m in matchings(cols, rows):
            yield tuple(sorted((i, j) for j, i in m))
        return
    for choice in itertools.product(range(-1, cols), repeat=rows):
        used = [j for j in choice if j >= 0]
        if len(used) == len(set(used)):
            yield tuple((i, j) for i, j in enumerate(choice) if j >= 0)


def best_objective(weights: List[List[float]], rows: int, cols: int) -> float:
    return max(math.fsum(weights[i][j] for i, j in m) for m in matchings(rows, cols))


class Oracle:
    """Overlap, presence and correspondence of one sequence, frame by frame."""

    def __init__(self, seq: Sequence, threshold: float = 0.5):
        self.seq = seq
        self.threshold = threshold
        self.T = seq.num_frames
        self.K = len(seq.gt)
        self.K_hat = len(seq.pred)
        self.overlap: List[Set[Pair]] = []
        self.ious: List[Dict[Pair, float]] = []
        self.gt_present: List[Set[int]] = []
        self.pred_present: List[Set[int]] = []
        for t in range(1, self.T + 1):
            gts = {i: tr.boxes[t] for i, tr in enumerate(seq.gt) if t in tr.boxes}
            preds = {j: tr.boxes[t] for j, tr in enumerate(seq.pred) if t in tr.boxes}
            ious = {(i, j): box_iou(g, p) for i, g in gts.items() for j, p in preds.items()}
            self.ious.append(ious)
            self.overlap.append({pair for pair, v in ious.items() if v >= threshold})
            self.gt_present.append(set(gts))
            self.pred_present.append(set(preds))

    def _frames(self, a: int, b: int) -> range:
        return range(a - 1, b)

    def counts(self, a: int, b: int) -> List[List[float]]:
        out = [[0.0] * self.K_hat for _ in range(self.K)]
        for t in self._frames(a, b):
            for i, j in self.overlap[t]:
                out[i][j] += 1
        return out

    def unions(self, a: int, b: int) -> List[List[int]]:
        out = [[0] * self.K_hat for _ in range(self.K)]
        for t in self._frames(a, b):
            for i in range(self.K):
                for j in range(self.K_hat):
                    if i in self.gt_present[t] or j in self.pred_present[t]:
                        out[i][j] += 1
        return out

    def frame_match(self, t: int) -> Tuple[Pair, ...]:
        """Maximum cardinality, then maximum IOU sum, over overlapping pairs of frame t (1-based)."""
        allowed = self.overlap[t - 1]
        ious = self.ious[t - 1]
        best, best_key = (), (-1, -1.0)
        for m in matchings(self.K, self.K_hat):
            if any(pair not in allowed for pair in m):
                continue
            key = (len(m), math.fsum(ious[pair] for pair in m))
            if key > best_key:
                best, best_key = m, key
        return best

    # strict quantities

    def det_tp(self) -> int:
        return sum(len(self.frame_match(t)) for t in range(1, self.T + 1))

    def idtp(self) -> float:
        if self.T == 0:
            return 0.0
        return best_objective(self.counts(1, self.T), self.K, self.K_hat)

    def _tiou(self, counts, unions) -> List[List[float]]:
        return [
            [counts[i][j] / unions[i][j] if counts[i][j] else 0.0 for j in range(self.K_hat)]
            for i in range(self.K)
        ]

    def track_tp(self) -> float:
        if self.T == 0:
            return 0.0
        return best_objective(self._tiou(self.counts(1, self.T), self.unions(1, self.T)), self.K, self.K_hat)

    def approx_track_tp(self) -> float:
        if self.T == 0:
            return 0.0
        c = [[0.0] * self.K_hat for _ in range(self.K)]
        for t in range(1, self.T + 1):
            for i, j in self.frame_match(t):
                c[i][j] += 1
        return best_objective(self._tiou(c, self.unions(1, self.T)), self.K, self.K_hat)

    # windowed quantities

    def window(self, kind: str, a: int, b: int) -> Tuple[float, float]:
        """(numerator, mass) of one window for 'lidf1' or 'alta'."""
        frames = self._frames(a, b)
        if kind == "lidf1":
            mass = sum(len(self.gt_present[t]) + len(self.pred_present[t]) for t in frames)
            return best_objective(self.counts(a, b), self.K, self.K_hat), float(mass)
        if kind == "alta":
            gts = set().union(*(self.gt_present[t] for t in frames))
            preds = set().union(*(self.pred_present[t] for t in frames))
            score = best_objective(self._tiou(self.counts(a, b), self.unions(a, b)), self.K, self.K_hat)
            return score, float(len(gts) + len(preds))
        raise ContractError(f"unknown windowed metric {kind!r}")

    def local(self, kind: str, radius: Optional[int]) -> float:
        """Mean window score over mean half-mass; radius None is the whole sequence."""
        if self.T == 0:
            return 0.0
        values, masses = [], []
        for t in range(1, self.T + 1):
            if radius is None:
                a, b = 1, self.T
            else:
                a, b = max(1, t - radius), min(self.T, t + radius)
            value, mass = self.window(kind, a, b)
            values.append(value)
            masses.append(mass)
        numerator = math.fsum(values) / self.T
        denominator = math.fsum(masses) / (2 * self.T)
        return numerator / denominator if denominator > 0 else 0.0

    def expectations(self, radii: Tuple[int, ...] = (0, 1)) -> Dict[str, float]:
        """Reference metric values keyed like the fixture catalog."""
        N = sum(len(tr) for tr in self.seq.gt)
        N_hat = sum(len(tr) for tr in self.seq.pred)
        half_boxes = (N + N_hat) / 2
        half_tracks = (self.K + self.K_hat) / 2
        out = {
            "det_f1": self.det_tp() / half_boxes if half_boxes else 0.0,
            "idf1": self.idtp() / half_boxes if half_boxes else 0.0,
            "ata": self.track_tp() / half_tracks if half_tracks else 0.0,
            "approx_ata": self.approx_track_tp() / half_tracks if half_tracks else 0.0,
        }
        for r in radii:
            out[f"alta@{r}f"] = self.local("alta", r)
            out[f"lidf1@{r}f"] = self.local("lidf1", r)
        return out
