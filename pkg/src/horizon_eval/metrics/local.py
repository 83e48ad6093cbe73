"""
Temporally local metrics: LIDF1(r) and ALTA(r).

Each window [t - r, t + r] gets its own optimal correspondence between
tracks. Window matrices are built from the prefix sums in OverlapSeries
and only over the tracks that overlap inside the window.
"""

import enum
import logging
import math
import re
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence as Seq, Tuple, Union

import numpy as np

from horizon_eval.core.base import WindowedMetric
from horizon_eval.core.errors import ContractError
from horizon_eval.core.model import MetricAccumulator, Sequence
from horizon_eval.metrics.assign import assignment_objective
from horizon_eval.metrics.overlap import OverlapSeries

log = logging.getLogger(__name__)

ROUNDING_RULE = "round-half-away-from-zero"


class HorizonOrigin(str, enum.Enum):
    FRAMES = "frames"
    SECONDS = "seconds"
    STRICT = "strict"


@dataclass(frozen=True)
class Horizon:
    """Half-width r of the window [t - r, t + r], in frames or seconds, or strict."""

    origin: HorizonOrigin
    frames: Optional[int] = None
    seconds: Optional[float] = None

    def __post_init__(self):
        if self.origin is HorizonOrigin.FRAMES and (self.frames is None or self.frames < 0):
            raise ContractError(f"frame horizon must be >= 0, got {self.frames}")
        if self.origin is HorizonOrigin.SECONDS and (self.seconds is None or self.seconds < 0):
            raise ContractError(f"second horizon must be >= 0, got {self.seconds}")

    @classmethod
    def of_frames(cls, frames: int) -> "Horizon":
        return cls(HorizonOrigin.FRAMES, frames=int(frames))

    @classmethod
    def of_seconds(cls, seconds: float) -> "Horizon":
        return cls(HorizonOrigin.SECONDS, seconds=float(seconds))

    @classmethod
    def strict(cls) -> "Horizon":
        return cls(HorizonOrigin.STRICT)

    @classmethod
    def parse(cls, text: str) -> "Horizon":
        """Parse '<int>f', '<real>s', a bare integer (frames) or 'strict'."""
        token = str(text).strip().lower()
        if token in ("strict", "inf", "full"):
            return cls.strict()
        match = re.fullmatch(r"(\d+)f?", token)
        if match:
            return cls.of_frames(int(match.group(1)))
        match = re.fullmatch(r"(\d+(?:\.\d*)?|\.\d+)s", token)
        if match:
            return cls.of_seconds(float(match.group(1)))
        raise ContractError(f"invalid horizon {text!r} (expected e.g. 0, 5f, 1s, strict)")

    @property
    def is_strict(self) -> bool:
        return self.origin is HorizonOrigin.STRICT

    @property
    def label(self) -> str:
        if self.origin is HorizonOrigin.STRICT:
            return "strict"
        if self.origin is HorizonOrigin.FRAMES:
            return f"{self.frames}f"
        return f"{self.seconds:g}s"

    def resolve(self, fps: float) -> Optional[int]:
        """Radius in frames for a sequence at `fps`; None means the whole sequence."""
        if self.origin is HorizonOrigin.STRICT:
            return None
        if self.origin is HorizonOrigin.FRAMES:
            return self.frames
        return int(math.floor(self.seconds * fps + 0.5))

    def __str__(self) -> str:
        return self.label


def parse_horizons(spec: Union[str, Iterable[str]]) -> List[Horizon]:
    """Comma-separated string or iterable of tokens -> horizons, duplicates dropped."""
    tokens = spec.split(",") if isinstance(spec, str) else list(spec)
    horizons: List[Horizon] = []
    for token in tokens:
        if not str(token).strip():
            continue
        horizon = Horizon.parse(token)
        if horizon not in horizons:
            horizons.append(horizon)
    if not horizons:
        raise ContractError("at least one horizon is required")
    return horizons


class MetricKind(str, enum.Enum):
    LIDF1 = "lidf1"
    ALTA = "alta"


def _compact(pairs: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Dense matrix over only the rows and columns that occur in `pairs`."""
    rows, row_inv = np.unique(pairs[:, 0], return_inverse=True)
    cols, col_inv = np.unique(pairs[:, 1], return_inverse=True)
    matrix = np.zeros((len(rows), len(cols)), dtype=np.float64)
    matrix[row_inv, col_inv] = weights
    return matrix


class LocalIDF1(WindowedMetric):
    """IDTP within each window over N + N_hat within the window."""

    name = MetricKind.LIDF1.value
    strict_name = "idf1"

    def score_window(self, series: OverlapSeries, a: int, b: int) -> Tuple[float, float]:
        mass = float(series.window_gt_presence(a, b).sum() + series.window_pred_presence(a, b).sum())
        overlaps = series.window_overlaps(a, b)
        live = np.flatnonzero(overlaps)
        if not live.size:
            return 0.0, mass
        matrix = _compact(series.pairs[live], overlaps[live].astype(np.float64))
        return assignment_objective(matrix), mass


class AverageLocalTrackingAccuracy(WindowedMetric):
    """TrackTP within each window over the number of tracks present in it."""

    name = MetricKind.ALTA.value
    strict_name = "ata"

    def score_window(self, series: OverlapSeries, a: int, b: int) -> Tuple[float, float]:
        gt_presence = series.window_gt_presence(a, b)
        pred_presence = series.window_pred_presence(a, b)
        mass = float(np.count_nonzero(gt_presence) + np.count_nonzero(pred_presence))
        overlaps = series.window_overlaps(a, b)
        live = np.flatnonzero(overlaps)
        if not live.size:
            return 0.0, mass
        pairs = series.pairs[live]
        copresence = series.window_copresence(a, b)[series.overlap_to_copresence[live]]
        unions = gt_presence[pairs[:, 0]].astype(np.int64) + pred_presence[pairs[:, 1]] - copresence
        matrix = _compact(pairs, overlaps[live] / unions)
        return assignment_objective(matrix), mass


METRICS = {
    MetricKind.LIDF1: LocalIDF1(),
    MetricKind.ALTA: AverageLocalTrackingAccuracy(),
}


def lidf1(s: OverlapSeries, seq: Sequence, r: Horizon) -> MetricAccumulator:
    return METRICS[MetricKind.LIDF1].evaluate(s, r.resolve(seq.fps))


def alta(s: OverlapSeries, seq: Sequence, r: Horizon) -> MetricAccumulator:
    return METRICS[MetricKind.ALTA].evaluate(s, r.resolve(seq.fps))


@dataclass(frozen=True)
class CurvePoint:
    horizon: Horizon
    frames: Optional[int]  # resolved radius; None for strict
    value: float
    accumulator: MetricAccumulator


@dataclass(frozen=True)
class HorizonCurve:
    metric_kind: MetricKind
    points: Tuple[CurvePoint, ...]

    def values(self) -> List[float]:
        return [p.value for p in self.points]

    def at(self, horizon: Horizon) -> CurvePoint:
        for point in self.points:
            if point.horizon == horizon:
                return point
        raise KeyError(horizon.label)


def horizon_curve(
    s: OverlapSeries,
    seq: Sequence,
    horizons: Seq[Horizon],
    kind: MetricKind = MetricKind.ALTA,
) -> HorizonCurve:
    """One point per horizon, in the order given."""
    if not horizons:
        raise ContractError("horizon_curve needs at least one horizon")
    metric = METRICS[MetricKind(kind)]
    points = []
    for horizon in horizons:
        radius = horizon.resolve(seq.fps)
        acc = metric.evaluate(s, radius)
        points.append(CurvePoint(horizon, radius, acc.value(), acc))
    return HorizonCurve(MetricKind(kind), tuple(points))


def combine(results: Iterable[Tuple[Union[Horizon, str], MetricAccumulator]]) -> MetricAccumulator:
    """
    Sum accumulators of several sequences (or classes treated as sequences).
    All entries must share one horizon definition.
    """
    results = list(results)
    labels = {h.label if isinstance(h, Horizon) else str(h) for h, _ in results}
    if len(labels) > 1:
        raise ContractError(f"cannot combine accumulators of different horizons: {sorted(labels)}")
    return MetricAccumulator.total(acc for _, acc in results)


def mean_over_horizons(values: Seq[float]) -> float:
    if not values:
        raise ContractError("mean_over_horizons needs at least one value")
    return math.fsum(values) / len(values)
