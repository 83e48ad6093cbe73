"""
Cross-tracker statistics: Kendall tau-b between metrics, identity switches
normalised by detections, and dense-ranked leaderboard tables.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence as Seq, Tuple

from scipy import stats

from horizon_eval.core.errors import ContractError

log = logging.getLogger(__name__)

# tracker -> metric -> value
TrackerScores = Mapping[str, Mapping[str, float]]

# error-like columns rank ascending
LOWER_IS_BETTER = frozenset({"norm_id_switches", "id_switches"})


def kendall_tau(a: Seq[float], b: Seq[float]) -> float:
    """Tie-corrected Kendall tau-b. NaN (with a warning) when either side is constant."""
    if len(a) != len(b):
        raise ContractError(f"kendall_tau needs equal lengths, got {len(a)} and {len(b)}")
    if len(a) < 2:
        raise ContractError("kendall_tau needs at least two observations")
    if len(set(a)) < 2 or len(set(b)) < 2:
        log.warning("Kendall tau is undefined for a constant ranking")
        return math.nan
    tau, _ = stats.kendalltau(a, b, variant="b")
    return float(tau)


def normalized_id_switches(id_switches: int, det_tp: int) -> float:
    if det_tp < 0 or id_switches < 0:
        raise ContractError("counts must be non-negative")
    if det_tp == 0:
        if id_switches:
            raise ContractError(f"{id_switches} identity switches with no true-positive detections")
        return 0.0
    return id_switches / det_tp


@dataclass(frozen=True)
class RankRow:
    tracker: str
    scores: Dict[str, Optional[float]]
    ranks: Dict[str, Optional[int]]


@dataclass(frozen=True)
class RankTable:
    sort_key: str
    metrics: Tuple[str, ...]
    rows: Tuple[RankRow, ...]

    def order(self) -> List[str]:
        return [row.tracker for row in self.rows]


def _finite(value) -> bool:
    return value is not None and not math.isnan(float(value))


def _dense_ranks(values: Dict[str, float], higher_is_better: bool = True) -> Dict[str, int]:
    distinct = sorted(set(values.values()), reverse=higher_is_better)
    position = {v: k for k, v in enumerate(distinct, 1)}
    return {name: position[v] for name, v in values.items()}


def metric_names(scores: TrackerScores) -> Tuple[str, ...]:
    """Union of metric names in first-seen order."""
    names: Dict[str, None] = {}
    for metrics in scores.values():
        for name in metrics:
            names.setdefault(name, None)
    return tuple(names)


def rank_table(scores: TrackerScores, sort_key: str) -> RankTable:
    """
    Rows best first by `sort_key` (ascending for LOWER_IS_BETTER keys), ties
    broken by tracker name; dense ranks per metric, rank 1 the best value. Missing or NaN cells are
    absent and unranked.
    """
    metrics = metric_names(scores)
    if sort_key not in metrics:
        raise ContractError(f"sort key {sort_key!r} is not a reported metric ({', '.join(metrics)})")

    def present(tracker: str, metric: str) -> Optional[float]:
        value = scores[tracker].get(metric)
        return float(value) if _finite(value) else None

    ranks: Dict[str, Dict[str, int]] = {}
    for metric in metrics:
        column = {t: v for t in scores if (v := present(t, metric)) is not None}
        ranks[metric] = _dense_ranks(column, metric not in LOWER_IS_BETTER)

    sign = 1.0 if sort_key in LOWER_IS_BETTER else -1.0

    def order(tracker: str):
        value = present(tracker, sort_key)
        return (value is None, sign * (value or 0.0), tracker)

    rows = tuple(
        RankRow(
            tracker=t,
            scores={m: present(t, m) for m in metrics},
            ranks={m: ranks[m].get(t) for m in metrics},
        )
        for t in sorted(scores, key=order)
    )
    return RankTable(sort_key, metrics, rows)


def kendall_matrix(scores: TrackerScores, metrics: Optional[Seq[str]] = None) -> Dict[str, Dict[str, float]]:
    """
    Pairwise tau-b between metric columns over the trackers that report both.
    Pairs with fewer than two common trackers are NaN.
    """
    metrics = list(metrics) if metrics is not None else list(metric_names(scores))
    trackers = sorted(scores)
    matrix: Dict[str, Dict[str, float]] = {m: {} for m in metrics}
    for x in metrics:
        for y in metrics:
            common = [t for t in trackers if _finite(scores[t].get(x)) and _finite(scores[t].get(y))]
            if len(common) < 2:
                matrix[x][y] = math.nan
                continue
            matrix[x][y] = kendall_tau([scores[t][x] for t in common], [scores[t][y] for t in common])
    return matrix
