#!/usr/bin/env python3
"""
Base class for windowed metrics.

A windowed metric scores every interval [t - r, t + r] (clipped to [1, T])
with a numerator and a mass, and reports

    (1/T) sum_t numerator_t  /  (1/2T) sum_t mass_t

so that r = 0 yields DetF1 and r >= T - 1 yields the strict metric.
Subclasses only implement the per-window score.
"""

import math
from abc import ABC, abstractmethod
from typing import Iterable, List, Optional, Tuple

from horizon_eval.core.model import MetricAccumulator


def window_accumulator(values: Iterable[float], masses: Iterable[float], num_frames: int) -> MetricAccumulator:
    """Mean-over-windows accumulator; fsum keeps the result independent of order."""
    if num_frames <= 0:
        return MetricAccumulator(0.0, 0.0)
    return MetricAccumulator(
        math.fsum(values) / num_frames,
        math.fsum(masses) / (2 * num_frames),
    )


def window_bounds(t: int, radius: Optional[int], num_frames: int) -> Tuple[int, int]:
    """Centered window around t clipped to [1, T]; radius None is the whole sequence."""
    if radius is None:
        return 1, num_frames
    return max(1, t - radius), min(num_frames, t + radius)


class WindowedMetric(ABC):
    """Abstract base class for LIDF1 / ALTA style metrics."""

    #: short identifier used in reports ("lidf1", "alta")
    name: str = ""
    #: label of the metric this one reduces to at the strict horizon
    strict_name: str = ""

    @abstractmethod
    def score_window(self, series, a: int, b: int) -> Tuple[float, float]:
        """
        Score one interval [a, b].
        Returns (numerator, mass) where mass is N + N_hat or K + K_hat.
        """

    def evaluate(self, series, radius: Optional[int]) -> MetricAccumulator:
        """Accumulate over all T windows. Radius None (strict) or >= T-1 is one full window."""
        T = series.num_frames
        if T == 0:
            return MetricAccumulator(0.0, 0.0)
        if radius is None or radius >= T - 1:
            numerator, mass = self.score_window(series, 1, T)
            return MetricAccumulator(numerator, mass / 2)
        values: List[float] = []
        masses: List[float] = []
        for t in range(1, T + 1):
            a, b = window_bounds(t, radius, T)
            numerator, mass = self.score_window(series, a, b)
            values.append(numerator)
            masses.append(mass)
        return window_accumulator(values, masses, T)

