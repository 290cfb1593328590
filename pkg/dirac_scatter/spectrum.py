"""Spectrum reports: predicted band intervals against mesh-observed band ranges."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
from scipy import optimize

from .lattice import FloatArray, LatticeConfig

logger = logging.getLogger(__name__)

Interval = tuple[float, float]
BandsFn = Callable[[FloatArray], list[float]]
Mapper = Callable[[BandsFn, Iterable[FloatArray]], Iterator[list[float]]]

# Relative slack when comparing mesh values against predicted endpoints.
MESH_SLACK = 1e-9


@dataclass(frozen=True)
class BandRange:
    """Observed min/max of one band and where they were attained."""

    band: int
    lo: float
    hi: float
    argmin: FloatArray
    argmax: FloatArray


@dataclass
class SpectrumReport:
    lattice: str
    alpha: float
    predicted: dict[str, Interval]
    intervals: list[Interval]
    observed: list[BandRange]
    observed_intervals: list[Interval]
    discrepancy_flags: list[str] = field(default_factory=list)

    @property
    def first_gap(self) -> float:
        """Width of the first predicted gap, 0 when the intervals touch."""
        if len(self.intervals) < 2:
            return 0.0
        return self.intervals[1][0] - self.intervals[0][1]


def merge_intervals(intervals: Sequence[Interval], slack: float = 0.0) -> list[Interval]:
    """Union of closed intervals as a sorted disjoint list."""
    merged: list[Interval] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1] + slack:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def _polish(
    bands: BandsFn,
    cfg: LatticeConfig,
    band: int,
    start: FloatArray,
    step: float,
    sign: float,
) -> tuple[float, FloatArray]:
    """Refine an extremum along the k1 and k2 directions with a bounded search."""
    best = start
    best_value = sign * bands(start)[band - 1]
    for axis in (cfg.k1, cfg.k2):
        unit = axis / np.linalg.norm(axis)
        result = optimize.minimize_scalar(
            lambda t: sign * bands(best + t * unit)[band - 1],
            bounds=(-step, step),
            method="bounded",
            options={"xatol": 1e-6 * step},
        )
        if result.fun < best_value:
            best_value = float(result.fun)
            best = best + result.x * unit
    return sign * best_value, best


def mesh_extrema(
    bands: BandsFn,
    points: Sequence[FloatArray],
    jmax: int,
    cfg: LatticeConfig,
    polish: bool = False,
    mapper: Mapper = map,
) -> list[BandRange]:
    """Per-band min/max of `bands` over the mesh points."""
    table = np.array(list(mapper(bands, points)))
    ranges = []
    step = cfg.dual_length / max(1, int(math.isqrt(len(points))))
    for j in range(1, jmax + 1):
        column = table[:, j - 1]
        i_lo = int(np.argmin(column))
        i_hi = int(np.argmax(column))
        lo, argmin = float(column[i_lo]), points[i_lo]
        hi, argmax = float(column[i_hi]), points[i_hi]
        if polish and math.isfinite(lo):
            lo, argmin = _polish(bands, cfg, j, argmin, step, 1.0)
            hi, argmax = _polish(bands, cfg, j, argmax, step, -1.0)
        ranges.append(BandRange(band=j, lo=lo, hi=hi, argmin=argmin, argmax=argmax))
    return ranges


def _slack(value: float) -> float:
    return MESH_SLACK * max(1.0, abs(value)) if math.isfinite(value) else 0.0


def build_report(
    lattice: str,
    alpha: float,
    predicted: dict[str, Interval],
    observed: list[BandRange],
    lowest_at_gamma: float,
    upper_from: int = 0,
) -> SpectrumReport:
    """Assemble a report and flag disagreements between mesh and prediction.

    Bands from `upper_from` (1-based) on must chain into one ray; 0 skips
    that check.
    """
    intervals = merge_intervals(list(predicted.values()))
    ranges = [(b.lo, b.hi) for b in observed[:-1]] + [(observed[-1].lo, math.inf)]
    flags: list[str] = []

    if observed[0].lo < lowest_at_gamma - _slack(lowest_at_gamma):
        flags.append("band1_min_not_at_gamma")

    for b in observed:
        inside = any(
            lo - _slack(lo) <= b.lo and b.hi <= hi + _slack(hi) for lo, hi in intervals
        )
        if not inside:
            flags.append(f"band{b.band}_outside_prediction")

    if upper_from:
        if len(merge_intervals(ranges[upper_from - 1 :])) > 1:
            flags.append("upper_bands_disconnected")

    if flags:
        logger.warning("%s spectrum at alpha=%s flagged: %s", lattice, alpha, flags)
    return SpectrumReport(
        lattice=lattice,
        alpha=alpha,
        predicted=predicted,
        intervals=intervals,
        observed=observed,
        observed_intervals=merge_intervals(ranges),
        discrepancy_flags=flags,
    )


def gap_closing(alphas: Sequence[float], gaps: Sequence[float]) -> float | None:
    """First alpha of an ascending sweep at which a previously open gap is closed."""
    for before, alpha, gap in zip(gaps, alphas[1:], gaps[1:]):
        if before > 0.0 and gap <= 0.0:
            return alpha
    return None
