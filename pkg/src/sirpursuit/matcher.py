"""Assign decomposition components to reference viral series by Pearson correlation."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError, MatchingError, UndefinedStatisticError
from .series import ONE_DAY, TimeSeries

WEEK = dt.timedelta(days=7)
MIN_OVERLAP_WEEKS = 3


@dataclass(frozen=True, eq=False)
class ReferenceSeries:
    """Surveillance series for one virus; weekly series are indexed by week start."""

    virus_name: str
    series: TimeSeries
    cadence: str = "weekly"

    def __post_init__(self):
        if not self.virus_name:
            raise DataError("reference series needs a virus name")
        if self.cadence not in ("daily", "weekly"):
            raise DataError(f"unknown cadence {self.cadence!r}")
        if np.any(self.series.values < 0):
            raise DataError(f"{self.virus_name}: reference values must be >= 0")

    @property
    def peak_value(self) -> float:
        return float(self.series.values.max())


@dataclass
class MatchAssignment:
    pairs: list[tuple[int, str, float]] = field(default_factory=list)
    unmatched_components: list[int] = field(default_factory=list)
    unmatched_viruses: list[str] = field(default_factory=list)

    def virus_for(self, component: int) -> str | None:
        for c, v, _ in self.pairs:
            if c == component:
                return v
        return None


def pearson(a, b) -> float:
    x = a.values if isinstance(a, TimeSeries) else np.asarray(a, float)
    y = b.values if isinstance(b, TimeSeries) else np.asarray(b, float)
    if x.shape != y.shape:
        raise DataError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise UndefinedStatisticError("Pearson correlation needs at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedStatisticError("Pearson correlation is undefined for a constant series")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def weekly_align(
    component_daily: TimeSeries, reference: ReferenceSeries, min_weeks: int = MIN_OVERLAP_WEEKS
) -> tuple[np.ndarray, np.ndarray]:
    """Pair a daily component with a reference on the reference's time grid.

    For weekly references the component is averaged over each reference week
    (week start plus six days); weeks not fully covered by daily samples are
    dropped. Daily references are paired date by date. Fewer than
    ``min_weeks`` weeks of overlap is an error.
    """
    if component_daily.step != ONE_DAY:
        raise DataError("component series must be daily")
    comp = component_daily.values
    start = component_daily.start_date
    if reference.cadence == "daily":
        ref = reference.series
        lo = max(start, ref.start_date)
        hi = min(component_daily.end_date, ref.end_date)
        if (hi - lo).days + 1 < min_weeks * 7:
            raise DataError(f"{reference.virus_name}: overlap shorter than {min_weeks} weeks")
        a = (lo - start).days
        b = (lo - ref.start_date).days
        m = (hi - lo).days + 1
        return comp[a : a + m].copy(), ref.values[b : b + m].copy()

    xs, ys = [], []
    for week_start, value in zip(reference.series.dates, reference.series.values):
        offset = (week_start - start).days
        if offset < 0 or offset + 7 > comp.size:
            continue
        xs.append(float(np.mean(comp[offset : offset + 7])))
        ys.append(float(value))
    if len(xs) < min_weeks:
        raise DataError(
            f"{reference.virus_name}: only {len(xs)} fully covered weeks overlap the component "
            f"(need {min_weeks})"
        )
    return np.array(xs), np.array(ys)


def correlation_matrix(components: Sequence[TimeSeries], references: Sequence[ReferenceSeries]) -> np.ndarray:
    """Component x reference Pearson matrix; NaN where undefined."""
    r = np.full((len(components), len(references)), np.nan)
    for i, comp in enumerate(components):
        for j, ref in enumerate(references):
            try:
                r[i, j] = pearson(*weekly_align(comp, ref))
            except UndefinedStatisticError:
                pass
    return r


def greedy_assign(r: np.ndarray, names: Sequence[str], floor: float = -1.0) -> MatchAssignment:
    """Commit the highest remaining correlation first, without replacement.

    Ties go to the lower component index, then the lexicographically smaller
    virus name. Pairs below ``floor`` and undefined (NaN) pairs are never made.
    """
    cands = [
        (-r[i, j], i, names[j], j)
        for i in range(r.shape[0])
        for j in range(r.shape[1])
        if not np.isnan(r[i, j]) and r[i, j] >= floor
    ]
    cands.sort(key=lambda t: t[:3])
    used_c, used_v = set(), set()
    out = MatchAssignment()
    for neg_r, i, name, _ in cands:
        if i in used_c or name in used_v:
            continue
        used_c.add(i)
        used_v.add(name)
        out.pairs.append((i, name, -neg_r))
    out.pairs.sort(key=lambda p: (-p[2], p[0], p[1]))
    out.unmatched_components = [i for i in range(r.shape[0]) if i not in used_c]
    out.unmatched_viruses = sorted(n for n in names if n not in used_v)
    return out


def optimal_assign(r: np.ndarray, names: Sequence[str], floor: float = -1.0) -> MatchAssignment:
    """Maximum total correlation assignment; a sensitivity alternative to greedy."""
    allowed = ~np.isnan(r) & (np.nan_to_num(r, nan=-np.inf) >= floor)
    # Disallowed pairs get a cost large enough that they are only used when forced, then dropped.
    cost = np.where(allowed, -np.nan_to_num(r), 1e6)
    rows, cols = linear_sum_assignment(cost)
    out = MatchAssignment()
    for i, j in zip(rows, cols):
        if allowed[i, j]:
            out.pairs.append((int(i), names[j], float(r[i, j])))
    out.pairs.sort(key=lambda p: (-p[2], p[0], p[1]))
    used_c = {p[0] for p in out.pairs}
    used_v = {p[1] for p in out.pairs}
    out.unmatched_components = [i for i in range(r.shape[0]) if i not in used_c]
    out.unmatched_viruses = sorted(n for n in names if n not in used_v)
    return out


def match_components(
    components: Sequence[TimeSeries],
    references: Sequence[ReferenceSeries],
    floor: float = -1.0,
    method: str = "greedy",
) -> MatchAssignment:
    """Match each component (daily contribution curve) to at most one virus."""
    if not components or not references:
        raise MatchingError("need at least one component and one reference series")
    names = [ref.virus_name for ref in references]
    if len(set(names)) != len(names):
        raise DataError("reference virus names must be unique")
    r = correlation_matrix(components, references)
    if np.all(np.isnan(r)):
        raise MatchingError("no component/reference pair has a defined correlation")
    if method == "greedy":
        return greedy_assign(r, names, floor)
    if method == "optimal":
        return optimal_assign(r, names, floor)
    raise MatchingError(f"unknown matching method {method!r}")
