"""CSV ingestion and writing, season windows, and synthetic ground-truth mixtures."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .dictionary import unit_norm
from .errors import DataError
from .matcher import WEEK, ReferenceSeries
from .series import ONE_DAY, TimeSeries
from .sir import DEFAULT_SEASON_START, DEFAULT_STEP_DAYS, SirParams, integrate_sir

MAX_GAP_DAYS = 7
SEASON_START = (10, 1)
SEASON_END = (4, 30)
_MISSING = {"", "na", "nan", "null"}


def sample_path(name: str) -> Path:
    """Path of a file bundled in ``sirpursuit/data`` (sample season, example config)."""
    path = Path(str(resources.files("sirpursuit") / "data" / name))
    if not path.is_file():
        raise DataError(f"no bundled data file {name!r}")
    return path


def _parse_date(text: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataError(f"{where}: bad ISO date {text!r}") from exc


def _parse_value(text: str, where: str) -> float | None:
    if text.strip().lower() in _MISSING:
        return None
    try:
        v = float(text)
    except ValueError as exc:
        raise DataError(f"{where}: bad number {text!r}") from exc
    if not math.isfinite(v):
        raise DataError(f"{where}: non-finite value {text!r}")
    if v < 0:
        raise DataError(f"{where}: negative value {v}")
    return v


def _rows(path, expected: Sequence[str]):
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(expected):
            raise DataError(f"{path}: header must be {','.join(expected)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected):
                raise DataError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}")
            yield f"{path}:{lineno}", row


def load_ili_csv(path) -> TimeSeries:
    """Read a daily ``date,value`` series.

    Gaps of up to seven missing days (absent rows or empty values) are filled
    by linear interpolation between the observed neighbours; longer gaps,
    missing endpoints, unordered dates and negative values are errors.
    """
    dates, values = [], []
    for where, (d, v) in _rows(path, ("date", "value")):
        date = _parse_date(d, where)
        if dates and date <= dates[-1]:
            raise DataError(f"{where}: date {date} does not increase after {dates[-1]}")
        dates.append(date)
        values.append(_parse_value(v, where))
    observed = [(d, v) for d, v in zip(dates, values) if v is not None]
    if not observed:
        raise DataError(f"{path}: no observations")
    if values[0] is None or values[-1] is None:
        raise DataError(f"{path}: the first and last rows must carry values")

    start = observed[0][0]
    days = np.array([(d - start).days for d, _ in observed])
    vals = np.array([v for _, v in observed])
    for (d0, _), (d1, _), step in zip(observed, observed[1:], np.diff(days)):
        if step - 1 > MAX_GAP_DAYS:
            raise DataError(
                f"{path}: gap of {step - 1} missing days between {d0} and {d1} "
                f"(at most {MAX_GAP_DAYS} can be interpolated)"
            )
    grid = np.arange(days[-1] + 1)
    return TimeSeries(start, np.interp(grid, days, vals))


def write_series_csv(series: TimeSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        w = csv.writer(handle)
        w.writerow(["date", "value"])
        for d, v in zip(series.dates, series.values):
            w.writerow([d.isoformat(), repr(float(v))])


def load_reference_csv(path) -> list[ReferenceSeries]:
    """Read ``week_start,virus,value`` rows into one weekly series per virus.

    Viruses keep their first-appearance order. Each virus must have strictly
    consecutive weeks.
    """
    grouped: dict[str, dict[dt.date, float]] = {}
    for where, (w, name, v) in _rows(path, ("week_start", "virus", "value")):
        name = name.strip()
        if not name:
            raise DataError(f"{where}: empty virus name")
        week = _parse_date(w, where)
        value = _parse_value(v, where)
        if value is None:
            raise DataError(f"{where}: missing value for {name} in week {week}")
        series = grouped.setdefault(name, {})
        if week in series:
            raise DataError(f"{where}: duplicate row for week {week}, virus {name!r}")
        series[week] = value
    if not grouped:
        raise DataError(f"{path}: no reference rows")
    out = []
    for name, by_week in grouped.items():
        weeks = sorted(by_week)
        for a, b in zip(weeks, weeks[1:]):
            if b - a != WEEK:
                raise DataError(f"{path}: {name!r} is not weekly between {a} and {b}")
        out.append(ReferenceSeries(name, TimeSeries(weeks[0], [by_week[w] for w in weeks], WEEK)))
    return out


def write_reference_csv(references: Sequence[ReferenceSeries], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        w = csv.writer(handle)
        w.writerow(["week_start", "virus", "value"])
        for ref in references:
            for d, v in zip(ref.series.dates, ref.series.values):
                w.writerow([d.isoformat(), ref.virus_name, repr(float(v))])


def season_window(label: str, start=SEASON_START, end=SEASON_END) -> tuple[dt.date, dt.date]:
    """Dates of a season labelled ``"YYYY-YYYY"``: Oct 1 of the first year to Apr 30 of the next."""
    try:
        first, second = (int(x) for x in label.split("-"))
    except ValueError as exc:
        raise DataError(f"season label must look like 2012-2013, got {label!r}") from exc
    if second != first + 1:
        raise DataError(f"season label {label!r} must span consecutive years")
    return dt.date(first, *start), dt.date(second, *end)


def crop(series: TimeSeries, start: dt.date, end: dt.date) -> TimeSeries:
    """Restrict a daily series to [start, end]; the series must cover the window."""
    if series.start_date > start or series.end_date < end:
        raise DataError(
            f"series covers {series.start_date}..{series.end_date}, which does not span {start}..{end}"
        )
    a = (start - series.start_date).days
    return TimeSeries(start, series.values[a : a + (end - start).days + 1])


@dataclass
class SeasonDataset:
    label: str
    ili: TimeSeries
    references: list[ReferenceSeries] = field(default_factory=list)


def load_season(label: str, ili_path, reference_path=None, start=SEASON_START, end=SEASON_END) -> SeasonDataset:
    lo, hi = season_window(label, start, end)
    ili = crop(load_ili_csv(ili_path), lo, hi)
    refs = load_reference_csv(reference_path) if reference_path else []
    return SeasonDataset(label, ili, refs)


@dataclass(frozen=True)
class SynthSpec:
    """Ground-truth mixture: components, noise level and seed.

    Gains scale unit-norm curves when ``normalized`` is true (the same
    convention as decomposition gains) and raw infected counts otherwise.
    ``snr_db=inf`` means no noise.
    """

    components: tuple[tuple[SirParams, float], ...] = ()
    snr_db: float = math.inf
    seed: int = 0
    normalized: bool = True

    def __post_init__(self):
        for p, g in self.components:
            if not (g > 0 and math.isfinite(g)):
                raise DataError(f"gain must be positive and finite, got {g} for {p}")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise DataError(f"bad SNR {self.snr_db}")


def synth_mixture(
    spec: SynthSpec,
    season_days: int,
    step_days: float = DEFAULT_STEP_DAYS,
    start_date: dt.date = DEFAULT_SEASON_START,
) -> tuple[TimeSeries, list[TimeSeries]]:
    """Signal = sum of gain-weighted SIR curves + white Gaussian noise.

    The noise draw is rescaled so that the realized ratio of clean-signal
    energy to noise energy equals ``snr_db`` exactly.
    """
    truth = []
    clean = np.zeros(season_days)
    for p, g in spec.components:
        curve = integrate_sir(p, season_days, step_days, start_date).values
        if spec.normalized:
            norm = unit_norm(curve)
            if norm == 0:
                raise DataError(f"component {p} is identically zero within the season")
            curve = curve / norm
        truth.append(TimeSeries(start_date, g * curve))
        clean = clean + truth[-1].values
    signal = clean
    if math.isfinite(spec.snr_db):
        energy = float(clean @ clean)
        noise = np.random.default_rng(spec.seed).standard_normal(season_days)
        if energy > 0:
            noise *= math.sqrt(energy / 10 ** (spec.snr_db / 10) / float(noise @ noise))
            signal = clean + noise
    return TimeSeries(start_date, signal), truth


def measured_snr_db(signal: TimeSeries, truth: Sequence[TimeSeries]) -> float:
    clean = np.sum([t.values for t in truth], axis=0)
    noise = signal.values - clean
    return 10 * math.log10(float(clean @ clean) / float(noise @ noise))


def incoherence_graph(curves: np.ndarray, max_corr: float, block: int = 1000) -> np.ndarray:
    """Boolean matrix marking pairs of unit-norm rows with correlation below ``max_corr``."""
    m = curves.shape[0]
    graph = np.empty((m, m), dtype=bool)
    for lo in range(0, m, block):
        graph[lo : lo + block] = curves[lo : lo + block] @ curves.T < max_corr
    np.fill_diagonal(graph, False)
    return graph


def sample_incoherent_atoms(graph: np.ndarray, k: int, rng, max_nodes: int = 200_000):
    """Row indices of ``k`` mutually incoherent atoms, i.e. a ``k``-clique of ``graph``.

    Randomized depth-first search with backtracking; returns None when the
    node budget runs out without finding one.
    """
    budget = [max_nodes]

    def extend(chosen, pool):
        if len(chosen) == k:
            return chosen
        for idx in pool:
            budget[0] -= 1
            if budget[0] < 0:
                return None
            rest = pool[graph[idx, pool]]
            if rest.size < k - len(chosen) - 1:
                continue
            found = extend(chosen + [int(idx)], rest)
            if found is not None or budget[0] < 0:
                return found
        return None

    return extend([], rng.permutation(graph.shape[0]))
