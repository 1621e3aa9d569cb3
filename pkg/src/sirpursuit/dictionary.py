"""Overcomplete dictionary of feasible, unit-norm SIR infection curves.

Candidates are the Cartesian product of a parameter grid.  Each candidate
is integrated, delayed by its phase, truncated to the season, screened by
the half-peak-width feasibility rule and normalized.  Atom ids are the flat
index of the candidate in the full (N, R0, gamma, I0, theta) product, so they
are stable across builds and unique across population sizes.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import CacheError, ConfigurationError, IntegrationError
from .series import TimeSeries
from .sir import DEFAULT_STEP_DAYS, SEASON_DAYS, SirParams, integrate_sir_unshifted

log = logging.getLogger(__name__)

CACHE_FORMAT = "sirpursuit-dictionary"
CACHE_VERSION = 1

HALF_PEAK = 0.5
MIN_SPAN_PERCENT = 15


@dataclass(frozen=True)
class ParamAxis:
    """One grid axis; endpoints are included."""

    minimum: float
    maximum: float
    points: int = 10
    spacing: str = "linear"

    def __post_init__(self):
        if self.spacing not in ("linear", "logarithmic"):
            raise ConfigurationError(f"unknown spacing {self.spacing!r}")
        if self.points < 1:
            raise ConfigurationError("an axis needs at least one point")
        if self.points == 1 and self.minimum != self.maximum:
            raise ConfigurationError("a single-point axis needs minimum == maximum")
        if self.points > 1 and not self.minimum < self.maximum:
            raise ConfigurationError(f"axis minimum {self.minimum} must be below maximum {self.maximum}")
        if self.spacing == "logarithmic" and self.minimum <= 0:
            raise ConfigurationError("logarithmic axes need positive bounds")

    def values(self) -> np.ndarray:
        if self.points == 1:
            return np.array([float(self.minimum)])
        if self.spacing == "linear":
            return np.linspace(self.minimum, self.maximum, self.points)
        return np.geomspace(self.minimum, self.maximum, self.points)

    @classmethod
    def single(cls, value: float) -> "ParamAxis":
        return cls(value, value, 1)


@dataclass(frozen=True)
class GridSpec:
    population_size: ParamAxis = ParamAxis(1e5, 1e8, 10, "logarithmic")
    initial_infected: ParamAxis = ParamAxis(1e1, 1e3, 10, "logarithmic")
    r0: ParamAxis = ParamAxis(0.7, 5.0, 10, "linear")
    gamma: ParamAxis = ParamAxis(1e-6, 1e-2, 10, "logarithmic")
    theta: ParamAxis = ParamAxis(0.0, 100.0, 10, "linear")

    @classmethod
    def single(cls, params: SirParams) -> "GridSpec":
        """Grid holding exactly one parameter set."""
        return cls(
            ParamAxis.single(params.population_size),
            ParamAxis.single(params.initial_infected),
            ParamAxis.single(params.r0),
            ParamAxis.single(params.gamma),
            ParamAxis.single(params.theta),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "GridSpec":
        return cls(**{k: ParamAxis(**v) for k, v in d.items()})


def _axis_values(spec: GridSpec):
    return (
        spec.population_size.values(),
        spec.r0.values(),
        spec.gamma.values(),
        spec.initial_infected.values(),
        spec.theta.values(),
    )


def enumerate_candidates(spec: GridSpec) -> list[tuple[int, SirParams]]:
    """(atom_id, params) for every admissible grid point, in grid order.

    Loop order is N, R0, gamma, I0, theta (theta fastest).  Points with
    I0 >= N are skipped but keep their slot in the id numbering.
    """
    ns, r0s, gammas, i0s, thetas = _axis_values(spec)
    out = []
    flat = 0
    for n in ns:
        for r0 in r0s:
            for g in gammas:
                for i0 in i0s:
                    for th in thetas:
                        if i0 < n:
                            out.append((flat, SirParams(float(n), float(i0), float(r0), float(g), float(th))))
                        flat += 1
    return out


def build_grid(spec: GridSpec) -> list[SirParams]:
    return [p for _, p in enumerate_candidates(spec)]


def min_feasible_days(season_days: int) -> int:
    """Smallest number of days at or above half-peak that passes (15%, rounded up)."""
    return -(-MIN_SPAN_PERCENT * season_days // 100)


def feasibility_mask(curves: np.ndarray, season_days: int) -> np.ndarray:
    """Row-wise feasibility for a (k, season_days) array of infection curves."""
    curves = np.atleast_2d(curves)
    peak = curves.max(axis=1)
    wide = (curves >= HALF_PEAK * peak[:, None]).sum(axis=1)
    return (peak > 0) & (wide >= min_feasible_days(season_days))


def feasibility_filter(raw_curve, season_days: int) -> bool:
    """True iff at least 15% of the season's days are at or above half the peak.

    A curve that is identically zero is never feasible.
    """
    values = raw_curve.values if isinstance(raw_curve, TimeSeries) else np.asarray(raw_curve, float)
    if values.size != season_days:
        raise ValueError(f"curve has {values.size} samples, expected {season_days}")
    return bool(feasibility_mask(values, season_days)[0])


def unit_norm(curve: np.ndarray) -> float:
    """Euclidean norm with an exactly rounded sum, so it is layout independent."""
    return math.sqrt(math.fsum(x * x for x in curve.tolist()))


@dataclass(frozen=True, eq=False)
class DictionaryAtom:
    atom_id: int
    params: SirParams
    curve: np.ndarray
    original_norm: float

    @property
    def raw_curve(self) -> np.ndarray:
        return self.original_norm * self.curve


class Dictionary:
    """Atoms for one population size, ordered by atom_id.

    ``curves`` is the (n_atoms, season_days) matrix of unit-norm curves; each
    atom's ``curve`` is a read-only row view of it.
    """

    def __init__(self, population_size: float, atoms: Iterable[DictionaryAtom], curves: np.ndarray):
        self.population_size = float(population_size)
        self.atoms = tuple(atoms)
        self.curves = curves
        self.atom_ids = np.array([a.atom_id for a in self.atoms], dtype=np.int64)
        if np.any(np.diff(self.atom_ids) <= 0):
            raise ValueError("atoms must be sorted by strictly increasing atom_id")

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    @property
    def season_days(self) -> int:
        return self.curves.shape[1]

    def index_of(self, atom_id: int) -> int:
        pos = int(np.searchsorted(self.atom_ids, atom_id))
        if pos >= len(self.atoms) or self.atom_ids[pos] != atom_id:
            raise KeyError(atom_id)
        return pos

    def atom(self, atom_id: int) -> DictionaryAtom:
        return self.atoms[self.index_of(atom_id)]


def _integrate_chunks(base: list[SirParams], season_days: int, step_days: float, workers: int) -> np.ndarray:
    """Unshifted I curves for ``base``; chunking does not change the numbers."""
    if workers <= 1 or len(base) < 2:
        return integrate_sir_unshifted(base, season_days, step_days)[1]
    bounds = np.linspace(0, len(base), min(workers, len(base)) + 1).astype(int)
    chunks = [base[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: integrate_sir_unshifted(c, season_days, step_days)[1], chunks))
    return np.concatenate(parts, axis=0)


def _assemble(
    population_size: float,
    candidates: list[tuple[int, SirParams]],
    season_days: int,
    step_days: float,
    workers: int,
    keep_infeasible: bool = False,
) -> tuple[Dictionary, np.ndarray]:
    """Integrate, shift, screen and normalize candidates of one N.

    Candidates sharing (I0, R0, gamma) differ only by phase, so each distinct
    triple is integrated once and shifted per theta.
    """
    keys: dict[tuple, int] = {}
    base: list[SirParams] = []
    for _, p in candidates:
        key = (p.initial_infected, p.r0, p.gamma)
        if key not in keys:
            keys[key] = len(base)
            base.append(SirParams(p.population_size, p.initial_infected, p.r0, p.gamma, 0.0))
    try:
        raw = _integrate_chunks(base, season_days, step_days, workers)
    except IntegrationError as exc:
        raise IntegrationError(f"dictionary build aborted at N={population_size}: {exc}") from exc

    shifted = np.zeros((len(candidates), season_days))
    for row, (_, p) in enumerate(candidates):
        k = p.shift_days
        if k < season_days:
            shifted[row, k:] = raw[keys[(p.initial_infected, p.r0, p.gamma)], : season_days - k]

    feasible = feasibility_mask(shifted, season_days) if len(candidates) else np.zeros(0, bool)
    keep = np.ones_like(feasible) if keep_infeasible else feasible
    rows = np.flatnonzero(keep)
    curves = np.empty((rows.size, season_days))
    atoms = []
    for out_row, row in enumerate(rows):
        norm = unit_norm(shifted[row])
        curves[out_row] = shifted[row] / norm
        atoms.append((candidates[row][0], candidates[row][1], norm))
    curves.flags.writeable = False
    built = Dictionary(
        population_size,
        [DictionaryAtom(aid, p, curves[k], norm) for k, (aid, p, norm) in enumerate(atoms)],
        curves,
    )
    return built, feasible[rows]


def build_dictionary(
    spec: GridSpec | None = None,
    season_days: int = SEASON_DAYS,
    step_days: float = DEFAULT_STEP_DAYS,
    workers: int = 1,
    populations: Iterable[float] | None = None,
) -> dict[float, Dictionary]:
    """Build one dictionary per population size of the grid.

    ``populations`` restricts the build to a subset of the grid's N values.
    """
    spec = spec or GridSpec()
    by_n: dict[float, list] = {float(n): [] for n in spec.population_size.values()}
    for aid, p in enumerate_candidates(spec):
        by_n[p.population_size].append((aid, p))
    if populations is not None:
        wanted = [float(n) for n in populations]
        missing = [n for n in wanted if n not in by_n]
        if missing:
            raise ConfigurationError(f"population sizes {missing} are not on the grid")
        by_n = {n: by_n[n] for n in wanted}
    out = {}
    for n, cands in by_n.items():
        out[n], _ = _assemble(n, cands, season_days, step_days, workers)
        log.info("N=%g: %d of %d candidates feasible", n, len(out[n]), len(cands))
    return out


def save_dictionary(
    dictionaries: Mapping[float, Dictionary],
    path,
    spec: GridSpec,
    step_days: float = DEFAULT_STEP_DAYS,
) -> None:
    """Write a parameter-only cache; curves are regenerated on load."""
    dicts = list(dictionaries.values())
    season_days = dicts[0].season_days if dicts else SEASON_DAYS
    payload = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "grid": spec.to_dict(),
        "season_days": season_days,
        "step_days": step_days,
        "populations": [d.population_size for d in dicts],
        "atoms": [
            {
                "atom_id": a.atom_id,
                "N": a.params.population_size,
                "I0": a.params.initial_infected,
                "R0": a.params.r0,
                "gamma": a.params.gamma,
                "theta": a.params.theta,
                "original_norm": a.original_norm,
                "feasible": True,
            }
            for d in dicts
            for a in d
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def load_dictionary(
    path,
    season_days: int | None = None,
    step_days: float | None = None,
    spec: GridSpec | None = None,
    workers: int = 1,
) -> tuple[GridSpec, dict[float, Dictionary]]:
    """Read a cache and regenerate its curves.

    Expected settings that are given must match the header; regenerated
    curves must reproduce the stored norms and pass the feasibility check.
    Any mismatch raises CacheError so the caller can rebuild.
    """
    try:
        payload = json.loads(Path(path).read_text())
        if payload.get("format") != CACHE_FORMAT:
            raise CacheError(f"{path}: not a dictionary cache")
        if payload.get("version") != CACHE_VERSION:
            raise CacheError(f"{path}: cache version {payload.get('version')} != {CACHE_VERSION}")
        cached_spec = GridSpec.from_dict(payload["grid"])
        cached_days = int(payload["season_days"])
        cached_step = float(payload["step_days"])
        records = payload["atoms"]
        populations = [float(n) for n in payload["populations"]]
    except CacheError:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CacheError(f"{path}: unreadable or corrupt cache ({exc})") from exc

    if season_days is not None and season_days != cached_days:
        raise CacheError(f"{path}: built for {cached_days} season days, requested {season_days}")
    if step_days is not None and step_days != cached_step:
        raise CacheError(f"{path}: built with step {cached_step}, requested {step_days}")
    if spec is not None and spec != cached_spec:
        raise CacheError(f"{path}: grid specification differs from the requested one")

    by_n: dict[float, list] = {n: [] for n in populations}
    try:
        for rec in records:
            p = SirParams(rec["N"], rec["I0"], rec["R0"], rec["gamma"], rec["theta"])
            by_n[p.population_size].append((int(rec["atom_id"]), p, float(rec["original_norm"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise CacheError(f"{path}: corrupt atom record ({exc})") from exc

    out = {}
    for n, recs in by_n.items():
        cands = [(aid, p) for aid, p, _ in recs]
        d, feasible = _assemble(n, cands, cached_days, cached_step, workers, keep_infeasible=True)
        if not feasible.all():
            raise CacheError(f"{path}: cached atoms at N={n} fail the feasibility check")
        for atom, (_, _, norm) in zip(d.atoms, recs):
            if abs(atom.original_norm - norm) > 1e-12 * norm:
                raise CacheError(
                    f"{path}: atom {atom.atom_id} regenerates with norm {atom.original_norm!r}, cached {norm!r}"
                )
        out[n] = d
    return cached_spec, out
