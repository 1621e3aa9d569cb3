"""Greedy matching pursuit over per-population SIR dictionaries."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .dictionary import Dictionary
from .errors import ConfigurationError, DataError, UndefinedStatisticError
from .series import TimeSeries
from .sir import SirParams

log = logging.getLogger(__name__)

DELTA_R2_STOP = 0.01
MAX_COMPONENTS = 20


def _ss_tot(signal: np.ndarray) -> float:
    return float(np.sum((signal - signal.mean()) ** 2))


def r_squared(signal, approximation) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``; may be negative."""
    y = signal.values if isinstance(signal, TimeSeries) else np.asarray(signal, float)
    f = approximation.values if isinstance(approximation, TimeSeries) else np.asarray(approximation, float)
    if y.shape != f.shape:
        raise DataError(f"length mismatch: {y.size} vs {f.size}")
    if y.size < 2:
        raise UndefinedStatisticError("R^2 needs at least two samples")
    ss_tot = _ss_tot(y)
    if ss_tot == 0:
        raise UndefinedStatisticError("R^2 is undefined for a constant signal")
    return 1.0 - float(np.sum((y - f) ** 2)) / ss_tot


@dataclass(frozen=True, eq=False)
class Component:
    atom_id: int
    params: SirParams
    gain: float
    contribution: TimeSeries

    @property
    def peak_day(self) -> int:
        return int(np.argmax(self.contribution.values))

    @property
    def peak_value(self) -> float:
        return float(np.max(self.contribution.values))


@dataclass(eq=False)
class Decomposition:
    population_size: float
    signal: TimeSeries
    components: list[Component] = field(default_factory=list)
    r2_trace: list[float] = field(default_factory=list)
    per_n_sse: dict[float, float] = field(default_factory=dict)

    @property
    def approximation(self) -> TimeSeries:
        total = np.zeros(len(self.signal))
        for c in self.components:
            total = total + c.contribution.values
        return self.signal.with_values(total)

    @property
    def residual(self) -> TimeSeries:
        return self.signal.with_values(self.signal.values - self.approximation.values)

    @property
    def sse(self) -> float:
        return float(np.sum(self.residual.values ** 2))

    @property
    def final_r2(self) -> float:
        """R^2 of the final model; NaN when undefined (no components or constant signal)."""
        return self.r2_trace[-1] if self.r2_trace else math.nan


def decompose(
    signal: TimeSeries,
    atoms: Dictionary,
    delta_r2_stop: float = DELTA_R2_STOP,
    max_components: int = MAX_COMPONENTS,
    allow_negative: bool = False,
    allow_reselect: bool = False,
) -> Decomposition:
    """Matching pursuit of ``signal`` over one population's dictionary.

    Each step takes the atom with the largest positive inner product with the
    residual (lowest atom_id on ties) and uses that inner product as the gain.
    Stops when the candidate would raise R^2 by less than ``delta_r2_stop``
    (the candidate is then discarded), when no atom correlates positively with
    the residual, or after ``max_components`` components.

    ``allow_negative`` selects by absolute inner product instead and
    ``allow_reselect`` lets an atom be chosen more than once; both are off by
    default.
    """
    if len(atoms) == 0:
        raise ConfigurationError(f"dictionary for N={atoms.population_size:g} is empty")
    y = signal.values
    if y.size != atoms.season_days:
        raise DataError(f"signal has {y.size} samples, dictionary atoms have {atoms.season_days}")

    out = Decomposition(atoms.population_size, signal)
    ss_tot = _ss_tot(y)
    if ss_tot == 0:
        if np.any(y != 0):
            raise UndefinedStatisticError("cannot decompose a constant non-zero signal: R^2 is undefined")
        return out

    D = atoms.curves
    available = np.ones(len(atoms), dtype=bool)
    residual = y.copy()
    sse = float(residual @ residual)
    r2 = 1.0 - sse / ss_tot
    while len(out.components) < max_components:
        inner = D @ residual
        score = np.abs(inner) if allow_negative else inner.copy()
        score[~available] = -np.inf
        k = int(np.argmax(score))
        if not score[k] > 0:
            break
        gain = float(inner[k])
        trial = residual - gain * D[k]
        trial_sse = float(trial @ trial)
        trial_r2 = 1.0 - trial_sse / ss_tot
        if trial_r2 - r2 < delta_r2_stop:
            break
        atom = atoms.atoms[k]
        out.components.append(
            Component(atom.atom_id, atom.params, gain, signal.with_values(gain * atom.curve))
        )
        out.r2_trace.append(trial_r2)
        residual, sse, r2 = trial, trial_sse, trial_r2
        if not allow_reselect:
            available[k] = False
    return out


def decompose_all_n(
    signal: TimeSeries,
    dictionaries: Mapping[float, Dictionary],
    workers: int = 1,
    **kwargs,
) -> dict[float, Decomposition]:
    """Run :func:`decompose` independently for every non-empty dictionary."""
    usable = {n: d for n, d in dictionaries.items() if len(d)}
    if not usable:
        raise ConfigurationError("all per-N dictionaries are empty")
    items = sorted(usable.items())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda nd: decompose(signal, nd[1], **kwargs), items))
    else:
        results = [decompose(signal, d, **kwargs) for _, d in items]
    return {n: r for (n, _), r in zip(items, results)}


def decompose_best_n(
    signal: TimeSeries,
    dictionaries: Mapping[float, Dictionary],
    workers: int = 1,
    **kwargs,
) -> Decomposition:
    """Decompose for each N and keep the lowest squared error (smaller N on ties)."""
    runs = decompose_all_n(signal, dictionaries, workers=workers, **kwargs)
    sse = {n: r.sse for n, r in runs.items()}
    for n, r in runs.items():
        log.info("N=%g: %d components, SSE=%.6g, R2=%.4f", n, len(r.components), sse[n], r.final_r2)
    best_n = min(sse, key=lambda n: (sse[n], n))
    best = runs[best_n]
    best.per_n_sse = sse
    return best


def decomposition_to_dict(dec: Decomposition, step_days: float | None = None) -> dict:
    return {
        "population_size": dec.population_size,
        "start_date": dec.signal.start_date.isoformat(),
        "season_days": len(dec.signal),
        "step_days": step_days,
        "components": [
            {
                "atom_id": c.atom_id,
                "N": c.params.population_size,
                "I0": c.params.initial_infected,
                "R0": c.params.r0,
                "gamma": c.params.gamma,
                "theta": c.params.theta,
                "gain": c.gain,
                "peak_day": c.peak_day,
                "peak_value": c.peak_value,
            }
            for c in dec.components
        ],
        "r2_trace": dec.r2_trace,
        "final_r2": None if math.isnan(dec.final_r2) else dec.final_r2,
        "sse": dec.sse,
        "per_n_sse": {repr(n): v for n, v in sorted(dec.per_n_sse.items())},
    }


def write_decomposition(dec: Decomposition, path, step_days: float | None = None) -> None:
    Path(path).write_text(json.dumps(decomposition_to_dict(dec, step_days), indent=2))


def read_decomposition(path) -> dict:
    """Load a decomposition record set written by :func:`write_decomposition`."""
    try:
        rec = json.loads(Path(path).read_text())
        for key in ("population_size", "start_date", "season_days", "components", "r2_trace"):
            rec[key]
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"{path}: not a decomposition record ({exc})") from exc
    return rec
