"""Strain fractions, per-virus parameter averages and the peak-value regression."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import DataError, RegressionError
from .series import TimeSeries
from .sir import SirParams

PEAK_TERMS = ("intercept", "rate_reported", "component_peak")
ATTRIBUTE_LABELS = {
    "intercept": "Intercept",
    "rate_reported": "Rate reported?",
    "component_peak": "Peak value of SIR component",
}


def strain_fraction(ili_rate: TimeSeries, detection_fraction: TimeSeries) -> TimeSeries:
    """Per-strain prevalence proxy: ILI rate times the strain's detection fraction."""
    if len(ili_rate) != len(detection_fraction) or ili_rate.start_date != detection_fraction.start_date:
        raise DataError("ILI rate and detection fraction must cover the same weeks")
    f = detection_fraction.values
    if np.any((f < 0) | (f > 1)):
        raise DataError("detection fractions must lie in [0, 1]")
    return ili_rate.with_values(ili_rate.values * f)


@dataclass(frozen=True)
class VirusParams:
    virus: str
    mean_r0: float
    mean_i0: float
    seasons: int


def per_virus_params(
    season_matches: Mapping[str, Mapping[str, SirParams]], min_seasons: int = 3
) -> list[VirusParams]:
    """Average R0 and I0 of the components matched to each virus.

    ``season_matches`` maps season label to {virus name: matched component
    parameters}. Viruses matched in fewer than ``min_seasons`` seasons are left
    out. Rows are sorted by virus name.
    """
    grouped: dict[str, list[SirParams]] = defaultdict(list)
    for matches in season_matches.values():
        for virus, params in matches.items():
            grouped[virus].append(params)
    rows = []
    for virus in sorted(grouped):
        ps = grouped[virus]
        if len(ps) < min_seasons:
            continue
        rows.append(
            VirusParams(
                virus,
                float(np.mean([p.r0 for p in ps])),
                float(np.mean([p.initial_infected for p in ps])),
                len(ps),
            )
        )
    return rows


@dataclass(frozen=True, eq=False)
class RegressionResult:
    names: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    r2: float
    n: int
    residuals: np.ndarray

    def __getitem__(self, name: str) -> tuple[float, float, float]:
        k = self.names.index(name)
        return float(self.coef[k]), float(self.se[k]), float(self.p[k])


def ols(y, X, names: Sequence[str]) -> RegressionResult:
    """Ordinary least squares with classical standard errors and two-sided t p-values."""
    y = np.asarray(y, float)
    X = np.asarray(X, float)
    n, k = X.shape
    if n < k + 1:
        raise RegressionError(f"{n} observations are too few for {k} coefficients")
    if np.linalg.matrix_rank(X) < k:
        raise RegressionError("design matrix is singular (collinear or constant regressors)")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = n - k
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef / se, np.inf * np.sign(coef))
    p = 2.0 * stats.t.sf(np.abs(t), dof)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else float("nan")
    return RegressionResult(tuple(names), coef, se, t, p, r2, n, resid)


def peak_regression(
    reference_peak, component_peak, rate_reported, intercept: bool = True
) -> RegressionResult:
    """Regress reference peak values on the reporting indicator and component peaks.

    ``component_peak`` is the peak of gain times atom curve; ``rate_reported``
    is 1 where the reference is a detection rate (influenza) and 0 where it
    is a positivity.
    """
    y = np.asarray(reference_peak, float)
    ind = np.asarray(rate_reported, float)
    peak = np.asarray(component_peak, float)
    if not (y.shape == ind.shape == peak.shape) or y.ndim != 1:
        raise DataError("regression inputs must be 1-D arrays of equal length")
    if not np.all(np.isin(ind, (0.0, 1.0))):
        raise DataError("rate_reported must be 0 or 1")
    if y.size < 4:
        raise RegressionError(f"need at least 4 rows, got {y.size}")
    cols = [ind, peak]
    names = list(PEAK_TERMS[1:])
    if intercept:
        cols.insert(0, np.ones_like(y))
        names.insert(0, PEAK_TERMS[0])
    return ols(y, np.column_stack(cols), names)


def format_params_table(rows: Sequence[VirusParams]) -> str:
    lines = ["virus\tR0\tI0\tseasons"]
    lines += [f"{r.virus}\t{float(r.mean_r0)!r}\t{float(r.mean_i0)!r}\t{r.seasons}" for r in rows]
    return "\n".join(lines) + "\n"


def format_regression_table(res: RegressionResult) -> str:
    lines = ["attribute\tslope\tse\tp_value"]
    for k, name in enumerate(res.names):
        coef, se, p = (float(a[k]) for a in (res.coef, res.se, res.p))
        lines.append(f"{ATTRIBUTE_LABELS.get(name, name)}\t{coef!r}\t{se!r}\t{p!r}")
    lines.append(f"# R2\t{float(res.r2)!r}")
    lines.append(f"# n\t{res.n}")
    return "\n".join(lines) + "\n"
