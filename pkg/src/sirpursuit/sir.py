"""Fixed-step RK4 integration of scalar and matrix (multi-strain) SIR systems.

Scalar model, per pathogen::

    dS/dt = -beta S I,   dI/dt = beta S I - gamma I,   dR/dt = gamma I

with ``beta = R0 * gamma / N``.

Matrix model for ``v`` interacting strains, with S, I, R, beta and gamma
all ``v x v``::

    dS/dt = -I beta^T S
    dI/dt =  S beta^T I - gamma^T I
    dR/dt =  gamma^T I

The products are evaluated exactly in that order.  Off-diagonal entries of
``beta`` are therefore read with the transposed orientation: ``beta[j, i]``
couples column ``i`` of the left factor to row ``j`` of the right one.  For
diagonal inputs every strain follows its own scalar system.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IntegrationError, ParameterError
from .series import TimeSeries

DEFAULT_STEP_DAYS = 0.05
MAX_STEP_DAYS = 0.5
SEASON_DAYS = 212
DEFAULT_SEASON_START = dt.date(2000, 10, 1)

# Negative values above -NEG_TOL * N are round-off and get clamped to zero.
NEG_TOL = 1e-9


@dataclass(frozen=True)
class SirParams:
    """Parameters of one pathogen.

    Parameters
    ----------
    population_size : float
        N, individuals.
    initial_infected : float
        I(0), individuals; must be below N.
    r0 : float
        Basic reproduction number.
    gamma : float
        Recovery rate, 1/day.
    theta : float
        Onset delay in days. Rounded to whole days when applied.
    """

    population_size: float
    initial_infected: float
    r0: float
    gamma: float
    theta: float = 0.0

    def __post_init__(self):
        values = (self.population_size, self.initial_infected, self.r0, self.gamma, self.theta)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError(f"non-finite SIR parameter in {self}")
        if self.population_size <= 0:
            raise ParameterError(f"population_size must be > 0, got {self.population_size}")
        if self.initial_infected <= 0:
            raise ParameterError(f"initial_infected must be > 0, got {self.initial_infected}")
        if self.initial_infected >= self.population_size:
            raise ParameterError(
                f"initial_infected ({self.initial_infected}) must be below "
                f"population_size ({self.population_size})"
            )
        if self.r0 <= 0:
            raise ParameterError(f"r0 must be > 0, got {self.r0}")
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.theta < 0:
            raise ParameterError(f"theta must be >= 0, got {self.theta}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"derived beta is not a positive finite number for {self}")

    @property
    def beta(self) -> float:
        return self.r0 * self.gamma / self.population_size

    @property
    def shift_days(self) -> int:
        """Phase rounded half-up to a whole number of days."""
        return int(math.floor(self.theta + 0.5))


def substeps_per_day(step_days: float) -> int:
    """Number of RK4 substeps per day; the effective step is ``1 / substeps``.

    The effective step is the largest divisor of one day not exceeding
    ``step_days`` so that daily samples fall exactly on step boundaries.
    """
    if not (math.isfinite(step_days) and step_days > 0):
        raise ParameterError(f"step_days must be positive, got {step_days}")
    if step_days > MAX_STEP_DAYS:
        raise ParameterError(f"step_days must be <= {MAX_STEP_DAYS}, got {step_days}")
    n = round(1.0 / step_days)
    if abs(n * step_days - 1.0) > 1e-9:
        n = math.ceil(1.0 / step_days)
    return n


def _check_horizon(horizon_days) -> int:
    if int(horizon_days) != horizon_days or horizon_days < 1:
        raise ParameterError(f"horizon_days must be a positive integer, got {horizon_days}")
    return int(horizon_days)


def _guard(x: np.ndarray, tol: np.ndarray, what: str) -> np.ndarray:
    """Clamp round-off negatives, raise on real excursions or non-finite values."""
    bad = ~np.isfinite(x) | (x < -tol)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        err = IntegrationError(
            f"{what} left the admissible region at index {idx} "
            f"(value {x[idx]!r}); reduce step_days"
        )
        err.index = idx
        raise err
    return np.maximum(x, 0.0)


def _sir_unshifted(n, i0, beta, gamma, horizon: int, substeps: int):
    """Integrate a batch of independent scalar SIR systems from day 0.

    All arguments are 1-D arrays of equal length. Returns (S, I, R), each of
    shape (batch, horizon), sampled at integer days. Only elementwise
    arithmetic is used, so a system's trajectory does not depend on what
    else is in the batch.
    """
    h = 1.0 / substeps
    tol = NEG_TOL * n
    # rows: S, I, R
    y = np.array([n - i0, i0, np.zeros_like(n)])
    out = np.empty((3, n.size, horizon))
    out[:, :, 0] = y

    def rhs(y):
        k = np.empty((3, y.shape[1]))
        inf = beta * y[0] * y[1]
        k[2] = gamma * y[1]
        k[0] = -inf
        k[1] = inf - k[2]
        return k

    for day in range(1, horizon):
        for _ in range(substeps):
            # R never feeds back, so the stages only need the S and I rows
            a = rhs(y)
            b = rhs(y[:2] + 0.5 * h * a[:2])
            c = rhs(y[:2] + 0.5 * h * b[:2])
            d = rhs(y[:2] + h * c[:2])
            y = y + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
            if not (y >= -tol).all():
                for k, what in enumerate("SIR"):
                    _guard(y[k], tol, what)
            y = np.maximum(y, 0.0)
        if not np.isfinite(y).all():
            for k, what in enumerate("SIR"):
                _guard(y[k], tol, what)
        out[:, :, day] = y
    return out


def _param_arrays(params: Sequence[SirParams]):
    n = np.array([p.population_size for p in params], dtype=float)
    i0 = np.array([p.initial_infected for p in params], dtype=float)
    beta = np.array([p.beta for p in params], dtype=float)
    gamma = np.array([p.gamma for p in params], dtype=float)
    return n, i0, beta, gamma


def integrate_sir_unshifted(
    params: Sequence[SirParams], horizon_days: int, step_days: float = DEFAULT_STEP_DAYS
) -> np.ndarray:
    """Batched integration ignoring the phase. Returns shape (3, batch, horizon)."""
    horizon = _check_horizon(horizon_days)
    substeps = substeps_per_day(step_days)
    if len(params) == 0:
        return np.zeros((3, 0, horizon))
    n, i0, beta, gamma = _param_arrays(params)
    try:
        return _sir_unshifted(n, i0, beta, gamma, horizon, substeps)
    except IntegrationError as exc:
        raise IntegrationError(f"{exc}; offending parameters: {params[exc.index[0]]}") from exc


def apply_phase(compartments: np.ndarray, population_size: float, shift: int) -> np.ndarray:
    """Delay a (3, horizon) trajectory by ``shift`` days.

    The head is padded with the unseeded state (S=N, I=0, R=0) and the tail is
    truncated so the horizon is unchanged.
    """
    horizon = compartments.shape[-1]
    out = np.zeros_like(compartments)
    out[0, :] = population_size
    if shift < horizon:
        out[:, shift:] = compartments[:, : horizon - shift]
    return out


def integrate_sir_batch(
    params: Sequence[SirParams], horizon_days: int, step_days: float = DEFAULT_STEP_DAYS
) -> np.ndarray:
    """Integrate many scalar systems at once, phase applied.

    Returns an array of shape (3, batch, horizon_days) holding S, I, R at
    integer days.
    """
    raw = integrate_sir_unshifted(params, horizon_days, step_days)
    out = np.empty_like(raw)
    for k, p in enumerate(params):
        out[:, k, :] = apply_phase(raw[:, k, :], p.population_size, p.shift_days)
    return out


def integrate_sir_compartments(
    params: SirParams, horizon_days: int, step_days: float = DEFAULT_STEP_DAYS
) -> np.ndarray:
    """S, I, R for one pathogen as a (3, horizon_days) array."""
    return integrate_sir_batch([params], horizon_days, step_days)[:, 0, :]


def integrate_sir(
    params: SirParams,
    horizon_days: int = SEASON_DAYS,
    step_days: float = DEFAULT_STEP_DAYS,
    start_date: dt.date = DEFAULT_SEASON_START,
) -> TimeSeries:
    """Infected count I(t) at days 0..horizon_days-1, onset delayed by theta."""
    return TimeSeries(start_date, integrate_sir_compartments(params, horizon_days, step_days)[1])


def _square(name: str, m) -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class MultiSirState:
    """State and rates of the matrix model; all five fields are v x v."""

    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        shapes = set()
        for name in ("S", "I", "R", "beta", "gamma"):
            a = _square(name, getattr(self, name))
            object.__setattr__(self, name, a)
            shapes.add(a.shape)
        if len(shapes) != 1:
            raise ParameterError(f"matrix dimension mismatch: {sorted(shapes)}")

    @property
    def v(self) -> int:
        return self.S.shape[0]

    @classmethod
    def diagonal(cls, params: Sequence[SirParams]) -> "MultiSirState":
        """Independent strains, one diagonal entry per pathogen (phase ignored)."""
        n, i0, beta, gamma = _param_arrays(params)
        return cls(
            S=np.diag(n - i0),
            I=np.diag(i0),
            R=np.zeros((len(params), len(params))),
            beta=np.diag(beta),
            gamma=np.diag(gamma),
        )


def integrate_matrix_sir(
    state0: MultiSirState, horizon_days: int, step_days: float = DEFAULT_STEP_DAYS
) -> list[MultiSirState]:
    """Integrate the matrix model; returns one state per day, day 0 first."""
    horizon = _check_horizon(horizon_days)
    substeps = substeps_per_day(step_days)
    h = 1.0 / substeps
    beta_t = state0.beta.T
    gamma_t = state0.gamma.T
    tol = NEG_TOL * float(np.max(np.diag(state0.S + state0.I + state0.R)))

    def rhs(y):
        s, i = y[0], y[1]
        k = np.empty_like(y)
        k[0] = -(i @ beta_t @ s)
        k[2] = gamma_t @ i
        k[1] = s @ beta_t @ i - k[2]
        return k

    diag = np.eye(state0.v, dtype=bool)

    def guard(y):
        # Off-diagonal entries are not sign-preserved by the matrix dynamics; only
        # the per-strain diagonal is held to the non-negativity rule.
        if not np.isfinite(y).all():
            raise IntegrationError("matrix state became non-finite; reduce step_days")
        d = y[:, diag]
        if not (d >= -tol).all():
            for k, what in enumerate("SIR"):
                _guard(d[k], tol, what)
        y[:, diag] = np.maximum(d, 0.0)
        return y

    y = np.array([state0.S, state0.I, state0.R])
    out = [state0]
    for _ in range(1, horizon):
        for _ in range(substeps):
            a = rhs(y)
            b = rhs(y + 0.5 * h * a)
            c = rhs(y + 0.5 * h * b)
            d = rhs(y + h * c)
            y = guard(y + h / 6.0 * (a + 2.0 * b + 2.0 * c + d))
        out.append(MultiSirState(y[0].copy(), y[1].copy(), y[2].copy(), state0.beta, state0.gamma))
    return out


def ili_from_state(
    trajectory: Sequence[MultiSirState], start_date: dt.date = DEFAULT_SEASON_START
) -> TimeSeries:
    """Per-day L1 norm (sum of diagonal entries) of the infected matrix."""
    if len(trajectory) == 0:
        raise ParameterError("trajectory is empty")
    return TimeSeries(start_date, [float(np.trace(st.I)) for st in trajectory])


def season_length(start: dt.date, end: dt.date) -> int:
    """Inclusive day count between two dates."""
    return (end - start).days + 1
