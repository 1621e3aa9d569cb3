"""Daily time series container."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import DataError

ONE_DAY = dt.timedelta(days=1)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled series, one value per ``step`` starting at ``start_date``.

    The step is one day for everything the pipeline produces; weekly
    reference data uses a seven-day step.
    """

    start_date: dt.date
    values: np.ndarray
    step: dt.timedelta = ONE_DAY

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise DataError("a time series needs at least one sample")
        if not np.all(np.isfinite(values)):
            raise DataError("time series values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + k * self.step for k in range(len(self))]

    @property
    def end_date(self) -> dt.date:
        return self.start_date + (len(self) - 1) * self.step

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.start_date, values, self.step)

    def equals(self, other: "TimeSeries") -> bool:
        return (
            self.start_date == other.start_date
            and self.step == other.step
            and np.array_equal(self.values, other.values)
        )
