"""Regenerate the bundled sample season in src/sirpursuit/data/.

    python scripts/make_sample_data.py

The ILI series is a sum of six single-strain SIR epidemics with typical
respiratory-virus dynamics (recovery in 4 to 7 days, R0 between 1.3 and 1.8),
a small baseline, a day-of-week reporting cycle and multiplicative
log-normal noise.  These parameters are deliberately off the dictionary grid:
the decomposer never sees the generating curves.

The reference file holds one weekly series per surveillance strain.  Each
strain built into the ILI series gets the weekly mean of its own epidemic
curve, scaled to a plausible positivity or strain-rate level, with noise.
Two strains (A(H1N1)pdm09, Adenovirus) are low-level background only.
"""

import datetime as dt
from pathlib import Path

import numpy as np

from sirpursuit.io import write_reference_csv, write_series_csv
from sirpursuit.matcher import WEEK, ReferenceSeries
from sirpursuit.series import TimeSeries
from sirpursuit.sir import SirParams, integrate_sir

OUT = Path(__file__).resolve().parents[1] / "src" / "sirpursuit" / "data"
START = dt.date(2012, 10, 1)
DAYS = 212
SEED = 0

# virus, N, I0, R0, gamma, onset day, peak contribution to ILI per 100k, reference peak
STRAINS = [
    ("Rhinovirus", 2.0e5, 40, 1.30, 0.20, 0, 5.0, 22.0),
    ("RSV", 3.0e5, 10, 1.60, 0.15, 10, 8.0, 18.0),
    ("Parainfluenza", 1.5e5, 10, 1.30, 0.15, 40, 2.0, 6.0),
    ("Influenza A(H3)", 1.0e6, 5, 1.80, 0.25, 80, 14.0, 9.0),
    ("Influenza B", 5.0e5, 5, 1.50, 0.20, 95, 6.0, 4.0),
    ("hMPV", 2.0e5, 5, 1.40, 0.15, 90, 2.5, 5.0),
]
BACKGROUND = [("Influenza A(H1N1)pdm09", 0.3), ("Adenovirus", 2.5)]


def main():
    rng = np.random.default_rng(SEED)
    t = np.arange(DAYS)
    ili = np.full(DAYS, 2.0)
    shapes = {}
    for virus, n, i0, r0, gamma, onset, height, _ in STRAINS:
        curve = integrate_sir(SirParams(n, i0, r0, gamma, onset), DAYS).values
        shapes[virus] = curve / curve.max()
        ili += height * shapes[virus]
    ili *= 1 + 0.08 * np.cos(2 * np.pi * (t - 5) / 7)
    ili *= np.exp(rng.normal(0, 0.15, DAYS))
    write_series_csv(TimeSeries(START, np.round(ili, 4)), OUT / "sample_ili_2012-2013.csv")

    # weeks start on Mondays; 2012-10-01 is one
    weeks = DAYS // 7
    refs = []
    for virus, *_, ref_peak in STRAINS:
        weekly = shapes[virus][: weeks * 7].reshape(weeks, 7).mean(axis=1)
        values = ref_peak * weekly / weekly.max() * np.exp(rng.normal(0, 0.1, weeks))
        refs.append(ReferenceSeries(virus, TimeSeries(START, np.round(values, 3), WEEK)))
    for virus, level in BACKGROUND:
        values = level * np.exp(rng.normal(0, 0.3, weeks))
        refs.append(ReferenceSeries(virus, TimeSeries(START, np.round(values, 3), WEEK)))
    write_reference_csv(refs, OUT / "sample_references_2012-2013.csv")


if __name__ == "__main__":
    main()
