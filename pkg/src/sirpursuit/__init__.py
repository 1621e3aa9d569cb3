"""Blind decomposition of aggregate ILI series into SIR components by matching pursuit."""

from .dictionary import (
    Dictionary,
    DictionaryAtom,
    GridSpec,
    ParamAxis,
    build_dictionary,
    build_grid,
    feasibility_filter,
    load_dictionary,
    save_dictionary,
)
from .errors import (
    CacheError,
    ConfigurationError,
    DataError,
    IntegrationError,
    MatchingError,
    ParameterError,
    RegressionError,
    SirPursuitError,
    UndefinedStatisticError,
)
from .evaluation import RegressionResult, peak_regression, per_virus_params, strain_fraction
from .io import SeasonDataset, SynthSpec, load_ili_csv, load_reference_csv, sample_path, synth_mixture
from .matcher import MatchAssignment, ReferenceSeries, match_components, pearson, weekly_align
from .pursuit import Component, Decomposition, decompose, decompose_best_n, r_squared
from .series import TimeSeries
from .sir import (
    MultiSirState,
    SirParams,
    ili_from_state,
    integrate_matrix_sir,
    integrate_sir,
    integrate_sir_batch,
)

__version__ = "0.1.0"
