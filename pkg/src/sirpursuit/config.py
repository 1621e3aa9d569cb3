"""Plain-text ``section.key = value`` configuration.

Lines starting with ``#`` are comments.  Every key is declared in
:data:`DEFAULTS`; unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Mapping

from .dictionary import GridSpec, ParamAxis
from .errors import ConfigurationError

CONFIG_ENV = "SIRPURSUIT_CONFIG"

_GRID_DEFAULTS = {
    "population_size": (1e5, 1e8, 10, "logarithmic"),
    "initial_infected": (1e1, 1e3, 10, "logarithmic"),
    "r0": (0.7, 5.0, 10, "linear"),
    "gamma": (1e-6, 1e-2, 10, "logarithmic"),
    "theta": (0.0, 100.0, 10, "linear"),
}

DEFAULTS: dict[str, Any] = {
    "sir.step_days": 0.05,
    "season.days": 212,
    "season.start": "10-01",
    "season.end": "04-30",
    "pursuit.delta_r2_stop": 0.01,
    "pursuit.max_components": 20,
    "pursuit.allow_negative": False,
    "pursuit.allow_reselect": False,
    "matching.method": "greedy",
    "matching.floor": -1.0,
    "evaluation.min_seasons": 3,
    "evaluation.intercept": True,
    "evaluation.rate_reported": "",
    "run.workers": 1,
}
for _name, (_lo, _hi, _pts, _sp) in _GRID_DEFAULTS.items():
    DEFAULTS[f"grid.{_name}_min"] = _lo
    DEFAULTS[f"grid.{_name}_max"] = _hi
    DEFAULTS[f"grid.{_name}_points"] = _pts
    DEFAULTS[f"grid.{_name}_spacing"] = _sp


def coerce(key: str, text) -> Any:
    """Convert ``text`` to the type of the key's default."""
    if key not in DEFAULTS:
        raise ConfigurationError(f"unknown configuration key {key!r}")
    default = DEFAULTS[key]
    if not isinstance(text, str):
        return text
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigurationError(f"{key}: cannot parse {text!r} as {type(default).__name__}") from exc
    return text


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = coerce(key, value)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{source}:{lineno}: {exc}") from exc
    return values


class Config(dict):
    """Flat mapping of every declared key to its effective value."""

    @classmethod
    def load(cls, path=None, overrides: Mapping[str, Any] | None = None) -> "Config":
        """Defaults, then the file (argument or $SIRPURSUIT_CONFIG), then overrides."""
        cfg = cls(DEFAULTS)
        path = path or os.environ.get(CONFIG_ENV)
        if path:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
            cfg.update(parse_config(text, str(path)))
        for key, value in (overrides or {}).items():
            cfg[key] = coerce(key, value)
        return cfg

    def grid_spec(self) -> GridSpec:
        axes = {}
        for name in _GRID_DEFAULTS:
            axes[name] = ParamAxis(
                float(self[f"grid.{name}_min"]),
                float(self[f"grid.{name}_max"]),
                int(self[f"grid.{name}_points"]),
                self[f"grid.{name}_spacing"],
            )
        return GridSpec(**axes)

    def rate_reported(self, virus: str) -> int:
        """1 if the virus is reported as a detection rate, else 0.

        An empty ``evaluation.rate_reported`` list means every virus whose name
        contains "influenza".
        """
        listed = [v.strip() for v in self["evaluation.rate_reported"].split(",") if v.strip()]
        if listed:
            return int(virus in listed)
        return int("influenza" in virus.lower())

    def digest(self) -> str:
        blob = json.dumps(dict(sorted(self.items())), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def dump(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.items()))
