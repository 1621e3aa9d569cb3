"""Command-line front end: simulate, build-dict, synth, decompose, match, evaluate.

Every subcommand writes into an output directory together with a
``manifest.json`` describing the run.  Any configuration key can be given as
a flag of the same name (``--pursuit.delta_r2_stop 0.02``); flags override
the config file, which overrides the built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import math
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from . import dictionary as dictmod
from . import evaluation, io, matcher, pursuit, sir
from .config import DEFAULTS, Config
from .errors import DataError, ParameterError, SirPursuitError
from .series import TimeSeries

log = logging.getLogger("sirpursuit")

MANIFEST = "manifest.json"


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, cfg: Config, inputs, started: str, **results) -> None:
    manifest = {
        "command": command,
        "tool_version": tool_version(),
        "config_hash": cfg.digest(),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "chosen_N": results.pop("chosen_N", None),
        "final_r2": results.pop("final_r2", None),
        "component_count": results.pop("component_count", None),
        **results,
        "started_at": started,
        "finished_at": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _floats(text: str, count: tuple[int, ...], what: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise ParameterError(f"{what}: expected comma-separated numbers, got {text!r}") from exc
    if len(vals) not in count:
        raise ParameterError(f"{what}: expected {' or '.join(map(str, count))} numbers, got {text!r}")
    return vals


def _params(text: str) -> sir.SirParams:
    vals = _floats(text, (4, 5), "--params N,I0,R0,gamma[,theta]")
    return sir.SirParams(*vals)


def _season_dates(cfg: Config, label: str):
    start = tuple(int(x) for x in cfg["season.start"].split("-"))
    end = tuple(int(x) for x in cfg["season.end"].split("-"))
    return io.season_window(label, start, end)


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        w = csv.writer(handle)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


# -- simulate -----------------------------------------------------------------


def _load_state(path) -> sir.MultiSirState:
    try:
        blob = json.loads(Path(path).read_text())
        return sir.MultiSirState(**{k: blob[k] for k in ("S", "I", "R", "beta", "gamma")})
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ParameterError(f"{path}: matrix state needs S, I, R, beta, gamma matrices ({exc})") from exc


def cmd_simulate(args, cfg: Config, out: Path) -> dict:
    days = args.days or cfg["season.days"]
    step = cfg["sir.step_days"]
    if args.state:
        traj = sir.integrate_matrix_sir(_load_state(args.state), days, step)
        return _write_matrix(out, traj)
    if not args.params:
        raise ParameterError("simulate needs --params (one or more) or --state")
    params = [_params(p) for p in args.params]
    if len(params) == 1 and not args.matrix:
        S, I, R = sir.integrate_sir_compartments(params[0], days, step)
        _write_rows(
            out / "curve.csv",
            ["day", "S", "I", "R"],
            ([d, _fmt(S[d]), _fmt(I[d]), _fmt(R[d])] for d in range(days)),
        )
        return {}
    traj = sir.integrate_matrix_sir(sir.MultiSirState.diagonal(params), days, step)
    return _write_matrix(out, traj)


def _write_matrix(out: Path, traj) -> dict:
    v = traj[0].v
    header = ["day"] + [f"{c}_{k + 1}" for k in range(v) for c in ("S", "I", "R")] + ["ili_l1"]
    ili = sir.ili_from_state(traj).values
    rows = []
    for d, st in enumerate(traj):
        row = [d]
        for k in range(v):
            row += [_fmt(st.S[k, k]), _fmt(st.I[k, k]), _fmt(st.R[k, k])]
        rows.append(row + [_fmt(ili[d])])
    _write_rows(out / "curve.csv", header, rows)
    return {}


# -- dictionary ---------------------------------------------------------------


def cmd_build_dict(args, cfg: Config, out: Path) -> dict:
    spec = cfg.grid_spec()
    dicts = dictmod.build_dictionary(spec, cfg["season.days"], cfg["sir.step_days"], cfg["run.workers"])
    dictmod.save_dictionary(dicts, out / "dictionary.json", spec, cfg["sir.step_days"])
    return {"atoms_per_N": {repr(n): len(d) for n, d in dicts.items()}}


def _dictionaries(cfg: Config, cache, season_days: int):
    spec = cfg.grid_spec()
    if cache:
        _, dicts = dictmod.load_dictionary(
            cache, season_days=season_days, step_days=cfg["sir.step_days"], spec=spec, workers=cfg["run.workers"]
        )
        return dicts
    return dictmod.build_dictionary(spec, season_days, cfg["sir.step_days"], cfg["run.workers"])


# -- synth --------------------------------------------------------------------


def cmd_synth(args, cfg: Config, out: Path) -> dict:
    comps = []
    for text in args.component or []:
        vals = _floats(text, (6,), "--component N,I0,R0,gamma,theta,gain")
        comps.append((sir.SirParams(*vals[:5]), vals[5]))
    spec = io.SynthSpec(tuple(comps), args.snr, args.seed, normalized=not args.raw_gain)
    start = dt.date.fromisoformat(args.start)
    signal, truth = io.synth_mixture(spec, cfg["season.days"], cfg["sir.step_days"], start)
    io.write_series_csv(signal, out / "ili.csv")
    header = ["date"] + [f"component_{k + 1}" for k in range(len(truth))]
    _write_rows(
        out / "truth.csv",
        header,
        ([d.isoformat()] + [_fmt(t.values[i]) for t in truth] for i, d in enumerate(signal.dates)),
    )
    return {}


# -- decompose ----------------------------------------------------------------


def cmd_decompose(args, cfg: Config, out: Path) -> dict:
    signal = io.load_ili_csv(args.ili)
    if args.season:
        signal = io.crop(signal, *_season_dates(cfg, args.season))
    if len(signal) != cfg["season.days"] and not args.season:
        raise DataError(
            f"{args.ili}: {len(signal)} days but season.days = {cfg['season.days']}; pass --season to crop"
        )
    dicts = _dictionaries(cfg, args.dict, len(signal))
    dec = pursuit.decompose_best_n(
        signal,
        dicts,
        workers=cfg["run.workers"],
        delta_r2_stop=cfg["pursuit.delta_r2_stop"],
        max_components=cfg["pursuit.max_components"],
        allow_negative=cfg["pursuit.allow_negative"],
        allow_reselect=cfg["pursuit.allow_reselect"],
    )
    pursuit.write_decomposition(dec, out / "decomposition.json", cfg["sir.step_days"])
    names = [f"component_{k + 1}" for k in range(len(dec.components))]
    dates = [d.isoformat() for d in signal.dates]
    comps = [c.contribution.values for c in dec.components]
    _write_rows(
        out / "components.csv",
        ["date"] + names,
        ([dates[i]] + [_fmt(c[i]) for c in comps] for i in range(len(signal))),
    )
    approx = dec.approximation.values
    _write_rows(
        out / "composite.csv",
        ["date", "signal", "composite"] + names,
        ([dates[i], _fmt(signal.values[i]), _fmt(approx[i])] + [_fmt(c[i]) for c in comps] for i in range(len(signal))),
    )
    final = None if math.isnan(dec.final_r2) else dec.final_r2
    return {"chosen_N": dec.population_size, "final_r2": final, "component_count": len(dec.components)}


# -- match --------------------------------------------------------------------

ASSIGNMENT_HEADER = [
    "season", "component", "virus", "pearson_r", "component_peak", "reference_peak",
    "atom_id", "N", "I0", "R0", "gamma", "theta", "gain",
]


def contributions_from_record(rec: dict, step_days: float) -> list[TimeSeries]:
    """Regenerate gain x unit-curve contributions from a decomposition record."""
    start = dt.date.fromisoformat(rec["start_date"])
    days = int(rec["season_days"])
    out = []
    for c in rec["components"]:
        p = sir.SirParams(c["N"], c["I0"], c["R0"], c["gamma"], c["theta"])
        raw = sir.integrate_sir(p, days, step_days, start).values
        out.append(TimeSeries(start, c["gain"] * raw / dictmod.unit_norm(raw)))
    return out


def _reference_peak(ref: matcher.ReferenceSeries, start: dt.date, end: dt.date) -> float:
    vals = [v for d, v in zip(ref.series.dates, ref.series.values) if start <= d <= end]
    return float(max(vals)) if vals else ref.peak_value


def cmd_match(args, cfg: Config, out: Path) -> dict:
    rec = pursuit.read_decomposition(args.decomposition)
    step = rec.get("step_days") or cfg["sir.step_days"]
    comps = contributions_from_record(rec, step)
    if not comps:
        raise DataError(f"{args.decomposition}: decomposition has no components to match")
    refs = io.load_reference_csv(args.references)
    assignment = matcher.match_components(comps, refs, cfg["matching.floor"], cfg["matching.method"])
    by_name = {r.virus_name: r for r in refs}
    start, end = comps[0].start_date, comps[0].end_date
    rows = []
    for idx, virus, r in assignment.pairs:
        c = rec["components"][idx]
        rows.append(
            [args.season, idx, virus, _fmt(r), _fmt(comps[idx].values.max()),
             _fmt(_reference_peak(by_name[virus], start, end)), c["atom_id"],
             _fmt(c["N"]), _fmt(c["I0"]), _fmt(c["R0"]), _fmt(c["gamma"]), _fmt(c["theta"]), _fmt(c["gain"])]
        )
    _write_rows(out / "assignment.csv", ASSIGNMENT_HEADER, rows)
    (out / "unmatched.json").write_text(
        json.dumps(
            {"components": assignment.unmatched_components, "viruses": assignment.unmatched_viruses}, indent=2
        )
    )
    return {"matched_pairs": len(rows)}


# -- evaluate -----------------------------------------------------------------


def read_assignments(paths) -> list[dict]:
    rows = []
    for path in paths:
        with Path(path).open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != ASSIGNMENT_HEADER:
                raise DataError(f"{path}: not an assignment file (header {reader.fieldnames})")
            rows.extend(reader)
    return rows


def cmd_evaluate(args, cfg: Config, out: Path) -> dict:
    rows = read_assignments(args.assignments)
    if not rows:
        raise DataError("no assignment rows to evaluate")
    seasons: dict[str, dict[str, sir.SirParams]] = {}
    for r in rows:
        p = sir.SirParams(float(r["N"]), float(r["I0"]), float(r["R0"]), float(r["gamma"]), float(r["theta"]))
        season = seasons.setdefault(r["season"], {})
        if r["virus"] in season:
            raise DataError(f"virus {r['virus']!r} matched twice in season {r['season']}")
        season[r["virus"]] = p
    table = evaluation.per_virus_params(seasons, cfg["evaluation.min_seasons"])
    (out / "params.tsv").write_text(evaluation.format_params_table(table))

    y = [float(r["reference_peak"]) for r in rows]
    peak = [float(r["component_peak"]) for r in rows]
    ind = [cfg.rate_reported(r["virus"]) for r in rows]
    variants = [cfg["evaluation.intercept"]]
    if args.both_intercepts:
        variants = [True, False]
    results = {}
    for intercept in variants:
        res = evaluation.peak_regression(y, peak, ind, intercept=intercept)
        name = "regression.tsv" if intercept == variants[0] else "regression_no_intercept.tsv"
        (out / name).write_text(evaluation.format_regression_table(res))
        results["r2" if intercept == variants[0] else "r2_no_intercept"] = res.r2
    return {"regression_r2": results, "n_rows": len(rows)}


# -- wiring -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (default: $SIRPURSUIT_CONFIG)")
    common.add_argument("--out", required=True, type=Path, help="output directory")
    common.add_argument("--workers", type=int, help="alias of --run.workers")
    common.add_argument("-v", "--verbose", action="store_true")
    keys = common.add_argument_group("configuration keys")
    for key in DEFAULTS:
        keys.add_argument(f"--{key}", dest=key, metavar="VALUE", default=None)

    parser = argparse.ArgumentParser(prog="sirpursuit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="integrate scalar or matrix SIR models")
    p.add_argument("--params", action="append", help="N,I0,R0,gamma[,theta]; repeat for several strains")
    p.add_argument("--matrix", action="store_true", help="use the matrix integrator even for one strain")
    p.add_argument("--state", help="JSON file with S, I, R, beta, gamma matrices")
    p.add_argument("--days", type=int, help="horizon (default season.days)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-dict", parents=[common], help="build and cache the SIR dictionary")
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic ILI mixture with ground truth")
    p.add_argument("--component", action="append", help="N,I0,R0,gamma,theta,gain; repeatable")
    p.add_argument("--snr", type=float, default=math.inf, help="SNR in dB (default: no noise)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="2000-10-01", help="first day (ISO date)")
    p.add_argument("--raw-gain", action="store_true", help="gains scale raw infected counts")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", parents=[common], help="matching-pursuit decomposition of an ILI series")
    p.add_argument("ili", help="CSV with date,value rows")
    p.add_argument("--dict", help="dictionary cache from build-dict")
    p.add_argument("--season", help="crop to a season window, e.g. 2012-2013")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("match", parents=[common], help="match components to reference series")
    p.add_argument("decomposition", help="decomposition.json from decompose")
    p.add_argument("references", help="CSV with week_start,virus,value rows")
    p.add_argument("--season", default="", help="season label written into the records")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", parents=[common], help="per-virus parameters and peak regression")
    p.add_argument("assignments", nargs="+", help="assignment.csv files, one per season")
    p.add_argument("--both-intercepts", action="store_true", help="also fit the model without intercept")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    started = dt.datetime.now(dt.timezone.utc).isoformat()
    overrides = {k: getattr(args, k) for k in DEFAULTS if getattr(args, k) is not None}
    if args.workers is not None:
        overrides["run.workers"] = args.workers
    try:
        cfg = Config.load(args.config, overrides)
        args.out.mkdir(parents=True, exist_ok=True)
        results = args.func(args, cfg, args.out)
        inputs = [
            p for p in (
                getattr(args, "ili", None), getattr(args, "dict", None), getattr(args, "state", None),
                getattr(args, "decomposition", None), getattr(args, "references", None),
                *(getattr(args, "assignments", None) or []),
            ) if p
        ]
        if args.config:
            inputs.append(args.config)
        write_manifest(args.out, args.command, cfg, inputs, started, **results)
    except (SirPursuitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
