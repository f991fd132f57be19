"""Batch command line: ``trafficcast <subcommand> ...``.

Settings come from (highest first) command-line flags, a ``--config``
file of ``key = value`` lines, then built-in defaults. Model knobs use
``<model>.<knob>`` keys in the file or ``--param <model>.<knob>=<value>``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import forecasters, plot
from .config import ConfigError, load_config, parse_value, section
from .evaluation import PipelineConfig, compare, evaluate, prepare_train, reports_csv, reports_table
from .features import FEATURE_COLUMNS, build_matrix
from .lstm import WindowSpec, make_windows
from .preprocessing import FilterConfig, apply_filter
from .synthgen import SynthConfig, generate_station, station_records
from .timeseries import (DailySeries, SplitSpec, VehicleClass, format_csv, read_csv,
                         split_train_test, to_series)

PROG = "trafficcast"


class CLIError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    station: Optional[int] = None
    vehicle_class: VehicleClass = VehicleClass.TC1
    cutoff: Optional[dt.date] = None
    filter: Optional[FilterConfig] = field(default_factory=FilterConfig)
    score_against: str = "raw"
    lstm_mode: str = "multi_step"
    week_start: int = 0
    model_params: dict = field(default_factory=dict)  # model name -> {knob: value}
    config: dict = field(default_factory=dict)

    @property
    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(self.filter, self.score_against, self.lstm_mode)


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise CLIError(f"invalid date {text!r}; expected YYYY-MM-DD") from None


def _pick(flag, cfg: dict, key: str, default, conv=lambda x: x):
    if flag is not None:
        return flag
    if key in cfg:
        return conv(cfg[key])
    return default


def resolve(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    if not cfg and getattr(args, "_default_config", None):
        cfg = load_config(args._default_config)
    get = lambda name: getattr(args, name, None)  # noqa: E731
    kind = _pick(get("filter"), cfg, "filter", "median")
    filt = None
    if kind != "none":
        filt = FilterConfig(kind=kind,
                            window=_pick(get("window"), cfg, "window", 5, int),
                            alpha=_pick(get("alpha"), cfg, "alpha", 0.3, float),
                            period=_pick(get("period"), cfg, "period", 7, int))
    cutoff = _pick(get("cutoff"), cfg, "cutoff", None)
    vc = _pick(get("vehicle_class"), cfg, "vehicle_class", "TC1")

    params: dict[str, dict] = {}
    for name in forecasters.MODEL_NAMES:
        for key, text in section(cfg, name).items():
            params.setdefault(name, {})[key] = parse_value(text)
    for item in get("param") or []:
        key, sep, text = item.partition("=")
        name, dot, knob = key.partition(".")
        if not sep or not dot or name not in forecasters.MODEL_NAMES:
            raise CLIError(f"--param expects <model>.<knob>=<value>, got {item!r}")
        params.setdefault(name, {})[knob] = parse_value(text)

    return RunConfig(
        command=args.command,
        seed=_pick(get("seed"), cfg, "seed", 0, int),
        station=_pick(get("station"), cfg, "station", None, int),
        vehicle_class=VehicleClass.parse(vc) if isinstance(vc, str) else vc,
        cutoff=_date(cutoff) if isinstance(cutoff, str) else cutoff,
        filter=filt,
        score_against=_pick(get("score_against"), cfg, "score_against", "raw"),
        lstm_mode=_pick(get("lstm_mode"), cfg, "lstm_mode", "multi_step"),
        week_start=_pick(get("week_start"), cfg, "week_start", 0, int),
        model_params=params,
        config=cfg,
    )


def _load_series(path, rc: RunConfig) -> DailySeries:
    records = read_csv(path)
    station = rc.station
    if station is None:
        stations = sorted({r.station_code for r in records})
        if len(stations) != 1:
            raise CLIError(f"{path}: {len(stations)} stations present; pass --station")
        station = stations[0]
    return to_series(records, station, rc.vehicle_class)


def _synth_config(rc: RunConfig, seed_flag: Optional[int] = None,
                  days: Optional[int] = None) -> SynthConfig:
    """Generator settings; the run seed applies unless the file pins ``synth.seed``."""
    sc = SynthConfig.from_mapping(section(rc.config, "synth"))
    if seed_flag is not None or "synth.seed" not in rc.config:
        sc = replace(sc, seed=rc.seed)
    if days is not None:
        sc = replace(sc, n_days=days)
    return sc


def _benchmark_series(rc: RunConfig) -> DailySeries:
    return generate_station(_synth_config(rc))[rc.vehicle_class].series


def _split(series: DailySeries, rc: RunConfig) -> tuple[DailySeries, DailySeries]:
    if rc.cutoff is None:
        raise CLIError("--cutoff is required")
    return split_train_test(series, SplitSpec(rc.cutoff))


def _make(name: str, rc: RunConfig) -> forecasters.Forecaster:
    kwargs = {"mode": rc.lstm_mode} if name == "lstm" else {}
    return forecasters.make_forecaster(name, rc.model_params.get(name), rc.seed, rc.week_start, **kwargs)


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


def _series_csv(series: DailySeries) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["DATE", "VALUE"])
    for d, v in zip(series.dates, series.values):
        w.writerow([d.isoformat(), "" if np.isnan(v) else repr(float(v))])
    return out.getvalue()


# subcommands -----------------------------------------------------------


def cmd_synth(args, rc: RunConfig) -> None:
    sc = _synth_config(rc, args.seed, args.days)
    results = generate_station(sc)
    out = Path(args.output)
    clean_path = out.with_name(out.stem + "_clean" + out.suffix)
    _write(out, format_csv(station_records(results)))
    _write(clean_path, format_csv(station_records(results, clean=True)))
    clipped = {vc.value: r.n_clipped for vc, r in results.items()}
    print(f"wrote {out} and {clean_path} ({sc.n_days} days; clipped negative draws: {clipped})",
          file=sys.stderr)


def cmd_clean(args, rc: RunConfig) -> None:
    if rc.filter is None:
        raise CLIError("clean needs a filter other than 'none'")
    series = _load_series(args.input, rc)
    _write(args.output, _series_csv(apply_filter(series, rc.filter)))


def cmd_featurize(args, rc: RunConfig) -> None:
    series = _load_series(args.input, rc)
    series = prepare_train(series, rc.pipeline)
    if args.windows:
        try:
            lb, lf = (int(x) for x in args.windows.split(","))
        except ValueError:
            raise CLIError("--windows expects LOOKBACK,LOOKFORWARD") from None
        _write(args.output, make_windows(series, WindowSpec(lb, lf)).to_csv())
        return
    m = build_matrix(series, rc.week_start)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["DATE", *FEATURE_COLUMNS, "TARGET"])
    for d, row, y in zip(m.dates, m.rows, m.targets):
        w.writerow([d.isoformat(), *(int(v) for v in row), repr(float(y))])
    _write(args.output, out.getvalue())


def cmd_train(args, rc: RunConfig) -> None:
    series = _load_series(args.input, rc)
    train = _split(series, rc)[0] if rc.cutoff is not None else series
    model = _make(args.model, rc).fit(prepare_train(train, rc.pipeline))
    _write(args.output, model.dumps())


def _history_for(model: forecasters.Forecaster, series: DailySeries, start: dt.date,
                 rc: RunConfig) -> DailySeries:
    if model.train_start < series.start_date or start - dt.timedelta(days=1) > series.end_date:
        raise CLIError("input does not cover the model's training window")
    return prepare_train(series.slice_dates(model.train_start, start - dt.timedelta(days=1)), rc.pipeline)


def cmd_predict(args, rc: RunConfig) -> None:
    model = forecasters.load(args.model_file)
    start = _date(args.start) if args.start else model.train_end + dt.timedelta(days=1)
    if start <= model.train_end:
        raise CLIError(f"forecast start {start} is inside the training window (ends {model.train_end})")
    history = None
    series = None
    if args.input:
        rc.station = model.station_code if rc.station is None else rc.station
        rc.vehicle_class = model.vehicle_class
        series = _load_series(args.input, rc)
    if args.days is not None:
        days = args.days
    elif series is not None and series.end_date >= start:
        days = (series.end_date - start).days + 1
    else:
        raise CLIError("pass --days (or an --input that extends past the forecast start)")
    dates = [start + dt.timedelta(days=k) for k in range(days)]
    if isinstance(model, (forecasters.LSTMForecaster, forecasters.NaiveSeasonalForecaster)):
        if series is None:
            raise CLIError(f"{model.name} forecasts need --input history")
        if model.uses_realized_history:
            raise CLIError("one_step LSTM models are scored with 'evaluate', not 'predict'")
        history = _history_for(model, series, start, rc)
    values = model.predict(dates, history)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["DATE", "FORECAST"])
    for d, v in zip(dates, values):
        w.writerow([d.isoformat(), f"{max(float(v), 0.0):.6f}"])
    _write(args.output, out.getvalue())


def cmd_evaluate(args, rc: RunConfig) -> None:
    if bool(args.model) == bool(args.model_file):
        raise CLIError("pass exactly one of --model or --model-file")
    if args.model_file:
        model = forecasters.load(args.model_file)
        if rc.station is None:
            rc.station = model.station_code
        rc.vehicle_class = model.vehicle_class
        if rc.cutoff is None:
            rc.cutoff = model.train_end
    else:
        model = _make(args.model, rc)
    series = _load_series(args.input, rc)
    train, test = _split(series, rc)
    if args.model_file and model.train_start > train.start_date:
        train = train.slice_dates(model.train_start, train.end_date)
    report = evaluate(model, train, test, rc.pipeline, name=model.name)
    _write(args.report, reports_csv([report]))
    if args.daily:
        _write(args.daily, report.daily_csv())
    sys.stdout.write(reports_table([report]))


def cmd_compare(args, rc: RunConfig) -> None:
    names = [n.strip() for n in (args.models or rc.config.get("models", "")).split(",") if n.strip()]
    if not names:
        raise CLIError("--models is required")
    series = _load_series(args.input, rc) if args.input else _benchmark_series(rc)
    if rc.cutoff is None:
        raise CLIError("--cutoff is required")
    train, test = _split(series, rc)
    models = [_make(n, rc) for n in names]
    reports = compare(models, train, test, rc.pipeline, names=names)
    if args.output:
        _write(args.output, reports_csv(reports))
    if args.daily_dir:
        d = Path(args.daily_dir)
        d.mkdir(parents=True, exist_ok=True)
        for r in reports:
            _write(d / f"daily_{r.model}.csv", r.daily_csv())
    sys.stdout.write(reports_table(reports))


def _read_daily(path) -> tuple[list[dt.date], np.ndarray, np.ndarray]:
    dates, actual, fc = [], [], []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for lineno, row in enumerate(reader, start=2):
                try:
                    dates.append(dt.date.fromisoformat(row["DATE"]))
                    actual.append(float(row["ACTUAL"]) if row["ACTUAL"] else np.nan)
                    fc.append(float(row["FORECAST"]))
                except (KeyError, TypeError, ValueError):
                    raise CLIError(f"{path}: line {lineno}: expected DATE,ACTUAL,FORECAST") from None
    except OSError as exc:
        raise CLIError(f"{path}: {exc.strerror}") from None
    return dates, np.array(actual), np.array(fc)


def cmd_plot(args, rc: RunConfig) -> None:
    dates, actual, fc = _read_daily(args.daily)
    label = f"{args.label} forecast" if args.label else "Forecast"
    _write(args.output, plot.line_chart(dates, actual, fc, args.title or "", ("Measured traffic", label)))


# argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog=PROG, description="Forecast daily toll-station traffic in batch.",
        epilog="Run '%(prog)s COMMAND --help' for the options of one command.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, series=True, pipeline=True):
        sp.add_argument("--config", help="key = value settings file ('benchmark' = bundled config)")
        sp.add_argument("--seed", type=int, help="run seed fanned out to every component (default 0)")
        if series:
            sp.add_argument("--station", type=int, help="station code (default: the only one in the file)")
            sp.add_argument("--vehicle-class", choices=[v.value for v in VehicleClass],
                            help="vehicle class to model (default TC1)")
            sp.add_argument("--week-start", type=int, choices=range(7), metavar="0-6",
                            help="weekday numbered 0 in DAY_OF_WEEK, Monday=0 (default 0)")
        if pipeline:
            sp.add_argument("--filter", choices=["median", "moving_average", "exponential",
                                                 "deseasonalize", "none"],
                            help="filter applied after imputation (default median); deseasonalize is for clean only")
            sp.add_argument("--window", type=int, help="median/moving-average window (default 5)")
            sp.add_argument("--alpha", type=float, help="exponential smoothing factor (default 0.3)")
            sp.add_argument("--period", type=int, help="deseasonalization period (default 7)")

    def model_opts(sp):
        sp.add_argument("--param", action="append", metavar="MODEL.KNOB=VALUE",
                        help="override a model knob, e.g. rf.n_estimators=500 (repeatable)")
        sp.add_argument("--lstm-mode", choices=["multi_step", "one_step"],
                        help="LSTM forecast mode (default multi_step)")

    sp = sub.add_parser("synth", help="generate the synthetic benchmark CSVs")
    common(sp, series=False, pipeline=False)
    sp.add_argument("--days", type=int, help="number of days (default from config: 1461)")
    sp.add_argument("--output", "-o", default="traffic.csv",
                    help="noisy CSV path; the clean twin goes to <stem>_clean.csv")
    sp.set_defaults(func=cmd_synth, _default_config="benchmark")

    sp = sub.add_parser("clean", help="impute and filter one series; writes DATE,VALUE")
    common(sp)
    sp.add_argument("--input", "-i", required=True)
    sp.add_argument("--output", "-o", required=True)
    sp.set_defaults(func=cmd_clean)

    sp = sub.add_parser("featurize", help="write the calendar feature matrix (or LSTM windows)")
    common(sp)
    sp.add_argument("--input", "-i", required=True)
    sp.add_argument("--output", "-o", required=True)
    sp.add_argument("--windows", metavar="LOOKBACK,LOOKFORWARD",
                    help="write LSTM training windows instead of the calendar matrix")
    sp.set_defaults(func=cmd_featurize)

    sp = sub.add_parser("train", help="fit a model and write it as a model file")
    common(sp)
    model_opts(sp)
    sp.add_argument("--input", "-i", required=True)
    sp.add_argument("--model", "-m", required=True, choices=forecasters.MODEL_NAMES)
    sp.add_argument("--cutoff", help="last training day, YYYY-MM-DD (default: whole input)")
    sp.add_argument("--output", "-o", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="forecast with a model file; writes DATE,FORECAST")
    common(sp)
    sp.add_argument("--model-file", required=True)
    sp.add_argument("--input", "-i", help="history CSV (needed by lstm/naive; sets default --days)")
    sp.add_argument("--start", help="first forecast day (default: day after training)")
    sp.add_argument("--days", type=int, help="number of days to forecast")
    sp.add_argument("--output", "-o", required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="score one model on the window after --cutoff")
    common(sp)
    model_opts(sp)
    sp.add_argument("--input", "-i", required=True)
    sp.add_argument("--model", "-m", choices=forecasters.MODEL_NAMES, help="fit this model in-process")
    sp.add_argument("--model-file", help="score a previously trained model file")
    sp.add_argument("--cutoff", help="last training day, YYYY-MM-DD")
    sp.add_argument("--score-against", choices=["raw", "filtered"], help="actuals to score (default raw)")
    sp.add_argument("--report", required=True, help="report CSV path")
    sp.add_argument("--daily", help="per-day DATE,ACTUAL,FORECAST CSV path")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("compare", help="SMAPE table for several models")
    common(sp)
    model_opts(sp)
    sp.add_argument("--input", "-i", help="traffic CSV (default: synthesize the bundled benchmark)")
    sp.add_argument("--models", help="comma-separated: " + ",".join(forecasters.MODEL_NAMES))
    sp.add_argument("--cutoff", help="last training day, YYYY-MM-DD")
    sp.add_argument("--score-against", choices=["raw", "filtered"], help="actuals to score (default raw)")
    sp.add_argument("--output", "-o", help="summary CSV path")
    sp.add_argument("--daily-dir", help="directory for per-model daily_<model>.csv files")
    sp.set_defaults(func=cmd_compare, _compare=True)

    sp = sub.add_parser("plot", help="SVG chart of measured vs forecast from a daily CSV")
    sp.add_argument("--daily", required=True, help="DATE,ACTUAL,FORECAST CSV")
    sp.add_argument("--output", "-o", required=True)
    sp.add_argument("--title")
    sp.add_argument("--label", help="model name for the legend")
    sp.set_defaults(func=cmd_plot)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "_compare", False) and not args.input and not args.config:
        args._default_config = "benchmark"
    try:
        rc = resolve(args) if args.command != "plot" else RunConfig("plot")
        args.func(args, rc)
    except (CLIError, ConfigError, OSError, ValueError, RuntimeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        if isinstance(exc, OSError) and exc.filename:
            msg = f"{exc.filename}: {exc.strerror}"
        print(f"{PROG}: error: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
