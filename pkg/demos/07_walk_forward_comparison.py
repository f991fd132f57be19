"""Walk-forward comparison of every model on the bundled benchmark.

Three years train, the fourth is scored. This is the same run the
acceptance suite makes, with smaller ensembles so it finishes in well under
a minute; use ``trafficcast compare`` for the full configuration.
"""

import dataclasses
import datetime as dt

from trafficcast import forecasters
from trafficcast.config import load_config, section
from trafficcast.evaluation import PipelineConfig, compare, reports_table
from trafficcast.preprocessing import FilterConfig
from trafficcast.synthgen import SynthConfig, generate_station
from trafficcast.timeseries import SplitSpec, VehicleClass, split_train_test

cfg = load_config("benchmark")
synth = dataclasses.replace(SynthConfig.from_mapping(section(cfg, "synth")), seed=42)
series = generate_station(synth)[VehicleClass.TC1].series
train, test = split_train_test(series, SplitSpec(dt.date(2016, 5, 31)))

quick = {
    "rf": {"n_estimators": 100},
    "extratrees": {},
    "adaboost": {"n_estimators": 300},
    "mlp": {},
    "lstm": {"hidden_layer_sizes": (16,), "epochs": 10},
    "naive": {},
}
models = [forecasters.make_forecaster(name, params, seed=42) for name, params in quick.items()]
reports = compare(models, train, test, PipelineConfig(FilterConfig("median", 5)), names=list(quick))
print(reports_table(reports))
best = reports[0]
print(f"best: {best.model}; its forecast for the first week:", best.forecast[:7].round())
