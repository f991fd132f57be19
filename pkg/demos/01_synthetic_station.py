"""Build a synthetic toll station and look at what it contains.

The generator multiplies a base level by weekday, summer and holiday
factors, adds a little noise, drops in rare 10x spikes and blanks out a
couple of outage spans. Next to every noisy series it keeps a clean twin,
which later demos use as ground truth.
"""

import dataclasses
import datetime as dt

import numpy as np

from trafficcast.config import load_config, section
from trafficcast.synthgen import SynthConfig, generate_station, station_records
from trafficcast.timeseries import VehicleClass, format_csv

# the bundled benchmark: four years starting 2013-06-01
config = SynthConfig.from_mapping(section(load_config("benchmark"), "synth"))
config = dataclasses.replace(config, seed=42)
station = generate_station(config)
light = station[VehicleClass.TC1]

s = light.series
print(f"{len(s)} days from {s.start_date} to {s.end_date}")
print(f"missing days: {int(s.missing.sum())}, spikes: {int(light.outlier_mask.sum())}, "
      f"clipped at zero: {light.n_clipped}")

# weekday profile of the clean twin (Monday first)
clean = light.clean.values
weekday = np.array([d.weekday() for d in light.clean.dates])
profile = [clean[weekday == k].mean() / clean.mean() for k in range(7)]
print("weekday profile:", " ".join(f"{p:.2f}" for p in profile))

# summer peak vs winter trough
months = np.array([d.month for d in light.clean.dates])
print(f"August / January ratio: {clean[months == 8].mean() / clean[months == 1].mean():.2f}")

# the three vehicle classes share the calendar but not the scale
for vc, result in station.items():
    print(f"{vc.value}: mean {np.nanmean(result.series.values):8.0f} vehicles/day")

# New Year's Eve collapse is visible in the raw counts
i = light.series.index_of(dt.date(2015, 12, 31))
print("around 2015-12-31:", light.series.values[i - 2:i + 3].round())

# the ingestion CSV drops days missing in any class
text = format_csv(station_records(station))
print(text.splitlines()[0])
print(text.splitlines()[1])
print(f"{len(text.splitlines()) - 1} data rows")
