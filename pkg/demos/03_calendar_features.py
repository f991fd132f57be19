"""From a daily series to the calendar learning matrix.

Each day becomes a row of calendar attributes plus a one-hot weekday; the
target is that day's count. Scaling parameters are fitted on training rows
only and reused for later dates.
"""

import datetime as dt

import numpy as np

from trafficcast.features import (FEATURE_COLUMNS, apply_scaler, build_matrix, calendar_matrix,
                                  explode_date, fit_scaler)
from trafficcast.synthgen import SynthConfig, generate

row = explode_date(dt.date(2016, 6, 1))
print(row)
print(dict(zip(FEATURE_COLUMNS, row.as_vector())))

# around New Year the ISO week number wraps
for day in (dt.date(2020, 12, 31), dt.date(2021, 1, 3), dt.date(2021, 1, 4)):
    r = explode_date(day)
    print(day, "week", r.week, "weekday", r.day_of_week, "weekend" if r.is_weekend else "")

# weeks can also be numbered from Sunday
print("Sunday, week starting Sunday:", explode_date(dt.date(2021, 1, 3), week_start=6).day_of_week)

series = generate(SynthConfig(n_days=60, noise_sigma=0.02, seed=1)).series
m = build_matrix(series)
print(m.rows.shape, "targets", m.targets[:3].round())

params = fit_scaler(m, "minmax01")
scaled = apply_scaler(m, params)
print("scaled ranges:", scaled.rows.min(axis=0).min(), scaled.rows.max(axis=0).max())

# dates after training reuse the same parameters and can leave [0, 1]
future = calendar_matrix([series.end_date + dt.timedelta(days=k) for k in range(1, 4)])
print(np.round(apply_scaler(future, params)[:, :6], 3))
