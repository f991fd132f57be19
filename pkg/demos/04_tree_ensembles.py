"""Random forest, extra-trees and AdaBoost.R2 on calendar features.

Everything here is plain numpy: CART trees grown by exhaustive or random
thresholds, bagged or boosted. The last year of a synthetic station is held
out and scored with SMAPE.
"""

import datetime as dt

import numpy as np

from trafficcast.evaluation import naive_seasonal, smape
from trafficcast.features import build_matrix
from trafficcast.preprocessing import impute_missing, median_filter
from trafficcast.synthgen import SynthConfig, generate
from trafficcast.timeseries import SplitSpec, split_train_test
from trafficcast.trees import (BoostParams, ForestParams, TreeParams, fit_adaboost_r2, fit_forest,
                               fit_tree)

# a single tree on four points: the split lands halfway between 1 and 2
tree = fit_tree([[0], [1], [2], [3]], [0, 0, 10, 10])
print("root split at", tree.threshold[0], "->", tree.predict([[0.5], [2.5]]))

config = SynthConfig(n_days=3 * 365, base_level=12000,
                     weekly_amplitudes=(0.93, 0.90, 0.91, 0.95, 1.08, 1.16, 1.07),
                     annual_amplitude=0.2, trend=0.04, noise_sigma=0.04, outlier_rate=0.01, seed=5)
series = generate(config).series
train, test = split_train_test(series, SplitSpec(dt.date(2015, 5, 31)))
history = median_filter(impute_missing(train), 5)
m_train = build_matrix(history)
m_test = build_matrix(test)

models = {
    "random forest": fit_forest(m_train.rows, m_train.targets,
                                ForestParams(200, TreeParams("sqrt", seed=1))),
    "extra-trees": fit_forest(m_train.rows, m_train.targets,
                              ForestParams(100, TreeParams(0.75, 10, 13, seed=1), mode="extra_trees")),
    "AdaBoost.R2": fit_adaboost_r2(m_train.rows, m_train.targets,
                                   BoostParams(300, 1.0, TreeParams(max_depth=3, seed=1))),
}
for name, model in models.items():
    print(f"{name:14s} SMAPE {smape(test.values, model.predict(m_test.rows)):5.2f}%")
print(f"{'naive (t-7)':14s} SMAPE {smape(test.values, naive_seasonal(history, len(test))):5.2f}%")

boost = models["AdaBoost.R2"]
print(f"boosting kept {len(boost.estimators)} rounds; first estimator weights",
      np.round(boost.estimator_weights[:4], 3))
