"""Discrimination-aware classification toolkit.

Thin python surface over the C++ core: structured results cross the boundary
as canonical JSON and are returned here as plain dicts. Sign convention for
all difference metrics is E[.|S=1] - E[.|S=0]; negative values mean the
protected group is disadvantaged.
"""

import json as _json

from . import _core
from ._core import Dataset, FairauditError, Model, cost_threshold

__all__ = [
    "Dataset",
    "Model",
    "FairauditError",
    "load_csv",
    "load_model",
    "split",
    "generate_scenario",
    "mean_difference",
    "normalized_mean_difference",
    "conditional_mean_difference",
    "unexplained_difference",
    "regression_test",
    "knn_situation_test",
    "propensity_stratified_difference",
    "feature_protected_correlation",
    "support_report",
    "train",
    "evaluate",
    "cost_threshold",
    "flip_audit",
    "reweight",
    "resample",
    "massage",
    "group_thresholds",
    "tune_fairness_weight",
    "audit_data",
    "audit_model",
    "render_markdown",
    "run_feedback_sim",
]


def _dumps(obj):
    return obj if isinstance(obj, str) else _json.dumps(obj)


def load_csv(path, schema):
    """Load a CSV per a schema document (dict or JSON string)."""
    return _core.load_csv(str(path), _dumps(schema))


def load_model(path):
    return _core.load_model(str(path))


def split(dataset, holdout_fraction, seed=0):
    return _core.split(dataset, holdout_fraction, seed)


def generate_scenario(kind, n=1000, seed=0, **params):
    """Generate a synthetic scenario; returns (dataset, sidecar dict)."""
    dataset, sidecar = _core.generate_scenario(kind, n, seed, _json.dumps(params))
    return dataset, _json.loads(sidecar)


def mean_difference(dataset, outcome="label"):
    return _json.loads(_core.mean_difference(dataset, outcome))


def normalized_mean_difference(dataset, outcome="label"):
    return _json.loads(_core.normalized_mean_difference(dataset, outcome))


def conditional_mean_difference(dataset, outcome, stratification):
    return _json.loads(
        _core.conditional_mean_difference(dataset, outcome, _dumps(stratification))
    )


def unexplained_difference(dataset, outcome, stratification):
    return _json.loads(
        _core.unexplained_difference(dataset, outcome, _dumps(stratification))
    )


def regression_test(dataset, outcome="label"):
    return _json.loads(_core.regression_test(dataset, outcome))


def knn_situation_test(dataset, outcome, k, t):
    return _json.loads(_core.knn_situation_test(dataset, outcome, k, t))


def propensity_stratified_difference(dataset, outcome="label", bins=5):
    return _json.loads(_core.propensity_stratified_difference(dataset, outcome, bins))


def feature_protected_correlation(dataset):
    return _json.loads(_core.feature_protected_correlation(dataset))


def support_report(dataset, conjunction_depth=0):
    return _json.loads(_core.support_report(dataset, conjunction_depth))


def train(dataset, **hyperparams):
    return _core.train(dataset, _json.dumps(hyperparams))


def evaluate(model, dataset, threshold=0.5):
    return _json.loads(_core.evaluate(model, dataset, threshold))


def flip_audit(model, dataset, threshold=0.5):
    return _json.loads(_core.flip_audit(model, dataset, threshold))


def reweight(dataset):
    out, record = _core.reweight(dataset)
    return out, _json.loads(record)


def resample(dataset, seed=0):
    out, record = _core.resample(dataset, seed)
    return out, _json.loads(record)


def massage(dataset):
    out, record = _core.massage(dataset)
    return out, _json.loads(record)


def group_thresholds(model, holdout, target="demographic_parity", epsilon=0.02, grid_step=0.01):
    return _json.loads(_core.group_thresholds(model, holdout, target, epsilon, grid_step))


def tune_fairness_weight(train_set, val_set, eta_grid, max_accuracy_loss=0.05, **hyperparams):
    return _json.loads(
        _core.tune_fairness_weight(
            train_set, val_set, list(eta_grid), max_accuracy_loss, _json.dumps(hyperparams)
        )
    )


def audit_data(dataset, config, seed=0):
    return _json.loads(_core.audit_data(dataset, _dumps(config), seed))


def audit_model(model, holdout, threshold, config, seed=0):
    return _json.loads(_core.audit_model(model, holdout, threshold, _dumps(config), seed))


def render_markdown(report):
    return _core.render_markdown(_dumps(report))


def run_feedback_sim(config):
    return _json.loads(_core.run_feedback_sim(_dumps(config)))
