"""Rolling forecast evaluation with NRMSE scoring."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import dmd
from .errors import SplitTooSmall
from .snapshot import SnapshotSeries

__all__ = [
    "RefitPolicy",
    "ForecastReport",
    "nrmse",
    "split",
    "rolling_forecast",
    "report_to_dict",
    "save_report",
]


class RefitPolicy(str, Enum):
    FIT_ONCE = "once"
    REFIT_EACH_STEP = "each"


# Flat nodes: an RMSE below this fraction of the panel magnitude is round-off, not a miss.
FLAT_RTOL = 1e-10


def nrmse(pred, actual, normalizer: str = "range", atol: float = 0.0) -> float:
    """Root-mean-square error in percent of the actual series' range (or mean).

    When the normaliser is zero the result is 0.0 for an exact forecast
    (RMSE at most ``atol``) and ``inf`` otherwise.
    """
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape or pred.size == 0:
        raise ValueError("pred and actual must be non-empty and equal length")
    rmse = math.sqrt(float(np.mean((pred - actual) ** 2)))
    if normalizer == "range":
        scale = float(actual.max() - actual.min())
    elif normalizer == "mean":
        scale = abs(float(actual.mean()))
    else:
        raise ValueError(f"unknown normalizer {normalizer!r}")
    if scale == 0.0:
        return 0.0 if rmse <= atol else math.inf
    return 100.0 * rmse / scale


def split(series: SnapshotSeries, test_fraction: float = 0.2) -> tuple[SnapshotSeries, SnapshotSeries]:
    """Contiguous train prefix and test suffix; the test holds ``round(T * fraction)`` rows."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n_test = int(round(series.T * test_fraction))
    n_train = series.T - n_test
    if n_train < 2 or n_test < 2:
        raise SplitTooSmall(f"{series.T} snapshots split into {n_train} train / {n_test} test; need >= 2 each")
    return series.slice(0, n_train), series.slice(n_train)


@dataclass(frozen=True, eq=False)
class ForecastReport:
    per_node_nrmse: np.ndarray
    mean_nrmse: float
    predictions: np.ndarray
    actuals: np.ndarray
    node_ids: tuple
    horizon: int = 1
    refit_policy: RefitPolicy = RefitPolicy.FIT_ONCE
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    t0: int = 0
    dt: float = 1.0

    @property
    def n_degenerate(self) -> int:
        return int(np.count_nonzero(self.degenerate))

    def prediction_series(self) -> SnapshotSeries:
        return SnapshotSeries(self.predictions, self.dt, self.node_ids, self.t0, nonnegative=False)


def score(predictions, actuals, normalizer: str = "range"):
    """Per-node NRMSE, the mean over non-degenerate nodes, and the degenerate mask."""
    predictions = np.asarray(predictions, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    atol = FLAT_RTOL * max(1.0, float(np.abs(actuals).max(initial=0.0)))
    per = np.array([nrmse(predictions[:, j], actuals[:, j], normalizer, atol) for j in range(actuals.shape[1])])
    if normalizer == "range":
        degenerate = np.ptp(actuals, axis=0) == 0
    else:
        degenerate = actuals.mean(axis=0) == 0
    kept = per[~degenerate]
    # An all-degenerate panel still scores: exact forecasts give 0, any miss gives inf.
    mean = float(kept.mean()) if kept.size else float(per.max(initial=0.0))
    return per, mean, degenerate


def _advance_operator(model: dmd.DmdModel, horizon: int) -> np.ndarray:
    """Real ``D x D`` map ``Phi Lambda^h Phi^+`` that carries a snapshot ``h`` steps ahead."""
    pinv = np.linalg.pinv(model.modes)
    op = (model.modes * model.eigenvalues**horizon) @ pinv
    return np.ascontiguousarray(op.real)


def rolling_forecast(
    series: SnapshotSeries,
    policy: dmd.RankPolicy | None = None,
    test_fraction: float = 0.2,
    refit_policy: RefitPolicy | str = RefitPolicy.FIT_ONCE,
    horizon: int = 1,
    normalizer: str = "range",
) -> ForecastReport:
    """Predict every test snapshot from data strictly before it.

    Each x_t is forecast ``horizon`` steps ahead from the observed snapshot
    x_{t-horizon}.  ``FIT_ONCE`` fits one model on the training prefix;
    ``REFIT_EACH_STEP`` refits on all rows up to x_{t-horizon}.
    """
    refit_policy = RefitPolicy(refit_policy)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    train, test = split(series, test_fraction)
    values = series.values
    start = train.T
    anchors = np.arange(start, series.T) - horizon
    if anchors[0] < 0 or (refit_policy is RefitPolicy.REFIT_EACH_STEP and anchors[0] + 1 < 2):
        raise SplitTooSmall("horizon reaches before the available history")

    if refit_policy is RefitPolicy.FIT_ONCE:
        model = dmd.fit_series(train, policy)
        op = _advance_operator(model, horizon)
        predictions = values[anchors] @ op.T
    else:
        predictions = np.empty((anchors.size, series.D))
        for k, a in enumerate(anchors):
            model = dmd.fit_series(series.slice(0, a + 1), policy)
            predictions[k] = _advance_operator(model, horizon) @ values[a]

    actuals = np.array(test.values)
    per, mean, degenerate = score(predictions, actuals, normalizer)
    return ForecastReport(
        per_node_nrmse=per,
        mean_nrmse=mean,
        predictions=predictions,
        actuals=actuals,
        node_ids=series.node_ids,
        horizon=horizon,
        refit_policy=refit_policy,
        degenerate=degenerate,
        t0=test.t0,
        dt=series.dt,
    )


def _json_float(v: float):
    # JSON has no infinity; the flagged sentinel is spelt out.
    return v if math.isfinite(v) else "inf"


def report_to_dict(report: ForecastReport, config: dict | None = None) -> dict:
    return {
        "mean_nrmse": _json_float(report.mean_nrmse),
        "per_node": {n: _json_float(float(v)) for n, v in sorted(zip(report.node_ids, report.per_node_nrmse))},
        "degenerate_nodes": sorted(n for n, d in zip(report.node_ids, report.degenerate) if d),
        "n_degenerate": report.n_degenerate,
        "horizon": report.horizon,
        "refit_policy": report.refit_policy.value,
        "n_test": int(report.actuals.shape[0]),
        "config": config or {},
    }


def save_report(report: ForecastReport, path, config: dict | None = None) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report, config), fh, indent=1, sort_keys=True)
        fh.write("\n")
