"""Quality metrics for feature attributions.

Faithfulness correlates each attribution with the score drop seen when that
feature alone is reset to the baseline. Monotonicity starts from the
baseline, restores features in increasing order of attribution and checks
that the score never falls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import class_scorer
from .errors import DegenerateVariance, UsageError
from .explanation import FeatureAttribution, _clean


@dataclass
class MetricResult:
    name: str
    value: object
    trace: list

    def to_dict(self) -> dict:
        return {"name": self.name, "value": _clean(self.value), "trace": _clean(self.trace)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


def _inputs(x, attribution, baseline):
    x = np.asarray(x, dtype=float)
    if isinstance(attribution, FeatureAttribution):
        phi, cls = attribution.values, attribution.target_class
        if baseline is None:
            baseline = attribution.baseline
    else:
        phi, cls = attribution, None
    phi = np.asarray(phi, dtype=float)
    if baseline is None:
        raise UsageError("a baseline vector is required")
    baseline = np.asarray(baseline, dtype=float)
    if not (len(x) == len(phi) == len(baseline)):
        raise UsageError("x, attribution and baseline must have the same length")
    return x, phi, baseline, cls


def score_drops(model, x, baseline, cls: int = 0) -> np.ndarray:
    """``f(x) - f(x with feature i set to baseline_i)`` for every ``i``."""
    x = np.asarray(x, dtype=float)
    f = class_scorer(model, cls)
    Z = np.repeat(x[None, :], len(x), axis=0)
    idx = np.arange(len(x))
    Z[idx, idx] = np.asarray(baseline, dtype=float)
    return float(f(x)[0]) - f(Z)


def faithfulness(model, x, attribution, baseline=None, cls=None) -> MetricResult:
    """Pearson correlation between attributions and single-feature score drops.

    Args:
        model: ModelHandle or batch scoring callable.
        x: explained instance.
        attribution: FeatureAttribution or a plain vector.
        baseline: replacement values; defaults to the attribution's baseline.
        cls: explained class; defaults to the attribution's target class.

    Raises:
        DegenerateVariance: attributions or drops are all equal.
    """
    x, phi, baseline, acls = _inputs(x, attribution, baseline)
    cls = cls if cls is not None else (acls or 0)
    if len(phi) < 2:
        raise UsageError("faithfulness needs at least two features")
    drops = score_drops(model, x, baseline, cls)
    if np.ptp(phi) == 0 or np.ptp(drops) == 0:
        raise DegenerateVariance("correlation undefined: constant attributions or drops")
    a = phi - phi.mean()
    b = drops - drops.mean()
    r = float(a @ b / np.sqrt((a @ a) * (b @ b)))
    return MetricResult("faithfulness", float(np.clip(r, -1.0, 1.0)), list(drops))


def addition_order(phi) -> list[int]:
    """Indices by increasing attribution, ties by index."""
    phi = np.asarray(phi, dtype=float)
    return sorted(range(len(phi)), key=lambda j: (phi[j], j))


def monotonicity(model, x, attribution, baseline=None, cls=None) -> MetricResult:
    """Whether restoring features in increasing attribution order never lowers the score.

    The trace holds the score after each restoration (one entry per feature);
    the check runs over the trace, so a single feature is vacuously monotone.
    """
    x, phi, baseline, acls = _inputs(x, attribution, baseline)
    cls = cls if cls is not None else (acls or 0)
    f = class_scorer(model, cls)
    order = addition_order(phi)
    Z = np.empty((len(order), len(x)))
    cur = baseline.copy()
    for k, j in enumerate(order):
        cur[j] = x[j]
        Z[k] = cur
    trace = f(Z)
    ok = bool(np.all(np.diff(trace) >= 0))
    return MetricResult("monotonicity", ok, list(trace))
