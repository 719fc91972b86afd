"""Teaching explanations: learn labels and explanation ids jointly.

Each training row carries a label ``y`` and an explanation id ``e`` in
``[0, E)``. The pair is folded into one combined class ``y * E + e``, a base
classifier learns the combined classes, and predictions are unfolded with
``divmod``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DISExplainer, ExplainerKind, ModelHandle
from ..errors import RangeViolation, UsageError
from ..explanation import Explanation, LabeledExplanation
from ..models import train_logistic, train_tree


def encode(y, e, n_explanations: int):
    return np.asarray(y) * n_explanations + np.asarray(e)


def decode(c, n_explanations: int):
    return np.divmod(np.asarray(c), n_explanations)


@dataclass
class TEDModel:
    base: ModelHandle
    n_explanations: int
    num_classes: int
    params: dict

    def predict(self, X):
        """Returns ``(labels, explanation ids)`` arrays."""
        return decode(self.base.predict(np.atleast_2d(X)), self.n_explanations)


def ted_fit(X, y, e, n_explanations=None, num_classes=None, base: str = "tree",
            depth: int = 6, l2: float = 1e-4) -> TEDModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    e = np.asarray(e)
    if not (len(X) == len(y) == len(e)):
        raise RangeViolation("X, y and e must have the same length")
    E = int(n_explanations if n_explanations is not None else e.max() + 1)
    C = int(num_classes if num_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= C or np.any(y != np.floor(y)):
        raise RangeViolation(f"labels must be integers in [0, {C})")
    if e.min() < 0 or e.max() >= E or np.any(e != np.floor(e)):
        raise RangeViolation(f"explanation ids must be integers in [0, {E})")
    combined = encode(y.astype(np.int64), e.astype(np.int64), E)
    if base == "tree":
        model = train_tree(X, combined, max_depth=depth, num_classes=C * E)
    elif base == "logistic":
        model = train_logistic(X, combined, l2=l2, num_classes=C * E)
    else:
        raise UsageError(f"unknown base learner {base!r}")
    params = {"base": base, "depth": depth, "l2": l2, "n_explanations": E, "num_classes": C}
    return TEDModel(model, E, C, params)


def ted_predict(model: TEDModel, x) -> LabeledExplanation:
    c = int(model.base.predict(np.asarray(x, dtype=float)[None, :])[0])
    label, expl = divmod(c, model.n_explanations)
    return LabeledExplanation(int(label), int(expl), c, model.n_explanations)


class TEDCartesianExplainer(DISExplainer):
    kind = ExplainerKind.TED

    def __init__(self, base="tree", depth=6, l2=1e-4):
        super().__init__()
        self.base, self.depth, self.l2 = base, depth, l2
        self.model = None

    def fit(self, X, y, e, n_explanations=None):
        self.model = ted_fit(X, y, e, n_explanations, base=self.base, depth=self.depth,
                             l2=self.l2)
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        return self.model.predict(X)

    def explain(self, x=None) -> Explanation:
        self._check_fitted()
        if x is None:
            raise UsageError("TED explains a single instance: pass x")
        return Explanation.build(ted_predict(self.model, x), self.kind.value, self.model.params)
