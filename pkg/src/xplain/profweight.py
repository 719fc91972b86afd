"""Transfer a network's confidence profile to a simple model by reweighting.

Linear probes read each hidden layer of a trained network. Starting at the
first layer whose probe beats the simple model by a margin, the probes'
confidence in each training row's true label is averaged into a per-row
weight. The simple model is then retrained with those weights, so rows the
network finds hard (often mislabelled ones) count for less.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ExplainerKind, GlobalWBExplainer, ModelHandle
from .data import TabularDataset
from .errors import NoLayers, UsageError
from .explanation import Explanation, SampleWeights
from .models import TreeModel, _class_labels, _xy, train_logistic, train_tree

TRAIN_FRACTION = 0.8


def split_indices(n: int, seed: int, train_fraction: float = TRAIN_FRACTION):
    """Deterministic shuffled split into ``(train, held_out)`` index arrays."""
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(train_fraction * n))
    return np.sort(perm[:cut]), np.sort(perm[cut:])


@dataclass
class ProbeSet:
    probes: list
    accuracies: list
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int

    def __len__(self):
        return len(self.probes)

    def confidences(self, complex_model: ModelHandle, X, y) -> np.ndarray:
        """Probe probability of the true label, shape ``(layers, rows)``."""
        H = complex_model.layers(np.atleast_2d(X))
        rows = np.arange(len(y))
        return np.array([p.predict_proba(h)[rows, y] for p, h in zip(self.probes, H)])


def train_probes(complex_model: ModelHandle, data, y=None, l2: float = 1e-3,
                 seed: int = 0, max_iters: int = 2000) -> ProbeSet:
    """Fit one logistic probe per hidden layer on a seeded 80/20 split.

    Raises:
        NoLayers: the model has no hidden layers to probe.
    """
    if not getattr(complex_model, "has_layers", False):
        raise NoLayers(f"{type(complex_model).__name__} has no hidden layers")
    X, y = _xy(data, y)
    y = _class_labels(y)
    C = max(int(y.max()) + 1, getattr(complex_model, "num_classes", 2))
    H = complex_model.layers(X)
    if not H:
        raise NoLayers("model reports zero hidden layers")
    tr, te = split_indices(len(y), seed)
    probes, accs = [], []
    for h in H:
        probe = train_logistic(h[tr], y[tr], l2=l2, max_iters=max_iters, seed=seed,
                               num_classes=C)
        probes.append(probe)
        accs.append(float(np.mean(probe.predict(h[te]) == y[te])) if len(te) else 0.0)
    return ProbeSet(probes, accs, tr, te, seed)


def normalize_weights(conf) -> np.ndarray:
    """Scale nonnegative confidences to mean one."""
    conf = np.asarray(conf, dtype=float)
    m = conf.mean()
    if not m > 0:
        return np.ones_like(conf)
    return conf / m


def start_layer(accuracies, simple_acc: float, margin: float):
    """First layer whose probe accuracy reaches ``simple_acc + margin``."""
    for l, a in enumerate(accuracies):
        if a >= simple_acc + margin:
            return l
    return None


def _accuracy(model: TreeModel, X, y) -> float:
    return float(np.mean(model.predict(X) == y)) if len(y) else 0.0


@dataclass
class ProfWeightResult:
    weights: SampleWeights
    tree: TreeModel
    baseline_tree: TreeModel


def profweight(complex_model: ModelHandle, probes: ProbeSet, data, y=None,
               max_depth: int = 1, margin: float = 0.02, test=None) -> ProfWeightResult:
    """Reweight the training rows and retrain a depth-limited tree.

    Args:
        complex_model: the network the probes were trained on.
        probes: output of :func:`train_probes`.
        data: training rows (TabularDataset or matrix with ``y``).
        max_depth: depth of the simple tree; 1 gives a stump.
        margin: accuracy gap a probe needs over the simple model.
        test: optional ``(X, y)`` pair for reporting accuracy. Without it the
            probes' held-out split is used.

    Returns:
        Weights with provenance, the reweighted tree and the unweighted tree,
        both trained on all rows. If no layer qualifies, weights are uniform
        and ``qualified`` is False.
    """
    X, y = _xy(data, y)
    y = _class_labels(y)
    C = max(int(y.max()) + 1, 2)
    tr, te = probes.train_idx, probes.test_idx
    if len(tr) + len(te) != len(y):
        raise UsageError("probes were trained on a dataset of a different size")
    ref = train_tree(X[tr], y[tr], max_depth=max_depth, num_classes=C)
    simple_acc = _accuracy(ref, X[te], y[te])
    l0 = start_layer(probes.accuracies, simple_acc, margin)
    if l0 is None:
        w = np.ones(len(y))
    else:
        conf = probes.confidences(complex_model, X, y)[l0:]
        w = normalize_weights(conf.mean(axis=0))

    base = train_tree(X, y, max_depth=max_depth, num_classes=C)
    tree = train_tree(X, y, max_depth=max_depth, sample_weight=w, num_classes=C)
    if test is not None:
        Xt, yt = _xy(test[0], test[1]) if isinstance(test, tuple) else _xy(test)
        yt = _class_labels(yt)
        base_acc, new_acc = _accuracy(base, Xt, yt), _accuracy(tree, Xt, yt)
    else:
        held = train_tree(X[tr], y[tr], max_depth=max_depth, sample_weight=w[tr], num_classes=C)
        base_acc, new_acc = simple_acc, _accuracy(held, X[te], y[te])
    sw = SampleWeights(w, l0, list(probes.accuracies), base_acc, new_acc, l0 is not None)
    return ProfWeightResult(sw, tree, base)


class ProfweightExplainer(GlobalWBExplainer):
    """Explain a network through the reweighted simple model it induces."""

    kind = ExplainerKind.ProfWeight

    def __init__(self, complex_model, max_depth=1, margin=0.02, l2=1e-3, seed=0):
        super().__init__()
        self.complex_model = complex_model
        self.max_depth, self.margin, self.l2, self.seed = max_depth, margin, l2, seed
        self.result = None

    def fit(self, data, y=None, test=None):
        if isinstance(data, TabularDataset) and y is None:
            X, y = data.values, data.labels
        else:
            X = data
        probes = train_probes(self.complex_model, X, y, l2=self.l2, seed=self.seed)
        self.result = profweight(self.complex_model, probes, X, y, self.max_depth,
                                 self.margin, test)
        self._fitted = True
        return self

    def explain(self) -> Explanation:
        self._check_fitted()
        params = {"max_depth": self.max_depth, "margin": self.margin, "l2": self.l2}
        return Explanation.build(self.result.weights, self.kind.value, params, self.seed)


__all__ = [
    "ProbeSet", "ProfWeightResult", "ProfweightExplainer",
    "normalize_weights", "profweight", "split_indices", "start_layer", "train_probes",
]
