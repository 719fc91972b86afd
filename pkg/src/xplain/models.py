"""Built-in models implementing :class:`~xplain.core.ModelHandle`.

* :class:`LogisticModel` -- softmax regression, analytic input gradient.
* :class:`MlpModel` -- ReLU network with softmax output; exposes hidden layers.
* :class:`TreeModel` -- weighted Gini decision tree; black box only.

All arithmetic is float64. Training is deterministic given the seed.
"""

from __future__ import annotations

import hashlib
import json
from typing import Optional, Sequence

import numpy as np

from .core import ModelHandle
from .data import Scaler, TabularDataset, _gini
from .errors import (
    AllWeightsZero, BadArchitecture, DataError, NoLabels, SchemaViolation,
)


def softmax(Z):
    Z = np.atleast_2d(Z)
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _xy(data, y=None):
    if isinstance(data, TabularDataset):
        if data.labels is None:
            raise NoLabels("training needs labels")
        return data.values, np.asarray(data.labels)
    if y is None:
        raise NoLabels("training needs labels")
    return np.asarray(data, dtype=float), np.asarray(y)


def _class_labels(y):
    y = np.asarray(y)
    if not np.issubdtype(y.dtype, np.integer):
        if np.all(np.mod(y, 1) == 0) and np.all(y >= 0):
            y = y.astype(np.int64)
        else:
            raise DataError("class labels must be nonnegative integers")
    if y.min() < 0:
        raise DataError("class labels must be nonnegative integers")
    return y


def training_digest(X, y, params: dict) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=float).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.int64).tobytes())
    h.update(json.dumps(params, sort_keys=True).encode())
    return h.hexdigest()[:16]


# -- logistic -------------------------------------------------------------------

class LogisticModel(ModelHandle):
    """``score(x) = softmax(W x + b)`` with ``W`` of shape ``(C, d)``."""

    has_gradient = True

    def __init__(self, W, b, *, seed=None, digest=None, l2=0.0):
        self.W = np.asarray(W, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.num_classes = self.W.shape[0]
        self.seed = seed
        self.digest = digest
        self.l2 = l2

    @classmethod
    def binary(cls, w, b=0.0):
        """Two-class model whose class-1 log-odds are ``w . x + b``."""
        w = np.asarray(w, dtype=float)
        return cls(np.vstack([np.zeros_like(w), w]), np.array([0.0, float(b)]))

    def predict_proba(self, X):
        return softmax(np.atleast_2d(X) @ self.W.T + self.b)

    def gradient(self, x, cls):
        p = self.score(x)
        return p[cls] * (self.W[cls] - p @ self.W)

    def to_dict(self):
        return {"type": "logistic", "shapes": [list(self.W.shape), list(self.b.shape)],
                "params": self.W.ravel().tolist() + self.b.tolist(),
                "seed": self.seed, "training_digest": self.digest}


def logistic_objective(W, b, X, Y1h, l2):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient."""
    n = X.shape[0]
    Z = X @ W.T + b
    Z = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(Z).sum(axis=1))
    f = -(Y1h * (Z - logsum[:, None])).sum() / n + 0.5 * l2 * (W * W).sum()
    R = (softmax(Z) - Y1h) / n
    return f, R.T @ X + l2 * W, R.sum(axis=0)


def train_logistic(data, y=None, l2: float = 1e-4, max_iters: int = 2000, tol: float = 1e-6,
                   seed: int = 0, num_classes: Optional[int] = None) -> LogisticModel:
    """Full-batch gradient descent with backtracking line search.

    Constant labels give a bias-only model whose score is one-hot on that
    class.
    """
    X, y = _xy(data, y)
    y = _class_labels(y)
    n, d = X.shape
    C = num_classes or max(int(y.max()) + 1, 2)
    params = {"model": "logistic", "l2": l2, "max_iters": max_iters, "tol": tol}
    digest = training_digest(X, y, params)
    if np.unique(y).size == 1:
        b = np.full(C, -50.0)
        b[y[0]] = 0.0
        return LogisticModel(np.zeros((C, d)), b, seed=seed, digest=digest, l2=l2)
    Y = np.zeros((n, C))
    Y[np.arange(n), y] = 1.0
    W, b = np.zeros((C, d)), np.zeros(C)
    f, gW, gb = logistic_objective(W, b, X, Y, l2)
    step = 1.0
    for _ in range(max_iters):
        gnorm2 = (gW * gW).sum() + (gb * gb).sum()
        if np.sqrt(gnorm2) <= tol:
            break
        step = min(step * 2.0, 1e6)
        while True:
            W2, b2 = W - step * gW, b - step * gb
            f2, gW2, gb2 = logistic_objective(W2, b2, X, Y, l2)
            if f2 <= f - 0.5 * step * gnorm2 or step < 1e-16:
                break
            step *= 0.5
        W, b, f, gW, gb = W2, b2, f2, gW2, gb2
    return LogisticModel(W, b, seed=seed, digest=digest, l2=l2)


# -- MLP ------------------------------------------------------------------------

class MlpModel(ModelHandle):
    """ReLU hidden layers, softmax output. ``weights[i]`` has shape (out, in)."""

    has_gradient = True
    has_layers = True

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], *,
                 seed=None, digest=None, final_loss=None):
        self.weights = [np.asarray(W, dtype=float) for W in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        if len(self.weights) < 2:
            raise BadArchitecture("an MLP needs at least one hidden layer")
        self.num_classes = self.weights[-1].shape[0]
        self.seed = seed
        self.digest = digest
        self.final_loss = final_loss

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    def _forward(self, X):
        acts = [np.atleast_2d(np.asarray(X, dtype=float))]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            acts.append(np.maximum(acts[-1] @ W.T + b, 0.0))
        logits = acts[-1] @ self.weights[-1].T + self.biases[-1]
        return acts, logits

    def predict_proba(self, X):
        return softmax(self._forward(X)[1])

    def layers(self, X):
        acts, _ = self._forward(X)
        single = np.asarray(X).ndim == 1
        return [a[0] if single else a for a in acts[1:]]

    def gradient(self, x, cls):
        acts, logits = self._forward(x)
        p = softmax(logits)[0]
        g = p[cls] * ((np.arange(len(p)) == cls) - p)   # d p_cls / d logits
        g = g @ self.weights[-1]
        for i in range(len(self.weights) - 2, -1, -1):
            g = g * (acts[i + 1][0] > 0)
            g = g @ self.weights[i]
        return g

    def to_dict(self):
        params = []
        for W, b in zip(self.weights, self.biases):
            params += W.ravel().tolist() + b.tolist()
        return {"type": "mlp", "shapes": [list(W.shape) for W in self.weights],
                "params": params, "seed": self.seed, "training_digest": self.digest,
                "final_loss": self.final_loss}


def _he_uniform(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / fan_in)
    return rng.uniform(-lim, lim, size=(fan_out, fan_in))


def _mlp_loss_grads(model: MlpModel, X, Y1h):
    acts, logits = model._forward(X)
    P = softmax(logits)
    n = X.shape[0]
    loss = -np.log(np.clip((P * Y1h).sum(axis=1), 1e-300, None)).mean()
    delta = (P - Y1h) / n
    gW, gb = [None] * len(model.weights), [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gW[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i]) * (acts[i] > 0)
    return loss, gW, gb


def train_mlp(data, y=None, hidden: Sequence[int] = (16,), epochs: int = 200,
              lr: float = 0.1, batch_size: int = 32, seed: int = 0,
              num_classes: Optional[int] = None) -> MlpModel:
    """Minibatch SGD on cross-entropy.

    Hidden layers use He-uniform initialization, the output layer
    Glorot-uniform, biases start at zero. One ``numpy`` generator seeded with
    ``seed`` drives both initialization and shuffling.
    """
    X, y = _xy(data, y)
    y = _class_labels(y)
    hidden = list(hidden)
    if not hidden or any(int(h) <= 0 for h in hidden):
        raise BadArchitecture(f"hidden widths must be positive, got {hidden}")
    n, d = X.shape
    C = num_classes or max(int(y.max()) + 1, 2)
    sizes = [d] + [int(h) for h in hidden] + [C]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        if i < len(sizes) - 2:
            weights.append(_he_uniform(rng, a, b))
        else:
            lim = np.sqrt(6.0 / (a + b))
            weights.append(rng.uniform(-lim, lim, size=(b, a)))
        biases.append(np.zeros(b))
    model = MlpModel(weights, biases, seed=seed)
    Y = np.zeros((n, C))
    Y[np.arange(n), y] = 1.0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, gW, gb = _mlp_loss_grads(model, X[idx], Y[idx])
            for i in range(len(model.weights)):
                model.weights[i] -= lr * gW[i]
                model.biases[i] -= lr * gb[i]
    model.final_loss = float(_mlp_loss_grads(model, X, Y)[0])
    params = {"model": "mlp", "sizes": sizes, "epochs": epochs, "lr": lr,
              "batch_size": batch_size, "seed": seed}
    model.digest = training_digest(X, y, params)
    return model


# -- decision tree ----------------------------------------------------------------

class TreeModel(ModelHandle):
    """Axis-aligned binary tree stored as parallel node arrays.

    ``feature[k] == -1`` marks a leaf. Samples with ``x[feature] <= threshold``
    go left.
    """

    def __init__(self, feature, threshold, left, right, value, *, max_depth=None, digest=None):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        self.num_classes = self.value.shape[1]
        self.max_depth = max_depth
        self.digest = digest

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        def rec(k):
            if self.feature[k] < 0:
                return 0
            return 1 + max(rec(self.left[k]), rec(self.right[k]))
        return rec(0)

    def apply(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict_proba(self, X):
        return self.value[self.apply(X)]

    def structure(self):
        """Tuple summary used for equality checks: (feature, threshold, left, right)."""
        return (self.feature.tolist(), self.threshold.tolist(),
                self.left.tolist(), self.right.tolist())

    def to_dict(self):
        n = self.n_nodes
        return {"type": "tree", "shapes": [[n], [n], [n], [n], [n, self.num_classes]],
                "params": (self.feature.astype(float).tolist() + self.threshold.tolist()
                           + self.left.astype(float).tolist() + self.right.astype(float).tolist()
                           + self.value.ravel().tolist()),
                "seed": None, "training_digest": self.digest, "max_depth": self.max_depth}


def _best_split(X, y, w, C, rel_tol=1e-12):
    """Best (feature, threshold, gain) by weighted Gini; lowest feature then
    smallest threshold win ties."""
    total = np.zeros(C)
    np.add.at(total, y, w)
    W = total.sum()
    parent = _gini(total)
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys, ws = X[order, j], y[order], w[order]
        oh = np.zeros((len(xs), C))
        oh[np.arange(len(xs)), ys] = ws
        left = np.cumsum(oh, axis=0)[:-1]
        right = total - left
        wl, wr = left.sum(1), right.sum(1)
        valid = (xs[1:] > xs[:-1]) & (wl > 0) & (wr > 0)
        if not valid.any():
            continue
        gain = parent - (wl * _gini(left) + wr * _gini(right)) / W
        gain = np.where(valid, gain, -np.inf)
        top = gain.max()
        k = int(np.flatnonzero(gain >= top - rel_tol * max(abs(top), 1e-300))[0])
        if best is None or top > best[2] + rel_tol * max(abs(best[2]), 1e-300):
            best = (j, 0.5 * (xs[k] + xs[k + 1]), float(top))
    if best is None or not best[2] > rel_tol * max(parent, 1e-300):
        return None
    return best


def train_tree(data, y=None, max_depth: int = 3, sample_weight=None,
               num_classes: Optional[int] = None) -> TreeModel:
    """Greedy weighted-Gini tree.

    Weights are normalized to sum to one, so multiplying them by a constant
    leaves the tree unchanged; near-equal gains (relative 1e-12) count as
    ties.
    """
    X, y = _xy(data, y)
    X = np.asarray(X, dtype=float)
    y = _class_labels(y)
    C = num_classes or max(int(y.max()) + 1, 2)
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if np.any(w < 0) or not np.isfinite(w).all():
        raise DataError("sample weights must be finite and nonnegative")
    if not w.sum() > 0:
        raise AllWeightsZero("all sample weights are zero")
    w = w / w.sum()
    feature, threshold, left, right, value = [], [], [], [], []

    def node(idx, depth):
        k = len(feature)
        dist = np.zeros(C)
        np.add.at(dist, y[idx], w[idx])
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(dist / dist.sum())
        if depth >= max_depth:
            return k
        keep = idx[w[idx] > 0]
        split = _best_split(X[keep], y[keep], w[keep], C)
        if split is None:
            return k
        j, t, _ = split
        feature[k], threshold[k] = j, t
        mask = X[idx, j] <= t
        left[k] = node(idx[mask], depth + 1)
        right[k] = node(idx[~mask], depth + 1)
        return k

    node(np.arange(len(y)), 0)
    params = {"model": "tree", "max_depth": max_depth}
    return TreeModel(feature, threshold, left, right, np.array(value),
                     max_depth=max_depth, digest=training_digest(X, y, params))


# -- wrappers and persistence ----------------------------------------------------

class ScaledModel(ModelHandle):
    """Presents a model trained on standardized inputs as a raw-input model."""

    def __init__(self, inner: ModelHandle, scaler: Scaler):
        self.inner = inner
        self.scaler = scaler
        self.num_classes = inner.num_classes
        self.has_gradient = inner.has_gradient
        self.has_layers = inner.has_layers

    def predict_proba(self, X):
        return self.inner.predict_proba(self.scaler.transform(np.atleast_2d(X)))

    def gradient(self, x, cls):
        return self.inner.gradient(self.scaler.transform(x), cls) / self.scaler.scale

    def layers(self, X):
        return self.inner.layers(self.scaler.transform(X))

    def to_dict(self):
        doc = self.inner.to_dict()
        doc["scaler"] = self.scaler.to_dict()
        return doc


def _split_params(shapes, params, path="/params"):
    out, pos = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        if pos + size > len(params):
            raise SchemaViolation(path, "fewer parameters than shapes require")
        out.append(np.asarray(params[pos:pos + size], dtype=float).reshape(shape))
        pos += size
    if pos != len(params):
        raise SchemaViolation(path, "more parameters than shapes require")
    return out


def model_from_dict(doc) -> ModelHandle:
    """Inverse of ``model.to_dict()``; validates shapes."""
    for key in ("type", "shapes", "params"):
        if key not in doc:
            raise SchemaViolation(f"/{key}", "required")
    kind, shapes, params = doc["type"], doc["shapes"], doc["params"]
    if kind == "logistic":
        if len(shapes) != 2 or len(shapes[0]) != 2 or shapes[1] != [shapes[0][0]]:
            raise SchemaViolation("/shapes", "logistic needs [[C, d], [C]]")
        W, b = _split_params(shapes, params)
        model = LogisticModel(W, b, seed=doc.get("seed"), digest=doc.get("training_digest"))
    elif kind == "mlp":
        ws, bs = [], []
        arrays = _split_params([s for W in shapes for s in (W, [W[0]])], params)
        for i in range(0, len(arrays), 2):
            ws.append(arrays[i])
            bs.append(arrays[i + 1])
        for a, b in zip(ws[:-1], ws[1:]):
            if b.shape[1] != a.shape[0]:
                raise SchemaViolation("/shapes", "consecutive layer sizes disagree")
        model = MlpModel(ws, bs, seed=doc.get("seed"), digest=doc.get("training_digest"),
                         final_loss=doc.get("final_loss"))
    elif kind == "tree":
        f, t, l, r, v = _split_params(shapes, params)
        model = TreeModel(f.astype(np.int64), t, l.astype(np.int64), r.astype(np.int64), v,
                          max_depth=doc.get("max_depth"), digest=doc.get("training_digest"))
    else:
        raise SchemaViolation("/type", f"unknown model type {kind!r}")
    if doc.get("scaler"):
        model = ScaledModel(model, Scaler.from_dict(doc["scaler"]))
    return model
