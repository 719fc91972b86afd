"""Sparse local surrogates fit on perturbed copies of one instance.

Each perturbation keeps every feature of ``x`` independently with
probability 1/2 and otherwise replaces it with a value drawn from that
feature's empirical marginal. The surrogate is a ridge regression of the
explained class score on the keep-mask, weighted by ``exp(-h^2 / s^2)`` where
``h`` counts replaced features. Features enter by forward selection.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..core import ExplainerKind, LocalBBExplainer, class_scorer
from ..errors import EmptyDataset, TooFewSamples, UsageError
from ..explanation import Explanation, FeatureAttribution

RIDGE = 1e-3


def default_kernel_width(d: int) -> float:
    return 0.75 * np.sqrt(d)


def weighted_ridge(X, y, w, alpha=RIDGE):
    """Ridge with an unpenalized intercept. Returns ``(coef, intercept)``."""
    sw = w / w.sum()
    xm = sw @ X
    ym = sw @ y
    Xc = X - xm
    yc = y - ym
    G = (Xc * w[:, None]).T @ Xc + alpha * np.eye(X.shape[1])
    coef = np.linalg.solve(G, (Xc * w[:, None]).T @ yc)
    return coef, float(ym - xm @ coef)


def _sse(X, y, w, cols, alpha):
    if not cols:
        r = y - (w @ y) / w.sum()
        return float(w @ r ** 2)
    coef, b = weighted_ridge(X[:, cols], y, w, alpha)
    r = y - X[:, cols] @ coef - b
    return float(w @ r ** 2)


def forward_select(X, y, w, k: int, alpha=RIDGE) -> list[int]:
    """Greedily add the column that most reduces weighted squared error.

    Ties go to the lower column index.
    """
    chosen: list[int] = []
    for _ in range(min(k, X.shape[1])):
        best, best_sse = None, np.inf
        for j in range(X.shape[1]):
            if j in chosen:
                continue
            sse = _sse(X, y, w, chosen + [j], alpha)
            if sse < best_sse:
                best, best_sse = j, sse
        chosen.append(best)
    return sorted(chosen)


def lime_explain(model, data, x, cls: int = 0, k: Optional[int] = None,
                 nsamples: int = 5000, kernel_width: Optional[float] = None,
                 seed: int = 0, feature_names=None, alpha: float = RIDGE) -> FeatureAttribution:
    """Sparse linear attribution of ``score[cls]`` around ``x``.

    Args:
        model: ModelHandle or callable scoring a batch.
        data: reference rows whose columns supply the replacement marginals.
        x: instance to explain.
        cls: explained class.
        k: number of features to keep (default: all).
        nsamples: perturbations to draw; must be at least ``10 * k``.
        kernel_width: proximity width, default ``0.75 * sqrt(d)``.
        seed: seed for the perturbation stream.

    Returns:
        FeatureAttribution with exactly ``min(k, d)`` nonzero-eligible features
        listed in ``selected`` and ridge standard errors.
    """
    x = np.asarray(x, dtype=float)
    data = np.atleast_2d(np.asarray(data, dtype=float))
    d = x.shape[0]
    if data.size == 0 or data.shape[0] == 0:
        raise EmptyDataset("LIME needs reference rows for the feature marginals")
    if data.shape[1] != d:
        raise UsageError(f"reference rows have {data.shape[1]} columns, instance has {d}")
    k = d if k is None else int(k)
    if k < 1:
        raise UsageError("k must be at least 1")
    if nsamples < 10 * k:
        raise TooFewSamples(f"need at least {10 * k} samples for k={k}, got {nsamples}")
    width = default_kernel_width(d) if kernel_width is None else float(kernel_width)
    if not width > 0:
        raise UsageError("kernel width must be positive")

    # separate streams for masks and replacements, so a larger nsamples
    # extends the same perturbation sequence rather than redrawing it
    mask_rng, row_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    keep = mask_rng.random((nsamples, d)) < 0.5
    keep[0] = True                      # the instance itself
    rows = row_rng.integers(0, data.shape[0], size=(nsamples, d))
    Z = np.where(keep, x, data[rows, np.arange(d)])
    y = class_scorer(model, cls)(Z)
    h = d - keep.sum(axis=1)
    w = np.exp(-(h ** 2) / width ** 2)
    M = keep.astype(float)

    sel = forward_select(M, y, w, k, alpha)
    coef, b = weighted_ridge(M[:, sel], y, w, alpha)
    values = np.zeros(d)
    values[sel] = coef
    se = np.full(d, np.nan)
    se[sel] = _ridge_std_errors(M[:, sel], y, w, coef, b, alpha)
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(d)]
    return FeatureAttribution(
        method="lime", values=values, intercept=b, target_class=int(cls),
        feature_names=names, nsamples=int(nsamples), std_errors=se,
        selected=sel, seed=int(seed), exact=False, score=float(y[0]))


def _ridge_std_errors(X, y, w, coef, b, alpha):
    # weighted least-squares covariance, weights treated as precisions
    r = y - X @ coef - b
    dof = max(len(y) - X.shape[1] - 1, 1)
    s2 = float(w @ r ** 2) / dof
    Xc = X - (w / w.sum()) @ X
    G = (Xc * w[:, None]).T @ Xc + alpha * np.eye(X.shape[1])
    return np.sqrt(np.clip(np.diag(s2 * np.linalg.inv(G)), 0, None))


class LimeExplainer(LocalBBExplainer):
    kind = ExplainerKind.LIME

    def __init__(self, model, k=None, nsamples=5000, kernel_width=None, seed=0,
                 feature_names=None):
        super().__init__()
        self.model = model
        self.k = k
        self.nsamples = nsamples
        self.kernel_width = kernel_width
        self.seed = seed
        self.feature_names = feature_names
        self.data = None

    def fit(self, data):
        """Store reference rows for the replacement marginals."""
        self.data = np.atleast_2d(np.asarray(data, dtype=float))
        self._fitted = True
        return self

    def explain_instance(self, x, cls=None) -> Explanation:
        self._check_fitted()
        if cls is None:
            cls = int(np.argmax(self.model.score(x))) if hasattr(self.model, "score") else 0
        attr = lime_explain(self.model, self.data, x, cls, self.k, self.nsamples,
                            self.kernel_width, self.seed, self.feature_names)
        params = {"k": self.k, "nsamples": self.nsamples,
                  "kernel_width": self.kernel_width, "class": cls}
        return Explanation.build(attr, self.kind.value, params, self.seed)
