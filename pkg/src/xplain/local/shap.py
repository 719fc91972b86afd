"""Kernel SHAP: Shapley values as a constrained weighted least-squares fit.

A coalition ``z`` (a 0/1 vector over features) is scored by evaluating the
model on ``x`` with absent features set to the baseline. The attribution
``phi`` minimizes::

    sum_z pi(z) * (f(z) - f(baseline) - z . phi)^2,   sum(phi) = f(x) - f(baseline)

with the Shapley kernel ``pi(s) = (d - 1) / (C(d, s) * s * (d - s))``. The
empty and full coalitions enter as hard constraints. Enumerating all
coalitions gives exact Shapley values.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..core import ExplainerKind, LocalBBExplainer, class_scorer
from ..errors import DimensionTooLargeForExact, UsageError
from ..explanation import Explanation, FeatureAttribution

MAX_EXACT_DIM = 15


def shapley_kernel(d: int, s) -> np.ndarray:
    s = np.asarray(s)
    comb = np.array([math.comb(d, int(k)) for k in np.ravel(s)], dtype=float).reshape(s.shape)
    return (d - 1) / (comb * s * (d - s))


def all_coalitions(d: int) -> np.ndarray:
    """Every proper, nonempty subset of ``d`` features as rows of a 0/1 matrix."""
    codes = np.arange(1, 2 ** d - 1, dtype=np.int64)
    return ((codes[:, None] >> np.arange(d)) & 1).astype(bool)


def sample_coalitions(d: int, nsamples: int, rng: np.random.Generator) -> np.ndarray:
    """Coalitions drawn from the Shapley kernel, each paired with its complement."""
    sizes = np.arange(1, d)
    p = (d - 1) / (sizes * (d - sizes))
    p = p / p.sum()
    rows = []
    for _ in range(max(1, nsamples // 2)):
        s = int(rng.choice(sizes, p=p))
        z = np.zeros(d, dtype=bool)
        z[rng.choice(d, size=s, replace=False)] = True
        rows.append(z)
        rows.append(~z)
    return np.array(rows)


def _constrained_wls(Z, v, w, total):
    """Solve min sum w (v - Z phi)^2 s.t. sum(phi) = total by eliminating the
    last coordinate. Also returns the reduced design and target."""
    d = Z.shape[1]
    Zf = Z.astype(float)
    A = Zf[:, :-1] - Zf[:, -1:]
    b = v - Zf[:, -1] * total
    sw = np.sqrt(w)
    head, *_ = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)
    phi = np.empty(d)
    phi[:-1] = head
    phi[-1] = total - head.sum()
    return phi, A, b


def kernel_shap(model, baseline, x, cls: int = 0, nsamples: Optional[int] = None,
                exact: Optional[bool] = None, seed: int = 0,
                feature_names=None) -> FeatureAttribution:
    """Shapley attribution of ``score[cls]`` at ``x`` relative to ``baseline``.

    Exact mode (the default when ``nsamples`` is omitted or covers every
    coalition) enumerates all ``2**d`` coalitions and needs ``d <= 15``.
    Sampled mode draws ``nsamples`` coalitions in complementary pairs and
    reports standard errors.
    """
    x = np.asarray(x, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    d = x.shape[0]
    if d < 1:
        raise UsageError("need at least one feature")
    if baseline.shape != x.shape:
        raise UsageError("baseline must have the same length as x")
    if exact is None:
        exact = nsamples is None or (d <= MAX_EXACT_DIM and nsamples >= 2 ** d - 2)
    if exact and d > MAX_EXACT_DIM:
        raise DimensionTooLargeForExact(f"exact mode needs d <= {MAX_EXACT_DIM}, got {d}")
    f = class_scorer(model, cls)
    fx, f0 = (float(v) for v in f(np.vstack([x, baseline])))
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(d)]
    total = fx - f0

    if d == 1:
        phi, se, used = np.array([total]), np.zeros(1), 0
    else:
        if exact:
            Z = all_coalitions(d)
            w = shapley_kernel(d, Z.sum(axis=1))
        else:
            if nsamples is None or nsamples < 2:
                raise UsageError("sampled mode needs nsamples >= 2")
            Z = sample_coalitions(d, nsamples, np.random.default_rng(seed))
            w = np.ones(len(Z))
        v = f(np.where(Z, x, baseline)) - f0
        phi, A, b = _constrained_wls(Z, v, w, total)
        used = len(Z)
        if exact:
            se = np.zeros(d)
        else:
            se = _standard_errors(A, b, w, phi)
    gap = f0 + phi.sum() - fx
    return FeatureAttribution(
        method="kernel_shap", values=phi, intercept=f0, target_class=int(cls),
        feature_names=names, nsamples=int(used), baseline=baseline, std_errors=se,
        seed=None if exact else int(seed), exact=bool(exact), score=fx,
        efficiency_gap=float(gap))


def _standard_errors(A, b, w, phi):
    k = A.shape[1]
    resid = b - A @ phi[:-1]
    dof = max(len(b) - k, 1)
    s2 = float((w * resid ** 2).sum() / w.sum() * len(b) / dof)
    G = (A * w[:, None]).T @ A / w.mean()
    cov = s2 * np.linalg.pinv(G)
    se = np.empty(k + 1)
    se[:-1] = np.sqrt(np.clip(np.diag(cov), 0, None))
    se[-1] = np.sqrt(max(float(cov.sum()), 0.0))
    return se


def shapley_by_permutations(value_fn, d: int) -> np.ndarray:
    """Average marginal contribution over all ``d!`` orderings.

    ``value_fn`` maps a boolean coalition vector to a real number. Only
    practical for small ``d``; intended as a reference.
    """
    import itertools

    phi = np.zeros(d)
    count = 0
    for perm in itertools.permutations(range(d)):
        z = np.zeros(d, dtype=bool)
        prev = value_fn(z)
        for j in perm:
            z[j] = True
            cur = value_fn(z)
            phi[j] += cur - prev
            prev = cur
        count += 1
    return phi / count


class KernelShapExplainer(LocalBBExplainer):
    kind = ExplainerKind.KernelSHAP

    def __init__(self, model, nsamples=None, seed=0, feature_names=None):
        super().__init__()
        self.model = model
        self.nsamples = nsamples
        self.seed = seed
        self.feature_names = feature_names
        self.baseline = None

    def fit(self, background):
        """Use the column means of ``background`` as the baseline."""
        bg = np.atleast_2d(np.asarray(background, dtype=float))
        self.baseline = bg.mean(axis=0)
        self._fitted = True
        return self

    def explain_instance(self, x, cls=None) -> Explanation:
        self._check_fitted()
        if cls is None:
            cls = int(np.argmax(self.model.score(x))) if hasattr(self.model, "score") else 0
        attr = kernel_shap(self.model, self.baseline, x, cls, self.nsamples,
                           seed=self.seed, feature_names=self.feature_names)
        params = {"nsamples": self.nsamples, "class": cls}
        return Explanation.build(attr, self.kind.value, params, attr.seed)
