"""Prototype selection with nonnegative importance weights.

Given an RBF kernel ``k``, target points ``t_i`` and candidates ``c_j``,
the selection maximizes::

    l(w) = mu' w - 1/2 w' K w,   w >= 0,  |support(w)| <= m

where ``K[j, k] = k(c_j, c_k)`` and ``mu_j = mean_i k(t_i, c_j)``. Greedy
steps add the unselected candidate with the largest gradient
``mu_j - (K w)_j``, then re-solve the weights on the selected set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DIExplainer, ExplainerKind
from .errors import BadBandwidth, EmptyCandidates, UsageError
from .explanation import Explanation, PrototypeSet


def pairwise_sq_dists(A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def rbf_kernel(A, B, sigma):
    return np.exp(-pairwise_sq_dists(A, B) / (2.0 * sigma * sigma))


def median_bandwidth(candidates) -> float:
    """Median pairwise Euclidean distance; 1.0 if all candidates coincide."""
    C = np.atleast_2d(np.asarray(candidates, dtype=float))
    if len(C) < 2:
        return 1.0
    iu = np.triu_indices(len(C), k=1)
    med = float(np.median(np.sqrt(pairwise_sq_dists(C, C)[iu])))
    return med if med > 0 else 1.0


def nonneg_quadratic(K, mu, tol=1e-12, max_iter=500):
    """Minimize ``1/2 w'Kw - mu'w`` subject to ``w >= 0`` (active-set method).

    ``K`` must be positive semidefinite. Returns the exact optimum up to
    floating point; :func:`qp_kkt_residual` measures how close.
    """
    K = np.asarray(K, dtype=float)
    mu = np.asarray(mu, dtype=float)
    k = len(mu)
    w = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    for _ in range(max_iter):
        grad = mu - K @ w                 # negative gradient of the objective
        cand = np.where(~passive, grad, -np.inf)
        j = int(np.argmax(cand))
        if cand[j] <= tol:
            break
        passive[j] = True
        while True:
            idx = np.flatnonzero(passive)
            z = np.zeros(k)
            z[idx] = np.linalg.lstsq(K[np.ix_(idx, idx)], mu[idx], rcond=None)[0]
            if np.all(z[idx] > 0):
                w = z
                break
            neg = idx[z[idx] <= 0]
            alpha = np.min(w[neg] / (w[neg] - z[neg]))
            w = w + alpha * (z - w)
            passive &= w > 1e-15
            w[~passive] = 0.0
            if not passive.any():
                break
    return w


def qp_kkt_residual(K, mu, w) -> float:
    """Max violation of the KKT conditions for :func:`nonneg_quadratic`."""
    g = K @ w - mu
    on = w > 0
    r = np.concatenate([np.abs(g[on]), np.maximum(-g[~on], 0), np.maximum(-w, 0)])
    return float(r.max()) if len(r) else 0.0


def objective_value(K, mu, w) -> float:
    return float(mu @ w - 0.5 * w @ K @ w)


@dataclass
class _Greedy:
    selected: list
    weights: np.ndarray
    trace: list


def protodash_from_kernel(mu, K, m: int) -> _Greedy:
    """Greedy selection given the mean-embedding vector and candidate kernel.

    Stops early when no unselected candidate has a positive gradient.
    Ties go to the lower candidate index.
    """
    mu = np.asarray(mu, dtype=float)
    K = np.asarray(K, dtype=float)
    n = len(mu)
    selected: list[int] = []
    w_full = np.zeros(n)
    trace = []
    while len(selected) < min(m, n):
        grad = mu - K @ w_full
        grad[selected] = -np.inf
        j = int(np.argmax(grad))
        if not grad[j] > 0:
            break
        selected.append(j)
        idx = np.array(selected)
        w = nonneg_quadratic(K[np.ix_(idx, idx)], mu[idx])
        w_full = np.zeros(n)
        w_full[idx] = w
        trace.append(objective_value(K, mu, w_full))
    return _Greedy(selected, w_full[selected] if selected else np.zeros(0), trace)


def protodash(target, candidates, m: int, sigma="auto", seed: int = 0) -> PrototypeSet:
    """Select up to ``m`` weighted prototypes from ``candidates`` for ``target``.

    ``target`` may be the candidate set itself (dataset summary) or a single
    instance (similar-case explanation). Indices come back sorted by weight,
    largest first. ``seed`` is recorded only; selection is deterministic.
    """
    del seed
    C = np.atleast_2d(np.asarray(candidates, dtype=float))
    T = np.atleast_2d(np.asarray(target, dtype=float))
    if C.shape[0] == 0 or C.size == 0:
        raise EmptyCandidates("no candidates to select from")
    if m < 1:
        raise UsageError("m must be at least 1")
    if isinstance(sigma, str):
        if sigma != "auto":
            raise BadBandwidth(f"bandwidth must be positive or 'auto', got {sigma!r}")
        sigma = median_bandwidth(C)
    sigma = float(sigma)
    if not sigma > 0 or not np.isfinite(sigma):
        raise BadBandwidth(f"bandwidth must be positive, got {sigma}")
    K = rbf_kernel(C, C, sigma)
    mu = rbf_kernel(T, C, sigma).mean(axis=0)
    g = protodash_from_kernel(mu, K, m)
    order = sorted(range(len(g.selected)), key=lambda i: (-g.weights[i], i))
    idx = [g.selected[i] for i in order]
    w = g.weights[order]
    sel = np.array(idx, dtype=int)
    obj = objective_value(K[np.ix_(sel, sel)], mu[sel], w) if idx else 0.0
    return PrototypeSet(idx, w, obj, sigma, g.trace)


def prototype_objective(target, candidates, proto: PrototypeSet) -> float:
    """Recompute ``l(w)`` from data, indices, weights and bandwidth."""
    C = np.atleast_2d(np.asarray(candidates, dtype=float))[proto.indices]
    T = np.atleast_2d(np.asarray(target, dtype=float))
    K = rbf_kernel(C, C, proto.sigma)
    mu = rbf_kernel(T, C, proto.sigma).mean(axis=0)
    return objective_value(K, mu, np.asarray(proto.weights))


class ProtodashExplainer(DIExplainer):
    """Summarize a dataset, or find training cases similar to an instance."""

    kind = ExplainerKind.ProtoDash

    def __init__(self, m=5, sigma="auto"):
        super().__init__()
        self.m, self.sigma = m, sigma
        self.candidates = None

    def fit(self, candidates):
        self.candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        self._fitted = True
        return self

    def explain(self, target=None, m=None) -> Explanation:
        """Prototypes for ``target`` (default: the candidate set itself)."""
        self._check_fitted()
        T = self.candidates if target is None else target
        m = m or self.m
        proto = protodash(T, self.candidates, m, self.sigma)
        return Explanation.build(proto, self.kind.value, {"m": m, "sigma": self.sigma})
