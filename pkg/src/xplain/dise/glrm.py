"""Generalized linear rule models.

A prediction is ``link^-1(b0 + sum_k coef_k * 1[conjunction_k holds])``.
Candidate conjunctions are grown degree by degree and screened; the
coefficients minimize::

    loss(b0, coef) + lam * sum_k |coef_k| * (1 + degree_k)

with squared loss / 2 (identity link) or logistic loss (logit link), both
averaged over rows, by cyclic coordinate descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import DISExplainer, ExplainerKind
from ..data import Binarizer, LiteralCatalog, TabularDataset, binarize_from_trees
from ..errors import EmptyCandidates, EmptyCatalog, LinkMismatch, UsageError
from ..explanation import Explanation, RuleTerms

LINKS = ("identity", "logit")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class RuleRegressionModel:
    link: str
    intercept: float
    terms: list            # [(clause tuple, coefficient)], nonzero only
    catalog: LiteralCatalog
    lam: float
    params: dict = field(default_factory=dict)
    kkt_violation: float = 0.0

    def design(self, B) -> np.ndarray:
        B = np.asarray(B).astype(bool)
        cols = [B[:, list(c)].all(axis=1) for c, _ in self.terms]
        return np.column_stack(cols).astype(float) if cols else np.zeros((B.shape[0], 0))

    def decision_function(self, B) -> np.ndarray:
        coef = np.array([v for _, v in self.terms])
        return self.intercept + self.design(B) @ coef if self.terms else \
            np.full(np.asarray(B).shape[0], self.intercept)

    def predict(self, B) -> np.ndarray:
        eta = self.decision_function(B)
        return eta if self.link == "identity" else _sigmoid(eta)

    def term_name(self, clause) -> str:
        names = self.catalog.names()
        return " AND ".join(names[i] for i in clause)


def candidate_conjunctions(B, y, catalog: LiteralCatalog, max_degree: int, max_terms: int):
    """Screened candidate conjunctions, as (clause tuples, coverage matrix).

    Degree-1 candidates are all literals; degree k+1 extends the top
    ``max_terms`` degree-k candidates by one literal. Constant columns are
    dropped, and so are columns equal to (or the complement of) one already
    kept, preferring positively phrased literals and lower degree. The final
    list keeps the ``max_terms`` highest ``support * (mean(y | covered) -
    mean(y))**2`` scores, ties in literal order.
    """
    B = np.asarray(B).astype(bool)
    n, L = B.shape
    y = np.asarray(y, dtype=float)
    ybar = y.mean()
    comp = catalog.complements

    def score(cov):
        s = cov.sum()
        if s == 0:
            return 0.0
        return (s / n) * (y[cov].mean() - ybar) ** 2

    def negatives(clause):
        return sum(not catalog.is_positive(i) for i in clause)

    level = {(l,): B[:, l] for l in range(L)}
    allc = dict(level)
    for _ in range(1, max_degree):
        ranked = sorted(level, key=lambda c: (-score(level[c]), c))
        nxt = {}
        for c in ranked[:max_terms]:
            banned = set(c) | {int(comp[i]) for i in c if comp[i] >= 0}
            for l in range(L):
                if l in banned:
                    continue
                cand = tuple(sorted(c + (l,)))
                if cand in allc or cand in nxt:
                    continue
                nxt[cand] = level[c] & B[:, l]
        level = nxt
        allc.update(nxt)
    order = sorted(allc, key=lambda c: (negatives(c), len(c), c))
    seen, kept = set(), []
    for c in order:
        cov = allc[c]
        s = int(cov.sum())
        if s == 0 or s == n:
            continue
        key = cov.tobytes()
        if key in seen:
            continue
        seen.add(key)
        seen.add((~cov).tobytes())
        kept.append(c)
    kept.sort(key=lambda c: (-score(allc[c]), c))
    kept = kept[:max_terms]
    kept.sort(key=lambda c: (len(c), c))
    if not kept:
        return [], np.zeros((n, 0))
    return kept, np.column_stack([allc[c] for c in kept]).astype(float)


def _gradient(Z, y, b0, beta, link):
    eta = b0 + Z @ beta
    mu = eta if link == "identity" else _sigmoid(eta)
    r = (mu - y) / len(y)
    return Z.T @ r, r.sum()


def kkt_violation(Z, y, b0, beta, penalties, link) -> float:
    """Largest violation of the lasso optimality conditions (intercept included)."""
    g, g0 = _gradient(Z, y, b0, beta, link)
    nz = beta != 0
    v = np.where(nz, np.abs(g + penalties * np.sign(beta)), np.maximum(np.abs(g) - penalties, 0))
    return float(max(abs(g0), v.max() if len(v) else 0.0))


def _loss(Z, y, b0, beta, link):
    eta = b0 + Z @ beta
    if link == "identity":
        return 0.5 * np.mean((y - eta) ** 2)
    return np.mean(np.logaddexp(0.0, eta) - y * eta)


def _soft(v, t):
    return np.sign(v) * max(abs(v) - t, 0.0)


def _polish(Z, y, b0, beta, penalties, link, newton_iters=50):
    """Solve the optimality conditions exactly on the current support.

    With the support and signs fixed the lasso problem is smooth, so a few
    (for identity: one) Newton steps land on the exact optimum. The result is
    accepted only if signs are preserved and it lowers the KKT violation.
    """
    n = len(y)
    act = np.flatnonzero(beta)
    A = np.column_stack([np.ones(n), Z[:, act]])
    sgn = np.sign(beta[act])
    pen = np.concatenate([[0.0], penalties[act] * sgn])
    theta = np.concatenate([[b0], beta[act]])
    for _ in range(newton_iters if link == "logit" else 1):
        eta = A @ theta
        if link == "identity":
            H = A.T @ A / n
            g = A.T @ (eta - y) / n + pen
        else:
            mu = _sigmoid(eta)
            H = (A * (mu * (1 - mu))[:, None]).T @ A / n
            g = A.T @ (mu - y) / n + pen
        step = np.linalg.lstsq(H, g, rcond=None)[0]
        theta = theta - step
        if np.max(np.abs(step)) < 1e-15:
            break
    if np.any(np.sign(theta[1:]) != sgn):
        return b0, beta
    new = beta.copy()
    new[act] = theta[1:]
    if kkt_violation(Z, y, theta[0], new, penalties, link) < kkt_violation(
            Z, y, b0, beta, penalties, link):
        return float(theta[0]), new
    return b0, beta


def coordinate_descent(Z, y, penalties, link, max_sweeps=20000, tol=1e-10, polish_every=25,
                       b0=None, beta=None):
    """Cyclic coordinate descent interleaved with support polishing."""
    done = 0
    while done < max_sweeps:
        b0, beta = _cd_sweeps(Z, y, penalties, link, polish_every, b0, beta)
        done += polish_every
        if kkt_violation(Z, y, b0, beta, penalties, link) < tol:
            break
        b0, beta = _polish(Z, y, b0, beta, penalties, link)
        if kkt_violation(Z, y, b0, beta, penalties, link) < tol:
            break
    return b0, beta


def _cd_sweeps(Z, y, penalties, link, max_sweeps, b0=None, beta=None, tol=1e-10):
    n, K = Z.shape
    beta = np.zeros(K) if beta is None else beta.copy()
    if link == "identity":
        b0 = y.mean() if b0 is None else b0
        r = y - b0 - Z @ beta
        z2 = (Z * Z).mean(axis=0)
        for _ in range(max_sweeps):
            change = 0.0
            for k in range(K):
                old = beta[k]
                rho = Z[:, k] @ r / n + z2[k] * old
                new = _soft(rho, penalties[k]) / z2[k]
                if new != old:
                    r -= Z[:, k] * (new - old)
                    beta[k] = new
                    change = max(change, abs(new - old))
            shift = r.mean()
            b0 += shift
            r -= shift
            if change < tol and kkt_violation(Z, y, b0, beta, penalties, link) < tol:
                break
        return b0, beta

    if b0 is None:
        p = np.clip(y.mean(), 1e-12, 1 - 1e-12)
        b0 = float(np.log(p / (1 - p)))
    eta = b0 + Z @ beta
    z2 = (Z * Z).mean(axis=0)

    def nll(e):
        return np.mean(np.logaddexp(0.0, e) - y * e)

    cur = nll(eta)
    for _ in range(max_sweeps):
        change = 0.0
        for k in range(-1, K):
            mu = _sigmoid(eta)
            z = np.ones(n) if k < 0 else Z[:, k]
            g = z @ (mu - y) / n
            bound = 0.25 if k < 0 else max(z2[k] / 4, 1e-12)
            exact = max((z * z) @ (mu * (1 - mu)) / n, 1e-12)
            old = b0 if k < 0 else beta[k]
            pen = 0.0 if k < 0 else penalties[k]
            # exact-curvature Newton step; the curvature bound guarantees
            # descent when the Newton step does not
            for curv in (exact, bound):
                new = old - g / curv if k < 0 else _soft(old - g / curv, pen / curv)
                if new == old:
                    break
                trial = eta + (new - old) * z
                val = nll(trial)
                if val + pen * abs(new) <= cur + pen * abs(old) + 1e-15:
                    eta, cur = trial, val
                    change = max(change, abs(new - old))
                    if k < 0:
                        b0 = new
                    else:
                        beta[k] = new
                    break
        if change < tol and kkt_violation(Z, y, b0, beta, penalties, link) < tol:
            break
    return b0, beta


def _solve_path(Z, y, weights, lam, link, max_sweeps, n_steps=40):
    """Warm-started solves along a geometric penalty path ending at ``lam``.

    Tracking the path keeps coordinate descent away from the slow,
    nearly flat directions it meets when started cold at a tiny penalty.
    """
    if link == "identity":
        b0 = y.mean()
    else:
        p = np.clip(y.mean(), 1e-12, 1 - 1e-12)
        b0 = float(np.log(p / (1 - p)))
    beta = np.zeros(Z.shape[1])
    g, _ = _gradient(Z, y, b0, beta, link)
    lam_max = float(np.max(np.abs(g) / weights))
    if lam >= lam_max:
        path = [lam]
    else:
        lo = max(lam, lam_max * 1e-6)
        path = list(np.geomspace(lam_max, lo, n_steps)[1:])
        if lo > lam:
            path.append(lam)
    for i, level in enumerate(path):
        last = i == len(path) - 1
        b0, beta = coordinate_descent(Z, y, level * weights, link,
                                      max_sweeps if last else 500,
                                      1e-10 if last else 1e-7, b0=b0, beta=beta)
    return b0, beta


def glrm_fit(B, y, catalog: Optional[LiteralCatalog] = None, link: str = "identity",
             lam: float = 0.01, max_degree: int = 2, max_terms: int = 100,
             max_sweeps: int = 20000) -> RuleRegressionModel:
    """Fit an L1-penalized GLM over screened conjunctions of 0/1 literals."""
    if link not in LINKS:
        raise UsageError(f"link must be one of {LINKS}")
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[1] == 0:
        raise EmptyCatalog("no literals")
    y = np.asarray(y, dtype=float)
    if link == "logit" and not np.isin(y, (0.0, 1.0)).all():
        raise LinkMismatch("logit link needs 0/1 labels")
    if catalog is None:
        catalog = LiteralCatalog.from_columns([f"x{j}" for j in range(B.shape[1])])
    clauses, Z = candidate_conjunctions(B, y, catalog, max_degree, max_terms)
    if not clauses:
        raise EmptyCandidates("every candidate conjunction is constant")
    weights = 1.0 + np.array([len(c) for c in clauses], dtype=float)
    penalties = lam * weights
    b0, beta = _solve_path(Z, y, weights, lam, link, max_sweeps)
    viol = kkt_violation(Z, y, b0, beta, penalties, link)
    terms = [(c, float(v)) for c, v in zip(clauses, beta) if v != 0.0]
    params = {"link": link, "lam": lam, "max_degree": max_degree, "max_terms": max_terms}
    model = RuleRegressionModel(link, float(b0), terms, catalog, lam, params, viol)
    model.candidates = clauses
    model.candidate_coefs = beta
    return model


def glrm_explain(model: RuleRegressionModel) -> RuleTerms:
    """Terms sorted by absolute coefficient, largest first."""
    named = [(model.term_name(c), v) for c, v in model.terms]
    named.sort(key=lambda tv: (-abs(tv[1]), tv[0]))
    return RuleTerms(model.link, model.intercept, [t for t, _ in named],
                     [v for _, v in named], dict(model.params))


class GLRMExplainer(DISExplainer):
    kind = ExplainerKind.GLRM

    def __init__(self, link="identity", lam=0.01, max_degree=2, max_terms=100,
                 max_thresholds=4):
        super().__init__()
        self.link, self.lam = link, lam
        self.max_degree, self.max_terms = max_degree, max_terms
        self.max_thresholds = max_thresholds
        self.binarizer: Optional[Binarizer] = None
        self.model: Optional[RuleRegressionModel] = None

    def fit(self, X, y=None, catalog=None):
        if isinstance(X, TabularDataset):
            labels = X.labels if y is None else np.asarray(y)
            if self.link == "logit" or np.issubdtype(np.asarray(labels).dtype, np.integer):
                ds = TabularDataset(X.feature_names, X.kinds, X.values,
                                    np.asarray(labels).astype(np.int64), X.levels)
                self.binarizer, B = binarize_from_trees(ds, self.max_thresholds)
            else:
                # real targets: split on the above/below-median indicator
                ds = TabularDataset(X.feature_names, X.kinds, X.values,
                                    (labels > np.median(labels)).astype(np.int64), X.levels)
                self.binarizer, B = binarize_from_trees(ds, self.max_thresholds)
            catalog, y = self.binarizer.catalog, labels
        else:
            B = X
        self.model = glrm_fit(B, y, catalog, self.link, self.lam, self.max_degree, self.max_terms)
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        if self.binarizer is not None and (isinstance(X, TabularDataset)
                                           or np.asarray(X).shape[1] != len(self.model.catalog)):
            X = self.binarizer.transform(X)
        return self.model.predict(X)

    def explain(self) -> Explanation:
        self._check_fitted()
        return Explanation.build(glrm_explain(self.model), self.kind.value, self.model.params)
