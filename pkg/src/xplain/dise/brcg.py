"""Boolean rules in DNF/CNF learned by clause generation.

Objective for a DNF rule ``S`` on ``n`` rows::

    (false negatives + false positives) / n + sum_{c in S} (lambda0 + lambda1 * |c|)

Clauses are generated round by round. Each round prices candidate
conjunctions against the current rule with a beam search (gain = newly
covered positives minus newly covered negatives, less the clause penalty)
and adds the best ones to a column pool. A restricted master problem then
picks the best rule from the pool: exhaustively when the pool is small,
otherwise by add/remove/swap local search from the incumbent. The incumbent
only ever improves.

CNF rules are DNF rules learned on negated labels, with every literal
replaced by its complement.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import DISExplainer, ExplainerKind
from ..data import Binarizer, LiteralCatalog, TabularDataset, binarize_from_trees
from ..errors import EmptyCatalog, NotBinaryLabels, UsageError
from ..explanation import Explanation, RuleSet

EXHAUSTIVE_LIMIT = 20000


@dataclass
class BooleanRule:
    polarity: str
    clauses: list
    catalog: LiteralCatalog
    objective: float
    history: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def predict(self, B) -> np.ndarray:
        B = np.asarray(B).astype(bool)
        if self.polarity == "DNF":
            out = np.zeros(B.shape[0], dtype=bool)
            for c in self.clauses:
                out |= B[:, list(c)].all(axis=1)
        else:
            out = np.ones(B.shape[0], dtype=bool)
            for c in self.clauses:
                out &= B[:, list(c)].any(axis=1)
        return out.astype(np.int64)

    def sorted_clauses(self) -> list[list[str]]:
        names = self.catalog.names()
        rendered = [sorted(names[i] for i in c) for c in self.clauses]
        return sorted(rendered, key=lambda c: (len(c), c))

    def rules(self) -> list[str]:
        """Clauses as readable strings, e.g. ``(x1 > 0.5) AND (x2 > 0.5)``."""
        joiner = " AND " if self.polarity == "DNF" else " OR "
        return [joiner.join(f"({lit})" for lit in c) for c in self.sorted_clauses()]


def _objective(err, n, clauses, lam0, lam1):
    return err / n + sum(lam0 + lam1 * len(c) for c in clauses)


class _Learner:
    def __init__(self, B, y, lam0, lam1, max_degree, beam_width, max_clauses, catalog):
        self.B = B
        self.Bf = B.astype(float)
        self.y = y
        self.n = len(y)
        self.lam0, self.lam1 = lam0, lam1
        self.max_degree = max_degree
        self.beam_width = beam_width
        self.max_clauses = max_clauses
        self.comp = catalog.complements
        self._cov = {}

    def cover(self, clause) -> np.ndarray:
        cov = self._cov.get(clause)
        if cov is None:
            cov = self.B[:, list(clause)].all(axis=1)
            self._cov[clause] = cov
        return cov

    def errors(self, clauses) -> int:
        covered = np.zeros(self.n, dtype=bool)
        for c in clauses:
            covered |= self.cover(c)
        return int(np.sum(covered != self.y))

    def objective(self, clauses) -> float:
        return _objective(self.errors(clauses), self.n, clauses, self.lam0, self.lam1)

    def price(self, clauses) -> list[tuple]:
        """Beam search for conjunctions that most reduce the objective when
        added to ``clauses``. Returns clause tuples best first."""
        covered = np.zeros(self.n, dtype=bool)
        for c in clauses:
            covered |= self.cover(c)
        pos = (self.y & ~covered).astype(float)
        neg = (~self.y & ~covered).astype(float)
        any_pos = self.y.astype(float)
        L = self.B.shape[1]
        seen = {}

        def evaluate(base_cov, base):
            if base_cov is None:
                p, q, r = pos @ self.Bf, neg @ self.Bf, any_pos @ self.Bf
            else:
                bc = base_cov.astype(float)
                p, q, r = (pos * bc) @ self.Bf, (neg * bc) @ self.Bf, (any_pos * bc) @ self.Bf
            out = []
            banned = set(base) | {int(self.comp[i]) for i in base if self.comp[i] >= 0}
            for l in range(L):
                if l in banned or r[l] == 0:
                    continue
                clause = tuple(sorted(base + (l,)))
                if clause in seen:
                    continue
                gain = (p[l] - q[l]) / self.n - self.lam0 - self.lam1 * len(clause)
                seen[clause] = gain
                out.append((gain, clause))
            return out

        level = evaluate(None, ())
        for degree in range(1, self.max_degree + 1):
            level.sort(key=lambda gc: (-gc[0], gc[1]))
            beam = level[:self.beam_width]
            if degree == self.max_degree or not beam:
                break
            level = []
            for _, clause in beam:
                level += evaluate(self.cover(clause), clause)
        ranked = sorted(seen.items(), key=lambda cg: (-cg[1], cg[0]))
        return [c for c, _ in ranked[:self.beam_width * self.max_degree]]

    def master(self, pool, incumbent):
        pool = sorted(pool, key=lambda c: (len(c), c))
        P = len(pool)
        count = sum(math.comb(P, k) for k in range(min(P, self.max_clauses) + 1))
        if count * self.n <= EXHAUSTIVE_LIMIT * 64 and count <= EXHAUSTIVE_LIMIT:
            return self._exhaustive(pool)
        return self._local_search(pool, incumbent)

    def _exhaustive(self, pool):
        best, best_obj = [], self.objective([])
        for k in range(1, min(len(pool), self.max_clauses) + 1):
            for combo in itertools.combinations(pool, k):
                obj = self.objective(combo)
                if obj < best_obj - 1e-12:
                    best, best_obj = list(combo), obj
        return best, best_obj

    def _local_search(self, pool, incumbent):
        C = np.column_stack([self.cover(c) for c in pool]).astype(float)
        size = np.array([len(c) for c in pool], dtype=float)
        pen = self.lam0 + self.lam1 * size
        yf = self.y.astype(float)
        current = [pool.index(c) for c in incumbent if c in pool]
        for c in incumbent:
            if c not in pool:
                current = []
                break
        obj = self.objective([pool[i] for i in current])
        while True:
            cnt = C[:, current].sum(axis=1) if current else np.zeros(self.n)
            best = (0.0, None)
            # candidate rule = current minus `drop` plus `add`
            for drop in [None] + current:
                kept = cnt - (C[:, drop] if drop is not None else 0)
                unc = kept == 0
                base_err = np.sum((kept > 0) != self.y)
                base_pen = pen[current].sum() - (pen[drop] if drop is not None else 0)
                if drop is not None:
                    cand = _objective(base_err, self.n, (), 0, 0) + base_pen
                    if cand < obj + best[0] - 1e-12:
                        best = (cand - obj, (drop, None))
                n_after = len(current) - (drop is not None)
                if n_after >= self.max_clauses:
                    continue
                # adding clause j newly covers unc rows: fixes positives, breaks negatives
                delta_err = ((unc * (1 - yf)) @ C) - ((unc * yf) @ C)
                cand = (base_err + delta_err) / self.n + base_pen + pen
                cand[current] = np.inf
                j = int(np.argmin(cand))
                if cand[j] < obj + best[0] - 1e-12:
                    best = (cand[j] - obj, (drop, j))
            if best[1] is None:
                break
            drop, add = best[1]
            if drop is not None:
                current.remove(drop)
            if add is not None:
                current.append(add)
            obj = self.objective([pool[i] for i in current])
        return [pool[i] for i in current], obj


def _learn_dnf(B, y, lam0, lam1, max_degree, beam_width, max_clauses, catalog, max_rounds):
    lr = _Learner(B, y, lam0, lam1, max_degree, beam_width, max_clauses, catalog)
    incumbent, obj = [], lr.objective([])
    history = [obj]
    pool = set()
    for _ in range(max_rounds):
        new = [c for c in lr.price(incumbent) if c not in pool]
        if not new:
            break
        pool.update(new)
        cand, cand_obj = lr.master(pool, incumbent)
        if cand_obj < obj - 1e-12:
            incumbent, obj = cand, cand_obj
        history.append(obj)
    return incumbent, obj, history


def _as_binary(B):
    B = np.asarray(B)
    if B.ndim != 2:
        raise ValueError("binarized features must be a 2-D 0/1 matrix")
    if not np.isin(B, (0, 1)).all():
        raise ValueError("binarized features must contain only 0 and 1")
    return B.astype(bool)


def brcg_fit(B, y, catalog: Optional[LiteralCatalog] = None, lambda0: float = 0.001,
             lambda1: float = 0.001, cnf: bool = False, max_degree: int = 4,
             beam_width: int = 10, max_clauses: int = 10, seed: int = 0,
             max_rounds: int = 50) -> BooleanRule:
    """Learn a Boolean rule over 0/1 literal columns ``B``.

    Args:
        B: n x L matrix of literal indicators.
        y: binary labels.
        catalog: literal names/complements; defaults to ``col_j == 1`` names.
            CNF mode needs complements.
        lambda0: penalty per clause.
        lambda1: penalty per literal.
        seed: recorded only; the search is deterministic.
    """
    B = _as_binary(B)
    y = np.asarray(y)
    if B.shape[1] == 0:
        raise EmptyCatalog("no literals to build rules from")
    if not np.isin(y, (0, 1)).all():
        raise NotBinaryLabels("labels must be 0/1")
    if lambda0 < 0 or lambda1 < 0:
        raise UsageError("penalties must be nonnegative")
    if catalog is None:
        catalog = LiteralCatalog.from_columns([f"x{j}" for j in range(B.shape[1])])
    if len(catalog) != B.shape[1]:
        raise UsageError("catalog size differs from number of literal columns")
    params = {"lambda0": lambda0, "lambda1": lambda1, "cnf": cnf, "max_degree": max_degree,
              "beam_width": beam_width, "max_clauses": max_clauses, "seed": seed}
    yb = y.astype(bool)
    if cnf:
        if not catalog.has_complements:
            raise UsageError("CNF rules need a catalog with literal complements")
        clauses, obj, hist = _learn_dnf(B, ~yb, lambda0, lambda1, max_degree, beam_width,
                                        max_clauses, catalog, max_rounds)
        clauses = [tuple(sorted(catalog.complement(l) for l in c)) for c in clauses]
        return BooleanRule("CNF", clauses, catalog, obj, hist, params)
    clauses, obj, hist = _learn_dnf(B, yb, lambda0, lambda1, max_degree, beam_width,
                                    max_clauses, catalog, max_rounds)
    return BooleanRule("DNF", clauses, catalog, obj, hist, params)


def brcg_explain(model: BooleanRule) -> RuleSet:
    constant = note = None
    if not model.clauses:
        constant = 0 if model.polarity == "DNF" else 1
        note = "predicts negative class" if constant == 0 else "predicts positive class"
    return RuleSet(model.polarity, model.sorted_clauses(), float(model.objective),
                   dict(model.params), constant, note)


class BRCGExplainer(DISExplainer):
    """Directly interpretable Boolean rule classifier.

    ``fit`` accepts either a :class:`TabularDataset` (binarized here with
    tree thresholds) or a 0/1 literal matrix plus optional catalog.
    """

    kind = ExplainerKind.BRCG

    def __init__(self, lambda0=0.001, lambda1=0.001, cnf=False, max_degree=4, beam_width=10,
                 max_clauses=10, max_thresholds=4, seed=0):
        super().__init__()
        self.lambda0, self.lambda1, self.cnf = lambda0, lambda1, cnf
        self.max_degree, self.beam_width, self.max_clauses = max_degree, beam_width, max_clauses
        self.max_thresholds = max_thresholds
        self.seed = seed
        self.binarizer: Optional[Binarizer] = None
        self.model: Optional[BooleanRule] = None

    def fit(self, X, y=None, catalog=None):
        if isinstance(X, TabularDataset):
            if y is not None:
                X = TabularDataset(X.feature_names, X.kinds, X.values, y, X.levels)
            self.binarizer, B = binarize_from_trees(X, self.max_thresholds)
            catalog, y = self.binarizer.catalog, X.labels
        else:
            B = X
        self.model = brcg_fit(B, y, catalog, self.lambda0, self.lambda1, self.cnf,
                              self.max_degree, self.beam_width, self.max_clauses, self.seed)
        self._fitted = True
        return self

    def _binarize(self, X):
        if self.binarizer is not None and (isinstance(X, TabularDataset)
                                           or np.asarray(X).shape[1] != len(self.model.catalog)):
            return self.binarizer.transform(X)
        return X

    def predict(self, X):
        self._check_fitted()
        return self.model.predict(self._binarize(X))

    def explain(self) -> Explanation:
        self._check_fitted()
        return Explanation.build(brcg_explain(self.model), self.kind.value, self.model.params)
