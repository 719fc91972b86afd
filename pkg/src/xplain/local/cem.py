"""Contrastive explanations: pertinent negatives and pertinent positives.

A pertinent negative is a small change ``delta`` that moves ``x`` out of its
predicted class ``y0``. A pertinent positive is a small part of ``x``, read
as ``base + delta`` with ``delta`` between 0 and ``x - base``, that is enough
on its own to keep ``y0``. Both minimize::

    c * hinge(delta) + beta * |delta|_1 + |delta|_2^2

over a box by FISTA with a soft-threshold/clip proximal step. The hinge
weight ``c`` is tuned by an outer search: multiply by 10 while infeasible,
bisect once a feasible value is known. The smallest feasible ``delta`` seen
anywhere is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import ExplainerKind, LocalWBExplainer
from ..errors import GradientUnavailable, NoPNFound, NoPPFound, UsageError
from ..explanation import Contrast, Explanation

FEAS_TOL = 1e-6
_C_UNBOUNDED = 1e10


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass
class _Problem:
    """Hinge side of the objective around a fixed origin."""

    model: object
    origin: np.ndarray
    y0: int
    kappa: float
    sign: float                 # +1: leave y0 (PN); -1: keep y0 (PP)
    lo: np.ndarray
    hi: np.ndarray

    def margin(self, delta) -> float:
        """Signed margin in the desired direction; feasible when >= kappa."""
        s = self.model.score(self.origin + delta)
        other = np.delete(s, self.y0)
        return float(self.sign * (other.max() - s[self.y0]))

    def hinge(self, delta):
        """Value and gradient of ``max(kappa - margin, 0)``."""
        p = self.origin + delta
        s = self.model.score(p)
        others = [j for j in range(len(s)) if j != self.y0]
        j = others[int(np.argmax(s[others]))]
        m = self.sign * (s[j] - s[self.y0])
        h = self.kappa - m
        if h <= 0:
            return 0.0, np.zeros_like(delta)
        g = -self.sign * (self.model.gradient(p, j) - self.model.gradient(p, self.y0))
        return float(h), g

    def feasible(self, delta) -> tuple[bool, float]:
        m = self.margin(delta)
        ok = m >= self.kappa - FEAS_TOL
        if self.sign > 0:
            ok = ok and m > 0           # strict: ties keep y0 under argmax
        else:
            ok = ok and m >= 0          # ties resolved toward y0
        return ok, m


@dataclass
class _Best:
    delta: Optional[np.ndarray] = None
    dist: float = np.inf
    c: Optional[float] = None
    margin: Optional[float] = None
    trace: list = field(default_factory=list)

    def offer(self, delta, dist, c, margin):
        if dist < self.dist:
            self.delta, self.dist, self.c, self.margin = delta.copy(), dist, c, margin
        self.trace.append(self.dist)


def _fista(prob: _Problem, c: float, beta: float, max_iter: int, best: _Best,
           tol: float = 1e-10, patience: int = 50) -> bool:
    """Minimize for a fixed ``c``. Returns whether any feasible iterate was seen."""
    d = len(prob.origin)

    def smooth(delta):
        h, g = prob.hinge(delta)
        return c * h + delta @ delta, c * g + 2.0 * delta

    def prox(v, t):
        return np.clip(soft_threshold(v, t * beta), prob.lo, prob.hi)

    def full(delta, f):
        return f + beta * np.abs(delta).sum()

    x_prev = np.zeros(d)
    y = x_prev.copy()
    t_mom = 1.0
    f_prev = smooth(x_prev)[0]
    found = False
    f_best, stall = full(x_prev, f_prev), 0
    ok, m = prob.feasible(x_prev)
    if ok:
        found = True
        best.offer(x_prev, 0.0, c, m)
    for _ in range(max_iter):
        fy, gy = smooth(y)
        step = 1.0
        while True:
            z = prox(y - step * gy, step)
            fz = smooth(z)[0]
            diff = z - y
            if fz <= fy + gy @ diff + diff @ diff / (2 * step) + 1e-12 or step < 1e-12:
                break
            step *= 0.5
        ok, m = prob.feasible(z)
        if ok:
            found = True
            best.offer(z, beta * np.abs(z).sum() + z @ z, c, m)
        F = full(z, fz)
        if F < f_best - 1e-10 * max(1.0, abs(f_best)):
            f_best, stall = F, 0
        else:
            stall += 1
            if stall >= patience:
                break
        if F > full(x_prev, f_prev):
            # adaptive restart: drop momentum when the objective goes up
            t_mom = 1.0
            y = x_prev.copy()
            if np.max(np.abs(diff)) < tol:
                break
            continue
        t_next = (1 + np.sqrt(1 + 4 * t_mom * t_mom)) / 2
        y = z + ((t_mom - 1) / t_next) * (z - x_prev)
        moved = np.max(np.abs(z - x_prev))
        x_prev, f_prev, t_mom = z, fz, t_next
        if moved < tol:
            break
    return found


def _search(prob: _Problem, beta: float, c0: float, c_steps: int, max_iter: int) -> tuple[_Best, int]:
    best = _Best()
    lower, upper, c = 0.0, _C_UNBOUNDED, float(c0)
    steps = 0
    for _ in range(c_steps):
        steps += 1
        if _fista(prob, c, beta, max_iter, best):
            upper = min(upper, c)
        else:
            lower = max(lower, c)
        if upper < _C_UNBOUNDED:
            c = (lower + upper) / 2
        else:
            c *= 10
    return best, steps


def _check_model(model):
    if not getattr(model, "has_gradient", False):
        raise GradientUnavailable(f"{type(model).__name__} exposes no gradient")


def _box(box, d):
    if box is None:
        return np.full(d, -np.inf), np.full(d, np.inf)
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (d,)).copy() for b in box)
    if np.any(lo > hi):
        raise UsageError("feature box has lower bound above upper bound")
    return lo, hi


def _direction(direction, d):
    if direction is None:
        return np.zeros(d)
    if isinstance(direction, str):
        v = {"increase": 1.0, "decrease": -1.0, "any": 0.0}.get(direction)
        if v is None:
            raise UsageError(f"unknown direction {direction!r}")
        return np.full(d, v)
    v = np.broadcast_to(np.asarray(direction, dtype=float), (d,)).copy()
    if not np.all(np.isin(v, (-1.0, 0.0, 1.0))):
        raise UsageError("direction entries must be -1, 0 or +1")
    return v


def _names(feature_names, d):
    return list(feature_names) if feature_names is not None else [f"x{j}" for j in range(d)]


def cem_pn(model, x, kappa: float = 0.01, beta: float = 0.1, c0: float = 0.1,
           c_steps: int = 9, max_iter: int = 1000, feature_box=None, direction=None,
           seed: int = 0, feature_names=None, raise_on_failure: bool = True) -> Contrast:
    """Smallest change to ``x`` that leaves its predicted class by ``kappa``.

    Args:
        model: white-box model exposing ``score`` and ``gradient``.
        x: instance to explain.
        kappa: required probability margin over the original class.
        beta: L1 weight; larger values give sparser changes.
        c0: initial hinge weight of the c-search.
        c_steps: number of c values tried.
        max_iter: FISTA iterations per c value.
        feature_box: optional ``(lo, hi)`` bounds on ``x + delta``.
        direction: None/"any", "increase", "decrease", or a per-feature vector
            of -1/0/+1 restricting the sign of each change.
        seed: recorded only; the solver is deterministic.

    Raises:
        NoPNFound: no tried ``c`` produced a class change (unless
            ``raise_on_failure`` is false, then ``converged`` is False).
    """
    _check_model(model)
    x = np.asarray(x, dtype=float)
    d = len(x)
    blo, bhi = _box(feature_box, d)
    if np.any(x < blo) or np.any(x > bhi):
        raise UsageError("x lies outside the feature box")
    lo, hi = blo - x, bhi - x
    sgn = _direction(direction, d)
    lo = np.where(sgn > 0, 0.0, lo)
    hi = np.where(sgn < 0, 0.0, hi)
    y0 = int(np.argmax(model.score(x)))
    prob = _Problem(model, x, y0, kappa, 1.0, lo, hi)
    best, steps = _search(prob, beta, c0, c_steps, max_iter)
    return _result("PN", prob, best, steps, x, None, kappa, beta, seed,
                   _names(feature_names, d), raise_on_failure)


def cem_pp(model, x, base=None, kappa: float = 0.01, beta: float = 0.1, c0: float = 0.1,
           c_steps: int = 9, max_iter: int = 1000, feature_box=None, seed: int = 0,
           feature_names=None, raise_on_failure: bool = True) -> Contrast:
    """Smallest part of ``x`` (measured from ``base``) that keeps its class.

    ``delta`` is confined elementwise between 0 and ``x - base``; ``base``
    defaults to the zero vector.

    Raises:
        NoPPFound: no tried ``c`` reached the margin.
    """
    _check_model(model)
    x = np.asarray(x, dtype=float)
    d = len(x)
    base = np.zeros(d) if base is None else np.asarray(base, dtype=float)
    if base.shape != x.shape:
        raise UsageError("base must have the same length as x")
    blo, bhi = _box(feature_box, d)
    if np.any(base < blo) or np.any(base > bhi):
        raise UsageError("base lies outside the feature box")
    span = x - base
    lo = np.maximum(np.minimum(0.0, span), blo - base)
    hi = np.minimum(np.maximum(0.0, span), bhi - base)
    y0 = int(np.argmax(model.score(x)))
    prob = _Problem(model, base, y0, kappa, -1.0, lo, hi)
    best, steps = _search(prob, beta, c0, c_steps, max_iter)
    return _result("PP", prob, best, steps, x, base, kappa, beta, seed,
                   _names(feature_names, d), raise_on_failure)


def _result(mode, prob, best, steps, x, base, kappa, beta, seed, names, raise_on_failure):
    d = len(x)
    if best.delta is None:
        if raise_on_failure:
            err = NoPNFound if mode == "PN" else NoPPFound
            raise err(f"no {mode} reached margin {kappa} in {steps} c-search steps")
        return Contrast(mode, d, np.zeros(d), x, names, prob.y0, kappa, beta, False, steps,
                        base=base, seed=int(seed))
    delta = best.delta
    point = prob.origin + delta
    achieved = int(np.argmax(prob.model.score(point)))
    if mode == "PP" and best.margin >= 0:
        achieved = prob.y0             # tie-break toward the original class
    return Contrast(
        mode, d, delta, x, names, prob.y0, kappa, beta, True, steps, base=base,
        achieved_class=achieved, margin=best.margin, c=best.c,
        l1=float(np.abs(delta).sum()), l2=float(np.sqrt(delta @ delta)), seed=int(seed))


def incumbent_trace(model, x, mode="PN", **kwargs) -> list:
    """Best-so-far distance after every FISTA step, for diagnostics."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    y0 = int(np.argmax(model.score(x)))
    if mode == "PN":
        prob = _Problem(model, x, y0, kwargs.get("kappa", 0.01), 1.0,
                        np.full(d, -np.inf), np.full(d, np.inf))
    else:
        base = np.asarray(kwargs.get("base", np.zeros(d)), dtype=float)
        span = x - base
        prob = _Problem(model, base, y0, kwargs.get("kappa", 0.01), -1.0,
                        np.minimum(0, span), np.maximum(0, span))
    best, _ = _search(prob, kwargs.get("beta", 0.1), kwargs.get("c0", 0.1),
                      kwargs.get("c_steps", 9), kwargs.get("max_iter", 1000))
    return best.trace


class CEMExplainer(LocalWBExplainer):
    kind = ExplainerKind.CEM

    def __init__(self, model, kappa=0.01, beta=0.1, c0=0.1, c_steps=9, max_iter=1000,
                 feature_box=None, direction=None, seed=0, feature_names=None):
        super().__init__()
        self.model = model
        self.kappa, self.beta, self.c0 = kappa, beta, c0
        self.c_steps, self.max_iter = c_steps, max_iter
        self.feature_box, self.direction = feature_box, direction
        self.seed = seed
        self.feature_names = feature_names
        self.base = None

    def fit(self, data=None):
        """Take the PP base as the feature-wise minimum of ``data`` if given."""
        _check_model(self.model)
        if data is not None:
            self.base = np.atleast_2d(np.asarray(data, dtype=float)).min(axis=0)
        self._fitted = True
        return self

    def _params(self, mode):
        return {"mode": mode, "kappa": self.kappa, "beta": self.beta, "c0": self.c0,
                "c_steps": self.c_steps, "max_iter": self.max_iter,
                "direction": self.direction if isinstance(self.direction, (str, type(None)))
                else list(map(float, self.direction))}

    def explain_instance(self, x, mode="PN") -> Explanation:
        self._check_fitted()
        common = dict(kappa=self.kappa, beta=self.beta, c0=self.c0, c_steps=self.c_steps,
                      max_iter=self.max_iter, feature_box=self.feature_box, seed=self.seed,
                      feature_names=self.feature_names)
        if mode == "PN":
            out = cem_pn(self.model, x, direction=self.direction, **common)
        elif mode == "PP":
            out = cem_pp(self.model, x, base=self.base, **common)
        else:
            raise UsageError(f"mode must be PN or PP, got {mode!r}")
        return Explanation.build(out, self.kind.value, self._params(mode), self.seed)
