"""Explainer families, the model contract, and question routing.

Explainers are grouped by where they act in the modeling pipeline:

* data explainers summarize a dataset without labels or a model;
* directly interpretable supervised explainers learn a model that is its own
  explanation;
* local post-hoc explainers explain one prediction of an existing model,
  either through its score function only (black box) or through its
  internals (white box);
* global post-hoc explainers explain or distill a whole model.

Every explainer follows the same two-phase lifecycle: ``fit`` once, then call
``explain`` any number of times.
"""

from __future__ import annotations

import abc
import enum
from typing import Callable, NamedTuple

import numpy as np

from .errors import GradientUnavailable, NoLayers, Unimplemented


class ExplainerKind(enum.Enum):
    BRCG = "BRCG"
    GLRM = "GLRM"
    ProtoDash = "ProtoDash"
    ProfWeight = "ProfWeight"
    TED = "TED"
    CEM = "CEM"
    LIME = "LIME"
    KernelSHAP = "KernelSHAP"
    CEM_MAF = "CEM-MAF"
    DIPVAE = "DIP-VAE"

    @property
    def implemented(self) -> bool:
        return self not in _UNIMPLEMENTED

    @property
    def label(self) -> str:
        if self.implemented:
            return self.value
        return f"{self.value} (not implemented)"


_UNIMPLEMENTED = frozenset({ExplainerKind.CEM_MAF, ExplainerKind.DIPVAE})


class ExplainerFamily(enum.Enum):
    DataExplainer = "DIExplainer"
    DirectlyInterpretableSupervised = "DISExplainer"
    LocalBlackBox = "LocalBBExplainer"
    LocalWhiteBox = "LocalWBExplainer"
    GlobalBlackBox = "GlobalBBExplainer"
    GlobalWhiteBox = "GlobalWBExplainer"


_FAMILY = {
    ExplainerKind.ProtoDash: ExplainerFamily.DataExplainer,
    ExplainerKind.DIPVAE: ExplainerFamily.DataExplainer,
    ExplainerKind.BRCG: ExplainerFamily.DirectlyInterpretableSupervised,
    ExplainerKind.GLRM: ExplainerFamily.DirectlyInterpretableSupervised,
    ExplainerKind.TED: ExplainerFamily.DirectlyInterpretableSupervised,
    ExplainerKind.LIME: ExplainerFamily.LocalBlackBox,
    ExplainerKind.KernelSHAP: ExplainerFamily.LocalBlackBox,
    ExplainerKind.CEM: ExplainerFamily.LocalWhiteBox,
    ExplainerKind.CEM_MAF: ExplainerFamily.LocalWhiteBox,
    ExplainerKind.ProfWeight: ExplainerFamily.GlobalWhiteBox,
}


def family_of(kind: ExplainerKind) -> ExplainerFamily:
    return _FAMILY[ExplainerKind(kind)]


class QuestionKind(enum.Enum):
    Q1_GlobalImportant = "Q1"
    Q2_LocalDrivers = "Q2"
    Q3_MinimalChange = "Q3"
    Q4_SimilarInputs = "Q4"

    @classmethod
    def parse(cls, text: str) -> "QuestionKind":
        for q in cls:
            if text in (q.value, q.name):
                return q
        raise ValueError(f"unknown question {text!r}")


_ROUTES = {
    QuestionKind.Q1_GlobalImportant: (
        ExplainerKind.BRCG, ExplainerKind.GLRM, ExplainerKind.ProfWeight),
    QuestionKind.Q2_LocalDrivers: (ExplainerKind.LIME, ExplainerKind.KernelSHAP),
    QuestionKind.Q3_MinimalChange: (ExplainerKind.CEM, ExplainerKind.CEM_MAF),
    QuestionKind.Q4_SimilarInputs: (ExplainerKind.ProtoDash,),
}


def recommend_explainers(question: QuestionKind) -> list[ExplainerKind]:
    """Explainers able to answer ``question``, in catalog order.

    Unimplemented kinds are kept in the list; check ``kind.implemented``.
    """
    return list(_ROUTES[QuestionKind(question)])


# -- model contract -----------------------------------------------------------

class ModelHandle(abc.ABC):
    """Framework-free view of a classifier.

    The black-box level is :meth:`predict_proba`. White-box models also set
    ``has_gradient`` (then :meth:`gradient` works) and/or ``has_layers``.
    Implementations must be reentrant: explainers call them concurrently.
    """

    num_classes: int
    has_gradient: bool = False
    has_layers: bool = False

    @abc.abstractmethod
    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Class probabilities for a batch, shape ``(n, num_classes)``."""

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.predict_proba(x[None, :])[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(np.atleast_2d(X)), axis=1)

    def gradient(self, x: np.ndarray, cls: int) -> np.ndarray:
        """d score[cls] / dx at a single point."""
        raise GradientUnavailable(f"{type(self).__name__} exposes no gradient")

    def layers(self, x: np.ndarray) -> list[np.ndarray]:
        """Hidden representations, first layer first. Accepts a batch."""
        raise NoLayers(f"{type(self).__name__} has no hidden layers")


class FunctionModel(ModelHandle):
    """Wrap a plain probability function ``f(X) -> (n, C)`` as a black box."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], num_classes: int):
        self._fn = fn
        self.num_classes = int(num_classes)

    def predict_proba(self, X):
        P = np.asarray(self._fn(np.atleast_2d(np.asarray(X, dtype=float))), dtype=float)
        if P.ndim != 2 or P.shape[1] != self.num_classes:
            raise ValueError(
                f"score function returned shape {P.shape}, expected (n, {self.num_classes})")
        return P


def class_scorer(model, cls: int = 0) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized ``X -> score[:, cls]`` for a ModelHandle or a bare callable.

    A bare callable may return either ``(n,)`` (already a single score) or
    ``(n, C)``.
    """
    if isinstance(model, ModelHandle):
        return lambda X: model.predict_proba(np.atleast_2d(X))[:, cls]

    def f(X):
        out = np.asarray(model(np.atleast_2d(X)), dtype=float)
        return out if out.ndim == 1 else out[:, cls]
    return f


# -- explainer families -------------------------------------------------------

class Explainer(abc.ABC):
    """Base of all explainers: ``fit`` then ``explain``."""

    kind: ExplainerKind

    def __init__(self):
        self._fitted = False

    @property
    def family(self) -> ExplainerFamily:
        return family_of(self.kind)

    def set_params(self, **params):
        for k, v in params.items():
            if not hasattr(self, k):
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    @abc.abstractmethod
    def fit(self, *args, **kwargs) -> "Explainer":
        ...

    def _check_fitted(self):
        if not self._fitted:
            raise RuntimeError(f"{type(self).__name__} must be fit before explain")


class DIExplainer(Explainer):
    """Explains a dataset; unsupervised."""


class DISExplainer(Explainer):
    """Learns a directly interpretable model from labelled data."""

    @abc.abstractmethod
    def predict(self, X):
        ...

    @abc.abstractmethod
    def explain(self, **kwargs):
        ...


class LocalBBExplainer(Explainer):
    """Explains single predictions through the score function only."""

    @abc.abstractmethod
    def explain_instance(self, x, **kwargs):
        ...


class LocalWBExplainer(Explainer):
    """Explains single predictions using model internals."""

    @abc.abstractmethod
    def explain_instance(self, x, **kwargs):
        ...


class GlobalBBExplainer(Explainer):
    @abc.abstractmethod
    def explain(self, **kwargs):
        ...


class GlobalWBExplainer(Explainer):
    @abc.abstractmethod
    def explain(self, **kwargs):
        ...


class _Registration(NamedTuple):
    module: str
    name: str


_EXPLAINERS = {
    ExplainerKind.BRCG: _Registration("xplain.dise.brcg", "BRCGExplainer"),
    ExplainerKind.GLRM: _Registration("xplain.dise.glrm", "GLRMExplainer"),
    ExplainerKind.TED: _Registration("xplain.dise.ted", "TEDCartesianExplainer"),
    ExplainerKind.ProtoDash: _Registration("xplain.exemplar", "ProtodashExplainer"),
    ExplainerKind.LIME: _Registration("xplain.local.lime", "LimeExplainer"),
    ExplainerKind.KernelSHAP: _Registration("xplain.local.shap", "KernelShapExplainer"),
    ExplainerKind.CEM: _Registration("xplain.local.cem", "CEMExplainer"),
    ExplainerKind.ProfWeight: _Registration("xplain.profweight", "ProfweightExplainer"),
}


def make_explainer(kind: ExplainerKind, *args, **kwargs) -> Explainer:
    """Construct the explainer class registered for ``kind``."""
    import importlib

    kind = ExplainerKind(kind)
    if not kind.implemented:
        raise Unimplemented(f"{kind.value} is not implemented")
    reg = _EXPLAINERS[kind]
    cls = getattr(importlib.import_module(reg.module), reg.name)
    return cls(*args, **kwargs)
