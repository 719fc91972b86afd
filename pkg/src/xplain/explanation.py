"""Explanation data model and its JSON form.

An :class:`Explanation` is a tagged union: ``kind`` names the payload
variant, ``payload`` carries the body and ``provenance`` records which
explainer produced it, a digest of its parameters and the seed when the
algorithm is stochastic.

Documents look like::

    {"schema": "aix-spec/1", "kind": "feature_attribution",
     "payload": {...}, "provenance": {...}}

Serialization is canonical (fixed key order, ``repr`` floats), so parsing a
document this module wrote and writing it again is byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, ClassVar, Optional

import numpy as np

from .errors import SchemaViolation

SCHEMA_VERSION = "aix-spec/1"


def _clean(v):
    """numpy scalars/arrays -> plain JSON-native Python values."""
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def params_digest(params: dict) -> str:
    blob = json.dumps(_clean(params), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- field checking ---------------------------------------------------------

def _check(value, rule: str, path: str):
    optional = rule.endswith("?")
    rule = rule.rstrip("?")
    if value is None:
        if optional:
            return None
        raise SchemaViolation(path, "required")
    if rule == "str":
        if not isinstance(value, str):
            raise SchemaViolation(path, "expected string")
        return value
    if rule == "bool":
        if not isinstance(value, bool):
            raise SchemaViolation(path, "expected boolean")
        return value
    if rule == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaViolation(path, "expected integer")
        return value
    if rule == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolation(path, "expected number")
        return float(value)
    if rule == "dict":
        if not isinstance(value, dict):
            raise SchemaViolation(path, "expected object")
        return value
    if rule.startswith("list[") and rule.endswith("]"):
        if not isinstance(value, list):
            raise SchemaViolation(path, "expected array")
        inner = rule[5:-1]
        return [_check(v, inner, f"{path}/{i}") for i, v in enumerate(value)]
    raise AssertionError(rule)


class _Payload:
    kind: ClassVar[str]
    schema: ClassVar[dict[str, str]]

    def to_dict(self) -> dict:
        return {f.name: _clean(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, doc, path="/payload"):
        if not isinstance(doc, dict):
            raise SchemaViolation(path, "expected object")
        kwargs = {}
        for name, rule in cls.schema.items():
            if name not in doc and not rule.endswith("?"):
                raise SchemaViolation(f"{path}/{name}", "required")
            kwargs[name] = _check(doc.get(name), rule, f"{path}/{name}")
        extra = set(doc) - set(cls.schema)
        if extra:
            raise SchemaViolation(f"{path}/{sorted(extra)[0]}", "unexpected field")
        obj = cls(**kwargs)
        obj._validate(path)
        return obj

    def _validate(self, path):
        pass


@dataclass
class RuleSet(_Payload):
    """Boolean rule in readable form.

    ``constant_prediction`` is set when the rule has no clauses: an empty DNF
    always predicts the negative class, an empty CNF the positive one.
    """

    kind: ClassVar[str] = "rule_set"
    schema: ClassVar[dict] = {
        "polarity": "str", "clauses": "list[list[str]]", "objective": "float",
        "params": "dict", "constant_prediction": "int?", "note": "str?"}

    polarity: str
    clauses: list
    objective: float
    params: dict = field(default_factory=dict)
    constant_prediction: Optional[int] = None
    note: Optional[str] = None

    def _validate(self, path):
        if self.polarity not in ("DNF", "CNF"):
            raise SchemaViolation(f"{path}/polarity", "must be DNF or CNF")


@dataclass
class RuleTerms(_Payload):
    """Rule-based generalized linear model: intercept plus weighted conjunctions."""

    kind: ClassVar[str] = "rule_terms"
    schema: ClassVar[dict] = {
        "link": "str", "intercept": "float", "terms": "list[str]",
        "coefficients": "list[float]", "params": "dict"}

    link: str
    intercept: float
    terms: list
    coefficients: list
    params: dict = field(default_factory=dict)

    def _validate(self, path):
        if self.link not in ("identity", "logit"):
            raise SchemaViolation(f"{path}/link", "must be identity or logit")
        if len(self.terms) != len(self.coefficients):
            raise SchemaViolation(f"{path}/coefficients", "length differs from terms")


@dataclass
class FeatureAttribution(_Payload):
    kind: ClassVar[str] = "feature_attribution"
    schema: ClassVar[dict] = {
        "method": "str", "values": "list[float]", "intercept": "float",
        "baseline": "list[float]?", "target_class": "int",
        "feature_names": "list[str]", "std_errors": "list[float?]?",
        "selected": "list[int]?", "nsamples": "int", "seed": "int?",
        "exact": "bool", "score": "float?", "efficiency_gap": "float?"}

    method: str
    values: Any
    intercept: float
    target_class: int
    feature_names: list
    nsamples: int
    baseline: Any = None
    std_errors: Any = None
    selected: Optional[list] = None
    seed: Optional[int] = None
    exact: bool = False
    score: Optional[float] = None
    efficiency_gap: Optional[float] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.baseline is not None:
            self.baseline = np.asarray(self.baseline, dtype=float)

    def _validate(self, path):
        d = len(self.values)
        if len(self.feature_names) != d:
            raise SchemaViolation(f"{path}/feature_names", "length differs from values")
        for name in ("baseline", "std_errors"):
            v = getattr(self, name)
            if v is not None and len(v) != d:
                raise SchemaViolation(f"{path}/{name}", "length differs from values")
        if self.selected is not None and any(not 0 <= j < d for j in self.selected):
            raise SchemaViolation(f"{path}/selected", "index out of range")

    def to_dict(self):
        # fixed order independent of dataclass defaults
        return {name: _clean(getattr(self, name)) for name in self.schema}


@dataclass
class Contrast(_Payload):
    """Pertinent negative (what must change) or positive (what must stay)."""

    kind: ClassVar[str] = "contrast"
    schema: ClassVar[dict] = {
        "mode": "str", "n_features": "int", "delta": "list[float]",
        "instance": "list[float]", "base": "list[float]?",
        "feature_names": "list[str]", "original_class": "int",
        "achieved_class": "int?", "kappa": "float", "margin": "float?",
        "c": "float?", "beta": "float", "l1": "float?", "l2": "float?",
        "converged": "bool", "c_trace_length": "int", "seed": "int?"}

    mode: str
    n_features: int
    delta: Any
    instance: Any
    feature_names: list
    original_class: int
    kappa: float
    beta: float
    converged: bool
    c_trace_length: int
    base: Any = None
    achieved_class: Optional[int] = None
    margin: Optional[float] = None
    c: Optional[float] = None
    l1: Optional[float] = None
    l2: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        self.instance = np.asarray(self.instance, dtype=float)
        if self.base is not None:
            self.base = np.asarray(self.base, dtype=float)

    @property
    def point(self) -> np.ndarray:
        """The contrastive input: ``x + delta`` (PN) or ``base + delta`` (PP)."""
        origin = self.instance if self.mode == "PN" else self.base
        return origin + self.delta

    def _validate(self, path):
        if self.mode not in ("PN", "PP"):
            raise SchemaViolation(f"{path}/mode", "must be PN or PP")
        d = self.n_features
        for name in ("delta", "instance", "base", "feature_names"):
            v = getattr(self, name)
            if v is not None and len(v) != d:
                raise SchemaViolation(f"{path}/{name}", f"length {len(v)} != n_features {d}")
        if self.mode == "PP" and self.base is None:
            raise SchemaViolation(f"{path}/base", "required for PP")

    def to_dict(self):
        return {name: _clean(getattr(self, name)) for name in self.schema}


@dataclass
class PrototypeSet(_Payload):
    kind: ClassVar[str] = "prototype_set"
    schema: ClassVar[dict] = {
        "indices": "list[int]", "weights": "list[float]", "objective": "float",
        "sigma": "float", "objective_trace": "list[float]?"}

    indices: list
    weights: Any
    objective: float
    sigma: float
    objective_trace: Optional[list] = None

    def __post_init__(self):
        self.indices = [int(i) for i in self.indices]
        self.weights = np.asarray(self.weights, dtype=float)

    def _validate(self, path):
        if len(self.indices) != len(self.weights):
            raise SchemaViolation(f"{path}/weights", "length differs from indices")
        if len(set(self.indices)) != len(self.indices):
            raise SchemaViolation(f"{path}/indices", "duplicate index")
        if np.any(self.weights < 0):
            raise SchemaViolation(f"{path}/weights", "negative weight")


@dataclass
class SampleWeights(_Payload):
    kind: ClassVar[str] = "sample_weights"
    schema: ClassVar[dict] = {
        "weights": "list[float]", "l0": "int?", "probe_accuracies": "list[float]",
        "baseline_acc": "float", "reweighted_acc": "float", "qualified": "bool"}

    weights: Any
    l0: Optional[int]
    probe_accuracies: list
    baseline_acc: float
    reweighted_acc: float
    qualified: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)

    def _validate(self, path):
        if np.any(self.weights < 0):
            raise SchemaViolation(f"{path}/weights", "negative weight")


@dataclass
class LabeledExplanation(_Payload):
    kind: ClassVar[str] = "labeled_explanation"
    schema: ClassVar[dict] = {
        "label": "int", "explanation": "int", "combined": "int", "n_explanations": "int"}

    label: int
    explanation: int
    combined: int
    n_explanations: int

    def _validate(self, path):
        if self.combined != self.label * self.n_explanations + self.explanation:
            raise SchemaViolation(f"{path}/combined", "inconsistent with label/explanation")


PAYLOADS = {cls.kind: cls for cls in (
    RuleSet, RuleTerms, FeatureAttribution, Contrast, PrototypeSet,
    SampleWeights, LabeledExplanation)}


@dataclass
class Provenance:
    explainer: str
    params_digest: str
    seed: Optional[int] = None


@dataclass
class Explanation:
    payload: _Payload
    provenance: Provenance

    @property
    def kind(self) -> str:
        return self.payload.kind

    @classmethod
    def build(cls, payload, explainer, params, seed=None):
        return cls(payload, Provenance(str(explainer), params_digest(params), seed))

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "payload": self.payload.to_dict(),
            "provenance": dataclasses.asdict(self.provenance),
        }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def serialize_explanation(explanation: Explanation) -> str:
    return dumps(explanation.to_dict())


def parse_explanation(text_or_doc) -> Explanation:
    if isinstance(text_or_doc, (str, bytes)):
        try:
            doc = json.loads(text_or_doc)
        except json.JSONDecodeError as e:
            raise SchemaViolation("/", f"not JSON: {e}") from None
    else:
        doc = text_or_doc
    if not isinstance(doc, dict):
        raise SchemaViolation("/", "expected object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise SchemaViolation("/schema", f"expected {SCHEMA_VERSION!r}")
    if "kind" not in doc:
        raise SchemaViolation("/kind", "required")
    kind = doc["kind"]
    if kind not in PAYLOADS:
        raise SchemaViolation("/kind", f"unknown kind {kind!r}")
    if "payload" not in doc:
        raise SchemaViolation("/payload", "required")
    payload = PAYLOADS[kind].from_dict(doc["payload"], "/payload")
    prov = _check(doc.get("provenance"), "dict", "/provenance")
    provenance = Provenance(
        explainer=_check(prov.get("explainer"), "str", "/provenance/explainer"),
        params_digest=_check(prov.get("params_digest"), "str", "/provenance/params_digest"),
        seed=_check(prov.get("seed"), "int?", "/provenance/seed"),
    )
    return Explanation(payload, provenance)
