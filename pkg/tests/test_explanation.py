import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xplain.errors import SchemaViolation
from xplain.explanation import (Contrast, Explanation, FeatureAttribution, LabeledExplanation,
                                PrototypeSet, RuleSet, RuleTerms, SampleWeights,
                                parse_explanation, serialize_explanation)


def samples():
    return [
        Explanation.build(RuleSet("DNF", [["a > 1"], ["b <= 2", "c == x"]], 0.125,
                                  {"lambda0": 0.001}), "BRCG", {"lambda0": 0.001}),
        Explanation.build(RuleSet("CNF", [], 0.5, {}, 1, "predicts positive class"), "BRCG", {}),
        Explanation.build(RuleTerms("logit", -0.25, ["a > 1"], [1.5]), "GLRM", {}),
        Explanation.build(FeatureAttribution("kernel_shap", [0.1, -0.2], 0.5, 1, ["a", "b"], 4,
                                             baseline=[0, 0], std_errors=[0.0, 0.0],
                                             exact=True, score=0.4, efficiency_gap=0.0),
                          "KernelSHAP", {}),
        Explanation.build(Contrast("PN", 2, [0.5, 0.0], [1.0, 2.0], ["a", "b"], 0, 0.01, 0.1,
                                   True, 9, achieved_class=1, margin=0.02, c=1.0, l1=0.5,
                                   l2=0.5, seed=0), "CEM", {"kappa": 0.01}, 0),
        Explanation.build(PrototypeSet([3, 1], [0.7, 0.2], 0.4, 1.3, [0.3, 0.4]), "ProtoDash", {}),
        Explanation.build(SampleWeights([0.5, 1.5], 1, [0.7, 0.9], 0.6, 0.65, True),
                          "ProfWeight", {}, 3),
        Explanation.build(LabeledExplanation(1, 3, 8, 5), "TED", {}),
    ]


@pytest.mark.parametrize("expl", samples(), ids=lambda e: e.kind)
def test_round_trip_byte_identical(expl):
    text = serialize_explanation(expl)
    back = parse_explanation(text)
    assert back.kind == expl.kind
    assert serialize_explanation(back) == text
    assert json.loads(text)["schema"] == "aix-spec/1"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=8),
       st.integers(0, 2 ** 31))
def test_attribution_round_trip_property(values, seed):
    d = len(values)
    attr = FeatureAttribution("lime", values, 0.1, 0, [f"f{j}" for j in range(d)], 100,
                              baseline=np.zeros(d), seed=seed, selected=list(range(d)))
    text = serialize_explanation(Explanation.build(attr, "LIME", {"k": d}, seed))
    again = serialize_explanation(parse_explanation(text))
    assert again == text
    assert np.array_equal(parse_explanation(text).payload.values, np.asarray(values))


def _doc(i=0):
    return json.loads(serialize_explanation(samples()[i]))


def test_missing_kind():
    doc = _doc()
    del doc["kind"]
    with pytest.raises(SchemaViolation) as err:
        parse_explanation(doc)
    assert err.value.path == "/kind"


def test_contrast_delta_length():
    doc = _doc(4)
    doc["payload"]["delta"] = [0.1, 0.2, 0.3]
    with pytest.raises(SchemaViolation) as err:
        parse_explanation(json.dumps(doc))
    assert err.value.path == "/payload/delta"


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.update(schema="other/9"), "/schema"),
    (lambda d: d.update(kind="nope"), "/kind"),
    (lambda d: d.pop("payload"), "/payload"),
    (lambda d: d["payload"].pop("polarity"), "/payload/polarity"),
    (lambda d: d["payload"].update(polarity="XOR"), "/payload/polarity"),
    (lambda d: d["payload"].update(extra=1), "/payload/extra"),
    (lambda d: d["payload"].update(objective="high"), "/payload/objective"),
])
def test_schema_paths(mutate, path):
    doc = _doc()
    mutate(doc)
    with pytest.raises(SchemaViolation) as err:
        parse_explanation(doc)
    assert err.value.path == path


def test_not_json():
    with pytest.raises(SchemaViolation) as err:
        parse_explanation("{oops")
    assert err.value.path == "/"


def test_negative_prototype_weight_rejected():
    doc = _doc(5)
    doc["payload"]["weights"] = [0.7, -0.2]
    with pytest.raises(SchemaViolation):
        parse_explanation(doc)


def test_contrast_point():
    c = samples()[4].payload
    assert np.allclose(c.point, [1.5, 2.0])
    pp = Contrast("PP", 2, [0.5, 0.0], [1.0, 2.0], ["a", "b"], 0, 0.01, 0.1, True, 9,
                  base=[0.0, 0.0])
    assert np.allclose(pp.point, [0.5, 0.0])
