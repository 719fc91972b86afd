import numpy as np
import pytest

from xplain.core import (ExplainerFamily, ExplainerKind, FunctionModel, QuestionKind,
                         class_scorer, family_of, make_explainer, recommend_explainers)
from xplain.errors import GradientUnavailable, NoLayers, Unimplemented

K = ExplainerKind


def test_routing_examples():
    assert recommend_explainers(QuestionKind.Q1_GlobalImportant) == [K.BRCG, K.GLRM, K.ProfWeight]
    assert recommend_explainers(QuestionKind.Q3_MinimalChange) == [K.CEM, K.CEM_MAF]
    assert recommend_explainers(QuestionKind.Q4_SimilarInputs) == [K.ProtoDash]


def test_routing_nonempty_and_flags_unimplemented():
    for q in QuestionKind:
        kinds = recommend_explainers(q)
        assert kinds
        for k in kinds:
            assert k.label.endswith("(not implemented)") == (not k.implemented)
    assert K.CEM_MAF.label == "CEM-MAF (not implemented)"


def test_exactly_four_questions():
    assert [q.value for q in QuestionKind] == ["Q1", "Q2", "Q3", "Q4"]
    assert QuestionKind.parse("Q2") is QuestionKind.Q2_LocalDrivers
    assert QuestionKind.parse("Q4_SimilarInputs") is QuestionKind.Q4_SimilarInputs
    with pytest.raises(ValueError):
        QuestionKind.parse("Q5")


def test_family_examples():
    assert family_of(K.BRCG) is ExplainerFamily.DirectlyInterpretableSupervised
    assert family_of(K.CEM) is ExplainerFamily.LocalWhiteBox
    assert family_of(K.ProtoDash) is ExplainerFamily.DataExplainer


def test_every_kind_has_one_family():
    expected = {
        K.ProtoDash: ExplainerFamily.DataExplainer,
        K.BRCG: ExplainerFamily.DirectlyInterpretableSupervised,
        K.GLRM: ExplainerFamily.DirectlyInterpretableSupervised,
        K.TED: ExplainerFamily.DirectlyInterpretableSupervised,
        K.LIME: ExplainerFamily.LocalBlackBox,
        K.KernelSHAP: ExplainerFamily.LocalBlackBox,
        K.CEM: ExplainerFamily.LocalWhiteBox,
        K.ProfWeight: ExplainerFamily.GlobalWhiteBox,
    }
    for kind in ExplainerKind:
        fam = family_of(kind)
        assert isinstance(fam, ExplainerFamily)
        if kind in expected:
            assert fam is expected[kind]


def test_constructed_explainers_match_family():
    model = FunctionModel(lambda X: np.column_stack([1 - X[:, 0], X[:, 0]]) * 0 + 0.5, 2)
    ctor_args = {K.LIME: (model,), K.KernelSHAP: (model,), K.CEM: (model,),
                 K.ProfWeight: (model,)}
    for kind in ExplainerKind:
        if not kind.implemented:
            with pytest.raises(Unimplemented):
                make_explainer(kind)
            continue
        ex = make_explainer(kind, *ctor_args.get(kind, ()))
        assert ex.family is family_of(kind)


def test_function_model_black_box():
    m = FunctionModel(lambda X: np.column_stack([np.full(len(X), 0.25), np.full(len(X), 0.75)]), 2)
    assert np.allclose(m.score(np.zeros(3)), [0.25, 0.75])
    assert list(m.predict(np.zeros((2, 3)))) == [1, 1]
    assert np.allclose(class_scorer(m, 1)(np.zeros((4, 3))), 0.75)
    with pytest.raises(GradientUnavailable):
        m.gradient(np.zeros(3), 0)
    with pytest.raises(NoLayers):
        m.layers(np.zeros(3))


def test_function_model_rejects_bad_shape():
    m = FunctionModel(lambda X: np.ones((len(X), 3)), 2)
    with pytest.raises(ValueError):
        m.predict_proba(np.zeros((1, 2)))


def test_class_scorer_bare_callable():
    f = class_scorer(lambda X: X.sum(axis=1))
    assert np.allclose(f(np.ones((2, 3))), [3.0, 3.0])
