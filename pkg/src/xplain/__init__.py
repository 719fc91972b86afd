"""Explainability toolkit: interpretable models, post-hoc explainers and metrics."""

from .core import (ExplainerFamily, ExplainerKind, FunctionModel, ModelHandle, QuestionKind,
                   family_of, make_explainer, recommend_explainers)
from .errors import AlgorithmError, DataError, UsageError, XplainError
from .explanation import Explanation, parse_explanation, serialize_explanation

__version__ = "0.1.0"

__all__ = [
    "AlgorithmError", "DataError", "ExplainerFamily", "ExplainerKind", "Explanation",
    "FunctionModel", "ModelHandle", "QuestionKind", "UsageError", "XplainError",
    "family_of", "make_explainer", "parse_explanation", "recommend_explainers",
    "serialize_explanation",
]
