"""Directly interpretable supervised explainers."""

from .brcg import BooleanRule, BRCGExplainer, brcg_explain, brcg_fit
from .glrm import GLRMExplainer, RuleRegressionModel, glrm_explain, glrm_fit
from .ted import TEDCartesianExplainer, TEDModel, decode, encode, ted_fit, ted_predict

__all__ = [
    "BooleanRule", "BRCGExplainer", "brcg_explain", "brcg_fit",
    "GLRMExplainer", "RuleRegressionModel", "glrm_explain", "glrm_fit",
    "TEDCartesianExplainer", "TEDModel", "decode", "encode", "ted_fit", "ted_predict",
]
