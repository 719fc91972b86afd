"""Local post-hoc explainers for single predictions."""

from .cem import CEMExplainer, cem_pn, cem_pp
from .lime import LimeExplainer, lime_explain
from .shap import KernelShapExplainer, kernel_shap, shapley_by_permutations

__all__ = [
    "CEMExplainer", "KernelShapExplainer", "LimeExplainer", "cem_pn", "cem_pp",
    "kernel_shap", "lime_explain", "shapley_by_permutations",
]
