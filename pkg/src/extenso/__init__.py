"""Numerical calculus of extensivity.

Jets give exact derivatives of scalar fields, the exterior calculus layer
turns them into forms and Lie derivatives, and the checker suite evaluates
homogeneity, integrability and transversality residuals at sample points.
"""

from __future__ import annotations

from .diffcalc import Box, ScalarField, SmoothMap, hessian, jacobian, jet_of
from .expr import Binding, evaluate, free_vars, parse, pretty
from .exterior import (FormValue, KForm, SymTensor2Field, VectorField, exterior_derivative,
                       interior_product, lie_derivative_form, lie_derivative_sym2, pullback, wedge)
from .flows import (Chart, FlowResult, classify_singularity, extensive_chart_from_field, flow,
                    flow_box_chart, scale_state)
from .jets import Jet

__version__ = "0.1.0"

__all__ = [
    "Binding", "Box", "Chart", "FlowResult", "FormValue", "Jet", "KForm", "ScalarField",
    "SmoothMap", "SymTensor2Field", "VectorField", "classify_singularity", "evaluate",
    "extensive_chart_from_field", "exterior_derivative", "flow", "flow_box_chart", "free_vars",
    "hessian", "interior_product", "jacobian", "jet_of", "lie_derivative_form",
    "lie_derivative_sym2", "parse", "pretty", "pullback", "scale_state", "wedge",
]
