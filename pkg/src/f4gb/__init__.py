"""F4 Groebner bases over prime fields and the rationals."""

from .api import (Ring, autoreduce, f4, groebner, is_groebner, macaulay_matrix, normal_form,
                  normal_form_many, spoly)
from .f4 import Divergence, F4Error
from .io import ParseError, SystemFile, certificate, format_system, parse_system, write_basis
from .monomials import DRL, MonomialOrdering
from .multimodular import ResourceError, groebner_rational
from .stats import Stats
from .trace import Trace, f4_apply, f4_apply_batched, f4_learn

__all__ = [
    "Ring", "autoreduce", "f4", "groebner", "is_groebner", "macaulay_matrix", "normal_form",
    "normal_form_many", "spoly", "Divergence", "F4Error", "ParseError", "SystemFile",
    "certificate", "format_system", "parse_system", "write_basis", "DRL", "MonomialOrdering",
    "ResourceError", "groebner_rational", "Stats", "Trace", "f4_apply", "f4_apply_batched",
    "f4_learn",
]
