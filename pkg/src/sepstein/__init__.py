"""Separability-model toolkit for one-shot entanglement bounds.

Conic programs for robustness, kappa entanglement, hypothesis-testing and
max-relative entropies against PPT, DPS or exact twirl-family models, plus
distillation and dilution bound calculators.
"""

from .errors import (
    ConsistencyError,
    DomainError,
    NumericError,
    SepSteinError,
    ShapeError,
    SizeError,
)
from .linalg import BipartiteState, partial_trace, partial_transpose, random_state
from .measures import (
    MeasureResult,
    dh_ent,
    dmax_ent,
    e_kappa,
    e_kappa_tilde,
    gen_robustness,
    measured_lower_bound,
    ree_lower_ppt,
)
from .models import SeparabilityModel, parse_model
from .protocols import construct_dilution, cost_bounds, distill_bounds, dilution_dim
from .antisym import antisym_table, stein_smoothing_check
# the state constructor antisym lives in .states; the name here is the submodule
from .states import isotropic, maxent, werner

__version__ = "0.1.0"
