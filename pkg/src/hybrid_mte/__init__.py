"""Inference for hybrid Bayesian networks whose continuous densities are
mixtures of truncated exponentials and whose deterministic variables are
weighted linear equations.

Layers, bottom up: expcalc (closed-form piecewise calculus), potential
(mixed mass/density potentials and their combination, marginalization,
restriction), model (network description, parsing, validation, compilation),
jointree (binary join tree construction and two-phase propagation), oracle
(quadrature, sampling, and linear-system cross-checks), cli (command line).
"""

from .config import FEAS_TOL, MAX_DEGREE, MAX_VARS, ZERO_EPS, max_pieces
from .errors import (
    CapacityExceeded,
    DegenerateDensity,
    DivergentIntegral,
    DomainMismatch,
    EngineError,
    InconsistentEvidence,
    InferenceError,
    InvalidJoinTree,
    InvalidPoint,
    ModelError,
    NonInvertibleEquation,
    NonlinearExpression,
    OracleDimension,
    ParseError,
    UnknownState,
    UnknownVariable,
    UnsupportedElimination,
)
from .linexpr import LinExpr
from .expcalc import (
    Constraint,
    ExpPolyTerm,
    PiecewiseFn,
    Region,
    definite_integral,
    eliminate_integrate,
    moment,
    multiply,
    support_interval,
)
from .potential import (
    DeterministicPotential,
    Entry,
    MassPotential,
    MixedPotential,
    WeightedEquation,
    combine,
    marginalize,
    restrict,
)
from .model import (
    Network,
    Variable,
    compile_potentials,
    density_fn,
    make_normal_mte,
    parse_model,
    serialize_model,
    validate_model,
)
from .jointree import (
    JoinTree,
    JoinTreeNode,
    PropagatedState,
    build_join_tree,
    marginal_parts,
    normalize_marginal,
    posterior_moments,
    propagate,
    query_marginal,
)
from .oracle import (
    QuadratureSpec,
    forward_sample,
    quadrature_posterior,
    solve_linear_system,
)

__version__ = "0.1.0"

__all__ = [
    "LinExpr",
    "Constraint",
    "ExpPolyTerm",
    "PiecewiseFn",
    "Region",
    "definite_integral",
    "eliminate_integrate",
    "moment",
    "multiply",
    "support_interval",
    "DeterministicPotential",
    "Entry",
    "MassPotential",
    "MixedPotential",
    "WeightedEquation",
    "combine",
    "marginalize",
    "restrict",
    "Network",
    "Variable",
    "compile_potentials",
    "density_fn",
    "make_normal_mte",
    "parse_model",
    "serialize_model",
    "validate_model",
    "JoinTree",
    "JoinTreeNode",
    "PropagatedState",
    "build_join_tree",
    "marginal_parts",
    "normalize_marginal",
    "posterior_moments",
    "propagate",
    "query_marginal",
    "QuadratureSpec",
    "forward_sample",
    "quadrature_posterior",
    "solve_linear_system",
    "EngineError",
    "ModelError",
    "InferenceError",
    "ParseError",
    "UnknownVariable",
    "NonlinearExpression",
    "InvalidJoinTree",
    "InvalidPoint",
    "DomainMismatch",
    "CapacityExceeded",
    "DivergentIntegral",
    "DegenerateDensity",
    "NonInvertibleEquation",
    "UnsupportedElimination",
    "UnknownState",
    "InconsistentEvidence",
    "OracleDimension",
    "ZERO_EPS",
    "FEAS_TOL",
    "MAX_DEGREE",
    "MAX_VARS",
    "max_pieces",
    "__version__",
]
