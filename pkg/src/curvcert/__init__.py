"""Jet-based tensor calculus for certifying gradient Ricci soliton identities."""

from .curvature import (
    CurvatureBundle,
    CurvatureSite,
    ConformalBundle,
    bach_tensor,
    cotton_tensor,
    curvature_bundle,
    d_tensor,
    sectional_curvature,
    weyl_tensor,
)
from .divchain import (
    DivergenceChain,
    catino_div4_w,
    div2_ordering_variants,
    div3_radial,
    div_chain,
)
from .expr import differentiate, evaluate, jet_evaluate, parse_expression, to_text
from .geometry import (
    LocalGeometry,
    ModelSpec,
    TensorJet,
    christoffel_jet,
    contract,
    covariant_derivative,
    hessian,
    inverse_metric_jet,
    lower_index,
    metric_jet,
    raise_index,
    weighted_laplacian,
)
from .jets import Jet
from .models import (
    SamplePlan,
    SolitonCatalogEntry,
    builtin_models,
    load_model,
    sample_points,
    soliton_residual,
)
from .verify import (
    CheckReport,
    CheckSpec,
    ClassificationResult,
    classify_dim4,
    list_checks,
    run_check,
    run_tier,
)

__version__ = "0.1.0"
