from mipnn.mip.build import (
    DEFAULT_EPS,
    DEFAULT_MARGIN,
    OBJECTIVES,
    VarMap,
    attach_max_correct,
    attach_min_hinge,
    attach_objective,
    attach_sat_margin,
    build_base,
    build_training_model,
    compute_bigM,
    expected_counts,
    linearize_indicators,
)
from mipnn.mip.model import (
    BINARY,
    CONTINUOUS,
    INTEGER,
    IndicatorConstraint,
    LinearConstraint,
    LinExpr,
    MipModel,
    Objective,
    Variable,
)
from mipnn.mip.pwl import PwlSpec, squared_hinge
