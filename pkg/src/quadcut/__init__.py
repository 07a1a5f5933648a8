"""quadcut: high-order quadrature on domains bounded by intersecting level sets."""

from .bernstein import BezierPatch, Sign, SignConfig, body_sign, estimate_sign, interpolate
from .decompose import (
    DecompositionResult,
    GraphConfig,
    Tile,
    build_graph,
    choose_height_direction,
    decompose_box,
    is_graph,
    newton_height,
    tessellate,
)
from .errors import (
    AxisInactive,
    BracketInvalid,
    CapabilityMissing,
    DerivativeSingular,
    DirectionUndetermined,
    ExpressionError,
    InterpolationFailure,
    NewtonDiverged,
    NonFiniteEvaluation,
    NonFiniteIntegrand,
    NotTessellated,
    OrderUnsupported,
    QuadcutError,
    StructuralInvariantViolation,
)
from .levelset import DerivativeLevelSet, LevelSet, TransformedLevelSet, linearize, negate
from .mapping import (
    FaceEmbedding,
    MappingComposition,
    NestedMapping,
    from_tile,
    gamma_embedding,
    height_first_deriv,
    height_second_deriv,
)
from .quadrature import (
    AdaptiveConfig,
    BaseRule,
    QuadratureRule,
    RefinementSpec,
    adaptive_rule,
    contour_split,
    integrate,
    line_rule,
    read_csv,
    split_surface_rules,
    split_volume_rule,
    surface_rule,
    tensor_gauss,
    volume_rule,
    write_csv,
)
from .topology import Body, NestedBody, face, project, split_nested_body

__version__ = "0.1.0"
