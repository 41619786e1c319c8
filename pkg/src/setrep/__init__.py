"""Set-based collaborative representation classification.

A query image is a bag of feature maps; a labeled gallery is one set per
class.  The solvers represent the query's affine hull over the concatenated
gallery (closed-form ridge in vector form, nuclear-norm ADMM in matrix form),
classes are scored by regularized representation residuals, and per-stage
decisions are fused with learned nonnegative weights.
"""

from .classify import ClassDecision, CollaborativeSetClassifier, class_residual, classify
from .errors import (
    ConfigError,
    DataIOError,
    DegenerateConstraintError,
    DimensionMismatchError,
    FormatError,
    MissingWeightsError,
    NoRepresentableClassError,
    SetrepError,
    SingularSystemError,
    SolverDivergenceError,
    ValidationError,
)
from .fileio import (
    load_manifest,
    load_stage_gallery,
    load_weights,
    read_fset,
    save_weights,
    write_fset,
)
from .fusion import (
    DecisionMatrix,
    PredictionTable,
    ScaleWeights,
    StagePredictionFuser,
    build_decision_matrix,
    fuse,
    learn_scale_weights,
)
from .matrix_solver import (
    AdmmState,
    MatrixCRParams,
    combine,
    objective_matrix,
    prox_nuclear,
    solve_matrix_hull,
    update_alpha,
    update_beta,
)
from .sets import (
    FeatureSet,
    Gallery,
    HullSolution,
    MatrixFeatureSet,
    SolveDiagnostics,
    concat_gallery,
    to_matrix_form,
    to_vector_form,
    validate,
)
from .synth import (
    OcclusionSpec,
    SynthConfig,
    class_prototype,
    gallery_to_vector_form,
    gen_gallery,
    gen_query,
    occlude,
)
from .vector_solver import (
    VectorCRParams,
    assemble_system,
    objective_vector,
    solve_vector_hull,
)

__version__ = "0.1.0"
