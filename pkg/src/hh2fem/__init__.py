"""Adaptive P1/P2 finite elements with hierarchical (h-h/2) error estimation."""

from .adaptive import (
    ConfigError,
    LevelState,
    LoopConfig,
    adaptive_step,
    doerfler_mark,
    iterate_levels,
    level_state,
    run_states,
)
from .estimators import (
    EstimatorReport,
    EstimatorVariant,
    IndicatorVector,
    ResidualEstimate,
    apx_indicators,
    estimator_report,
    eta_indicators,
    lambda_indicators,
    mu_indicators,
    osc_indicators,
    res_indicators,
    residual_estimator,
)
from .harness import (
    CSV_COLUMNS,
    IndexReport,
    LevelRecord,
    RateEstimate,
    estimate_rate,
    indices,
    make_record,
    read_csv,
    reliability_asymptote,
    run,
    true_error,
    write_csv,
)
from .mesh import (
    LineageError,
    Mesh,
    MeshError,
    RefineMode,
    Triangle,
    Vertex,
    check_conforming,
    child_map,
    initial_lshape,
    read_mesh,
    refine,
    shape_regularity,
    uniform_refine,
    write_mesh,
)
from .problems import (
    ProblemSpec,
    get_problem,
    problem_names,
    problem_singular_known,
    problem_singular_unknown,
    problem_smooth,
)
from .quadrature import QuadratureRule, quadrature
from .solve import (
    CoefficientField,
    DiscreteSolution,
    SolverError,
    SparseSystem,
    apply_dirichlet,
    assemble,
    energy_norm,
    solve_system,
)
from .space import FeSpace, build_space, nodal_interpolate, prolongate

__version__ = "0.1.0"
