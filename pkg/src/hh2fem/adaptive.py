"""Bulk marking and the solve-estimate-mark-refine loop."""

from dataclasses import dataclass

import numpy as np

from .estimators import EstimatorVariant, IndicatorVector, eta_indicators
from .mesh import Mesh, RefineMode, initial_lshape, refine, uniform_refine
from .solve import DiscreteSolution, SparseSystem, apply_dirichlet, assemble, solve_system
from .space import build_space


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LoopConfig:
    """Parameters of one adaptive run."""

    theta: float
    p: int
    mode: RefineMode
    variant: EstimatorVariant
    max_elements: int = 200_000
    max_levels: int | None = None
    solver: str = "auto"

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", RefineMode(self.mode))
            object.__setattr__(self, "variant", EstimatorVariant(self.variant))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not (isinstance(self.theta, (int, float)) and 0.0 < self.theta <= 1.0):
            raise ConfigError("theta must lie in (0, 1]")
        if self.p not in (1, 2):
            raise ConfigError("polynomial degree must be 1 or 2")
        try:
            self.variant.validate(self.p, self.mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.max_elements < 1:
            raise ConfigError("max_elements must be positive")
        if self.max_levels is not None and self.max_levels < 1:
            raise ConfigError("max_levels must be positive")


@dataclass
class LevelState:
    """Everything produced for one mesh in the loop."""

    level: int
    coarse_mesh: Mesh
    fine_mesh: Mesh
    fine_system: SparseSystem
    fine_solution: DiscreteSolution
    indicators: IndicatorVector
    marked: np.ndarray


def doerfler_mark(indicators, theta):
    """Minimal-cardinality element set carrying a theta share of the mass.

    Ties are broken by descending indicator value, then ascending element
    id.  theta = 1 marks every element; all-zero indicators yield the empty
    set for theta < 1.  The returned ids are sorted ascending.
    """
    if not 0.0 < theta <= 1.0:
        raise ConfigError("theta must lie in (0, 1]")
    if isinstance(indicators, IndicatorVector):
        sq = indicators.squared
    else:
        sq = np.asarray(indicators, dtype=float) ** 2
    n = len(sq)
    if theta == 1.0:
        return np.arange(n, dtype=np.int64)
    total = float(sq.sum())
    if total <= 0.0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(n), -sq))
    csum = np.cumsum(sq[order])
    # tiny relative slack so exact-arithmetic ties are not lost to rounding
    k = int(np.searchsorted(csum, theta * total * (1.0 - 1e-12))) + 1
    return np.sort(order[: min(k, n)])


def level_state(coarse_mesh, config, problem, level=0):
    """Run SOLVE and ESTIMATE and MARK for one coarse mesh."""
    fine_mesh = uniform_refine(coarse_mesh, config.mode)
    fine_space = build_space(fine_mesh, config.p)
    system = apply_dirichlet(
        assemble(fine_space, f=problem.f, coefficient=problem.coefficient),
        problem.g,
    )
    solution = solve_system(system, method=config.solver)
    indicators = eta_indicators(
        config.variant, solution, problem.f, problem.coefficient
    )
    marked = doerfler_mark(indicators, config.theta)
    return LevelState(
        level=level,
        coarse_mesh=coarse_mesh,
        fine_mesh=fine_mesh,
        fine_system=system,
        fine_solution=solution,
        indicators=indicators,
        marked=marked,
    )


def adaptive_step(state, config, problem):
    """REFINE the marked elements and process the next level."""
    next_mesh = refine(state.coarse_mesh, state.marked, config.mode)
    return level_state(next_mesh, config, problem, level=state.level + 1)


def iterate_levels(problem, config, initial_mesh=None):
    """Yield LevelStates until the stop rule triggers.

    Levels are produced for every mesh whose element count does not exceed
    ``config.max_elements``; the optional ``config.max_levels`` caps their
    number.
    """
    mesh = initial_lshape() if initial_mesh is None else initial_mesh
    level = 0
    while mesh.num_triangles <= config.max_elements and (
        config.max_levels is None or level < config.max_levels
    ):
        state = level_state(mesh, config, problem, level)
        yield state
        mesh = refine(state.coarse_mesh, state.marked, config.mode)
        level += 1


def run_states(problem, config, initial_mesh=None):
    """All LevelStates of one run as a list."""
    return list(iterate_levels(problem, config, initial_mesh))
