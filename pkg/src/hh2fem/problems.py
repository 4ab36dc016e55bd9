"""The three L-shape benchmark problems driving the experiments.

All problems solve -div(A grad u) = f on the L-shaped domain with A = I and
Dirichlet data g (replaced by its nodal interpolant in the discrete systems).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class ProblemSpec:
    """Data of one boundary value problem.

    ``grad_u`` is the exact solution's gradient when available; problems
    with a point singularity carry its location in ``singular_at`` so that
    error quadrature can raise the order on the touching elements.
    """

    name: str
    f: Callable
    g: Callable
    u: Optional[Callable] = None
    grad_u: Optional[Callable] = None
    coefficient: object = None  # None means the identity tensor
    singular_at: Optional[tuple] = None

    @property
    def has_exact_solution(self):
        return self.grad_u is not None


def problem_smooth():
    """Radially symmetric bump with a peak at the origin."""

    def u(x):
        r2 = (x**2).sum(axis=-1)
        return (1.0 - 10.0 * r2) * np.exp(-5.0 * r2)

    def grad_u(x):
        r2 = (x**2).sum(axis=-1)
        return (100.0 * r2 - 30.0)[..., None] * x * np.exp(-5.0 * r2)[..., None]

    def f(x):
        r2 = (x**2).sum(axis=-1)
        return np.exp(-5.0 * r2) * (1000.0 * r2**2 - 700.0 * r2 + 60.0)

    return ProblemSpec(name="smooth", f=f, g=u, u=u, grad_u=grad_u)


def problem_singular_known():
    """Harmonic corner singularity r^(2/3) sin(2 phi / 3).

    The angle is measured from the positive x-axis into [0, 2 pi), which
    makes u vanish on both boundary legs meeting at the reentrant corner.
    """

    def _polar(x):
        r2 = (x**2).sum(axis=-1)
        phi = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2.0 * np.pi)
        return r2, phi

    def u(x):
        r2, phi = _polar(x)
        return r2 ** (1.0 / 3.0) * np.sin(2.0 * phi / 3.0)

    def grad_u(x):
        r2, phi = _polar(x)
        scale = (2.0 / 3.0) * r2 ** (-1.0 / 6.0)
        return np.stack(
            [-scale * np.sin(phi / 3.0), scale * np.cos(phi / 3.0)], axis=-1
        )

    def f(x):
        return np.zeros(np.asarray(x).shape[:-1])

    return ProblemSpec(
        name="singular-known", f=f, g=u, u=u, grad_u=grad_u, singular_at=(0.0, 0.0)
    )


def problem_singular_unknown():
    """Constant load, zero boundary values; the solution is not known."""

    def f(x):
        return np.ones(np.asarray(x).shape[:-1])

    def g(x):
        return np.zeros(np.asarray(x).shape[:-1])

    return ProblemSpec(name="singular-unknown", f=f, g=g)


_REGISTRY = {
    "smooth": problem_smooth,
    "singular-known": problem_singular_known,
    "singular-unknown": problem_singular_unknown,
}


def problem_names():
    return sorted(_REGISTRY)


def get_problem(name):
    key = str(name).replace("_", "-").lower()
    try:
        return _REGISTRY[key]()
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}; pick one of {', '.join(problem_names())}"
        ) from None
