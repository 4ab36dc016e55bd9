"""Per-level records, true-error quadrature, indices, rate fits, CSV."""

import csv
import io
from dataclasses import dataclass, fields

import numpy as np

from .adaptive import iterate_levels
from .estimators import estimator_report
from .mesh import RefineMode
from .quadrature import quadrature
from .solve import CoefficientField, apply_dirichlet, assemble, energy_norm, solve_system
from .space import build_space, element_gradients, prolongate
from .problems import get_problem

CSV_COLUMNS = (
    "level,nrelements,eta1,eta2,eta3,eta4,eta5,eta6,errorH1semi,osc,"
    "errorH1semiosc,effectivityindex,reliabilityindex,mutilde"
).split(",")

_SINGULAR_QUAD_ORDER = 19


@dataclass(frozen=True)
class LevelRecord:
    """One CSV row: mesh size, the six totals, errors and indices."""

    level: int
    nrelements: int
    eta1: float
    eta2: float
    eta3: float | None
    eta4: float
    eta5: float
    eta6: float | None
    errorH1semi: float | None
    osc: float
    errorH1semiosc: float | None
    effectivityindex: float | None
    reliabilityindex: float | None
    mutilde: float

    def __post_init__(self):
        for field in fields(self):
            value = getattr(self, field.name)
            if value is None:
                continue
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{field.name} must be finite and >= 0")
        if self.errorH1semi is not None:
            combined = self.errorH1semi**2 + self.osc**2
            if abs(self.errorH1semiosc**2 - combined) > 1e-12 * max(combined, 1e-300):
                raise ValueError("errorH1semiosc must combine error and osc")


@dataclass(frozen=True)
class RateEstimate:
    """Least-squares slope of log(quantity) against log(nrelements)."""

    slope: float
    window: tuple
    residual: float
    npoints: int


@dataclass(frozen=True)
class IndexReport:
    """Estimator/error ratios, with and without the oscillation term."""

    efficiency: float
    reliability: float
    efficiency_osc_free: float
    reliability_osc_free: float


def _corner_composite(corner, order=_SINGULAR_QUAD_ORDER, rings=12):
    """Composite rule concentrating near the barycentric vertex ``corner``.

    The element is split into dyadic rings shrinking toward the vertex, each
    integrated with the base rule; a plain high-order panel would lose three
    to four digits on the gradient singularity, which is too coarse for the
    error pinning the reporting relies on.  Returns barycentric points and
    weights summing to one.
    """
    base = quadrature(order)
    eye = np.eye(3)
    v, a, b = eye[corner], eye[(corner + 1) % 3], eye[(corner + 2) % 3]
    panels = []
    s = 1.0
    for _ in range(rings):
        a1, b1 = v + s * (a - v), v + s * (b - v)
        a2, b2 = v + 0.5 * s * (a - v), v + 0.5 * s * (b - v)
        panels.append((a2, a1, b1))
        panels.append((a2, b1, b2))
        s *= 0.5
    panels.append((v, v + s * (a - v), v + s * (b - v)))
    lams, weights = [], []
    for panel in panels:
        corners = np.stack(panel)
        fraction = abs(np.linalg.det(corners))
        lams.append(base.points @ corners)
        weights.append(fraction * base.weights)
    return np.concatenate(lams), np.concatenate(weights)


def true_error(space, coeffs, grad_u, coefficient=None, singular_at=None):
    """Energy-norm distance of a discrete function to the exact gradient.

    Elementwise quadrature of order 2p+4; elements owning the vertex
    ``singular_at`` (if any) are integrated with a composite order-19 rule
    graded toward that vertex.
    """
    mesh = space.mesh
    field = CoefficientField.identity(1) if coefficient is None else coefficient
    root = field.sqrt_on_elements(mesh)
    elems = np.arange(mesh.num_triangles)
    regular = np.ones(mesh.num_triangles, dtype=bool)
    batches = []
    if singular_at is not None:
        target = np.asarray(singular_at, dtype=float)
        at_corner = (mesh.corners == target).all(axis=2)
        regular &= ~at_corner.any(axis=1)
        for corner in range(3):
            batch = elems[at_corner[:, corner]]
            if len(batch):
                batches.append((batch,) + _corner_composite(corner))
    rule = quadrature(2 * space.p + 4)
    batches.append((elems[regular], rule.points, rule.weights))
    total = 0.0
    for batch, lam, weights in batches:
        pts = np.einsum("ql,nld->nqd", lam, mesh.corners[batch])
        diff = element_gradients(space, coeffs, batch, lam)
        diff = diff - grad_u(pts.reshape(-1, 2)).reshape(diff.shape)
        flux = np.einsum("nij,nqj->nqi", root[batch], diff)
        total += float(
            ((flux**2).sum(axis=2) * weights[None, :] * mesh.areas[batch][:, None]).sum()
        )
    return float(np.sqrt(max(total, 0.0)))


def reliability_asymptote(p, mode):
    """Limit of the reliability index under uniform refinement."""
    sons = 4 if RefineMode(mode) is RefineMode.M3 else 6
    return float(1.0 / np.sqrt(1.0 - float(sons) ** (-2.0 * p / 2.0)))


def indices(record):
    """Efficiency and reliability ratios of one record (known-u runs)."""
    if record.errorH1semiosc is None:
        raise ValueError("indices need the exact error")
    lam = np.sqrt(max(record.eta2**2 - record.osc**2, 0.0))
    mu = np.sqrt(max(record.eta5**2 - record.osc**2, 0.0))
    return IndexReport(
        efficiency=record.eta2 / record.errorH1semiosc,
        reliability=record.errorH1semiosc / record.eta5,
        efficiency_osc_free=lam / record.errorH1semi,
        reliability_osc_free=record.errorH1semi / mu,
    )


def make_record(state, problem, config):
    """Assemble the reporting quantities of one loop level."""
    coarse_space = build_space(state.coarse_mesh, config.p)
    coarse_system = apply_dirichlet(
        assemble(coarse_space, f=problem.f, coefficient=problem.coefficient),
        problem.g,
    )
    coarse_solution = solve_system(coarse_system, method=config.solver)
    fine_space = state.fine_solution.space
    mu_tilde = energy_norm(
        state.fine_system,
        state.fine_solution.coeffs
        - prolongate(coarse_space, fine_space, coarse_solution.coeffs),
    )
    report = estimator_report(
        state.fine_solution, problem.f, problem.coefficient, mu_tilde=mu_tilde
    )
    err = err_osc = eff = rel = None
    if problem.has_exact_solution:
        err = true_error(
            coarse_space,
            coarse_solution.coeffs,
            problem.grad_u,
            problem.coefficient,
            singular_at=problem.singular_at,
        )
        err_osc = float(np.sqrt(err**2 + report.osc**2))
        eff = report.totals[1] / err_osc
        rel = err_osc / report.totals[4]
    return LevelRecord(
        level=state.level,
        nrelements=state.coarse_mesh.num_triangles,
        eta1=report.totals[0],
        eta2=report.totals[1],
        eta3=report.totals[2],
        eta4=report.totals[3],
        eta5=report.totals[4],
        eta6=report.totals[5],
        errorH1semi=err,
        osc=report.osc,
        errorH1semiosc=err_osc,
        effectivityindex=eff,
        reliabilityindex=rel,
        mutilde=mu_tilde,
    )


def run(problem, config, on_level=None):
    """Full adaptive run returning one LevelRecord per level.

    ``problem`` may be a ProblemSpec or a registered problem name;
    ``on_level(state, record)`` is called after each level, letting callers
    inspect meshes and solutions without retaining them all in memory.
    """
    if isinstance(problem, str):
        problem = get_problem(problem)
    records = []
    for state in iterate_levels(problem, config):
        record = make_record(state, problem, config)
        records.append(record)
        if on_level is not None:
            on_level(state, record)
    return records


def estimate_rate(records, quantity, window=None):
    """Fitted log-log slope of ``quantity`` over a trailing window.

    ``quantity`` is a record attribute name or a callable.  By default the
    window holds the records with nrelements >= 1e3, extended backwards to
    at least 6 points; fewer than 5 usable points is an error.
    """
    get = quantity if callable(quantity) else lambda r: getattr(r, quantity)
    usable = [r for r in records if get(r) is not None and get(r) > 0]
    if window is None:
        tail = [r for r in usable if r.nrelements >= 1000]
        need = max(len(tail), 6)
        tail = usable[len(usable) - min(need, len(usable)):]
    else:
        tail = usable[-int(window):]
    if len(tail) < 5:
        raise ValueError("rate fit needs at least 5 levels")
    logn = np.log([r.nrelements for r in tail])
    logq = np.log([get(r) for r in tail])
    slope, intercept = np.polyfit(logn, logq, 1)
    resid = logq - (slope * logn + intercept)
    return RateEstimate(
        slope=float(slope),
        window=(tail[0].level, tail[-1].level),
        residual=float(np.sqrt(np.mean(resid**2))),
        npoints=len(tail),
    )


# -- CSV ----------------------------------------------------------------------


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".16e")


def csv_text(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([_format_cell(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(csv_text(records))


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValueError("unexpected column layout")
        records = []
        for row in reader:
            kwargs = {}
            for name, cell in zip(CSV_COLUMNS, row):
                if cell == "":
                    kwargs[name] = None
                elif name in ("level", "nrelements"):
                    kwargs[name] = int(cell)
                else:
                    kwargs[name] = float(cell)
            records.append(LevelRecord(**kwargs))
    return records
