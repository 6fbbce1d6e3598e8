"""Convergence-rate studies: discretization, surrogate, regularization, smoothing.

Each study sweeps one resolution or level parameter over a ladder, records a
deterministic table of errors, fits a log-log slope by ordinary least
squares, and optionally writes the table as CSV.  The regularization study
emits the full per-run record described in :mod:`invop.tikhonov`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigInvalid, DegenerateFit
from .fem import ProblemKind, ProblemTag, adjoint_apply, solve_forward_fem, solve_forward_reference
from .grid import GridFunction, SpaceKind, inner, norm
from .mollify import mollify
from .neural import ActivationKind
from .tikhonov import (
    RUN_COLUMNS,
    SurrogateHandle,
    TikhonovConfig,
    add_noise,
    choose_parameters,
    solve_inverse_problem,
)
from .training import (
    PerturbationSpec,
    assemble_neural_surrogate,
    build_linear_surrogate,
    center_training_set,
    generate_training_set,
    perturbation_shape,
)

STUDY_KINDS = ("fem_rate", "surrogate_error", "reg_rate", "mollify_rate")


# ---------------------------------------------------------------------------
# slope fitting


def fit_slope(x, y):
    """Least-squares slope (and its standard error) of log y against log x.

    Only strictly positive pairs enter the fit; fewer than three of them, or
    a ladder without spread in x, raises DegenerateFit.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if int(np.count_nonzero(keep)) < 3:
        raise DegenerateFit("need at least three positive points for a slope")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if np.ptp(lx) == 0.0:
        raise DegenerateFit("all abscissae coincide")
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    slope = float(coef[0])
    dof = lx.size - 2
    if dof > 0 and res.size:
        s2 = float(res[0]) / dof
        stderr = math.sqrt(s2 / float(np.sum((lx - lx.mean()) ** 2)))
    else:
        stderr = 0.0
    return slope, stderr


# ---------------------------------------------------------------------------
# configuration and result table


@dataclass(frozen=True)
class StudyConfig:
    study: str
    problem: str = "a"  # "a" or "c"
    ladder: tuple = ()
    surrogate: str = "fem"  # reg_rate only: "fem" | "rank" | "neural"
    n_cells: int = 256
    n_train: int = 6
    n_quad: int = 512  # branch sample count for the neural surrogate
    n_trunk: int = 14
    seed: int = 0
    constant: float = 1.0  # parameter-choice constant
    xi: float = 0.0
    max_iterations: int = 20000
    jobs: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.study not in STUDY_KINDS:
            raise ConfigInvalid(f"unknown study {self.study!r}; choose from {STUDY_KINDS}")
        if self.problem not in ("a", "c"):
            raise ConfigInvalid("problem must be 'a' or 'c'")
        if self.surrogate not in ("fem", "rank", "neural"):
            raise ConfigInvalid("surrogate must be fem, rank or neural")
        lad = tuple(self.ladder) if self.ladder else self.default_ladder()
        object.__setattr__(self, "ladder", lad)
        if len(lad) < 4:
            raise ConfigInvalid("ladder needs at least four points for a rate fit")
        increasing = all(b > a for a, b in zip(lad, lad[1:]))
        decreasing = all(b < a for a, b in zip(lad, lad[1:]))
        if not (increasing or decreasing):
            raise ConfigInvalid("ladder must be strictly monotone")
        if any(v <= 0 for v in lad):
            raise ConfigInvalid("ladder entries must be positive")
        if self.n_cells < 4 or self.n_train < 1 or self.n_quad < 2 or self.n_trunk < 2:
            raise ConfigInvalid("resolution parameters out of range")
        if self.constant <= 0 or self.xi < 0 or self.jobs < 1 or self.max_iterations < 1:
            raise ConfigInvalid("constant/xi/jobs/max_iterations out of range")

    def default_ladder(self) -> tuple:
        if self.study == "fem_rate":
            return (16, 32, 64, 128, 256)
        if self.study == "surrogate_error":
            return (8, 16, 32, 64, 128)
        if self.study == "reg_rate":
            ks = range(3, 10) if self.problem == "a" else range(3, 9)
            return tuple(0.1 * 2.0 ** (-k) for k in ks)
        return tuple(0.25 * 2.0 ** (-k) for k in range(5))


@dataclass(frozen=True)
class RateTable:
    columns: tuple
    rows: tuple
    fitted_slope: float
    slope_stderr: float
    case_slopes: tuple = ()
    aborted: bool = False

    def csv_lines(self):
        yield ",".join(self.columns)
        for r in self.rows:
            yield r if isinstance(r, str) else ",".join(
                f"{v:.17g}" if isinstance(v, float) else str(v) for v in r
            )


def _write_table(path, table: RateTable, note: str = ""):
    lines = list(table.csv_lines())
    if note:
        lines.append(f"# {note}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# the three analytic discretization cases


#: refinement used to evaluate the continuous L2 distance to an exact solution
_FINE_CELLS = 2048


def analytic_cases():
    """(label, problem, coefficient, load, exact solution) with closed-form
    solutions, given as callables so each mesh size samples them afresh."""
    return [
        (
            "a-flat",
            ProblemKind(ProblemTag.A_EXAMPLE),
            lambda s: np.ones_like(s),
            lambda s: np.pi ** 2 * np.sin(np.pi * s),
            lambda s: np.sin(np.pi * s),
        ),
        (
            "a-ramp",
            ProblemKind(ProblemTag.A_EXAMPLE),
            lambda s: 1.0 + s,
            lambda s: 1.0 + 4.0 * s,
            lambda s: s * (1.0 - s),
        ),
        (
            "c-flat",
            ProblemKind(ProblemTag.C_EXAMPLE),
            lambda s: np.ones_like(s),
            lambda s: (np.pi ** 2 + 1.0) * np.sin(np.pi * s),
            lambda s: np.sin(np.pi * s),
        ),
    ]


def _fem_case_error(case, n: int) -> float:
    """Continuous L2 distance of the piecewise-linear Galerkin solution to the
    exact solution, measured on a fine reference mesh (the nodal values alone
    can be superconvergent and hide the interpolation error)."""
    label, prob, x, f, y_exact = case
    xn = GridFunction.from_callable(x, n)
    fn = GridFunction.from_callable(f, n)
    y = solve_forward_fem(prob, xn, fn, n)
    fine = GridFunction.from_callable(y_exact, _FINE_CELLS)
    return norm(y.resample(_FINE_CELLS) - fine, SpaceKind.L2)


def calibrate_fem_rho(problem: ProblemKind, ladder=(16, 32, 64, 128, 256)) -> float:
    """Constant c with discretization error <= c / n^2 on the analytic cases."""
    c = 0.0
    for n in ladder:
        for case in analytic_cases():
            if case[1].tag is problem.tag:
                c = max(c, _fem_case_error(case, int(n)) * n * n)
    return c


def fem_rho(problem: ProblemKind, n: int) -> float:
    return calibrate_fem_rho(problem) / (n * n)


# ---------------------------------------------------------------------------
# study bodies


def _run_fem_rate(cfg: StudyConfig, rows: list):
    slopes = []
    errs_by_case = {}
    for n in cfg.ladder:
        for case in analytic_cases():
            e = _fem_case_error(case, int(n))
            rows.append((case[0], int(n), e))
            errs_by_case.setdefault(case[0], []).append(e)
    for label, errs in errs_by_case.items():
        slopes.append((label,) + fit_slope([float(v) for v in cfg.ladder], errs))
    worst = max(slopes, key=lambda t: t[1])  # slope closest to zero
    return ("case", "n", "error_L2"), worst[1], worst[2], tuple(slopes)


def _c_example_setup(cfg: StudyConfig):
    """Shared construction for the neural-surrogate studies on the c-example."""
    n = cfg.n_cells
    prob = ProblemKind(ProblemTag.C_EXAMPLE)
    f = GridFunction.constant(50.0, n)
    x0 = GridFunction.constant(1.0, n)
    spec = PerturbationSpec("sine", 0.1, cfg.n_train, seed=3)
    ts = generate_training_set(prob, f, x0, spec)
    ls = build_linear_surrogate(center_training_set(ts))
    modes = [
        perturbation_shape(PerturbationSpec("sine", 1.0, cfg.n_train), ell, n)
        for ell in range(1, cfg.n_train + 1)
    ]
    return prob, f, x0, ls, modes


def _smooth_integrands():
    """Products coefficient * basis direction as they appear inside the
    branch functionals, all smooth on [0, 1]."""
    return [
        lambda s: (1.0 + 0.1 * np.sin(2.0 * np.pi * s)) * np.sin(np.pi * s),
        lambda s: np.exp(s) * np.sin(2.0 * np.pi * s),
        lambda s: s * (1.0 - s) * np.cos(np.pi * s),
        lambda s: 1.0 / (1.0 + s * s),
    ]


def _run_surrogate_error(cfg: StudyConfig, rows: list):
    from .training import quadrature_nodes, quadrature_weights

    integrands = _smooth_integrands()
    fine = quadrature_nodes(1 << 16)
    fine_w = quadrature_weights(1 << 16)
    refs = [float(np.dot(fine_w, g(fine))) for g in integrands]
    errs = []
    for n_k in cfg.ladder:
        nodes = quadrature_nodes(int(n_k))
        w = quadrature_weights(int(n_k))
        e = max(
            abs(float(np.dot(w, g(nodes))) - ref)
            for g, ref in zip(integrands, refs)
        )
        rows.append((int(n_k), e))
        errs.append(e)
    slope, stderr = fit_slope([float(v) for v in cfg.ladder], errs)
    return ("n_quad", "quad_error"), slope, stderr, ()


def _source_target_a(prob, x0, f, n):
    """Target with a genuine source representation: prior offset equal to the
    adjoint of a step load, scaled to a 0.2 amplitude."""
    s = x0.nodes
    w = GridFunction(n, np.where(s > 0.5, 1.0, 0.0))
    g = adjoint_apply(prob, x0, w, f, n)
    return x0 + (0.2 / np.max(np.abs(g.values))) * g


def _source_target_c(x0, ls, n):
    """Target whose coefficients along the training span track the surrogate
    spectrum, confined to the three best-resolved directions."""
    sig = np.array([norm(y, SpaceKind.L2) for y in ls.induced])
    coef = np.zeros(len(ls.basis))
    m = min(3, len(ls.basis))
    coef[:m] = sig[:m] * np.array([1.0, -1.0, 1.0])[:m]
    gp = sum(c * b.values for c, b in zip(coef, ls.basis))
    gp *= 0.08 / np.max(np.abs(gp))
    return GridFunction(n, x0.values + gp)


def _run_reg_rate(cfg: StudyConfig, rows: list):
    n = cfg.n_cells
    deltas = [float(d) for d in cfg.ladder]
    if cfg.problem == "a":
        prob = ProblemKind(ProblemTag.A_EXAMPLE)
        f = GridFunction.constant(1.0, n)
        x0 = GridFunction.constant(1.0, n)
        xt = _source_target_a(prob, x0, f, n)
        h = SurrogateHandle.fem(prob, f, n)
        space, nu, rho, xi, label = SpaceKind.H1, prob.nu, fem_rho(prob, n), cfg.xi, "a"
        max_it = min(cfg.max_iterations, 4000)
    else:
        prob, f, x0, ls, modes = _c_example_setup(cfg)
        xt = _source_target_c(x0, ls, n)
        probes = [x0 + 0.1 * m for m in modes] + [xt]
        coeffs, diag = assemble_neural_surrogate(
            ls, cfg.n_quad, cfg.n_trunk, ActivationKind.LOGISTIC, seed=cfg.seed + 1,
            problem=prob, f=f, probes=probes,
        )
        if cfg.surrogate == "rank":
            h = SurrogateHandle.rank(ls)
        else:
            h = SurrogateHandle.neural(coeffs, ls.center, diag)
        space, nu, rho, xi, label = SpaceKind.L2, prob.nu, diag.rho_bound, cfg.xi, "c"
        max_it = cfg.max_iterations

    y_true = solve_forward_reference(prob, xt, f)

    def one(i_delta):
        i, d = i_delta
        seed = cfg.seed + 100 + i
        yd = add_noise(y_true, d, seed)
        alpha, eta = choose_parameters(d, rho, cfg.constant)
        tik = TikhonovConfig(alpha=alpha, delta=d, eta=eta, xi=xi, x0=x0,
                             space=space, nu=nu, max_iterations=max_it, x_true=xt)
        return solve_inverse_problem(h, yd, tik, x0, seed=seed, problem_label=label)

    runs = []
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as ex:
            for r in ex.map(one, enumerate(deltas)):
                runs.append(r)
                rows.append(r.csv_row())
    else:
        for p in enumerate(deltas):
            r = one(p)
            runs.append(r)
            rows.append(r.csv_row())

    slope, stderr = fit_slope(deltas, [r.error_X for r in runs])
    return RUN_COLUMNS, slope, stderr, ()


def _run_mollify_rate(cfg: StudyConfig, rows: list):
    n = cfg.n_cells
    x = GridFunction.from_callable(lambda s: np.sin(np.pi * s) ** 2, n)
    errs = []
    for xi in cfg.ladder:
        e = norm(mollify(x, float(xi)) - x, SpaceKind.L2)
        rows.append((float(xi), e))
        errs.append(e)
    slope, stderr = fit_slope([float(v) for v in cfg.ladder], errs)
    return ("xi", "error_L2"), slope, stderr, ()


_BODIES = {
    "fem_rate": _run_fem_rate,
    "surrogate_error": _run_surrogate_error,
    "reg_rate": _run_reg_rate,
    "mollify_rate": _run_mollify_rate,
}


def run_study(cfg: StudyConfig) -> RateTable:
    """Execute the configured study; on failure the rows completed so far are
    still written (flagged as aborted) before the error propagates."""
    body = _BODIES[cfg.study]
    rows: list = []
    try:
        columns, slope, stderr, case_slopes = body(cfg, rows)
    except Exception as err:
        if cfg.out:
            table = RateTable(("partial",), tuple(rows), float("nan"),
                              float("nan"), aborted=True)
            _write_table(cfg.out, table, f"aborted: {type(err).__name__}: {err}")
        raise
    table = RateTable(tuple(columns), tuple(rows), slope, stderr, case_slopes)
    if cfg.out:
        _write_table(cfg.out, table)
    return table
