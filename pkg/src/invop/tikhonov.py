"""Tikhonov regularization with certified approximate minimizers.

The functional is ``||F_n[x_xi] - y_delta||^2_L2 + alpha ||x - x0||^2_X``
where ``F_n`` is one of three interchangeable surrogates (direct FEM
solve, rank-N linear expansion, branch/trunk sigmoid operator) and
``x_xi`` is the mollified iterate when a smoothing width is configured.
Minimization is projected gradient descent with a backtracking line
search; the returned certificate bounds the gap to the infimum by
``gradient_norm^2 / (4 alpha)``, which is exact for quadratic models.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateScale,
    DimensionMismatch,
    NonAdmissibleCoefficient,
    Stalled,
)
from .fem import ProblemKind, misfit_gradient_nodal, solve_forward_fem
from .grid import (
    GridFunction,
    SpaceKind,
    gram_apply,
    gram_solve,
    inner,
    norm,
    trapezoid_weights,
)
from .mollify import mollify, mollify_matrix
from .neural import (
    StructuredSurrogateCoeffs,
    eval_structured,
    eval_structured_with_gradient,
)
from .training import LinearSurrogate, SurrogateDiagnostics

ARMIJO = 1e-4
MAX_HALVINGS = 60


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class TikhonovConfig:
    alpha: float
    delta: float
    eta: float
    xi: float
    x0: GridFunction
    space: SpaceKind
    nu: float
    max_iterations: int = 2000
    x_true: Optional[GridFunction] = None  # reporting metadata only

    def __post_init__(self):
        if self.alpha <= 0 or self.eta <= 0:
            raise ValueError("alpha and eta must be positive")
        if self.delta < 0 or self.xi < 0:
            raise ValueError("delta and xi must be nonnegative")
        if self.nu <= 0:
            raise ValueError("admissibility bound nu must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if float(np.min(self.x0.values)) < self.nu:
            raise NonAdmissibleCoefficient("prior center violates the bound nu")


# ---------------------------------------------------------------------------
# surrogate handles


@dataclass(frozen=True)
class SurrogateHandle:
    """One of the interchangeable forward maps used inside the functional.

    ``fem``: the Galerkin solver itself on an n-cell mesh.
    ``rank``: the rank-N linear expansion around its training center.
    ``neural``: the branch/trunk sigmoid realization around the same center.
    """

    kind: str  # "fem" | "rank" | "neural"
    problem: Optional[ProblemKind] = None
    load: Optional[GridFunction] = None
    n: Optional[int] = None
    ls: Optional[LinearSurrogate] = None
    coeffs: Optional[StructuredSurrogateCoeffs] = None
    center: Optional[tuple] = None  # (x_hat0, y_hat0)
    diagnostics: Optional[SurrogateDiagnostics] = None

    @staticmethod
    def fem(problem: ProblemKind, load: GridFunction, n: int) -> "SurrogateHandle":
        return SurrogateHandle("fem", problem=problem, load=load, n=n)

    @staticmethod
    def rank(ls: LinearSurrogate) -> "SurrogateHandle":
        if ls.center is None:
            raise DimensionMismatch("rank surrogate needs the training center")
        return SurrogateHandle("rank", ls=ls, center=ls.center)

    @staticmethod
    def neural(
        coeffs: StructuredSurrogateCoeffs,
        center: tuple,
        diagnostics: Optional[SurrogateDiagnostics] = None,
    ) -> "SurrogateHandle":
        return SurrogateHandle("neural", coeffs=coeffs, center=center,
                               diagnostics=diagnostics)

    @property
    def label(self) -> str:
        return {"fem": "FemForward", "rank": "LinearRankN",
                "neural": "NeuralOperator"}[self.kind]

    @property
    def n_terms(self) -> int:
        if self.kind == "rank":
            return self.ls.n_terms
        if self.kind == "neural":
            return self.coeffs.n_terms
        return 0

    def data_cells(self, x: GridFunction) -> int:
        if self.kind == "fem":
            return self.n
        return self.center[1].n_cells

    def forward(self, x: GridFunction) -> GridFunction:
        """Surrogate data for the (already mollified) input x."""
        if self.kind == "fem":
            return solve_forward_fem(self.problem, x, self.load, self.n)
        if self.kind == "rank":
            x0, y0 = self.center
            out = y0.values.copy()
            xc = x.resample(x0.n_cells) - x0
            for b, y in zip(self.ls.basis, self.ls.induced):
                out += inner(xc, b, self.ls.space) * y.values
            return GridFunction(y0.n_cells, out)
        x0, y0 = self.center
        out = eval_structured(self.coeffs, x.resample(x0.n_cells), y0.nodes)
        return GridFunction(y0.n_cells, y0.values + out)

    def misfit_and_gradient(self, x: GridFunction, y_delta: GridFunction):
        """Data misfit ||forward(x) - y_delta||^2 and its Euclidean nodal
        gradient with respect to the values of x."""
        if self.kind == "fem":
            if x.n_cells != self.n:
                raise DimensionMismatch("FEM surrogate expects inputs on its mesh")
            y = self.forward(x)
            r = y - y_delta.resample(self.n)
            value = inner(r, r, SpaceKind.L2)
            grad = 2.0 * misfit_gradient_nodal(self.problem, x, r, self.load, self.n)
            return value, grad
        if self.kind == "rank":
            x0, y0 = self.center
            xc = x.resample(x0.n_cells) - x0
            r = self.forward(x) - y_delta.resample(y0.n_cells)
            value = inner(r, r, SpaceKind.L2)
            grad = np.zeros(x.n_cells + 1)
            for b, y in zip(self.ls.basis, self.ls.induced):
                coeff = 2.0 * inner(r, y, SpaceKind.L2)
                grad += coeff * gram_apply(b.values, b.n_cells, self.ls.space)
            return value, grad
        x0, y0 = self.center
        out, jac = eval_structured_with_gradient(
            self.coeffs, x.resample(x0.n_cells), y0.nodes
        )
        rv = y0.values + out - y_delta.resample(y0.n_cells).values
        w = trapezoid_weights(y0.n_cells)
        value = float(np.dot(w * rv, rv))
        grad = 2.0 * (jac.T @ (w * rv))
        return value, grad


# ---------------------------------------------------------------------------
# functional pieces


def add_noise(y: GridFunction, delta: float, seed: int) -> GridFunction:
    """Additive nodal noise scaled to hit the discrete L2 level exactly."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0.0:
        return y
    rng = np.random.default_rng(seed)
    e = GridFunction(y.n_cells, rng.standard_normal(y.n_cells + 1))
    return y + (delta / norm(e, SpaceKind.L2)) * e


def choose_parameters(delta: float, rho_n: float, constant: float = 1.0):
    """A-priori rule: alpha proportional to max(noise, surrogate error),
    tolerance eta = alpha^2."""
    if delta < 0 or rho_n < 0:
        raise ValueError("levels must be nonnegative")
    if constant <= 0:
        raise ValueError("constant must be positive")
    scale = max(delta, rho_n)
    if scale <= 0:
        raise DegenerateScale("both noise level and surrogate error are zero")
    alpha = constant * scale
    return alpha, alpha * alpha


def _smoothed(x: GridFunction, cfg: TikhonovConfig) -> GridFunction:
    return mollify(x, cfg.xi) if cfg.xi > 0 else x


def tikhonov_value(
    h: SurrogateHandle, x: GridFunction, y_delta: GridFunction, cfg: TikhonovConfig
) -> float:
    if float(np.min(x.values)) < cfg.nu - 1e-12:
        raise NonAdmissibleCoefficient("evaluation point violates the bound nu")
    v = _smoothed(x, cfg)
    r = h.forward(v) - y_delta.resample(h.data_cells(x))
    d = x - cfg.x0.resample(x.n_cells)
    return inner(r, r, SpaceKind.L2) + cfg.alpha * inner(d, d, cfg.space)


def tikhonov_value_and_gradient(
    h: SurrogateHandle, x: GridFunction, y_delta: GridFunction, cfg: TikhonovConfig
):
    """Functional value and its gradient in the configured solution space."""
    v = _smoothed(x, cfg)
    misfit, gz = h.misfit_and_gradient(v, y_delta)
    if cfg.xi > 0:
        gz = mollify_matrix(x.n_cells, cfg.xi).T @ gz
    d = x - cfg.x0.resample(x.n_cells)
    value = misfit + cfg.alpha * inner(d, d, cfg.space)
    grad = gram_solve(gz, x.n_cells, cfg.space) + 2.0 * cfg.alpha * d.values
    return value, GridFunction(x.n_cells, grad)


# ---------------------------------------------------------------------------
# minimization


@dataclass(frozen=True)
class Certificate:
    gradient_norm: float
    eta_bound: float
    iterations: int
    reference_gap: Optional[float] = None


@dataclass(frozen=True)
class ApproximateMinimizer:
    x: GridFunction
    functional_value: float
    certificate: Certificate
    config: TikhonovConfig


def _project(x: GridFunction, nu: float) -> GridFunction:
    return GridFunction(x.n_cells, np.maximum(x.values, nu))


def minimize_tikhonov(
    h: SurrogateHandle,
    y_delta: GridFunction,
    cfg: TikhonovConfig,
    x_init: GridFunction,
) -> ApproximateMinimizer:
    """Projected gradient descent with backtracking (halving) line search.

    Terminates when the certificate gradient_norm^2/(4 alpha) drops below
    eta or the iteration budget is exhausted; in the latter case the best
    iterate found is returned with its certificate.  Accepted steps never
    increase the functional.
    """
    if float(np.min(x_init.values)) < cfg.nu - 1e-12:
        raise NonAdmissibleCoefficient("initial guess violates the bound nu")
    x = _project(x_init, cfg.nu)
    value, grad = tikhonov_value_and_gradient(h, x, y_delta, cfg)
    gnorm = norm(grad, cfg.space)
    best = (x, value, gnorm, 0)
    step = 1.0

    for it in range(1, cfg.max_iterations + 1):
        if gnorm * gnorm / (4.0 * cfg.alpha) <= cfg.eta:
            return _finish(best[0], best[1], best[2], it - 1, cfg)

        accepted = False
        s = step
        for _ in range(MAX_HALVINGS):
            cand = _project(
                GridFunction(x.n_cells, x.values - s * grad.values), cfg.nu
            )
            move = x - cand
            decrease = inner(grad, move, cfg.space)
            cand_value, cand_grad = tikhonov_value_and_gradient(
                h, cand, y_delta, cfg
            )
            if cand_value <= value - ARMIJO * decrease and cand_value <= value:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            raise Stalled(
                f"line search failed {MAX_HALVINGS} halvings at iteration {it}"
            )
        x, value, grad = cand, cand_value, cand_grad
        gnorm = norm(grad, cfg.space)
        step = s * 2.0
        if value < best[1]:
            best = (x, value, gnorm, it)

    return _finish(best[0], best[1], best[2], cfg.max_iterations, cfg)


def _finish(x, value, gnorm, iterations, cfg) -> ApproximateMinimizer:
    cert = Certificate(
        gradient_norm=gnorm,
        eta_bound=gnorm * gnorm / (4.0 * cfg.alpha),
        iterations=iterations,
    )
    return ApproximateMinimizer(x, value, cert, cfg)


# ---------------------------------------------------------------------------
# orchestration


RUN_COLUMNS = (
    "problem",
    "surrogate",
    "n",
    "N",
    "delta",
    "alpha",
    "eta",
    "xi",
    "iterations",
    "gradient_norm",
    "error_X",
    "runtime_ms",
    "seed",
)


@dataclass(frozen=True)
class RegularizationRun:
    problem: str
    surrogate: str
    n: int
    N: int
    delta: float
    alpha: float
    eta: float
    xi: float
    iterations: int
    gradient_norm: float
    error_X: float
    runtime_ms: float
    seed: int
    minimizer: Optional[ApproximateMinimizer] = field(
        default=None, repr=False, compare=False
    )

    def csv_row(self) -> str:
        cells = []
        for name in RUN_COLUMNS:
            v = getattr(self, name)
            cells.append(f"{v:.17g}" if isinstance(v, float) else str(v))
        return ",".join(cells)


def solve_inverse_problem(
    h: SurrogateHandle,
    y_delta: GridFunction,
    cfg: TikhonovConfig,
    x_init: GridFunction,
    seed: int = 0,
    problem_label: str = "",
) -> RegularizationRun:
    start = time.perf_counter()
    result = minimize_tikhonov(h, y_delta, cfg, x_init)
    runtime_ms = (time.perf_counter() - start) * 1e3
    if cfg.x_true is not None:
        err = norm(result.x - cfg.x_true.resample(result.x.n_cells), cfg.space)
    else:
        err = float("nan")
    return RegularizationRun(
        problem=problem_label,
        surrogate=h.label,
        n=x_init.n_cells,
        N=h.n_terms,
        delta=cfg.delta,
        alpha=cfg.alpha,
        eta=cfg.eta,
        xi=cfg.xi,
        iterations=result.certificate.iterations,
        gradient_norm=result.certificate.gradient_norm,
        error_X=err,
        runtime_ms=runtime_ms,
        seed=seed,
        minimizer=result,
    )
