"""Surrogate construction from supervised training pairs.

Pipeline: generate admissible coefficient perturbations around a center,
solve the forward problem for each, center the pairs, orthonormalize the
centered images in the problem's inner product, and expose the rank-N
linear surrogate together with its branch/trunk sigmoid realization and
measured error diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DependentImages,
    DimensionMismatch,
    EmptyProbeSet,
    IllConditionedFit,
    NonAdmissiblePerturbation,
    RangeViolation,
)
from .fem import ProblemKind, solve_forward_reference
from .grid import GridFunction, SpaceKind, gram_apply, inner, norm, trapezoid_weights
from .neural import (
    ActivationKind,
    BranchCoeffs,
    StructuredSurrogateCoeffs,
    TrunkCoeffs,
    activation,
    activation_derivative,
    activation_inverse,
    eval_branch,
    eval_trunk,
)

#: argument scale of the near-linear sigmoid nodes that realize linear
#: functionals of the input samples; their cubic error is O(eps^2) relative
LINEAR_NODE_EPS = 1e-3

GRAM_DET_TOL = 1e-12
DEPENDENT_TOL = 1e-10
TRUNK_COND_LIMIT = 1e12
TRUNK_WEIGHT_SPAN = 20.0
TRUNK_CONSTANT_BIAS = 40.0


# ---------------------------------------------------------------------------
# training sets


@dataclass(frozen=True)
class PerturbationSpec:
    mode: str  # "sine" or "bumps"
    amplitude: float
    count: int
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("sine", "bumps"):
            raise ValueError(f"unknown perturbation mode {self.mode!r}")
        if self.count < 1:
            raise ValueError("need at least one perturbation")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")


def perturbation_shape(spec: PerturbationSpec, index: int, n_cells: int) -> GridFunction:
    """The index-th unit-scale perturbation direction (1-based)."""
    s = np.linspace(0.0, 1.0, n_cells + 1)
    if spec.mode == "sine":
        # sqrt(2) gives each mode unit L2 norm
        vals = np.sqrt(2.0) * np.sin(index * np.pi * s)
    else:
        width = 1.5 / (spec.count + 1)
        center = index / (spec.count + 1)
        u = np.clip(1.0 - ((s - center) / width) ** 2, 0.0, None)
        vals = u**3
    return GridFunction(n_cells, vals)


@dataclass(frozen=True)
class TrainingSet:
    pairs: tuple  # (x_hat, y_hat); index 0 is the center pair
    problem: ProblemKind
    space: SpaceKind
    seed: int
    perturbation: Optional[PerturbationSpec] = None
    load: Optional[GridFunction] = None

    @property
    def n_train(self) -> int:
        return len(self.pairs) - 1


@dataclass(frozen=True)
class CenteredTrainingSet:
    pairs: tuple  # (x_ell, y_ell), ell = 1..N, center subtracted nodally
    center: tuple  # (x_hat0, y_hat0)
    problem: ProblemKind
    space: SpaceKind


def generate_training_set(
    problem: ProblemKind,
    f: GridFunction,
    center_x: GridFunction,
    perturbation: PerturbationSpec,
    space: Optional[SpaceKind] = None,
) -> TrainingSet:
    space = problem.image_space if space is None else space
    n_cells = center_x.n_cells
    shapes = [
        perturbation_shape(perturbation, ell, n_cells)
        for ell in range(1, perturbation.count + 1)
    ]
    margin = float(np.min(center_x.values)) - problem.fem_lower_bound()
    reach = perturbation.amplitude * max(float(np.max(np.abs(s.values))) for s in shapes)
    if reach > margin:
        raise NonAdmissiblePerturbation(
            f"amplitude reach {reach:.4g} exceeds admissibility margin {margin:.4g}"
        )
    xs = [center_x] + [center_x + perturbation.amplitude * s for s in shapes]
    pairs = tuple((x, solve_forward_reference(problem, x, f)) for x in xs)

    unit = [p[0] - pairs[0][0] for p in pairs[1:]]
    unit = [u * (1.0 / norm(u, space)) for u in unit]
    gram = np.array([[inner(u, v, space) for v in unit] for u in unit])
    if np.linalg.det(gram) <= GRAM_DET_TOL:
        raise DependentImages("centered training inputs are numerically dependent")

    return TrainingSet(pairs, problem, space, perturbation.seed, perturbation, f)


def center_training_set(ts: TrainingSet) -> CenteredTrainingSet:
    if ts.n_train < 1:
        raise DimensionMismatch("training set needs at least one non-center pair")
    x0, y0 = ts.pairs[0]
    pairs = tuple((x - x0, y - y0) for x, y in ts.pairs[1:])
    return CenteredTrainingSet(pairs, ts.pairs[0], ts.problem, ts.space)


# ---------------------------------------------------------------------------
# orthonormalization and the rank-N linear surrogate


def gram_schmidt(images, space: SpaceKind):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Returns (basis, transform) with transform lower-triangular, positive
    diagonal, and basis[j] = sum_i transform[j, i] * images[i].
    """
    images = list(images)
    n = len(images)
    basis = []
    transform = np.zeros((n, n))
    for j, img in enumerate(images):
        v = img.values.copy()
        row = np.zeros(n)
        row[j] = 1.0
        for _ in range(2):  # MGS sweep plus one reorthogonalization
            for i, b in enumerate(basis):
                c = inner(GridFunction(img.n_cells, v), b, space)
                v -= c * b.values
                row -= c * transform[i]
        nv = norm(GridFunction(img.n_cells, v), space)
        if nv < DEPENDENT_TOL * norm(img, space):
            raise DependentImages(f"input {j} is dependent on its predecessors")
        basis.append(GridFunction(img.n_cells, v / nv))
        transform[j] = row / nv
    return basis, transform


@dataclass(frozen=True)
class LinearSurrogate:
    basis: tuple  # orthonormal input directions
    induced: tuple  # data functions under the same change of basis
    transform: np.ndarray
    space: SpaceKind
    center: Optional[tuple] = None  # (x_hat0, y_hat0) when built from pairs

    @property
    def n_terms(self) -> int:
        return len(self.basis)


def build_linear_surrogate(
    c: CenteredTrainingSet, space: Optional[SpaceKind] = None
) -> LinearSurrogate:
    space = c.space if space is None else space
    basis, transform = gram_schmidt([p[0] for p in c.pairs], space)
    ys = [p[1] for p in c.pairs]
    induced = []
    for j in range(len(basis)):
        acc = np.zeros_like(ys[0].values)
        for i in range(j + 1):
            acc += transform[j, i] * ys[i].values
        induced.append(GridFunction(ys[0].n_cells, acc))
    return LinearSurrogate(tuple(basis), tuple(induced), transform, space, c.center)


def apply_linear_surrogate(ls: LinearSurrogate, x: GridFunction) -> GridFunction:
    x = x.resample(ls.basis[0].n_cells)
    out = np.zeros_like(ls.induced[0].values)
    for b, y in zip(ls.basis, ls.induced):
        out += inner(x, b, ls.space) * y.values
    return GridFunction(ls.induced[0].n_cells, out)


# ---------------------------------------------------------------------------
# branch construction


@dataclass(frozen=True)
class RescalePrior:
    """Affine map u -> margin + (1 - 2 margin)(u - lo)/(hi - lo) taking the
    value range of the input family into (0, 1), plus the center function
    the prior is anchored at."""

    lo: float
    hi: float
    anchor: GridFunction
    margin: float = 0.05

    def __post_init__(self):
        if not self.hi > self.lo:
            raise RangeViolation("rescale interval is empty")
        if not 0.0 < self.margin < 0.5:
            raise RangeViolation("margin must lie in (0, 0.5)")

    @property
    def scale(self) -> float:
        return (1.0 - 2.0 * self.margin) / (self.hi - self.lo)

    @property
    def offset(self) -> float:
        return self.margin - self.scale * self.lo


def quadrature_nodes(n_k: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_k + 1)


def quadrature_weights(n_k: int) -> np.ndarray:
    """Trapezoid weights: 1/(2 N_k) at the endpoints, 1/N_k inside."""
    w = np.full(n_k + 1, 1.0 / n_k)
    w[0] = w[-1] = 0.5 / n_k
    return w


def _build_branch(
    n_k: int,
    kind: ActivationKind,
    rescale: RescalePrior,
    v: np.ndarray,
    target_slopes: np.ndarray,
    anchor_value: float,
    use_products: bool,
) -> BranchCoeffs:
    """Sigmoid functional of the samples x(t_k) with prescribed behavior.

    The branch realizes sum_k target_slopes_k x(t_k) + const with the
    constant fixed so the output at the anchor equals anchor_value to
    rounding.  With ``use_products`` the quadrature-weighted product nodes
    of the anchored prior carry the trapezoid part of the functional and
    near-linear nodes supply the affine-rescale remainder; without, the
    near-linear nodes carry the whole functional.
    """
    t = quadrature_nodes(n_k)
    cq = quadrature_weights(n_k)
    a, b, m = rescale.scale, rescale.offset, rescale.margin
    anchor_vals = rescale.anchor.sample(t)
    u_ref = a * anchor_vals + b
    if np.any(u_ref < m - 1e-12) or np.any(u_ref > 1.0 - m + 1e-12):
        raise RangeViolation("anchor leaves the rescale window")

    rows_c, rows_w, rows_theta = [], [], []
    lo2, hi2 = float(np.min(v)), float(np.max(v))
    degenerate = hi2 - lo2 < 1e-12

    if use_products and not degenerate:
        a2 = (1.0 - 2.0 * m) / (hi2 - lo2)
        b2 = m - a2 * lo2
        v_r = a2 * v + b2
        products = u_ref * v_r
        if np.any(products <= 0.0) or np.any(products >= 1.0):
            raise RangeViolation("rescaled products leave (0, 1)")
        g = activation_inverse(kind, products)
        w_min = g * u_ref / (u_ref**2 + 1.0)
        theta_min = g / (u_ref**2 + 1.0)
        w_prod = np.zeros((n_k + 1, n_k + 1))
        # the input rescale is folded into the stored weights, so the node
        # argument is w_min * psi(x_k) + theta_min for raw samples x_k
        np.fill_diagonal(w_prod, w_min * a)
        rows_c.append(cq / (a * a2))
        rows_w.append(w_prod)
        rows_theta.append(theta_min + w_min * b)
        # the product block represents trap(x v) + (b2/a2) trap(x) + const;
        # leave the difference from the target to the near-linear nodes
        lin_slopes = target_slopes - cq * v - (b2 / a2) * cq
    else:
        lin_slopes = target_slopes

    eps = LINEAR_NODE_EPS
    d0 = activation_derivative(kind, 0.0)
    w_lin = np.zeros((n_k + 1, n_k + 1))
    np.fill_diagonal(w_lin, eps)
    rows_c.append(lin_slopes / (d0 * eps))
    rows_w.append(w_lin)
    rows_theta.append(-eps * anchor_vals)

    partial = BranchCoeffs(
        np.concatenate(rows_c), np.vstack(rows_w), np.concatenate(rows_theta)
    )
    at_anchor = eval_branch(partial, kind, anchor_vals)
    c0 = (anchor_value - at_anchor) / activation(kind, 0.0)
    return BranchCoeffs(
        np.concatenate([partial.c, [c0]]),
        np.vstack([partial.w, np.zeros(n_k + 1)]),
        np.concatenate([partial.theta, [0.0]]),
    )


def build_branch_prior(
    x_underline: GridFunction,
    n_k: int,
    activation_kind: ActivationKind,
    rescale: RescalePrior,
) -> BranchCoeffs:
    """Anchored quadrature prior for the functional x -> trapezoid of x * basis.

    Product nodes carry the trapezoid weights and the minimum-Euclidean-norm
    anchored weights of the closed-form sigmoid relation; near-linear
    companion nodes and one constant node unfold the affine rescale, which
    keeps the construction defined for sign-changing basis functions and
    exact at the anchor.
    """
    t = quadrature_nodes(n_k)
    cq = quadrature_weights(n_k)
    v = x_underline.sample(t)
    anchor_vals = rescale.anchor.sample(t)
    return _build_branch(
        n_k,
        activation_kind,
        rescale,
        v,
        cq * v,
        float(np.dot(cq * v, anchor_vals)),
        use_products=True,
    )


def build_branch_linearized(
    x_underline: GridFunction,
    n_k: int,
    activation_kind: ActivationKind,
    rescale: RescalePrior,
    space: SpaceKind,
) -> BranchCoeffs:
    """Near-linear branch for the centered functional <x - anchor, basis>.

    The functional weights come from the discrete inner product of the
    chosen space on the N_k-node submesh, so both the L2 and the H1 pairing
    are realized; the remaining error is the O(N_k^-2) quadrature error of
    the coarse mesh plus the O(eps^2) sigmoid linearization error.
    """
    g = gram_apply(x_underline.resample(n_k).values, n_k, space)
    return _build_branch(
        n_k, activation_kind, rescale, x_underline.sample(quadrature_nodes(n_k)),
        g, 0.0, use_products=False,
    )


# ---------------------------------------------------------------------------
# trunk fit


def fit_trunk(
    y_underline: GridFunction, n_j: int, activation_kind: ActivationKind, seed: int
):
    """One-shot least-squares fit of a sigmoid expansion to a data function.

    Node 0 is a saturated constant; the rest have random weights and
    uniformly random transition locations.  Returns (coefficients, discrete
    L2 residual).
    """
    if n_j < 1:
        raise DimensionMismatch("trunk needs at least one node")
    t = y_underline.nodes
    sw = np.sqrt(trapezoid_weights(y_underline.n_cells))

    for attempt_seed in (seed, seed + 7919):
        rng = np.random.default_rng(attempt_seed)
        w = np.zeros(n_j)
        zeta = np.zeros(n_j)
        zeta[0] = TRUNK_CONSTANT_BIAS
        if n_j > 1:
            w[1:] = rng.uniform(-TRUNK_WEIGHT_SPAN, TRUNK_WEIGHT_SPAN, n_j - 1)
            zeta[1:] = -w[1:] * rng.uniform(0.0, 1.0, n_j - 1)
        features = activation(activation_kind, np.outer(t, w) + zeta)
        weighted = features * sw[:, None]
        if np.linalg.cond(weighted) <= TRUNK_COND_LIMIT:
            c, *_ = np.linalg.lstsq(weighted, sw * y_underline.values, rcond=None)
            trunk = TrunkCoeffs(c, w, zeta)
            fit = eval_trunk(trunk, activation_kind, t)
            residual = float(np.sqrt(np.sum((sw * (fit - y_underline.values)) ** 2)))
            return trunk, residual
    raise IllConditionedFit(
        f"trunk feature matrix is numerically singular for sizes n_j={n_j}"
    )


# ---------------------------------------------------------------------------
# assembly and diagnostics


@dataclass(frozen=True)
class SurrogateDiagnostics:
    nu_N: float  # off-span forward error per unit input deviation
    q_N: float  # worst measured branch functional error
    r_N: float  # worst trunk fit residual
    rho_bound: float  # nu_N + n_terms * q_N * r_N
    n_terms: int


def estimate_nu_N(ls: LinearSurrogate, problem: ProblemKind, f: GridFunction, probes) -> float:
    """Largest ratio of the out-of-span data deviation to the input deviation.

    For each probe x the forward data F[x] - F[x_center] is computed by the
    reference solver and projected off the span of the induced data
    functions; the ratio to ||x - x_center|| in the surrogate space is
    maximized over the probe set.
    """
    probes = list(probes)
    if not probes:
        raise EmptyProbeSet("need at least one probe")
    if ls.center is None:
        raise DimensionMismatch("surrogate does not carry a center pair")
    x0, y0 = ls.center
    n_cells = y0.n_cells
    sw = np.sqrt(trapezoid_weights(n_cells))
    span = np.column_stack([y.values * sw for y in ls.induced])
    q, _ = np.linalg.qr(span)

    worst = 0.0
    for x in probes:
        x = x.resample(x0.n_cells)
        dx = norm(x - x0, ls.space)
        if dx < 1e-14:
            continue
        y = solve_forward_reference(problem, x, f).resample(n_cells)
        d = (y.values - y0.values) * sw
        resid = d - q @ (q.T @ d)
        worst = max(worst, float(np.linalg.norm(resid)) / dx)
    return worst


def _default_rescale(ls: LinearSurrogate) -> RescalePrior:
    """Rescale window covering the center plus/minus the training deviations."""
    x0 = ls.center[0]
    inv = solve_triangular(ls.transform, np.eye(ls.n_terms), lower=True)
    lo, hi = float(np.min(x0.values)), float(np.max(x0.values))
    for j in range(ls.n_terms):
        orig = np.zeros_like(x0.values)
        for i in range(j + 1):
            orig += inv[j, i] * ls.basis[i].values
        lo = min(lo, float(np.min(x0.values - np.abs(orig))))
        hi = max(hi, float(np.max(x0.values + np.abs(orig))))
    return RescalePrior(lo, hi, x0)


def _default_probes(ls: LinearSurrogate):
    """Center plus each original training deviation and one mixed combination."""
    x0 = ls.center[0]
    inv = solve_triangular(ls.transform, np.eye(ls.n_terms), lower=True)
    probes = []
    mix = np.zeros_like(x0.values)
    for j in range(ls.n_terms):
        orig = np.zeros_like(x0.values)
        for i in range(j + 1):
            orig += inv[j, i] * ls.basis[i].values
        probes.append(GridFunction(x0.n_cells, x0.values + orig))
        mix += (0.6 if j % 2 == 0 else -0.6) * orig
    probes.append(GridFunction(x0.n_cells, x0.values + mix))
    return probes


def assemble_neural_surrogate(
    ls: LinearSurrogate,
    n_k: int,
    n_j: int,
    activation_kind: ActivationKind = ActivationKind.LOGISTIC,
    seed: int = 0,
    rescale: Optional[RescalePrior] = None,
    branch_mode: str = "linearized",
    problem: Optional[ProblemKind] = None,
    f: Optional[GridFunction] = None,
    probes=None,
):
    """Branch/trunk realization of the rank-N surrogate with diagnostics.

    Each term pairs a branch for the coefficient functional
    <x - center, basis_ell> with a trunk fitted to the induced data
    function.  ``branch_mode`` selects the anchored quadrature prior
    ("anchored", first-order accurate near the anchor) or the near-linear
    realization ("linearized", accurate to quadrature error everywhere).
    Returns (coefficients, diagnostics).
    """
    if branch_mode not in ("anchored", "linearized"):
        raise ValueError(f"unknown branch mode {branch_mode!r}")
    if ls.center is None:
        raise DimensionMismatch("surrogate does not carry a center pair")
    if rescale is None:
        rescale = _default_rescale(ls)
    x0 = ls.center[0]
    t = quadrature_nodes(n_k)
    cq = quadrature_weights(n_k)

    branches, trunks, residuals = [], [], []
    for ell, (xb, yb) in enumerate(zip(ls.basis, ls.induced)):
        g = gram_apply(xb.resample(n_k).values, n_k, ls.space)
        if branch_mode == "anchored":
            branch = _build_branch(
                n_k, activation_kind, rescale, xb.sample(t), g, 0.0,
                use_products=True,
            )
        else:
            branch = _build_branch(
                n_k, activation_kind, rescale, xb.sample(t), g, 0.0,
                use_products=False,
            )
        trunk, res = fit_trunk(yb, n_j, activation_kind, seed + 7 * ell)
        branches.append(branch)
        trunks.append(trunk)
        residuals.append(res)

    coeffs = StructuredSurrogateCoeffs(
        tuple(branches), tuple(trunks), tuple(t for _ in branches), activation_kind
    )

    q_probes = list(probes) if probes is not None else _default_probes(ls)
    q_n = 0.0
    for x in q_probes:
        x = x.resample(x0.n_cells)
        xs = x.sample(t)
        for branch, xb in zip(branches, ls.basis):
            exact = inner(x - x0, xb, ls.space)
            q_n = max(q_n, abs(eval_branch(branch, activation_kind, xs) - exact))

    r_n = max(residuals)
    if problem is not None and f is not None and probes is not None:
        nu_n = estimate_nu_N(ls, problem, f, probes)
    else:
        nu_n = 0.0
    diag = SurrogateDiagnostics(
        nu_N=nu_n,
        q_N=q_n,
        r_N=r_n,
        rho_bound=nu_n + ls.n_terms * q_n * r_n,
        n_terms=ls.n_terms,
    )
    return coeffs, diag
