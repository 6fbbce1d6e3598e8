"""Forward operators for the two 1-D elliptic model problems.

Both problems are posed on (0, 1) with homogeneous Dirichlet data and are
discretized with linear splines on a uniform mesh.  Coefficient and load
are interpolated piecewise-linearly before assembly, and all element
integrals are evaluated in closed form, so the tridiagonal systems are
deterministic functions of the nodal inputs.

``DarcyCoefficient`` (diffusion coefficient identification, H1 image
space):    -(x y')' = f
``PotentialCoefficient`` (reaction coefficient identification, L2 image
space):    -y'' + x y = f
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .errors import NonAdmissibleCoefficient, SingularSystem
from .grid import GridFunction, SpaceKind, gram_solve, trapezoid_weights

REFERENCE_CELLS = 4096

SYMMETRY_TOL = 1e-14


class ProblemTag(enum.Enum):
    A_EXAMPLE = "a"  # diffusion coefficient, X = H1
    C_EXAMPLE = "c"  # reaction coefficient, X = L2


@dataclass(frozen=True)
class ProblemKind:
    tag: ProblemTag
    nu: float = 0.1

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("admissibility bound nu must be positive")

    @property
    def image_space(self) -> SpaceKind:
        return SpaceKind.H1 if self.tag is ProblemTag.A_EXAMPLE else SpaceKind.L2

    def fem_lower_bound(self) -> float:
        # The reaction-coefficient FEM solve stays well-posed down to x >= 0;
        # the stricter reference bound nu is reported in diagnostics only.
        return self.nu if self.tag is ProblemTag.A_EXAMPLE else 0.0

    def check_admissible(self, x: GridFunction, strict: bool = False):
        bound = self.nu if strict else self.fem_lower_bound()
        lo = float(np.min(x.values))
        if lo < bound:
            raise NonAdmissibleCoefficient(
                f"min nodal value {lo:.6g} below admissibility bound {bound:.6g}"
            )


def _load_vector(f: np.ndarray, h: float) -> np.ndarray:
    """Exact hat-function integrals of the piecewise-linear load, interior nodes."""
    return h / 6.0 * (f[:-2] + 4.0 * f[1:-1] + f[2:])


def _stiffness_bands(x: np.ndarray, h: float):
    """Tridiagonal bands of the interior stiffness matrix for coefficient x."""
    a = 0.5 * (x[:-1] + x[1:]) / h  # element averages / h
    main = a[:-1] + a[1:]
    off = -a[1:-1]
    return main, off


def _mass_bands(x: np.ndarray, h: float):
    """Coefficient-weighted mass matrix (exact for piecewise-linear x)."""
    main = h / 12.0 * (x[:-2] + 6.0 * x[1:-1] + x[2:])
    off = h / 12.0 * (x[1:-2] + x[2:-1])
    return main, off


def _assemble(kind: ProblemKind, x: np.ndarray, n: int):
    h = 1.0 / n
    if kind.tag is ProblemTag.A_EXAMPLE:
        return _stiffness_bands(x, h)
    k_main, k_off = _stiffness_bands(np.ones(n + 1), h)
    m_main, m_off = _mass_bands(x, h)
    return k_main + m_main, k_off + m_off


def _solve_tridiag_spd(main: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    ab = np.zeros((2, main.size))
    ab[0, 1:] = off
    ab[1, :] = main
    try:
        return solveh_banded(ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"Galerkin system not SPD: {exc}") from exc


def _tridiag_apply(main: np.ndarray, off: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = main * v
    out[:-1] += off * v[1:]
    out[1:] += off * v[:-1]
    return out


def solve_forward_fem(
    kind: ProblemKind, x: GridFunction, f: GridFunction, n: int
) -> GridFunction:
    """Galerkin solution on the n-cell mesh, zero at both endpoints."""
    if n < 2:
        raise ValueError("need at least 2 cells")
    kind.check_admissible(x)
    xv = x.resample(n).values
    fv = f.resample(n).values
    main, off = _assemble(kind, xv, n)
    y = np.zeros(n + 1)
    y[1:-1] = _solve_tridiag_spd(main, off, _load_vector(fv, 1.0 / n))
    return GridFunction(n, y)


def solve_forward_reference(
    kind: ProblemKind, x: GridFunction, f: GridFunction, n_ref: int = REFERENCE_CELLS
) -> GridFunction:
    """High-resolution FEM oracle, resampled back to the mesh of x."""
    y = solve_forward_fem(kind, x, f, n_ref)
    return y.resample(x.n_cells)


def derivative_apply(
    kind: ProblemKind,
    x: GridFunction,
    hdir: GridFunction,
    f: GridFunction,
    n: int,
) -> GridFunction:
    """Directional derivative of the FEM forward map at x in direction hdir."""
    kind.check_admissible(x)
    xv = x.resample(n).values
    hv = hdir.resample(n).values
    y = solve_forward_fem(kind, x, f, n)
    yv = y.values
    h = 1.0 / n
    if kind.tag is ProblemTag.A_EXAMPLE:
        p_main, p_off = _stiffness_bands(hv, h)
    else:
        p_main, p_off = _mass_bands(hv, h)
    rhs = -_tridiag_apply(p_main, p_off, yv[1:-1])
    main, off = _assemble(kind, xv, n)
    u = np.zeros(n + 1)
    u[1:-1] = _solve_tridiag_spd(main, off, rhs)
    return GridFunction(n, u)


def adjoint_apply(
    kind: ProblemKind,
    x: GridFunction,
    r: GridFunction,
    f: GridFunction,
    n: int,
) -> GridFunction:
    """Adjoint of derivative_apply: <F'[x]h, r>_L2 = <h, g>_X for all h.

    The image-space pairing is H1 for the diffusion problem and L2 for the
    reaction problem; the final step applies the corresponding Riesz map.
    """
    z = misfit_gradient_nodal(kind, x, r, f, n)
    g = gram_solve(z, n, kind.image_space)
    return GridFunction(n, g)


def misfit_gradient_nodal(
    kind: ProblemKind,
    x: GridFunction,
    r: GridFunction,
    f: GridFunction,
    n: int,
) -> np.ndarray:
    """Euclidean-gradient form of the adjoint, before the Riesz map.

    Returns z with z_j = <F'[x] e_j, r>_L2 for nodal directions e_j.
    """
    kind.check_admissible(x)
    xv = x.resample(n).values
    rv = r.resample(n).values
    y = solve_forward_fem(kind, x, f, n)
    yv = y.values
    h = 1.0 / n

    w = trapezoid_weights(n)
    main, off = _assemble(kind, xv, n)
    p = np.zeros(n + 1)
    p[1:-1] = _solve_tridiag_spd(main, off, (w * rv)[1:-1])

    z = np.zeros(n + 1)
    if kind.tag is ProblemTag.A_EXAMPLE:
        # d/dh_j of p^T K(h) y with element averages of h
        dp = np.diff(p) / h
        dy = np.diff(yv) / h
        e = 0.5 * dp * dy * h  # per-element sensitivity of the average
        z[:-1] += e
        z[1:] += e
    else:
        # d/dh_j of p^T M(h) y with exact linear-coefficient element integrals
        pa, pb = p[:-1], p[1:]
        ya, yb = yv[:-1], yv[1:]
        cross = (pa * yb + pb * ya) / 12.0
        left = h * (pa * ya / 4.0 + cross + pb * yb / 12.0)
        right = h * (pa * ya / 12.0 + cross + pb * yb / 4.0)
        z[:-1] += left
        z[1:] += right
    return -z
