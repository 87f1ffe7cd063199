"""Problem data and the quantities evaluated on it.

A problem is  min_x  f(x) = <c, x> + 1/2 <x, Q x>  subject to m inequality
constraints g_j(x) <= 0, each affine (<a_j, x> - b_j) or convex quadratic
(<c_j, x> + 1/2 <x, Q_j x> - b_j).  The primal-dual pair z = (x, y) lives in
R^n x R^m; dual feasibility y >= 0 is a precondition of specific operations,
not of the point type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import RangeViolationError, solve_spd

__all__ = [
    "ProblemError",
    "AffineConstraint",
    "QuadraticConstraint",
    "ProblemSpec",
    "PrimalDualPoint",
    "SubdiffDistance",
    "eval_G",
    "jacobian_G",
    "f_value",
    "grad_f",
    "dual_value",
    "kkt_residual",
    "saddle_dist",
    "lagrangian_grads",
]

# Smallest eigenvalue allowed by the positive-semidefiniteness check.
# Objectives built from exact rank-deficient data carry an exact zero
# eigenvalue, so the tolerance sits just below zero.
PSD_TOL = -1e-10


class ProblemError(ValueError):
    """Invalid problem data or a violated operation precondition."""


def _lock(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AffineConstraint:
    """g(x) = <a, x> - b <= 0."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _lock(self.a))
        object.__setattr__(self, "b", float(self.b))
        assert self.a.ndim == 1


@dataclass(frozen=True)
class QuadraticConstraint:
    """g(x) = <c, x> + 1/2 <x, Q x> - b <= 0 with Q symmetric PSD."""

    c: np.ndarray
    Q: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "c", _lock(self.c))
        object.__setattr__(self, "Q", _lock(self.Q))
        object.__setattr__(self, "b", float(self.b))
        assert self.c.ndim == 1 and self.Q.shape == (self.c.size, self.c.size)


def _check_psd(M, what):
    if not np.array_equal(M, M.T):
        raise ProblemError(f"{what} must be stored symmetrically")
    smallest = float(np.linalg.eigvalsh(M)[0])
    if smallest < PSD_TOL:
        raise ProblemError(
            f"{what} is not positive semidefinite: smallest eigenvalue {smallest:.6e}"
        )


@dataclass(frozen=True)
class ProblemSpec:
    """Objective and constraint data; the single source of f, g_j, G, J_G.

    The class tag is derived: QCQP if any constraint is quadratic, QP if the
    objective has a nonzero quadratic term, LP otherwise.
    """

    c: np.ndarray
    Q: np.ndarray | None = None
    constraints: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "c", _lock(self.c))
        if self.Q is not None:
            object.__setattr__(self, "Q", _lock(self.Q))
            if self.Q.shape != (self.n, self.n):
                raise ProblemError("objective Q has wrong shape")
            _check_psd(self.Q, "objective Q")
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise ProblemError("at least one constraint is required")
        for j, con in enumerate(self.constraints):
            dim = con.a.size if isinstance(con, AffineConstraint) else con.c.size
            if dim != self.n:
                raise ProblemError(f"constraint {j + 1} has dimension {dim}, expected {self.n}")
            if isinstance(con, QuadraticConstraint):
                _check_psd(con.Q, f"constraint {j + 1} Q")

    @property
    def n(self):
        return self.c.size

    @property
    def m(self):
        return len(self.constraints)

    @property
    def problem_class(self):
        if any(isinstance(c, QuadraticConstraint) for c in self.constraints):
            return "QCQP"
        if self.Q is not None and np.any(self.Q):
            return "QP"
        return "LP"

    def affine_matrix(self):
        """Rows a_j and offsets b_j of an all-affine problem, as (A, b)."""
        if self.problem_class == "QCQP":
            raise ProblemError("problem has quadratic constraints; no affine matrix")
        A = np.vstack([c.a for c in self.constraints])
        b = np.array([c.b for c in self.constraints])
        return A, b

    def linear_parts(self):
        """Matrix whose jth row is the linear part of g_j (a_j or c_j)."""
        return np.vstack(
            [c.a if isinstance(c, AffineConstraint) else c.c for c in self.constraints]
        )


@dataclass(frozen=True)
class PrimalDualPoint:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _lock(self.x))
        object.__setattr__(self, "y", _lock(self.y))
        assert self.x.ndim == 1 and self.y.ndim == 1


@dataclass(frozen=True)
class SubdiffDistance:
    """Distance to zero of the saddle subdifferential, decomposed.

    value is +inf exactly when some y_j < 0 (the dual block is empty there);
    in that case the parts are NaN.  When finite,
    value^2 = stationarity_part^2 + primal_part_active^2 + primal_part_inactive^2.
    """

    value: float
    stationarity_part: float = field(default=math.nan)
    primal_part_active: float = field(default=math.nan)
    primal_part_inactive: float = field(default=math.nan)


def eval_G(p, x):
    """Constraint values G(x), component j equal to g_j(x)."""
    x = np.asarray(x, dtype=float)
    assert x.shape == (p.n,)
    out = np.empty(p.m)
    for j, con in enumerate(p.constraints):
        if isinstance(con, AffineConstraint):
            out[j] = con.a @ x - con.b
        else:
            out[j] = con.c @ x + 0.5 * (x @ (con.Q @ x)) - con.b
    return out


def jacobian_G(p, x):
    """m x n Jacobian of G; row j is a_j, or c_j + Q_j x for quadratic rows."""
    x = np.asarray(x, dtype=float)
    assert x.shape == (p.n,)
    rows = []
    for con in p.constraints:
        if isinstance(con, AffineConstraint):
            rows.append(con.a)
        else:
            rows.append(con.c + con.Q @ x)
    return np.vstack(rows)


def f_value(p, x):
    x = np.asarray(x, dtype=float)
    v = float(p.c @ x)
    if p.Q is not None:
        v += 0.5 * float(x @ (p.Q @ x))
    return v


def grad_f(p, x):
    x = np.asarray(x, dtype=float)
    g = p.c.copy()
    if p.Q is not None:
        g = g + p.Q @ x
    return g


def dual_value(p, y, tol=1e-9):
    """Dual function h(y) = min_x f(x) + <y, G(x)>, or -inf when unbounded.

    The inner problem is convex for y >= 0 with Hessian H(y) = Q + sum y_j Q_j
    and gradient-at-zero r(y) = c + sum y_j (linear part of g_j).  When r(y)
    lies in range(H(y)) up to tol (decided by conjugate-gradient residual
    stagnation above tol * ||r||), the exact minimum is returned; otherwise
    the inner objective is unbounded below and the value is -inf.

    Args:
      p: ProblemSpec.
      y: dual vector, y >= 0 required.
      tol: relative range-membership tolerance.

    Returns:
      float value or -inf.
    """
    y = np.asarray(y, dtype=float)
    assert y.shape == (p.m,)
    if np.any(y < 0.0):
        raise ProblemError("dual_value requires y >= 0")

    n = p.n
    H = np.zeros((n, n)) if p.Q is None else p.Q.copy()
    r = p.c.copy()
    const = 0.0
    for j, con in enumerate(p.constraints):
        if isinstance(con, AffineConstraint):
            r = r + y[j] * con.a
        else:
            r = r + y[j] * con.c
            H = H + y[j] * con.Q
        const -= y[j] * con.b

    rnorm = float(np.linalg.norm(r))
    if rnorm == 0.0:
        return const
    if not np.any(H):
        return -math.inf  # linear inner objective with a nonzero slope
    try:
        xhat = solve_spd(H, -r, tol=tol * rnorm / max(1.0, rnorm))
    except RangeViolationError:
        return -math.inf
    return 0.5 * float(r @ xhat) + const


def kkt_residual(p, z, tol=1e-9):
    """KKT residual ||[(f(x) - h(y))_+ ; G(x)_+ ; (-y)_+]||_2.

    Negative dual components are allowed; they enter the third block, and the
    gap block is evaluated at max(y, 0).  When h is -inf there, the gap block
    is replaced by the stationarity surrogate ||grad f(x) + J_G(x)^T max(y, 0)||_2
    so the residual stays finite along early dual-infeasible iterates.
    """
    x, y = np.asarray(z.x, dtype=float), np.asarray(z.y, dtype=float)
    yplus = np.maximum(y, 0.0)
    h = dual_value(p, yplus, tol)
    if math.isfinite(h):
        gap = max(f_value(p, x) - h, 0.0)
    else:
        gap = float(np.linalg.norm(grad_f(p, x) + jacobian_G(p, x).T @ yplus))
    gplus = np.maximum(eval_G(p, x), 0.0)
    yneg = np.maximum(-y, 0.0)
    return float(math.sqrt(gap * gap + float(gplus @ gplus) + float(yneg @ yneg)))


def saddle_dist(p, z):
    """Exact distance to zero of the saddle subdifferential at z = (x, y).

    For y >= 0 the squared distance splits as
      ||grad f(x) + J_G(x)^T y||^2 + ||(G(x)_I)_+||^2 + ||G(x)_{[m] \\ I}||^2
    with I = {j : y_j = 0}, an exact-equality test: the projected dual updates
    of every solver here clamp to literal 0.0, so no tolerance is involved.
    Any y_j < 0 makes the dual block empty and the distance +inf.
    """
    x, y = np.asarray(z.x, dtype=float), np.asarray(z.y, dtype=float)
    if np.any(y < 0.0):
        return SubdiffDistance(value=math.inf)
    G = eval_G(p, x)
    stat = float(np.linalg.norm(grad_f(p, x) + jacobian_G(p, x).T @ y))
    at_zero = y == 0.0
    act = float(np.linalg.norm(np.maximum(G[at_zero], 0.0)))
    inact = float(np.linalg.norm(G[~at_zero]))
    return SubdiffDistance(
        value=math.sqrt(stat * stat + act * act + inact * inact),
        stationarity_part=stat,
        primal_part_active=act,
        primal_part_inactive=inact,
    )


def lagrangian_grads(p, z):
    """Smooth gradient blocks of the Lagrangian: (grad_x L, grad_y L).

    grad_x L = grad f(x) + J_G(x)^T y and grad_y L = G(x); these drive the
    extragradient updates.
    """
    x, y = np.asarray(z.x, dtype=float), np.asarray(z.y, dtype=float)
    gx = grad_f(p, x) + jacobian_G(p, x).T @ y
    gy = eval_G(p, x)
    return gx, gy
