"""Built-in benchmark instances, random instance generators, file round trip.

The two named instances are constructed symbolically from their defining
parameters (a rotation angle, a normalized cost vector), never from
pasted decimals, so every derived quantity (optimal points, stepsizes)
is reproducible to the last bit from the definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fileio import read_problem, write_problem
from .linalg import op_norm
from .problem import (
    AffineConstraint,
    PrimalDualPoint,
    ProblemSpec,
    QuadraticConstraint,
    kkt_residual,
)
from .solvers import SolverConfig, run, smoothness_bound

__all__ = [
    "InstanceError",
    "SolutionSet",
    "InstanceDescriptor",
    "intro_qp",
    "rotated_house",
    "trivial_lp",
    "BUILTIN_NAMES",
    "builtin",
    "random_lp",
    "random_qp",
    "random_qcqp",
    "load",
    "save",
]

_POST_CHECK_TOL = 1e-6
_POST_CHECK_ITERS = 100_000
_MAX_RESAMPLES = 10


class InstanceError(ValueError):
    """Instance construction or generator failure."""


def _seg_dist(v, lo, hi):
    d = hi - lo
    denom = float(d @ d)
    if denom == 0.0:
        return float(np.linalg.norm(v - lo))
    t = min(1.0, max(0.0, float((v - lo) @ d) / denom))
    return float(np.linalg.norm(v - (lo + t * d)))


@dataclass(frozen=True)
class SolutionSet:
    """Exact solution-set descriptor S* = S*_x x S*_y.

    Each factor is a segment given by its endpoints (equal endpoints for
    a singleton).  This covers every built-in here: a point, a primal
    segment with unique dual, and a unique primal with a dual segment.

    reduced_dist2, when present, measures Euclidean distance to the
    relaxed stationary set in which nonactive constraints are dropped
    (it contains S*, so the reduced distance is never larger).
    corner_witnesses, when present, maps a gap eps > 0 to points near
    the ends of S* whose saddle-distance-to-solution-distance ratio is
    known in closed form; samplers include them so the worst corners are
    never missed.
    """

    x_lo: np.ndarray
    x_hi: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    reduced_dist2: object = None
    corner_witnesses: object = None

    def representative(self):
        return PrimalDualPoint(0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))

    def dist2(self, z):
        """Euclidean distance from z to S*."""
        return math.hypot(
            _seg_dist(z.x, self.x_lo, self.x_hi), _seg_dist(z.y, self.y_lo, self.y_hi)
        )

    def bounding_radius(self):
        """Radius of a ball around representative() containing all of S*."""
        return math.hypot(
            0.5 * float(np.linalg.norm(self.x_hi - self.x_lo)),
            0.5 * float(np.linalg.norm(self.y_hi - self.y_lo)),
        )

    def sample_point(self, rng):
        """A random element of S* (uniform along each segment factor)."""
        tx, ty = rng.uniform(), rng.uniform()
        return PrimalDualPoint(
            self.x_lo + tx * (self.x_hi - self.x_lo),
            self.y_lo + ty * (self.y_hi - self.y_lo),
        )


def _point_set(x, y, **kw):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return SolutionSet(x_lo=x, x_hi=x, y_lo=y, y_hi=y, **kw)


@dataclass(frozen=True)
class InstanceDescriptor:
    name: str
    spec: ProblemSpec
    known_solution: SolutionSet | None
    recommended_config: dict  # algorithm -> SolverConfig
    citations: str = ""
    feasible_point: np.ndarray | None = None  # strictly feasible certificate

    @property
    def applicable_algorithms(self):
        if self.spec.problem_class == "QCQP":
            return ("egm",)
        return ("pdhg", "admm", "egm")


def intro_qp():
    """Two-dimensional QP with a rank-one objective and four constraints,
    one of which is weakly active at the optimum (zero multiplier on a
    tight constraint), making the solution degenerate.

    Data: c = (0, -1), Q = U diag(1, 0) U^T with U the rotation by
    pi/64, A = [[1, 1/k], [-1, 1/k], [0, 1], [-zeta, 1]],
    b = (1, 1, k - dhat, k - dhat (1 - zeta/k)) with zeta = 1/6,
    k = 1/2, dhat = 2^-10.

    The optimum has rows 3 and 4 active with positive multipliers, which
    pins x* = (-2 dhat, k - dhat) exactly; row 2 is tight with a zero
    multiplier; stationarity then fixes the dual solution segment
    (parametrized by the weight on row 2).
    """
    zeta = 1.0 / 6.0
    kappa = 0.5
    dhat = 2.0 ** -10
    theta = math.pi / 64.0
    co, si = math.cos(theta), math.sin(theta)
    u = np.array([co, si])
    Q = np.outer(u, u)
    Q = 0.5 * (Q + Q.T)
    c = np.array([0.0, -1.0])
    A = np.array(
        [
            [1.0, 1.0 / kappa],
            [-1.0, 1.0 / kappa],
            [0.0, 1.0],
            [-zeta, 1.0],
        ]
    )
    b = np.array([1.0, 1.0, kappa - dhat, kappa - dhat * (1.0 - zeta / kappa)])
    spec = ProblemSpec(
        c=c,
        Q=Q,
        constraints=tuple(AffineConstraint(A[j], b[j]) for j in range(4)),
        name="intro-qp",
    )

    # exact solution: rows 3, 4 active => x2 = b3 and -zeta x1 + x2 = b4
    xstar = np.array([(b[2] - b[3]) / zeta, b[2]])
    # stationarity A^T y = -(c + Q x*) restricted to y1 = 0; the dual set
    # is the segment between the y2 = 0 and y4 = 0 basic solutions
    w = -(c + Q @ xstar)
    y_lo = np.array([0.0, 0.0, w[1] + w[0] / zeta, -w[0] / zeta])  # y2 = 0
    y_hi = np.array([0.0, -w[0], w[1] + 2.0 * w[0], 0.0])  # y4 = 0
    assert np.all(y_lo >= 0.0) and np.all(y_hi >= 0.0)
    solution = SolutionSet(x_lo=xstar, x_hi=xstar, y_lo=y_lo, y_hi=y_hi)

    opA = op_norm(A)
    eta_pdhg = 0.99 / opA
    config = {
        "pdhg": SolverConfig("pdhg", stepsize=eta_pdhg),
        "admm": SolverConfig("admm", stepsize=2.0 * eta_pdhg),
        "egm": SolverConfig("egm", stepsize=0.99 / math.sqrt((1.0 + opA) ** 2 + opA**2)),
    }
    return InstanceDescriptor(
        name="intro-qp",
        spec=spec,
        known_solution=solution,
        recommended_config=config,
        citations="small degenerate QP: one tight constraint carries a zero multiplier, "
        "so the run shows a slow entry phase followed by fast local convergence",
        feasible_point=np.zeros(2),
    )


def rotated_house(c1=0.6):
    """Two-variable LP min <c, x> over <c, x> >= ||c||_1, x >= 0 with
    ||c||_2 = 1, written with all constraints as rows of A x <= b,
    A = -[[c1, c2], [1, 0], [0, 1]], b = -(||c||_1, 0, 0).

    The primal solution set is the segment of the supporting line
    clipped to the nonnegative orthant, the dual solution is the unique
    point (1, 0, 0).  Near the segment's interior every constraint-vs-
    distance ratio is exactly 1; near the segment's corners it drops to
    min{c1, c2}, which the corner witnesses exhibit in closed form.
    """
    if not 0.0 < c1 < 1.0:
        raise InstanceError("c1 must lie strictly between 0 and 1")
    c2 = math.sqrt(1.0 - c1 * c1)
    l1 = c1 + c2
    c = np.array([c1, c2])
    A = -np.array([[c1, c2], [1.0, 0.0], [0.0, 1.0]])
    b = -np.array([l1, 0.0, 0.0])
    spec = ProblemSpec(
        c=c,
        Q=None,
        constraints=tuple(AffineConstraint(A[j], b[j]) for j in range(3)),
        name=f"rotated-house(c1={c1:g})",
    )
    x_lo = np.array([l1 / c1, 0.0])
    x_hi = np.array([0.0, l1 / c2])
    ystar = np.array([1.0, 0.0, 0.0])

    def reduced_dist2(z):
        # stationary set with the x >= 0 rows dropped: the whole
        # supporting hyperplane (||c||_2 = 1) times the same dual point
        return math.hypot(abs(float(c @ z.x) - l1), float(np.linalg.norm(z.y - ystar)))

    def corner_witnesses(eps):
        assert eps > 0.0
        return (
            PrimalDualPoint(np.array([0.0, l1 / c2 + eps]), ystar),
            PrimalDualPoint(np.array([l1 / c1 + eps, 0.0]), ystar),
        )

    solution = SolutionSet(
        x_lo=x_lo,
        x_hi=x_hi,
        y_lo=ystar,
        y_hi=ystar,
        reduced_dist2=reduced_dist2,
        corner_witnesses=corner_witnesses,
    )
    config = {a: SolverConfig(a) for a in ("pdhg", "admm", "egm")}
    return InstanceDescriptor(
        name=spec.name,
        spec=spec,
        known_solution=solution,
        recommended_config=config,
        citations="LP whose solution set is a segment; the sharpness constant is 1 "
        "on the identified region but degrades to min{c1, c2} near the corners",
        feasible_point=np.array([2.0, 2.0]),
    )


def trivial_lp():
    """min x subject to -x <= 0; optimum (0, 1)."""
    spec = ProblemSpec(
        c=np.array([1.0]),
        Q=None,
        constraints=(AffineConstraint([-1.0], 0.0),),
        name="trivial-lp",
    )
    solution = _point_set([0.0], [1.0])
    config = {a: SolverConfig(a) for a in ("pdhg", "admm", "egm")}
    return InstanceDescriptor(
        name="trivial-lp",
        spec=spec,
        known_solution=solution,
        recommended_config=config,
        citations="one-variable sanity instance; every update can be followed by hand",
        feasible_point=np.array([1.0]),
    )


BUILTIN_NAMES = ("intro-qp", "rotated-house", "trivial-lp")


def builtin(name, c1=0.6):
    if name == "intro-qp":
        return intro_qp()
    if name == "rotated-house":
        return rotated_house(c1)
    if name == "trivial-lp":
        return trivial_lp()
    raise InstanceError(f"unknown builtin {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


# random generators ---------------------------------------------------------


def _symmetrized_psd(rng, n, rank):
    """Random PSD matrix with exactly `rank` nonzero eigenvalues, stored
    bitwise symmetric."""
    if rank == 0:
        return np.zeros((n, n))
    V = np.linalg.qr(rng.normal(size=(n, n)))[0][:, :rank]
    lam = rng.uniform(0.5, 2.0, size=rank)
    M = (V * lam) @ V.T
    return 0.5 * (M + M.T)


def _affine_rows(rng, n, m, density):
    A = rng.normal(size=(m, n))
    if density < 1.0:
        mask = rng.uniform(size=(m, n)) < density
        for j in range(m):
            if not mask[j].any():
                mask[j, rng.integers(n)] = True  # no all-zero constraint rows
        A = np.where(mask, A, 0.0)
    return A


def _post_check(descriptor):
    for algorithm in descriptor.applicable_algorithms:
        cfg = descriptor.recommended_config[algorithm]
        trace = run(
            descriptor.spec,
            SolverConfig(
                algorithm,
                stepsize=cfg.stepsize,
                max_iters=_POST_CHECK_ITERS,
                kkt_tol=_POST_CHECK_TOL,
            ),
        )
        if trace.status != "converged":
            return False
    return True


def _default_configs(spec):
    config = {"pdhg": SolverConfig("pdhg"), "admm": SolverConfig("admm")}
    if spec.problem_class == "QCQP":
        return {"egm": SolverConfig("egm")}
    # EGM's plain 0.99/||A|| default can exceed its 1/L stability range
    # on QPs, so recommend a stepsize safely inside it
    L = smoothness_bound(spec)
    config["egm"] = SolverConfig("egm", stepsize=0.9 / L)
    return config


def _generate(seed, build, label):
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_RESAMPLES):
        descriptor = build(rng)
        if _post_check(descriptor):
            return descriptor
    raise InstanceError(
        f"{label}(seed={seed}) failed its solvability post-check "
        f"{_MAX_RESAMPLES} times; the generator parameters are bad"
    )


def random_lp(seed, n=6, m=10, density=1.0):
    """Random bounded LP with a strictly feasible point.

    b_j is set to g_j(x0) + margin with margin >= 0.1 so x0 is strictly
    feasible; c = -A^T y0 for a random y0 >= 0, which certifies a finite
    dual value and hence boundedness below.
    """
    assert n >= 1 and m >= 1 and 0.0 < density <= 1.0

    def build(rng):
        A = _affine_rows(rng, n, m, density)
        x0 = rng.normal(size=n)
        margin = 0.1 + rng.uniform(0.0, 0.9, size=m)
        b = A @ x0 + margin
        y0 = rng.uniform(0.1, 1.0, size=m)
        c = -(A.T @ y0)
        spec = ProblemSpec(
            c=c,
            Q=None,
            constraints=tuple(AffineConstraint(A[j], b[j]) for j in range(m)),
            name=f"random-lp(seed={seed},n={n},m={m})",
        )
        assert np.min(b - A @ x0) >= 0.1
        return InstanceDescriptor(
            name=spec.name,
            spec=spec,
            known_solution=None,
            recommended_config=_default_configs(spec),
            citations="synthetic",
            feasible_point=x0,
        )

    return _generate(seed, build, "random_lp")


def random_qp(seed, n=6, m=8, rank=None):
    """Random convex QP; Q has exactly `rank` nonzero eigenvalues
    (default n).  Bounded below because c + A^T y0 lies in range(Q) for
    a random y0 >= 0."""
    assert n >= 1 and m >= 1
    rank = n if rank is None else rank
    assert 1 <= rank <= n

    def build(rng):
        A = _affine_rows(rng, n, m, 1.0)
        Q = _symmetrized_psd(rng, n, rank)
        x0 = rng.normal(size=n)
        margin = 0.1 + rng.uniform(0.0, 0.9, size=m)
        b = A @ x0 + margin
        y0 = rng.uniform(0.1, 1.0, size=m)
        xprime = rng.normal(size=n)
        c = -(Q @ xprime) - A.T @ y0
        spec = ProblemSpec(
            c=c,
            Q=Q,
            constraints=tuple(AffineConstraint(A[j], b[j]) for j in range(m)),
            name=f"random-qp(seed={seed},n={n},m={m},rank={rank})",
        )
        assert np.min(b - A @ x0) >= 0.1
        return InstanceDescriptor(
            name=spec.name,
            spec=spec,
            known_solution=None,
            recommended_config=_default_configs(spec),
            citations="synthetic",
            feasible_point=x0,
        )

    return _generate(seed, build, "random_qp")


def random_qcqp(seed, n=4, m=5):
    """Random convex QCQP, alternating quadratic and affine constraints.

    The strictly feasible x0 fixes every b_j; c is chosen so the inner
    Lagrangian gradient at a random y0 >= 0 lies in range(H(y0)), which
    certifies boundedness below.
    """
    assert n >= 1 and m >= 1

    def build(rng):
        cons_data = []
        for j in range(m):
            if j % 2 == 0:
                Qj = _symmetrized_psd(rng, n, max(1, n - 1))
                cj = rng.normal(size=n)
                cons_data.append(("quad", cj, Qj))
            else:
                cons_data.append(("aff", rng.normal(size=n), None))
        Q = _symmetrized_psd(rng, n, n)
        x0 = rng.normal(size=n) * 0.3
        margin = 0.1 + rng.uniform(0.0, 0.9, size=m)
        y0 = rng.uniform(0.1, 1.0, size=m)

        H = Q.copy()
        lin_term = np.zeros(n)
        cons = []
        for j, (kind, cj, Qj) in enumerate(cons_data):
            if kind == "quad":
                gtilde = float(cj @ x0) + 0.5 * float(x0 @ Qj @ x0)
                cons.append(QuadraticConstraint(cj, Qj, gtilde + margin[j]))
                H = H + y0[j] * Qj
                lin_term = lin_term + y0[j] * cj
            else:
                cons.append(AffineConstraint(cj, float(cj @ x0) + margin[j]))
                lin_term = lin_term + y0[j] * cj
        xprime = rng.normal(size=n)
        c = -(H @ xprime) - lin_term
        spec = ProblemSpec(
            c=c,
            Q=Q,
            constraints=tuple(cons),
            name=f"random-qcqp(seed={seed},n={n},m={m})",
        )
        return InstanceDescriptor(
            name=spec.name,
            spec=spec,
            known_solution=None,
            recommended_config=_default_configs(spec),
            citations="synthetic",
            feasible_point=x0,
        )

    return _generate(seed, build, "random_qcqp")


def load(path):
    """Read a problem file; raises on parse or validation errors."""
    return read_problem(path)


def save(spec, path):
    write_problem(spec, path)


def check_known_solution(descriptor, tol=1e-12):
    """kkt_residual at the representative solution point; every built-in
    keeps this at roundoff level."""
    assert descriptor.known_solution is not None
    z = descriptor.known_solution.representative()
    return kkt_residual(descriptor.spec, z)
