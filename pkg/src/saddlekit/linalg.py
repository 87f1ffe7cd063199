"""Dense linear-algebra kernels shared by the solvers and the diagnostics.

Everything here is a pure function of its inputs.  Matrices are plain
numpy arrays; symmetric inputs are trusted to be stored symmetrically.
The three quadratic (semi)norms used by the algorithms are represented
by :class:`PSeminorm`, which also knows how to materialize its matrix
for eigenvalue queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "IterationLimitError",
    "RangeViolationError",
    "PSeminorm",
    "op_norm",
    "solve_spd",
    "seminorm_eval",
    "eigen_extremes",
    "materialize",
]

# Dense eigendecomposition is used up to this dimension; beyond it the
# extremal eigenvalues are found by (shifted) power iteration.
_DENSE_EIG_LIMIT = 2000

# Iteration caps.  Hitting one raises IterationLimitError naming it.
_POWER_ITER_CAP = 100_000
_CG_ITER_FACTOR = 20  # cap = max(_CG_ITER_FLOOR, factor * n)
_CG_ITER_FLOOR = 200


class IterationLimitError(RuntimeError):
    """An iterative kernel hit its iteration cap before converging."""


class RangeViolationError(ValueError):
    """The right-hand side has a component outside range(M) beyond tolerance."""


def op_norm(A, tol=1e-10):
    """Spectral norm of a matrix by power iteration on the Gram matrix.

    The iteration runs on the smaller of A^T A and A A^T and starts from
    the fixed seed vector (1, 1/2, 1/3, ...), normalized, so repeated
    calls return bit-identical values.

    Args:
      A: array of shape (m, n), not all zero.
      tol: requested relative accuracy of the returned norm.

    Returns:
      sigma with |sigma - ||A||_2| <= tol * ||A||_2.

    Raises:
      IterationLimitError: no convergence within the iteration cap.
    """
    A = np.asarray(A, dtype=float)
    assert A.ndim == 2, "op_norm expects a matrix"
    assert tol > 0.0
    if not np.any(A):
        raise ValueError("op_norm requires a nonzero matrix")

    if A.shape[0] < A.shape[1]:
        A = A.T
    gram = A.T @ A  # n x n with n = min(A.shape)
    n = gram.shape[0]

    # Documented deterministic seed: harmonic-decay entries.
    v = 1.0 / np.arange(1.0, n + 1.0)
    v /= np.linalg.norm(v)

    theta_old = 0.0
    for _ in range(_POWER_ITER_CAP):
        w = gram @ v
        theta = float(v @ w)  # Rayleigh quotient, v is unit
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # Seed landed in the kernel; perturb deterministically.
            v = np.roll(v, 1) + 1e-3
            v /= np.linalg.norm(v)
            theta_old = 0.0
            continue
        resid = np.linalg.norm(w - theta * v)
        if theta > 0.0 and resid <= 0.1 * tol * theta and abs(theta - theta_old) <= 0.01 * tol * theta:
            return float(np.sqrt(theta))
        theta_old = theta
        v = w / nw
    raise IterationLimitError(
        f"power iteration did not reach tol={tol:g} within {_POWER_ITER_CAP} iterations"
    )


def solve_spd(M, rhs, tol=1e-12, x0=None, max_iters=None):
    """Solve M x = rhs for symmetric positive semidefinite M by conjugate gradients.

    Args:
      M: symmetric PSD array (n, n).
      rhs: array (n,).  Must lie in range(M) up to the tolerance.
      tol: the residual target is tol * max(1, ||rhs||_2).
      x0: optional warm-start iterate (callers solving a sequence of
        nearby systems pass the previous solution).
      max_iters: iteration cap, default max(200, 20 n).

    Returns:
      x with ||M x - rhs||_2 <= tol * max(1, ||rhs||_2).

    Raises:
      RangeViolationError: the residual stagnates above the target, which
        is how an off-range rhs component manifests under CG.
      IterationLimitError: cap reached while the residual was still falling.
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    assert M.shape == (n, n)
    target = tol * max(1.0, float(np.linalg.norm(rhs)))
    cap = max_iters if max_iters is not None else max(_CG_ITER_FLOOR, _CG_ITER_FACTOR * n)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = rhs - M @ x
    best_x, best_res = x.copy(), float(np.linalg.norm(r))
    if best_res <= target:
        return best_x
    p = r.copy()
    rs = float(r @ r)
    # Kernel-direction guard scale: PSD means diag(M) >= 0 bounds the spectrum.
    diag_scale = max(float(np.max(np.abs(np.diag(M)))), 1e-300)

    history = [best_res]
    stall_window = max(10, n)
    since_improved = 0
    for _ in range(cap):
        Mp = M @ p
        pMp = float(p @ Mp)
        if pMp <= 1e-20 * diag_scale * float(p @ p):
            # Search direction (numerically) in ker(M): rhs leaks outside range(M).
            raise RangeViolationError(
                f"rhs outside range(M): residual {best_res:.3e} > target {target:.3e}"
            )
        alpha = rs / pMp
        x = x + alpha * p
        r = r - alpha * Mp
        res = float(np.linalg.norm(r))
        history.append(res)
        if res < best_res * (1.0 - 1e-3):
            since_improved = 0
        else:
            since_improved += 1
        if res < best_res:
            best_res, best_x = res, x.copy()
        if res <= target:
            return x
        if since_improved >= stall_window:
            # On a singular system the exact Krylov space is exhausted
            # within rank(M) steps; after that, rounding only lets the
            # residual wander around the off-range component's norm.
            raise RangeViolationError(
                f"rhs outside range(M): residual stalled at {best_res:.3e} "
                f"> target {target:.3e}"
            )
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new

    # Distinguish stagnation (range violation) from slow progress.
    tail = history[-max(2, len(history) // 4):]
    if best_res > target and min(tail) > 0.5 * max(tail):
        raise RangeViolationError(
            f"rhs outside range(M): residual stagnated at {best_res:.3e} > target {target:.3e}"
        )
    raise IterationLimitError(f"conjugate gradients hit the cap of {cap} iterations")


@dataclass(frozen=True)
class PSeminorm:
    """One of the three algorithm seminorms.

    kind 'scaled_identity' is ||z||_2 / sqrt(eta); kind 'pdhg' is the
    quadratic form [[I/eta, -A^T], [-A, I/eta]], positive definite exactly
    when eta ||A|| < 1; kind 'admm' is [[eta A^T A, A^T], [A, I/eta]],
    positive semidefinite for every eta > 0 with kernel {(x, y) : y + eta A x = 0}.
    """

    kind: str
    eta: float
    A: object  # ndarray (m, n) for pdhg/admm kinds, None otherwise
    n: int
    m: int

    def __post_init__(self):
        assert self.kind in ("scaled_identity", "pdhg", "admm")
        assert self.eta > 0.0
        if self.kind != "scaled_identity":
            assert self.A is not None and self.A.shape == (self.m, self.n)

    @classmethod
    def scaled_identity(cls, eta, n, m):
        return cls("scaled_identity", float(eta), None, int(n), int(m))

    @classmethod
    def identity(cls, n, m):
        return cls.scaled_identity(1.0, n, m)

    @classmethod
    def pdhg(cls, eta, A):
        A = np.asarray(A, dtype=float)
        return cls("pdhg", float(eta), A, A.shape[1], A.shape[0])

    @classmethod
    def admm(cls, eta, A):
        A = np.asarray(A, dtype=float)
        return cls("admm", float(eta), A, A.shape[1], A.shape[0])

    @property
    def dim(self):
        return self.n + self.m


def seminorm_eval(P, x, y):
    """Evaluate ||(x, y)||_P for a :class:`PSeminorm`.

    The pdhg form is computed as sqrt((||x||^2 + ||y||^2)/eta - 2 <y, Ax>)
    and the admm form in its factored shape sqrt(eta) * ||Ax + y/eta||_2.
    Values that round slightly negative are clamped to zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    assert x.shape == (P.n,) and y.shape == (P.m,), "dimension mismatch with P"
    if P.kind == "scaled_identity":
        return float(np.sqrt((x @ x + y @ y) / P.eta))
    if P.kind == "pdhg":
        q = (x @ x + y @ y) / P.eta - 2.0 * float(y @ (P.A @ x))
        return float(np.sqrt(max(q, 0.0)))
    # admm
    return float(np.sqrt(P.eta) * np.linalg.norm(P.A @ x + y / P.eta))


def materialize(P):
    """Explicit dense matrix of a :class:`PSeminorm` (for eigenvalue queries)."""
    n, m, eta = P.n, P.m, P.eta
    if P.kind == "scaled_identity":
        return np.eye(n + m) / eta
    out = np.zeros((n + m, n + m))
    if P.kind == "pdhg":
        out[:n, :n] = np.eye(n) / eta
        out[n:, n:] = np.eye(m) / eta
        out[:n, n:] = -P.A.T
        out[n:, :n] = -P.A
    else:  # admm
        out[:n, :n] = eta * (P.A.T @ P.A)
        out[:n, n:] = P.A.T
        out[n:, :n] = P.A
        out[n:, n:] = np.eye(m) / eta
    return out


def _sym_extreme_eigs(M, tol=1e-9):
    """(largest, smallest) eigenvalue of symmetric M by shifted power iteration."""
    n = M.shape[0]
    seed = 1.0 / np.arange(1.0, n + 1.0)

    def top(mat, shift):
        # Largest eigenvalue of (mat + shift I), power iteration.
        v = seed / np.linalg.norm(seed)
        theta_old = None
        for _ in range(_POWER_ITER_CAP):
            w = mat @ v + shift * v
            theta = float(v @ w)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return -shift  # v is an exact eigenvector of mat at -shift
            resid = np.linalg.norm(w - theta * v)
            scale = max(abs(theta), 1e-300)
            if resid <= 0.1 * tol * scale and theta_old is not None and abs(theta - theta_old) <= 0.01 * tol * scale:
                return theta - shift
            theta_old = theta
            v = w / nw
        raise IterationLimitError(
            f"eigenvalue power iteration hit the cap of {_POWER_ITER_CAP}"
        )

    # Row-sum bound keeps all shifted spectra positive.
    bound = float(np.max(np.sum(np.abs(M), axis=1))) + 1.0
    lam_max = top(M, bound)
    lam_min = -top(-M, bound)
    return lam_max, lam_min


def eigen_extremes(P, tol=1e-9):
    """Largest and smallest nonzero eigenvalue of the explicit P matrix.

    For positive semidefinite kinds the second value is lambda_min^+, the
    smallest nonzero eigenvalue.  A pdhg seminorm past its stepsize bound
    is indefinite and the second value comes back negative, which is what
    the definiteness boundary checks look for.

    Returns:
      (lam_max, lam_min_nonzero), each to about 1e-8 relative accuracy.
    """
    dim = P.dim
    if P.kind == "scaled_identity":
        return 1.0 / P.eta, 1.0 / P.eta
    if dim <= _DENSE_EIG_LIMIT:
        eigs = np.linalg.eigvalsh(materialize(P))
        lam_max = float(eigs[-1])
        ztol = 1e-12 * max(abs(float(eigs[0])), lam_max, 1e-300)
        nonzero = eigs[np.abs(eigs) > ztol]
        assert nonzero.size, "seminorm matrix is numerically zero"
        return lam_max, float(nonzero[0] if nonzero[0] < 0 else np.min(nonzero))
    # Large case: iterative.  The admm kind shares its nonzero spectrum with
    # the m x m matrix eta A A^T + I/eta, which is positive definite.
    if P.kind == "admm":
        small = P.eta * (P.A @ P.A.T) + np.eye(P.m) / P.eta
        if P.m <= _DENSE_EIG_LIMIT:
            eigs = np.linalg.eigvalsh(small)
            return float(eigs[-1]), float(eigs[0])
        lam_max, lam_min = _sym_extreme_eigs(small, tol)
        return lam_max, lam_min
    lam_max, lam_min = _sym_extreme_eigs(materialize(P), tol)
    if abs(lam_min) <= 1e-12 * abs(lam_max):
        raise IterationLimitError(
            "smallest nonzero eigenvalue is not separable from zero at this scale"
        )
    return lam_max, lam_min
