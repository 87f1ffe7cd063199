"""Primal-dual first-order methods (PDHG, ADMM, EGM) and the run loop.

All three methods share one iteration shape: from z^k = (x^k, y^k)
produce the next iterate z^{k+1} plus an auxiliary point z̃^{k+1}, with
the dual update always a projected ascent step proj_{>=0}(y + eta G(.))
evaluated at the method's own auxiliary primal point (lagged by one
iteration for ADMM).  Projections clamp negative entries to literal 0.0;
the active-set analysis downstream depends on those exact zeros.

Each method is nonexpansive toward solutions in its own quadratic
(semi)norm P: PDHG in [[I/eta, -A^T], [-A, I/eta]] (positive definite
for eta ||A|| < 1), ADMM in [[eta A^T A, A^T], [A, I/eta]] (singular,
kernel y + eta A x = 0), EGM in the identity.

Trace CSV columns (one row per recorded iteration k):
  iter          iteration number
  kkt           KKT residual at z^k
  step_norm_P   ||z^{k+1} - z^k||_P (for the final row, the step is
                computed but not applied)
  aux_gap_P     ||z^k - z̃^k||_P, with z̃^0 = z^0
  dist2_ref     ||z^k - z_ref||_2 where z_ref is the final iterate
  distP_ref     ||z^k - z_ref||_P (a seminorm for ADMM: zero does not
                imply z^k = z_ref, only agreement modulo ker P)
  num_dual_pos      #{j : y^k_j > 0}, exact thanks to the 0.0 clamps
  num_primal_tight  #{j : g_j(x^k) > -1e-10}
Floats are written with %.17g.  A sidecar `<stem>.summary` file carries
the final point and enough metadata to replay the run exactly.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .fileio import fmt, fmt_vec, read_kv
from .linalg import PSeminorm, op_norm, seminorm_eval, solve_spd
from .problem import (
    PrimalDualPoint,
    QuadraticConstraint,
    eval_G,
    kkt_residual,
    lagrangian_grads,
)

__all__ = [
    "ALGORITHMS",
    "SolverError",
    "UnsupportedAlgorithmError",
    "SolverConfig",
    "TraceRecord",
    "IterationTrace",
    "auto_stepsize",
    "resolve_stepsize",
    "smoothness_bound",
    "gamma_bound",
    "seminorm_for",
    "pdhg_step",
    "admm_step",
    "egm_step",
    "run",
    "format_rows",
    "write_trace",
    "read_summary",
    "CSV_HEADER",
    "SUMMARY_HEADER",
]

ALGORITHMS = ("pdhg", "admm", "egm")

CSV_HEADER = "iter,kkt,step_norm_P,aux_gap_P,dist2_ref,distP_ref,num_dual_pos,num_primal_tight"
SUMMARY_HEADER = "saddlekit-summary v1"

# Dense recording window, then every 10th iteration (final always).
_DENSE_WINDOW = 10_000
_DIVERGENCE_NORM = 1e12

# Snapshot tolerance for the num_primal_tight column only.
_TIGHT_EPS = 1e-10


class SolverError(ValueError):
    """Invalid solver configuration."""


class UnsupportedAlgorithmError(SolverError):
    """Algorithm cannot run on this problem class (PDHG/ADMM need affine G)."""


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.

    stepsize is a positive float or the string 'auto': 0.99/||A||_op for
    LP/QP and 1/(||A||_op + sum_k ||Q^k||_op) for QCQP, where A stacks
    the constraints' linear parts and the sum runs over the objective's
    and all constraints' quadratic terms.  PDHG rejects an explicit
    stepsize with eta ||A||_op >= 1 (its seminorm turns indefinite)
    unless allow_unstable_stepsize is set.

    init is 'zero', 'sphere:R' (uniform on the radius-R sphere, drawn
    from `seed`), or an explicit PrimalDualPoint.
    """

    algorithm: str
    stepsize: object = "auto"
    max_iters: int = 1_000_000
    kkt_tol: float = 1e-10
    trace_every: int = 0  # 0 means the default cadence
    seed: int = 0
    init: object = "zero"
    allow_unstable_stepsize: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise SolverError(f"unknown algorithm {self.algorithm!r}")
        if self.stepsize != "auto":
            if not isinstance(self.stepsize, (int, float)) or not self.stepsize > 0.0:
                raise SolverError("stepsize must be 'auto' or a positive real")
        if self.max_iters < 0:
            raise SolverError("max_iters must be >= 0")
        if not self.kkt_tol > 0.0:
            raise SolverError("kkt_tol must be positive")
        if self.trace_every < 0:
            raise SolverError("trace_every must be >= 0")


def _require_affine(p, algorithm):
    if any(isinstance(c, QuadraticConstraint) for c in p.constraints):
        raise UnsupportedAlgorithmError(
            f"{algorithm} requires affine constraints; this problem is {p.problem_class}"
        )


def auto_stepsize(p):
    """The default stepsize rule, by problem class."""
    if p.problem_class in ("LP", "QP"):
        A, _ = p.affine_matrix()
        return 0.99 / op_norm(A)
    lin = p.linear_parts()
    total = op_norm(lin) if np.any(lin) else 0.0
    if p.Q is not None and np.any(p.Q):
        total += op_norm(p.Q)
    for con in p.constraints:
        if isinstance(con, QuadraticConstraint) and np.any(con.Q):
            total += op_norm(con.Q)
    return 1.0 / total


def resolve_stepsize(p, cfg):
    if cfg.stepsize == "auto":
        return auto_stepsize(p)
    eta = float(cfg.stepsize)
    if cfg.algorithm == "pdhg" and not cfg.allow_unstable_stepsize:
        A, _ = p.affine_matrix()
        if eta * op_norm(A) >= 1.0:
            raise SolverError(
                f"pdhg stepsize {eta:g} >= 1/||A||_op makes the iteration seminorm "
                "indefinite; pass allow_unstable_stepsize to override"
            )
    return eta


def smoothness_bound(p):
    """Lipschitz bound ||Q||_op + ||A||_op on the Lagrangian gradient map.

    Only meaningful for affine constraints (QCQP Jacobians are unbounded
    over the whole space); returns None for QCQP.
    """
    if p.problem_class == "QCQP":
        return None
    A, _ = p.affine_matrix()
    L = op_norm(A)
    if p.Q is not None and np.any(p.Q):
        L += op_norm(p.Q)
    return L


def gamma_bound(p, algorithm, eta):
    """Step-decay constant gamma: ||z^{k+1}-z^k||_P <= gamma ||z^0-z_ref||_P / sqrt(k).

    1 for PDHG and ADMM.  For EGM, 3/sqrt(1-(eta L)^2) with
    L = smoothness_bound, provided eta L < 1; None when no finite
    constant is available (QCQP, or eta at/over 1/L).
    """
    if algorithm in ("pdhg", "admm"):
        return 1.0
    L = smoothness_bound(p)
    if L is None or eta * L >= 1.0:
        return None
    return 3.0 / math.sqrt(1.0 - (eta * L) ** 2)


def seminorm_for(p, algorithm, eta):
    if algorithm == "egm":
        return PSeminorm.identity(p.n, p.m)
    A, _ = p.affine_matrix()
    return PSeminorm.pdhg(eta, A) if algorithm == "pdhg" else PSeminorm.admm(eta, A)


def _pdhg_work(p, eta):
    A, b = p.affine_matrix()
    M = None
    if p.Q is not None and np.any(p.Q):
        M = np.eye(p.n) + eta * p.Q
    return {"A": A, "M": M}


def pdhg_step(p, z, eta, work=None):
    """One PDHG update: prox step in x, extrapolate, project in y.

    x^{k+1} solves (I + eta Q) x = x^k - eta (A^T y^k + c); with Q = 0
    that is a plain subtraction.  x̃ = 2 x^{k+1} - x^k, and
    y^{k+1} = proj_{>=0}(y^k + eta G(x̃)).  The auxiliary point is
    (x̃, y^k).
    """
    _require_affine(p, "pdhg")
    if work is None:
        work = _pdhg_work(p, eta)
    x, y = z.x, z.y
    rhs = x - eta * (work["A"].T @ y + p.c)
    x1 = rhs if work["M"] is None else solve_spd(work["M"], rhs, x0=x)
    xt = 2.0 * x1 - x
    y1 = np.maximum(y + eta * eval_G(p, xt), 0.0)
    return PrimalDualPoint(x1, y1), PrimalDualPoint(xt, y)


def _admm_work(p, eta):
    A, b = p.affine_matrix()
    M = eta * (A.T @ A)
    if p.Q is not None:
        M = M + p.Q
    M = 0.5 * (M + M.T)  # keep the normal matrix stored symmetrically
    return {"A": A, "b": b, "M": M}


def admm_step(p, z, eta, work=None):
    """One ADMM sweep in the order u, y, x.

    u^{k+1} = proj_{>=0}(b - A x^k - y^k/eta) is the slack argmin in
    closed form.  The multiplier update y^k + eta (A x^k - b + u^{k+1})
    collapses algebraically to proj_{>=0}(y^k + eta G(x^k)), and we
    evaluate that projected form directly: the u-substituted expression
    agrees only to roundoff at the clamp transition, and the active-set
    machinery needs the exact 0.0 (and exact nonnegativity) the clamp
    provides.  x^{k+1} then solves
    (Q + eta A^T A) x = -(c + A^T y^{k+1}) + eta A^T (b - u^{k+1}).
    The auxiliary point coincides with the iterate.  A singular normal
    matrix with an off-range right-hand side surfaces as a
    range-violation error from the inner solve.
    """
    _require_affine(p, "admm")
    if work is None:
        work = _admm_work(p, eta)
    A, b, M = work["A"], work["b"], work["M"]
    x, y = z.x, z.y
    d = eval_G(p, x)  # = A x - b
    u1 = np.maximum(-d - y / eta, 0.0)
    y1 = np.maximum(y + eta * d, 0.0)
    rhs = -(p.c + A.T @ y1) + eta * (A.T @ (b - u1))
    x1 = solve_spd(M, rhs, x0=x)
    z1 = PrimalDualPoint(x1, y1)
    return z1, z1


def egm_step(p, z, eta):
    """One extragradient update: a lookahead gradient step, then the real
    step using the lookahead point's gradients.  Works for any problem
    class since f and G are smooth here."""
    gx, gy = lagrangian_grads(p, z)
    xt = z.x - eta * gx
    yt = np.maximum(z.y + eta * gy, 0.0)
    zt = PrimalDualPoint(xt, yt)
    gxt, gyt = lagrangian_grads(p, zt)
    x1 = z.x - eta * gxt
    y1 = np.maximum(z.y + eta * gyt, 0.0)
    return PrimalDualPoint(x1, y1), zt


def make_stepper(p, algorithm, eta):
    """Bind an algorithm to a problem, hoisting per-run matrices."""
    if algorithm == "pdhg":
        work = _pdhg_work(p, eta)
        return lambda z: pdhg_step(p, z, eta, work)
    if algorithm == "admm":
        work = _admm_work(p, eta)
        return lambda z: admm_step(p, z, eta, work)
    return lambda z: egm_step(p, z, eta)


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    kkt: float
    step_norm_P: float
    aux_gap_P: float
    dist2_ref: float
    distP_ref: float
    num_dual_pos: int
    num_primal_tight: int
    x: np.ndarray
    y: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class IterationTrace:
    records: tuple
    initial: PrimalDualPoint
    final: PrimalDualPoint
    iterations: int
    status: str  # converged | iteration-limit | diverged
    algorithm: str
    stepsize: float
    seminorm: PSeminorm
    kkt_tol: float
    max_iters: int
    trace_every: int
    init_spec: str
    seed: int
    instance: str
    wall_time_s: float

    @property
    def final_kkt(self):
        return self.records[-1].kkt


def _resolve_init(p, cfg):
    init = cfg.init
    if isinstance(init, PrimalDualPoint):
        assert init.x.shape == (p.n,) and init.y.shape == (p.m,)
        return init, "explicit"
    if init == "zero":
        return PrimalDualPoint(np.zeros(p.n), np.zeros(p.m)), "zero"
    if isinstance(init, str) and init.startswith("sphere:"):
        radius = float(init.split(":", 1)[1])
        if not radius > 0.0:
            raise SolverError("sphere radius must be positive")
        rng = np.random.default_rng(cfg.seed)
        v = rng.normal(size=p.n + p.m)
        v *= radius / np.linalg.norm(v)
        return PrimalDualPoint(v[: p.n], v[p.n :]), init
    raise SolverError(f"unknown init {init!r}")


def _dP(P, a, b):
    return seminorm_eval(P, a.x - b.x, a.y - b.y)


def _recorded(k, trace_every):
    if trace_every > 0:
        return k % trace_every == 0
    return k <= _DENSE_WINDOW or k % 10 == 0


def run(p, cfg, instance_label=""):
    """Iterate until kkt_residual <= kkt_tol, max_iters, or divergence.

    The KKT residual is evaluated at every iteration.  Rows are recorded
    at the cadence (dense up to 10^4, then every 10th) plus always the
    final iterate, whose step norm comes from one extra step that is
    computed but not applied.  Distance columns are filled afterwards
    against z_ref = the final iterate.
    """
    t0 = time.perf_counter()
    eta = resolve_stepsize(p, cfg)
    if cfg.algorithm in ("pdhg", "admm"):
        _require_affine(p, cfg.algorithm)
    P = seminorm_for(p, cfg.algorithm, eta)
    step = make_stepper(p, cfg.algorithm, eta)
    z, init_spec = _resolve_init(p, cfg)
    z0 = z
    ztil = z  # so aux_gap at k = 0 is exactly 0

    raw = []  # [k, kkt, step_norm, aux_gap, point]
    k = 0
    while True:
        kkt = kkt_residual(p, z)
        if kkt <= cfg.kkt_tol:
            status = "converged"
            break
        if math.sqrt(float(z.x @ z.x) + float(z.y @ z.y)) > _DIVERGENCE_NORM:
            status = "diverged"
            break
        if k >= cfg.max_iters:
            status = "iteration-limit"
            break
        z_next, zt_next = step(z)
        if _recorded(k, cfg.trace_every):
            raw.append([k, kkt, _dP(P, z_next, z), _dP(P, z, ztil), z])
        z, ztil = z_next, zt_next
        k += 1

    probe, _ = step(z)  # final row's step norm; not applied
    raw.append([k, kkt, _dP(P, probe, z), _dP(P, z, ztil), z])
    wall = time.perf_counter() - t0

    records = []
    for it, res, stepn, aux, pt in raw:
        G = eval_G(p, pt.x)
        records.append(
            TraceRecord(
                iter=it,
                kkt=res,
                step_norm_P=stepn,
                aux_gap_P=aux,
                dist2_ref=float(
                    np.sqrt(float((pt.x - z.x) @ (pt.x - z.x)) + float((pt.y - z.y) @ (pt.y - z.y)))
                ),
                distP_ref=_dP(P, pt, z),
                num_dual_pos=int(np.sum(pt.y > 0.0)),
                num_primal_tight=int(np.sum(G > -_TIGHT_EPS)),
                x=pt.x,
                y=pt.y,
                G=G,
            )
        )
    assert all(a.iter < b.iter for a, b in zip(records, records[1:]))

    return IterationTrace(
        records=tuple(records),
        initial=z0,
        final=z,
        iterations=k,
        status=status,
        algorithm=cfg.algorithm,
        stepsize=eta,
        seminorm=P,
        kkt_tol=cfg.kkt_tol,
        max_iters=cfg.max_iters,
        trace_every=cfg.trace_every,
        init_spec=init_spec,
        seed=cfg.seed,
        instance=instance_label,
        wall_time_s=wall,
    )


def format_rows(trace):
    """CSV body lines, exactly as written to disk (used by replay checks)."""
    rows = []
    for r in trace.records:
        rows.append(
            ",".join(
                [
                    str(r.iter),
                    fmt(r.kkt),
                    fmt(r.step_norm_P),
                    fmt(r.aux_gap_P),
                    fmt(r.dist2_ref),
                    fmt(r.distP_ref),
                    str(r.num_dual_pos),
                    str(r.num_primal_tight),
                ]
            )
        )
    return rows


def summary_path_for(csv_path):
    return os.path.splitext(str(csv_path))[0] + ".summary"


def write_trace(trace, csv_path):
    """Write the trace CSV plus the `<stem>.summary` sidecar."""
    with open(csv_path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write("\n".join(format_rows(trace)) + "\n")
    lines = [
        SUMMARY_HEADER,
        f"instance: {trace.instance}",
        f"algorithm: {trace.algorithm}",
        f"stepsize: {fmt(trace.stepsize)}",
        f"iterations: {trace.iterations}",
        f"status: {trace.status}",
        f"final_kkt: {fmt(trace.final_kkt)}",
        f"kkt_tol: {fmt(trace.kkt_tol)}",
        f"max_iters: {trace.max_iters}",
        f"trace_every: {trace.trace_every}",
        f"init: {trace.init_spec}",
        f"seed: {trace.seed}",
        f"initial.x: {fmt_vec(trace.initial.x)}",
        f"initial.y: {fmt_vec(trace.initial.y)}",
        f"final.x: {fmt_vec(trace.final.x)}",
        f"final.y: {fmt_vec(trace.final.y)}",
        f"wall_time_s: {fmt(trace.wall_time_s)}",
    ]
    with open(summary_path_for(csv_path), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_summary(path):
    """Summary file as a dict of strings (values stay unparsed)."""
    pairs = read_kv(path, SUMMARY_HEADER)
    return dict(pairs)


def replay_config(summary, p):
    """Reconstruct the SolverConfig that produced a summary, with the
    exact recorded initial point so the replay is bit-identical."""
    init = PrimalDualPoint(
        np.array([float(t) for t in summary["initial.x"].split()]),
        np.array([float(t) for t in summary["initial.y"].split()]),
    )
    assert init.x.size == p.n and init.y.size == p.m, "summary/instance dimension mismatch"
    return SolverConfig(
        algorithm=summary["algorithm"],
        stepsize=float(summary["stepsize"]),
        max_iters=int(summary["max_iters"]),
        kkt_tol=float(summary["kkt_tol"]),
        trace_every=int(summary["trace_every"]),
        seed=int(summary["seed"]),
        init=init,
    )
