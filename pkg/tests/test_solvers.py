"""Solver step and run-loop tests.

The single-step expectations below were worked out by hand on tiny
problems before the steppers were written, so they pin down the exact
update formulas (including which point the dual projection is evaluated
at) rather than just "it converges".
"""

import math

import numpy as np
import pytest

from saddlekit.linalg import seminorm_eval
from saddlekit.problem import (
    AffineConstraint,
    PrimalDualPoint,
    ProblemSpec,
    QuadraticConstraint,
    eval_G,
    kkt_residual,
)
from saddlekit.solvers import (
    CSV_HEADER,
    SolverConfig,
    SolverError,
    UnsupportedAlgorithmError,
    admm_step,
    auto_stepsize,
    egm_step,
    format_rows,
    gamma_bound,
    pdhg_step,
    read_summary,
    replay_config,
    resolve_stepsize,
    run,
    seminorm_for,
    summary_path_for,
    write_trace,
)
from saddlekit.solvers import _recorded


def trivial_lp():
    # min x  s.t.  -x <= 0; optimum x* = 0 with multiplier y* = 1
    return ProblemSpec(c=np.array([1.0]), constraints=(AffineConstraint([-1.0], 0.0),))


def box_lp():
    # min x1 + 2 x2 on [0, 1]^2; optimum (0, 0), duals (1, 2, 0, 0)
    cons = (
        AffineConstraint([-1.0, 0.0], 0.0),
        AffineConstraint([0.0, -1.0], 0.0),
        AffineConstraint([1.0, 0.0], 1.0),
        AffineConstraint([0.0, 1.0], 1.0),
    )
    return ProblemSpec(c=np.array([1.0, 2.0]), constraints=cons)


def box_qp():
    # min 0.5 ||x - (2, 3)||^2  s.t.  x <= 1; optimum x* = (1, 1), y* = (1, 2)
    cons = (AffineConstraint([1.0, 0.0], 1.0), AffineConstraint([0.0, 1.0], 1.0))
    return ProblemSpec(c=np.array([-2.0, -3.0]), Q=np.eye(2), constraints=cons)


def small_qcqp():
    # min 0.5 ||x||^2 + x1 + x2  s.t.  0.5 ||x||^2 <= 4,  x1 + x2 <= 1
    # optimum x* = (-1, -1), both constraints slack, y* = 0
    cons = (
        QuadraticConstraint(c=[0.0, 0.0], Q=np.eye(2), b=4.0),
        AffineConstraint([1.0, 1.0], 1.0),
    )
    return ProblemSpec(c=np.array([1.0, 1.0]), Q=np.eye(2), constraints=cons)


def z(x, y):
    return PrimalDualPoint(np.atleast_1d(np.asarray(x, dtype=float)),
                           np.atleast_1d(np.asarray(y, dtype=float)))


# hand-traced single steps ------------------------------------------------

def test_pdhg_hand_trace_step():
    p = trivial_lp()
    z1, aux = pdhg_step(p, z(1.0, 0.0), eta=0.5)
    assert z1.x[0] == 0.5 and z1.y[0] == 0.0
    assert aux.x[0] == 0.0 and aux.y[0] == 0.0


def test_egm_hand_trace_step():
    p = trivial_lp()
    z1, aux = egm_step(p, z(1.0, 0.0), eta=0.5)
    assert z1.x[0] == 0.5 and z1.y[0] == 0.0
    assert aux.x[0] == 0.5 and aux.y[0] == 0.0


def test_admm_hand_trace_exact_three_step_convergence():
    # eta = 1 from (1, 0): (0,0) -> (-1,0) -> (0,1), which is exactly KKT
    p = trivial_lp()
    trace = run(p, SolverConfig("admm", stepsize=1.0, init=z(1.0, 0.0)))
    assert trace.status == "converged"
    assert trace.iterations == 3
    xs = [r.x[0] for r in trace.records]
    ys = [r.y[0] for r in trace.records]
    assert xs == [1.0, 0.0, -1.0, 0.0]
    assert ys == [0.0, 0.0, 0.0, 1.0]
    assert trace.final_kkt == 0.0
    assert trace.records[-1].dist2_ref == 0.0


def test_admm_aux_point_equals_iterate():
    p = box_lp()
    z1, aux = admm_step(p, z([0.3, -0.2], [0.1, 0.0, 0.4, 0.0]), eta=0.7)
    assert z1 is aux


def test_pdhg_aux_keeps_previous_dual():
    p = box_lp()
    state = z([0.3, -0.2], [0.1, 0.0, 0.4, 0.0])
    z1, aux = pdhg_step(p, state, eta=0.2)
    assert np.array_equal(aux.y, state.y)
    assert np.array_equal(aux.x, 2.0 * z1.x - state.x)


# update identities -------------------------------------------------------

def rand_state(rng, p, scale=3.0):
    return PrimalDualPoint(scale * rng.normal(size=p.n),
                           np.abs(scale * rng.normal(size=p.m)))


@pytest.mark.parametrize("prob", [box_lp, box_qp])
def test_dual_update_recompute_is_bitwise_pdhg(prob):
    p = prob()
    rng = np.random.default_rng(7)
    for _ in range(100):
        state = rand_state(rng, p)
        z1, aux = pdhg_step(p, state, eta=0.3)
        expect = np.maximum(state.y + 0.3 * eval_G(p, aux.x), 0.0)
        assert np.array_equal(z1.y, expect)


@pytest.mark.parametrize("prob", [box_lp, box_qp, small_qcqp])
def test_dual_update_recompute_is_bitwise_egm(prob):
    p = prob()
    rng = np.random.default_rng(8)
    for _ in range(100):
        state = rand_state(rng, p)
        z1, aux = egm_step(p, state, eta=0.2)
        expect = np.maximum(state.y + 0.2 * eval_G(p, aux.x), 0.0)
        assert np.array_equal(z1.y, expect)


@pytest.mark.parametrize("prob", [box_lp, box_qp])
def test_admm_dual_update_matches_projected_form(prob):
    # the u-substituted update equals proj_{>=0}(y + eta G(x)) up to
    # one rounding (the two expressions associate differently)
    p = prob()
    rng = np.random.default_rng(9)
    eta = 0.7
    for _ in range(100):
        state = rand_state(rng, p)
        z1, _ = admm_step(p, state, eta=eta)
        expect = np.maximum(state.y + eta * eval_G(p, state.x), 0.0)
        scale = max(1.0, float(np.max(np.abs(expect))))
        assert np.max(np.abs(z1.y - expect)) <= 1e-14 * scale


def test_admm_dual_update_uses_current_not_next_primal():
    # the projected form above is evaluated at x^k; make sure a state
    # where x^k and x^{k+1} give different clamps tells them apart
    p = trivial_lp()
    state = z(1.0, 0.0)
    z1, _ = admm_step(p, state, eta=1.0)
    assert z1.y[0] == 0.0  # G(x^k) = -1 clamps; G(x^{k+1}) = 0 would not


def test_pdhg_inclusion_residual():
    rng = np.random.default_rng(11)
    for prob in (box_lp, box_qp):
        p = prob()
        A, b = p.affine_matrix()
        eta = 0.25
        for _ in range(100):
            state = rand_state(rng, p)
            z1, aux = pdhg_step(p, state, eta=eta)
            grad1 = (p.Q @ z1.x if p.Q is not None else 0.0) + p.c
            xblock = (state.x - z1.x) / eta - A.T @ (state.y - z1.y)
            assert np.max(np.abs(xblock - (grad1 + A.T @ z1.y))) <= 1e-9
            w = eval_G(p, aux.x) + (state.y - z1.y) / eta
            assert np.max(w) <= 1e-9
            pos = z1.y > 0.0
            if np.any(pos):
                assert np.max(np.abs(w[pos])) <= 1e-9


# fixed points and convergence --------------------------------------------

OPTIMA = {
    "trivial": (trivial_lp, z(0.0, 1.0)),
    "box_lp": (box_lp, z([0.0, 0.0], [1.0, 2.0, 0.0, 0.0])),
    "box_qp": (box_qp, z([1.0, 1.0], [1.0, 2.0])),
}


@pytest.mark.parametrize("name", list(OPTIMA))
@pytest.mark.parametrize("algorithm", ["pdhg", "admm", "egm"])
def test_kkt_point_is_fixed_point(name, algorithm):
    prob, zstar = OPTIMA[name]
    p = prob()
    assert kkt_residual(p, zstar) <= 1e-12
    eta = 0.4 if algorithm == "egm" else resolve_stepsize(p, SolverConfig(algorithm))
    P = seminorm_for(p, algorithm, eta)
    stepper = {"pdhg": pdhg_step, "admm": admm_step, "egm": egm_step}[algorithm]
    z1, _ = stepper(p, zstar, eta)
    assert seminorm_eval(P, z1.x - zstar.x, z1.y - zstar.y) <= 1e-9


@pytest.mark.parametrize("algorithm,eta", [("pdhg", "auto"), ("admm", "auto"), ("egm", 0.4)])
def test_converges_on_box_qp(algorithm, eta):
    p = box_qp()
    trace = run(p, SolverConfig(algorithm, stepsize=eta, init=z([5.0, -3.0], [0.0, 2.0])))
    assert trace.status == "converged"
    assert np.allclose(trace.final.x, [1.0, 1.0], atol=1e-7)
    assert np.allclose(trace.final.y, [1.0, 2.0], atol=1e-7)


def test_pdhg_converges_trivial_lp():
    # on LP data the gap block falls back to the stationarity surrogate
    # whenever c + A^T y != 0 exactly, so the stop can fire while
    # complementarity is still settling; the dual is then exact and the
    # primal is merely small, not zero to machine precision
    trace = run(trivial_lp(), SolverConfig("pdhg", stepsize=0.5, init=z(1.0, 0.0)))
    assert trace.status == "converged"
    assert abs(trace.final.y[0] - 1.0) <= 1e-9
    assert abs(trace.final.x[0]) <= 1e-3
    assert kkt_residual(trivial_lp(), trace.final) <= 1e-10


def test_egm_converges_on_qcqp():
    # both constraints end up slack, so the residual is dominated by the
    # objective gap f(x) - h(0), which is quadratic in ||x - x*||; a
    # 1e-10 stop therefore only pins x to ~sqrt(2e-10)
    p = small_qcqp()
    trace = run(p, SolverConfig("egm", init=z([2.0, 0.0], [1.0, 1.0])))
    assert trace.status == "converged"
    assert np.allclose(trace.final.x, [-1.0, -1.0], atol=1e-4)
    assert np.allclose(trace.final.y, [0.0, 0.0], atol=1e-8)


@pytest.mark.parametrize("algorithm,eta", [("pdhg", 0.5), ("admm", 1.0), ("egm", 0.5)])
def test_star_nonexpansive_toward_exact_optimum(algorithm, eta):
    # distance to the known exact saddle point never grows along the run
    p = trivial_lp()
    zstar = z(0.0, 1.0)
    P = seminorm_for(p, algorithm, eta)
    trace = run(p, SolverConfig(algorithm, stepsize=eta, init=z(1.0, 0.0)))
    dists = [seminorm_eval(P, r.x - zstar.x, r.y - zstar.y) for r in trace.records]
    for a, b in zip(dists, dists[1:]):
        assert b <= a + 1e-9


@pytest.mark.parametrize("algorithm,eta", [("pdhg", "auto"), ("admm", "auto"), ("egm", 0.4)])
def test_sublinear_step_norm_decay(algorithm, eta):
    # min_{i<=k} ||z^{i+1}-z^i||_P <= gamma ||z^0-z*||_P / sqrt(k)
    p = box_qp()
    trace = run(p, SolverConfig(algorithm, stepsize=eta, init=z([5.0, -3.0], [0.0, 2.0])))
    gamma = gamma_bound(p, algorithm, trace.stepsize)
    assert gamma is not None
    d0 = trace.records[0].distP_ref
    best = math.inf
    for r in trace.records:
        best = min(best, r.step_norm_P)
        if r.iter >= 1:
            assert best <= gamma * d0 / math.sqrt(r.iter) + 1e-8


def test_divergence_is_detected():
    # EGM with eta L > 1 on a stiff quadratic blows up multiplicatively
    p = ProblemSpec(c=np.array([0.0]), Q=np.array([[4.0]]),
                    constraints=(AffineConstraint([-1.0], 1.0),))
    trace = run(p, SolverConfig("egm", stepsize=1.0, init=z(1.0, 0.0), max_iters=10_000))
    assert trace.status == "diverged"
    assert trace.iterations < 100


# configuration and stepsizes ---------------------------------------------

def test_auto_stepsize_lp_qp():
    assert auto_stepsize(trivial_lp()) == 0.99
    p = box_lp()
    A, _ = p.affine_matrix()
    expect = 0.99 / np.linalg.svd(A, compute_uv=False)[0]
    assert abs(auto_stepsize(p) - expect) <= 1e-12 * expect


def test_auto_stepsize_qcqp_sums_curvatures():
    p = small_qcqp()
    # linear parts stack to [[0,0],[1,1]]; objective and constraint Q are I
    expect = 1.0 / (np.sqrt(2.0) + 1.0 + 1.0)
    assert abs(auto_stepsize(p) - expect) <= 1e-12


def test_pdhg_rejects_unstable_stepsize():
    with pytest.raises(SolverError):
        resolve_stepsize(trivial_lp(), SolverConfig("pdhg", stepsize=1.0))
    cfg = SolverConfig("pdhg", stepsize=1.0, allow_unstable_stepsize=True, max_iters=5)
    assert resolve_stepsize(trivial_lp(), cfg) == 1.0
    run(trivial_lp(), cfg)  # override actually runs


def test_qcqp_rejected_by_pdhg_and_admm():
    p = small_qcqp()
    for algorithm in ("pdhg", "admm"):
        with pytest.raises(UnsupportedAlgorithmError):
            run(p, SolverConfig(algorithm))


def test_config_validation():
    with pytest.raises(SolverError):
        SolverConfig("newton")
    with pytest.raises(SolverError):
        SolverConfig("pdhg", stepsize=-0.1)
    with pytest.raises(SolverError):
        SolverConfig("pdhg", max_iters=-1)
    with pytest.raises(SolverError):
        SolverConfig("pdhg", kkt_tol=0.0)


def test_gamma_bounds():
    p = trivial_lp()
    assert gamma_bound(p, "pdhg", 0.5) == 1.0
    assert gamma_bound(p, "admm", 0.5) == 1.0
    assert gamma_bound(p, "egm", 0.5) == pytest.approx(3.0 / math.sqrt(0.75), rel=1e-15)
    assert gamma_bound(p, "egm", 1.5) is None  # eta L >= 1
    assert gamma_bound(small_qcqp(), "egm", 0.1) is None


# run loop bookkeeping -----------------------------------------------------

def test_max_iters_zero_gives_single_initial_row():
    trace = run(box_lp(), SolverConfig("pdhg", max_iters=0))
    assert trace.status == "iteration-limit"
    assert len(trace.records) == 1
    r = trace.records[0]
    assert r.iter == 0 and r.dist2_ref == 0.0 and r.distP_ref == 0.0
    assert r.aux_gap_P == 0.0 and r.step_norm_P > 0.0


def test_recording_cadence_rule():
    assert _recorded(10_000, 0) and not _recorded(10_001, 0)
    assert _recorded(10_010, 0) and not _recorded(10_013, 0)
    assert _recorded(3, 0)
    assert _recorded(14, 7) and not _recorded(15, 7)


def test_trace_every_override_and_final_row():
    trace = run(box_lp(), SolverConfig("pdhg", max_iters=10, trace_every=4))
    assert [r.iter for r in trace.records] == [0, 4, 8, 10]


def test_termination_checked_every_iteration_not_just_recorded_ones():
    trace = run(trivial_lp(), SolverConfig("admm", stepsize=1.0, init=z(1.0, 0.0),
                                           trace_every=100))
    assert trace.status == "converged"
    assert trace.iterations == 3
    assert [r.iter for r in trace.records] == [0, 3]


def test_aux_gap_zero_at_start_positive_later():
    trace = run(trivial_lp(), SolverConfig("pdhg", stepsize=0.5, init=z(1.0, 0.0),
                                           max_iters=5))
    assert trace.records[0].aux_gap_P == 0.0
    assert trace.records[2].aux_gap_P > 0.0


def test_snapshot_counts():
    trace = run(box_lp(), SolverConfig("pdhg", max_iters=0,
                                       init=z([0.0, 0.5], [0.3, 0.0, 0.0, 0.0])))
    r = trace.records[0]
    assert r.num_dual_pos == 1  # strict positives only
    assert r.num_primal_tight == 1  # g = (0, -0.5, -1, -0.5): one above -1e-10


def test_sphere_init_deterministic_radius():
    p = box_lp()
    t1 = run(p, SolverConfig("pdhg", init="sphere:2.5", seed=42, max_iters=0))
    t2 = run(p, SolverConfig("pdhg", init="sphere:2.5", seed=42, max_iters=0))
    assert np.array_equal(t1.initial.x, t2.initial.x)
    assert np.array_equal(t1.initial.y, t2.initial.y)
    norm = math.hypot(np.linalg.norm(t1.initial.x), np.linalg.norm(t1.initial.y))
    assert abs(norm - 2.5) <= 1e-12
    t3 = run(p, SolverConfig("pdhg", init="sphere:2.5", seed=43, max_iters=0))
    assert not np.array_equal(t1.initial.y, t3.initial.y)


# trace files ---------------------------------------------------------------

def test_write_trace_and_replay_bitwise(tmp_path):
    p = box_qp()
    cfg = SolverConfig("admm", init=z([5.0, -3.0], [0.0, 2.0]))
    trace = run(p, cfg, instance_label="unit:box-qp")
    csv = tmp_path / "t.csv"
    write_trace(trace, csv)

    text = csv.read_text().splitlines()
    assert text[0] == CSV_HEADER
    assert len(text) == 1 + len(trace.records)
    first = text[1].split(",")
    assert first[0] == "0" and len(first) == 8

    summary = read_summary(summary_path_for(csv))
    assert summary["status"] == "converged"
    assert summary["instance"] == "unit:box-qp"
    assert summary["algorithm"] == "admm"
    replay = run(p, replay_config(summary, p), instance_label=summary["instance"])
    assert format_rows(replay) == format_rows(trace)
    assert np.array_equal(replay.final.x, trace.final.x)
    assert np.array_equal(replay.final.y, trace.final.y)


def test_summary_survives_sphere_init_replay(tmp_path):
    p = box_lp()
    trace = run(p, SolverConfig("pdhg", init="sphere:1.5", seed=3, max_iters=50))
    csv = tmp_path / "s.csv"
    write_trace(trace, csv)
    summary = read_summary(summary_path_for(csv))
    # replay reads the recorded point, not the spec string
    replay = run(p, replay_config(summary, p))
    assert format_rows(replay) == format_rows(trace)


def test_reruns_are_byte_identical_outside_wall_time(tmp_path):
    p = box_qp()
    cfg = SolverConfig("pdhg", init=z([5.0, -3.0], [0.0, 2.0]))
    paths = []
    for tag in ("a", "b"):
        csv = tmp_path / f"{tag}.csv"
        write_trace(run(p, cfg, instance_label="x"), csv)
        paths.append(csv)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    keep = lambda line: not line.startswith("wall_time_s:")
    s0 = [l for l in (tmp_path / "a.summary").read_text().splitlines() if keep(l)]
    s1 = [l for l in (tmp_path / "b.summary").read_text().splitlines() if keep(l)]
    assert s0 == s1
