"""Active-set analysis: partitioning, identification time, stability radii,
and sampled estimates of the metric-subregularity moduli.

The objects here answer four questions about a converged primal-dual run:

  1. Which constraints are slack, strictly active, or degenerately active
     at the solution (``classify``)?
  2. From which recorded iteration onward do the iterates carry the exact
     sign pattern of the solution (``identification_iteration``)?
  3. How far can a point move from the solution, in the algorithm's
     P-seminorm, before some slack constraint activates or some positive
     multiplier can vanish (``stability_radius``)?
  4. How sharp is the problem globally and restricted to the identified
     region (``estimate_moduli``), and what switch iteration and local
     rate would those constants predict (``predicted_counts``)?

Sampled moduli are minima of ratios over finitely many points, hence
upper bounds on the true infima; everything derived from them is
reported, never asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fileio import write_kv_report
from .linalg import eigen_extremes, op_norm, seminorm_eval
from .problem import AffineConstraint, PrimalDualPoint, eval_G, saddle_dist

__all__ = [
    "IdentificationError",
    "RegionTooThinError",
    "EmptyEstimateError",
    "ActiveSetPartition",
    "classify",
    "membership_M",
    "identification_iteration",
    "StabilityRadius",
    "stability_radius",
    "ModulusSample",
    "ModuliEstimate",
    "estimate_moduli",
    "PointOracle",
    "TwoStageFit",
    "fit_two_stage",
    "predicted_counts",
    "ANALYSIS_HEADER",
    "write_analysis_report",
    "partition_report_pairs",
]

_DEFAULT_EPS = 1e-10
_BISECT_RTOL = 1e-10
_ORDERING_SLACK = 1e-6
_MIN_POST_POINTS = 20
_LOG_FLOOR = 1e-300
_WITNESS_GAP = 0.1
# A rejection sampler that accepts fewer than 1 in 1000 draws is treated
# as targeting a region of (numerically) vanishing volume.
_ACCEPT_FLOOR = 1e-3

ANALYSIS_HEADER = "saddlekit-analysis v1"


class IdentificationError(ValueError):
    """Analysis precondition failure (zero margins, short traces, ...)."""


class RegionTooThinError(IdentificationError):
    """Rejection sampling could not hit the target region often enough."""


class EmptyEstimateError(IdentificationError):
    """No sampled point produced a usable ratio."""


@dataclass(frozen=True)
class ActiveSetPartition:
    """Constraint index partition at a candidate solution, 1-based.

    inactive:     slack constraint with a (near-)zero multiplier
    binding:      multiplier strictly positive, so the constraint is
                  active with strict complementarity
    degenerate:   constraint value and multiplier both (near) zero, the
                  strict-complementarity failures
    unclassified: everything else, e.g. a negative multiplier or values
                  sitting exactly on the tolerance boundary

    The sets are pairwise disjoint and together cover 1..m.
    """

    inactive: tuple
    binding: tuple
    degenerate: tuple
    unclassified: tuple
    eps: float

    def __post_init__(self):
        assert self.eps > 0.0
        merged = self.inactive + self.binding + self.degenerate + self.unclassified
        assert len(merged) == len(set(merged)), "index sets overlap"
        assert all(j >= 1 for j in merged), "constraint indices are 1-based"

    @property
    def is_degenerate(self):
        return len(self.degenerate) > 0


def classify(p, z_star, eps=_DEFAULT_EPS):
    """Partition the constraints of p by their activity at z_star.

    A multiplier above eps marks the constraint binding no matter the
    constraint value; otherwise a multiplier within eps of zero combines
    with the sign of g_j(x) to mark the index inactive (g_j < -eps) or
    degenerate (|g_j| < eps).  Indices matching no rule stay
    unclassified rather than being forced into a set.
    """
    eps = float(eps)
    assert eps > 0.0
    g = eval_G(p, z_star.x)
    y = np.asarray(z_star.y, dtype=float)
    inactive, binding, degenerate, other = [], [], [], []
    for j in range(p.m):
        if y[j] > eps:
            binding.append(j + 1)
        elif abs(y[j]) < eps and g[j] < -eps:
            inactive.append(j + 1)
        elif abs(y[j]) < eps and abs(g[j]) < eps:
            degenerate.append(j + 1)
        else:
            other.append(j + 1)
    return ActiveSetPartition(
        tuple(inactive), tuple(binding), tuple(degenerate), tuple(other), eps
    )


def membership_M(p, partition, z, eps=None):
    """Whether z carries the sign pattern described by the partition.

    Requires y >= 0 throughout, every inactive constraint strictly slack
    (g_j < -eps) with multiplier within eps of zero, and every binding
    multiplier strictly above eps.  Degenerate indices impose nothing.
    """
    eps = partition.eps if eps is None else float(eps)
    assert eps > 0.0
    y = np.asarray(z.y, dtype=float)
    if np.any(y < 0.0):
        return False
    g = eval_G(p, z.x)
    for j in partition.inactive:
        if not (g[j - 1] < -eps and abs(y[j - 1]) < eps):
            return False
    for j in partition.binding:
        if not y[j - 1] > eps:
            return False
    return True


def identification_iteration(trace, p, partition, eps=None):
    """Smallest recorded iteration from which membership never breaks.

    Scans the recorded iterates backwards and returns the iteration
    counter of the earliest record whose entire suffix stays inside the
    identifiable region; None when the final iterate itself fails, since
    then no suffix qualifies.
    """
    records = trace.records
    assert records, "trace has no records"
    k_star = None
    for rec in reversed(records):
        if not membership_M(p, partition, PrimalDualPoint(rec.x, rec.y), eps):
            break
        k_star = rec.iter
    return k_star


@dataclass(frozen=True)
class StabilityRadius:
    """Largest safe P-ball radius around the solution, with attribution.

    Inside ball_P(z*, delta), no inactive constraint can reach zero and
    no binding multiplier can reach zero.  branch tells which margin
    bound the radius: "slack" for an inactive constraint value,
    "multiplier" for a binding dual coordinate; binding_index is the
    attaining 1-based constraint.  delta is +inf when no inactive or
    binding index exists to constrain it.

    lip_dual bounds the change of any single multiplier per unit of
    P-distance; lip_primal lists (j, L_j) over the inactive set, where
    L_j bounds the change of g_j within the final radius.  slack_margins
    and mult_margins record the margins the radius was computed from.
    """

    delta: float
    binding_index: int | None
    branch: str | None
    lip_dual: float
    lip_primal: tuple
    slack_margins: tuple
    mult_margins: tuple


def stability_radius(p, z_star, partition, P):
    """Radius of the P-ball around z_star on which the active pattern is stable.

    Each inactive constraint j contributes the flip radius -g_j(x*)/L_j(t)
    where L_j(t) is a Lipschitz bound for g_j over the radius-t ball;
    each binding constraint contributes y*_j * sqrt(lambda_min^+(P)).
    Affine constraints make every L_j constant and the minimum is closed
    form.  A quadratic inactive constraint makes L_j grow with t, and the
    radius is the fixed point of t = Delta(t), bracketed by [0, Delta(0)]
    and bisected to 1e-10 relative width (Delta is nonincreasing, so
    t - Delta(t) crosses zero exactly once on that interval).
    """
    lam_max, lam_min = eigen_extremes(P)
    assert lam_min > 0.0, "seminorm has no positive eigenvalue"
    root = math.sqrt(lam_min)
    lip_dual = 1.0 / root
    x_star = np.asarray(z_star.x, dtype=float)
    y_star = np.asarray(z_star.y, dtype=float)
    g = eval_G(p, x_star)

    slack_margins = []
    for j in partition.inactive:
        margin = -float(g[j - 1])
        if margin <= 0.0:
            raise IdentificationError(
                f"inactive constraint {j} has no slack margin at the given point"
            )
        slack_margins.append((j, margin))
    mult_margins = []
    for j in partition.binding:
        margin = float(y_star[j - 1])
        if margin <= 0.0:
            raise IdentificationError(
                f"binding constraint {j} has a nonpositive multiplier at the given point"
            )
        mult_margins.append((j, margin))

    if not slack_margins and not mult_margins:
        return StabilityRadius(math.inf, None, None, lip_dual, (), (), ())

    qnorms = {}
    for j, _ in slack_margins:
        con = p.constraints[j - 1]
        if not isinstance(con, AffineConstraint):
            qnorms[j] = op_norm(con.Q) if np.any(con.Q) else 0.0

    def lip_at(j, t):
        con = p.constraints[j - 1]
        if isinstance(con, AffineConstraint):
            return float(np.linalg.norm(con.a)) / root
        grad0 = float(np.linalg.norm(con.c + con.Q @ x_star))
        return (grad0 + qnorms[j] * t / root) / root

    def delta_at(t):
        terms = [m * root for _, m in mult_margins]
        for j, m in slack_margins:
            lip = lip_at(j, t)
            if lip > 0.0:
                # lip == 0 means g_j is constant near x*; it cannot flip.
                terms.append(m / lip)
        return min(terms) if terms else math.inf

    d0 = delta_at(0.0)
    radius_grows = any(qnorms.get(j, 0.0) > 0.0 for j, _ in slack_margins)
    if not radius_grows or not math.isfinite(d0):
        delta = d0
    else:
        lo, hi = 0.0, d0
        while hi - lo > _BISECT_RTOL * hi:
            mid = 0.5 * (lo + hi)
            if mid - delta_at(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        delta = lo

    best_val, best_j, best_branch = math.inf, None, None
    for j, m in mult_margins:
        val = m * root
        if val < best_val:
            best_val, best_j, best_branch = val, j, "multiplier"
    for j, m in slack_margins:
        lip = lip_at(j, delta if math.isfinite(delta) else 0.0)
        if lip > 0.0 and m / lip < best_val:
            best_val, best_j, best_branch = m / lip, j, "slack"

    lip_primal = tuple(
        (j, lip_at(j, delta if math.isfinite(delta) else 0.0))
        for j, _ in slack_margins
    )
    return StabilityRadius(
        float(delta),
        best_j,
        best_branch,
        lip_dual,
        lip_primal,
        tuple(slack_margins),
        tuple(mult_margins),
    )


@dataclass(frozen=True)
class PointOracle:
    """Solution oracle backed by one high-accuracy point.

    Used when no closed-form solution set is known: distances are
    measured to the point, the set is treated as the singleton, and the
    reduced distance is unavailable (so the restricted-to-reduced
    modulus cannot be estimated).
    """

    z_hat: PrimalDualPoint

    reduced_dist2 = None
    corner_witnesses = None

    def representative(self):
        return self.z_hat

    def dist2(self, z):
        return math.hypot(
            float(np.linalg.norm(np.asarray(z.x) - self.z_hat.x)),
            float(np.linalg.norm(np.asarray(z.y) - self.z_hat.y)),
        )

    def bounding_radius(self):
        return 0.0

    def sample_point(self, rng):
        return self.z_hat


def _vec(z):
    return np.concatenate([np.asarray(z.x, dtype=float), np.asarray(z.y, dtype=float)])


def _ball_draw(rng, center, radius):
    # Uniform draw from the closed Euclidean ball: uniform direction from
    # a normalized Gaussian, radius via the 1/dim power of a uniform.
    dim = center.size
    u = rng.standard_normal(dim)
    norm = float(np.linalg.norm(u))
    if norm == 0.0 or radius == 0.0:
        return center.copy()
    r = radius * rng.uniform() ** (1.0 / dim)
    return center + (r / norm) * u


def _ratio(p, z, denominator):
    if denominator <= 0.0:
        return None  # the point sits on the reference set, no ratio there
    value = saddle_dist(p, z).value
    if not math.isfinite(value):
        return None  # y has a negative entry, outside the domain
    return value / denominator


def _reject_loop(rng, num_samples, propose, accept):
    """num_samples accepted points, or a loud failure when the acceptance
    rate stays under 1 in 1000."""
    out = []
    draws = 0
    cap = max(10_000, 1_000 * num_samples)
    while len(out) < num_samples:
        if draws >= cap:
            raise RegionTooThinError(
                f"accepted {len(out)} of {draws} draws; "
                "target region is too thin to sample"
            )
        draws += 1
        z = propose()
        if accept(z):
            out.append(z)
    return out


@dataclass(frozen=True)
class ModulusSample:
    """One sampled sharpness constant: the smallest ratio of the
    saddle-subdifferential distance to a reference-set distance over
    num_samples points of the described region.  An upper bound on the
    true infimum."""

    name: str
    estimate: float
    num_samples: int
    region: str


@dataclass(frozen=True)
class ModuliEstimate:
    alpha_G: ModulusSample
    alpha_L: ModulusSample | None
    alpha_M: ModulusSample
    delta: float
    tau: float
    seed: int
    ordering_consistent: bool


def estimate_moduli(p, solution_oracle, partition, P, tau=2.0, num_samples=10_000, seed=0):
    """Sampled sharpness constants around the solution set.

    alpha_G: over points within Euclidean distance tau of the solution
      set, the ratio of the saddle-subdifferential distance to the
      distance to the solution set.
    alpha_L: same points and numerator, denominator replaced by the
      distance to the relaxed stationary set (only when the oracle
      provides ``reduced_dist2``; None otherwise).
    alpha_M: same ratio as alpha_G, restricted to points that carry the
      solution's sign pattern and lie within the stability radius: the
      P-ball of radius delta/2 intersected with the tau-region, with the
      off-active multipliers pinned to exact zero.

    Sampling is uniform in a covering Euclidean ball, rejected against
    the region predicates; for alpha_M the y entries of the inactive set
    are zeroed first, so the sampling measure there is the pushforward
    of the ball-uniform law.  Oracle corner witnesses, when available
    and inside the region, join the alpha_G/alpha_L sample sets so known
    worst corners are never missed.  tau == 0 makes every draw land on
    the solution set where no ratio exists, which raises
    EmptyEstimateError; acceptance below 1 in 1000 raises
    RegionTooThinError.
    """
    assert num_samples > 0, "need a positive sample count"
    assert tau >= 0.0
    if tau == 0.0:
        raise EmptyEstimateError(
            "tau = 0 confines sampling to the solution set itself, "
            "where every distance ratio is undefined"
        )
    oracle = solution_oracle
    rng = np.random.default_rng(seed)
    z_star = oracle.representative()
    center = _vec(z_star)
    n = p.n

    def unvec(v):
        return PrimalDualPoint(v[:n], v[n:])

    cover = oracle.bounding_radius() + tau
    points = _reject_loop(
        rng,
        num_samples,
        lambda: unvec(_ball_draw(rng, center, cover)),
        lambda z: oracle.dist2(z) <= tau,
    )
    witnesses = []
    if getattr(oracle, "corner_witnesses", None) is not None:
        witnesses = [w for w in oracle.corner_witnesses(_WITNESS_GAP) if oracle.dist2(w) <= tau]
    global_points = points + witnesses

    ratios_g = [r for z in global_points if (r := _ratio(p, z, oracle.dist2(z))) is not None]
    if not ratios_g:
        raise EmptyEstimateError(
            "no usable ratio: every sampled point sits on the solution set "
            "(is tau zero?)"
        )
    region_g = f"dist2(z, S*) <= {tau:.17g}"
    alpha_g = ModulusSample("alpha_G", min(ratios_g), len(global_points), region_g)

    reduced = getattr(oracle, "reduced_dist2", None)
    alpha_l = None
    if reduced is not None:
        ratios_l = [r for z in global_points if (r := _ratio(p, z, float(reduced(z)))) is not None]
        if not ratios_l:
            raise EmptyEstimateError("no usable ratio against the reduced set")
        alpha_l = ModulusSample(
            "alpha_L", min(ratios_l), len(global_points), region_g + " (reduced denominator)"
        )

    radius = stability_radius(p, z_star, partition, P)
    half = 0.5 * radius.delta
    _, lam_min = eigen_extremes(P)
    cover_d = oracle.bounding_radius() + tau
    if math.isfinite(half):
        cover_m = min(half / math.sqrt(lam_min), cover_d)
    else:
        cover_m = cover_d
    off_active = np.array([n + j - 1 for j in partition.inactive], dtype=int)

    def propose_m():
        v = _ball_draw(rng, center, cover_m)
        if off_active.size:
            v[off_active] = 0.0
        return unvec(v)

    def accept_m(z):
        if oracle.dist2(z) > tau:
            return False
        if math.isfinite(half):
            gap = seminorm_eval(P, z.x - z_star.x, z.y - z_star.y)
            if gap > half:
                return False
        return membership_M(p, partition, z)

    points_m = _reject_loop(rng, num_samples, propose_m, accept_m)
    ratios_m = [r for z in points_m if (r := _ratio(p, z, oracle.dist2(z))) is not None]
    if not ratios_m:
        raise EmptyEstimateError("no usable ratio inside the identifiable region")
    region_m = region_g + f" and ||z - z*||_P <= {half:.17g} and sign pattern held"
    alpha_m = ModulusSample("alpha_M", min(ratios_m), len(points_m), region_m)

    expected = [(alpha_m.estimate, alpha_g.estimate)]
    if alpha_l is not None:
        expected = [(alpha_m.estimate, alpha_l.estimate), (alpha_l.estimate, alpha_g.estimate)]
    ordering = all(big + _ORDERING_SLACK >= small for big, small in expected)

    return ModuliEstimate(
        alpha_G=alpha_g,
        alpha_L=alpha_l,
        alpha_M=alpha_m,
        delta=radius.delta,
        tau=float(tau),
        seed=int(seed),
        ordering_consistent=ordering,
    )


@dataclass(frozen=True)
class TwoStageFit:
    """Log-linear decay rates of the distance-to-reference column, fit
    separately before and from the identification iteration on.  Rates
    are per-iteration natural-log slopes (negative when decreasing);
    post_halflife is the iteration count that halves the distance at the
    post rate."""

    pre_rate: float
    post_rate: float
    post_halflife: float


def fit_two_stage(trace, k_star):
    """Least-squares slopes of log distP_ref against the iteration counter.

    The final record measures distance zero to itself and is excluded.
    Requires at least 20 recorded points from k_star on; with fewer the
    post-stage rate would mostly reflect recording granularity.  Zero
    distances are clamped at 1e-300 before the log.  The pre-stage rate
    is NaN when fewer than two records precede k_star.
    """
    assert k_star is not None, "no identification iteration to split at"
    recs = trace.records[:-1]
    pre = [(r.iter, r.distP_ref) for r in recs if r.iter < k_star]
    post = [(r.iter, r.distP_ref) for r in recs if r.iter >= k_star]
    if len(post) < _MIN_POST_POINTS:
        raise IdentificationError(
            f"{len(post)} recorded iterates from k* = {k_star} on; "
            f"need at least {_MIN_POST_POINTS} to fit a rate"
        )

    def slope(pairs):
        if len(pairs) < 2:
            return math.nan
        ks = np.array([k for k, _ in pairs], dtype=float)
        ds = np.log(np.maximum([d for _, d in pairs], _LOG_FLOOR))
        return float(np.polyfit(ks, ds, 1)[0])

    post_rate = slope(post)
    halflife = math.inf if post_rate == 0.0 else math.log(2.0) / abs(post_rate)
    return TwoStageFit(slope(pre), post_rate, halflife)


def predicted_counts(gamma, P, moduli, radius=None, dist0=None, eta=None):
    """Iteration-count predictions implied by sampled moduli.

    Returns report pairs: nu = gamma * lambda_max(P) / alpha_G and the
    contraction group size rho = ceil(e nu^2), the analogous local group
    size from alpha_M, and, when a radius, an initial distance and a
    stepsize are supplied, the predicted identification count

        (max(1, 1/alpha_L) * 8 lambda_max(P)^{3/2} dist0 / delta)^2
          + ceil(max_j L^y / (eta L^x_j))

    with the max over the inactive set; a constant g_j (L^x_j = 0) falls
    back to the effective slope 2 * margin_j / delta.  Sampled moduli
    overestimate the true constants, so these counts are optimistic and
    are reported without being checked against anything.
    """
    assert gamma is not None and gamma > 0.0
    lam_max, _ = eigen_extremes(P)
    out = []
    nu = gamma * lam_max / moduli.alpha_G.estimate
    out.append(("nu_global", nu))
    out.append(("rho_global", math.ceil(math.e * nu * nu)))
    nu_local = gamma * lam_max / moduli.alpha_M.estimate
    out.append(("rho_local", math.ceil(math.e * nu_local * nu_local)))
    if radius is not None and dist0 is not None and math.isfinite(radius.delta):
        alpha_lead = moduli.alpha_L.estimate if moduli.alpha_L is not None else moduli.alpha_G.estimate
        lead = max(1.0, 1.0 / alpha_lead) * 8.0 * lam_max ** 1.5 * dist0 / radius.delta
        k_identify = lead * lead
        if eta is not None and radius.lip_primal:
            margins = dict(radius.slack_margins)
            worst = 0.0
            for j, lip in radius.lip_primal:
                if lip <= 0.0:
                    lip = 2.0 * margins[j] / radius.delta
                worst = max(worst, radius.lip_dual / (eta * lip))
            k_identify += math.ceil(worst)
        out.append(("K_identify", k_identify))
    return out


def partition_report_pairs(partition):
    """Report rows for a partition, keyed by the conventional set names."""
    return [
        ("N", list(partition.inactive)),
        ("B_a", list(partition.binding)),
        ("B_d", list(partition.degenerate)),
        ("unclassified", list(partition.unclassified)),
        ("degenerate", partition.is_degenerate),
        ("eps", partition.eps),
    ]


def write_analysis_report(path, comment_lines, pairs):
    """Analysis report file: a text preamble plus machine-readable rows."""
    write_kv_report(path, ANALYSIS_HEADER, comment_lines, pairs)
