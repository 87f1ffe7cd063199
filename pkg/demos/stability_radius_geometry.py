"""How large a neighborhood keeps the active set readable.

Around a solution there is a ball inside which no inactive constraint
can become tight and no binding multiplier can cross zero, so any
iterate that lands there wears the correct activity pattern on its
sleeve.  For affine constraints the radius is a minimum of closed-form
margins; a quadratic constraint makes its own Lipschitz bound grow
with the radius, turning the computation into a fixed-point problem
solved by bisection.

The script works through both cases and cross-checks the quadratic one
against a hand-derived value.

Run from the repository root:

    python3 demos/stability_radius_geometry.py
"""

import math

import numpy as np

from saddlekit import (
    AffineConstraint,
    PrimalDualPoint,
    ProblemSpec,
    PSeminorm,
    QuadraticConstraint,
    builtin,
    classify,
    stability_radius,
)

# affine case: every margin is a constant over the ball --------------------

desc = builtin("rotated-house")
z_star = desc.known_solution.representative()
partition = classify(desc.spec, z_star)
P = PSeminorm.identity(desc.spec.n, desc.spec.m)
radius = stability_radius(desc.spec, z_star, partition, P)
print("rotated-house (all constraints affine):")
print(f"  delta = {radius.delta}")
print(f"  binding constraint {radius.binding_index}, {radius.branch} branch")
print(f"  slack margins {radius.slack_margins}")
print(f"  multiplier margins {radius.mult_margins}")
print()

# the radius lives in the P geometry: shrinking P by 4 halves delta
P_quarter = PSeminorm.scaled_identity(4.0, desc.spec.n, desc.spec.m)
shrunk = stability_radius(desc.spec, z_star, partition, P_quarter)
print(f"  same point, P = I/4: delta = {shrunk.delta} (half of the above)")
print()

# quadratic case: the margin-to-Lipschitz ratio moves with t ----------------

# minimize x1 with one binding halfspace and one slack ball constraint
#   -x1 <= 2            binding at x* = (-2, 0), multiplier 1
#   0.5 ||x||^2 <= 3    slack by margin 1, gradient grows with the radius
ball = ProblemSpec(
    c=np.array([1.0, 0.0]),
    Q=None,
    constraints=(
        AffineConstraint(np.array([-1.0, 0.0]), 2.0),
        QuadraticConstraint(np.zeros(2), np.eye(2), 3.0),
    ),
)
z_ball = PrimalDualPoint(np.array([-2.0, 0.0]), np.array([1.0, 0.0]))
part_ball = classify(ball, z_ball)
rad_ball = stability_radius(ball, z_ball, part_ball, PSeminorm.identity(2, 2))

# by hand: the ball constraint has margin 1 and Lipschitz bound
# L(t) = |x*| + t = 2 + t over the radius-t ball, so delta solves
# t (2 + t) = 1, i.e. delta = sqrt(2) - 1
print("halfspace + ball instance (one quadratic constraint):")
print(f"  delta = {rad_ball.delta}")
print(f"  closed form sqrt(2) - 1 = {math.sqrt(2.0) - 1.0}")
assert abs(rad_ball.delta - (math.sqrt(2.0) - 1.0)) <= 1e-9
print(f"  binding constraint {rad_ball.binding_index} ({rad_ball.branch} branch)")
print()

print("Any iterate within delta of the solution set shows the exact")
print("activity pattern of the limit, which is what makes finite-time")
print("identification certifiable from a trace.")
