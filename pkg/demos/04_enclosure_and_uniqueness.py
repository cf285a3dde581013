"""Bracketing a solution and probing uniqueness by multi-start.

For lam * c <= 0 the solution is pinched between a lower and an upper
solution built from the sign parts of the data. Seeded multi-start then
gives numerical evidence for uniqueness on the left of the axis and for
multiplicity on the right of it.
"""

import numpy as np

from gqc import (
    ContinuationOptions,
    GridSpec,
    ProblemData,
    build_operators,
    monotone_enclosure,
    multi_start,
    parse_coefficient,
    trace_branch,
)

spec = GridSpec(1, ((0.0, 1.0),), (64,))
ops = build_operators(spec)


def problem_with(h_expr, lam):
    return ProblemData(
        spec=spec,
        c=parse_coefficient("1", spec),
        mu=parse_coefficient("1", spec),
        h=parse_coefficient(h_expr, spec),
        lam=lam,
        profile="A2" if "-" not in h_expr else "A1",
    )


# enclosure on a mixed-sign forcing
problem = ProblemData(
    spec=spec,
    c=parse_coefficient("1", spec),
    mu=parse_coefficient("0.5 + 0.25*sin(pi*x1)", spec),
    h=parse_coefficient("0.2*sin(2*pi*x1)", spec),
    lam=-1.0,
)
alpha, beta, u, rep = monotone_enclosure(problem, ops)
print("enclosure on mixed-sign data:")
print(f"  min(u - alpha) = {np.min(u.values - alpha.values):+.3e}")
print(f"  min(beta - u)  = {np.min(beta.values - u.values):+.3e}")
print(f"  sup alpha = {np.max(np.abs(alpha.values)):.4f}, "
      f"sup u = {np.max(np.abs(u.values)):.4f}, sup beta = {np.max(beta.values):.4f}")

# uniqueness on the left of the axis: all starts meet at one solution
problem = problem_with("sin(pi*x1)", -1.0)
report = multi_start(problem, 12, 0, ops)
print(f"\nlam = -1: {report.converged_count}/12 starts converged, "
      f"max pairwise distance {report.max_pairwise_distance:.2e}")

# multiplicity on the right: at half the fold two clusters appear
branch = trace_branch(problem, -2.0, ops,
                      ContinuationOptions(norm_cap=3.0, max_points=300))
lam_half = 0.5 * branch.max_lambda()
report = multi_start(problem.with_lambda(lam_half), 20, 0, ops)
clusters = report.cluster_representatives(1e-3)
sups = sorted(float(np.max(np.abs(report.solutions[c[0]]))) for c in clusters)
print(f"lam = {lam_half:.4f} (half the fold): {len(clusters)} clusters, "
      f"sup norms {['%.4f' % s for s in sups]}")
