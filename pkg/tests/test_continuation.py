import numpy as np
import pytest

from gqc import (
    ContinuationOptions,
    analyze_branch,
    first_eigen,
    locate_fold,
    residual_P,
    trace_branch,
)
from gqc.solver import residual_scale

from conftest import make_problem


def test_trivial_branch_is_flat_zero(interval64):
    spec, ops = interval64
    problem = make_problem(spec, h="0", profile="A1")
    opts = ContinuationOptions(ds0=0.25, max_points=60)
    branch = trace_branch(problem, -2.0, ops, opts)
    assert branch.termination == "max_points"
    assert all(p.sup_norm <= 1e-12 for p in branch.points)
    assert not branch.folds
    lams = branch.lambdas
    gamma1 = first_eigen(problem.c.field, ops).gamma
    assert lams[0] == -2.0 and lams.max() >= gamma1 - 0.1  # sails past the eigenvalue
    analysis = analyze_branch(branch, gamma1)
    assert analysis.blowup_side == "none"
    assert analysis.fold_index is None


def test_fold_branch_structure(fold_demo):
    branch = fold_demo["branch"]
    gamma1 = first_eigen(fold_demo["problem"].c.field, fold_demo["ops"]).gamma
    lams = branch.lambdas
    # crosses lambda = 0 with finite norms on the lower sub-branch
    assert lams.min() < 0.0 < lams.max()
    # fold strictly inside (0, pi^2), safely below the eigenvalue
    assert branch.folds
    assert 0.0 < branch.max_lambda() <= gamma1 - 0.05
    # the recorded fold index sits at a sign change of the lambda increments
    i = branch.folds[0]
    d0 = branch.points[i].lam - branch.points[i - 1].lam
    d1 = branch.points[i + 1].lam - branch.points[i].lam
    assert d0 * d1 < 0.0
    # norm-cap termination on the right of the axis
    assert branch.termination == "norm_cap"
    assert branch.points[-1].lam > 0.0
    # past the fold the norms increase while lambda falls back toward 0+
    i = branch.folds[0]
    upper = branch.points[i:]
    assert all(b.sup_norm > a.sup_norm for a, b in zip(upper, upper[1:]))
    assert all(b.lam < a.lam for a, b in zip(upper[1:], upper[2:]))
    # nonnegative solutions along the branch
    assert min(float(p.u.values.min()) for p in branch.points) >= -1e-8


def test_branch_points_reverify(fold_demo):
    branch = fold_demo["branch"]
    problem = fold_demo["problem"]
    ops = fold_demo["ops"]
    tol0 = fold_demo["opts"].solve.tol_residual
    for p in branch.points[:: max(1, len(branch.points) // 12)]:
        prob = problem.with_lambda(p.lam)
        resid = residual_P(p.u, prob, ops)
        scale = residual_scale(p.u.values, prob.d_values(), prob.mu.values,
                               prob.h.values, ops)
        assert np.max(np.abs(resid.values)) <= tol0 * (1.0 + scale)
        # stored norms match recomputation
        assert p.sup_norm == pytest.approx(np.max(np.abs(p.u.values)), abs=1e-12)
        h10 = np.sqrt(ops.energy_product(p.u.values, p.u.values))
        assert p.h10_norm == pytest.approx(h10, abs=1e-12 * (1 + h10))


def test_branch_step_size_invariant(fold_demo):
    branch = fold_demo["branch"]
    for prev, cur in zip(branch.points[1:], branch.points[2:]):
        if cur.ds > 0:
            assert cur.s - prev.s <= 2.0 * cur.ds + 1e-12


def test_fold_bisection_location(fold_demo):
    branch = fold_demo["branch"]
    opts = fold_demo["opts"]
    lam_fold, sigma = locate_fold(branch, fold_demo["problem"], fold_demo["ops"], opts)
    assert lam_fold == pytest.approx(branch.max_lambda(), abs=1e-3)
    i = branch.folds[0]
    assert 0.0 <= sigma <= branch.points[i + 1].s - branch.points[i - 1].s


def test_two_solution_extraction(fold_demo):
    branch = fold_demo["branch"]
    problem = fold_demo["problem"]
    ops = fold_demo["ops"]
    gamma1 = first_eigen(problem.c.field, ops).gamma
    lam = 0.5 * branch.max_lambda()
    analysis = analyze_branch(branch, gamma1, problem=problem, ops=ops,
                              opts=fold_demo["opts"], two_solution_lambda=lam)
    pair = analysis.pair
    assert pair is not None
    assert pair.sup_gap >= 1e-2
    assert np.min(pair.u_low.values) >= -1e-8
    assert np.min(pair.u_high.values) >= -1e-8
    for u in (pair.u_low, pair.u_high):
        resid = residual_P(u, problem.with_lambda(lam), ops)
        scale = residual_scale(u.values, lam * problem.c.values,
                               problem.mu.values, problem.h.values, ops)
        assert np.max(np.abs(resid.values)) <= 1e-9 * (1.0 + scale)


def test_two_solution_errors(fold_demo):
    branch = fold_demo["branch"]
    problem = fold_demo["problem"]
    ops = fold_demo["ops"]
    with pytest.raises(ValueError, match="outside"):
        analyze_branch(branch, 9.8, problem=problem, ops=ops,
                       two_solution_lambda=branch.max_lambda() + 1.0)
    with pytest.raises(ValueError, match="outside"):
        analyze_branch(branch, 9.8, problem=problem, ops=ops,
                       two_solution_lambda=-0.5)


def test_no_fold_extraction_raises(interval64):
    spec, ops = interval64
    problem = make_problem(spec, h="0")
    branch = trace_branch(problem, -1.0, ops, ContinuationOptions(max_points=20))
    with pytest.raises(ValueError, match="fold"):
        analyze_branch(branch, 9.8, problem=problem, ops=ops, two_solution_lambda=0.5)


def test_blowup_branch_left_side(blowup_demo):
    branch = blowup_demo["branch"]
    assert branch.termination == "norm_cap"
    assert branch.points[-1].lam < 0.0
    assert not branch.folds
    # norms grow monotonically toward the axis on this family
    sups = branch.sup_norms
    assert np.all(np.diff(sups) > -1e-12)
    analysis = analyze_branch(branch, 0.0219)
    assert analysis.blowup_side == "left"


def test_apriori_shadow_on_fold_branch(fold_demo):
    # away from the axis (lam >= fold/4) the branch norms stay bounded by a
    # modest family constant; the blow-up window is confined to small lambda
    branch = fold_demo["branch"]
    lam_quarter = branch.max_lambda() / 4.0
    segment = [p.sup_norm for p in branch.points if p.lam >= lam_quarter]
    assert segment
    assert max(segment) <= 5.0


def test_branch_with_vanishing_c(interval64):
    # c supported on half the interval: the restricted smallness condition
    # governs solvability and the branch still folds below the weighted
    # eigenvalue
    spec, ops = interval64
    problem = make_problem(spec, c="indicator(1, 0.5, 1.0)",
                           h="0.2*sin(pi*x1)", profile="A1")
    from gqc import check_smallness

    assert check_smallness(problem, "Hc").holds
    gamma1 = first_eigen(problem.c.field, ops).gamma
    branch = trace_branch(problem, -2.0, ops,
                          ContinuationOptions(norm_cap=3.0, max_points=300))
    assert branch.termination == "norm_cap"
    assert branch.folds
    lams = branch.lambdas
    assert lams.min() < 0.0 < lams.max()
    assert branch.max_lambda() < gamma1


def test_branch_with_variable_mu(interval64):
    # the tracer only needs the general-mu Newton machinery, so spatially
    # varying mu folds and caps like the constant case
    spec, ops = interval64
    problem = make_problem(spec, mu="1 + 0.5*sin(pi*x1)",
                           h="0.1*sin(pi*x1)", profile="A2")
    branch = trace_branch(problem, -2.0, ops,
                          ContinuationOptions(norm_cap=2.0, max_points=300))
    assert branch.termination == "norm_cap"
    assert branch.folds
    assert branch.points[-1].lam > 0.0


def test_lambda_min_termination(interval64):
    # with a huge cap the tracer eventually leaves the window on the left
    # (at this resolution the large-amplitude segment flattens out), which
    # exercises the lambda_min exit
    spec, ops = interval64
    problem = make_problem(spec, h="0.1*sin(pi*x1)", profile="A2")
    branch = trace_branch(problem, -2.0, ops,
                          ContinuationOptions(norm_cap=1e3, lambda_min=-30.0,
                                              max_points=2000))
    assert branch.termination == "lambda_min"
    assert branch.points[-1].lam < -30.0


def test_empty_branch_analysis_raises():
    from gqc.continuation import Branch

    with pytest.raises(ValueError):
        analyze_branch(Branch(), 1.0)


def test_seed_failure_reported(square32):
    from gqc.solver import SolverError

    spec, ops = square32
    problem = make_problem(spec, h="6*pi^2", profile="A2")  # unsolvable at -2
    with pytest.raises(SolverError, match="seed"):
        trace_branch(problem, -2.0, ops, ContinuationOptions(max_points=20))
