import numpy as np
import pytest

from gqc import (
    ContinuationOptions,
    GridSpec,
    ProblemData,
    build_operators,
    parse_coefficient,
    trace_branch,
)

DEMO_DIR = None  # set lazily below


def make_problem(spec, c="1", mu="1", h="0", lam=-1.0, profile="A1", p_exponent=2.0):
    def coeff(src):
        if isinstance(src, str):
            return parse_coefficient(src, spec)
        from gqc.problem import CoefficientSpec

        return CoefficientSpec.from_values(np.asarray(src, dtype=float), spec)

    return ProblemData(
        spec=spec, c=coeff(c), mu=coeff(mu), h=coeff(h),
        lam=lam, profile=profile, p_exponent=p_exponent,
    )


@pytest.fixture(scope="session")
def interval64():
    spec = GridSpec(1, ((0.0, 1.0),), (64,))
    return spec, build_operators(spec)


@pytest.fixture(scope="session")
def square32():
    spec = GridSpec(2, ((0.0, 1.0), (0.0, 1.0)), (32, 32))
    return spec, build_operators(spec)


@pytest.fixture(scope="session")
def square64():
    spec = GridSpec(2, ((0.0, 1.0), (0.0, 1.0)), (64, 64))
    return spec, build_operators(spec)


@pytest.fixture(scope="session")
def fold_demo(interval64):
    """The folded family (c=1, mu=1, h=0.1 sin(pi x), n=64) traced once."""
    spec, ops = interval64
    problem = make_problem(spec, h="0.1*sin(pi*x1)", profile="A2")
    opts = ContinuationOptions(norm_cap=3.0, max_points=400)
    branch = trace_branch(problem, -2.0, ops, opts)
    return {"spec": spec, "ops": ops, "problem": problem, "opts": opts, "branch": branch}


@pytest.fixture(scope="session")
def blowup_demo():
    """The H0-violating family on the (0,30)^2 box traced once."""
    spec = GridSpec(2, ((0.0, 30.0), (0.0, 30.0)), (32, 32))
    ops = build_operators(spec)
    problem = make_problem(spec, h="pi^2/150", profile="A2")
    opts = ContinuationOptions(norm_cap=2.0, max_points=400)
    branch = trace_branch(problem, -2.0, ops, opts)
    return {"spec": spec, "ops": ops, "problem": problem, "opts": opts, "branch": branch}
