"""Nonlinear solvers for the quadratic-gradient equation with general mu(x).

Every equation handled here has the shape

    L u - d(x) u - mu(x) |grad u|^2 - h(x) = 0

with the assembled Dirichlet Laplacian L: the parameterized problem uses
d = lam * c, the pivot equation of the fixed-point map uses d = -1, and
the auxiliary bound problems use d = lam * c with constant mu. One damped
Newton core serves all of them; the Jacobian linearizes the quadratic
gradient term exactly, 2 * diag(mu * D_i u) * D_i with the same one-sided
boundary stencils, which preserves quadratic local convergence.

Convergence is declared on the sup norm of the residual relative to the
magnitude of the equation's terms: near large-amplitude solutions the
gradient term reaches 1e7 and float64 cancellation floors the achievable
absolute residual around 1e-9, so a purely absolute tolerance would brand
correct solutions as failures. The effective tolerance actually enforced
is recorded in the report.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import DiscreteOperators, GridFunction, grad_sq_values
from .problem import CoefficientSpec, ProblemData


class SolverError(RuntimeError):
    pass


class EnclosureError(SolverError):
    """The computed bounds failed to bracket the solution."""


@dataclass
class SolveOptions:
    tol_residual: float = 1e-10
    max_newton: int = 50
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    min_step: float = 1e-8
    max_fixed_point: int = 200
    fp_tol: float = 1e-10

    def __post_init__(self):
        if self.tol_residual <= 0 or self.fp_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_newton < 1 or self.max_fixed_point < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    final_residual: float
    step_history: list[tuple[float, float]] = field(default_factory=list)
    failure_reason: str | None = None
    tolerance_used: float = 0.0

    def to_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "final_residual": float(self.final_residual),
            "failure_reason": self.failure_reason,
            "tolerance_used": float(self.tolerance_used),
            "step_history": [[float(t), float(r)] for t, r in self.step_history],
        }


def quasilinear_residual(
    u: np.ndarray, d: np.ndarray, mu: np.ndarray, h: np.ndarray, ops: DiscreteOperators
) -> np.ndarray:
    return ops.laplacian @ u - d * u - mu * grad_sq_values(u, ops) - h


def quasilinear_jacobian(
    u: np.ndarray, d: np.ndarray, mu: np.ndarray, ops: DiscreteOperators
) -> sp.csc_matrix:
    J = ops.laplacian - sp.diags(d)
    for D in ops.gradient:
        J = J - sp.diags(2.0 * mu * (D @ u)) @ D
    return J.tocsc()


def residual_scale(
    u: np.ndarray, d: np.ndarray, mu: np.ndarray, h: np.ndarray, ops: DiscreteOperators
) -> float:
    """Magnitude of the competing terms; the residual tolerance is relative to it."""
    return float(
        np.max(np.abs(ops.laplacian @ u), initial=0.0)
        + np.max(np.abs(d * u), initial=0.0)
        + np.max(np.abs(mu * grad_sq_values(u, ops)), initial=0.0)
        + np.max(np.abs(h), initial=0.0)
    )


def newton_quasilinear(
    u0: np.ndarray,
    d: np.ndarray,
    mu: np.ndarray,
    h: np.ndarray,
    ops: DiscreteOperators,
    opts: SolveOptions,
) -> tuple[np.ndarray, SolveReport]:
    """Damped Newton with Armijo backtracking on the residual 2-norm."""
    u = np.asarray(u0, dtype=float).copy()
    history: list[tuple[float, float]] = []

    def effective_tol(vals: np.ndarray) -> float:
        return opts.tol_residual * (1.0 + residual_scale(vals, d, mu, h, ops))

    R = quasilinear_residual(u, d, mu, h, ops)
    tol = effective_tol(u)
    if float(np.max(np.abs(R), initial=0.0)) <= tol:
        return u, SolveReport(True, 0, float(np.max(np.abs(R), initial=0.0)),
                              history, None, tol)

    for it in range(1, opts.max_newton + 1):
        try:
            lu = spla.splu(quasilinear_jacobian(u, d, mu, ops))
            delta = lu.solve(-R)
        except RuntimeError:
            return u, SolveReport(False, it, float(np.max(np.abs(R))), history,
                                  "diverged", tol)
        if not np.all(np.isfinite(delta)):
            return u, SolveReport(False, it, float(np.max(np.abs(R))), history,
                                  "diverged", tol)
        r0 = float(np.linalg.norm(R))
        t = 1.0
        accepted = False
        while t >= opts.min_step:
            u_try = u + t * delta
            R_try = quasilinear_residual(u_try, d, mu, h, ops)
            if np.all(np.isfinite(R_try)) and float(np.linalg.norm(R_try)) <= (
                1.0 - opts.armijo_slope * t
            ) * r0:
                accepted = True
                break
            t *= opts.armijo_shrink
        if not accepted:
            return u, SolveReport(False, it, float(np.max(np.abs(R))), history,
                                  "line_search_stall", tol)
        u, R = u_try, R_try
        rsup = float(np.max(np.abs(R), initial=0.0))
        history.append((t, float(np.linalg.norm(R))))
        tol = effective_tol(u)
        if rsup <= tol:
            return u, SolveReport(True, it, rsup, history, None, tol)
        if not np.isfinite(rsup) or rsup > 1e150:
            return u, SolveReport(False, it, rsup, history, "diverged", tol)
    return u, SolveReport(False, opts.max_newton, float(np.max(np.abs(R))), history,
                          "max_iter", tol)


# ---------------------------------------------------------------------------
# public operations on problems


def _mu_values(mu, spec) -> np.ndarray:
    if isinstance(mu, CoefficientSpec):
        return mu.values
    if isinstance(mu, GridFunction):
        return mu.values
    arr = np.asarray(mu, dtype=float)
    if arr.ndim == 0:
        return np.full(spec.n_interior, float(arr))
    return arr


def residual_P(u: GridFunction, problem: ProblemData, ops: DiscreteOperators) -> GridFunction:
    """Nodewise residual  L u - lam c u - mu |grad u|^2 - h."""
    ops.check_spec(u)
    vals = quasilinear_residual(
        u.values, problem.d_values(), problem.mu.values, problem.h.values, ops
    )
    return GridFunction(u.spec, vals)


def newton_solve(
    problem: ProblemData,
    u0: GridFunction,
    ops: DiscreteOperators,
    opts: SolveOptions | None = None,
) -> tuple[GridFunction, SolveReport]:
    opts = opts or SolveOptions()
    ops.check_spec(u0)
    vals, report = newton_quasilinear(
        u0.values, problem.d_values(), problem.mu.values, problem.h.values, ops, opts
    )
    return GridFunction(u0.spec, vals), report


def K_mu(
    f: GridFunction,
    mu,
    ops: DiscreteOperators,
    opts: SolveOptions | None = None,
    u0: GridFunction | None = None,
) -> tuple[GridFunction, SolveReport]:
    """Solution operator of the pivot equation  L u + u - mu |grad u|^2 = f."""
    opts = opts or SolveOptions()
    ops.check_spec(f)
    muv = _mu_values(mu, f.spec)
    d = np.full(f.spec.n_interior, -1.0)
    start = u0.values if u0 is not None else np.zeros(f.spec.n_interior)
    vals, report = newton_quasilinear(start, d, muv, f.values, ops, opts)
    return GridFunction(f.spec, vals), report


def fixed_point_T(
    problem: ProblemData,
    u0: GridFunction,
    ops: DiscreteOperators,
    opts: SolveOptions | None = None,
) -> tuple[GridFunction, SolveReport]:
    """Picard iteration of the fixed-point map u -> pivot_solve((lam c + 1) u + h).

    Fixed points solve the parameterized problem; the returned report is
    cross-checked against the direct residual.
    """
    opts = opts or SolveOptions()
    ops.check_spec(u0)
    c = problem.c.values
    h = problem.h.values
    u = u0.copy()
    increments: list[tuple[float, float]] = []
    converged = False
    it = 0
    for it in range(1, opts.max_fixed_point + 1):
        f = GridFunction(problem.spec, (problem.lam * c + 1.0) * u.values + h)
        u_next, inner = K_mu(f, problem.mu, ops, opts, u0=u)
        if not inner.converged:
            resid = residual_P(u, problem, ops)
            return u, SolveReport(False, it, float(np.max(np.abs(resid.values))),
                                  increments, inner.failure_reason or "diverged",
                                  inner.tolerance_used)
        inc = float(np.max(np.abs(u_next.values - u.values), initial=0.0))
        increments.append((1.0, inc))
        u = u_next
        if inc <= opts.fp_tol * (1.0 + float(np.max(np.abs(u.values), initial=0.0))):
            converged = True
            break
    resid_vals = residual_P(u, problem, ops).values
    rsup = float(np.max(np.abs(resid_vals), initial=0.0))
    scale = residual_scale(u.values, problem.d_values(), problem.mu.values, h, ops)
    tol = 10.0 * opts.tol_residual * (1.0 + scale)
    if converged and rsup > tol:
        return u, SolveReport(False, it, rsup, increments, "diverged", tol)
    if not converged:
        return u, SolveReport(False, it, rsup, increments, "max_iter", tol)
    return u, SolveReport(True, it, rsup, increments, None, tol)


def _solve_auxiliary_bound(
    d: np.ndarray, mu_const: float, h_part: np.ndarray, problem: ProblemData,
    ops: DiscreteOperators, opts: SolveOptions,
) -> GridFunction:
    """Nonnegative solution of  L u = d u + mu_const |grad u|^2 + h_part."""
    spec = problem.spec
    if mu_const <= 1e-13:
        mat = (ops.laplacian - sp.diags(d)).tocsc()
        vals = spla.splu(mat).solve(h_part)
        return GridFunction(spec, vals)
    from .transform import TransformedProblem, solve_transformed

    tp = TransformedProblem(
        d_field=GridFunction(spec, np.minimum(d, 0.0)),
        mu=float(mu_const),
        h_field=GridFunction(spec, h_part),
    )
    _, u = solve_transformed(tp, ops, opts)
    return u


def monotone_enclosure(
    problem: ProblemData,
    ops: DiscreteOperators,
    opts: SolveOptions | None = None,
    slack: float = 1e-8,
) -> tuple[GridFunction, GridFunction, GridFunction, SolveReport]:
    """Bracket a solution between a lower and an upper solution.

    The upper bound solves the problem with mu replaced by sup mu^+ and h
    by h^+; the lower bound is minus the solution of the (sup mu^-, h^-)
    problem. A Newton solve from the midpoint then lands between them;
    the ordering is asserted to ``slack``.
    """
    opts = opts or SolveOptions()
    d = problem.d_values()
    if float(np.max(d, initial=0.0)) > 0.0:
        raise SolverError("enclosure needs lam * c <= 0 at every node")
    beta = _solve_auxiliary_bound(d, problem.mu_plus_sup, problem.h_plus, problem, ops, opts)
    alpha_pos = _solve_auxiliary_bound(d, problem.mu_minus_sup, problem.h_minus, problem, ops, opts)
    alpha = GridFunction(problem.spec, -alpha_pos.values)
    mid = GridFunction(problem.spec, 0.5 * (alpha.values + beta.values))
    u, report = newton_solve(problem, mid, ops, opts)
    if not report.converged:
        # the upper bound itself is often the best start (for constant mu
        # with h >= 0 it already solves the problem exactly)
        u, report = newton_solve(problem, beta, ops, opts)
    if report.converged:
        lower_gap = float(np.min(u.values - alpha.values))
        upper_gap = float(np.min(beta.values - u.values))
        if lower_gap < -slack or upper_gap < -slack:
            node = int(np.argmin(np.minimum(u.values - alpha.values, beta.values - u.values)))
            raise EnclosureError(
                f"ordering violated at node {node}: "
                f"lower gap {lower_gap:.3e}, upper gap {upper_gap:.3e}"
            )
    return alpha, beta, u, report


def solve_cascade(
    problem: ProblemData,
    ops: DiscreteOperators,
    opts: SolveOptions | None = None,
    u0: GridFunction | None = None,
) -> tuple[GridFunction | None, str | None, list[dict]]:
    """Try Newton, then the fixed-point iteration, then the enclosure.

    Returns (solution or None, winning strategy name, per-strategy
    reports). The enclosure only applies when lam * c <= 0.
    """
    opts = opts or SolveOptions()
    start = u0 if u0 is not None else GridFunction.zeros(problem.spec)
    attempts: list[dict] = []

    try:
        u, rep = newton_solve(problem, start, ops, opts)
        attempts.append({"strategy": "newton", **rep.to_dict()})
        if rep.converged:
            return u, "newton", attempts
    except Exception as exc:
        attempts.append({"strategy": "newton", "converged": False, "error": str(exc)})
    try:
        u, rep = fixed_point_T(problem, start, ops, opts)
        attempts.append({"strategy": "fixed_point", **rep.to_dict()})
        if rep.converged:
            return u, "fixed_point", attempts
    except Exception as exc:
        attempts.append({"strategy": "fixed_point", "converged": False, "error": str(exc)})
    if float(np.max(problem.d_values(), initial=0.0)) <= 0.0:
        try:
            _, _, u, rep = monotone_enclosure(problem, ops, opts)
            attempts.append({"strategy": "enclosure", **rep.to_dict()})
            if rep.converged:
                return u, "enclosure", attempts
        except Exception as exc:
            attempts.append({"strategy": "enclosure", "converged": False, "error": str(exc)})
    return None, None, attempts


@dataclass
class UniquenessReport:
    lam: float
    k: int
    seed: int
    converged_count: int
    max_pairwise_distance: float
    solutions: list[np.ndarray]
    reports: list[SolveReport]

    def cluster_representatives(self, separation: float = 1e-6) -> list[list[int]]:
        """Greedy sup-norm clustering of the converged solutions."""
        clusters: list[list[int]] = []
        for i, sol in enumerate(self.solutions):
            for members in clusters:
                rep = self.solutions[members[0]]
                if float(np.max(np.abs(sol - rep), initial=0.0)) <= separation:
                    members.append(i)
                    break
            else:
                clusters.append([i])
        return clusters


def _worker_count(k: int) -> int:
    env = os.environ.get("GQC_THREADS", "").strip()
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            cap = 1
        return min(k, cap)
    return 1


def _first_mode_shape(problem: ProblemData) -> np.ndarray:
    """Product of half-period sines over the box, normalized to sup 1."""
    pts = problem.spec.interior_points()
    shape = np.ones(problem.spec.n_interior)
    for axis in range(problem.spec.dim):
        lo, hi = problem.spec.bounds[axis]
        shape *= np.sin(np.pi * (pts[:, axis] - lo) / (hi - lo))
    m = float(np.max(np.abs(shape), initial=0.0))
    return shape / m if m > 0 else shape


def multi_start(
    problem: ProblemData,
    k: int,
    seed: int,
    ops: DiscreteOperators,
    opts: SolveOptions | None = None,
) -> UniquenessReport:
    """Newton solves from k seeded starts; evidence for uniqueness or
    multiplicity.

    Two of every three starts are nodewise uniform in [-1, 1] scaled by
    1/(1 + sup|h|); the rest are smooth first-mode ramps reaching a few
    times that amplitude. Pure noise never lands in the basin of large
    smooth solutions (the first damped Newton step smooths it into the
    small-solution basin), so the ramps supply the diversity that makes a
    second solution visible when one exists. Results are collected in
    start-index order, so the report does not depend on the worker count
    (GQC_THREADS caps parallelism).
    """
    if k < 2:
        raise ValueError("need at least 2 starts")
    opts = opts or SolveOptions()
    rng = np.random.default_rng(seed)
    amp = 1.0 / (1.0 + float(np.max(np.abs(problem.h.values), initial=0.0)))
    mode = _first_mode_shape(problem)
    n_smooth = max(1, k // 3)
    starts = []
    smooth_idx = 0
    for i in range(k):
        if i % 3 == 2:
            smooth_idx += 1
            t = 4.0 * amp * smooth_idx / n_smooth
            starts.append(GridFunction(problem.spec, t * mode))
        else:
            starts.append(
                GridFunction(problem.spec, amp * rng.uniform(-1.0, 1.0, problem.spec.n_interior))
            )

    def run(u0: GridFunction) -> tuple[GridFunction, SolveReport]:
        return newton_solve(problem, u0, ops, opts)

    workers = _worker_count(k)
    if workers == 1:
        results = [run(u0) for u0 in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))

    solutions = [u.values for (u, rep) in results if rep.converged]
    reports = [rep for (_, rep) in results]
    max_dist = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            max_dist = max(max_dist, float(np.max(np.abs(solutions[i] - solutions[j]))))
    return UniquenessReport(
        lam=problem.lam, k=k, seed=seed, converged_count=len(solutions),
        max_pairwise_distance=max_dist, solutions=solutions, reports=reports,
    )
