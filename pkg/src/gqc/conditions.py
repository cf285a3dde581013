"""Checkable hypotheses: eigenvalues, smallness conditions, exponent witnesses.

Every check reports a margin rather than a bare boolean so sweeps can see
how close an instance sits to a threshold. The smallness conditions all
reduce to weighted Rayleigh suprema: the infimum of

    integral(|grad u|^2 - M * w(x) * u^2)   over unit-energy u in a subspace

is positive exactly when M * nu < 1, where nu is the largest eigenvalue of
the pencil  diag(w) phi = nu L phi  restricted to the subspace. Subspaces
are node masks: the discrete stand-in for fields vanishing wherever the
coefficient c is supported is the mask |c| <= tau_c.

Discrete Rayleigh quotients carry O(h^2) error relative to the continuum,
which is documented and not compensated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import DiscreteOperators, GridFunction
from .problem import ProblemData

CONDITION_TAGS = ("H0", "Hc", "H", "FeroneMurat", "k1")

EIGEN_INCREMENT_TOL = 1e-10
EIGEN_RESIDUAL_REL = 1e-8
EIGEN_MAX_ITER = 10000


class EigenError(RuntimeError):
    """Eigenvalue iteration failed to converge or the weight is degenerate."""


@dataclass
class EigenResult:
    """First eigenpair of  laplacian phi = gamma * diag(c) phi.

    ``phi`` is normalized to unit Dirichlet energy and oriented positive;
    ``residual`` is the 2-norm of  L phi - gamma c phi.
    """

    gamma: float
    phi: GridFunction
    residual: float
    iterations: int


@dataclass
class ConditionReport:
    condition: str
    holds: bool
    infimum_estimate: float
    sub_infima: tuple[float, float] | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "holds": bool(self.holds),
            "margin": float(self.infimum_estimate),
            "sub_infima": list(self.sub_infima) if self.sub_infima is not None else None,
            "note": self.note,
        }


@dataclass
class ExponentWitness:
    """Exponents (alpha, r, q, tau) satisfying the a-priori-bound arithmetic.

    q = 1 + r + (1 + theta*alpha)/(1 - alpha) and
    tau = (1/q) * alpha/(1 - alpha), subject to
    1/p <= q <= 2*dim*(p-1) / (p*(dim - 2 + 2*tau)) and 1 - alpha < 2/q.
    """

    p: float
    dim: int
    theta: float
    alpha: float
    r: float
    q: float
    tau: float

    def to_dict(self) -> dict:
        return {
            "p": self.p, "dim": self.dim, "theta": self.theta,
            "alpha": self.alpha, "r": self.r, "q": self.q, "tau": self.tau,
        }


def first_eigen(c: GridFunction, ops: DiscreteOperators) -> EigenResult:
    """Smallest eigenvalue of the weighted Dirichlet problem.

    Inverse power iteration with shift 0 on the pencil L phi = gamma c phi:
    the Laplacian is factorized once and iterates x <- L^{-1}(c x) converge
    to the largest eigenvalue of L^{-1} diag(c), whose reciprocal is
    gamma_1. The all-ones start vector makes the run deterministic; since
    L^{-1} has positive entries the iterates stay strictly positive, which
    realizes the single-signedness of the first eigenfunction.
    """
    ops.check_spec(c)
    cvals = c.values
    if np.min(cvals) < 0.0:
        raise EigenError("weight c must be nonnegative")
    if np.max(cvals, initial=0.0) <= 0.0:
        raise EigenError("weight c vanishes identically; no eigenvalue")

    lu = ops.lap_solver()
    L = ops.laplacian
    x = np.ones(c.spec.n_interior)
    x /= np.linalg.norm(x)
    gamma_prev = np.inf
    gamma = np.inf
    iterations = 0
    for iterations in range(1, EIGEN_MAX_ITER + 1):
        y = lu.solve(cvals * x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            raise EigenError("iteration collapsed to zero; weight too degenerate")
        x = y / ny
        Lx = L @ x
        cx = cvals * x
        denom = float(x @ cx)
        if denom <= 0.0:
            raise EigenError("weighted mass vanished during iteration")
        gamma = float(x @ Lx) / denom
        resid = float(np.linalg.norm(Lx - gamma * cx))
        if (
            abs(gamma - gamma_prev) <= EIGEN_INCREMENT_TOL * max(1.0, abs(gamma))
            and resid <= EIGEN_RESIDUAL_REL * float(np.linalg.norm(Lx))
        ):
            break
        gamma_prev = gamma
    else:
        raise EigenError(f"no convergence after {EIGEN_MAX_ITER} iterations")

    # normalize to unit Dirichlet energy, positive orientation
    energy = math.sqrt(ops.energy_product(x, x))
    phi_vals = x / energy
    if np.sum(phi_vals) < 0.0:
        phi_vals = -phi_vals
    Lphi = L @ phi_vals
    resid = float(np.linalg.norm(Lphi - gamma * cvals * phi_vals))
    return EigenResult(gamma=gamma, phi=GridFunction(c.spec, phi_vals),
                       residual=resid, iterations=iterations)


def _restricted(mat: sp.spmatrix, mask: np.ndarray) -> sp.csc_matrix:
    idx = np.flatnonzero(mask)
    return mat.tocsr()[idx][:, idx].tocsc()


def weighted_rayleigh_sup(
    w: GridFunction | np.ndarray,
    mask: np.ndarray | None,
    ops: DiscreteOperators,
    stiffness: sp.spmatrix | None = None,
) -> float:
    """Largest nu with  integral(w phi^2) = nu * integral(|grad phi|^2)
    over fields supported on ``mask``.

    Returns 0 when w <= 0 on the mask. ``stiffness`` replaces the plain
    Laplacian when the gradient term carries a coefficient.
    """
    wvals = w.values if isinstance(w, GridFunction) else np.asarray(w, dtype=float)
    if mask is None:
        mask = np.ones(wvals.size, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask selects no nodes")
    A = stiffness if stiffness is not None else ops.laplacian
    wm = wvals[mask]
    if np.max(wm, initial=0.0) <= 0.0:
        return 0.0
    Am = _restricted(A, mask)
    lu = spla.splu(Am)

    def rayleigh(x: np.ndarray) -> float:
        return float(x @ (wm * x)) / float(x @ (Am @ x))

    def iterate(shift: float) -> float:
        x = np.ones(wm.size)
        x /= np.linalg.norm(x)
        nu_prev = np.inf
        nu = 0.0
        for _ in range(50000):
            y = lu.solve(wm * x) + shift * x
            ny = np.linalg.norm(y)
            if ny == 0.0:
                return 0.0
            x = y / ny
            nu = rayleigh(x)
            if abs(nu - nu_prev) <= 1e-13 * max(1.0, abs(nu)):
                resid = np.linalg.norm(wm * x - nu * (Am @ x))
                if resid <= 1e-9 * max(np.linalg.norm(wm * x), 1e-300):
                    break
            nu_prev = nu
        return nu

    nu = iterate(0.0)
    if nu <= 0.0:
        # mixed-sign weight where the most negative eigenvalue dominates:
        # shift so the largest algebraic eigenvalue becomes dominant
        nu = iterate(2.0 * abs(nu) + 1.0)
    return max(nu, 0.0)


def _vacuous_report(which: str, note: str) -> ConditionReport:
    return ConditionReport(condition=which, holds=True, infimum_estimate=1.0,
                           sub_infima=None, note=note)


def check_smallness(problem: ProblemData, which: str) -> ConditionReport:
    """Evaluate one of the smallness conditions H0, Hc, H or k1.

    The margin is 1 - M * nu for the relevant weighted Rayleigh supremum
    nu (the paired sub-margins for the +/- parts where applicable); the
    condition holds exactly when the margin is positive.
    """
    if which not in ("H0", "Hc", "H", "k1"):
        raise ValueError(f"unknown smallness condition {which!r}")
    ops = _ops_for(problem)

    if which in ("H0", "Hc"):
        if which == "H0":
            mask = np.ones(problem.spec.n_interior, dtype=bool)
        else:
            mask = problem.c_zero_mask
            if not mask.any():
                return _vacuous_report(
                    "Hc", "vacuous: the discrete support of c covers every node"
                )
        nu_plus = weighted_rayleigh_sup(problem.h_plus, mask, ops)
        nu_minus = weighted_rayleigh_sup(problem.h_minus, mask, ops)
        sub1 = 1.0 - problem.mu_plus_sup * nu_plus
        sub2 = 1.0 - problem.mu_minus_sup * nu_minus
        margin = min(sub1, sub2)
        return ConditionReport(condition=which, holds=margin > 0.0,
                               infimum_estimate=margin, sub_infima=(sub1, sub2))

    if which == "H":
        d = problem.d_values()
        tau = 1e-12 * float(np.max(np.abs(d), initial=0.0))
        mask = np.abs(d) <= tau
        if not mask.any():
            return _vacuous_report("H", "vacuous: the zero-order coefficient never vanishes")
        mu_vals = problem.mu.values
        mu_const = float(np.max(mu_vals))
        note = ""
        if float(np.max(mu_vals) - np.min(mu_vals)) > 1e-12 * (1.0 + abs(mu_const)):
            note = "mu is not constant; its maximum was used"
        nu = weighted_rayleigh_sup(problem.h.values, mask, ops)
        margin = 1.0 - mu_const * nu
        return ConditionReport(condition="H", holds=margin > 0.0,
                               infimum_estimate=margin, note=note)

    # k1: gradient term weighted by 1/mu over the c-zero mask
    mask = problem.c_zero_mask
    if not mask.any():
        return _vacuous_report("k1", "vacuous: the discrete support of c covers every node")
    mu_vals = problem.mu.values
    if float(np.min(mu_vals[mask])) <= 0.0:
        raise ValueError("k1 needs mu >= mu1 > 0 on the set where c vanishes")
    inv_mu = 1.0 / np.where(mu_vals > 0.0, mu_vals, 1.0)
    stiff = ops.weighted_stiffness(inv_mu)
    nu = weighted_rayleigh_sup(problem.h.values, mask, ops, stiffness=stiff)
    margin = 1.0 - nu
    return ConditionReport(condition="k1", holds=margin > 0.0, infimum_estimate=margin)


def sobolev_constant(dim: int) -> float:
    """Best constant of the embedding into the critical Lebesgue space,
    via the closed form sqrt(pi*N*(N-2)) * (Gamma(N/2)/Gamma(N))^(1/N)."""
    if dim < 3:
        raise ValueError("the critical exponent 2N/(N-2) needs dimension >= 3")
    n = float(dim)
    return math.sqrt(math.pi * n * (n - 2.0)) * (math.gamma(n / 2.0) / math.gamma(n)) ** (1.0 / n)


def check_ferone_murat(problem: ProblemData) -> ConditionReport:
    """Smallness of ||mu||_inf * ||h||_{N/2} against the squared Sobolev constant."""
    if problem.spec.dim != 3:
        raise ValueError(
            "this check compares against the critical Sobolev embedding and is "
            "only meaningful in dimension 3 (N >= 3 with N/2-integrable h)"
        )
    w = problem.spec.node_weight
    mu_sup = float(np.max(np.abs(problem.mu.values), initial=0.0))
    half_n = problem.spec.dim / 2.0
    h_norm = float((w * np.sum(np.abs(problem.h.values) ** half_n)) ** (1.0 / half_n))
    s2 = sobolev_constant(problem.spec.dim) ** 2
    margin = s2 - mu_sup * h_norm
    return ConditionReport(
        condition="FeroneMurat", holds=margin > 0.0, infimum_estimate=margin,
        note=f"product {mu_sup * h_norm:.6g} vs threshold {s2:.6g}",
    )


def exponent_margins(w: ExponentWitness) -> tuple[float, float, float]:
    """Margins of the three inequalities a witness must satisfy
    (all must be nonnegative, the last strictly positive)."""
    upper = 2.0 * w.dim * (w.p - 1.0) / (w.p * (w.dim - 2.0 + 2.0 * w.tau))
    return (w.q - 1.0 / w.p, upper - w.q, 2.0 / w.q - (1.0 - w.alpha))


def find_exponents(p: float, theta: float, dim: int) -> ExponentWitness:
    """Search exponents alpha, r in (0,1) making the bound arithmetic feasible.

    Shrinking search: alpha halves from 1/2; for each alpha, r halves from
    min(1/2, alpha) until every inequality holds. Feasibility always
    arrives for small enough alpha and r when p > dim/2, so exhaustion is
    an internal error.
    """
    dim = int(dim)
    if dim < 3:
        raise ValueError(f"dimension must be >= 3, got {dim}")
    if not p > dim / 2.0:
        raise ValueError(f"need p > dim/2 = {dim / 2.0}, got p = {p}")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")

    alpha = 0.5
    for _ in range(200):
        r = min(0.5, alpha)
        for _ in range(200):
            q = 1.0 + r + (1.0 + theta * alpha) / (1.0 - alpha)
            tau = (1.0 / q) * alpha / (1.0 - alpha)
            witness = ExponentWitness(p=float(p), dim=dim, theta=float(theta),
                                      alpha=alpha, r=r, q=q, tau=tau)
            m1, m2, m3 = exponent_margins(witness)
            if m1 >= 0.0 and m2 >= 0.0 and m3 > 0.0:
                return witness
            r *= 0.5
            if r < 1e-60:
                break
        alpha *= 0.5
        if alpha < 1e-60:
            break
    raise RuntimeError(
        f"exponent search exhausted for p={p}, theta={theta}, dim={dim}; "
        "this contradicts the feasibility guarantee"
    )


_OPS_CACHE: dict = {}


def _ops_for(problem: ProblemData) -> DiscreteOperators:
    key = problem.spec
    ops = _OPS_CACHE.get(key)
    if ops is None:
        from .grid import build_operators

        ops = build_operators(key)
        _OPS_CACHE[key] = ops
    return ops
