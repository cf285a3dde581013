"""Change of variables for constant mu: the semilinear route to a solution.

For constant mu > 0 the substitution  w = (exp(mu u) - 1) / mu  removes the
quadratic gradient term: u solves the quasilinear problem with data
(d, mu, h), d <= 0, h >= 0, exactly when v = w solves

    L v - mu h(x) v = d(x) g(v) + h(x),

with the superlinear nonlinearity

    g(s) = sign(s) * (1/mu) * (1 + mu|s|) * ln(1 + mu|s|),

whose primitive G is even, nonnegative and grows faster than s^2. The
semilinear problem is the Euler-Lagrange equation of

    I(v) = 1/2 int(|grad v|^2 - mu h v^2) - int(d G(v)) - int(h v),

which is coercive and weakly lower semicontinuous when the smallness
condition on mu * h holds, so minimizing I produces a (nonnegative)
solution. The route back is  u = ln(1 + mu v) / mu.

Discrete caveat: central stencils do not commute with the pointwise
change of variables, so the image of the minimizer solves the discrete
quasilinear system only up to O(h^2). ``solve_transformed`` therefore
finishes with a Newton polish of u on that system; the minimization
supplies the basin, the polish lands on the nearby discrete root (the
unique one, in the d <= 0 regime).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .conditions import weighted_rayleigh_sup
from .grid import DiscreteOperators, GridFunction
from .solver import SolveOptions, newton_quasilinear


class CoercivityError(RuntimeError):
    """Minimization escaped to -infinity: the smallness condition fails."""


class TransformError(RuntimeError):
    pass


@dataclass
class TransformedProblem:
    """Data (d <= 0, constant mu > 0, h >= 0) of the semilinear problem."""

    d_field: GridFunction
    mu: float
    h_field: GridFunction

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"mu must be a positive constant, got {self.mu}")
        if float(np.max(self.d_field.values, initial=0.0)) > 0.0:
            node = int(np.argmax(self.d_field.values))
            raise ValueError(f"d must be <= 0 everywhere; positive at node {node}")
        if float(np.min(self.h_field.values, initial=0.0)) < 0.0:
            node = int(np.argmin(self.h_field.values))
            raise ValueError(f"h must be >= 0 everywhere; negative at node {node}")
        if self.d_field.spec != self.h_field.spec:
            raise ValueError("d and h sampled on different grids")

    @property
    def spec(self):
        return self.d_field.spec


def g_and_G(s, mu: float):
    """The odd nonlinearity g and its even primitive G = int_0^s g.

    Near zero the closed form of G cancels catastrophically, so a series
    (relative error below 1e-17 for mu|s| < 1e-4) takes over there.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    arr = np.asarray(s, dtype=float)
    t = np.abs(arr)
    m = mu * t
    lg = np.log1p(m)
    g = np.sign(arr) * (1.0 + m) * lg / mu
    G_closed = ((1.0 + m) ** 2 * (2.0 * lg - 1.0) + 1.0) / (4.0 * mu * mu)
    G_series = t * t * (0.5 + mu * t * (1.0 / 6.0 + mu * t * (-1.0 / 24.0 + mu * t / 60.0)))
    G = np.where(m >= 1e-4, G_closed, G_series)
    if np.isscalar(s) or arr.ndim == 0:
        return float(g), float(G)
    return g, G


def g_prime(s, mu: float):
    """Derivative of g: ln(1 + mu|s|) + 1, an even function."""
    arr = np.asarray(s, dtype=float)
    out = np.log1p(mu * np.abs(arr)) + 1.0
    if np.isscalar(s) or arr.ndim == 0:
        return float(out)
    return out


def cole_hopf(field: GridFunction, mu: float, direction: str) -> GridFunction:
    """Pointwise change of variables.

    ``fwd`` maps u to w = (exp(mu u) - 1)/mu; ``inv`` maps v back through
    u = ln(1 + mu v)/mu and requires 1 + mu v > 0 at every node.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if direction == "fwd":
        vals = np.expm1(mu * field.values) / mu
        return GridFunction(field.spec, vals)
    if direction == "inv":
        arg = 1.0 + mu * field.values
        bad = np.flatnonzero(arg <= 0.0)
        if bad.size:
            node = int(bad[0])
            raise TransformError(
                f"inverse transform undefined: 1 + mu*v = {arg[node]:.6g} at node {node}"
            )
        return GridFunction(field.spec, np.log1p(mu * field.values) / mu)
    raise ValueError(f"direction must be 'fwd' or 'inv', got {direction!r}")


def _el_residual(v: np.ndarray, tp: TransformedProblem, ops: DiscreteOperators) -> np.ndarray:
    g, _ = g_and_G(v, tp.mu)
    return (
        ops.laplacian @ v
        - tp.mu * tp.h_field.values * v
        - tp.d_field.values * g
        - tp.h_field.values
    )


def functional_I(
    v: GridFunction, tp: TransformedProblem, ops: DiscreteOperators
) -> tuple[float, GridFunction]:
    """Value and discrete gradient of the minimized functional.

    The gradient is node_weight times the Euler-Lagrange residual, so it
    matches finite differences of the value exactly.
    """
    ops.check_spec(v)
    if tp.spec != v.spec:
        raise ValueError("transformed problem lives on a different grid")
    w = ops.node_weight
    vals = v.values
    h = tp.h_field.values
    d = tp.d_field.values
    _, G = g_and_G(vals, tp.mu)
    quad_part = 0.5 * (ops.energy_product(vals, vals) - tp.mu * w * float(np.sum(h * vals**2)))
    value = quad_part - w * float(np.sum(d * G)) - w * float(np.sum(h * vals))
    grad = w * _el_residual(vals, tp, ops)
    return value, GridFunction(v.spec, grad)


def _minimize(
    tp: TransformedProblem, ops: DiscreteOperators
) -> np.ndarray:
    """Energy-preconditioned descent into the basin, then Newton on the
    Euler-Lagrange system."""
    w = ops.node_weight
    h = tp.h_field.values
    d = tp.d_field.values
    mu = tp.mu
    lu = ops.lap_solver()
    blow_up = 1e12 * (1.0 + float(np.max(np.abs(h), initial=0.0)))

    def value(vals: np.ndarray) -> float:
        _, G = g_and_G(vals, mu)
        return (
            0.5 * (ops.energy_product(vals, vals) - mu * w * float(np.sum(h * vals**2)))
            - w * float(np.sum(d * G))
            - w * float(np.sum(h * vals))
        )

    v = np.zeros(tp.spec.n_interior)
    val = value(v)
    coarse_tol = 1e-3 * (1.0 + float(np.max(np.abs(h), initial=0.0)))
    for _ in range(2000):
        F = _el_residual(v, tp, ops)
        if float(np.max(np.abs(F), initial=0.0)) <= coarse_tol:
            break
        direction = -lu.solve(F)
        slope = w * float(F @ direction)  # negative along a descent direction
        t = 1.0
        accepted = False
        while t >= 1e-14:
            trial = v + t * direction
            trial_val = value(trial)
            if np.isfinite(trial_val) and trial_val <= val + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise TransformError("descent line search stalled before reaching the basin")
        v, val = trial, trial_val
        if val < -blow_up or float(np.max(np.abs(v))) > 1e10:
            raise CoercivityError(
                "functional unbounded below along the descent: smallness "
                "condition violated / coercivity failure"
            )
    else:
        raise CoercivityError(
            "descent did not reach the Newton basin: smallness condition "
            "violated / coercivity failure"
        )

    # Newton tail on the Euler-Lagrange system
    tol = 1e-12 * (1.0 + float(np.max(np.abs(ops.laplacian @ v)))
                   + float(np.max(np.abs(h), initial=0.0)))
    F = _el_residual(v, tp, ops)
    for _ in range(60):
        if float(np.max(np.abs(F), initial=0.0)) <= tol:
            break
        J = (
            ops.laplacian
            - sp.diags(mu * h)
            - sp.diags(d * g_prime(v, mu))
        ).tocsc()
        delta = spla.splu(J).solve(-F)
        r0 = float(np.linalg.norm(F))
        t = 1.0
        accepted = False
        while t >= 1e-10:
            trial = v + t * delta
            F_try = _el_residual(trial, tp, ops)
            if np.all(np.isfinite(F_try)) and float(np.linalg.norm(F_try)) <= (1.0 - 1e-4 * t) * r0:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise TransformError("Newton stalled on the Euler-Lagrange system")
        v, F = trial, F_try
        tol = 1e-12 * (1.0 + float(np.max(np.abs(ops.laplacian @ v)))
                       + float(np.max(np.abs(h), initial=0.0)))
    else:
        raise TransformError("Newton did not converge on the Euler-Lagrange system")
    return v


def solve_transformed(
    tp: TransformedProblem,
    ops: DiscreteOperators,
    opts: SolveOptions | None = None,
    check_condition: bool = True,
    return_details: bool = False,
):
    """Minimize the functional, map back, and polish on the quasilinear system.

    Returns (v, u): the minimizer of the semilinear functional and the
    corresponding solution of the discrete quasilinear problem. The
    minimizer is checked to be nonnegative (flipped to |v| with a warning
    if roundoff pushed it below -1e-10, mirroring that the infimum is
    attained at a nonnegative field).
    """
    opts = opts or SolveOptions()
    spec = tp.spec

    if check_condition:
        d = tp.d_field.values
        tau = 1e-12 * float(np.max(np.abs(d), initial=0.0))
        mask = np.abs(d) <= tau
        if mask.any():
            nu = weighted_rayleigh_sup(tp.h_field.values, mask, ops)
            if 1.0 - tp.mu * nu <= 0.0:
                warnings.warn(
                    "smallness condition fails (margin "
                    f"{1.0 - tp.mu * nu:.3e}); the functional may be unbounded below",
                    RuntimeWarning,
                    stacklevel=2,
                )

    v = _minimize(tp, ops)
    if float(np.min(v, initial=0.0)) < -1e-10:
        warnings.warn(
            f"minimizer dipped to {float(np.min(v)):.3e}; flipping to |v|",
            RuntimeWarning,
            stacklevel=2,
        )
        v = np.abs(v)
        v = _polish_el(v, tp, ops)

    v_fn = GridFunction(spec, v)
    u_raw = cole_hopf(v_fn, tp.mu, "inv")
    mu_arr = np.full(spec.n_interior, tp.mu)
    u_vals, report = newton_quasilinear(
        u_raw.values, tp.d_field.values, mu_arr, tp.h_field.values, ops, opts
    )
    if not report.converged:
        raise TransformError(
            f"quasilinear polish failed: {report.failure_reason} "
            f"(residual {report.final_residual:.3e})"
        )
    u_fn = GridFunction(spec, u_vals)
    if return_details:
        el_sup = float(np.max(np.abs(_el_residual(v, tp, ops)), initial=0.0))
        details = {
            "u_raw": u_raw,
            "el_residual_sup": el_sup,
            "polish_report": report,
            "polish_shift_sup": float(np.max(np.abs(u_vals - u_raw.values), initial=0.0)),
        }
        return v_fn, u_fn, details
    return v_fn, u_fn


def _polish_el(v: np.ndarray, tp: TransformedProblem, ops: DiscreteOperators) -> np.ndarray:
    """Re-converge the Euler-Lagrange system after the |v| flip."""
    h = tp.h_field.values
    d = tp.d_field.values
    mu = tp.mu
    for _ in range(30):
        F = _el_residual(v, tp, ops)
        tol = 1e-12 * (1.0 + float(np.max(np.abs(ops.laplacian @ v)))
                       + float(np.max(np.abs(h), initial=0.0)))
        if float(np.max(np.abs(F), initial=0.0)) <= tol:
            return v
        J = (ops.laplacian - sp.diags(mu * h) - sp.diags(d * g_prime(v, mu))).tocsc()
        v = v + spla.splu(J).solve(-F)
    return v
