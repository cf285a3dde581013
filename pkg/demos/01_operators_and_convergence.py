"""Grid operators at a glance: stencils, norms, and second-order accuracy.

Builds the Dirichlet Laplacian on a few grids, solves a Poisson problem
with a known solution and prints the classical convergence table: the sup
error should shrink by about 4x per mesh doubling.
"""

import numpy as np

from gqc import GridFunction, GridSpec, build_operators, norms, poisson_solve

# the 1d stencil, spelled out
spec = GridSpec(1, ((0.0, 1.0),), (4,))
ops = build_operators(spec)
print("1d Laplacian on 4 cells (h = 0.25):")
print(ops.laplacian.toarray())

# quadratic exactness: -u'' = 2 with zero boundary has u = x(1-x)
spec = GridSpec(1, ((0.0, 1.0),), (64,))
ops = build_operators(spec)
x = spec.axis_coords(0)
u = poisson_solve(GridFunction.constant(spec, 2.0), ops)
print(f"\nquadratic exactness: max |u - x(1-x)| = {np.max(np.abs(u.values - x*(1-x))):.2e}")

# energy norm of the first sine mode: integral of |grad|^2 is pi^2/2
nr = norms(GridFunction(spec, np.sin(np.pi * x)), ops)
print(f"h10^2 of sin(pi x): {nr.h10**2:.6f}  (analytic pi^2/2 = {np.pi**2/2:.6f})")

# convergence table for a smooth 2d solution
print("\nPoisson convergence, u = sin(pi x) sin(2 pi y):")
print(f"{'n':>4} {'sup error':>12} {'ratio':>7}")
prev = None
for n in (8, 16, 32, 64):
    spec = GridSpec(2, ((0.0, 1.0), (0.0, 1.0)), (n, n))
    ops = build_operators(spec)
    pts = spec.interior_points()
    target = np.sin(np.pi * pts[:, 0]) * np.sin(2 * np.pi * pts[:, 1])
    u = poisson_solve(GridFunction(spec, 5 * np.pi**2 * target), ops)
    err = np.max(np.abs(u.values - target))
    ratio = f"{prev / err:7.2f}" if prev else "      -"
    print(f"{n:>4} {err:12.3e} {ratio}")
    prev = err
