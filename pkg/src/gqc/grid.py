"""Uniform finite-difference grids on boxes with homogeneous Dirichlet data.

Fields live on the interior nodes of a tensor-product grid over a box in
dimension 1, 2 or 3; the boundary value is implicitly zero everywhere. The
module assembles the standard second-order operators every other module
consumes:

* ``laplacian``: the (2d+1)-point stencil for -lap with Dirichlet
  elimination, symmetric positive definite.
* ``gradient``: per-axis central differences; at nodes adjacent to the
  boundary the stencil uses the (zero) boundary value, which keeps it
  second order for fields that genuinely vanish on the boundary.
* ``edge_diffs``: per-axis forward differences on the edge (staggered)
  grid, including the two boundary edges. These factor the Laplacian as
  sum_i E_i^T E_i and carry the energy inner product.
* midpoint quadrature: each interior node weighs prod(h_i); the missing
  boundary band makes integrals of non-vanishing fields low by O(1/n),
  which is documented and not compensated.

The Dirichlet energy norm (``h10``) is evaluated through the Laplacian
energy u^T L u, i.e. through edge-midpoint gradient quadrature. Nodal
central-difference quadrature would lose the boundary band contribution of
|grad u|^2 (a 2/n relative deficit), which is far too crude for the
eigenvalue and condition checks; the energy form is exact for the same
discrete operators the solvers use.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class GridError(ValueError):
    """Raised for invalid grid specifications or mismatched fields."""


def _as_bounds(bounds) -> tuple[tuple[float, float], ...]:
    out = []
    for pair in bounds:
        lo, hi = float(pair[0]), float(pair[1])
        out.append((lo, hi))
    return tuple(out)


@dataclass(frozen=True)
class GridSpec:
    """Box domain with a uniform grid: per-axis bounds and cell counts.

    ``n[k]`` counts cells along axis k, so there are ``n[k] - 1`` interior
    nodes per axis. Interior nodes are ordered lexicographically with the
    first axis slowest (C order of the (m1, ..., md) index block).
    """

    dim: int
    bounds: tuple[tuple[float, float], ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        object.__setattr__(self, "bounds", _as_bounds(self.bounds))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if len(self.bounds) != self.dim or len(self.n) != self.dim:
            raise GridError(
                f"bounds and n must have length dim={self.dim}, "
                f"got {len(self.bounds)} and {len(self.n)}"
            )
        for axis, ((lo, hi), nk) in enumerate(zip(self.bounds, self.n)):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise GridError(f"axis {axis}: bounds must satisfy lo < hi, got ({lo}, {hi})")
            if nk < 4:
                raise GridError(f"axis {axis}: need n >= 4 cells, got {nk}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / nk for (lo, hi), nk in zip(self.bounds, self.n))

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return tuple(nk - 1 for nk in self.n)

    @property
    def n_interior(self) -> int:
        out = 1
        for m in self.interior_shape:
            out *= m
        return out

    @property
    def node_weight(self) -> float:
        """Midpoint quadrature weight prod(h_i), identical for every node."""
        out = 1.0
        for h in self.spacing:
            out *= h
        return out

    def axis_coords(self, axis: int) -> np.ndarray:
        lo, _ = self.bounds[axis]
        h = self.spacing[axis]
        m = self.n[axis] - 1
        return lo + h * np.arange(1, m + 1)

    def interior_points(self) -> np.ndarray:
        """All interior node coordinates, shape (n_interior, dim), C order."""
        axes = [self.axis_coords(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel(order="C") for m in mesh], axis=-1)


@dataclass
class GridFunction:
    """Nodal values of a scalar field on the interior nodes of a grid.

    The boundary trace is implicitly zero: a GridFunction with constant
    value 1 represents a field that drops to 0 on the box boundary.
    """

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel(order="C")
        if vals.size != self.spec.n_interior:
            raise GridError(
                f"values length {vals.size} does not match interior node count "
                f"{self.spec.n_interior}"
            )
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise GridError(f"non-finite value at node {bad}")
        self.values = vals

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.zeros(spec.n_interior))

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "GridFunction":
        return cls(spec, np.full(spec.n_interior, float(value)))

    @classmethod
    def from_callable(cls, spec: GridSpec, fn: Callable[..., np.ndarray]) -> "GridFunction":
        pts = spec.interior_points()
        vals = fn(*(pts[:, k] for k in range(spec.dim)))
        return cls(spec, np.broadcast_to(np.asarray(vals, dtype=float), (spec.n_interior,)).copy())

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.spec.interior_shape)

    def copy(self) -> "GridFunction":
        return GridFunction(self.spec, self.values.copy())


def _second_difference_1d(m: int, h: float) -> sp.csr_matrix:
    # (1/h^2) tridiag(-1, 2, -1): -d^2/dx^2 with eliminated zero boundary
    main = np.full(m, 2.0 / h**2)
    off = np.full(m - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _central_difference_1d(m: int, h: float) -> sp.csr_matrix:
    # (1/2h) tridiag(-1, 0, 1); rows next to the boundary keep only the
    # interior entry because the boundary value 0 is substituted
    off = np.full(m - 1, 1.0 / (2.0 * h))
    return sp.diags([-off, off], [-1, 1], format="csr")


def _edge_difference_1d(m: int, h: float) -> sp.csr_matrix:
    # (m+1) x m forward differences over all edges including the two that
    # touch the boundary; E^T E reproduces the second-difference matrix
    rows, cols, vals = [], [], []
    for j in range(m + 1):
        if j <= m - 1:
            rows.append(j)
            cols.append(j)
            vals.append(1.0 / h)
        if j >= 1:
            rows.append(j)
            cols.append(j - 1)
            vals.append(-1.0 / h)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m + 1, m))


def _kron_chain(mats: Sequence[sp.spmatrix]) -> sp.csr_matrix:
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats).tocsr()


def _lift_axis_operator(spec: GridSpec, axis: int, op1d: sp.spmatrix) -> sp.csr_matrix:
    shape = spec.interior_shape
    factors: list[sp.spmatrix] = [sp.identity(m, format="csr") for m in shape]
    factors[axis] = op1d
    return _kron_chain(factors)


class DiscreteOperators:
    """Assembled Dirichlet operators and quadrature for one GridSpec.

    Immutable after construction; the sparse factorization of the
    Laplacian is computed lazily and cached.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        shape = spec.interior_shape
        hs = spec.spacing
        lap_parts = []
        grads = []
        edges = []
        for axis in range(spec.dim):
            m, h = shape[axis], hs[axis]
            lap_parts.append(_lift_axis_operator(spec, axis, _second_difference_1d(m, h)))
            grads.append(_lift_axis_operator(spec, axis, _central_difference_1d(m, h)))
            edges.append(_lift_axis_operator(spec, axis, _edge_difference_1d(m, h)))
        lap = lap_parts[0]
        for part in lap_parts[1:]:
            lap = (lap + part).tocsr()
        lap.sum_duplicates()
        self.laplacian: sp.csr_matrix = lap
        self.gradient: tuple[sp.csr_matrix, ...] = tuple(grads)
        self.edge_diffs: tuple[sp.csr_matrix, ...] = tuple(edges)
        self.node_weight: float = spec.node_weight
        self.quadrature_weights: np.ndarray = np.full(spec.n_interior, spec.node_weight)
        self._lap_factor = None

    def lap_solver(self):
        """Cached sparse LU factorization of the Laplacian."""
        if self._lap_factor is None:
            self._lap_factor = spla.splu(self.laplacian.tocsc())
        return self._lap_factor

    def check_spec(self, u: GridFunction) -> None:
        if u.spec != self.spec:
            raise GridError("grid function does not live on this operator set's grid")

    def energy_product(self, a: np.ndarray, b: np.ndarray) -> float:
        """Discrete H^1_0 inner product: node_weight * a^T L b."""
        return float(self.node_weight * (a @ (self.laplacian @ b)))

    def weighted_stiffness(self, coeff: np.ndarray) -> sp.csr_matrix:
        """Stiffness matrix for -div(a grad .) with nodal coefficient a.

        Edge coefficients are arithmetic means of the adjacent node values;
        boundary edges take the single interior node value.
        """
        coeff = np.asarray(coeff, dtype=float)
        shape = self.spec.interior_shape
        total = None
        for axis in range(self.spec.dim):
            E = self.edge_diffs[axis]
            m = shape[axis]
            arr = coeff.reshape(shape)
            pad_shape = list(shape)
            pad_shape[axis] = m + 1
            edge_vals = np.empty(pad_shape)
            lo = [slice(None)] * self.spec.dim
            hi = [slice(None)] * self.spec.dim
            inner = [slice(None)] * self.spec.dim
            lo[axis] = slice(0, 1)
            hi[axis] = slice(m, m + 1)
            inner[axis] = slice(1, m)
            edge_vals[tuple(lo)] = arr[tuple(lo)]
            edge_vals[tuple(hi)] = np.take(arr, [m - 1], axis=axis)
            left = np.take(arr, range(0, m - 1), axis=axis)
            right = np.take(arr, range(1, m), axis=axis)
            edge_vals[tuple(inner)] = 0.5 * (left + right)
            D = sp.diags(edge_vals.ravel(order="C"))
            part = (E.T @ D @ E).tocsr()
            total = part if total is None else (total + part).tocsr()
        return total


def build_operators(spec: GridSpec) -> DiscreteOperators:
    """Assemble the Dirichlet Laplacian, gradients and quadrature for a grid."""
    return DiscreteOperators(spec)


def grad_sq(u: GridFunction, ops: DiscreteOperators) -> GridFunction:
    """Nodal |grad u|^2 from the central-difference gradient operators."""
    ops.check_spec(u)
    acc = np.zeros_like(u.values)
    for D in ops.gradient:
        g = D @ u.values
        acc += g * g
    return GridFunction(u.spec, acc)


def grad_sq_values(values: np.ndarray, ops: DiscreteOperators) -> np.ndarray:
    """Array-level |grad u|^2, used in solver hot loops."""
    acc = None
    for D in ops.gradient:
        g = D @ values
        acc = g * g if acc is None else acc + g * g
    return acc


@dataclass(frozen=True)
class NormReport:
    lp: float
    sup: float
    h10: float
    integral: float
    p: float = 2.0


def norms(u: GridFunction, ops: DiscreteOperators, p: float = 2.0) -> NormReport:
    """Lp, sup, Dirichlet-energy and integral of a grid function.

    ``h10`` is sqrt(node_weight * u^T L u), the energy seminorm of the
    assembled Laplacian (equivalently edge-midpoint quadrature of
    |grad u|^2). Lp and the integral use midpoint node quadrature and are
    low by O(1/n) for fields that do not vanish at the boundary.
    """
    ops.check_spec(u)
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    w = ops.node_weight
    vals = u.values
    lp = float((w * np.sum(np.abs(vals) ** p)) ** (1.0 / p))
    sup = float(np.max(np.abs(vals))) if vals.size else 0.0
    h10 = float(np.sqrt(max(ops.energy_product(vals, vals), 0.0)))
    integral = float(w * np.sum(vals))
    return NormReport(lp=lp, sup=sup, h10=h10, integral=integral, p=p)


def poisson_solve(f: GridFunction, ops: DiscreteOperators) -> GridFunction:
    """Solve laplacian * u = f by the cached direct factorization."""
    ops.check_spec(f)
    u = ops.lap_solver().solve(f.values)
    return GridFunction(f.spec, u)
