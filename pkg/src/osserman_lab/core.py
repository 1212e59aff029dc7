"""Ball grids, scalar fields and finite-difference calculus.

The domain is always a ball. Nodes live on a tensor lattice through the
center; interior nodes are strictly inside the ball, and the first exterior
lattice layer carries Dirichlet data at its radial projection onto the
sphere (first-order cut-cell). Dimension is restricted to n in {1, 2}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Stencil directions come in (minus, plus) pairs. In 2D the two diagonals
# are part of the stencil: the solver's rotated extremal pair and the
# 4-point cross derivative both need them.
_DIRECTIONS_1D = ((-1,), (1,))
_DIRECTIONS_2D = (
    (-1, 0), (1, 0),
    (0, -1), (0, 1),
    (-1, -1), (1, 1),
    (-1, 1), (1, -1),
)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric n x n matrix stored by its upper triangle (row-major)."""

    n: int
    upper: tuple

    @staticmethod
    def from_matrix(mat) -> "SymMatrix":
        mat = np.asarray(mat, dtype=float)
        n = mat.shape[0]
        entries = tuple(mat[i, j] for i in range(n) for j in range(i, n))
        return SymMatrix(n=n, upper=entries)

    @staticmethod
    def zero(n: int) -> "SymMatrix":
        return SymMatrix(n=n, upper=tuple(0.0 for _ in range(n * (n + 1) // 2)))

    def matrix(self) -> np.ndarray:
        mat = np.zeros((self.n, self.n))
        k = 0
        for i in range(self.n):
            for j in range(i, self.n):
                mat[i, j] = self.upper[k]
                mat[j, i] = self.upper[k]
                k += 1
        return mat

    def trace(self) -> float:
        mat = self.matrix()
        return float(np.trace(mat))

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues; closed form for n <= 2."""
        if self.n == 1:
            return np.array([self.upper[0]])
        if self.n == 2:
            a, b, c = self.upper  # [[a, b], [b, c]]
            mean = 0.5 * (a + c)
            rad = np.hypot(0.5 * (a - c), b)
            return np.array([mean - rad, mean + rad])
        return np.linalg.eigvalsh(self.matrix())


@dataclass(frozen=True)
class BallGrid:
    """Lattice discretization of an open ball.

    nodes[:n_interior] are the interior nodes (lexicographic in lattice
    coordinates), followed by the boundary layer. ``projections[k]`` is the
    radial projection of boundary node k onto the sphere.
    """

    center: np.ndarray
    radius: float
    h: float
    n: int
    nodes: np.ndarray          # (N, n) coordinates
    lattice: np.ndarray        # (N, n) integer offsets from the center
    n_interior: int
    projections: np.ndarray    # (N - n_interior, n)
    neighbors: np.ndarray      # (n_interior, n_dirs) node indices

    @property
    def directions(self):
        return _DIRECTIONS_1D if self.n == 1 else _DIRECTIONS_2D

    @property
    def n_boundary(self) -> int:
        return len(self.nodes) - self.n_interior

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[: self.n_interior]

    def boundary_index(self, k: int) -> int:
        """Global node index of boundary node k."""
        return self.n_interior + k


def build_ball_grid(center, R: float, h: float, n: int) -> BallGrid:
    """Build the lattice grid on the open ball B_R(center).

    Requires h <= R/2 so interior nodes exist with a full stencil.
    """
    if n not in (1, 2):
        raise GridError("dimension n must be 1 or 2")
    if R <= 0 or h <= 0:
        raise GridError("R and h must be positive")
    if h > R / 2:
        raise GridError(f"h={h} too coarse for R={R}: need h <= R/2")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (n,):
        raise GridError(f"center must have shape ({n},)")

    dirs = _DIRECTIONS_1D if n == 1 else _DIRECTIONS_2D
    m = int(np.ceil(R / h)) + 1
    axes = [np.arange(-m, m + 1)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice_all = np.stack([g.ravel() for g in mesh], axis=1)
    radii = h * np.sqrt((lattice_all.astype(float) ** 2).sum(axis=1))
    interior_mask = radii < R

    interior_set = {tuple(p) for p in lattice_all[interior_mask]}
    boundary_set = set()
    for p in interior_set:
        for d in dirs:
            q = tuple(p[i] + d[i] for i in range(n))
            if q not in interior_set:
                boundary_set.add(q)

    interior = sorted(interior_set)
    boundary = sorted(boundary_set)
    if not interior:
        raise GridError("no interior nodes")

    lattice = np.array(interior + boundary, dtype=int).reshape(-1, n)
    nodes = center[None, :] + h * lattice.astype(float)
    n_interior = len(interior)

    bpts = nodes[n_interior:]
    vecs = bpts - center[None, :]
    norms = np.linalg.norm(vecs, axis=1)
    projections = center[None, :] + R * vecs / norms[:, None]

    index = {tuple(p): i for i, p in enumerate(lattice)}
    neighbors = np.empty((n_interior, len(dirs)), dtype=np.int64)
    for i, p in enumerate(interior):
        for k, d in enumerate(dirs):
            neighbors[i, k] = index[tuple(p[j] + d[j] for j in range(n))]

    return BallGrid(
        center=center,
        radius=float(R),
        h=float(h),
        n=n,
        nodes=nodes,
        lattice=lattice,
        n_interior=n_interior,
        projections=projections,
        neighbors=neighbors,
    )


@dataclass(frozen=True)
class ScalarField:
    """Nodal values on a BallGrid (interior followed by boundary layer)."""

    grid: BallGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.grid.nodes),):
            raise ValueError("values length must match grid node count")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[: self.grid.n_interior]


def sample_field(grid: BallGrid, fn: Callable) -> ScalarField:
    """Sample ``fn`` at every node coordinate (boundary at lattice points)."""
    return ScalarField(grid=grid, values=np.asarray(
        [float(fn(x)) for x in grid.nodes], dtype=float))


def field_with_boundary(grid: BallGrid, interior, boundary_fn: Callable) -> ScalarField:
    """Interior values plus Dirichlet data taken at the sphere projections."""
    vals = np.empty(len(grid.nodes))
    vals[: grid.n_interior] = interior
    vals[grid.n_interior:] = [float(boundary_fn(x)) for x in grid.projections]
    return ScalarField(grid=grid, values=vals)


def _pair_values(field: ScalarField, axis_pair: int):
    g = field.grid
    um = field.values[g.neighbors[:, 2 * axis_pair]]
    up = field.values[g.neighbors[:, 2 * axis_pair + 1]]
    return um, up


def second_differences(field: ScalarField) -> np.ndarray:
    """Per-direction second differences at all interior nodes.

    Shape (n_pairs, n_interior). Axis pairs come first, then (in 2D) the
    two diagonal directions with spacing h*sqrt(2).
    """
    g = field.grid
    uc = field.interior_values
    n_pairs = len(g.directions) // 2
    out = np.empty((n_pairs, g.n_interior))
    for k in range(n_pairs):
        um, up = _pair_values(field, k)
        spacing2 = g.h ** 2 if k < g.n else 2.0 * g.h ** 2
        out[k] = (up - 2.0 * uc + um) / spacing2
    return out


def central_gradient(field: ScalarField) -> np.ndarray:
    """Central first differences, shape (n_interior, n)."""
    g = field.grid
    out = np.empty((g.n_interior, g.n))
    for a in range(g.n):
        um, up = _pair_values(field, a)
        out[:, a] = (up - um) / (2.0 * g.h)
    return out


def cross_derivative(field: ScalarField) -> np.ndarray:
    """4-point centered mixed derivative u_xy (2D only)."""
    g = field.grid
    if g.n != 2:
        raise ValueError("cross derivative requires n=2")
    v = field.values
    d1m = v[g.neighbors[:, 4]]
    d1p = v[g.neighbors[:, 5]]
    d2m = v[g.neighbors[:, 6]]
    d2p = v[g.neighbors[:, 7]]
    return (d1p + d1m - d2p - d2m) / (4.0 * g.h ** 2)


def upwind_gradient(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Monotone upwind gradient for Hamiltonians nondecreasing in |p|.

    Per axis the larger of the two outward one-sided slopes is kept (with
    its sign), floored at zero, so the resulting nodal function decreases
    in the center value and increases in the neighbors. Returns the signed
    upwind vector (n_interior, n) and its magnitude (n_interior,).
    """
    g = field.grid
    uc = field.interior_values
    p = np.zeros((g.n_interior, g.n))
    for a in range(g.n):
        um, up = _pair_values(field, a)
        dplus = (up - uc) / g.h     # forward slope
        dminus = (uc - um) / g.h    # backward slope
        take_plus = (dplus >= -dminus) & (dplus > 0.0)
        take_minus = (-dminus > dplus) & (dminus < 0.0)
        p[:, a] = np.where(take_plus, dplus, np.where(take_minus, dminus, 0.0))
    return p, np.linalg.norm(p, axis=1)


def fd_derivatives(field: ScalarField, node: int):
    """Gradient and Hessian at interior node index ``node``.

    Central differences throughout; in 2D the mixed derivative uses the
    standard 4-point formula on the diagonal neighbors.
    """
    g = field.grid
    if node < 0 or node >= g.n_interior:
        raise ValueError("node must be an interior node index")
    grad = central_gradient(field)[node]
    d2 = second_differences(field)[:, node]
    if g.n == 1:
        hess = SymMatrix(n=1, upper=(float(d2[0]),))
    else:
        uxy = float(cross_derivative(field)[node])
        hess = SymMatrix(n=2, upper=(float(d2[0]), uxy, float(d2[1])))
    return grad, hess


def _subdomain_mask(grid: BallGrid, center, radius: float) -> np.ndarray:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    pts = grid.interior_nodes
    return np.linalg.norm(pts - center[None, :], axis=1) < radius


def norm(field: ScalarField, kind: str = "sup", p: float | None = None,
         center=None, radius: float | None = None) -> float:
    """Discrete sup or L^p norm over interior nodes of a subdomain ball.

    L^p uses the Riemann weight h^n per node. The default subdomain is the
    whole grid ball.
    """
    g = field.grid
    if center is None:
        center = g.center
    if radius is None:
        radius = g.radius
    if radius > g.radius + 1e-12:
        raise ValueError("subdomain must lie inside the grid ball")
    mask = _subdomain_mask(g, center, radius)
    if not mask.any():
        raise ValueError("empty subdomain")
    vals = np.abs(field.interior_values[mask])
    if kind == "sup":
        return float(vals.max())
    if kind == "lp":
        if p is None or p < 1:
            raise ValueError("Lp norm requires p >= 1")
        return float((np.sum(vals ** p) * g.h ** g.n) ** (1.0 / p))
    raise ValueError(f"unknown norm kind {kind!r}")
