"""Pointwise evaluation of solution fields for flow-line tracing.

Discrete P1 solutions have elementwise-constant gradients; integrating
an ODE through such a field chatters at element boundaries, so the
evaluator interpolates area-weighted nodal averages of the element
gradients instead (first-order accurate, continuous).  Exact Wulff
solutions are wrapped behind the same interface.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError
from .fem import ScalarField, WulffTorsionSolution, element_gradients, _cached_ops
from .geometry import Cone, Domain


class MeshLocator:
    """Uniform-grid point location over a triangle mesh."""

    def __init__(self, mesh, tol=1e-9):
        self.mesh = mesh
        self.tol = tol
        verts = mesh.vertices
        tris = verts[mesh.triangles]
        self.lo = verts.min(axis=0)
        hi = verts.max(axis=0)
        span = np.maximum(hi - self.lo, 1e-30)
        n_cells = max(4, int(math.sqrt(mesh.num_triangles)))
        self.shape = (n_cells, n_cells)
        self.cell = span / n_cells
        self.bins = {}
        t_lo = np.floor((tris.min(axis=1) - self.lo) / self.cell).astype(int)
        t_hi = np.floor((tris.max(axis=1) - self.lo) / self.cell).astype(int)
        t_lo = np.clip(t_lo, 0, n_cells - 1)
        t_hi = np.clip(t_hi, 0, n_cells - 1)
        for t in range(mesh.num_triangles):
            for i in range(t_lo[t, 0], t_hi[t, 0] + 1):
                for j in range(t_lo[t, 1], t_hi[t, 1] + 1):
                    self.bins.setdefault((i, j), []).append(t)

    def barycentric(self, t, x):
        a, b, c = self.mesh.vertices[self.mesh.triangles[t]]
        m = np.array([[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
        try:
            lam = np.linalg.solve(m, np.asarray(x) - a)
        except np.linalg.LinAlgError:
            return np.array([-1.0, -1.0, -1.0])
        return np.array([1.0 - lam[0] - lam[1], lam[0], lam[1]])

    def locate(self, x):
        """Index of a triangle containing x (within tol), or -1."""
        ij = np.floor((np.asarray(x) - self.lo) / self.cell).astype(int)
        ij = np.clip(ij, 0, np.array(self.shape) - 1)
        best = -1
        best_short = -np.inf
        for t in self.bins.get((int(ij[0]), int(ij[1])), ()):
            lam = self.barycentric(t, x)
            short = float(lam.min())
            if short >= -self.tol and short > best_short:
                best, best_short = t, short
        return best


class DiscreteFieldEvaluator:
    """P1 field with nodal-averaged gradients, located on its mesh."""

    def __init__(self, field: ScalarField, domain: Domain | None = None):
        self.field = field
        self.mesh = field.mesh
        self.domain = domain
        self.cone = domain.cone if domain is not None else Cone.full_plane()
        self.locator = MeshLocator(self.mesh)
        du = element_gradients(self.mesh, field.values)
        self.element_grads = du
        _, areas = _cached_ops(self.mesh)
        acc = np.zeros((self.mesh.num_vertices, 2))
        w = np.zeros(self.mesh.num_vertices)
        np.add.at(acc, self.mesh.triangles, du[:, None, :] * areas[:, None, None])
        np.add.at(w, self.mesh.triangles, np.repeat(areas[:, None], 3, axis=1))
        self.nodal_gradient = acc / w[:, None]

    def inside(self, x) -> bool:
        return self.locator.locate(x) >= 0

    def _interp(self, x, nodal):
        t = self.locator.locate(x)
        if t < 0:
            raise ValueError(f"point {x} outside the mesh")
        lam = self.locator.barycentric(t, x)
        return lam @ nodal[self.mesh.triangles[t]]

    def value_at(self, x) -> float:
        return float(self._interp(x, self.field.values))

    def gradient_at(self, x):
        return self._interp(x, self.nodal_gradient)

    def element_gradient_at(self, x):
        """Raw P1 gradient of the containing element (no averaging)."""
        t = self.locator.locate(x)
        if t < 0:
            raise ValueError(f"point {x} outside the mesh")
        return self.element_grads[t]


class ExactWulffFieldEvaluator:
    """Closed-form Wulff torsion solution restricted to a domain."""

    def __init__(self, solution: WulffTorsionSolution, domain: Domain | None = None):
        self.solution = solution
        self.domain = domain
        self.cone = domain.cone if domain is not None else Cone.full_plane()

    def inside(self, x) -> bool:
        if self.domain is None:
            return bool(np.asarray(self.solution.norm.eval(x)) <= self.solution.R)
        return bool(np.asarray(self.domain.contains(x, tol=1e-12)))

    def value_at(self, x) -> float:
        return float(self.solution.value(np.asarray(x, dtype=float)))

    def gradient_at(self, x):
        return self.solution.gradient(np.asarray(x, dtype=float))


def field_evaluator(field_or_solution, domain: Domain | None = None):
    if isinstance(field_or_solution, ScalarField):
        return DiscreteFieldEvaluator(field_or_solution, domain)
    if isinstance(field_or_solution, WulffTorsionSolution):
        return ExactWulffFieldEvaluator(field_or_solution, domain)
    raise ConfigurationError(
        "expected a ScalarField or a closed-form Wulff solution"
    )
