"""P1 finite elements for the anisotropic torsion problem.

The mixed problem

    -div(DV(Du)) = f   in domain intersect cone,
    u = 0              on the outer boundary (gamma0),
    DV(Du) . nu = 0    on the cone rays (gamma1),

with Lagrangian ``V = H^2/2`` built from a dual pair, is solved by
minimizing the convex energy

    F[u] = sum_T |T| V(Du|_T) - integral(f u)

over piecewise-linear fields vanishing at gamma0 nodes.  The gradient
of V is evaluated exactly at the elementwise-constant gradients (the
one-point rule is exact for P1), the load uses edge-midpoint
quadrature, and the natural condition on gamma1 needs no boundary term.

Minimization is damped Newton on a regularized per-element Hessian
(eigenvalues floored at the regularization delta) with Armijo
backtracking and a gradient-descent fallback, so descent is guaranteed
on the strictly convex energies admitted here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, SolverError
from .geometry import GAMMA0, GAMMA1
from .meshing import Mesh
from .norms import DualPair, Norm


@dataclass
class SolverOptions:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-10  # sup-norm of the energy gradient
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    hessian_regularization: float = 1e-10
    verbose: bool = False

    def __post_init__(self):
        if self.gradient_tolerance <= 0 or self.hessian_regularization <= 0:
            raise ConfigurationError("solver tolerances must be positive")


@dataclass
class ScalarField:
    """Piecewise-linear field on a mesh: nodal values plus the exact
    per-triangle gradient of the interpolant."""

    mesh: Mesh
    values: np.ndarray
    energy: float | None = None
    residuals: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_vertices,):
            raise ConfigurationError("field values must be one per mesh vertex")

    def element_gradients(self):
        return element_gradients(self.mesh, self.values)


def gradient_operators(mesh: Mesh):
    """(nt, 2, 3) operators G with Du|_T = G @ u[triangle]."""
    p = mesh.vertices[mesh.triangles]
    areas = mesh.areas()
    g = np.empty((mesh.num_triangles, 2, 3))
    for i in range(3):
        e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]  # edge opposite vertex i
        g[:, 0, i] = -e[:, 1]
        g[:, 1, i] = e[:, 0]
    g /= (2.0 * areas)[:, None, None]
    return g, areas


def element_gradients(mesh: Mesh, values):
    g, _ = _cached_ops(mesh)
    return np.einsum("tij,tj->ti", g, np.asarray(values)[mesh.triangles])


def _cached_ops(mesh: Mesh):
    ops = getattr(mesh, "_fem_ops", None)
    if ops is None:
        ops = gradient_operators(mesh)
        mesh._fem_ops = ops
    return ops


def load_vector(mesh: Mesh, f):
    """Nodal load for the source f (a constant or a callable on points),
    integrated with the edge-midpoint rule (exact for linear f)."""
    _, areas = _cached_ops(mesh)
    p = mesh.vertices[mesh.triangles]
    b = np.zeros(mesh.num_vertices)
    mids = [0.5 * (p[:, (i + 1) % 3] + p[:, (i + 2) % 3]) for i in range(3)]
    if callable(f):
        fm = [np.asarray(f(m)) for m in mids]
    else:
        fm = [np.full(mesh.num_triangles, float(f))] * 3
    for i in range(3):
        # basis i is 1/2 at the two midpoints of its adjacent edges
        contrib = areas / 6.0 * (fm[(i + 1) % 3] + fm[(i + 2) % 3])
        np.add.at(b, mesh.triangles[:, i], contrib)
    return b


def energy(mesh: Mesh, values, pair: DualPair, f=1.0, load=None):
    """Discrete torsion energy of the nodal values."""
    _, areas = _cached_ops(mesh)
    du = element_gradients(mesh, values)
    b = load_vector(mesh, f) if load is None else load
    return float(areas @ pair.lagrangian(du) - b @ np.asarray(values))


def energy_gradient(mesh: Mesh, values, pair: DualPair, f=1.0, load=None):
    """Nodal gradient of the discrete energy (index-ordered, hence
    deterministic, accumulation)."""
    g, areas = _cached_ops(mesh)
    du = element_gradients(mesh, values)
    dv = pair.lagrangian_grad(du)
    contrib = np.einsum("tij,ti->tj", g, dv) * areas[:, None]
    b = load_vector(mesh, f) if load is None else load
    out = -b.copy()
    np.add.at(out, mesh.triangles, contrib)
    return out


def _floored_spd(hess, floor):
    """Clamp eigenvalues of symmetric 2x2 blocks to at least ``floor``."""
    a = hess[:, 0, 0]
    b = hess[:, 0, 1]
    c = hess[:, 1, 1]
    mean = 0.5 * (a + c)
    rad = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    lam1 = np.maximum(mean + rad, floor)
    lam2 = np.maximum(mean - rad, floor)
    theta = 0.5 * np.arctan2(2.0 * b, a - c)
    ct, st = np.cos(theta), np.sin(theta)
    out = np.empty_like(hess)
    out[:, 0, 0] = lam1 * ct * ct + lam2 * st * st
    out[:, 1, 1] = lam1 * st * st + lam2 * ct * ct
    out[:, 0, 1] = out[:, 1, 0] = (lam1 - lam2) * ct * st
    return out


def solve_torsion(
    mesh: Mesh,
    pair: DualPair,
    f=1.0,
    opts: SolverOptions | None = None,
    initial=None,
) -> ScalarField:
    """Minimize the torsion energy over fields vanishing on gamma0.

    Requires a dual pair whose Lagrangian is differentiable and strictly
    convex (primal and dual norms C1 away from 0); the minimizer is then
    unique and independent of the starting point.
    """
    opts = opts or SolverOptions()
    if not pair.lagrangian_c1:
        raise ConfigurationError(
            "the dual norm is not C1, so the torsion energy is not "
            "differentiable; this pair cannot be solved"
        )
    if not pair.lagrangian_strictly_convex:
        raise ConfigurationError(
            "the Lagrangian is not strictly convex (primal norm not C1); "
            "the minimizer would not be unique"
        )
    fixed = mesh.gamma0_vertex_mask()
    free = ~fixed
    if not free.any():
        raise ConfigurationError("no free degrees of freedom")
    nfree = int(free.sum())
    index = -np.ones(mesh.num_vertices, dtype=int)
    index[free] = np.arange(nfree)

    g_ops, areas = _cached_ops(mesh)
    b = load_vector(mesh, f)

    u = np.zeros(mesh.num_vertices)
    if initial is not None:
        u = np.asarray(initial, dtype=float).copy()
        u[fixed] = 0.0

    tri_idx = mesh.triangles
    rows = np.repeat(index[tri_idx], 3, axis=1).ravel()
    cols = np.tile(index[tri_idx], (1, 3)).ravel()
    keep = (rows >= 0) & (cols >= 0)

    def assemble(du):
        hess = pair.lagrangian_hessian(du)
        hess = _floored_spd(hess, opts.hessian_regularization)
        blocks = np.einsum(
            "tai,tab,tbj->tij", g_ops, hess, g_ops
        ) * areas[:, None, None]
        data = blocks.reshape(len(tri_idx), 9).ravel()
        mat = sp.coo_matrix(
            (data[keep], (rows[keep], cols[keep])), shape=(nfree, nfree)
        )
        return mat.tocsc()

    def F(vec):
        du = np.einsum("tij,tj->ti", g_ops, vec[tri_idx])
        return float(areas @ pair.lagrangian(du) - b @ vec)

    residuals = []
    f_cur = F(u)
    for it in range(opts.max_iterations):
        grad = energy_gradient(mesh, u, pair, load=b)
        gf = grad[free]
        res = float(np.abs(gf).max())
        residuals.append(res)
        if opts.verbose:
            print(f"  newton iter {it}: residual {res:.3e}, energy {f_cur:.9e}")
        if res <= opts.gradient_tolerance:
            return ScalarField(mesh, u, energy=f_cur, residuals=residuals)
        du = element_gradients(mesh, u)
        direction = None
        try:
            d = spla.spsolve(assemble(du), -gf)
            if np.all(np.isfinite(d)) and gf @ d < 0.0:
                direction = d
        except RuntimeError:
            direction = None
        if direction is None:
            direction = -gf
        slope = float(gf @ direction)
        step = 1.0
        accepted = False
        for _ in range(80):
            trial = u.copy()
            trial[free] += step * direction
            f_trial = F(trial)
            if f_trial <= f_cur + opts.armijo_c * step * slope:
                u, f_cur = trial, f_trial
                accepted = True
                break
            step *= opts.backtrack
        if not accepted and not np.array_equal(direction, -gf):
            direction = -gf
            slope = float(gf @ direction)
            step = 1.0
            for _ in range(80):
                trial = u.copy()
                trial[free] += step * direction
                f_trial = F(trial)
                if f_trial <= f_cur + opts.armijo_c * step * slope:
                    u, f_cur = trial, f_trial
                    accepted = True
                    break
                step *= opts.backtrack
        if not accepted:
            raise SolverError(
                f"line search stalled at residual {res:.3e}", residuals
            )
    raise SolverError(
        f"no convergence within {opts.max_iterations} iterations "
        f"(last residual {residuals[-1]:.3e})",
        residuals,
    )


class WulffTorsionSolution:
    """Closed-form torsion solution in the Wulff shape of radius R:
    u(x) = (R^2 - H0(x)^2) / (2N), with Du = -H0 DH0 / N, dual flux
    H(Du) = H0/N, and DV(Du) = -x/N."""

    def __init__(self, norm: Norm, R: float, N: int | None = None):
        if R <= 0.0:
            raise ConfigurationError("radius must be positive")
        self.norm = norm
        self.R = float(R)
        self.N = int(N) if N is not None else norm.dim

    def value(self, x):
        h0 = np.asarray(self.norm.eval(x))
        return (self.R**2 - h0**2) / (2.0 * self.N)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        out = np.zeros_like(pts)
        nz = np.linalg.norm(pts, axis=1) > 0.0
        if nz.any():
            h0 = np.asarray(self.norm.eval(pts[nz]))
            out[nz] = -(h0[:, None] / self.N) * self.norm.grad(pts[nz])
        return out[0] if x.ndim == 1 else out.reshape(x.shape)

    def flux(self, x):
        """H(Du) = H0(x)/N, valid for any point including the origin."""
        return np.asarray(self.norm.eval(x)) / self.N

    def flux_vector(self, x):
        """DV(Du) = -x/N."""
        return -np.asarray(x, dtype=float) / self.N

    def interpolate(self, mesh: Mesh) -> ScalarField:
        return ScalarField(mesh, self.value(mesh.vertices))


def exact_wulff_solution(norm: Norm, R: float, N: int | None = None):
    return WulffTorsionSolution(norm, R, N)


@dataclass
class FluxRecord:
    arc_param: float
    midpoint: np.ndarray
    h0: float
    flux: float
    tag: str = GAMMA0


@dataclass
class FluxReport:
    """Dual-norm gradient magnitude H(Du) sampled at gamma0 edge
    midpoints (one-layer interior limit) plus the natural-condition
    check DV(Du) . nu on gamma1 edges."""

    gamma0: list[FluxRecord]
    gamma1_normal_flux: list[FluxRecord]

    def fluxes(self):
        return np.array([r.flux for r in self.gamma0])

    def h0_values(self):
        return np.array([r.h0 for r in self.gamma0])

    def arc_params(self):
        return np.array([r.arc_param for r in self.gamma0])

    def midpoints(self):
        return np.array([r.midpoint for r in self.gamma0])


def _edge_to_triangle(mesh: Mesh):
    lookup = {}
    for t, tri in enumerate(mesh.triangles):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            lookup[(min(a, b), max(a, b))] = t
    return lookup


def boundary_flux(field: ScalarField, pair: DualPair) -> FluxReport:
    """Evaluate H(Du) on the triangle adjacent to every gamma0 edge,
    ordered by arc length, and DV(Du) . nu on gamma1 edges."""
    mesh = field.mesh
    if not (mesh.boundary_tags == GAMMA0).any():
        raise ConfigurationError("mesh has no gamma0 boundary")
    du = field.element_gradients()
    owner = _edge_to_triangle(mesh)

    ring = mesh.outer_ring
    pairs = (
        np.column_stack([ring, np.roll(ring, -1)])
        if mesh.outer_ring_closed
        else np.column_stack([ring[:-1], ring[1:]])
    )
    mids = 0.5 * (mesh.vertices[pairs[:, 0]] + mesh.vertices[pairs[:, 1]])
    lengths = np.linalg.norm(
        mesh.vertices[pairs[:, 1]] - mesh.vertices[pairs[:, 0]], axis=1
    )
    arc = np.concatenate([[0.0], np.cumsum(lengths)])[:-1] + 0.5 * lengths
    tris = [owner[(min(a, b), max(a, b))] for a, b in pairs]
    h_du = np.asarray(pair.dual.eval(du[tris]))
    h0 = np.asarray(pair.primal.eval(mids))
    gamma0 = [
        FluxRecord(float(s), m, float(v0), float(v1))
        for s, m, v0, v1 in zip(arc, mids, h0, h_du)
    ]

    gamma1 = []
    g1_edges = mesh.boundary_edges[mesh.boundary_tags == GAMMA1]
    dv = pair.lagrangian_grad(du)
    for a, b in g1_edges:
        t = owner[(min(int(a), int(b)), max(int(a), int(b)))]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        mid = 0.5 * (pa + pb)
        tangent = pb - pa
        nu = np.array([tangent[1], -tangent[0]])
        nu /= np.linalg.norm(nu)
        centroid = mesh.vertices[mesh.triangles[t]].mean(axis=0)
        if nu @ (mid - centroid) < 0.0:
            nu = -nu
        gamma1.append(
            FluxRecord(
                float(np.linalg.norm(mid)),
                mid,
                float(pair.primal.eval(mid)),
                float(dv[t] @ nu),
                tag=GAMMA1,
            )
        )
    gamma1.sort(key=lambda r: (r.arc_param, r.midpoint[0], r.midpoint[1]))
    return FluxReport(gamma0=gamma0, gamma1_normal_flux=gamma1)
