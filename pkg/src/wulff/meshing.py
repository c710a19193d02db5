"""Triangulation of star-shaped domains intersected with cones.

The mesher lays out concentric scaled copies of the boundary profile
(with three geometrically graded rings around the origin), samples each
ring at equal arclength, stitches consecutive rings into triangle
strips, and then improves quality with guarded Laplacian smoothing and
min-angle edge flips run to a fixpoint (so interior edges end up locally
Delaunay).  Boundary vertices are placed exactly on the parametrized
curve and never moved.

``extend_triangulation`` grows an existing mesh outward to a larger
domain, leaving the original mesh untouched so that it is an exact
submesh of the result (needed for discrete comparison experiments).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, MeshingError
from .geometry import GAMMA0, GAMMA1, Cone, Domain, _unit

MIN_ANGLE_DEG = 20.0
_GRADED_RINGS = 3  # rings at 1/2, 1/4, 1/8 of the first uniform ring


@dataclass
class Mesh:
    """Conforming triangle mesh of domain intersect cone.

    ``boundary_edges`` lists each one-sided edge once with a tag
    (gamma0 for the outer boundary, gamma1 for cone rays);
    ``outer_ring`` holds the gamma0 vertex indices in arc order.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    h: float
    origin_index: int | None = None
    outer_ring: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    outer_ring_closed: bool = True

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def angles_deg(self):
        """(nt, 3) interior angles in degrees."""
        p = self.vertices[self.triangles]
        out = np.empty((len(self.triangles), 3))
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.einsum("mi,mi->m", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            out[:, k] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return out

    def min_angle(self) -> float:
        return float(self.angles_deg().min())

    def edge_count(self) -> int:
        e = np.vstack(
            [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
        )
        return len(np.unique(np.sort(e, axis=1), axis=0))

    def gamma0_vertex_mask(self):
        mask = np.zeros(self.num_vertices, dtype=bool)
        g0 = self.boundary_edges[self.boundary_tags == GAMMA0]
        if len(g0):
            mask[np.unique(g0)] = True
        return mask

    def gamma1_vertex_mask(self):
        mask = np.zeros(self.num_vertices, dtype=bool)
        g1 = self.boundary_edges[self.boundary_tags == GAMMA1]
        if len(g1):
            mask[np.unique(g1)] = True
        return mask

    def validate(self, min_angle=MIN_ANGLE_DEG):
        areas = self.areas()
        if np.any(areas <= 0.0):
            raise MeshingError(f"{int((areas <= 0).sum())} non-positive triangles")
        worst = self.min_angle()
        if worst < min_angle:
            raise MeshingError(f"min angle {worst:.2f} deg below {min_angle} deg")
        pairs = cKDTree(self.vertices).query_pairs(1e-12)
        if pairs:
            raise MeshingError(f"{len(pairs)} duplicated vertices")
        derived = _boundary_edge_set(self.triangles)
        tagged = {tuple(sorted(e)) for e in self.boundary_edges}
        if derived != tagged:
            raise MeshingError("tagged boundary does not match mesh boundary")
        if len(self.boundary_edges) != len(self.boundary_tags):
            raise MeshingError("one tag per boundary edge required")
        return self

    def to_dict(self):
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary": [
                {"edge": [int(a), int(b)], "tag": str(t)}
                for (a, b), t in zip(self.boundary_edges, self.boundary_tags)
            ],
            "h": self.h,
        }


def _boundary_edge_set(tris):
    e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    return {tuple(row) for row in uniq[counts == 1]}


class _ArcTable:
    """Cumulative arclength table of a radial curve over an angle range."""

    def __init__(self, radius_fn, phi_lo, phi_hi, closed, samples=4096):
        if closed:
            phi = np.linspace(phi_lo, phi_hi, samples + 1)
        else:
            phi = np.linspace(phi_lo, phi_hi, samples + 1)
        pts = np.asarray(radius_fn(phi))[:, None] * _unit(phi)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        self.phi = phi
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self.cum[-1])

    def angles_at_arclength(self, targets):
        return np.interp(targets, self.cum, self.phi)


def _stitch(inner, outer, verts):
    """Greedy shortest-diagonal strip between two ordered vertex chains."""
    tris = []
    i, j = 0, 0
    while i < len(inner) - 1 or j < len(outer) - 1:
        can_i = i < len(inner) - 1
        can_j = j < len(outer) - 1
        if can_i and can_j:
            pa, pb = verts[inner[i + 1]], verts[outer[j]]
            d_i = math.hypot(pa[0] - pb[0], pa[1] - pb[1])
            pc, pd = verts[outer[j + 1]], verts[inner[i]]
            d_j = math.hypot(pc[0] - pd[0], pc[1] - pd[1])
            advance_inner = d_i <= d_j
        else:
            advance_inner = can_i
        if advance_inner:
            tris.append((inner[i], inner[i + 1], outer[j]))
            i += 1
        else:
            tris.append((outer[j + 1], outer[j], inner[i]))
            j += 1
    return tris


def _orient_ccw(verts, tris):
    p = verts[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    flip = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0.0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _tri_min_angles(p0, p1, p2):
    """Row-wise smallest interior angle of triangles (p0, p1, p2)."""
    worst = np.full(len(p0), math.pi)
    for a, b, c in ((p0, p1, p2), (p1, p2, p0), (p2, p0, p1)):
        u = b - a
        v = c - a
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        denom = np.where(nu * nv > 0.0, nu * nv, 1.0)
        ang = np.arccos(np.clip(np.einsum("mi,mi->m", u, v) / denom, -1.0, 1.0))
        ang = np.where(nu * nv > 0.0, ang, 0.0)
        worst = np.minimum(worst, ang)
    return worst


def _signed_areas(p0, p1, p2):
    return 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    )


def _smooth(verts, tris, movable, sweeps=4):
    """Jacobi-style Laplacian smoothing of the movable vertices with a
    quality guard: vertices of any triangle whose smallest angle would
    degrade (below 35 degrees) are reverted."""
    nv = len(verts)
    edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    floor = math.radians(35.0)
    for _ in range(sweeps):
        acc = np.zeros((nv, 2))
        cnt = np.zeros(nv)
        np.add.at(acc, edges[:, 0], verts[edges[:, 1]])
        np.add.at(acc, edges[:, 1], verts[edges[:, 0]])
        np.add.at(cnt, edges[:, 0], 1.0)
        np.add.at(cnt, edges[:, 1], 1.0)
        target = verts.copy()
        ok = movable & (cnt > 0)
        target[ok] = acc[ok] / cnt[ok, None]
        old_q = _tri_min_angles(*(verts[tris[:, k]] for k in range(3)))
        trial = target
        for _ in range(6):
            q = _tri_min_angles(*(trial[tris[:, k]] for k in range(3)))
            area = _signed_areas(*(trial[tris[:, k]] for k in range(3)))
            bad = (area <= 1e-14) | (q < np.minimum(old_q, floor) - 1e-12)
            if not bad.any():
                break
            revert = np.unique(tris[bad])
            trial = trial.copy()
            trial[revert] = verts[revert]
        else:
            trial = verts
        verts = trial
    return verts


def _flip_edges(verts, tris, new_tri_start=0, max_sweeps=40):
    """Flip interior edges while doing so raises the local min angle.

    Only edges both of whose triangles have index >= ``new_tri_start``
    are touched.  Runs to a fixpoint, leaving the touched region locally
    Delaunay (the min-angle criterion is the Delaunay flip criterion).
    """
    tris = tris.copy()
    for _ in range(max_sweeps):
        all_edges = np.vstack(
            [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]
        )
        owner_tri = np.tile(np.arange(len(tris)), 3)
        owner_k = np.repeat(np.arange(3), len(tris))
        key = np.sort(all_edges, axis=1)
        _, inverse, counts = np.unique(
            key, axis=0, return_inverse=True, return_counts=True
        )
        interior = counts[inverse] == 2
        order = np.lexsort((owner_tri[interior], inverse[interior]))
        e_ids = inverse[interior][order]
        t_ids = owner_tri[interior][order]
        k_ids = owner_k[interior][order]
        t1, t2 = t_ids[0::2], t_ids[1::2]
        k1, k2 = k_ids[0::2], k_ids[1::2]
        assert np.array_equal(e_ids[0::2], e_ids[1::2])
        a = tris[t1, k1]
        b = tris[t1, (k1 + 1) % 3]
        c = tris[t1, (k1 + 2) % 3]
        d = tris[t2, (k2 + 2) % 3]
        pa, pb, pc, pd = verts[a], verts[b], verts[c], verts[d]
        ok_area = (_signed_areas(pa, pd, pc) > 1e-14) & (
            _signed_areas(pd, pb, pc) > 1e-14
        )
        old_q = np.minimum(_tri_min_angles(pa, pb, pc), _tri_min_angles(pb, pa, pd))
        new_q = np.minimum(_tri_min_angles(pa, pd, pc), _tri_min_angles(pd, pb, pc))
        want = ok_area & (new_q > old_q + 1e-12)
        want &= (t1 >= new_tri_start) & (t2 >= new_tri_start)
        if not want.any():
            break
        dirty = np.zeros(len(tris), dtype=bool)
        flips = 0
        for idx in np.flatnonzero(want):
            i, j = t1[idx], t2[idx]
            if dirty[i] or dirty[j]:
                continue
            tris[i] = (a[idx], d[idx], c[idx])
            tris[j] = (d[idx], b[idx], c[idx])
            dirty[i] = dirty[j] = True
            flips += 1
        if flips == 0:
            break
    return tris


def _ring_scales(mean_radius, h):
    n_layers = max(2, round(mean_radius / h))
    base = 1.0 / n_layers
    graded = [base / 2.0**k for k in range(_GRADED_RINGS, 0, -1)]
    uniform = [base * k for k in range(1, n_layers + 1)]
    return graded + uniform


def _ring_counts(scale, table, h, closed, width):
    length = scale * table.length
    if closed:
        return max(6, int(math.ceil(length / h)))
    by_length = int(math.ceil(length / h))
    by_angle = int(math.ceil(width / 0.7))
    return max(2, by_length, by_angle)


def triangulate(domain: Domain, h: float) -> Mesh:
    """Triangulate domain intersect cone with target edge length h."""
    char = domain.characteristic_radius
    if not (0.0 < h < char):
        raise ConfigurationError(
            f"target h must lie in (0, {char:.3g}) for this domain"
        )
    cone = domain.cone
    lo, hi, closed = cone.angular_range()
    if not closed and cone.width > 2.0 * math.pi - 1e-9:
        raise ConfigurationError(
            "sector of full aperture (a slit plane) is not meshable; "
            "use the full plane"
        )
    table = _ArcTable(domain.radius, lo, hi, closed)
    lo_r, hi_r = lo, hi
    mean_radius = table.length / (hi_r - lo_r)
    scales = _ring_scales(mean_radius, h)

    verts = [np.zeros(2)]
    rings = []
    for s in scales:
        m = _ring_counts(s, table, h, closed, hi - lo)
        if closed:
            targets = np.arange(m) * table.length / m
        else:
            targets = np.linspace(0.0, table.length, m + 1)
        phi = table.angles_at_arclength(targets)
        if not closed:
            phi[0], phi[-1] = lo, hi  # pin ray endpoints exactly
        pts = s * np.asarray(domain.radius(phi))[:, None] * _unit(phi)
        idx = np.arange(len(verts), len(verts) + len(pts))
        verts.extend(pts)
        rings.append(idx)
    verts = np.asarray(verts)

    tris = []
    first = rings[0]
    if closed:
        loop = np.concatenate([first, first[:1]])
        for k in range(len(first)):
            tris.append((0, loop[k], loop[k + 1]))
    else:
        for k in range(len(first) - 1):
            tris.append((0, first[k], first[k + 1]))
    for inner_ring, outer_ring in zip(rings[:-1], rings[1:]):
        if closed:
            a = np.concatenate([inner_ring, inner_ring[:1]])
            b = np.concatenate([outer_ring, outer_ring[:1]])
        else:
            a, b = inner_ring, outer_ring
        tris.extend(_stitch(a, b, verts))
    tris = _orient_ccw(verts, np.asarray(tris, dtype=int))

    outer = rings[-1]
    fixed = np.zeros(len(verts), dtype=bool)
    fixed[0] = True
    fixed[outer] = True
    if not closed:
        for ring in rings:
            fixed[ring[0]] = fixed[ring[-1]] = True
    movable = ~fixed
    verts = _smooth(verts, tris, movable)
    tris = _flip_edges(verts, tris)
    tris = _orient_ccw(verts, tris)
    verts = _smooth(verts, tris, movable)
    tris = _flip_edges(verts, tris)
    tris = _orient_ccw(verts, tris)

    mesh = _finalize(verts, tris, h, outer, closed)
    return mesh.validate()


def _finalize(verts, tris, h, outer_ring, closed):
    outer_set = set(int(v) for v in outer_ring)
    boundary = sorted(_boundary_edge_set(tris))
    edges, tags = [], []
    for a, b in boundary:
        edges.append((a, b))
        if a in outer_set and b in outer_set:
            tags.append(GAMMA0)
        else:
            tags.append(GAMMA1)
    edges = np.asarray(edges, dtype=int)
    tags = np.asarray(tags)
    if closed and np.any(tags == GAMMA1):
        raise MeshingError("full-plane mesh acquired untagged boundary edges")
    return Mesh(
        vertices=verts,
        triangles=tris,
        boundary_edges=edges,
        boundary_tags=tags,
        h=h,
        origin_index=0,
        outer_ring=np.asarray(outer_ring, dtype=int),
        outer_ring_closed=closed,
    )


def extend_triangulation(mesh: Mesh, outer_domain: Domain, h: float | None = None) -> Mesh:
    """Grow ``mesh`` outward to ``outer_domain``; the input mesh is an
    exact submesh of the result (same vertex indices, untouched
    triangles), which makes solutions on the two meshes comparable at
    shared nodes."""
    h = mesh.h if h is None else h
    cone = outer_domain.cone
    lo, hi, closed = cone.angular_range()
    if closed != mesh.outer_ring_closed:
        raise ConfigurationError("inner mesh and outer domain disagree on the cone")
    ring = mesh.outer_ring
    ring_pts = mesh.vertices[ring]
    phi_ring = np.arctan2(ring_pts[:, 1], ring_pts[:, 0])
    if closed:
        phi_ring = np.mod(phi_ring, 2.0 * math.pi)
        order_ok = np.all(np.diff(phi_ring) > 0)
        if not order_ok:
            shift = int(np.argmin(phi_ring))
            ring = np.roll(ring, -shift)
            ring_pts = mesh.vertices[ring]
            phi_ring = np.mod(np.arctan2(ring_pts[:, 1], ring_pts[:, 0]), 2.0 * math.pi)
    r_ring = np.linalg.norm(ring_pts, axis=1)

    def rho_inner(phi):
        phi = np.asarray(phi, dtype=float)
        if closed:
            p = np.concatenate([phi_ring, phi_ring[:1] + 2.0 * math.pi])
            r = np.concatenate([r_ring, r_ring[:1]])
            return np.interp(np.mod(phi, 2.0 * math.pi), p, r)
        return np.interp(phi, phi_ring, r_ring)

    probe = np.linspace(lo, hi, 512)
    gap = np.asarray(outer_domain.radius(probe)) - rho_inner(probe)
    if gap.min() <= 0.0:
        raise ConfigurationError("outer domain must strictly contain the inner mesh")
    n_new = max(1, round(float(gap.mean()) / h))

    verts = [mesh.vertices]
    chains = [ring]
    offset = mesh.num_vertices
    for j in range(1, n_new + 1):
        t = j / n_new

        def rho(phi, _t=t):
            return (1.0 - _t) * rho_inner(phi) + _t * np.asarray(outer_domain.radius(phi))

        tab = _ArcTable(rho, lo, hi, closed)
        m = _ring_counts(1.0, tab, h, closed, hi - lo)
        if closed:
            targets = np.arange(m) * tab.length / m
        else:
            targets = np.linspace(0.0, tab.length, m + 1)
        phi = tab.angles_at_arclength(targets)
        if not closed:
            phi[0], phi[-1] = lo, hi
        pts = np.asarray(rho(phi))[:, None] * _unit(phi)
        idx = np.arange(offset, offset + len(pts))
        offset += len(pts)
        verts.append(pts)
        chains.append(idx)
    verts = np.vstack(verts)

    new_tris = []
    for a_ring, b_ring in zip(chains[:-1], chains[1:]):
        if closed:
            a = np.concatenate([a_ring, a_ring[:1]])
            b = np.concatenate([b_ring, b_ring[:1]])
        else:
            a, b = a_ring, b_ring
        new_tris.extend(_stitch(a, b, verts))
    new_tris = _orient_ccw(verts, np.asarray(new_tris, dtype=int))

    n_old_tris = mesh.num_triangles
    tris = np.vstack([mesh.triangles, new_tris])
    movable = np.zeros(len(verts), dtype=bool)
    movable[mesh.num_vertices:] = True
    movable[chains[-1]] = False
    if not closed:
        for ch in chains:
            movable[ch[0]] = movable[ch[-1]] = False
    verts = _smooth(verts, tris, movable)
    tris = _flip_edges(verts, tris, new_tri_start=n_old_tris)
    tris = _orient_ccw(verts, tris)

    if not np.array_equal(verts[: mesh.num_vertices], mesh.vertices):
        raise MeshingError("extension modified inner-mesh vertices")
    if not np.array_equal(tris[:n_old_tris], mesh.triangles):
        raise MeshingError("extension modified inner-mesh triangles")

    out = _finalize(verts, tris, h, chains[-1], closed)
    return out.validate()
