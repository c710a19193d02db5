"""Norms on R^N, their duals, and the torsion Lagrangian.

A norm ``H0`` here is a nonnegative, absolutely 1-homogeneous, convex
function vanishing only at the origin.  The dual norm is

    H(xi) = max_{x != 0}  x . xi / H0(x),

and each norm is the dual of its dual.  The Lagrangian driving the
anisotropic torsion energy is ``V(xi) = H(xi)^2 / 2`` with gradient
``DV(xi) = H(xi) DH(xi)`` (and ``DV(0) = 0``).

Families provided: the Euclidean norm, p-norms (p = 1 and p = inf are
eval-only), quadratic norms ``sqrt(x' A x)``, gauges of convex hulls of
symmetric disc arrangements (including the four-petal "flower" gauge,
a smooth norm whose dual has corners), the closed-form flower dual, and
a numeric dual built by maximization for anything else.

All evaluation and gradient routines accept arrays of shape
``(..., dim)`` and vectorize over the leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import CapabilityError, ConfigurationError, NonDifferentiableError

DEFAULT_SEED = 0x5EED

_SQRT2 = math.sqrt(2.0)
#: Coordinate of the corner of the flower dual ball on the diagonal.
FLOWER_DUAL_CORNER = 2.0 * (_SQRT2 - 1.0)

_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


def _as_points(x, dim):
    """Return (pts, scalar) where pts has shape (m, dim)."""
    x = np.asarray(x, dtype=float)
    if x.shape == (dim,):
        return x[None, :], True
    if x.ndim >= 1 and x.shape[-1] == dim:
        return x.reshape(-1, dim), False
    raise ValueError(f"expected trailing dimension {dim}, got shape {x.shape}")


def _restore(vals, x, scalar, extra=()):
    if scalar:
        return vals[0]
    lead = np.asarray(x).shape[:-1]
    return vals.reshape(lead + tuple(extra))


def central_difference_gradient(fn, x, step=None):
    """Central finite-difference gradient of a scalar function of points.

    ``fn`` must accept an (m, dim) array and return (m,).  The step is
    the cube root of machine epsilon scaled by max(1, |x|).
    """
    x = np.asarray(x, dtype=float)
    pts = x if x.ndim == 2 else x[None, :]
    m, dim = pts.shape
    if step is None:
        step = _FD_STEP * np.maximum(1.0, np.linalg.norm(pts, axis=1))
    h = np.broadcast_to(np.asarray(step, dtype=float), (m,))
    grad = np.empty((m, dim))
    for j in range(dim):
        e = np.zeros((m, dim))
        e[:, j] = h
        grad[:, j] = (fn(pts + e) - fn(pts - e)) / (2.0 * h)
    return grad if x.ndim == 2 else grad[0]


class Norm:
    """Base class for norms on R^N.

    Subclasses set ``family``, ``dim``, ``smooth`` (continuously
    differentiable away from the origin) and ``ball_strictly_convex``
    (whether the unit ball contains no boundary segment; equivalent to
    differentiability of the dual).
    """

    family: str = "abstract"
    dim: int
    smooth: bool = False
    ball_strictly_convex: bool = False

    def eval(self, x):
        raise NotImplementedError

    __call__ = eval

    def grad(self, x):
        """Gradient away from the origin; raises for x = 0."""
        raise NotImplementedError

    def closed_form_dual(self):
        """The dual norm when a closed form is known, else None."""
        return None

    def dual(self) -> "Norm":
        closed = self.closed_form_dual()
        return closed if closed is not None else NumericDualNorm(self)

    def equivalence_constants(self, samples=512, seed=DEFAULT_SEED):
        """Estimated (sigma, gamma) with sigma|x| <= H(x) <= gamma|x|,
        by sampling the Euclidean unit sphere."""
        rng = np.random.default_rng(seed)
        if self.dim == 2:
            ang = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
            u = np.column_stack([np.cos(ang), np.sin(ang)])
        else:
            u = rng.standard_normal((samples, self.dim))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
        vals = self.eval(u)
        return float(vals.min()), float(vals.max())

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _check_nonzero(self, pts):
        if np.any(np.linalg.norm(pts, axis=-1) == 0.0):
            raise ValueError("gradient undefined at the origin")


class EuclideanNorm(Norm):
    """The round norm |x|."""

    family = "euclidean"
    smooth = True
    ball_strictly_convex = True

    def __init__(self, dim=2):
        if dim < 1:
            raise ConfigurationError("dimension must be >= 1")
        self.dim = int(dim)

    def eval(self, x):
        pts, scalar = _as_points(x, self.dim)
        return _restore(np.linalg.norm(pts, axis=1), x, scalar)

    __call__ = eval

    def grad(self, x):
        pts, scalar = _as_points(x, self.dim)
        self._check_nonzero(pts)
        g = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        return _restore(g, x, scalar, (self.dim,))

    def closed_form_dual(self):
        return EuclideanNorm(self.dim)

    def to_dict(self):
        return {"family": "euclidean", "dim": self.dim}


class PNorm(Norm):
    """The p-norm (sum |x_k|^p)^(1/p); p = 1 and p = inf are eval-only."""

    family = "p_norm"

    def __init__(self, p, dim=2):
        p = float(p)
        if not (p >= 1.0):
            raise ConfigurationError("p-norm requires p >= 1")
        if dim < 1:
            raise ConfigurationError("dimension must be >= 1")
        self.p = p
        self.dim = int(dim)
        self.smooth = math.isfinite(p) and p > 1.0
        self.ball_strictly_convex = self.smooth

    def eval(self, x):
        pts, scalar = _as_points(x, self.dim)
        a = np.abs(pts)
        if math.isinf(self.p):
            vals = a.max(axis=1)
        else:
            # scale out the max to avoid overflow for large p
            m = a.max(axis=1)
            vals = np.zeros_like(m)
            nz = m > 0
            ratios = a[nz] / m[nz, None]
            vals[nz] = m[nz] * (ratios**self.p).sum(axis=1) ** (1.0 / self.p)
        return _restore(vals, x, scalar)

    __call__ = eval

    def grad(self, x):
        if not self.smooth:
            raise CapabilityError(
                f"p = {self.p} norm is not differentiable; gradients are "
                "only provided for 1 < p < inf"
            )
        pts, scalar = _as_points(x, self.dim)
        self._check_nonzero(pts)
        vals = self.eval(pts)
        g = np.sign(pts) * (np.abs(pts) / vals[:, None]) ** (self.p - 1.0)
        return _restore(g, x, scalar, (self.dim,))

    def closed_form_dual(self):
        if self.p == 1.0:
            return PNorm(math.inf, self.dim)
        if math.isinf(self.p):
            return PNorm(1.0, self.dim)
        q = self.p / (self.p - 1.0)
        return PNorm(q, self.dim)

    def to_dict(self):
        p = "inf" if math.isinf(self.p) else self.p
        return {"family": "p_norm", "p": p, "dim": self.dim}


class QuadraticNorm(Norm):
    """sqrt(x' A x) for a symmetric positive-definite matrix A."""

    family = "quadratic"
    smooth = True
    ball_strictly_convex = True

    def __init__(self, matrix):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigurationError("quadratic norm needs a square matrix")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ConfigurationError("quadratic norm matrix must be symmetric")
        if np.linalg.eigvalsh(a).min() <= 0.0:
            raise ConfigurationError("quadratic norm matrix must be positive definite")
        self.matrix = 0.5 * (a + a.T)
        self.dim = a.shape[0]

    def eval(self, x):
        pts, scalar = _as_points(x, self.dim)
        vals = np.sqrt(np.einsum("mi,ij,mj->m", pts, self.matrix, pts))
        return _restore(vals, x, scalar)

    __call__ = eval

    def grad(self, x):
        pts, scalar = _as_points(x, self.dim)
        self._check_nonzero(pts)
        ax = pts @ self.matrix
        vals = np.sqrt(np.einsum("mi,mi->m", pts, ax))
        return _restore(ax / vals[:, None], x, scalar, (self.dim,))

    def closed_form_dual(self):
        inv = np.linalg.inv(self.matrix)
        return QuadraticNorm(0.5 * (inv + inv.T))

    def to_dict(self):
        return {"family": "quadratic", "matrix": self.matrix.tolist(), "dim": self.dim}


class DiscHullGauge(Norm):
    """Gauge (Minkowski functional) of the convex hull of a symmetric
    family of closed discs, inf{t > 0 : x/t in hull}.

    The hull must contain a neighborhood of the origin and the disc
    family must be symmetric through the origin so the gauge is a norm.
    Evaluation brackets the boundary crossing along the ray through x
    and bisects; hull membership is exact (the hull of discs is the
    union over disc triples of linearly blended discs, so membership
    reduces to minimizing a quadratic over a simplex).

    Restricted to the plane, where the triple decomposition is exact.
    """

    family = "disc_hull_gauge"
    smooth = True  # arcs and tangent segments of a disc hull join tangentially
    ball_strictly_convex = False

    #: relative bisection tolerance on the gauge value
    bisect_tol = 1e-13

    def __init__(self, centers, radii):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if centers.shape[1] != 2:
            raise ConfigurationError("disc hull gauges are implemented for N = 2 only")
        if len(centers) != len(radii) or len(centers) == 0:
            raise ConfigurationError("need one radius per disc center")
        if np.any(radii <= 0.0):
            raise ConfigurationError("disc radii must be positive")
        self.centers = centers
        self.radii = radii
        self.dim = 2
        self._validate_symmetry()
        self._ball_rmax = float(np.max(np.linalg.norm(centers, axis=1) + radii))
        self._ball_rmin = self._estimate_inradius()
        if len(centers) == 1:
            self.ball_strictly_convex = True

    def _validate_symmetry(self):
        for c, r in zip(self.centers, self.radii):
            d = np.linalg.norm(self.centers + c, axis=1)
            match = (d < 1e-9) & (np.abs(self.radii - r) < 1e-9)
            if not match.any():
                raise ConfigurationError(
                    "disc family must be symmetric through the origin "
                    "(each disc needs a mirror image) for the gauge to be a norm"
                )

    def _estimate_inradius(self):
        ang = np.linspace(0.0, 2.0 * math.pi, 2048, endpoint=False)
        nu = np.column_stack([np.cos(ang), np.sin(ang)])
        support = (nu @ self.centers.T + self.radii[None, :]).max(axis=1)
        inradius = float(support.min())
        if inradius <= 0.0:
            raise ConfigurationError("disc hull must contain a neighborhood of the origin")
        return inradius

    def contains(self, x):
        """Exact hull membership for points of shape (..., 2)."""
        pts, scalar = _as_points(x, 2)
        inside = np.zeros(len(pts), dtype=bool)
        k = len(self.centers)
        if k == 1:
            inside = np.linalg.norm(pts - self.centers[0], axis=1) <= self.radii[0]
        elif k == 2:
            inside = self._pair_min(pts, 0, 1) <= 0.0
        else:
            for i, j, l in combinations(range(k), 3):
                inside |= self._triple_min(pts, i, j, l) <= 0.0
                if inside.all():
                    break
        return bool(inside[0]) if scalar else _restore(inside, x, scalar)

    def _pair_min(self, pts, i, j):
        # min over lam in [0,1] of |x - c(lam)|^2 - r(lam)^2, both linear in lam
        ci, cj = self.centers[i], self.centers[j]
        ri, rj = self.radii[i], self.radii[j]
        d = pts - ci[None, :]
        e = cj - ci
        rho = rj - ri
        a = e @ e - rho * rho
        b = -(d @ e) - ri * rho  # q(lam) = a lam^2 + 2 b lam + c0
        c0 = np.einsum("mi,mi->m", d, d) - ri * ri
        best = np.minimum(c0, a + 2.0 * b + c0)
        if a > 1e-300:
            lam = np.clip(-b / a, 0.0, 1.0)
            best = np.minimum(best, a * lam * lam + 2.0 * b * lam + c0)
        return best

    def _triple_min(self, pts, i, j, l):
        # min over the simplex of |x - c(lam)|^2 - r(lam)^2 with
        # c, r affine in (lam_i, lam_j); lam_l = 1 - lam_i - lam_j
        best = self._pair_min(pts, i, j)
        best = np.minimum(best, self._pair_min(pts, j, l))
        best = np.minimum(best, self._pair_min(pts, i, l))
        cl = self.centers[l]
        m1 = self.centers[i] - cl
        m2 = self.centers[j] - cl
        r1 = self.radii[i] - self.radii[l]
        r2 = self.radii[j] - self.radii[l]
        h11 = m1 @ m1 - r1 * r1
        h12 = m1 @ m2 - r1 * r2
        h22 = m2 @ m2 - r2 * r2
        det = h11 * h22 - h12 * h12
        # interior critical point only counts when the Hessian is PD
        if det <= 1e-300 or h11 <= 0.0:
            return best
        d = pts - cl[None, :]
        b1 = d @ m1 + self.radii[l] * r1
        b2 = d @ m2 + self.radii[l] * r2
        lam1 = (h22 * b1 - h12 * b2) / det
        lam2 = (h11 * b2 - h12 * b1) / det
        ok = (lam1 >= 0.0) & (lam2 >= 0.0) & (lam1 + lam2 <= 1.0)
        if ok.any():
            q = (
                np.einsum("mi,mi->m", d, d)
                - self.radii[l] ** 2
                - (b1 * lam1 + b2 * lam2)
            )
            best = np.where(ok, np.minimum(best, q), best)
        return best

    def eval(self, x):
        pts, scalar = _as_points(x, 2)
        r = np.linalg.norm(pts, axis=1)
        vals = np.zeros(len(pts))
        nz = r > 0.0
        if nz.any():
            u = pts[nz] / r[nz, None]
            lo = np.full(nz.sum(), 0.9 * self._ball_rmin)
            for _ in range(60):  # guarantee the lower bracket is inside
                bad = ~self.contains(lo[:, None] * u)
                if not bad.any():
                    break
                lo[bad] *= 0.5
            hi = np.full(nz.sum(), self._ball_rmax * (1.0 + 1e-9))
            for _ in range(200):
                if np.all(hi - lo <= self.bisect_tol * hi):
                    break
                mid = 0.5 * (lo + hi)
                inside = self.contains(mid[:, None] * u)
                lo = np.where(inside, mid, lo)
                hi = np.where(inside, hi, mid)
            vals[nz] = r[nz] / (0.5 * (lo + hi))
        return _restore(vals, x, scalar)

    __call__ = eval

    def grad(self, x):
        pts, scalar = _as_points(x, 2)
        self._check_nonzero(pts)
        g = central_difference_gradient(self.eval, pts)
        return _restore(g, x, scalar, (2,))

    @classmethod
    def flower(cls):
        """Hull of the four discs of radius 1/2 centered on the half-axes;
        a smooth norm whose dual ball has corners on the diagonals."""
        centers = [[0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [0.0, -0.5]]
        return cls(centers, [0.5, 0.5, 0.5, 0.5])

    def _is_flower(self):
        if len(self.centers) != 4 or not np.allclose(self.radii, 0.5, atol=1e-12):
            return False
        want = {(0.5, 0.0), (-0.5, 0.0), (0.0, 0.5), (0.0, -0.5)}
        got = {(round(c[0], 12), round(c[1], 12)) for c in self.centers}
        return got == want

    def closed_form_dual(self):
        return FlowerDualNorm() if self._is_flower() else None

    def to_dict(self):
        return {
            "family": "disc_hull_gauge",
            "centers": self.centers.tolist(),
            "radii": self.radii.tolist(),
        }


class FlowerDualNorm(Norm):
    """Dual of the flower gauge: H(xi) = (max(|xi_1|, |xi_2|) + |xi|) / 2.

    Its unit ball is the intersection of four parabola-bounded regions
    with focus at the origin; the boundary has corners on the diagonals
    at distance-coordinate ``FLOWER_DUAL_CORNER``, so the norm is not
    differentiable there.
    """

    family = "flower_dual"
    smooth = False
    ball_strictly_convex = True
    corner_tol = 1e-9

    def __init__(self):
        self.dim = 2

    def eval(self, x):
        pts, scalar = _as_points(x, 2)
        a = np.abs(pts)
        vals = 0.5 * (a.max(axis=1) + np.linalg.norm(pts, axis=1))
        return _restore(vals, x, scalar)

    __call__ = eval

    def _one_sided(self, xi):
        radial = xi / (2.0 * np.linalg.norm(xi))
        g1 = radial + np.array([0.5 * np.sign(xi[0]), 0.0])
        g2 = radial + np.array([0.0, 0.5 * np.sign(xi[1])])
        return g1, g2

    def grad(self, x):
        pts, scalar = _as_points(x, 2)
        self._check_nonzero(pts)
        a = np.abs(pts)
        near_corner = np.abs(a[:, 0] - a[:, 1]) <= self.corner_tol * a.max(axis=1)
        if near_corner.any():
            xi = pts[np.argmax(near_corner)]
            raise NonDifferentiableError(
                f"flower dual norm has a corner on the diagonal at {xi}",
                one_sided=self._one_sided(xi),
            )
        g = pts / (2.0 * np.linalg.norm(pts, axis=1, keepdims=True))
        first = a[:, 0] > a[:, 1]
        g[first, 0] += 0.5 * np.sign(pts[first, 0])
        g[~first, 1] += 0.5 * np.sign(pts[~first, 1])
        return _restore(g, x, scalar, (2,))

    def closed_form_dual(self):
        return DiscHullGauge.flower()

    def to_dict(self):
        return {"family": "flower_dual", "dim": 2}


def _golden_max_batched(f, a, b, tol=1e-12, max_iter=90):
    """Maximize f over each bracket [a_k, b_k] by golden-section search.

    ``f`` maps an array of abscissae to an array of values; all brackets
    are narrowed in lockstep until their width drops below ``tol``.
    """
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        keep_low = f(c) >= f(d)
        b = np.where(keep_low, d, b)
        a = np.where(keep_low, a, c)
    mid = 0.5 * (a + b)
    return mid, f(mid)


class NumericDualNorm(Norm):
    """Dual norm computed by maximizing x . xi / H0(x) over directions.

    In the plane a 256-point angular grid locates candidate maxima and
    golden-section search polishes the best three; the result is always
    a lower bound on the true dual value.  In higher dimensions the
    maximization runs projected gradient ascent from seeded random
    sphere starts.
    """

    family = "numeric_dual_of"
    grid_size = 256
    n_polish = 3
    n_starts = 64
    max_ascent_iter = 500

    def __init__(self, inner: Norm, seed=DEFAULT_SEED):
        self.inner = inner
        self.dim = inner.dim
        self.seed = seed
        # differentiability of the dual <-> strict convexity of the
        # primal ball, and vice versa
        self.smooth = inner.ball_strictly_convex
        self.ball_strictly_convex = inner.smooth
        if self.dim == 2:
            ang = np.linspace(0.0, 2.0 * math.pi, self.grid_size, endpoint=False)
            self._grid_u = np.column_stack([np.cos(ang), np.sin(ang)])
            self._grid_h = np.asarray(inner.eval(self._grid_u))
            self._grid_ang = ang

    def eval(self, x):
        pts, scalar = _as_points(x, self.dim)
        if self.dim == 2:
            vals = self._eval2d(pts)[0]
        else:
            vals = np.array([self._ascend(xi)[0] for xi in pts])
        return _restore(vals, x, scalar)

    __call__ = eval

    def _eval2d(self, xis):
        m = len(xis)
        vals = np.zeros(m)
        best_ang = np.zeros(m)
        nz = np.linalg.norm(xis, axis=1) > 0.0
        if not nz.any():
            return vals, best_ang
        sub = xis[nz]
        score = (self._grid_u @ sub.T) / self._grid_h[:, None]  # (grid, m')
        up = np.roll(score, -1, axis=0)
        down = np.roll(score, 1, axis=0)
        is_peak = (score >= up) & (score >= down)
        # polish the strongest few local maxima of every query point
        masked = np.where(is_peak, score, -np.inf)
        order = np.argsort(masked, axis=0)[-self.n_polish:, :]  # (n_polish, m')
        step = 2.0 * math.pi / self.grid_size
        ang0 = self._grid_ang[order]
        lo = (ang0 - step).ravel()
        hi = (ang0 + step).ravel()
        xi_rep = np.repeat(sub[None, :, :], self.n_polish, axis=0).reshape(-1, 2)

        def objective(theta):
            u = np.column_stack([np.cos(theta), np.sin(theta)])
            return np.einsum("mi,mi->m", u, xi_rep) / self.inner.eval(u)

        theta_best, val = _golden_max_batched(objective, lo, hi)
        val = val.reshape(self.n_polish, -1)
        theta_best = theta_best.reshape(self.n_polish, -1)
        pick = np.argmax(val, axis=0)
        cols = np.arange(val.shape[1])
        vals[nz] = val[pick, cols]
        best_ang[nz] = theta_best[pick, cols]
        return vals, best_ang

    def _inner_grad(self, u):
        try:
            return self.inner.grad(u)
        except CapabilityError:
            return central_difference_gradient(self.inner.eval, u)

    def _ascend(self, xi):
        nrm = np.linalg.norm(xi)
        if nrm == 0.0:
            return 0.0, np.zeros(self.dim)
        rng = np.random.default_rng(self.seed)
        u = rng.standard_normal((self.n_starts, self.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        h = np.asarray(self.inner.eval(u))
        f = (u @ xi) / h
        for _ in range(self.max_ascent_iter):
            g = xi[None, :] / h[:, None] - (f / h)[:, None] * self._inner_grad(u)
            g_t = g - np.einsum("mi,mi->m", g, u)[:, None] * u
            gnorm = np.linalg.norm(g_t, axis=1)
            if gnorm.max() <= 1e-12 * nrm:
                break
            alpha = np.full(len(u), 0.2)
            improved = np.zeros(len(u), dtype=bool)
            for _ in range(25):
                trial = u + alpha[:, None] * g_t
                trial /= np.linalg.norm(trial, axis=1, keepdims=True)
                ht = np.asarray(self.inner.eval(trial))
                ft = (trial @ xi) / ht
                accept = (~improved) & (ft >= f + 1e-4 * alpha * gnorm**2)
                u[accept] = trial[accept]
                h[accept] = ht[accept]
                f[accept] = ft[accept]
                improved |= accept
                alpha[~improved] *= 0.5
                if improved.all():
                    break
            if not improved.any():
                break
        k = int(np.argmax(f))
        return float(f[k]), u[k]

    def maximizer(self, xi):
        """A direction u attaining the dual supremum at xi."""
        xi = np.asarray(xi, dtype=float)
        if self.dim == 2:
            _, ang = self._eval2d(xi[None, :])
            return np.array([math.cos(ang[0]), math.sin(ang[0])])
        return self._ascend(xi)[1]

    def grad(self, x):
        pts, scalar = _as_points(x, self.dim)
        self._check_nonzero(pts)
        g = np.empty_like(pts)
        for k, xi in enumerate(pts):
            u = self.maximizer(xi)
            g[k] = u / self.inner.eval(u)
        return _restore(g, x, scalar, (self.dim,))

    def closed_form_dual(self):
        return self.inner  # the dual of the dual is the primal

    def to_dict(self):
        return {"family": "numeric_dual_of", "inner": self.inner.to_dict()}


def norm_from_dict(spec: dict) -> Norm:
    """Rebuild a norm from its JSON description."""
    try:
        family = spec["family"]
    except (TypeError, KeyError) as exc:
        raise ConfigurationError(f"norm spec needs a 'family' key: {spec!r}") from exc
    if family == "euclidean":
        return EuclideanNorm(spec.get("dim", 2))
    if family == "p_norm":
        p = spec["p"]
        p = math.inf if p in ("inf", "Infinity") else float(p)
        return PNorm(p, spec.get("dim", 2))
    if family == "quadratic":
        return QuadraticNorm(spec["matrix"])
    if family == "disc_hull_gauge":
        return DiscHullGauge(spec["centers"], spec["radii"])
    if family == "flower_dual":
        return FlowerDualNorm()
    if family == "numeric_dual_of":
        return NumericDualNorm(norm_from_dict(spec["inner"]))
    raise ConfigurationError(f"unknown norm family {family!r}")


@dataclass(frozen=True)
class DualPair:
    """A norm together with its dual, and the Lagrangian V = H^2/2 built
    from the dual."""

    primal: Norm
    dual: Norm

    @classmethod
    def of(cls, primal: Norm) -> "DualPair":
        return cls(primal, primal.dual())

    @property
    def lagrangian_strictly_convex(self) -> bool:
        # strict convexity of H^2/2 <-> differentiability of the primal
        return self.primal.smooth

    @property
    def lagrangian_c1(self) -> bool:
        # V inherits C1 regularity from the dual norm
        return self.dual.smooth

    def dual_eval(self, xi):
        return self.dual.eval(xi)

    def dual_grad(self, xi):
        return self.dual.grad(xi)

    def lagrangian(self, xi):
        h = np.asarray(self.dual.eval(xi))
        out = 0.5 * h * h
        return float(out) if out.ndim == 0 else out

    def lagrangian_grad(self, xi):
        """DV(xi) = H(xi) DH(xi), extended by DV(0) = 0."""
        xi = np.asarray(xi, dtype=float)
        scalar = xi.ndim == 1
        pts = xi if not scalar else xi[None, :]
        pts = pts.reshape(-1, self.dual.dim)
        out = np.zeros_like(pts)
        nz = np.linalg.norm(pts, axis=1) > 0.0
        if nz.any():
            h = np.asarray(self.dual.eval(pts[nz]))
            out[nz] = h[:, None] * self.dual.grad(pts[nz])
        if scalar:
            return out[0]
        return out.reshape(np.asarray(xi).shape)

    def lagrangian_hessian(self, xi):
        """Per-point Hessian of V, (m, dim, dim); finite differences of
        DV unless the dual is Euclidean or quadratic."""
        pts = np.atleast_2d(np.asarray(xi, dtype=float))
        m, d = pts.shape
        if isinstance(self.dual, EuclideanNorm):
            return np.broadcast_to(np.eye(d), (m, d, d)).copy()
        if isinstance(self.dual, QuadraticNorm):
            return np.broadcast_to(self.dual.matrix, (m, d, d)).copy()
        step = _FD_STEP * np.maximum(1.0, np.linalg.norm(pts, axis=1))
        hess = np.empty((m, d, d))
        for j in range(d):
            e = np.zeros((m, d))
            e[:, j] = step
            hess[:, :, j] = (
                self.lagrangian_grad(pts + e) - self.lagrangian_grad(pts - e)
            ) / (2.0 * step[:, None])
        return 0.5 * (hess + np.swapaxes(hess, 1, 2))


def flower_dual_boundary(theta):
    """Boundary point of the flower dual ball in its right quadrant.

    For |theta| <= pi/4 the boundary is the parabola arc
    ``(2 cos t, 2 sin t) / (1 + cos t)``, which in Cartesian form is
    ``xi_1 = 1 - xi_2^2 / 4``; the arc ends at the diagonal corners.
    """
    t = np.asarray(theta, dtype=float)
    if np.any(np.abs(t) > math.pi / 4.0 + 1e-12):
        raise ValueError("flower dual boundary parametrized on [-pi/4, pi/4]")
    c = np.cos(t)
    pt = np.stack([2.0 * c / (1.0 + c), 2.0 * np.sin(t) / (1.0 + c)], axis=-1)
    return pt


@dataclass
class AxiomReport:
    """Sampled violations of the norm axioms plus equivalence constants."""

    family: str
    dim: int
    samples: int
    zero_value: float
    positivity_ok: bool
    max_homogeneity_violation: float
    max_triangle_violation: float
    sigma: float
    gamma: float

    def to_dict(self):
        return {
            "family": self.family,
            "dim": self.dim,
            "samples": self.samples,
            "zero_value": self.zero_value,
            "positivity_ok": self.positivity_ok,
            "max_homogeneity_violation": self.max_homogeneity_violation,
            "max_triangle_violation": self.max_triangle_violation,
            "sigma": self.sigma,
            "gamma": self.gamma,
        }


def check_norm_axioms(norm: Norm, sample_count: int, seed=DEFAULT_SEED) -> AxiomReport:
    """Check H(0) = 0, positivity, |t|-homogeneity, and the triangle
    inequality on seeded random samples; estimate the Euclidean
    equivalence constants sigma and gamma."""
    if sample_count < 1:
        raise ConfigurationError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((sample_count, norm.dim))
    y = rng.standard_normal((sample_count, norm.dim))
    t = rng.uniform(-3.0, 3.0, sample_count)
    hx = np.asarray(norm.eval(x))
    hy = np.asarray(norm.eval(y))
    hxy = np.asarray(norm.eval(x + y))
    htx = np.asarray(norm.eval(t[:, None] * x))
    homo = np.abs(htx - np.abs(t) * hx)
    tri = hxy - (hx + hy)
    sigma, gamma = norm.equivalence_constants(seed=seed)
    return AxiomReport(
        family=norm.family,
        dim=norm.dim,
        samples=sample_count,
        zero_value=float(norm.eval(np.zeros(norm.dim))),
        positivity_ok=bool(hx.min() > 0.0),
        max_homogeneity_violation=float(homo.max()),
        max_triangle_violation=float(max(tri.max(), 0.0)),
        sigma=sigma,
        gamma=gamma,
    )
