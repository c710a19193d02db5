"""Cones, star-shaped test domains, and boundary classification.

A cone is either the whole plane or an open sector of aperture up to
2*pi with vertex at the origin.  Domains are star-shaped with respect
to the origin and described by a radial profile rho(phi): Wulff shapes
(level sets of a norm), ellipses, and Wulff shapes with a multiplicative
cosine perturbation of the radial profile.

The boundary of ``domain intersect cone`` splits into the outer part
(the domain boundary inside the cone, tag ``gamma0``) and the part on
the cone's rays (tag ``gamma1``); for the full plane the latter is
empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .norms import Norm, norm_from_dict

TWO_PI = 2.0 * math.pi

GAMMA0 = "gamma0"
GAMMA1 = "gamma1"


class Cone:
    """The full plane or an open sector {r u(phi) : phi in (a0, a1)}."""

    def __init__(self, angle_start=None, angle_end=None):
        if angle_start is None and angle_end is None:
            self.angle_start = None
            self.angle_end = None
            return
        a0, a1 = float(angle_start), float(angle_end)
        width = a1 - a0
        if not (0.0 < width <= TWO_PI):
            raise ConfigurationError(
                f"sector width must lie in (0, 2*pi], got {width}"
            )
        self.angle_start = a0
        self.angle_end = a1

    @classmethod
    def full_plane(cls):
        return cls()

    @classmethod
    def sector(cls, angle_start, angle_end):
        return cls(angle_start, angle_end)

    @property
    def is_full(self) -> bool:
        return self.angle_start is None

    @property
    def width(self) -> float:
        return TWO_PI if self.is_full else self.angle_end - self.angle_start

    def rays(self):
        """Unit direction vectors of the two boundary rays (sector only)."""
        if self.is_full:
            raise ConfigurationError("the full plane has no boundary rays")
        a0, a1 = self.angle_start, self.angle_end
        return (
            np.array([math.cos(a0), math.sin(a0)]),
            np.array([math.cos(a1), math.sin(a1)]),
        )

    def angular_range(self):
        """(phi_start, phi_end, closed) of the aperture."""
        if self.is_full:
            return 0.0, TWO_PI, True
        return self.angle_start, self.angle_end, False

    def contains_angle(self, phi, tol=0.0):
        phi = np.asarray(phi, dtype=float)
        if self.is_full:
            return np.ones_like(phi, dtype=bool)
        rel = np.mod(phi - self.angle_start, TWO_PI)
        return rel <= self.width + tol

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        if self.is_full:
            return np.ones(x.shape[:-1], dtype=bool)
        phi = np.arctan2(x[..., 1], x[..., 0])
        return self.contains_angle(phi, tol=tol)

    def to_dict(self):
        if self.is_full:
            return {"kind": "full_plane"}
        return {
            "kind": "sector",
            "angle_start": self.angle_start,
            "angle_end": self.angle_end,
        }

    @classmethod
    def from_dict(cls, spec):
        kind = spec.get("kind")
        if kind == "full_plane":
            return cls.full_plane()
        if kind == "sector":
            return cls.sector(spec["angle_start"], spec["angle_end"])
        raise ConfigurationError(f"unknown cone kind {kind!r}")


def _unit(phi):
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


class Domain:
    """Star-shaped domain given by a radial profile over angle."""

    kind: str = "abstract"
    cone: Cone
    norm: Norm | None = None

    def radius(self, phi):
        """Radial profile rho(phi) > 0 of the boundary."""
        raise NotImplementedError

    def boundary_point(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.asarray(self.radius(phi))[..., None] * _unit(phi)

    def contains(self, x, tol=0.0):
        """Membership in (open) domain intersect cone, with slack tol."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        phi = np.arctan2(x[..., 1], x[..., 0])
        inside = r < np.asarray(self.radius(phi)) + tol
        return inside & self.cone.contains(x, tol=1e-12)

    @property
    def characteristic_radius(self) -> float:
        lo, hi, _ = self.cone.angular_range()
        phi = np.linspace(lo, hi, 1024)
        return float(np.max(self.radius(phi)))

    def to_dict(self) -> dict:
        raise NotImplementedError


class WulffDomain(Domain):
    """The ball {H0(x) < R} of a norm (a Wulff shape)."""

    kind = "wulff"

    def __init__(self, norm: Norm, R: float, cone: Cone | None = None):
        if R <= 0.0:
            raise ConfigurationError("Wulff radius must be positive")
        if norm.dim != 2:
            raise ConfigurationError("domains are planar; the norm must have dim 2")
        self.norm = norm
        self.R = float(R)
        self.cone = cone if cone is not None else Cone.full_plane()

    def radius(self, phi):
        return self.R / np.asarray(self.norm.eval(_unit(phi)))

    def to_dict(self):
        return {"kind": "wulff", "norm": self.norm.to_dict(), "R": self.R,
                "cone": self.cone.to_dict()}


class EllipseDomain(Domain):
    """Axis-aligned ellipse with semi-axes a and b."""

    kind = "ellipse"

    def __init__(self, a: float, b: float, cone: Cone | None = None):
        if a <= 0.0 or b <= 0.0:
            raise ConfigurationError("ellipse semi-axes must be positive")
        self.a = float(a)
        self.b = float(b)
        self.cone = cone if cone is not None else Cone.full_plane()

    def radius(self, phi):
        phi = np.asarray(phi, dtype=float)
        return 1.0 / np.sqrt((np.cos(phi) / self.a) ** 2 + (np.sin(phi) / self.b) ** 2)

    def to_dict(self):
        return {"kind": "ellipse", "a": self.a, "b": self.b,
                "cone": self.cone.to_dict()}


class PerturbedWulffDomain(Domain):
    """Wulff shape with radial profile modulated by 1 + eps*cos(m*phi).

    At eps = 0 this is exactly the Wulff shape, so the family deforms a
    valid rigidity configuration continuously.
    """

    kind = "perturbed_wulff"

    def __init__(self, norm: Norm, R: float, amplitude: float, mode: int,
                 cone: Cone | None = None):
        if R <= 0.0:
            raise ConfigurationError("Wulff radius must be positive")
        if abs(amplitude) >= 1.0:
            raise ConfigurationError("|amplitude| < 1 required to keep the boundary positive")
        if norm.dim != 2:
            raise ConfigurationError("domains are planar; the norm must have dim 2")
        self.norm = norm
        self.R = float(R)
        self.amplitude = float(amplitude)
        self.mode = int(mode)
        self.cone = cone if cone is not None else Cone.full_plane()

    def radius(self, phi):
        phi = np.asarray(phi, dtype=float)
        base = self.R / np.asarray(self.norm.eval(_unit(phi)))
        return base * (1.0 + self.amplitude * np.cos(self.mode * phi))

    def to_dict(self):
        return {"kind": "perturbed_wulff", "norm": self.norm.to_dict(),
                "R": self.R, "amplitude": self.amplitude, "mode": self.mode,
                "cone": self.cone.to_dict()}


def domain_from_dict(spec: dict, default_norm: Norm | None = None) -> Domain:
    kind = spec.get("kind")
    cone = Cone.from_dict(spec["cone"]) if "cone" in spec else Cone.full_plane()
    if kind == "wulff":
        norm = norm_from_dict(spec["norm"]) if "norm" in spec else default_norm
        if norm is None:
            raise ConfigurationError("wulff domain needs a norm")
        return WulffDomain(norm, spec["R"], cone)
    if kind == "ellipse":
        return EllipseDomain(spec["a"], spec["b"], cone)
    if kind == "perturbed_wulff":
        norm = norm_from_dict(spec["norm"]) if "norm" in spec else default_norm
        if norm is None:
            raise ConfigurationError("perturbed wulff domain needs a norm")
        return PerturbedWulffDomain(norm, spec["R"], spec["amplitude"],
                                    spec["mode"], cone)
    raise ConfigurationError(f"unknown domain kind {kind!r}")


def wulff_boundary_points(norm: Norm, R: float, n: int, cone: Cone | None = None):
    """n points on the level set H0 = R spanning the cone aperture."""
    if n < 1:
        raise ConfigurationError("need at least one boundary point")
    cone = cone if cone is not None else Cone.full_plane()
    lo, hi, closed = cone.angular_range()
    phi = (
        np.linspace(lo, hi, n, endpoint=False)
        if closed
        else np.linspace(lo, hi, n)
    )
    u = _unit(phi)
    return R * u / np.asarray(norm.eval(u))[:, None]


@dataclass
class ClassifiedBoundary:
    """Closed boundary polyline of domain intersect cone with one tag
    per segment; segment i joins points[i] to points[(i+1) % len]."""

    points: np.ndarray
    tags: list[str]

    def segments(self):
        nxt = np.roll(np.arange(len(self.points)), -1)
        return [
            (self.points[i], self.points[nxt[i]], self.tags[i])
            for i in range(len(self.points))
        ]


def classify_boundary(domain: Domain, n: int = 256) -> ClassifiedBoundary:
    """Split the boundary into the outer arc (gamma0) and, for sector
    cones, the two straight radial segments (gamma1)."""
    if n < 2:
        raise ConfigurationError("need n >= 2 boundary samples")
    cone = domain.cone
    lo, hi, closed = cone.angular_range()
    if closed:
        phi = np.linspace(lo, hi, n, endpoint=False)
        pts = domain.boundary_point(phi)
        return ClassifiedBoundary(points=pts, tags=[GAMMA0] * n)
    phi = np.linspace(lo, hi, n)
    arc = domain.boundary_point(phi)
    pts = np.vstack([[0.0, 0.0], arc])
    tags = [GAMMA1] + [GAMMA0] * (n - 1) + [GAMMA1]
    return ClassifiedBoundary(points=pts, tags=tags)
