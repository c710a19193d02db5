"""Rigidity experiments on the anisotropic torsion problem in cones.

The battery turns the comparison structure of the rigidity theorem into
measurements: the extreme norm-radii of the outer boundary, the solved
field sandwiched between exact Wulff solutions at those radii, the two
boundary-flux claims at the extreme points, the overdetermined-condition
discrimination test against a flux profile, and flow lines of the field
DH(Du) along which the solution must increase at rate H(Du).

Tolerances that absorb discretization error are calibrated constants:
the comparison slack (per h^2) and the claims slack (per h) come from
Euclidean-disc measurements with a family-transfer margin, while the
overdetermined pass threshold is calibrated per run as a multiple of
the deviation measured on the exact Wulff shape of the same norm at the
same resolution.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NonDifferentiableError
from .fem import (
    ScalarField,
    SolverOptions,
    boundary_flux,
    exact_wulff_solution,
    solve_torsion,
)
from .fields import DiscreteFieldEvaluator, field_evaluator
from .geometry import Cone, Domain, WulffDomain
from .meshing import triangulate
from .norms import DEFAULT_SEED, DualPair, Norm, EuclideanNorm

#: comparison slack per h^2 (measured <= 0.065 on the Euclidean disc;
#: 10x margin carries it across norms and cones)
COMPARISON_TOL_COEFF = 0.65
#: relative claims slack per (h / R): the one-layer interior flux sits
#: about 0.5 h/R below the boundary limit on the Euclidean disc
CLAIMS_REL_TOL_COEFF = 1.0
#: pass threshold = this factor times the same-norm Wulff baseline
OVERDET_CALIBRATION_FACTOR = 3.0


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": self.value,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class ExperimentReport:
    name: str
    checks: list[Check]
    stats: dict
    provenance: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "stats": self.stats,
            "provenance": self.provenance,
        }

    def summary_lines(self):
        lines = [f"[{'PASS' if self.passed else 'FAIL'}] {self.name}"]
        for c in self.checks:
            lines.append(
                f"  {'pass' if c.passed else 'FAIL'}  {c.name}: "
                f"value={c.value:.6g} tol={c.tolerance:.6g} {c.detail}"
            )
        return lines


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def _provenance(config, h, solver_residual=None, seed=DEFAULT_SEED):
    return {
        "config_hash": config_hash(config),
        "h": h,
        "solver_residual": solver_residual,
        "seed": seed,
    }


class Profile:
    """Flux profile q(r) prescribed along the outer boundary.

    Kinds: linear q(r) = c r, power q(r) = c r^alpha with alpha > 1,
    and a monotone interpolation table.  The rigidity mechanism needs
    the ratio q(r)/r non-decreasing; linear profiles (constant ratio)
    are the borderline case and are accepted, but only a strictly
    increasing ratio forces equal radii.
    """

    def __init__(self, kind, fn, params):
        self.kind = kind
        self._fn = fn
        self.params = params

    @classmethod
    def linear(cls, c):
        if c <= 0:
            raise ConfigurationError("linear profile needs c > 0")
        return cls("linear", lambda r: c * np.asarray(r, dtype=float), {"c": c})

    @classmethod
    def power(cls, c, alpha):
        if c <= 0 or alpha <= 1:
            raise ConfigurationError("power profile needs c > 0 and alpha > 1")
        return cls(
            "power",
            lambda r: c * np.asarray(r, dtype=float) ** alpha,
            {"c": c, "alpha": alpha},
        )

    @classmethod
    def table(cls, points):
        pts = sorted((float(r), float(q)) for r, q in points)
        r = np.array([p[0] for p in pts])
        q = np.array([p[1] for p in pts])
        if len(r) < 2 or np.any(q <= 0) or np.any(r <= 0):
            raise ConfigurationError("table profile needs >= 2 positive points")
        return cls(
            "table",
            lambda x: np.interp(np.asarray(x, dtype=float), r, q),
            {"points": pts},
        )

    def __call__(self, r):
        return self._fn(r)

    def ratio_trend(self, r_lo, r_hi, samples=100, rel_tol=1e-9):
        """Trend of q(r)/r on [r_lo, r_hi]: 'increasing', 'constant',
        or 'other'."""
        r = np.linspace(r_lo, r_hi, samples)
        ratio = np.asarray(self(r)) / r
        d = np.diff(ratio)
        scale = np.abs(ratio).max()
        if np.all(np.abs(d) <= rel_tol * scale):
            return "constant"
        if np.all(d > -rel_tol * scale) and d.max() > rel_tol * scale:
            return "increasing"
        return "other"

    def to_dict(self):
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, spec):
        kind = spec.get("kind")
        if kind == "linear":
            return cls.linear(spec["c"])
        if kind == "power":
            return cls.power(spec["c"], spec["alpha"])
        if kind == "table":
            return cls.table(spec["points"])
        raise ConfigurationError(f"unknown profile kind {kind!r}")


@dataclass
class RadiiBounds:
    r_min: float
    r_max: float
    z_min: np.ndarray
    z_max: np.ndarray
    phi_min: float
    phi_max: float

    def __iter__(self):  # unpack as (r_min, r_max)
        yield self.r_min
        yield self.r_max


def _golden_extremum(fn, lo, hi, minimize, iters=200, tol=1e-14):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    sign = 1.0 if minimize else -1.0
    a, b = lo, hi
    for _ in range(iters):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        if sign * fn(c) <= sign * fn(d):
            b = d
        else:
            a = c
    mid = 0.5 * (a + b)
    return mid, fn(mid)


def radii_bounds(domain: Domain, norm: Norm | None = None, samples=4096) -> RadiiBounds:
    """Extremes of the norm over the outer boundary: dense parameter
    sampling polished by golden-section search around the winners."""
    norm = norm if norm is not None else (domain.norm or EuclideanNorm())
    lo, hi, closed = domain.cone.angular_range()
    phi = np.linspace(lo, hi, samples, endpoint=not closed)
    vals = np.asarray(norm.eval(domain.boundary_point(phi)))
    step = (hi - lo) / samples

    def h0_at(p):
        return float(norm.eval(domain.boundary_point(p)))

    k_min, k_max = int(np.argmin(vals)), int(np.argmax(vals))
    lo_min = max(lo, phi[k_min] - step) if not closed else phi[k_min] - step
    hi_min = min(hi, phi[k_min] + step) if not closed else phi[k_min] + step
    p_min, v_min = _golden_extremum(h0_at, lo_min, hi_min, minimize=True)
    lo_max = max(lo, phi[k_max] - step) if not closed else phi[k_max] - step
    hi_max = min(hi, phi[k_max] + step) if not closed else phi[k_max] + step
    p_max, v_max = _golden_extremum(h0_at, lo_max, hi_max, minimize=False)
    if v_min > v_max:  # safety; cannot happen on a continuous profile
        raise ConfigurationError("boundary radius extremes out of order")
    return RadiiBounds(
        r_min=v_min,
        r_max=v_max,
        z_min=domain.boundary_point(p_min),
        z_max=domain.boundary_point(p_max),
        phi_min=p_min,
        phi_max=p_max,
    )


def comparison_test(
    domain: Domain,
    pair: DualPair,
    h: float,
    opts: SolverOptions | None = None,
    tol_coeff: float = COMPARISON_TOL_COEFF,
) -> ExperimentReport:
    """Sandwich the solved field between the exact Wulff solutions at
    the extreme boundary radii: u_small <= u everywhere the small Wulff
    shape reaches, and u <= u_large everywhere."""
    mesh = triangulate(domain, h)
    fld = solve_torsion(mesh, pair, opts=opts)
    rb = radii_bounds(domain, pair.primal)
    n_dim = pair.primal.dim
    u1 = exact_wulff_solution(pair.primal, rb.r_min, n_dim)
    u2 = exact_wulff_solution(pair.primal, rb.r_max, n_dim)
    h0 = np.asarray(pair.primal.eval(mesh.vertices))
    inner = h0 < rb.r_min
    tol = max(1e-8, tol_coeff * h * h)
    viol1 = float(np.max(u1.value(mesh.vertices[inner]) - fld.values[inner], initial=0.0))
    viol2 = float(np.max(fld.values - u2.value(mesh.vertices), initial=0.0))
    config = {"experiment": "comparison", "domain": domain.to_dict(),
              "pair": pair.primal.to_dict(), "h": h}
    return ExperimentReport(
        name="comparison_test",
        checks=[
            Check("lower_wulff_below_solution", viol1 <= tol, viol1, tol),
            Check("solution_below_upper_wulff", viol2 <= tol, viol2, tol),
        ],
        stats={
            "r_min": rb.r_min,
            "r_max": rb.r_max,
            "max_violation_lower": viol1,
            "max_violation_upper": viol2,
            "inner_node_count": int(inner.sum()),
        },
        provenance=_provenance(config, h, fld.residuals[-1] if fld.residuals else None),
    )


def _flux_near(report, z):
    mids = report.midpoints()
    k = int(np.argmin(np.linalg.norm(mids - np.asarray(z)[None, :], axis=1)))
    return report.gamma0[k]


def rigidity_claims(
    domain: Domain,
    pair: DualPair,
    profile: Profile,
    h: float,
    opts: SolverOptions | None = None,
) -> ExperimentReport:
    """Discrete analogues of the two flux claims at the extreme boundary
    points, and the resulting ratio chain that forces equal radii when
    q(r)/r strictly increases."""
    rb = radii_bounds(domain, pair.primal)
    trend = profile.ratio_trend(rb.r_min * 0.999, rb.r_max * 1.001 + 1e-12)
    if trend == "other":
        raise ConfigurationError(
            "profile ratio q(r)/r must be non-decreasing on the tested range"
        )
    mesh = triangulate(domain, h)
    fld = solve_torsion(mesh, pair, opts=opts)
    rep = boundary_flux(fld, pair)
    n_dim = pair.primal.dim
    rec1 = _flux_near(rep, rb.z_min)
    rec2 = _flux_near(rep, rb.z_max)
    rel_tol = max(1e-7, CLAIMS_REL_TOL_COEFF * h / rb.r_max)
    bound1 = rb.r_min / n_dim
    bound2 = rb.r_max / n_dim
    resid1 = max(0.0, bound1 - rec1.flux)
    resid2 = max(0.0, rec2.flux - bound2)
    dev = np.abs(rep.fluxes() - np.asarray(profile(rep.h0_values()))) / np.asarray(
        profile(rep.h0_values())
    )
    match_tol = 3.0 * rel_tol
    flux_matches = bool(dev.max() <= match_tol)
    q1 = float(profile(rb.r_min)) / rb.r_min
    q2 = float(profile(rb.r_max)) / rb.r_max
    ratio_chain = q2 <= q1 + 1e-12 * max(q1, q2)
    forced = flux_matches and ratio_chain and trend == "increasing"
    radii_equal = rb.r_max - rb.r_min <= max(1e-8, 2.0 * rel_tol * rb.r_max)
    checks = [
        Check(
            "claim1_flux_at_least_rmin_over_N",
            resid1 <= rel_tol * bound1,
            resid1,
            rel_tol * bound1,
            detail=f"flux(z1)={rec1.flux:.6g}, bound={bound1:.6g}",
        ),
        Check(
            "claim2_flux_at_most_rmax_over_N",
            resid2 <= rel_tol * bound2,
            resid2,
            rel_tol * bound2,
            detail=f"flux(z2)={rec2.flux:.6g}, bound={bound2:.6g}",
        ),
    ]
    if forced:
        checks.append(
            Check(
                "rigidity_forces_equal_radii",
                radii_equal,
                rb.r_max - rb.r_min,
                max(1e-8, 2.0 * rel_tol * rb.r_max),
                detail="flux matches profile and ratio strictly increases",
            )
        )
    config = {"experiment": "claims", "domain": domain.to_dict(),
              "pair": pair.primal.to_dict(), "profile": profile.to_dict(), "h": h}
    return ExperimentReport(
        name="rigidity_claims",
        checks=checks,
        stats={
            "r_min": rb.r_min,
            "r_max": rb.r_max,
            "flux_z1": rec1.flux,
            "flux_z2": rec2.flux,
            "ratio_at_rmin": q1,
            "ratio_at_rmax": q2,
            "profile_trend": trend,
            "flux_profile_max_dev": float(dev.max()),
            "flux_matches_profile": flux_matches,
            "rigidity_forced": forced,
        },
        provenance=_provenance(config, h, fld.residuals[-1] if fld.residuals else None),
    )


def overdetermined_check(
    domain: Domain,
    pair: DualPair,
    profile: Profile,
    h: float,
    opts: SolverOptions | None = None,
    pass_threshold: float | None = None,
    calibration_factor: float = OVERDET_CALIBRATION_FACTOR,
) -> ExperimentReport:
    """Measure the relative deviation of the solved boundary flux from
    the prescribed profile; a domain consistent with being a Wulff shape
    stays below the calibrated threshold, a perturbed one exceeds it."""
    if not (pair.dual.smooth and pair.primal.smooth):
        raise ConfigurationError(
            "rigidity requires both norms C1 away from 0 (strictly convex "
            "Lagrangian with differentiable energy); this pair is rejected"
        )
    rb = radii_bounds(domain, pair.primal)
    trend = profile.ratio_trend(rb.r_min * 0.999, rb.r_max * 1.001 + 1e-12)
    if trend == "other":
        raise ConfigurationError(
            "profile ratio q(r)/r must be non-decreasing on the tested range"
        )
    mesh = triangulate(domain, h)
    fld = solve_torsion(mesh, pair, opts=opts)
    rep = boundary_flux(fld, pair)
    q_vals = np.asarray(profile(rep.h0_values()))
    dev = np.abs(rep.fluxes() - q_vals) / q_vals
    baseline = None
    if pass_threshold is None:
        r_mid = 0.5 * (rb.r_min + rb.r_max)
        base_dom = WulffDomain(pair.primal, r_mid, domain.cone)
        base_mesh = triangulate(base_dom, h)
        base_fld = solve_torsion(base_mesh, pair, opts=opts)
        base_rep = boundary_flux(base_fld, pair)
        base_q = np.asarray(profile(base_rep.h0_values()))
        baseline = float(
            (np.abs(base_rep.fluxes() - base_q) / base_q).max()
        )
        pass_threshold = calibration_factor * baseline
    max_dev = float(dev.max())
    config = {"experiment": "overdetermined", "domain": domain.to_dict(),
              "pair": pair.primal.to_dict(), "profile": profile.to_dict(), "h": h}
    return ExperimentReport(
        name="overdetermined_check",
        checks=[
            Check(
                "flux_matches_profile",
                max_dev <= pass_threshold,
                max_dev,
                pass_threshold,
                detail="consistent with a Wulff shape iff within threshold",
            )
        ],
        stats={
            "max_deviation": max_dev,
            "mean_deviation": float(dev.mean()),
            "threshold": pass_threshold,
            "baseline_deviation": baseline,
            "r_min": rb.r_min,
            "r_max": rb.r_max,
        },
        provenance=_provenance(config, h, fld.residuals[-1] if fld.residuals else None),
    )


@dataclass
class FlowlineResult:
    """Integral curve of DH(Du) with the solution values along it."""

    points: np.ndarray
    values: np.ndarray
    residuals: np.ndarray  # |du/dt - H(Du)| per accepted step
    speeds: np.ndarray  # H(Du) at the start of each accepted step
    strictly_increasing: bool
    stop_reason: str
    constrained_from: int | None = None

    def max_relative_residual(self, speed_floor=0.05) -> float:
        mask = self.speeds >= speed_floor
        if not mask.any():
            return 0.0
        return float((self.residuals[mask] / self.speeds[mask]).max())


class _StageStop(Exception):
    def __init__(self, reason):
        self.reason = reason


def trace_flowline(
    evaluator,
    pair: DualPair,
    x0,
    dt: float,
    max_steps: int = 100000,
    critical_tol: float = 1e-8,
) -> FlowlineResult:
    """RK4 integration of x' = DH(Du(x)).

    Stops at the outer boundary, at a critical point of the field, or
    after ``max_steps``.  On hitting a cone ray the curve continues
    constrained to the ray with the velocity projected onto it (the
    natural boundary condition makes the field tangent there in the
    continuum); it releases if the velocity points strictly inward.
    """
    x0 = np.asarray(x0, dtype=float)
    cone = getattr(evaluator, "cone", Cone.full_plane())
    if not evaluator.inside(x0):
        raise ValueError(f"starting point {x0} is outside the domain")

    constrained = {"on": False, "tangent": None, "since": None}

    def ray_of(x):
        u0, u1 = cone.rays()
        d0 = abs(u0[0] * x[1] - u0[1] * x[0])
        d1 = abs(u1[0] * x[1] - u1[1] * x[0])
        return u0 if d0 <= d1 else u1

    def clamp(x):
        # gradient queries slightly outside the cone are evaluated on
        # the ray (the field is tangent there in the continuum)
        if not cone.is_full and not bool(cone.contains(x, tol=1e-12)):
            tangent = ray_of(x)
            return max(float(x @ tangent), 0.0) * tangent
        return x

    def velocity(x):
        try:
            du = evaluator.gradient_at(clamp(x))
        except ValueError:
            raise _StageStop("gamma0") from None
        speed = float(pair.dual.eval(du))
        if speed < critical_tol:
            raise _StageStop("critical_point")
        v = pair.dual.grad(du)
        if constrained["on"]:
            v = float(v @ constrained["tangent"]) * constrained["tangent"]
        return v

    def rk4(x):
        k1 = velocity(x)
        k2 = velocity(x + 0.5 * dt * k1)
        k3 = velocity(x + 0.5 * dt * k2)
        k4 = velocity(x + dt * k3)
        return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    points = [x0]
    values = [evaluator.value_at(x0)]
    residuals = []
    speeds = []
    reason = "max_steps"
    for step in range(max_steps):
        x = points[-1]
        du = evaluator.gradient_at(x)
        speed = float(pair.dual.eval(du))
        if speed < critical_tol:
            reason = "critical_point"
            break
        if constrained["on"]:
            # release if the free velocity points strictly inward
            v_free = pair.dual.grad(du)
            tangent = constrained["tangent"]
            nu = np.array([tangent[1], -tangent[0]])
            if not bool(cone.contains(x + 1e-9 * nu, tol=0.0)):
                nu = -nu
            if float(v_free @ (-nu)) > 1e-6:
                constrained["on"] = False
        try:
            x_new = rk4(x)
        except _StageStop as stop:
            reason = stop.reason
            break
        except ValueError:
            reason = "gamma0"
            break
        if not cone.is_full and not bool(cone.contains(x_new, tol=1e-12)):
            # crossed a cone ray: continue constrained to it
            tangent = ray_of(x_new)
            x_new = max(float(x_new @ tangent), 0.0) * tangent
            if not constrained["on"]:
                constrained["on"] = True
                constrained["tangent"] = tangent
                constrained["since"] = step
        elif constrained["on"]:
            tangent = constrained["tangent"]
            x_new = max(float(x_new @ tangent), 0.0) * tangent
        if not evaluator.inside(x_new):
            reason = "gamma0"
            break
        u_new = evaluator.value_at(x_new)
        if u_new <= values[-1]:
            reason = "stalled"
            break
        # du/dt over the step is a centered estimate at the midpoint;
        # compare against the dual speed of the field's own gradient
        x_mid = clamp(0.5 * (x + x_new))
        grad_at = getattr(evaluator, "element_gradient_at", evaluator.gradient_at)
        try:
            speed_mid = float(pair.dual.eval(grad_at(x_mid)))
        except ValueError:
            speed_mid = speed
        residuals.append(abs((u_new - values[-1]) / dt - speed_mid))
        speeds.append(speed_mid)
        points.append(x_new)
        values.append(u_new)
    values_arr = np.asarray(values)
    return FlowlineResult(
        points=np.asarray(points),
        values=values_arr,
        residuals=np.asarray(residuals),
        speeds=np.asarray(speeds),
        strictly_increasing=len(values_arr) > 1 and bool(np.all(np.diff(values_arr) > 0)),
        stop_reason=reason,
        constrained_from=constrained["since"],
    )
