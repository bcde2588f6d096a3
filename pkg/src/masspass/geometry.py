"""Sphere geometry: explicit geodesics, radial parallel transport, and radii.

Geodesics of the weak-form spray are closed-form circular arcs,

    sigma(t) = cos(w t) u + sin(w t) v / w,     w = |v| / sqrt(mu),

which stay on the mass sphere with constant weak speed.  Parallel transport
uses the second spray, the one induced by the strong product: along a curve
sigma it solves

    phi'(t) + (phi(t), sigma'(t)) g(t) / ||g(t)||^2 = 0,

where g(t) is the strong representative of the weak pairing at sigma(t).
This transport is a linear isometry for the strong product and keeps vectors
tangent to the moving base point.  The module also exposes the quantitative
radii that make second-order descent safe: a base radius for the transport
estimate, a radius below which negativity of a fixed subspace persists, one
for transported frames, and finally the descent radius that also controls
holonomy, together with the associated travel-time cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AntipodalPoint, ConfigError
from .hilbert import HilbertPair, SpherePoint, TangentVector

ANTIPODAL_GUARD = 1e-6
SINC_SWITCH = 1e-4
# Arc-length step of the fixed-step RK4 transport integrator, relative to
# sqrt(mu).  One hundred steps per radian leaves the fourth-order global
# error near 1e-10, four decades inside the 1e-6 isometry tolerance.
TRANSPORT_STEP = 1e-2
TRANSPORT_MIN_STEPS = 50


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Geodesic:
    """Constant-weak-speed arc determined by a base point and a tangent vector."""

    base: SpherePoint
    velocity: TangentVector
    omega: float = field(init=False)

    def __post_init__(self):
        pair = self.base.pair
        object.__setattr__(self, "omega", pair.norm_h(self.velocity.v) / math.sqrt(self.base.mu))

    def point(self, t: float) -> np.ndarray:
        u, v, w = self.base.u, self.velocity.v, self.omega
        if w == 0.0:
            return u.copy()
        return math.cos(w * t) * u + (math.sin(w * t) / w) * v

    def derivative(self, t: float) -> np.ndarray:
        u, v, w = self.base.u, self.velocity.v, self.omega
        if w == 0.0:
            return np.zeros_like(u)
        return -w * math.sin(w * t) * u + math.cos(w * t) * v


def geodesic_eval(geo: Geodesic, t: float):
    """Evaluate the arc and its derivative; the point stays on the sphere."""
    pair = geo.base.pair
    pt = pair.sphere_point(geo.point(t), geo.base.mu)
    return pt, TangentVector(pt, geo.derivative(t))


def exp_map(point: SpherePoint, tangent: TangentVector) -> SpherePoint:
    """Follow the arc with initial data (point, tangent) for unit time."""
    geo = Geodesic(point, tangent)
    return point.pair.sphere_point(geo.point(1.0), point.mu)


def _log_factor(theta: float) -> float:
    # theta / sin(theta) with a series branch near zero.
    if theta < SINC_SWITCH:
        t2 = theta * theta
        return 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    return theta / math.sin(theta)


def log_map(origin: SpherePoint, target: SpherePoint) -> TangentVector:
    """Initial velocity of the unit-time arc from origin to target.

    Defined away from the antipode; the weak norm of the result equals
    sqrt(mu) * arccos((target, origin) / mu).
    """
    pair = origin.pair
    mu = origin.mu
    cos_angle = pair.inner_h(target.u, origin.u) / mu
    if cos_angle < -1.0 + ANTIPODAL_GUARD:
        raise AntipodalPoint(
            f"target too close to the antipode: cosine {cos_angle:.8f}"
        )
    cos_angle = min(cos_angle, 1.0)
    theta = math.acos(cos_angle)
    radial = target.u - cos_angle * origin.u
    # Scrub the weakly normal roundoff leak (absolute in mu) so short
    # vectors at large mass still satisfy the relative tangency invariant.
    radial = radial - (pair.inner_h(origin.u, radial) / mu) * origin.u
    return TangentVector(origin, _log_factor(theta) * radial)


# ---------------------------------------------------------------------------
# parallel transport
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialTransport:
    """Transport data along the arc from origin to target.

    The step count follows the fixed-step RK4 policy: at least
    TRANSPORT_MIN_STEPS, refined in proportion to the weak length of the
    connecting arc.
    """

    origin: SpherePoint
    target: SpherePoint
    log_vector: TangentVector = field(init=False)
    steps: int = field(init=False)

    def __post_init__(self):
        lv = log_map(self.origin, self.target)
        speed = self.origin.pair.norm_h(lv.v)
        steps = max(TRANSPORT_MIN_STEPS, math.ceil(speed / (TRANSPORT_STEP * math.sqrt(self.origin.mu))))
        object.__setattr__(self, "log_vector", lv)
        object.__setattr__(self, "steps", steps)


def _transport_columns(rt: RadialTransport, cols: np.ndarray) -> np.ndarray:
    """RK4 integration of the transport equation for a block of columns.

    The strong representative of the weak pairing is linear, so along the
    arc it is a combination of two precomputed vectors; each RK4 stage then
    costs O(d * k) with no linear solves.
    """
    pair = rt.origin.pair
    u0, v = rt.origin.u, rt.log_vector.v
    mu = rt.origin.mu
    w = pair.norm_h(v) / math.sqrt(mu)
    if w == 0.0:
        return cols.copy()

    g_u = pair.riesz_map(u0)
    g_v = pair.riesz_map(v)
    mh_u = pair.gram_h @ u0
    mh_v = pair.gram_h @ v
    # ||g(t)||^2 = (sigma, g(sigma)) is a quadratic in cos/sin coefficients.
    a = float(mh_u @ g_u)
    b = float(mh_u @ g_v)
    c = float(mh_v @ g_v)

    def rhs(t: float, phi: np.ndarray) -> np.ndarray:
        ct = math.cos(w * t)
        st = math.sin(w * t) / w
        g_norm2 = ct * ct * a + 2.0 * ct * st * b + st * st * c
        # (phi, sigma'(t)) for each column
        pairing = -w * math.sin(w * t) * (phi.T @ mh_u) + ct * (phi.T @ mh_v)
        g_sigma = ct * g_u + st * g_v
        return -np.outer(g_sigma, pairing / g_norm2)

    n = rt.steps
    h = 1.0 / n
    phi = cols.copy()
    t = 0.0
    for _ in range(n):
        k1 = rhs(t, phi)
        k2 = rhs(t + 0.5 * h, phi + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, phi + 0.5 * h * k2)
        k4 = rhs(t + h, phi + h * k3)
        phi = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return phi


def parallel_transport(rt: RadialTransport, w0: TangentVector) -> TangentVector:
    """Move w0 from the origin to the target tangent space along the arc."""
    if w0.base is not rt.origin and not np.array_equal(w0.base.u, rt.origin.u):
        raise ConfigError("transported vector must be based at the transport origin")
    out = _transport_columns(rt, w0.v.reshape(-1, 1))[:, 0]
    target = rt.target
    # Remove the weak-normal component accumulated by integrator drift so the
    # result satisfies the tangency invariant exactly.
    return target.pair.project_tangent_h(target, out)


def transport_frame(origin: SpherePoint, basis, target: SpherePoint) -> list:
    """Transport a strongly orthonormal family; the image stays orthonormal."""
    if not basis:
        return []
    rt = RadialTransport(origin, target)
    cols = np.column_stack([b.v for b in basis])
    moved = _transport_columns(rt, cols)
    pair = origin.pair
    out = []
    for j in range(moved.shape[1]):
        out.append(pair.project_tangent_h(target, moved[:, j]))
    return out


def holonomy_defect(origin: SpherePoint, target: SpherePoint, basis, *,
                    travel: float, directions=None) -> float:
    """Worst frame-projection defect after one extra arc leg.

    A unit vector of the transported frame at the target is carried along an
    arc of duration ``travel``; the defect is the strong distance between the
    carried vector and its projection onto the frame transported directly to
    the arc endpoint.  Zero when everything happens along one great circle.
    """
    pair = origin.pair
    frame_t = transport_frame(origin, basis, target)
    k = len(frame_t)
    if k == 0:
        return 0.0
    if directions is None:
        directions = np.eye(k)
    worst = 0.0
    for coeff in np.atleast_2d(np.asarray(directions, dtype=float)):
        coeff = coeff / np.linalg.norm(coeff)
        w = sum(c * f.v for c, f in zip(coeff, frame_t))
        w_t = pair.project_tangent_h(target, w)
        nrm = pair.norm_e(w_t.v)
        if nrm == 0.0:
            continue
        w_t = TangentVector(target, w_t.v / nrm)
        geo = Geodesic(target, w_t)
        end_pt, end_vel = geodesic_eval(geo, travel)
        frame_end = transport_frame(origin, basis, end_pt)
        proj = np.zeros_like(w)
        for f in frame_end:
            proj += pair.inner_e(end_vel.v, f.v) * f.v
        worst = max(worst, pair.norm_e(end_vel.v - proj))
    return worst


# ---------------------------------------------------------------------------
# quantitative radii
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryConstants:
    """Radii and caps controlling second-order descent on a bounded set.

    ``radius`` bounds the strong norm of every point involved, ``deriv_bound``
    dominates both the first derivative and the constrained second form on
    that set (always >= 1), and ``transport_factor`` controls how much radial
    transport can move a vector per unit of weak arc length.
    """

    radius: float
    mu: float
    deriv_bound: float
    transport_factor: float = field(init=False)
    base_radius: float = field(init=False)

    def __post_init__(self):
        if self.radius <= 1.0:
            raise ConfigError("bound radius must exceed 1")
        if self.mu <= 0.0:
            raise ConfigError("mass level must be positive")
        if self.deriv_bound < 1.0:
            raise ConfigError("derivative bound must be at least 1")
        object.__setattr__(
            self, "transport_factor",
            (self.radius + (self.radius - 1.0) / math.sqrt(self.mu)) / self.mu,
        )
        object.__setattr__(self, "base_radius", min(1.0, math.sqrt(self.mu)))

    # -- negativity of a fixed subspace ------------------------------------

    def holder_composite(self, alpha: float, holder_m: float) -> float:
        """Constant transferring Hoelder control to the constrained form."""
        r = self.radius
        return holder_m * (1.0 + (r + r ** alpha) / self.mu)

    def negativity_radius(self, beta: float, alpha: float, holder_m: float) -> float:
        """Ball radius on which a -beta bound degrades to at most -3 beta / 4."""
        c = self.holder_composite(alpha, holder_m)
        return min(1.0, (beta / (4.0 * c)) ** (1.0 / alpha))

    # -- negativity of transported frames -----------------------------------

    def frame_radius(self, beta: float, alpha: float, holder_m: float) -> float:
        """Radius on which transported frames keep a -beta/2 bound."""
        d1 = self.negativity_radius(beta, alpha, holder_m)
        angle = beta / (8.0 * math.sqrt(self.mu) * self.deriv_bound * self.transport_factor)
        if angle < math.pi:
            return min(math.sqrt(self.mu) * (1.0 - math.cos(angle)), d1, self.base_radius)
        return min(d1, self.base_radius)

    # -- descent radius with holonomy control -------------------------------

    def loop_constant(self, n: int) -> float:
        """Constant controlling the frame-projection defect for n+1 frames."""
        return 96.0 * math.sqrt(self.mu) * self.deriv_bound \
            * (3.0 + math.sqrt(n + 1.0)) * self.transport_factor

    def descent_radius(self, beta: float, n: int, alpha: float, holder_m: float) -> float:
        """Radius on which second-order descent along frame directions is safe."""
        d2 = self.frame_radius(beta, alpha, holder_m)
        straight = beta * self.mu / (
            12.0 * self.deriv_bound * self.radius * (1.0 + math.sqrt(n + 1.0))
        )
        angle = beta / self.loop_constant(n)
        if angle < math.pi:
            return min(math.sqrt(self.mu) * (1.0 - math.cos(angle)), straight, d2)
        return min(straight, d2)

    def travel_cap(self, delta: float) -> float:
        """Maximal arc time keeping unit-speed arcs inside a delta-ball."""
        return min(2.0 * self.mu / self.radius, delta / 4.0)
