import math

import numpy as np
import pytest

from masspass.errors import AntipodalPoint, ConfigError
from masspass.geometry import (Geodesic, GeometryConstants, RadialTransport,
                               exp_map, geodesic_eval, holonomy_defect, log_map,
                               parallel_transport, transport_frame)
from masspass.hilbert import HilbertPair, TangentVector, random_pair


@pytest.fixture
def setup():
    rng = np.random.default_rng(0)
    pair = random_pair(8, rng)
    mu = 1.9
    u = pair.renormalize(rng.standard_normal(8), mu)
    p = pair.sphere_point(u, mu)
    v = pair.project_tangent_h(p, rng.standard_normal(8))
    return pair, mu, p, v, rng


def unit_sphere():
    pair = HilbertPair(np.eye(3), np.eye(3))
    return pair, 1.0


# -- arcs -------------------------------------------------------------------

def test_arc_initial_data(setup):
    pair, mu, p, v, _ = setup
    pt, vel = geodesic_eval(Geodesic(p, v), 0.0)
    assert np.allclose(pt.u, p.u)
    assert np.allclose(vel.v, v.v)


def test_arc_quarter_period():
    pair, mu = unit_sphere()
    p = pair.sphere_point(np.array([1.0, 0.0, 0.0]), mu)
    v = TangentVector(p, np.array([0.0, math.pi / 2.0, 0.0]))
    pt, _ = geodesic_eval(Geodesic(p, v), 1.0)
    # cosine term vanished: the point is the normalized velocity direction
    assert np.allclose(pt.u, [0.0, 1.0, 0.0], atol=1e-14)


def test_arc_sphere_preservation_and_speed(setup):
    pair, mu, p, v, _ = setup
    geo = Geodesic(p, v)
    speed = pair.norm_h(v.v)
    for t in np.linspace(-2.0, 2.0, 17):
        sig = geo.point(t)
        assert abs(pair.inner_h(sig, sig) - mu) <= 1e-10 * mu
        assert abs(pair.norm_h(geo.derivative(t)) - speed) <= 1e-10


def test_arc_homogeneity(setup):
    pair, mu, p, v, rng = setup
    for _ in range(10):
        a, t = rng.uniform(0.1, 2.0), rng.uniform(-1.0, 1.0)
        left = Geodesic(p, v).point(a * t)
        right = Geodesic(p, TangentVector(p, a * v.v)).point(t)
        assert np.abs(left - right).max() <= 1e-12 * math.sqrt(mu)


def test_arc_second_order_equation(setup):
    pair, mu, p, v, _ = setup
    geo = Geodesic(p, v)
    h = 1e-4
    for t in (0.0, 0.4, 1.1):
        second = (geo.point(t + h) - 2.0 * geo.point(t) + geo.point(t - h)) / h ** 2
        omega2 = (pair.norm_h(geo.derivative(t)) / math.sqrt(mu)) ** 2
        residual = pair.norm_h(second + omega2 * geo.point(t))
        assert residual <= 1e-6 * max(1.0, omega2 * math.sqrt(mu))


def test_zero_velocity_constant_curve(setup):
    pair, mu, p, _, _ = setup
    zero = TangentVector(p, np.zeros(pair.dim))
    pt, vel = geodesic_eval(Geodesic(p, zero), 3.7)
    assert np.allclose(pt.u, p.u)
    assert np.allclose(vel.v, 0.0)


# -- exponential and inverse --------------------------------------------------

def test_exp_zero_vector(setup):
    pair, mu, p, _, _ = setup
    assert np.allclose(exp_map(p, TangentVector(p, np.zeros(pair.dim))).u, p.u)


def test_exp_antipode():
    pair, mu = unit_sphere()
    p = pair.sphere_point(np.array([1.0, 0.0, 0.0]), mu)
    v = TangentVector(p, np.array([0.0, math.pi, 0.0]))
    assert np.allclose(exp_map(p, v).u, -p.u, atol=1e-14)


def test_log_at_base_point(setup):
    pair, mu, p, _, _ = setup
    assert np.abs(log_map(p, p).v).max() <= 1e-12


def test_log_orthogonal_target_norm():
    pair, mu = unit_sphere()
    p = pair.sphere_point(np.array([1.0, 0.0, 0.0]), mu)
    q = pair.sphere_point(np.array([0.0, 1.0, 0.0]), mu)
    lv = log_map(p, q)
    assert abs(pair.norm_h(lv.v) - math.sqrt(mu) * math.pi / 2.0) <= 1e-12


def test_log_round_sphere_oracle():
    # Elementary trigonometry on the unit 2-sphere: the inverse arc from the
    # first axis to (cos t, sin t, 0) is t times the second axis.
    pair, mu = unit_sphere()
    p = pair.sphere_point(np.array([1.0, 0.0, 0.0]), mu)
    for theta in (0.3, 1.2, 2.6):
        q = pair.sphere_point(np.array([math.cos(theta), math.sin(theta), 0.0]), mu)
        lv = log_map(p, q)
        assert np.allclose(lv.v, [0.0, theta, 0.0], atol=1e-12)


def test_exp_log_round_trips(setup):
    pair, mu, p, v, rng = setup
    for scale in (0.05, 0.4, 0.9):
        w = TangentVector(p, v.v * scale * math.sqrt(mu) * math.pi / pair.norm_h(v.v))
        q = exp_map(p, w)
        if pair.inner_h(q.u, p.u) / mu <= -0.9:
            continue
        back = exp_map(p, log_map(p, q))
        assert pair.norm_e(back.u - q.u) <= 1e-9
        forth = exp_map(q, log_map(q, p))
        assert pair.norm_e(forth.u - p.u) <= 1e-9


def test_log_norm_identity(setup):
    pair, mu, p, v, _ = setup
    w = TangentVector(p, 0.7 * v.v / pair.norm_h(v.v))
    q = exp_map(p, w)
    lv = log_map(p, q)
    expected = math.sqrt(mu) * math.acos(min(1.0, pair.inner_h(q.u, p.u) / mu))
    assert abs(pair.norm_h(lv.v) - expected) <= 1e-10


def test_log_near_antipode_raises():
    pair, mu = unit_sphere()
    p = pair.sphere_point(np.array([1.0, 0.0, 0.0]), mu)
    q = pair.sphere_point(np.array([-1.0, 1e-9, 0.0]) / math.sqrt(1 + 1e-18), mu)
    with pytest.raises(AntipodalPoint):
        log_map(p, q)


# -- transport ----------------------------------------------------------------

def test_transport_zero_length_identity(setup):
    pair, mu, p, v, _ = setup
    w = parallel_transport(RadialTransport(p, p), v)
    assert np.abs(w.v - v.v).max() <= 1e-12


def test_transport_round_sphere_velocity_oracle():
    # With coinciding forms the two sprays agree, so an arc transports its
    # own initial velocity onto its terminal velocity.
    pair, mu = unit_sphere()
    rng = np.random.default_rng(1)
    u = pair.renormalize(rng.standard_normal(3), mu)
    p = pair.sphere_point(u, mu)
    raw = pair.project_tangent_h(p, rng.standard_normal(3))
    v = TangentVector(p, 0.8 * raw.v / pair.norm_h(raw.v))
    geo = Geodesic(p, v)
    q, vel_end = geodesic_eval(geo, 1.0)
    moved = parallel_transport(RadialTransport(p, q), v)
    assert pair.norm_e(moved.v - vel_end.v) <= 1e-8


def test_transport_isometry_and_tangency(setup):
    pair, mu, p, v, rng = setup
    q = exp_map(p, TangentVector(p, 0.6 * v.v / pair.norm_h(v.v)))
    for _ in range(5):
        w = pair.project_tangent_h(p, rng.standard_normal(pair.dim))
        tw = parallel_transport(RadialTransport(p, q), w)
        assert abs(pair.norm_e(tw.v) - pair.norm_e(w.v)) <= 1e-6 * pair.norm_e(w.v)
        assert abs(pair.inner_h(q.u, tw.v)) <= 1e-6 * pair.norm_e(w.v)


def test_transport_inverse_recovery(setup):
    pair, mu, p, v, rng = setup
    q = exp_map(p, TangentVector(p, 0.5 * v.v / pair.norm_h(v.v)))
    w = pair.project_tangent_h(p, rng.standard_normal(pair.dim))
    tw = parallel_transport(RadialTransport(p, q), w)
    back = parallel_transport(RadialTransport(q, p), tw)
    assert pair.norm_e(back.v - w.v) <= 1e-6 * pair.norm_e(w.v)


def test_transport_bound_per_unit_length(setup):
    pair, mu, p, v, rng = setup
    radius = pair.norm_e(p.u) + 1.5
    constants = GeometryConstants(radius, mu, 1.0)
    for _ in range(10):
        w = pair.project_tangent_h(p, rng.standard_normal(pair.dim))
        step = pair.project_tangent_h(p, rng.standard_normal(pair.dim))
        step = TangentVector(p, step.v * rng.uniform(0.05, 0.3)
                             * constants.base_radius / pair.norm_e(step.v))
        q = exp_map(p, step)
        if pair.norm_e(q.u - p.u) > constants.base_radius:
            continue
        lv = log_map(p, q)
        tw = parallel_transport(RadialTransport(p, q), w)
        lhs = pair.norm_e(tw.v - w.v)
        rhs = constants.transport_factor * pair.norm_h(lv.v) * pair.norm_e(w.v)
        assert lhs <= rhs * (1.0 + 1e-9) + 1e-12


def test_frame_transport_identity_and_orthonormality(setup):
    pair, mu, p, v, rng = setup
    frame = []
    for _ in range(3):
        cand = pair.project_tangent_h(p, rng.standard_normal(pair.dim)).v
        for w in frame:
            cand = cand - pair.inner_e(cand, w.v) * w.v
        frame.append(TangentVector(p, cand / pair.norm_e(cand)))
    same = transport_frame(p, frame, p)
    for a, b in zip(same, frame):
        assert np.abs(a.v - b.v).max() <= 1e-12
    q = exp_map(p, TangentVector(p, 0.5 * v.v / pair.norm_h(v.v)))
    moved = transport_frame(p, frame, q)
    for i in range(3):
        for j in range(3):
            target = 1.0 if i == j else 0.0
            assert abs(pair.inner_e(moved[i].v, moved[j].v) - target) <= 1e-5


def test_triangle_loop_rotation_matches_spherical_area():
    # Octant triangle on the unit sphere: transporting around it rotates
    # tangent vectors by the enclosed area, a quarter turn.
    pair, mu = unit_sphere()
    e1, e2, e3 = np.eye(3)
    a = pair.sphere_point(e1, mu)
    b = pair.sphere_point(e2, mu)
    c = pair.sphere_point(e3, mu)
    w = pair.project_tangent_h(a, e3)
    for src, dst in [(a, b), (b, c), (c, a)]:
        w = parallel_transport(RadialTransport(src, dst),
                               pair.tangent_vector(src, w.v))
    cosang = float(np.clip(w.v @ e3, -1.0, 1.0))
    angle = math.acos(cosang / np.linalg.norm(w.v))
    assert abs(angle - math.pi / 2.0) <= 1e-6
    assert abs(np.linalg.norm(w.v) - 1.0) <= 1e-6


# -- frame defect ---------------------------------------------------------------

def test_holonomy_defect_zero_at_origin(setup):
    pair, mu, p, v, rng = setup
    frame = [TangentVector(p, v.v / pair.norm_e(v.v))]
    assert holonomy_defect(p, p, frame, travel=0.0) <= 1e-12


def test_holonomy_defect_single_great_circle_flat_limit():
    # All legs along one great circle with coinciding forms: no loop, no
    # defect beyond integrator noise.
    pair, mu = unit_sphere()
    p = pair.sphere_point(np.array([1.0, 0.0, 0.0]), mu)
    v = TangentVector(p, np.array([0.0, 1.0, 0.0]))
    frame = [v]
    q = exp_map(p, TangentVector(p, 0.4 * v.v))
    defect = holonomy_defect(p, q, frame, travel=0.3, directions=np.array([[1.0]]))
    assert defect <= 1e-8


def test_holonomy_defect_bounded_on_descent_instance():
    from masspass.models import random_descent_instance
    from masspass.geometry import GeometryConstants

    rng = np.random.default_rng(3)
    inst = random_descent_instance(rng)
    f = inst.functional
    constants = GeometryConstants(inst.radius, inst.mu,
                                  max(1.0, f.bound_k(inst.radius, inst.mu)))
    d3 = constants.descent_radius(inst.beta, 1, f.alpha, f.holder_m(inst.radius))
    cap = constants.travel_cap(d3)
    pair = inst.pair
    probe = pair.project_tangent_h(inst.point, rng.standard_normal(pair.dim))
    probe = TangentVector(inst.point, probe.v / pair.norm_e(probe.v))
    target = exp_map(inst.point, TangentVector(inst.point, 0.3 * d3 * probe.v))
    defect = holonomy_defect(inst.point, target, inst.frame, travel=0.7 * cap,
                             directions=rng.standard_normal((4, 2)))
    assert defect <= inst.beta / (24.0 * constants.deriv_bound)


# -- quantitative radii ----------------------------------------------------------

def test_constants_positive_and_ordered():
    constants = GeometryConstants(3.0, 1.5, 2.0)
    beta, alpha, m = 0.4, 1.0, 1.2
    d1 = constants.negativity_radius(beta, alpha, m)
    d2 = constants.frame_radius(beta, alpha, m)
    d3 = constants.descent_radius(beta, 1, alpha, m)
    assert 0 < d3 <= d2 <= min(d1, constants.base_radius)
    assert constants.travel_cap(d3) > 0
    assert constants.transport_factor > 0


def test_negativity_radius_scaling_and_cap():
    constants = GeometryConstants(3.0, 1.0, 1.0)
    alpha = 1.0
    m = 50.0   # large enough that the cap at one is inactive
    d_small = constants.negativity_radius(0.2, alpha, m)
    d_double = constants.negativity_radius(0.4, alpha, m)
    assert abs(d_double / d_small - 2.0 ** (1.0 / alpha)) <= 1e-12
    assert constants.negativity_radius(0.9, alpha, 1e-6) == 1.0


def test_negativity_radius_alpha_half_scaling():
    constants = GeometryConstants(3.0, 1.0, 1.0)
    alpha = 0.5
    m = 50.0
    d_small = constants.negativity_radius(0.1, alpha, m)
    d_double = constants.negativity_radius(0.2, alpha, m)
    assert abs(d_double / d_small - 2.0 ** (1.0 / alpha)) <= 1e-9


def test_travel_cap_containment(setup):
    # Arcs of capped duration started near a point stay in its ball.
    pair, mu, p, v, rng = setup
    radius = pair.norm_e(p.u) + 1.0
    constants = GeometryConstants(radius, mu, 1.0)
    delta = 0.8
    for _ in range(20):
        step = pair.project_tangent_h(p, rng.standard_normal(pair.dim))
        step = TangentVector(p, step.v * rng.uniform(0.0, 0.49) * delta
                             / pair.norm_e(step.v))
        mid = exp_map(p, step)
        if pair.norm_e(mid.u - p.u) >= delta / 2.0:
            continue
        dirn = pair.project_tangent_h(mid, rng.standard_normal(pair.dim))
        dirn = TangentVector(mid, dirn.v / pair.norm_e(dirn.v))
        cap = constants.travel_cap(delta)
        geo = Geodesic(mid, dirn)
        for t in np.linspace(0.0, cap * (1 - 1e-9), 7):
            assert pair.norm_e(geo.point(t) - p.u) < delta
            # velocity drift along the arc
            assert pair.norm_e(geo.derivative(t) - dirn.v) <= radius * cap / mu + 1e-12


def test_constants_validation():
    with pytest.raises(ConfigError):
        GeometryConstants(0.9, 1.0, 1.0)
    with pytest.raises(ConfigError):
        GeometryConstants(2.0, -1.0, 1.0)
    with pytest.raises(ConfigError):
        GeometryConstants(2.0, 1.0, 0.5)
