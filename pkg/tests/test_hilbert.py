import logging

import numpy as np
import pytest

from masspass.errors import ConfigError, DimensionMismatch
from masspass.hilbert import HilbertPair, random_pair


@pytest.fixture
def pair():
    return random_pair(10, np.random.default_rng(0))


def test_sphere_membership_of_weak_norm(pair):
    rng = np.random.default_rng(1)
    u = pair.renormalize(rng.standard_normal(10), 2.5)
    assert abs(pair.inner_h(u, u) - 2.5) <= 1e-9 * 2.5


def test_weak_norm_dominated_by_strong(pair):
    rng = np.random.default_rng(2)
    for _ in range(1000):
        v = rng.standard_normal(10)
        assert pair.norm_h(v) <= pair.norm_e(v) * (1.0 + 1e-12)


def test_orthonormal_basis_identity_pair():
    pair = HilbertPair(np.eye(4), np.eye(4))
    a = np.array([1.0, 0.0, 0.0, 0.0])
    b = np.array([0.0, 1.0, 0.0, 0.0])
    assert pair.inner_e(a, b) == 0.0
    assert pair.norm_e(a) == 1.0


def test_riesz_map_identity_when_forms_coincide():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((6, 6))
    gram = m @ m.T + 6 * np.eye(6)
    pair = HilbertPair(gram, gram, rescale=False)
    v = rng.standard_normal(6)
    assert np.allclose(pair.riesz_map(v), v, atol=1e-12)


def test_riesz_map_defining_identity(pair):
    rng = np.random.default_rng(4)
    u = rng.standard_normal(10)
    g = pair.riesz_map(u)
    for _ in range(100):
        h = rng.standard_normal(10)
        assert abs(pair.inner_e(g, h) - pair.inner_h(u, h)) <= 1e-10


def test_riesz_map_norm_chain(pair):
    rng = np.random.default_rng(5)
    for _ in range(200):
        u = rng.standard_normal(10)
        g = pair.riesz_map(u)
        assert pair.norm_e(g) <= pair.norm_h(u) * (1.0 + 1e-12)
        assert pair.norm_h(u) <= pair.norm_e(u) * (1.0 + 1e-12)


def test_riesz_lower_bound_on_sphere(pair):
    rng = np.random.default_rng(6)
    mu = 1.7
    for _ in range(50):
        u = pair.renormalize(rng.standard_normal(10), mu)
        g = pair.riesz_map(u)
        assert pair.norm_e(g) * pair.norm_e(u) >= mu - 1e-10


def test_riesz_map_linearity(pair):
    rng = np.random.default_rng(7)
    x, y = rng.standard_normal(10), rng.standard_normal(10)
    a, b = 1.3, -0.4
    lhs = pair.riesz_map(a * x + b * y)
    rhs = a * pair.riesz_map(x) + b * pair.riesz_map(y)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())


def test_project_tangent_h_removes_normal_direction(pair):
    rng = np.random.default_rng(8)
    mu = 1.0
    p = pair.sphere_point(pair.renormalize(rng.standard_normal(10), mu), mu)
    assert np.abs(pair.project_tangent_h(p, p.u).v).max() <= 1e-12


def test_project_tangent_h_idempotent(pair):
    rng = np.random.default_rng(9)
    p = pair.sphere_point(pair.renormalize(rng.standard_normal(10), 1.0), 1.0)
    t = pair.project_tangent_h(p, rng.standard_normal(10))
    again = pair.project_tangent_h(p, t.v)
    assert np.abs(again.v - t.v).max() <= 1e-12


def test_project_tangent_h_coordinate_case():
    pair = HilbertPair(np.eye(3), np.eye(3))
    p = pair.sphere_point(np.array([1.0, 0.0, 0.0]), 1.0)
    out = pair.project_tangent_h(p, np.array([1.0, 1.0, 0.0]))
    assert np.allclose(out.v, [0.0, 1.0, 0.0], atol=1e-14)


def test_project_tangent_e_kills_riesz_direction(pair):
    rng = np.random.default_rng(10)
    p = pair.sphere_point(pair.renormalize(rng.standard_normal(10), 1.0), 1.0)
    g = pair.riesz_map(p.u)
    out = pair.project_tangent_e(p, g)
    assert pair.norm_e(out) <= 1e-12 * pair.norm_e(g)


def test_project_tangent_e_weak_orthogonality(pair):
    rng = np.random.default_rng(11)
    p = pair.sphere_point(pair.renormalize(rng.standard_normal(10), 1.0), 1.0)
    for _ in range(20):
        out = pair.project_tangent_e(p, rng.standard_normal(10))
        assert abs(pair.inner_h(p.u, out)) <= 1e-10
        assert abs(pair.inner_e(out, pair.riesz_map(p.u))) <= 1e-10


def test_projections_coincide_when_forms_coincide():
    rng = np.random.default_rng(12)
    m = rng.standard_normal((5, 5))
    gram = m @ m.T + 5 * np.eye(5)
    pair = HilbertPair(gram, gram, rescale=False)
    p = pair.sphere_point(pair.renormalize(rng.standard_normal(5), 1.0), 1.0)
    x = rng.standard_normal(5)
    a = pair.project_tangent_h(p, x).v
    b = pair.project_tangent_e(p, x)
    assert np.abs(a - b).max() <= 1e-12


def test_injection_violation_rescales_with_warning(caplog):
    rng = np.random.default_rng(13)
    m = rng.standard_normal((5, 5))
    gram_h = m @ m.T + 5 * np.eye(5)
    with caplog.at_level(logging.WARNING):
        pair = HilbertPair(0.1 * gram_h, gram_h)
    assert any("rescaling" in rec.message for rec in caplog.records)
    for _ in range(100):
        v = rng.standard_normal(5)
        assert pair.norm_h(v) <= pair.norm_e(v) * (1.0 + 1e-10)


def test_asymmetric_gram_rejected():
    bad = np.eye(3)
    bad[0, 1] = 1e-6
    with pytest.raises(ConfigError):
        HilbertPair(bad, np.eye(3))


def test_dimension_mismatch():
    pair = HilbertPair(np.eye(3), np.eye(3))
    with pytest.raises(DimensionMismatch):
        pair.inner_e(np.ones(4), np.ones(4))


def test_json_round_trip(tmp_path):
    pair = random_pair(6, np.random.default_rng(14))
    path = tmp_path / "pair.json"
    import json
    path.write_text(json.dumps(pair.to_dict()))
    loaded = HilbertPair.from_json(path)
    assert np.allclose(loaded.gram_e, pair.gram_e)
    assert np.allclose(loaded.gram_h, pair.gram_h)
