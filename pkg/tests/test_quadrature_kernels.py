import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenlab import _kernels_py, kernels
from degenlab.geometry import DomainSpec, build_mesh
from degenlab.quadrature import DEFAULT_RULE, DUNAVANT7_POINTS, DUNAVANT7_WEIGHTS, GL8_NODES, GL8_WEIGHTS, QuadratureRule
from oracles import sigma_triangle_polar

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")

coord = st.floats(-1.0, 1.0, allow_nan=False)


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def test_rule_weights_positive_and_sum_to_reference_area():
    assert np.all(DUNAVANT7_WEIGHTS > 0)
    assert abs(DUNAVANT7_WEIGHTS.sum() - 0.5) < 1e-15
    assert np.allclose(DEFAULT_RULE.barycentric.sum(axis=1), 1.0)


@pytest.mark.parametrize("i,j", [(i, j) for i in range(6) for j in range(6 - i)])
def test_dunavant_exact_to_degree_five(i, j):
    from math import factorial
    exact = factorial(i) * factorial(j) / factorial(i + j + 2)
    x, y = DUNAVANT7_POINTS.T
    assert abs(np.dot(DUNAVANT7_WEIGHTS, x ** i * y ** j) - exact) < 1e-15


def test_gauss_legendre_on_unit_interval():
    for k in range(16):
        assert abs(np.dot(GL8_WEIGHTS, GL8_NODES ** k) - 1.0 / (k + 1)) < 1e-14


def test_rule_validation():
    with pytest.raises(ValueError):
        QuadratureRule(DUNAVANT7_POINTS, -DUNAVANT7_WEIGHTS)
    with pytest.raises(ValueError):
        QuadratureRule(DUNAVANT7_POINTS, DUNAVANT7_WEIGHTS, rel_tol=0.0)


def _tri(*pts):
    return np.array(pts, dtype=float), np.array([[0, 1, 2]])


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0, 1.5, 1.9])
@pytest.mark.parametrize("p1,p2", [((1.0, 0.0), (0.0, 1.0)), ((0.3, -0.05), (0.1, 0.4)), ((0.02, 0.0), (0.01, 0.02))])
def test_origin_triangle_matches_polar_integral(alpha, p1, p2):
    v, t = _tri((0.0, 0.0), p1, p2)
    if _cross(p1, p2) < 0:
        t = t[:, ::-1].copy()
    ref = sigma_triangle_polar(p1, p2, alpha)
    for backend in ("python", None):
        val, status = kernels.sigma_integrals(v, t, "power", alpha, backend=backend)
        assert abs(val[0] - ref) <= 1e-9 * ref
        assert status[0] == 0


def test_constant_model_gives_area():
    m = build_mesh(DomainSpec.disk(1.0), 1)
    val, _ = kernels.sigma_integrals(m.vertices, m.triangles, "constant", 0.0)
    assert np.allclose(val, m.areas(), rtol=1e-14)


def test_triangle_containing_origin_is_split():
    # origin strictly inside: the integral equals the sum over the three sub-triangles
    p = [(0.5, -0.2), (0.1, 0.6), (-0.4, -0.3)]
    v, t = _tri(*p)
    val, _ = kernels.sigma_integrals(v, t, "power", 0.7)
    ref = sum(sigma_triangle_polar(p[i], p[(i + 1) % 3], 0.7) for i in range(3))
    assert abs(val[0] - ref) <= 1e-9 * ref


def test_power_sum_adds_terms():
    m = build_mesh(DomainSpec.truncated_plane(2.0), 0)
    a, _ = kernels.sigma_integrals(m.vertices, m.triangles, "power", 0.5)
    b, _ = kernels.sigma_integrals(m.vertices, m.triangles, "power", 3.0)
    s, _ = kernels.sigma_integrals(m.vertices, m.triangles, "power_sum", 0.5, 3.0)
    assert np.allclose(s, a + b, rtol=1e-9)


@compiled
@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(coord, coord), min_size=3, max_size=3), st.floats(0.05, 1.95))
def test_backends_agree_on_random_triangles(pts, alpha):
    v = np.array(pts)
    area = 0.5 * abs(_cross(v[1] - v[0], v[2] - v[0]))
    if area < 1e-3:
        return
    t = np.array([[0, 1, 2]])
    a, sa = kernels.sigma_integrals(v, t, "power_sum", alpha, 3.0)
    b, sb = kernels.sigma_integrals(v, t, "power_sum", alpha, 3.0, backend="python")
    assert abs(a[0] - b[0]) <= 1e-11 * abs(b[0])


@compiled
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([0.2, 1.0, 2.0, 3.5]))
def test_backends_agree_on_nonlinear_terms(seed, e):
    m = build_mesh(DomainSpec.disk(1.0), 1)
    u = np.random.default_rng(seed).normal(size=m.nv)
    A = m.areas()
    for name in ("load_terms", "weight_matrix_terms"):
        a = getattr(kernels, name)(m.triangles, A, u, e)
        b = getattr(kernels, name)(m.triangles, A, u, e, backend="python")
        assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
    pa = kernels.power_integral(m.triangles, A, u, e + 2)
    pb = kernels.power_integral(m.triangles, A, u, e + 2, backend="python")
    assert abs(pa - pb) <= 1e-12 * pb


def test_fallback_module_is_complete():
    for name in ("sigma_integrals", "load_terms", "weight_matrix_terms", "power_integral"):
        assert callable(getattr(_kernels_py, name))
