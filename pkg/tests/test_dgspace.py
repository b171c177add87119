import numpy as np
import pytest

from ehldg.dgspace import (DgField, average, broken_norm, broken_norm_nu, composite_gauss, evaluate,
                           evaluate_points, integral, interpolate, jump, l2_error, trace_pair)
from ehldg.errors import MeshMismatchError
from ehldg.mesh import DomainSpec, build

from conftest import make_space


def test_evaluate_zero_and_constant():
    s = make_space(degree=2)
    v, g = evaluate(s.zeros(), 1, [0.3])
    assert v == 0.0 and np.all(g == 0.0)
    c = interpolate(lambda x: 0 * x + 3.0, s)
    v, g = evaluate(c, 2, [-0.7])
    assert v == pytest.approx(3.0, abs=1e-14) and abs(g[0]) < 1e-13


def test_gradient_of_quadratic_matches_fd():
    s = make_space(cells=(3,), degree=2)
    u = interpolate(lambda x: x**2, s)
    h = 1e-6
    fd = (u(np.array([0.5 + h])) - u(np.array([0.5 - h])))[0] / (2 * h)
    e = 1  # x=0.5 lies in the middle element
    _, g = evaluate(u, e, s.to_master(e, np.array([[0.5]]))[0])
    assert g[0] == pytest.approx(1.0, abs=1e-12)
    assert fd == pytest.approx(1.0, abs=1e-8)


def test_interpolation_reproduces_polynomials():
    s = make_space(cells=(5,), degree=1)
    u = interpolate(lambda x: 1.0 + 0 * x, s)
    x = np.linspace(0, 1, 17)
    np.testing.assert_allclose(u(x), 1.0, atol=1e-14)
    u = interpolate(lambda x: x, s)
    np.testing.assert_allclose(u(x), x, atol=1e-14)


@pytest.mark.parametrize("p", [1, 2])
def test_interpolation_error_ratio(p):
    errs = []
    for n in (8, 16, 32):
        s = make_space(cells=(n,), degree=p)
        errs.append(l2_error(interpolate(lambda x: np.sin(np.pi * x), s), lambda x: np.sin(np.pi * x)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    np.testing.assert_allclose(ratios, 2.0 ** (p + 1), rtol=0.1)


def test_jump_and_average():
    s = make_space(cells=(2,), degree=1)
    c = np.array([2.0, 0.0, 3.0, 0.0])  # Legendre: constant mode first
    f = DgField(s, c)
    assert np.allclose(average(f, 1), 2.5)
    assert np.allclose(jump(f, 1), -1.0 * s.mesh.face_normal[1])
    assert np.allclose(np.abs(jump(f, 1)), 1.0)
    # boundary: [w] = w N
    vm, vp = trace_pair(f, 2)
    assert vp is None
    np.testing.assert_allclose(jump(f, 2), 3.0 * s.mesh.face_normal[2][None, :])


def test_continuous_field_has_equal_traces():
    s = make_space(cells=(4,), degree=2)
    f = interpolate(lambda x: 1 + 2 * x, s)
    for face in (1, 2, 3):
        vm, vp = trace_pair(f, face)
        np.testing.assert_allclose(vm, vp, atol=1e-13)


def test_broken_norm_two_element_hand_value():
    s = make_space(cells=(2,), degree=1)
    f = DgField(s, np.array([0.0, 0.0, 1.0, 0.0]))
    a = 7.0
    # interior face: a * 1^2 / 0.5; right boundary: a / 0.5; left boundary: 0
    assert broken_norm(f, a, 1.0) ** 2 == pytest.approx(2 * a + 2 * a, rel=1e-14)
    assert broken_norm(s.zeros()) == 0.0


def test_broken_norm_continuous_vanishing():
    s = make_space(cells=(4,), degree=2)
    f = interpolate(lambda x: x * (1 - x), s)
    semi = np.sqrt(np.sum(s.vol.w * s.gradient(f.coeffs)[:, 0] ** 2))
    assert broken_norm(f) == pytest.approx(semi, rel=1e-12)
    assert semi == pytest.approx(np.sqrt(1 / 3), rel=1e-12)


def test_broken_norm_nu_linear_single_element():
    s = make_space(cells=(1,), degree=1)
    f = interpolate(lambda x: x, s)
    nu2 = broken_norm_nu(f, 10.0, 1.0) ** 2 - broken_norm(f, 10.0, 1.0) ** 2
    # two boundary faces, {dv/dnu} = +-1, |e| = 1, p = 1
    assert nu2 == pytest.approx(2.0, rel=1e-13)


def test_broken_norm_nu_dominates(rng):
    s = make_space(cells=(5,), degree=2)
    for _ in range(20):
        f = DgField(s, rng.standard_normal(s.ndofs))
        assert broken_norm_nu(f) >= broken_norm(f)


def test_l2_error_oracle():
    s = make_space(cells=(8,), degree=1)
    u = interpolate(lambda x: np.sin(np.pi * x), s)
    rule = composite_gauss(12, 10)
    tot = 0.0
    for e in range(8):
        lo = e / 8
        x = lo + 0.5 * (rule.points[:, 0] + 1) / 8
        d = np.sin(np.pi * x) - u(x)
        tot += np.sum(rule.weights * d**2) / 16
    assert l2_error(u, lambda x: np.sin(np.pi * x)) == pytest.approx(np.sqrt(tot), abs=1e-10)
    assert l2_error(s.zeros(), lambda x: 1.0 + 0 * x) == pytest.approx(1.0, rel=1e-14)
    assert l2_error(u, u) < 1e-15


def test_integral_and_mismatch():
    s = make_space(bounds=((-1.0, 1.0),), cells=(4,), degree=2)
    assert integral(interpolate(lambda x: x**2, s)) == pytest.approx(2 / 3, rel=1e-14)
    with pytest.raises(MeshMismatchError):
        DgField(s, np.zeros(3))


def test_2d_interpolation_and_evaluation():
    s = make_space(bounds=((0.0, 1.0), (0.0, 2.0)), cells=(3, 2), degree=1)
    f = interpolate(lambda x, y: 1 + x - 2 * y, s)
    pts = np.array([[0.1, 0.3], [0.9, 1.7], [0.5, 1.0]])
    np.testing.assert_allclose(evaluate_points(f, pts), 1 + pts[:, 0] - 2 * pts[:, 1], atol=1e-13)
    assert integral(f) == pytest.approx(2.0 + 1.0 - 4.0, rel=1e-13)
