import numpy as np
import pytest

from ehldg.errors import MeshError
from ehldg.mesh import DomainSpec, build, refine_uniform


def test_counts_1d():
    m = build(DomainSpec(((0.0, 1.0),), (4,)))
    assert m.n_elements == 4 and m.n_faces == 5
    assert m.face_boundary.sum() == 2


def test_counts_2d():
    m = build(DomainSpec(((0.0, 1.0), (0.0, 1.0)), (2, 2)))
    assert m.n_elements == 4 and m.n_faces == 12
    assert (~m.face_boundary).sum() == 4


def test_uniform_sizes():
    m = build(DomainSpec(((-4.0, 2.0),), (6,)))
    assert np.all(m.elem_extent[:, 0] == 1.0)


def test_refine():
    m = build(DomainSpec(((0.0, 1.0),), (4,)), degree=2)
    r = refine_uniform(m)
    assert r.n_elements == 8
    assert np.all(r.degree == 2)
    np.testing.assert_array_equal(r.elem_extent, np.repeat(m.elem_extent, 2, axis=0) / 2)
    assert r.bounds == m.bounds
    m2 = build(DomainSpec(((0.0, 1.0), (0.0, 3.0)), (2, 2)))
    r2 = refine_uniform(m2)
    assert r2.shape == (4, 4) and r2.bounds == ((0.0, 1.0), (0.0, 3.0))


def test_normals_point_minus_to_plus():
    m = build(DomainSpec(((0.0, 1.0), (0.0, 1.0)), (3, 2)))
    for f in range(m.n_faces):
        e_m, e_p = m.elements_of_face(f)
        if e_p is None:
            continue
        c_m = 0.5 * (m.elem_lo[e_m] + m.elem_hi[e_m])
        c_p = 0.5 * (m.elem_lo[e_p] + m.elem_hi[e_p])
        assert np.dot(c_p - c_m, m.face_normal[f]) > 0
        np.testing.assert_array_equal(m.normal_plus(f), -m.face_normal[f])


@pytest.mark.parametrize("bounds,cells", [(((0.0, 1.0),), (0,)), (((1.0, 0.0),), (2,)),
                                          (((0.0, 1.0),) * 3, (1, 1, 1))])
def test_invalid(bounds, cells):
    with pytest.raises(MeshError):
        build(DomainSpec(bounds, cells))


def test_arrays_immutable():
    m = build(DomainSpec(((0.0, 1.0),), (2,)))
    with pytest.raises(ValueError):
        m.elem_lo[0, 0] = 5.0
