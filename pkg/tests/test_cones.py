import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conicbenders import cones
from conicbenders.cones import ConeSpec, Orthant, SecondOrderCone
from conicbenders.errors import InputError


def test_contains_examples():
    assert cones.contains(cones.orthant(2), [1.0, 2.0], 0.0)
    assert cones.contains(cones.soc(3), [1.0, 0.6, 0.8], 1e-12)
    assert not cones.contains(cones.soc(3), [0.5, 1.0, 0.0], 0.0)


def test_dual_contains_examples():
    assert cones.dual_contains(cones.orthant(3), [0.0, 0.0, 0.0])
    assert cones.dual_contains(cones.soc(3), [1.0, 0.6, 0.8], 1e-12)
    assert not cones.dual_contains(cones.orthant(2), [1.0, -0.1], 0.0)


def test_project_examples():
    np.testing.assert_allclose(cones.project(cones.orthant(2), [-1.0, 3.0]), [0.0, 3.0])
    np.testing.assert_allclose(cones.project(cones.soc(3), [-2.0, 0.0, 0.0]), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(cones.project(cones.soc(3), [0.0, 2.0, 0.0]), [1.0, 1.0, 0.0])


def test_soc_projection_matches_dense_search():
    # brute-force nearest cone point to (0, 2, 0) over a polar grid of the boundary
    z = np.array([0.0, 2.0, 0.0])
    t = np.linspace(0, 3, 601)
    ang = np.linspace(0, 2 * np.pi, 721)
    T, A = np.meshgrid(t, ang)
    pts = np.stack([T, T * np.cos(A), T * np.sin(A)], axis=-1).reshape(-1, 3)
    best = pts[np.argmin(np.linalg.norm(pts - z, axis=1))]
    np.testing.assert_allclose(cones.project(cones.soc(3), z), best, atol=1e-2)


def test_membership_tolerance_is_caller_supplied():
    z = [1.0, 1.0 + 1e-9]
    assert not cones.contains(cones.soc(2), z, 0.0)
    assert cones.contains(cones.soc(2), z, 1e-8)


def test_errors():
    with pytest.raises(InputError):
        cones.contains(cones.orthant(2), [1.0, 2.0, 3.0])
    with pytest.raises(InputError):
        cones.contains(cones.orthant(1), [1.0], -1e-3)
    with pytest.raises(InputError):
        SecondOrderCone(1)
    with pytest.raises(InputError):
        Orthant(0)


def test_batched_inputs():
    cone = ConeSpec((Orthant(1), SecondOrderCone(2)))
    z = np.array([[1.0, 1.0, 0.5], [-1.0, 1.0, 0.5], [1.0, 0.2, 0.5]])
    np.testing.assert_array_equal(cones.contains(cone, z), [True, False, False])
    assert cones.project(cone, z).shape == z.shape
    assert cones.distance(cone, z).shape == (3,)


def test_spec_roundtrip():
    cone = ConeSpec((Orthant(2), SecondOrderCone(3)))
    assert cone.to_list() == [{"kind": "orthant", "dim": 2}, {"kind": "soc", "dim": 3}]
    assert ConeSpec.from_list(cone.to_list()) == cone
    assert cone.total_dim == 5


def test_random_member_in_cone():
    cone = ConeSpec((Orthant(2), SecondOrderCone(3)))
    pts = cones.random_member(cone, np.random.default_rng(0), 200)
    assert cones.contains(cone, pts, 1e-12).all()


cone_strategy = st.lists(
    st.one_of(st.integers(1, 4).map(Orthant), st.integers(2, 5).map(SecondOrderCone)),
    min_size=1, max_size=3,
).map(lambda blocks: ConeSpec(tuple(blocks)))


@st.composite
def cone_and_vector(draw):
    cone = draw(cone_strategy)
    z = draw(arrays(np.float64, cone.total_dim,
                    elements=st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False)))
    return cone, z


@settings(max_examples=300, deadline=None)
@given(cone_and_vector())
def test_projection_properties(cz):
    cone, z = cz
    p = cones.project(cone, z)
    scale = 1.0 + np.linalg.norm(z)
    np.testing.assert_allclose(cones.project(cone, p), p, atol=1e-10 * scale)
    assert cones.contains(cone, p, 1e-10 * scale)
    assert abs(np.dot(z - p, p)) <= 1e-8 * scale ** 2
    # the residual lies in the polar cone, i.e. its negation is in the dual cone
    assert cones.dual_contains(cone, p - z, 1e-9 * scale)


@settings(max_examples=200, deadline=None)
@given(cone_and_vector(), st.floats(0.0, 1.0))
def test_self_duality(cz, tol):
    cone, u = cz
    assert cones.dual_contains(cone, u, tol) == cones.contains(cone, u, tol)


@settings(max_examples=200, deadline=None)
@given(cone_and_vector())
def test_distance_bounds(cz):
    cone, z = cz
    d = cones.distance(cone, z)
    # the origin is in the cone, so the distance never exceeds the norm
    assert 0.0 <= d <= np.linalg.norm(z) + 1e-12
    if cones.contains(cone, z):
        assert d <= 1e-12 * (1 + np.linalg.norm(z))
