import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cpconsensus import (CutCollection, CutOrigin, DimensionError, HalfSpace, box_basis, contains,
                         violation)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestViolation:
    def test_axis_slack(self):
        assert violation(HalfSpace([1, 0], 1), [2, 0]) == 1.0

    def test_boundary(self):
        assert violation(HalfSpace([1, 0], 1), [1, 5]) == 0.0

    def test_scaled_normal(self):
        # (3*3 + 4*4)/5 - 2
        h = HalfSpace(np.array([3, 4]) / 5, 2)
        assert violation(h, [3, 4]) == pytest.approx(3.0, abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            violation(HalfSpace([1, 0], 1), [1, 2, 3])

    @given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite),
           arrays(float, 3, elements=finite), st.floats(0, 1))
    def test_affine_in_z(self, a, z1, z2, alpha):
        a[0] = a[0] if abs(a[0]) > 1e-3 else 1.0
        h = HalfSpace(a, 0.7)
        lhs = violation(h, alpha * z1 + (1 - alpha) * z2)
        rhs = alpha * violation(h, z1) + (1 - alpha) * violation(h, z2)
        assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + np.abs(a).sum() * 1e3))


class TestHalfSpace:
    @pytest.mark.parametrize("a", [[0.0, 0.0], [np.inf, 1.0], [np.nan, 0.0]])
    def test_rejects_bad_normals(self, a):
        with pytest.raises(ValueError):
            HalfSpace(a, 1.0)

    def test_rejects_infinite_offset(self):
        with pytest.raises(ValueError):
            HalfSpace([1.0], np.inf)

    def test_wire_roundtrip(self):
        h = HalfSpace([0.6, -0.8], 1.5)
        w = h.to_wire()
        assert w.dtype == np.float64 and w.size == 3
        g = HalfSpace.from_wire(w)
        assert np.array_equal(g.a, h.a) and g.b == h.b


class TestContains:
    def test_origin_in_unit_corner(self):
        H = CutCollection([[1, 0], [0, 1]], [1, 1])
        assert contains(H, [0, 0], 0.0)

    def test_tolerance_absorbs_roundoff(self):
        assert contains(CutCollection([[1, 0]], [1]), [1 + 1e-12, 0], 1e-9)

    @pytest.mark.parametrize("z", [[0, 0], [1.5, 0], [-3, 7], [2, 2]])
    def test_empty_polyhedron(self, z):
        H = CutCollection([[1, 0], [-1, 0]], [1, -2])
        assert not contains(H, z, 1e-9)

    def test_negative_tol_rejected(self):
        with pytest.raises(ValueError):
            contains(box_basis(1, 1), [0], -1.0)

    def test_merge_never_enlarges(self, rng):
        for _ in range(50):
            H1 = CutCollection(rng.normal(size=(4, 2)), rng.uniform(0, 1, 4))
            H2 = CutCollection(rng.normal(size=(3, 2)), rng.uniform(0, 1, 3))
            for z in rng.normal(size=(20, 2)):
                if contains(H1.union(H2), z, 1e-12):
                    assert contains(H1, z, 1e-12) and contains(H2, z, 1e-12)


class TestCutCollection:
    def test_normalizes(self):
        H = CutCollection([[3, 4]], [10])
        assert np.allclose(H.A, [[0.6, 0.8]]) and H.b[0] == pytest.approx(2.0)

    def test_scaled_copies_collapse(self):
        H = CutCollection([[1, 1], [2, 2], [1, 0]], [1, 2, 3])
        assert len(H) == 2

    def test_near_duplicates_within_tau(self):
        H = CutCollection([[1, 0], [1, 1e-10]], [1, 1 + 5e-10])
        assert len(H) == 1
        H = CutCollection([[1, 0], [1, 1e-6]], [1, 1])
        assert len(H) == 2

    def test_first_seen_provenance(self):
        a = CutCollection([[1, 0]], [1], [CutOrigin(3, 7, 0)])
        b = CutCollection([[1, 0]], [1], [CutOrigin(5, 2, 0)])
        u = a.union(b)
        assert len(u) == 1 and u.origins[0] == CutOrigin(3, 7, 0)
        u = b.union(a)
        assert u.origins[0] == CutOrigin(5, 2, 0)

    def test_immutable(self):
        H = box_basis(2, 1)
        with pytest.raises(AttributeError):
            H.b = np.zeros(4)
        with pytest.raises(ValueError):
            H.A[0, 0] = 2.0

    def test_stacking_shapes(self):
        H = CutCollection(np.eye(3), np.ones(3))
        assert H.A.shape == (3, 3) and H.b.shape == (3,)

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionError):
            CutCollection.from_halfspaces([HalfSpace([1, 0], 1), HalfSpace([1], 1)])
        with pytest.raises(DimensionError):
            box_basis(2, 1).union(box_basis(3, 1))

    def test_wire(self):
        H = box_basis(2, 3.0)
        G = CutCollection.from_wire(H.to_wire())
        assert np.array_equal(G.A, H.A) and np.array_equal(G.b, H.b)


class TestBox:
    def test_1d(self):
        H = box_basis(1, 1)
        assert np.array_equal(H.A, [[1], [-1]]) and np.array_equal(H.b, [1, 1])

    def test_box_scale(self):
        H = box_basis(2, 1e5)
        assert len(H) == 4 and np.all(H.b == 1e5)

    def test_3d_contains_origin(self):
        H = box_basis(3, 5)
        assert len(H) == 6 and contains(H, np.zeros(3))

    @pytest.mark.parametrize("d,M", [(0, 1), (-1, 1), (2, 0), (2, -3)])
    def test_bad_arguments(self, d, M):
        with pytest.raises((DimensionError, ValueError)):
            box_basis(d, M)

    @settings(max_examples=30)
    @given(st.integers(1, 6), st.floats(1e-3, 1e6))
    def test_inf_norm_bound(self, d, M):
        H = box_basis(d, M)
        corner = np.full(d, M)
        assert contains(H, corner, 1e-9 * M)
        assert not contains(H, corner * (1 + 1e-6), 0.0)
