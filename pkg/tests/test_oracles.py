import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cpconsensus import (AffineMax, ColGenConstraint, CompositeOracle, Ellipsoid, InequalityConstraint,
                         MaxOfConstraints, OracleError, Polytope, QuadraticConstraint,
                         SemidefiniteConstraint, UncertainConstraint, colgen_cut, disk_constraint,
                         pessimize, robust_cut, robust_linear_row, sdp_cut, subgradient_cut, violation)

vec2 = arrays(float, 2, elements=st.floats(-5, 5, allow_nan=False))


def sq_norm_minus_one(z):
    return float(z @ z - 1.0), 2.0 * z


class TestSubgradient:
    def test_quadratic_cut(self):
        rep = subgradient_cut(InequalityConstraint(sq_norm_minus_one), [2.0, 0.0])
        assert not rep.inside and rep.s == pytest.approx(3.0)
        assert np.allclose(rep.cut.a, [4, 0]) and rep.cut.b == pytest.approx(5.0)
        for p in ([1, 0], [-1, 0], [0, 1]):
            assert violation(rep.cut, p) <= 0

    def test_inside(self):
        rep = subgradient_cut(InequalityConstraint(lambda z: (z[0] - 1, np.array([1.0, 0.0]))), [0, 0])
        assert rep.inside

    def test_max_of_k_tie_lowest_index(self):
        con = MaxOfConstraints([lambda z: (z[0] - 1, np.array([1.0, 0.0])),
                                lambda z: (z[1] - 1, np.array([0.0, 1.0]))])
        rep = con([2.0, 2.0])
        assert rep.s == pytest.approx(1.0) and np.allclose(rep.cut.a, [1, 0])

    def test_non_finite_value(self):
        con = InequalityConstraint(lambda z: (np.nan, np.zeros(2)))
        with pytest.raises(OracleError):
            con([0.0, 0.0])

    def test_zero_subgradient_outside(self):
        con = InequalityConstraint(lambda z: (1.0, np.zeros(2)))
        with pytest.raises(OracleError):
            con([0.0, 0.0])

    @settings(max_examples=200)
    @given(vec2, vec2)
    def test_subgradient_inequality(self, z, zq):
        con = QuadraticConstraint(np.diag([2.0, 0.5]), [0.3, -0.2], 1.0)
        fzq, g = con.f(zq)
        fz, _ = con.f(z)
        assert fz - fzq >= g @ (z - zq) - 1e-9

    def test_affine_max_matches_rows(self):
        con = AffineMax([[1, 0], [0, 1], [-1, -1]], [1, 1, 1])
        rep = con([3.0, 0.0])
        assert np.allclose(rep.cut.a, [1, 0]) and rep.s == pytest.approx(2.0)
        assert con([0.0, 0.0]).inside


class TestSdp:
    def diag(self):
        return SemidefiniteConstraint([np.diag([-1.0, -1.0]), np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])

    def test_diagonal_cut(self):
        rep = sdp_cut(self.diag(), [2.0, 0.0])
        assert rep.s == pytest.approx(1.0)
        assert np.allclose(rep.cut.a, [1, 0]) and rep.cut.b == pytest.approx(1.0)

    def test_diagonal_inside(self):
        rep = sdp_cut(self.diag(), [0.0, 0.0])
        assert rep.inside and rep.s == pytest.approx(-1.0)

    def test_boundary(self):
        con = SemidefiniteConstraint([-np.eye(2), np.eye(2), np.zeros((2, 2))])
        for y in (-3.0, 0.0, 17.0):
            assert sdp_cut(con, [1.0, y]).inside

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            SemidefiniteConstraint([np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2)])

    def test_disk_schur_form(self, rng):
        con = disk_constraint([0.5, -1.0], 2.0)
        for z in rng.uniform(-4, 4, size=(300, 2)):
            dist = np.linalg.norm(z - [0.5, -1.0])
            lam = con.value(z)
            assert lam == pytest.approx(dist - 2.0, abs=1e-9)
            rep = con(z)
            assert rep.inside == (dist - 2.0 <= con.tol_mem)
            if not rep.inside:
                # the cut is the tangent line of the disk
                pts = [0.5, -1.0] + 2.0 * np.column_stack([np.cos(np.linspace(0, 6.3, 50)),
                                                          np.sin(np.linspace(0, 6.3, 50))])
                assert max(violation(rep.cut, p) for p in pts) <= 1e-9


class TestPessimize:
    def test_identity_ellipsoid(self):
        con = robust_linear_row([1.0, 0.0], np.eye(2), 0.0)
        theta, worst = pessimize(con, [0.0, 1.0])
        assert np.allclose(theta, [1, 1]) and worst == pytest.approx(1.0)

    def test_polytope_vertices(self):
        con = UncertainConstraint(lambda z, th: (float(th[0] * z[0]), th.copy()), Polytope([[-1.0], [1.0]]))
        theta, worst = pessimize(con, [2.0])
        assert theta[0] == 1.0 and worst == 2.0

    def test_scaled_ellipsoid(self):
        con = robust_linear_row([0.0, 0.0], np.diag([2.0, 1.0]), 0.0)
        theta, worst = pessimize(con, [1.0, 0.0])
        assert np.allclose(theta, [2, 0]) and worst == pytest.approx(2.0)

    def test_zero_slope_returns_center(self):
        con = robust_linear_row([1.0, 2.0], np.eye(2), 1.0)
        theta, _ = pessimize(con, [0.0, 0.0])
        assert np.array_equal(theta, [1.0, 2.0])

    def test_custom_maximizer(self):
        con = UncertainConstraint(lambda z, th: (float(th @ z - 1), th), lambda z: np.sign(z))
        theta, worst = pessimize(con, np.array([2.0, -3.0]))
        assert np.array_equal(theta, [1, -1]) and worst == pytest.approx(4.0)

    def test_nonsymmetric_P_exact_max(self, rng):
        P = rng.normal(size=(3, 3))
        E = Ellipsoid(rng.normal(size=3), P)
        con = UncertainConstraint(lambda z, a: (float(a @ z), a), E, coeff=lambda z: z)
        for z in rng.normal(size=(20, 3)):
            _, worst = pessimize(con, z)
            samples = E.sample(rng, 2000) @ z
            assert worst >= samples.max() - 1e-12
            assert worst == pytest.approx(E.center @ z + np.linalg.norm(P.T @ z))


class TestRobustCut:
    def test_row_inside(self):
        assert robust_cut(robust_linear_row([1.0, 0.0], np.eye(2), 2.0), [0.0, 1.0]).inside

    def test_row_cut(self):
        rep = robust_cut(robust_linear_row([1.0, 0.0], np.eye(2), 2.0), [3.0, 0.0])
        assert rep.s == pytest.approx(4.0)
        assert np.allclose(rep.cut.a, [2, 0]) and rep.cut.b == pytest.approx(2.0)
        assert np.allclose(rep.witness, [2, 0])

    def test_nominal_row_when_P_zero(self):
        rep = robust_cut(robust_linear_row([1.0, 1.0], np.zeros((2, 2)), 1.0), [1.0, 1.0])
        assert np.allclose(rep.cut.a, [1, 1]) and rep.cut.b == pytest.approx(1.0) and rep.s == pytest.approx(1)

    def test_equals_subgradient_of_worst_case(self, rng):
        for _ in range(50):
            abar, M = rng.normal(size=3), rng.normal(size=(3, 3))
            P = M.T @ M
            b = float(np.linalg.norm(abar))
            rob = robust_linear_row(abar, P, b)

            def f(z):
                Pz = P.T @ z
                n = np.linalg.norm(Pz)
                return float(abar @ z + n - b), abar + (P @ Pz) / n

            sub = InequalityConstraint(f)
            z = rng.normal(size=3) * 3
            r1, r2 = rob(z), sub(z)
            assert r1.inside == r2.inside
            if not r1.inside:
                assert np.allclose(r1.cut.a, r2.cut.a) and r1.cut.b == pytest.approx(r2.cut.b)


def square_colgen():
    # f(x) = x^2 on [-1, 1], G = 1, one block
    def sub(w):
        return np.array([np.clip(-w[0] / 2.0, -1.0, 1.0)])
    return ColGenConstraint(sub, lambda x: float(x[0] ** 2), [[1.0]], 0, 1)


class TestColGen:
    def test_cut(self):
        rep = colgen_cut(square_colgen(), [1.0, 0.0])
        assert rep.s == pytest.approx(0.25)
        assert np.allclose(rep.witness.x, [-0.5]) and np.allclose(rep.witness.Gx, [-0.5])
        # u + 0.5 pi <= 0.25
        assert np.allclose(rep.cut.a, [0.5, 1.0]) and rep.cut.b == pytest.approx(0.25)

    def test_inside(self):
        assert colgen_cut(square_colgen(), [1.0, -1.0]).inside

    def test_singleton_set(self):
        con = ColGenConstraint(lambda w: np.zeros(1), lambda x: 0.0, [[3.0]], 0, 1)
        rep = con([7.0, 1.0])
        assert rep.s == pytest.approx(1.0) and np.allclose(rep.cut.a, [0, 1]) and rep.cut.b == 0.0

    def test_infeasible_subproblem(self):
        con = ColGenConstraint(lambda w: None, lambda x: 0.0, [[1.0]], 0, 1)
        with pytest.raises(OracleError):
            con([0.0, 0.0])

    def test_only_owner_component(self):
        con = ColGenConstraint(lambda w: np.zeros(1), lambda x: 0.0, [[1.0]], 1, 3)
        assert con([0.0, 5.0, -1.0, 5.0]).inside
        assert not con([0.0, -5.0, 1.0, -5.0]).inside

    def test_dual_value_concave(self, rng):
        con = square_colgen()
        for _ in range(100):
            p, q = rng.uniform(-5, 5, size=2)
            g = lambda x: con.best_response([x])[1]
            assert g((p + q) / 2) >= (g(p) + g(q)) / 2 - 1e-12

    def test_cut_sound_on_block_set(self, rng):
        con = square_colgen()
        for z in rng.uniform(-3, 3, size=(200, 2)):
            rep = con(z)
            if rep.inside:
                continue
            # every (pi, u) with u <= min_x x^2 + pi x satisfies the cut
            for pi in rng.uniform(-5, 5, 20):
                u = con.best_response([pi])[1]
                assert violation(rep.cut, [pi, u]) <= 1e-9


class TestComposite:
    def test_farthest_cut_wins(self):
        a = AffineMax([[10.0, 0.0]], [10.0])       # x <= 1, raw violation scaled by 10
        b = AffineMax([[0.0, 1.0]], [1.0])         # y <= 1
        rep = CompositeOracle([a, b])([1.5, 3.0])
        assert np.allclose(rep.cut.a, [0, 1])

    def test_all_inside(self):
        rep = CompositeOracle([AffineMax([[1.0, 0.0]], [1.0])])([0.0, 0.0])
        assert rep.inside

    def test_query_all(self):
        o = CompositeOracle([AffineMax([[1.0, 0.0]], [1.0]), AffineMax([[0.0, 1.0]], [1.0])])
        assert len(o.query_all([2.0, 2.0])) == 2 and len(o.query_all([2.0, 0.0])) == 1
