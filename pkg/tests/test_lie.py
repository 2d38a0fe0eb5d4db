"""Generic group machinery checked against scipy and textbook closed forms."""

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lgekf.groups import SE23, SO3
from lgekf.lie import (
    CutLocusError,
    DimensionError,
    LieGroupError,
    MatrixLieGroup,
    NotOnGroupError,
    SeriesDivergenceError,
    series_jac_right,
    series_jac_right_inv,
)


def skew(w):
    return np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])


def textbook_so3_right_jacobian(phi):
    th = np.linalg.norm(phi)
    W = skew(phi)
    return np.eye(3) - (1 - np.cos(th)) / th**2 * W + (th - np.sin(th)) / th**3 * W @ W


def fd_right_jacobian(group, zeta, h=1e-6):
    """exp(zeta + eps) = exp(zeta) exp(J eps), solved column-wise with scipy."""
    g_inv = np.linalg.inv(scipy.linalg.expm(group.hat(zeta)))
    cols = []
    for e in np.eye(group.k):
        plus = g_inv @ scipy.linalg.expm(group.hat(zeta + h * e))
        minus = g_inv @ scipy.linalg.expm(group.hat(zeta - h * e))
        cols.append(group.vee(np.real(scipy.linalg.logm(plus)) - np.real(scipy.linalg.logm(minus))) / (2 * h))
    return np.column_stack(cols)


def generic(group):
    """Same basis, none of the closed-form overrides."""
    return MatrixLieGroup(group.basis)


small_vectors = arrays(np.float64, 3, elements=st.floats(-1.5, 1.5, allow_nan=False))


class TestHatVee:
    def test_round_trip(self, group, rng):
        xi = rng.standard_normal(group.k)
        np.testing.assert_allclose(group.vee(group.hat(xi)), xi, atol=1e-15)

    def test_so3_hat_is_cross_product(self, rng):
        w, x = rng.standard_normal(3), rng.standard_normal(3)
        np.testing.assert_allclose(SO3().hat(w) @ x, np.cross(w, x), atol=1e-14)

    @pytest.mark.parametrize("bad", [np.zeros(2), np.zeros((3, 1)), np.zeros(4)])
    def test_wrong_length_rejected(self, bad):
        with pytest.raises(DimensionError):
            SO3().hat(bad)

    def test_dependent_basis_rejected(self):
        E = np.zeros((2, 2, 2))
        E[:, 0, 1] = 1.0
        with pytest.raises(LieGroupError):
            MatrixLieGroup(E)


class TestExpLog:
    def test_exp_matches_expm(self, group, rng):
        xi = 0.7 * rng.standard_normal(group.k)
        np.testing.assert_allclose(group.exp(xi), scipy.linalg.expm(group.hat(xi)), atol=1e-12)

    def test_generic_log_matches_closed_form(self, group, rng):
        xi = 0.5 * rng.standard_normal(group.k)
        g = group.exp(xi)
        np.testing.assert_allclose(generic(group).log(g), group.log(g), atol=1e-9)

    def test_identity(self, group):
        np.testing.assert_array_equal(group.exp(np.zeros(group.k)), np.eye(group.n))
        np.testing.assert_allclose(group.log(np.eye(group.n)), 0.0, atol=1e-15)

    @pytest.mark.parametrize("angle", [1e-12, 1e-8, 1e-4, 0.1, 1.0, 3.0, np.pi - 1e-5])
    def test_so3_log_across_angle_range(self, angle):
        axis = np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5])
        phi = SO3().log(SO3().exp(angle * axis))
        np.testing.assert_allclose(phi, angle * axis, atol=1e-9, rtol=1e-9)

    def test_cut_locus_raises(self):
        with pytest.raises(CutLocusError):
            SO3().log(SO3().exp(np.array([np.pi, 0.0, 0.0])))

    def test_non_member_rejected(self):
        with pytest.raises(NotOnGroupError):
            SO3().log(2.0 * np.eye(3))
        with pytest.raises(NotOnGroupError):
            SE23().log(np.ones((5, 5)))

    @given(small_vectors)
    @settings(max_examples=200, deadline=None)
    def test_so3_round_trip_property(self, phi):
        G = SO3()
        np.testing.assert_allclose(G.log(G.exp(phi)), phi, atol=1e-10)

    def test_membership(self, group, rng):
        g = group.exp(rng.standard_normal(group.k))
        assert group.is_member(g)
        assert not group.is_member(g + 1e-3)
        assert not group.is_member(np.full((group.n, group.n), np.nan))


class TestAdjoints:
    def test_closed_form_ad_matches_commutator(self, group, rng):
        zeta = rng.standard_normal(group.k)
        np.testing.assert_allclose(group.ad(zeta), generic(group).ad(zeta), atol=1e-14)

    def test_closed_form_Ad_matches_conjugation(self, group, rng):
        g = group.exp(rng.standard_normal(group.k))
        np.testing.assert_allclose(group.Ad(g), generic(group).Ad(g), atol=1e-12)

    def test_Ad_acts_by_conjugation(self, group, rng):
        g = group.exp(rng.standard_normal(group.k))
        xi = rng.standard_normal(group.k)
        np.testing.assert_allclose(
            group.hat(group.Ad(g) @ xi), g @ group.hat(xi) @ np.linalg.inv(g), atol=1e-12
        )

    def test_ad_is_derivative_of_Ad(self, group, rng):
        zeta, h = rng.standard_normal(group.k), 1e-6
        fd = (group.Ad(group.exp(h * zeta)) - group.Ad(group.exp(-h * zeta))) / (2 * h)
        np.testing.assert_allclose(fd, group.ad(zeta), atol=1e-8)

    def test_ad_is_antisymmetric_bracket(self, group, rng):
        a, b = rng.standard_normal((2, group.k))
        np.testing.assert_allclose(group.ad(a) @ b, -group.ad(b) @ a, atol=1e-14)


class TestJacobians:
    def test_so3_series_matches_textbook(self, rng):
        phi = rng.standard_normal(3)
        np.testing.assert_allclose(
            series_jac_right(SO3().ad(phi)), textbook_so3_right_jacobian(phi), atol=1e-13
        )

    def test_so3_closed_form_matches_textbook(self, rng):
        phi = rng.standard_normal(3)
        np.testing.assert_allclose(SO3().jac_right(phi), textbook_so3_right_jacobian(phi), atol=1e-13)

    @pytest.mark.parametrize("scale", [1e-9, 1e-6, 1e-4])
    def test_so3_small_angle_branch(self, scale):
        # third-order terms are below 1e-14 at these scales
        phi = scale * np.array([0.3, -0.4, 0.5])
        expected = np.eye(3) - 0.5 * skew(phi) + skew(phi) @ skew(phi) / 6.0
        np.testing.assert_allclose(SO3().jac_right(phi), expected, atol=1e-14)

    @pytest.mark.parametrize("scale", [0.05, 0.2, 3.0])
    def test_so3_across_taylor_switch(self, scale):
        phi = scale * np.array([0.3, -0.4, 0.5])
        np.testing.assert_allclose(SO3().jac_right(phi), textbook_so3_right_jacobian(phi), atol=1e-14)
        np.testing.assert_allclose(
            SO3().jac_right_inv(phi), np.linalg.inv(textbook_so3_right_jacobian(phi)), atol=1e-12
        )

    def test_right_jacobian_matches_fd_of_exp(self, group, rng):
        zeta = 0.6 * rng.standard_normal(group.k)
        np.testing.assert_allclose(group.jac_right(zeta), fd_right_jacobian(group, zeta), atol=1e-7)

    def test_left_is_right_of_negative(self, group, rng):
        zeta = rng.standard_normal(group.k)
        np.testing.assert_allclose(group.jac_left(zeta), group.jac_right(-zeta), atol=1e-15)

    def test_inverse_series_matches_matrix_inverse(self, group, rng):
        zeta = rng.standard_normal(group.k)
        np.testing.assert_allclose(
            group.jac_right_inv(zeta), np.linalg.inv(group.jac_right(zeta)), atol=1e-10
        )
        np.testing.assert_allclose(
            group.jac_left_inv(zeta), np.linalg.inv(group.jac_left(zeta)), atol=1e-10
        )

    def test_closed_form_jacobians_match_series(self, group, rng):
        zeta = rng.standard_normal(group.k)
        np.testing.assert_allclose(group.jac_right(zeta), generic(group).jac_right(zeta), atol=1e-13)
        np.testing.assert_allclose(
            group.jac_right_inv(zeta), generic(group).jac_right_inv(zeta), atol=1e-11
        )

    def test_inverse_series_diverges_beyond_radius(self):
        # the Bernoulli series converges only for rotation angles below 2 pi
        with pytest.raises(SeriesDivergenceError):
            series_jac_right_inv(SO3().ad(np.array([0.0, 0.0, 7.0])))

    @given(small_vectors)
    @settings(max_examples=100, deadline=None)
    def test_so3_inverse_property(self, phi):
        G = SO3()
        np.testing.assert_allclose(G.jac_right_inv(phi) @ G.jac_right(phi), np.eye(3), atol=1e-12)
