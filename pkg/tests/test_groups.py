import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lgekf.groups import SE23, SO3, ProductGroup, VectorGroup, ins_group, product
from lgekf.lie import DimensionError

from conftest import random_rotation


def random_element(group, rng, scale=0.6):
    return group.exp(scale * rng.standard_normal(group.k))


class TestIdentities:
    """Adjoint/Jacobian identities every group must satisfy."""

    def test_exp_conjugates_jacobian(self, group, rng):
        # Ad_exp(z) J(z) = J(-z)
        for _ in range(20):
            z = 0.8 * rng.standard_normal(group.k)
            np.testing.assert_allclose(group.Ad(group.exp(z)) @ group.jac_right(z), group.jac_right(-z), atol=1e-12)

    def test_jacobian_adjoint_equivariance(self, group, rng):
        # Ad_g J(z) = J(Ad_g z) Ad_g
        for _ in range(20):
            g = random_element(group, rng)
            z = 0.5 * rng.standard_normal(group.k)
            Ad = group.Ad(g)
            np.testing.assert_allclose(Ad @ group.jac_right(z), group.jac_right(Ad @ z) @ Ad, atol=1e-11)

    def test_Ad_homomorphism(self, group, rng):
        g, h = random_element(group, rng), random_element(group, rng)
        np.testing.assert_allclose(group.Ad(g @ h), group.Ad(g) @ group.Ad(h), atol=1e-12)
        np.testing.assert_allclose(group.Ad(group.inverse(g)), np.linalg.inv(group.Ad(g)), atol=1e-12)

    def test_Ad_of_exp_is_expm_of_ad(self, group, rng):
        z = rng.standard_normal(group.k)
        np.testing.assert_allclose(group.Ad(group.exp(z)), scipy.linalg.expm(group.ad(z)), atol=1e-12)

    def test_inverse(self, group, rng):
        g = random_element(group, rng, 1.0)
        np.testing.assert_allclose(group.inverse(g) @ g, np.eye(group.n), atol=1e-13)

    def test_log_of_product_first_order(self, group, rng):
        # log(exp(z) exp(e)) = z + J(z)^-1 e + O(e^2)
        z = 0.5 * rng.standard_normal(group.k)
        e = 1e-7 * rng.standard_normal(group.k)
        lhs = group.log(group.exp(z) @ group.exp(e))
        np.testing.assert_allclose(lhs, z + group.jac_right_inv(z) @ e, atol=1e-12)


class TestSO3:
    def test_rotation_properties(self, rng):
        R = random_rotation(rng)
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-14)
        assert np.linalg.det(R) == pytest.approx(1.0)

    def test_quarter_turn(self):
        R = SO3().exp(np.array([0.0, 0.0, np.pi / 2]))
        np.testing.assert_allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)

    @given(arrays(np.float64, 3, elements=st.floats(-2.0, 2.0, allow_nan=False)))
    @settings(max_examples=100, deadline=None)
    def test_Ad_is_rotation(self, phi):
        G = SO3()
        np.testing.assert_array_equal(G.Ad(G.exp(phi)), G.exp(phi))


class TestSE23:
    def test_parts_round_trip(self, rng):
        R, v, p = random_rotation(rng), rng.standard_normal(3), rng.standard_normal(3)
        g = SE23.from_parts(R, v, p)
        for got, want in zip(SE23.parts(g), (R, v, p)):
            np.testing.assert_array_equal(got, want)

    def test_exp_structure(self, rng):
        # rotation block is SO(3) exp; translations use the SO(3) left Jacobian
        xi = rng.standard_normal(9)
        R, v, p = SE23.parts(SE23().exp(xi))
        J = SO3().jac_left(xi[0:3])
        np.testing.assert_allclose(R, SO3().exp(xi[0:3]), atol=1e-14)
        np.testing.assert_allclose(v, J @ xi[3:6], atol=1e-14)
        np.testing.assert_allclose(p, J @ xi[6:9], atol=1e-14)

    def test_composition_is_navigation_update(self, rng):
        g1 = SE23.from_parts(random_rotation(rng), rng.standard_normal(3), rng.standard_normal(3))
        g2 = SE23.from_parts(random_rotation(rng), rng.standard_normal(3), rng.standard_normal(3))
        R1, v1, p1 = SE23.parts(g1)
        R2, v2, p2 = SE23.parts(g2)
        R, v, p = SE23.parts(g1 @ g2)
        np.testing.assert_allclose(R, R1 @ R2)
        np.testing.assert_allclose(v, R1 @ v2 + v1)
        np.testing.assert_allclose(p, R1 @ p2 + p1)

    def test_adjoint_blocks(self, rng):
        R, v, p = random_rotation(rng), rng.standard_normal(3), rng.standard_normal(3)
        Ad = SE23().Ad(SE23.from_parts(R, v, p))
        hat = SO3().hat
        np.testing.assert_allclose(Ad[0:3, 0:3], R)
        np.testing.assert_allclose(Ad[3:6, 0:3], hat(v) @ R)
        np.testing.assert_allclose(Ad[6:9, 0:3], hat(p) @ R)
        np.testing.assert_array_equal(Ad[0:3, 3:9], 0.0)
        np.testing.assert_array_equal(Ad[3:6, 6:9], 0.0)

    def test_velocity_and_position_commute(self, rng):
        # pure translations in v and p commute: the bracket vanishes
        a = np.concatenate([np.zeros(3), rng.standard_normal(6)])
        b = np.concatenate([np.zeros(3), rng.standard_normal(6)])
        np.testing.assert_array_equal(SE23().ad(a) @ b, 0.0)


class TestVectorAndProduct:
    def test_vector_group_is_addition(self, rng):
        G = VectorGroup(4)
        x, y = rng.standard_normal((2, 4))
        np.testing.assert_allclose(G.log(G.exp(x) @ G.exp(y)), x + y)
        np.testing.assert_array_equal(G.jac_right(x), np.eye(4))
        np.testing.assert_array_equal(G.ad(x), np.zeros((4, 4)))

    def test_vector_group_dimension(self):
        with pytest.raises(DimensionError):
            VectorGroup(0)

    def test_ins_group_dimensions(self):
        G = ins_group()
        assert (G.k, G.n) == (15, 13)

    def test_product_is_blockwise(self, rng):
        G = product(SO3(), SE23())
        xi = rng.standard_normal(12)
        g = G.exp(xi)
        a, b = G.split_element(g)
        np.testing.assert_allclose(a, SO3().exp(xi[:3]))
        np.testing.assert_allclose(b, SE23().exp(xi[3:]))
        np.testing.assert_allclose(g[0:3, 3:], 0.0)
        np.testing.assert_allclose(G.jac_right(xi)[0:3, 3:], 0.0)

    def test_product_membership_rejects_coupling(self, rng):
        G = ProductGroup([SO3(), VectorGroup(3)])
        g = G.exp(rng.standard_normal(6))
        assert G.is_member(g)
        g[0, 4] = 0.1
        assert not G.is_member(g)

    def test_empty_product_rejected(self):
        with pytest.raises(DimensionError):
            ProductGroup([])
