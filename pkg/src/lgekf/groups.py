"""Concrete groups: SO(3), SE2(3), the vector group R^d and direct products."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import _kernels as K
from .lie import (
    MEMBERSHIP_TOL,
    CutLocusError,
    DimensionError,
    MatrixLieGroup,
    NotOnGroupError,
)

CUT_LOCUS_MARGIN = 1e-6


def _so3_basis():
    return np.stack([K.skew(e) for e in np.eye(3)])


def _rotation_residual(R):
    return float(np.linalg.norm(R.T @ R - np.eye(3)) + abs(np.linalg.det(R) - 1.0))


def _checked_rotation_log(R):
    angle = K.rotation_angle(np.ascontiguousarray(R))
    if angle > np.pi - CUT_LOCUS_MARGIN:
        raise CutLocusError(f"rotation angle {angle:.9f} is within {CUT_LOCUS_MARGIN} of pi")
    return K.so3_log(np.ascontiguousarray(R))


class SO3(MatrixLieGroup):
    """Rotations; algebra coordinates are rotation vectors (rad)."""

    name = "SO(3)"

    def __init__(self):
        super().__init__(_so3_basis())

    def membership_residual(self, g):
        return _rotation_residual(np.asarray(g, dtype=float))

    def exp(self, xi):
        return K.so3_exp(self._check_vector(xi))

    def log(self, g):
        R = self.check_member(g)
        return _checked_rotation_log(R)

    def inverse(self, g):
        return np.asarray(g, dtype=float).T.copy()

    def Ad(self, g):
        return np.array(g, dtype=float)

    def ad(self, zeta):
        return K.skew(self._check_vector(zeta))

    def jac_right(self, zeta):
        return K.so3_right_jacobian(self._check_vector(zeta))

    def jac_left(self, zeta):
        return K.so3_left_jacobian(self._check_vector(zeta))

    def jac_right_inv(self, zeta):
        return K.so3_right_jacobian_inv(self._check_vector(zeta))

    def jac_left_inv(self, zeta):
        return K.so3_left_jacobian_inv(self._check_vector(zeta))


def _se23_basis():
    basis = np.zeros((9, 5, 5))
    basis[0:3, 0:3, 0:3] = _so3_basis()
    for i in range(3):
        basis[3 + i, i, 3] = 1.0
        basis[6 + i, i, 4] = 1.0
    return basis


class SE23(MatrixLieGroup):
    """Extended poses ``[[R, v, p], [0, 1, 0], [0, 0, 1]]``.

    Algebra coordinates are ordered (rotation, velocity, position).
    """

    name = "SE2(3)"

    def __init__(self):
        super().__init__(_se23_basis())

    @staticmethod
    def from_parts(R, v, p):
        g = np.eye(5)
        g[0:3, 0:3] = R
        g[0:3, 3] = v
        g[0:3, 4] = p
        return g

    @staticmethod
    def parts(g):
        return g[0:3, 0:3], g[0:3, 3], g[0:3, 4]

    def membership_residual(self, g):
        g = np.asarray(g, dtype=float)
        bottom = np.linalg.norm(g[3:5, :] - np.eye(5)[3:5, :])
        return _rotation_residual(g[0:3, 0:3]) + float(bottom)

    def exp(self, xi):
        R, v, p = K.se23_exp(self._check_vector(xi))
        return self.from_parts(R, v, p)

    def log(self, g):
        g = self.check_member(g)
        R, v, p = self.parts(g)
        phi = _checked_rotation_log(R)
        Jinv = K.so3_left_jacobian_inv(phi)
        return np.concatenate([phi, Jinv @ v, Jinv @ p])

    def inverse(self, g):
        R, v, p = self.parts(np.asarray(g, dtype=float))
        return self.from_parts(R.T, -R.T @ v, -R.T @ p)

    def Ad(self, g):
        R, v, p = self.parts(np.asarray(g, dtype=float))
        return K.se23_adjoint(np.ascontiguousarray(R), np.ascontiguousarray(v), np.ascontiguousarray(p))

    def ad(self, zeta):
        return K.se23_ad(self._check_vector(zeta))


class VectorGroup(MatrixLieGroup):
    """R^d under addition, embedded as ``[[I, x], [0, 1]]``."""

    def __init__(self, dim):
        if dim < 1:
            raise DimensionError("vector group dimension must be positive")
        basis = np.zeros((dim, dim + 1, dim + 1))
        for i in range(dim):
            basis[i, i, dim] = 1.0
        super().__init__(basis)
        self.name = f"R^{dim}"

    def membership_residual(self, g):
        g = np.asarray(g, dtype=float)
        d = self.k
        mask = np.ones_like(g, dtype=bool)
        mask[0:d, d] = False
        return float(np.linalg.norm((g - np.eye(d + 1))[mask]))

    def exp(self, xi):
        g = np.eye(self.n)
        g[0:self.k, self.k] = self._check_vector(xi)
        return g

    def log(self, g):
        g = self.check_member(g)
        return g[0:self.k, self.k].copy()

    def inverse(self, g):
        return self.exp(-np.asarray(g, dtype=float)[0:self.k, self.k])

    def Ad(self, g):
        return np.eye(self.k)

    def ad(self, zeta):
        self._check_vector(zeta)
        return np.zeros((self.k, self.k))

    def jac_right(self, zeta):
        self._check_vector(zeta)
        return np.eye(self.k)

    jac_left = jac_right_inv = jac_left_inv = jac_right


class ProductGroup(MatrixLieGroup):
    """Direct product; elements are block diagonal, algebras concatenated."""

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise DimensionError("a product needs at least one component")
        self.components = components
        k_off = np.cumsum([0] + [G.k for G in components])
        n_off = np.cumsum([0] + [G.n for G in components])
        self._k_slices = [slice(int(a), int(b)) for a, b in zip(k_off[:-1], k_off[1:])]
        self._n_slices = [slice(int(a), int(b)) for a, b in zip(n_off[:-1], n_off[1:])]
        basis = np.zeros((int(k_off[-1]), int(n_off[-1]), int(n_off[-1])))
        for G, ks, ns in zip(components, self._k_slices, self._n_slices):
            basis[ks, ns, ns] = G.basis
        super().__init__(basis)
        self.name = " x ".join(G.name for G in components)

    def split_vector(self, xi):
        xi = self._check_vector(xi)
        return [xi[s] for s in self._k_slices]

    def split_element(self, g):
        g = np.asarray(g, dtype=float)
        return [g[s, s] for s in self._n_slices]

    def from_components(self, elements):
        return scipy.linalg.block_diag(*elements)

    def membership_residual(self, g):
        g = np.asarray(g, dtype=float)
        off = g.copy()
        total = 0.0
        for G, s in zip(self.components, self._n_slices):
            total += G.membership_residual(g[s, s])
            off[s, s] = 0.0
        return total + float(np.linalg.norm(off))

    def exp(self, xi):
        return self.from_components([G.exp(x) for G, x in zip(self.components, self.split_vector(xi))])

    def log(self, g):
        g = self.check_member(g)
        return np.concatenate([G.log(b) for G, b in zip(self.components, self.split_element(g))])

    def inverse(self, g):
        return self.from_components([G.inverse(b) for G, b in zip(self.components, self.split_element(g))])

    def _blockwise(self, method, xi):
        return scipy.linalg.block_diag(
            *[getattr(G, method)(x) for G, x in zip(self.components, self.split_vector(xi))]
        )

    def Ad(self, g):
        return scipy.linalg.block_diag(*[G.Ad(b) for G, b in zip(self.components, self.split_element(g))])

    def ad(self, zeta):
        return self._blockwise("ad", zeta)

    def jac_right(self, zeta):
        return self._blockwise("jac_right", zeta)

    def jac_left(self, zeta):
        return self._blockwise("jac_left", zeta)

    def jac_right_inv(self, zeta):
        return self._blockwise("jac_right_inv", zeta)

    def jac_left_inv(self, zeta):
        return self._blockwise("jac_left_inv", zeta)


def product(*components):
    return ProductGroup(components)


def ins_group():
    """The navigation state group SE2(3) x R3 x R3 (k=15, n=13)."""
    return ProductGroup([SE23(), VectorGroup(3), VectorGroup(3)])


__all__ = [
    "SO3",
    "SE23",
    "VectorGroup",
    "ProductGroup",
    "product",
    "ins_group",
    "MEMBERSHIP_TOL",
    "NotOnGroupError",
]
