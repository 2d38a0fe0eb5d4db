"""Generic matrix Lie group machinery.

A group is described by a basis of generator matrices for its Lie algebra.
From the basis alone :class:`MatrixLieGroup` derives hat/vee, the
exponential and logarithm (via the matrix exponential/logarithm), both
adjoints and the left/right group Jacobians with their inverses (via their
power series in ``ad``). Concrete groups in :mod:`lgekf.groups` override the
operations that have closed forms.

Group elements are plain ``(n, n)`` arrays and algebra vectors plain
``(k,)`` arrays.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.special

SERIES_TOL = 1e-15
SERIES_MAX_TERMS = 40
BERNOULLI_MAX_TERMS = 120
MEMBERSHIP_TOL = 1e-9


class LieGroupError(ValueError):
    """Base class for invalid group inputs."""


class DimensionError(LieGroupError):
    pass


class NotOnGroupError(LieGroupError):
    pass


class CutLocusError(LieGroupError):
    """The logarithm was requested too close to the cut locus of exp."""


class SeriesDivergenceError(ArithmeticError):
    pass


def _series_converged(term, total):
    return np.linalg.norm(term) <= SERIES_TOL * max(1.0, np.linalg.norm(total))


def series_jac_right(ad_zeta, max_terms=SERIES_MAX_TERMS):
    """Right Jacobian from ``ad_zeta``: sum_k (-1)^k / (k+1)! ad^k."""
    k = ad_zeta.shape[0]
    total = np.eye(k)
    power = np.eye(k)
    for i in range(1, max_terms):
        power = power @ ad_zeta
        term = power * ((-1) ** i / math.factorial(i + 1))
        total = total + term
        if _series_converged(term, total):
            return total
    raise SeriesDivergenceError(f"Jacobian series did not converge in {max_terms} terms")


@lru_cache(maxsize=None)
def _bernoulli_coefficients(n):
    # scipy uses B1 = -1/2, matching the convention of the inverse series
    b = scipy.special.bernoulli(n)
    return tuple(b[i] / math.factorial(i) for i in range(n + 1))


def series_jac_right_inv(ad_zeta, max_terms=BERNOULLI_MAX_TERMS):
    """Inverse right Jacobian: sum_k (-1)^k B_k / k! ad^k."""
    coeffs = _bernoulli_coefficients(max_terms)
    k = ad_zeta.shape[0]
    total = np.eye(k)
    power = np.eye(k)
    for i in range(1, max_terms + 1):
        power = power @ ad_zeta
        if coeffs[i] == 0.0:
            # odd Bernoulli numbers beyond B1 vanish
            continue
        term = power * ((-1) ** i * coeffs[i])
        total = total + term
        if not np.all(np.isfinite(total)):
            break
        if _series_converged(term, total):
            return total
    raise SeriesDivergenceError(
        "Bernoulli series for the inverse Jacobian did not converge; "
        "the argument is likely outside the convergence radius"
    )


def adjoint_from_basis(basis, vee, g, g_inv=None):
    """Column-wise Ad_g = [vee(g E_i g^-1)]."""
    if g_inv is None:
        g_inv = np.linalg.inv(g)
    return np.column_stack([vee(g @ E @ g_inv) for E in basis])


class MatrixLieGroup:
    """A matrix Lie group given by its algebra generators.

    Subclasses set :attr:`basis` (shape ``(k, n, n)``) and may override any
    operation with a closed form. Instances are immutable.
    """

    name = "G"

    def __init__(self, basis):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2]:
            raise DimensionError("basis must have shape (k, n, n)")
        flat = basis.reshape(basis.shape[0], -1)
        if np.linalg.matrix_rank(flat) != basis.shape[0]:
            raise LieGroupError("generators are not linearly independent")
        self._basis = basis
        self._basis.setflags(write=False)
        self.k = basis.shape[0]
        self.n = basis.shape[1]
        gram = flat @ flat.T
        if np.allclose(gram, np.diag(np.diag(gram)), atol=0.0):
            # orthogonal basis: projection is exact for 0/+-1 generators
            self._vee_matrix = flat / np.diag(gram)[:, None]
        else:
            self._vee_matrix = np.linalg.pinv(flat.T)
        self._vee_matrix.setflags(write=False)

    @property
    def basis(self):
        return self._basis

    def __repr__(self):
        return f"{type(self).__name__}(k={self.k}, n={self.n})"

    # --- algebra isomorphism -------------------------------------------

    def _check_vector(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.k,):
            raise DimensionError(f"{self.name}: expected algebra vector of length {self.k}, got shape {xi.shape}")
        return xi

    def hat(self, xi):
        xi = self._check_vector(xi)
        return np.tensordot(xi, self._basis, axes=1)

    def vee(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n, self.n):
            raise DimensionError(f"{self.name}: expected {self.n}x{self.n} algebra matrix")
        return self._vee_matrix @ X.ravel()

    # --- group structure -----------------------------------------------

    def identity(self):
        return np.eye(self.n)

    def compose(self, g1, g2):
        return np.asarray(g1) @ np.asarray(g2)

    def inverse(self, g):
        return np.linalg.inv(g)

    def membership_residual(self, g):
        """Frobenius distance of ``g`` to the group (0 for exact members)."""
        g = np.asarray(g, dtype=float)
        X = scipy.linalg.logm(g)
        X = np.real(X)
        return float(np.linalg.norm(X - self.hat(self.vee(X))))

    def is_member(self, g, tol=MEMBERSHIP_TOL):
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n, self.n) or not np.all(np.isfinite(g)):
            return False
        if abs(np.linalg.det(g)) < 1e-300:
            return False
        return self.membership_residual(g) <= tol

    def check_member(self, g, tol=MEMBERSHIP_TOL):
        if not self.is_member(g, tol):
            raise NotOnGroupError(f"matrix is not an element of {self.name}")
        return np.asarray(g, dtype=float)

    # --- exponential coordinates ---------------------------------------

    def exp(self, xi):
        return scipy.linalg.expm(self.hat(xi))

    def log(self, g):
        g = self.check_member(g)
        return self.vee(np.real(scipy.linalg.logm(g)))

    # --- adjoints --------------------------------------------------------

    def Ad(self, g):
        g = np.asarray(g, dtype=float)
        if abs(np.linalg.det(g)) < 1e-300:
            raise NotOnGroupError("singular matrix has no adjoint")
        return adjoint_from_basis(self._basis, self.vee, g)

    def ad(self, zeta):
        Z = self.hat(zeta)
        return np.column_stack([self.vee(Z @ E - E @ Z) for E in self._basis])

    # --- group Jacobians -------------------------------------------------

    def jac_right(self, zeta):
        return series_jac_right(self.ad(zeta))

    def jac_left(self, zeta):
        return self.jac_right(-self._check_vector(zeta))

    def jac_right_inv(self, zeta):
        return series_jac_right_inv(self.ad(zeta))

    def jac_left_inv(self, zeta):
        return self.jac_right_inv(-self._check_vector(zeta))
