"""Extended concentrated Gaussians on matrix Lie groups.

A body-frame distribution is ``g = g0 exp(xi)`` and a spatial-frame one
``g = exp(xi) g0``, with ``xi ~ N(mean, cov)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lie import MatrixLieGroup

BODY = "body"
SPATIAL = "spatial"


class CovarianceError(ArithmeticError):
    """A covariance lost symmetry or positive (semi-)definiteness."""


def symmetrize(P):
    return 0.5 * (P + P.T)


def congruence(T, P):
    """``T P T^T``, re-symmetrized."""
    return symmetrize(T @ P @ T.T)


def _check_cov(P, k):
    P = np.asarray(P, dtype=float)
    if P.shape != (k, k):
        raise CovarianceError(f"covariance must be {k}x{k}")
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(P - P.T)) > 1e-12 * scale:
        raise CovarianceError("covariance is not symmetric")
    if np.linalg.eigvalsh(symmetrize(P))[0] < -1e-12 * scale:
        raise CovarianceError("covariance is not positive semi-definite")
    return P


@dataclass(frozen=True)
class ExtendedConcentratedGaussian:
    group: MatrixLieGroup
    reference: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    frame: str = BODY

    def __post_init__(self):
        if self.frame not in (BODY, SPATIAL):
            raise ValueError(f"frame must be {BODY!r} or {SPATIAL!r}")
        k = self.group.k
        object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float))
        object.__setattr__(self, "mean", self.group._check_vector(self.mean).copy())
        object.__setattr__(self, "cov", _check_cov(self.cov, k))

    def compose(self, xi):
        """Group element obtained from the local coordinate ``xi``."""
        G = self.group
        if self.frame == BODY:
            return G.compose(self.reference, G.exp(xi))
        return G.compose(G.exp(xi), self.reference)

    def local(self, g):
        """Local coordinate of ``g`` relative to the reference."""
        G = self.group
        if self.frame == BODY:
            return G.log(G.compose(G.inverse(self.reference), g))
        return G.log(G.compose(g, G.inverse(self.reference)))


def convert_frame(d):
    """Re-express a distribution in the other frame, keeping its reference."""
    Ad = d.group.Ad(d.reference)
    if d.frame == BODY:
        return replace(d, mean=Ad @ d.mean, cov=congruence(Ad, d.cov), frame=SPATIAL)
    Ad_inv = np.linalg.inv(Ad)
    return replace(d, mean=Ad_inv @ d.mean, cov=congruence(Ad_inv, d.cov), frame=BODY)


def _check_pd(P):
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise CovarianceError("reset covariance is not positive definite") from None
    return P


def reset_body(d, new_ref=None):
    """Move the reference of a body-frame distribution to ``new_ref``.

    Defaults to ``reference * exp(mean)``, which zeroes the mean and maps the
    covariance through the right Jacobian of the old mean.
    """
    if d.frame != BODY:
        raise ValueError("reset_body expects a body-frame distribution")
    G = d.group
    if new_ref is None:
        new_ref = G.compose(d.reference, G.exp(d.mean))
        mean2 = np.zeros(G.k)
    else:
        new_ref = np.asarray(new_ref, dtype=float)
        mean2 = G.log(G.compose(G.compose(G.inverse(new_ref), d.reference), G.exp(d.mean)))
    T = G.jac_right_inv(mean2) @ G.jac_right(d.mean)
    cov2 = congruence(T, d.cov)
    if np.any(d.cov):
        _check_pd(cov2)
    return ExtendedConcentratedGaussian(G, new_ref, mean2, cov2, BODY)


def reset_spatial(d, new_ref=None):
    """Spatial-frame counterpart of :func:`reset_body` (left Jacobians)."""
    if d.frame != SPATIAL:
        raise ValueError("reset_spatial expects a spatial-frame distribution")
    G = d.group
    if new_ref is None:
        new_ref = G.compose(G.exp(d.mean), d.reference)
        mean2 = np.zeros(G.k)
    else:
        new_ref = np.asarray(new_ref, dtype=float)
        mean2 = G.log(G.compose(G.compose(G.exp(d.mean), d.reference), G.inverse(new_ref)))
    T = G.jac_left_inv(mean2) @ G.jac_left(d.mean)
    cov2 = congruence(T, d.cov)
    if np.any(d.cov):
        _check_pd(cov2)
    return ExtendedConcentratedGaussian(G, new_ref, mean2, cov2, SPATIAL)


def cov_factor(P):
    """Lower factor L with L L^T = P; PSD matrices fall back to eigh."""
    P = symmetrize(np.asarray(P, dtype=float))
    if not np.any(P):
        return np.zeros_like(P)
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(P)
        if w[0] < -1e-12 * max(1.0, w[-1]):
            raise CovarianceError("cannot sample from an indefinite covariance") from None
        return V * np.sqrt(np.clip(w, 0.0, None))


def sample_tangent(mean, cov, rng, size=None):
    L = cov_factor(cov)
    k = L.shape[0]
    if size is None:
        return mean + L @ rng.standard_normal(k)
    return mean + rng.standard_normal((size, k)) @ L.T


def sample(d, rng, size=None):
    """Draw group elements; returns one ``(n, n)`` matrix or ``(size, n, n)``."""
    xi = sample_tangent(d.mean, d.cov, rng, size)
    if size is None:
        return d.compose(xi)
    return np.stack([d.compose(x) for x in xi])
