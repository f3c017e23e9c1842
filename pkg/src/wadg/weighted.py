"""Weighted and weight-adjusted mass matrices on affine triangles.

Everything here is batched over elements: coefficient arrays are (K, Np),
weights at quadrature points are (K, nq) and Jacobians are (K,).  A single
element is just K = 1.

Notation: for a left-hand-side weight w,

* ``M_w``     is the weighted mass matrix  (int w phi_j phi_i),
* ``T_w u``   is Pi_N(w u)                  = M^-1 M_w u,
* ``T_w^-1 u`` solves M_w x = M u,
* the weight-adjusted Gram matrix is M M_{1/w}^-1 M, whose inverse is the
  matrix-free product M^-1 M_{1/w} M^-1.

In the wave solver w = 1/c^2, so applying the weight-adjusted inverse
amounts to M^-1 M_{c^2} (see :meth:`WeightedOps.wadg_apply`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.linalg as la
import scipy.linalg as sla

from .quadrature import QuadratureRule2D
from .reference import ReferenceElement, orthonormal_basis_eval

CONSERVATION_DELTA = 1e-8
ROUNDOFF_FLOOR = 1e-13


class SingularMassMatrixError(np.linalg.LinAlgError):
    def __init__(self, element, degree, detail=""):
        self.element = element
        self.degree = degree
        msg = (f"weighted mass matrix of element {element} is numerically singular "
               f"with quadrature degree {degree}")
        super().__init__(msg + (f" ({detail})" if detail else ""))


class CorrectionDegenerateError(ArithmeticError):
    pass


class WeightedOps:
    """Reference-element data for weighted mass operations.

    ``basis="modal"`` works with orthonormal coefficients (reference mass =
    identity); ``basis="nodal"`` with values at the reference nodes.
    """

    def __init__(self, ref: ReferenceElement, rule: QuadratureRule2D, basis: str = "nodal"):
        if basis not in ("modal", "nodal"):
            raise ValueError(f"basis must be 'modal' or 'nodal', got {basis!r}")
        self.ref = ref
        self.rule = rule
        self.basis = basis
        Vq_modal = orthonormal_basis_eval(ref.N, rule.points)
        if basis == "modal":
            self.Vq = Vq_modal
            self.Mref = np.eye(ref.Np)
            self.Mref_inv = np.eye(ref.Np)
        else:
            self.Vq = Vq_modal @ ref.Vinv
            self.Mref = np.array(ref.Mref)
            self.Mref_inv = ref.V @ ref.V.T
        # Pq f_quad = coefficients of Pi_N f (independent of J for affine maps)
        self.Pq = self.Mref_inv @ (self.Vq.T * rule.weights)
        # coefficients of the constant 1
        self.e = self.Pq @ np.ones(len(rule))

    @property
    def Np(self):
        return self.ref.Np

    # {{{ basic pieces

    def interpolate(self, u):
        """Values at quadrature points, (K, nq)."""
        return u @ self.Vq.T

    def project(self, fq):
        """Coefficients of Pi_N f from quadrature samples (K, nq)."""
        return fq @ self.Pq.T

    def mass(self, J):
        return np.asarray(J)[:, None, None] * self.Mref

    def mass_apply(self, u, J):
        return np.asarray(J)[:, None] * (u @ self.Mref.T)

    def mass_inv_apply(self, u, J):
        return (u @ self.Mref_inv.T) / np.asarray(J)[:, None]

    # }}}

    def weighted_mass(self, wq, J, check=True):
        """Dense M_w for every element, (K, Np, Np)."""
        wq = np.atleast_2d(wq)
        J = np.asarray(J, dtype=float).reshape(-1)
        Mw = np.einsum("qi,kq,qj->kij", self.Vq, wq * self.rule.weights, self.Vq)
        Mw = 0.5 * (Mw + np.swapaxes(Mw, 1, 2))
        Mw *= J[:, None, None]
        if check:
            self.cholesky(Mw)
        return Mw

    def cholesky(self, Mw):
        """Cholesky factors of each block, raising on numerical singularity."""
        factors = []
        for k, A in enumerate(Mw):
            try:
                c = sla.cho_factor(A, lower=True)
            except la.LinAlgError as exc:
                raise SingularMassMatrixError(k, self.rule.exactness, str(exc)) from None
            d = np.diag(c[0])
            if d.min() <= 1e-7 * d.max():
                raise SingularMassMatrixError(
                    k, self.rule.exactness, f"pivot ratio {d.min() / d.max():.2e}")
            factors.append(c)
        return factors

    def apply_Tw(self, u, wq):
        """Pi_N(w u), matrix-free."""
        return self.project(wq * self.interpolate(u))

    def apply_Tw_inv(self, u, wq, J, factors=None):
        """T_w^-1 u by dense solves with M_w."""
        u = np.atleast_2d(u)
        J = np.asarray(J, dtype=float).reshape(-1)
        if factors is None:
            factors = self.cholesky(self.weighted_mass(wq, J, check=False))
        rhs = self.mass_apply(u, J)
        return np.array([sla.cho_solve(c, b) for c, b in zip(factors, rhs)])

    def wadg_apply(self, r, c2q):
        """M^-1 M_{c^2} r for already inverse-mass-applied residuals r."""
        return self.project(c2q * self.interpolate(r))

    def adjusted_mass(self, wq, J):
        """Dense weight-adjusted Gram matrix M M_{1/w}^-1 M, (K, Np, Np)."""
        M = self.mass(J)
        Minvw = self.weighted_mass(1.0 / np.atleast_2d(wq), J)
        A = M @ la.solve(Minvw, M)
        return 0.5 * (A + np.swapaxes(A, 1, 2))

    def adjusted_inv_apply(self, b, wq, J):
        """(M M_{1/w}^-1 M)^-1 b = M^-1 M_{1/w} M^-1 b, matrix-free."""
        return self.wadg_apply(self.mass_inv_apply(b, J), 1.0 / np.atleast_2d(wq))


@dataclass
class ConservationData:
    """Rank-one correction alpha v v^T for each element, with v~ = A^-1 v."""

    alpha: np.ndarray     # (K,)
    v: np.ndarray         # (K, Np)
    vt: np.ndarray        # (K, Np)
    denom: np.ndarray     # (K,) = 1 + alpha v^T v~


def conservation_correction(ops: WeightedOps, wq, J, delta=CONSERVATION_DELTA,
                            raise_on_degenerate=True) -> ConservationData:
    """Rank-one update restoring (A + alpha v v^T) e = M_w e, A the adjusted Gram matrix.

    alpha is zeroed where |v^T e| <= delta ||v||, and where v is roundoff
    relative to M_w e (constant weights).
    """
    wq = np.atleast_2d(wq)
    J = np.asarray(J, dtype=float).reshape(-1)
    K = len(J)
    e = np.tile(ops.e, (K, 1))
    Mw = ops.weighted_mass(wq, J)
    A = ops.adjusted_mass(wq, J)
    v = np.einsum("kij,kj->ki", A - Mw, e)
    vte = np.einsum("ki,ki->k", v, e)
    vnorm = la.norm(v, axis=1)
    alpha = np.zeros(K)
    scale = la.norm(np.einsum("kij,kj->ki", Mw, e), axis=1)
    active = (np.abs(vte) > delta * vnorm) & (vnorm > ROUNDOFF_FLOOR * scale)
    alpha[active] = -1.0 / vte[active]
    vt = ops.adjusted_inv_apply(v, wq, J)
    denom = 1.0 + alpha * np.einsum("ki,ki->k", v, vt)
    bad = np.flatnonzero(np.abs(denom) <= 1e-14)
    if len(bad) and raise_on_degenerate:
        raise CorrectionDegenerateError(
            f"1 + alpha v^T v~ vanishes on element {bad[0]}; use the dense solve")
    return ConservationData(alpha=alpha, v=v, vt=vt, denom=denom)


def corrected_inv_apply(ops: WeightedOps, b, wq, J, data: ConservationData):
    """(A + alpha v v^T)^-1 b via Sherman-Morrison."""
    x = ops.adjusted_inv_apply(b, wq, J)
    coef = data.alpha * np.einsum("ki,ki->k", data.vt, b) / data.denom
    return x - coef[:, None] * data.vt


@dataclass(frozen=True)
class ProjectionTriple:
    """Coefficients of the three approximations of u / w on every element."""

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    correction: ConservationData


def solve_projection_triple(ops: WeightedOps, b, wq, J, delta=CONSERVATION_DELTA) -> ProjectionTriple:
    """Solve M_w u1 = b, A u2 = b and (A + alpha v v^T) u3 = b on every element."""
    b = np.atleast_2d(b)
    J = np.asarray(J, dtype=float).reshape(-1)
    Mw = ops.weighted_mass(wq, J)
    factors = ops.cholesky(Mw)
    u1 = np.array([sla.cho_solve(c, bk) for c, bk in zip(factors, b)])
    u2 = ops.adjusted_inv_apply(b, wq, J)
    data = conservation_correction(ops, wq, J, delta, raise_on_degenerate=False)
    u3 = corrected_inv_apply(ops, b, wq, J, data)
    bad = np.flatnonzero(np.abs(data.denom) <= 1e-14)
    if len(bad):
        A = ops.adjusted_mass(wq[bad], J[bad])
        A += data.alpha[bad, None, None] * np.einsum("ki,kj->kij", data.v[bad], data.v[bad])
        u3[bad] = la.solve(A, b[bad][..., None])[..., 0]
    return ProjectionTriple(u1, u2, u3, data)
