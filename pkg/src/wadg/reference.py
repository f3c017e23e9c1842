"""Degree-N nodal data on the bi-unit reference triangle.

Vertices are (-1, -1), (1, -1), (-1, 1). Faces are numbered
0: s = -1, 1: r + s = 0, 2: r = -1, each traversed counterclockwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.linalg as la

from .quadrature import QuadratureRule2D

MAX_ORDER = 8
NODE_TOL = 1e-10


class ConstructionError(RuntimeError):
    pass


# {{{ orthonormal polynomials

def jacobi_p(x, alpha, beta, n):
    """Orthonormal Jacobi polynomial P_n^(alpha, beta) on [-1, 1]."""
    from math import gamma

    x = np.asarray(x, dtype=float)
    pl = np.zeros((n + 1,) + x.shape)
    gamma0 = (2 ** (alpha + beta + 1) / (alpha + beta + 1)
              * gamma(alpha + 1) * gamma(beta + 1) / gamma(alpha + beta + 1))
    pl[0] = 1.0 / np.sqrt(gamma0)
    if n == 0:
        return pl[0]
    gamma1 = (alpha + 1) * (beta + 1) / (alpha + beta + 3) * gamma0
    pl[1] = ((alpha + beta + 2) * x / 2 + (alpha - beta) / 2) / np.sqrt(gamma1)
    if n == 1:
        return pl[1]

    aold = 2 / (2 + alpha + beta) * np.sqrt(
        (alpha + 1) * (beta + 1) / (alpha + beta + 3))
    for i in range(1, n):
        h1 = 2 * i + alpha + beta
        anew = 2 / (h1 + 2) * np.sqrt(
            (i + 1) * (i + 1 + alpha + beta) * (i + 1 + alpha) * (i + 1 + beta)
            / (h1 + 1) / (h1 + 3))
        bnew = -(alpha**2 - beta**2) / h1 / (h1 + 2)
        pl[i + 1] = 1 / anew * (-aold * pl[i - 1] + (x - bnew) * pl[i])
        aold = anew
    return pl[n]


def grad_jacobi_p(x, alpha, beta, n):
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return np.sqrt(n * (n + alpha + beta + 1)) * jacobi_p(x, alpha + 1, beta + 1, n - 1)


def rs_to_ab(r, s):
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    a = np.full_like(r, -1.0)
    ok = np.abs(s - 1.0) > 1e-14
    a[ok] = 2 * (1 + r[ok]) / (1 - s[ok]) - 1
    return a, s.copy()


def mode_indices(N):
    return [(i, j) for i in range(N + 1) for j in range(N + 1 - i)]


def _simplex_p(a, b, i, j):
    h1 = jacobi_p(a, 0, 0, i)
    h2 = jacobi_p(b, 2 * i + 1, 0, j)
    return np.sqrt(2.0) * h1 * h2 * (1 - b) ** i


def _grad_simplex_p(a, b, i, j):
    fa = jacobi_p(a, 0, 0, i)
    dfa = grad_jacobi_p(a, 0, 0, i)
    gb = jacobi_p(b, 2 * i + 1, 0, j)
    dgb = grad_jacobi_p(b, 2 * i + 1, 0, j)

    dmodedr = dfa * gb
    if i > 0:
        dmodedr = dmodedr * (0.5 * (1 - b)) ** (i - 1)

    dmodeds = dfa * (gb * (0.5 * (1 + a)))
    if i > 0:
        dmodeds = dmodeds * (0.5 * (1 - b)) ** (i - 1)
    tmp = dgb * (0.5 * (1 - b)) ** i
    if i > 0:
        tmp = tmp - 0.5 * i * gb * (0.5 * (1 - b)) ** (i - 1)
    dmodeds = dmodeds + fa * tmp

    scale = 2 ** (i + 0.5)
    return scale * dmodedr, scale * dmodeds


def _check_points(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r, s = pts[:, 0], pts[:, 1]
    slack = 1e-12
    if np.any(r < -1 - slack) or np.any(s < -1 - slack) or np.any(r + s > slack):
        raise ValueError("points must lie in the reference triangle")
    return r, s


def orthonormal_basis_eval(N: int, points) -> np.ndarray:
    """Evaluate the L2-orthonormal degree-N basis; returns (npoints, Np)."""
    if N < 0:
        raise ValueError(f"degree must be non-negative, got {N}")
    r, s = _check_points(points)
    a, b = rs_to_ab(r, s)
    return np.column_stack([_simplex_p(a, b, i, j) for i, j in mode_indices(N)])


def orthonormal_basis_grad(N: int, points):
    """Return (d/dr, d/ds) of the orthonormal basis, each (npoints, Np)."""
    if N < 0:
        raise ValueError(f"degree must be non-negative, got {N}")
    r, s = _check_points(points)
    a, b = rs_to_ab(r, s)
    grads = [_grad_simplex_p(a, b, i, j) for i, j in mode_indices(N)]
    return (np.column_stack([g[0] for g in grads]),
            np.column_stack([g[1] for g in grads]))


def legendre_vandermonde(N, t):
    return np.column_stack([jacobi_p(t, 0, 0, i) for i in range(N + 1)])

# }}}


# {{{ warp & blend nodes

# optimized blend parameters for the warp & blend family, N = 1..15
_ALPHA_OPT = [0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999,
              1.2832, 1.3648, 1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258]


def _gauss_lobatto(N):
    if N == 1:
        return np.array([-1.0, 1.0])
    from scipy.special import roots_jacobi
    x, _ = roots_jacobi(N - 1, 1.0, 1.0)
    return np.concatenate([[-1.0], x, [1.0]])


def _warp_factor(N, rout):
    lgl = _gauss_lobatto(N)
    req = np.linspace(-1, 1, N + 1)
    veq = legendre_vandermonde(N, req)
    pmat = np.array([jacobi_p(rout, 0, 0, i) for i in range(N + 1)])
    lmat = la.solve(veq.T, pmat)
    warp = lmat.T @ (lgl - req)
    zerof = np.abs(rout) < 1.0 - 1e-10
    sf = 1.0 - (zerof * rout) ** 2
    warp = warp / sf + warp * (zerof - 1)
    return warp


def _equilateral_nodes(N):
    alpha = _ALPHA_OPT[N - 1] if N <= 15 else 5.0 / 3.0
    L1, L3 = [], []
    for n in range(1, N + 2):
        for m in range(1, N + 3 - n):
            L1.append((n - 1) / N)
            L3.append((m - 1) / N)
    L1 = np.array(L1)
    L3 = np.array(L3)
    L2 = 1.0 - L1 - L3
    x = -L2 + L3
    y = (-L2 - L3 + 2 * L1) / np.sqrt(3.0)

    blend1 = 4 * L2 * L3
    blend2 = 4 * L1 * L3
    blend3 = 4 * L1 * L2
    warpf1 = _warp_factor(N, L3 - L2)
    warpf2 = _warp_factor(N, L1 - L3)
    warpf3 = _warp_factor(N, L2 - L1)
    warp1 = blend1 * warpf1 * (1 + (alpha * L1) ** 2)
    warp2 = blend2 * warpf2 * (1 + (alpha * L2) ** 2)
    warp3 = blend3 * warpf3 * (1 + (alpha * L3) ** 2)

    x = x + warp1 + np.cos(2 * np.pi / 3) * warp2 + np.cos(4 * np.pi / 3) * warp3
    y = y + 0 * warp1 + np.sin(2 * np.pi / 3) * warp2 + np.sin(4 * np.pi / 3) * warp3
    return x, y


def _xy_to_rs(x, y):
    L1 = (np.sqrt(3.0) * y + 1.0) / 3.0
    L2 = (-3.0 * x - np.sqrt(3.0) * y + 2.0) / 6.0
    L3 = (3.0 * x - np.sqrt(3.0) * y + 2.0) / 6.0
    return -L2 + L3 - L1, -L2 - L3 + L1


def build_nodes(N: int) -> np.ndarray:
    """Warp & blend interpolation nodes, shape (Np, 2)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    x, y = _equilateral_nodes(N)
    r, s = _xy_to_rs(x, y)
    # snap round-off onto the faces so face detection is exact
    r[np.abs(r + 1) < NODE_TOL] = -1.0
    s[np.abs(s + 1) < NODE_TOL] = -1.0
    return np.column_stack([r, s])

# }}}


def _face_node_indices(nodes, N):
    r, s = nodes[:, 0], nodes[:, 1]
    f0 = np.flatnonzero(np.abs(s + 1) < NODE_TOL)
    f1 = np.flatnonzero(np.abs(r + s) < NODE_TOL)
    f2 = np.flatnonzero(np.abs(r + 1) < NODE_TOL)
    # order along counterclockwise traversal
    f0 = f0[np.argsort(r[f0])]
    f1 = f1[np.argsort(s[f1])]
    f2 = f2[np.argsort(-s[f2])]
    faces = [f0, f1, f2]
    for f in faces:
        if len(f) != N + 1:
            raise ConstructionError("node set does not have N+1 nodes per face")
    return np.array(faces)


def face_parameter(face, r, s):
    """Parameter t in [-1, 1] along a face, increasing counterclockwise."""
    return (r, s, -s)[face]


@dataclass(frozen=True)
class ReferenceElement:
    N: int
    Np: int
    Nfp: int
    nodes: np.ndarray
    V: np.ndarray
    Vinv: np.ndarray
    Dr: np.ndarray
    Ds: np.ndarray
    Mref: np.ndarray
    face_nodes: np.ndarray
    LIFT: np.ndarray
    face_mass_1d: np.ndarray

    @property
    def r(self):
        return self.nodes[:, 0]

    @property
    def s(self):
        return self.nodes[:, 1]

    @property
    def Fmask(self):
        """Flattened face-node indices, length 3 * Nfp."""
        return self.face_nodes.ravel()

    def interp_matrix(self, points) -> np.ndarray:
        """Nodal interpolation from the element nodes to ``points``."""
        return orthonormal_basis_eval(self.N, points) @ self.Vinv

    def project_L2(self, rule: QuadratureRule2D, values_at_quad) -> np.ndarray:
        return project_L2(self, rule, values_at_quad)


@lru_cache(maxsize=None)
def build_operators(N: int) -> ReferenceElement:
    """Build (and cache) all reference-triangle data for degree N."""
    if not 1 <= N <= MAX_ORDER:
        raise ValueError(f"supported orders are 1..{MAX_ORDER}, got {N}")
    nodes = build_nodes(N)
    Np = (N + 1) * (N + 2) // 2
    V = orthonormal_basis_eval(N, nodes)
    cond = la.cond(V)
    if not np.isfinite(cond) or cond > 1e10:
        raise ConstructionError(f"degenerate node set for N={N} (cond(V)={cond:.3e})")
    Vinv = la.inv(V)
    Vr, Vs = orthonormal_basis_grad(N, nodes)
    Dr = Vr @ Vinv
    Ds = Vs @ Vinv
    Mref = Vinv.T @ Vinv

    face_nodes = _face_node_indices(nodes, N)
    Nfp = N + 1
    E = np.zeros((Np, 3 * Nfp))
    m1d = []
    for f in range(3):
        idx = face_nodes[f]
        t = face_parameter(f, nodes[idx, 0], nodes[idx, 1])
        V1 = legendre_vandermonde(N, t)
        M1 = la.inv(V1 @ V1.T)
        m1d.append(M1)
        E[idx, f * Nfp:(f + 1) * Nfp] = M1
    LIFT = V @ (V.T @ E)

    for arr in (nodes, V, Vinv, Dr, Ds, Mref, face_nodes, LIFT):
        arr.setflags(write=False)
    return ReferenceElement(N=N, Np=Np, Nfp=Nfp, nodes=nodes, V=V, Vinv=Vinv,
                            Dr=Dr, Ds=Ds, Mref=Mref, face_nodes=face_nodes,
                            LIFT=LIFT, face_mass_1d=np.array(m1d))


def project_L2(ref: ReferenceElement, rule: QuadratureRule2D, values_at_quad) -> np.ndarray:
    """Modal (orthonormal) coefficients of the L2 projection onto P^N.

    ``values_at_quad`` may carry leading batch axes; the last axis runs over
    quadrature points.
    """
    if rule.exactness < 2 * ref.N:
        raise ValueError(
            f"projection needs quadrature exact to degree {2 * ref.N}, got {rule.exactness}")
    Vq = orthonormal_basis_eval(ref.N, rule.points)
    f = np.asarray(values_at_quad, dtype=float)
    return (f * rule.weights) @ Vq
