"""Affine triangle meshes: generation, connectivity, geometry, node maps."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .reference import ReferenceElement

# local face f joins local vertices FACE_VERTICES[f]
FACE_VERTICES = ((0, 1), (1, 2), (2, 0))


class TopologyError(ValueError):
    pass


class DegenerateElementError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh2D:
    """Conforming affine triangulation.

    Per-element affine factors (rx, ry, sx, sy, J) and per-face outward
    normals and surface Jacobians are stored since they do not depend on the
    polynomial degree.
    """

    vertices: np.ndarray      # (Nv, 2)
    triangles: np.ndarray     # (K, 3), counterclockwise
    EToE: np.ndarray          # (K, 3)
    EToF: np.ndarray          # (K, 3)
    rx: np.ndarray
    ry: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    J: np.ndarray
    normals: np.ndarray       # (K, 3, 2)
    sJ: np.ndarray            # (K, 3)
    h: float                  # nominal mesh size

    @property
    def K(self) -> int:
        return len(self.triangles)

    @property
    def Nv(self) -> int:
        return len(self.vertices)

    @property
    def nx(self) -> np.ndarray:
        return self.normals[..., 0]

    @property
    def ny(self) -> np.ndarray:
        return self.normals[..., 1]

    @property
    def boundary_faces(self) -> np.ndarray:
        """Boolean (K, 3) mask of faces on the domain boundary."""
        return self.EToE == np.arange(self.K)[:, None]

    def element_vertices(self) -> np.ndarray:
        return self.vertices[self.triangles]

    def area(self) -> float:
        return float(2.0 * self.J.sum())

    @classmethod
    def from_arrays(cls, vertices, triangles, h=None) -> "Mesh2D":
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        EToE, EToF = connect(vertices, triangles)
        rx, ry, sx, sy, J = _affine_factors(vertices, triangles)
        normals, sJ = _face_normals(vertices, triangles)
        if h is None:
            ev = vertices[triangles]
            h = float(max(np.linalg.norm(ev[:, 1] - ev[:, 0], axis=1).max(),
                          np.linalg.norm(ev[:, 2] - ev[:, 0], axis=1).max()))
        arrays = (vertices, triangles, EToE, EToF, rx, ry, sx, sy, J, normals, sJ)
        for a in arrays:
            a.setflags(write=False)
        return cls(*arrays, h=h)

    def dump(self, path) -> None:
        """Write ``K Nv`` header, vertex lines, then 0-based element lines."""
        path = Path(path)
        lines = [f"{self.K} {self.Nv}"]
        lines += [f"{x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"{a} {b} {c}" for a, b, c in self.triangles]
        path.write_text("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh2D:
    tokens = Path(path).read_text().split("\n")
    K, Nv = (int(t) for t in tokens[0].split())
    verts = np.array([[float(v) for v in line.split()] for line in tokens[1:1 + Nv]])
    tris = np.array([[int(v) for v in line.split()] for line in tokens[1 + Nv:1 + Nv + K]])
    return Mesh2D.from_arrays(verts, tris)


def uniform_tri_mesh(xmin: float, xmax: float, ymin: float, ymax: float,
                     cells_per_side: int) -> Mesh2D:
    """Split an n-by-n grid of rectangles along the lower-left to upper-right diagonal."""
    n = int(cells_per_side)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("need xmax > xmin and ymax > ymin")
    if n < 1:
        raise ValueError(f"cells_per_side must be >= 1, got {cells_per_side}")
    xs = np.linspace(xmin, xmax, n + 1)
    ys = np.linspace(ymin, ymax, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return Mesh2D.from_arrays(vertices, np.array(tris), h=(xmax - xmin) / n)


def connect(vertices, triangles):
    """Element-to-element and element-to-face maps via a face hash.

    Boundary faces point back to themselves.
    """
    triangles = np.asarray(triangles)
    K = len(triangles)
    EToE = np.tile(np.arange(K)[:, None], (1, 3))
    EToF = np.tile(np.arange(3)[None, :], (K, 1))
    owners: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for k, tri in enumerate(triangles):
        for f, (a, b) in enumerate(FACE_VERTICES):
            key = tuple(sorted((int(tri[a]), int(tri[b]))))
            owners.setdefault(key, []).append((k, f))
    for key, lst in owners.items():
        if len(lst) > 2:
            raise TopologyError(f"face {key} is shared by {len(lst)} elements")
        if len(lst) == 2:
            (k1, f1), (k2, f2) = lst
            EToE[k1, f1], EToF[k1, f1] = k2, f2
            EToE[k2, f2], EToF[k2, f2] = k1, f1
    _check_conforming(np.asarray(vertices, dtype=float), owners)
    return EToE, EToF


def _check_conforming(vertices, owners):
    # a vertex strictly inside a boundary edge signals a hanging node
    boundary = [key for key, lst in owners.items() if len(lst) == 1]
    if not boundary:
        return
    used = np.unique(np.array(list(owners.keys())).ravel())
    P = vertices[used]
    for a, b in boundary:
        pa, pb = vertices[a], vertices[b]
        e = pb - pa
        L2 = e @ e
        t = (P - pa) @ e / L2
        d = np.abs((P[:, 0] - pa[0]) * e[1] - (P[:, 1] - pa[1]) * e[0]) / np.sqrt(L2)
        inside = (t > 1e-12) & (t < 1 - 1e-12) & (d < 1e-12 * np.sqrt(L2))
        if np.any(inside):
            raise TopologyError(f"non-conforming face ({a}, {b}): hanging vertex")


def _affine_factors(vertices, triangles):
    ev = vertices[triangles]
    xr = 0.5 * (ev[:, 1, 0] - ev[:, 0, 0])
    xs = 0.5 * (ev[:, 2, 0] - ev[:, 0, 0])
    yr = 0.5 * (ev[:, 1, 1] - ev[:, 0, 1])
    ys = 0.5 * (ev[:, 2, 1] - ev[:, 0, 1])
    J = xr * ys - xs * yr
    bad = np.flatnonzero(J <= 0)
    if len(bad):
        raise DegenerateElementError(
            f"element {bad[0]} has non-positive Jacobian {J[bad[0]]:.3e}")
    return ys / J, -xs / J, -yr / J, xr / J, J


def _face_normals(vertices, triangles):
    ev = vertices[triangles]
    normals = np.empty((len(triangles), 3, 2))
    sJ = np.empty((len(triangles), 3))
    for f, (a, b) in enumerate(FACE_VERTICES):
        e = ev[:, b] - ev[:, a]
        length = np.hypot(e[:, 0], e[:, 1])
        normals[:, f, 0] = e[:, 1] / length
        normals[:, f, 1] = -e[:, 0] / length
        sJ[:, f] = 0.5 * length
    return normals, sJ


@dataclass(frozen=True)
class Geometry:
    """Degree-dependent nodal data for a mesh: coordinates and trace maps.

    ``vmapM``/``vmapP`` index the flattened (K * Np) nodal arrays; entry
    [k, f * Nfp + i] is the interior / exterior value at face node i.
    """

    x: np.ndarray        # (K, Np)
    y: np.ndarray
    vmapM: np.ndarray    # (K, 3 * Nfp)
    vmapP: np.ndarray
    node_map: np.ndarray  # (K, 3, Nfp): neighbour face-node index
    Fscale: np.ndarray   # (K, 3) sJ / J
    boundary: np.ndarray  # (K, 3 * Nfp) bool


def map_to_physical(mesh: Mesh2D, r, s):
    """Physical coordinates of reference points on every element: (K, n) each."""
    ev = mesh.element_vertices()
    r = np.asarray(r)[None, :]
    s = np.asarray(s)[None, :]
    x = 0.5 * (-(r + s) * ev[:, 0, 0, None] + (1 + r) * ev[:, 1, 0, None] + (1 + s) * ev[:, 2, 0, None])
    y = 0.5 * (-(r + s) * ev[:, 0, 1, None] + (1 + r) * ev[:, 1, 1, None] + (1 + s) * ev[:, 2, 1, None])
    return x, y


def geometric_factors(mesh: Mesh2D, ref: ReferenceElement, tol: float = 1e-10) -> Geometry:
    x, y = map_to_physical(mesh, ref.r, ref.s)
    K, Np, Nfp = mesh.K, ref.Np, ref.Nfp
    fn = ref.face_nodes
    node_map = np.tile(np.arange(Nfp), (K, 3, 1))
    vmapM = (np.arange(K)[:, None, None] * Np + fn[None, :, :])
    vmapP = vmapM.copy()
    for k in range(K):
        for f in range(3):
            k2, f2 = mesh.EToE[k, f], mesh.EToF[k, f]
            if k2 == k and f2 == f:
                continue
            xm, ym = x[k, fn[f]], y[k, fn[f]]
            xp, yp = x[k2, fn[f2]], y[k2, fn[f2]]
            D = np.hypot(xm[:, None] - xp[None, :], ym[:, None] - yp[None, :])
            j = D.argmin(axis=1)
            if D[np.arange(Nfp), j].max() > tol * max(1.0, mesh.h):
                raise TopologyError(f"face nodes of element {k} face {f} do not match")
            node_map[k, f] = j
            vmapP[k, f] = k2 * Np + fn[f2][j]
    vmapM = vmapM.reshape(K, 3 * Nfp)
    vmapP = vmapP.reshape(K, 3 * Nfp)
    boundary = vmapM == vmapP
    Fscale = mesh.sJ / mesh.J[:, None]
    for a in (x, y, vmapM, vmapP, node_map, Fscale, boundary):
        a.setflags(write=False)
    return Geometry(x=x, y=y, vmapM=vmapM, vmapP=vmapP, node_map=node_map,
                    Fscale=Fscale, boundary=boundary)
