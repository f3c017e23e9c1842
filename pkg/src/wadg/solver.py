"""Nodal DG for the first-order acoustic system

    (1/c^2) p_t + div u = f,        u_t + grad p = 0,

on affine triangles with penalty fluxes and reflecting walls.  The pressure
mass matrix is handled in one of three ways: the exact weighted mass matrix
("standard"), the weight-adjusted approximation ("wadg"), or the
weight-adjusted approximation with the rank-one conservation fix
("wadg-cons").  State arrays hold nodal values, shape (K, Np).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .material import WeightField, sample, smooth_sine
from .mesh import Mesh2D, geometric_factors, map_to_physical
from .quadrature import triangle_quadrature
from .reference import build_operators
from .weighted import WeightedOps, conservation_correction, CONSERVATION_DELTA

MODES = ("standard", "wadg", "wadg-cons")
_MODE_ALIASES = {
    "standard": "standard", "standarddg": "standard", "dg": "standard",
    "wadg": "wadg",
    "wadg-cons": "wadg-cons", "wadgconservative": "wadg-cons", "wadg_cons": "wadg-cons",
}

# Carpenter-Kennedy five-stage fourth-order low-storage coefficients
RK4A = np.array([0.0,
                 -567301805773.0 / 1357537059087.0,
                 -2404267990393.0 / 2016746695238.0,
                 -3550918686646.0 / 2091501179385.0,
                 -1275806237668.0 / 842570457699.0])
RK4B = np.array([1432997174477.0 / 9575080441755.0,
                 5161836677717.0 / 13612068292357.0,
                 1720146321549.0 / 2090206949498.0,
                 3134564353537.0 / 4481467310338.0,
                 2277821191437.0 / 14882151754819.0])
RK4C = np.array([0.0,
                 1432997174477.0 / 9575080441755.0,
                 2526269341429.0 / 6820363962896.0,
                 2006345519317.0 / 3224310063776.0,
                 2802321613138.0 / 2924317926251.0])


class BlowUpError(FloatingPointError):
    def __init__(self, t, pmax):
        self.t = t
        self.pmax = pmax
        super().__init__(f"non-finite state at t = {t:.6g} (max |p| before step {pmax:.3e})")


def normalize_mode(mode: str) -> str:
    key = str(mode).lower().replace(" ", "")
    if key not in _MODE_ALIASES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    return _MODE_ALIASES[key]


@dataclass
class WaveState:
    P: np.ndarray
    Ux: np.ndarray
    Uy: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, K, Np, t=0.0):
        return cls(np.zeros((K, Np)), np.zeros((K, Np)), np.zeros((K, Np)), t)

    def fields(self):
        return self.P, self.Ux, self.Uy

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.fields())


@dataclass
class SolverConfig:
    N: int
    mode: str = "wadg"
    flux: str = "upwind"            # or "central" (tau_p = tau_u = 0)
    cfl: float = 0.5
    tfinal: float = 1.0
    quad_degree: Optional[int] = None   # default 2N + 1
    source: Optional[Callable] = None   # f(x, y, t)
    delta: float = CONSERVATION_DELTA

    def __post_init__(self):
        self.mode = normalize_mode(self.mode)
        if self.flux not in ("upwind", "central"):
            raise ValueError(f"flux must be 'upwind' or 'central', got {self.flux!r}")
        if not 0 < self.cfl <= 2:
            raise ValueError(f"CFL must lie in (0, 2], got {self.cfl}")
        if self.tfinal < 0:
            raise ValueError("final time must be non-negative")
        if self.quad_degree is None:
            self.quad_degree = 2 * self.N + 1


class Discretization:
    """Everything compute_rhs needs, built once for (mesh, c^2 field, config)."""

    def __init__(self, mesh: Mesh2D, c2: WeightField, config: SolverConfig):
        self.mesh = mesh
        self.c2 = c2
        self.config = config
        self.ref = ref = build_operators(config.N)
        self.geo = geometric_factors(mesh, ref)
        self.rule = triangle_quadrature(config.quad_degree)
        self.ops = WeightedOps(ref, self.rule, basis="nodal")
        self.samples = sample(c2, mesh, ref, self.rule)
        self.c2q = self.samples.at_quad
        self.wq = self.samples.inv_at_quad          # w = 1/c^2
        self.xq, self.yq = map_to_physical(mesh, self.rule.r, self.rule.s)
        Nfp = ref.Nfp

        # face data expanded to face nodes, (K, 3 Nfp)
        self.nx = np.repeat(mesh.nx, Nfp, axis=1)
        self.ny = np.repeat(mesh.ny, Nfp, axis=1)
        self.Fscale = np.repeat(self.geo.Fscale, Nfp, axis=1)
        self.boundary = self.geo.boundary
        self.mapM = self.geo.vmapM.ravel()
        self.mapP = self.geo.vmapP.ravel()

        # element-mean wavespeed and face-averaged penalty parameters
        cbar = (np.sqrt(self.c2q) @ self.rule.weights) / self.rule.weights.sum()
        cavg = 0.5 * (cbar[:, None] + cbar[mesh.EToE])
        if config.flux == "upwind":
            tau_p, tau_u = 1.0 / cavg, cavg
        else:
            tau_p, tau_u = np.zeros_like(cavg), np.zeros_like(cavg)
        self.tau_p = np.repeat(tau_p, Nfp, axis=1)
        self.tau_u = np.repeat(tau_u, Nfp, axis=1)

        self.cmax = float(np.sqrt(self.c2q.max()))
        self.hmin = float(2.0 * mesh.sJ.min())

        self._Minv_Mw_inv = None
        self._cons = None
        if config.mode == "standard":
            # dense path: per-element (M_w)^-1 M
            Mw = self.ops.weighted_mass(self.wq, mesh.J, check=False)
            factors = self.ops.cholesky(Mw)
            M = self.ops.mass(mesh.J)
            self._Minv_Mw_inv = np.array([sla.cho_solve(c, Mk) for c, Mk in zip(factors, M)])
        elif config.mode == "wadg-cons":
            self._cons = conservation_correction(self.ops, self.wq, mesh.J, config.delta,
                                                 raise_on_degenerate=True)
        else:
            # the adjusted inner product must still be a norm
            self.ops.cholesky(self.ops.weighted_mass(self.c2q, mesh.J, check=False))

    @property
    def K(self):
        return self.mesh.K

    @property
    def Np(self):
        return self.ref.Np

    def timestep(self) -> float:
        N = self.config.N
        return self.config.cfl * self.hmin / (self.cmax * (N + 1) ** 2)

    # {{{ building blocks

    def grad(self, u):
        ur = u @ self.ref.Dr.T
        us = u @ self.ref.Ds.T
        m = self.mesh
        return (m.rx[:, None] * ur + m.sx[:, None] * us,
                m.ry[:, None] * ur + m.sy[:, None] * us)

    def traces(self, u):
        flat = u.ravel()
        return flat[self.mapM].reshape(self.K, -1), flat[self.mapP].reshape(self.K, -1)

    def lift(self, flux):
        return (self.Fscale * flux) @ self.ref.LIFT.T

    def apply_mass_inverse(self, r):
        """d p / d t from the inverse-mass-applied residual r."""
        mode = self.config.mode
        if mode == "standard":
            return np.einsum("kij,kj->ki", self._Minv_Mw_inv, r)
        out = self.ops.wadg_apply(r, self.c2q)
        if mode == "wadg-cons":
            d = self._cons
            b = self.ops.mass_apply(r, self.mesh.J)
            coef = d.alpha * np.einsum("ki,ki->k", d.vt, b) / d.denom
            out = out - coef[:, None] * d.vt
        return out

    def project_source(self, t):
        f = self.config.source
        if f is None:
            return None
        return self.ops.project(f(self.xq, self.yq, t))

    # }}}

    def jumps(self, state: WaveState):
        """Exterior-minus-interior jumps [p], [u_x], [u_y] at face nodes."""
        pM, pP = self.traces(state.P)
        uxM, uxP = self.traces(state.Ux)
        uyM, uyP = self.traces(state.Uy)
        # reflecting walls: p+ = -p-, u+ = u-
        pP = np.where(self.boundary, -pM, pP)
        return pP - pM, uxP - uxM, uyP - uyM, pM


def compute_rhs(state: WaveState, disc: Discretization, t=None):
    """Time derivatives (dP, dUx, dUy) for the semi-discrete system."""
    t = state.t if t is None else t
    dp, dux, duy, _ = disc.jumps(state)
    ndu = disc.nx * dux + disc.ny * duy

    flux_p = 0.5 * (disc.tau_p * dp - ndu)
    flux_u = 0.5 * (disc.tau_u * ndu - dp)

    px, py = disc.grad(state.P)
    uxx, _ = disc.grad(state.Ux)
    _, uyy = disc.grad(state.Uy)

    r = -(uxx + uyy) + disc.lift(flux_p)
    src = disc.project_source(t)
    if src is not None:
        r = r + src
    dP = disc.apply_mass_inverse(r)
    dUx = -px + disc.lift(flux_u * disc.nx)
    dUy = -py + disc.lift(flux_u * disc.ny)
    return dP, dUx, dUy


def step_rk(state: WaveState, dt: float, disc: Discretization) -> WaveState:
    """One low-storage RK4 step; returns a new state."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    fields = [a.copy() for a in state.fields()]
    res = [np.zeros_like(a) for a in fields]
    for a, b, c in zip(RK4A, RK4B, RK4C):
        s = WaveState(*fields, t=state.t)
        rhs = compute_rhs(s, disc, t=state.t + c * dt)
        for i in range(3):
            res[i] = a * res[i] + dt * rhs[i]
            fields[i] = fields[i] + b * res[i]
    new = WaveState(*fields, t=state.t + dt)
    if not new.is_finite():
        raise BlowUpError(state.t, float(np.abs(state.P).max()))
    return new


def energy(state: WaveState, disc: Discretization) -> float:
    """p^T W p + u^T M u with W the mode's pressure mass matrix."""
    J = disc.mesh.J
    ops = disc.ops
    P = state.P
    mode = disc.config.mode
    if mode == "standard":
        WP = np.einsum("kq,kq->k", disc.wq * disc.rule.weights, ops.interpolate(P) ** 2) * J
        Ep = WP.sum()
    else:
        # A = M M_{c^2}^-1 M, so p^T A p = (M p)^T z with z solving M_{c^2} z = M p
        Mc2 = ops.weighted_mass(disc.c2q, J, check=False)
        MP = ops.mass_apply(P, J)
        z = np.linalg.solve(Mc2, MP[..., None])[..., 0]
        Ep = np.einsum("ki,ki->", MP, z)
        if mode == "wadg-cons":
            d = disc._cons
            Ep += np.sum(d.alpha * np.einsum("ki,ki->k", d.v, P) ** 2)
    Eu = sum(np.einsum("ki,ki->", ops.mass_apply(U, J), U) for U in (state.Ux, state.Uy))
    return float(Ep + Eu)


def energy_dissipation(state: WaveState, disc: Discretization) -> float:
    """dE/dt from face jumps alone (non-positive for upwind fluxes)."""
    dp, dux, duy, pM = disc.jumps(state)
    ndu = disc.nx * dux + disc.ny * duy
    Nfp = disc.ref.Nfp
    sJ = disc.mesh.sJ
    total = 0.0
    for f in range(3):
        sl = slice(f * Nfp, (f + 1) * Nfp)
        Mf = disc.ref.face_mass_1d[f]
        # penalties are constant along a face, traces are polynomial
        tp, tu = disc.tau_p[:, f * Nfp], disc.tau_u[:, f * Nfp]
        quad = lambda g: np.einsum("ki,ij,kj->k", g[:, sl], Mf, g[:, sl])
        wall = disc.boundary[:, f * Nfp]
        # interior faces are visited from both sides, hence the factor 1/2
        inner = 0.5 * (tp * quad(dp) + tu * quad(ndu))
        outer = 2.0 * tp * quad(pM)
        total += np.sum(sJ[:, f] * np.where(wall, outer, inner))
    return -float(total)


@dataclass
class EnergyTrace:
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def append(self, t, e):
        self.times.append(float(t))
        self.values.append(float(e))

    def is_non_increasing(self, rtol=1e-10) -> bool:
        v = np.asarray(self.values)
        return bool(np.all(v[1:] <= v[:-1] * (1 + rtol) + rtol * 1e-300))


def interpolate_state(disc: Discretization, p0, ux0=None, uy0=None, t=0.0) -> WaveState:
    """Nodal interpolation of initial data evaluators f(x, y)."""
    x, y = disc.geo.x, disc.geo.y
    P = np.asarray(p0(x, y), dtype=float) * np.ones_like(x)
    Ux = np.zeros_like(x) if ux0 is None else np.asarray(ux0(x, y), dtype=float) * np.ones_like(x)
    Uy = np.zeros_like(x) if uy0 is None else np.asarray(uy0(x, y), dtype=float) * np.ones_like(x)
    return WaveState(P, Ux, Uy, t)


def step_sizes(T: float, dt: float) -> list:
    """Full steps of size dt followed by one partial step landing on T."""
    nfull = int(np.floor(T / dt * (1 + 1e-12)))
    steps = [dt] * nfull
    rest = T - nfull * dt
    if rest > 1e-12 * max(T, 1.0):
        steps.append(rest)
    return steps


def run(config: SolverConfig, mesh: Mesh2D, c2: WeightField, initial, dt=None,
        record_energy=True, callback=None, disc=None):
    """Advance ``initial`` (evaluators (p0, ux0, uy0) or a WaveState) to ``config.tfinal``.

    Returns (final state, energy trace, discretization).
    """
    if disc is None:
        disc = Discretization(mesh, c2, config)
    if isinstance(initial, WaveState):
        state = initial
    else:
        state = interpolate_state(disc, *initial)
    dt = disc.timestep() if dt is None else float(dt)
    T = config.tfinal
    trace = EnergyTrace()
    if record_energy:
        trace.append(state.t, energy(state, disc))
    steps = step_sizes(T, dt)
    for i, h in enumerate(steps):
        state = step_rk(state, h, disc)
        if record_energy:
            trace.append(state.t, energy(state, disc))
        if callback is not None:
            callback(i, state)
    state.t = T if steps else state.t
    return state, trace, disc


def l2_error(disc: Discretization, state: WaveState, exact, degree=None) -> float:
    """Global L2 error of the pressure against exact(x, y, t).

    ``exact`` may also return a tuple (p, ux, uy), in which case all three
    fields enter the norm.
    """
    N = disc.config.N
    rule = triangle_quadrature(2 * N + 2 if degree is None else degree)
    V = disc.ref.interp_matrix(rule.points)
    xq, yq = map_to_physical(disc.mesh, rule.r, rule.s)
    ex = exact(xq, yq, state.t)
    fields = state.fields()
    if not isinstance(ex, tuple):
        ex, fields = (ex,), fields[:1]
    total = 0.0
    for num, e in zip(fields, ex):
        d = num @ V.T - e
        total += np.sum(disc.mesh.J * ((d * d) @ rule.weights))
    return float(np.sqrt(total))


def locate_points(mesh: Mesh2D, x, y, tol=1e-10):
    """Index of an element containing each point (x, y); -1 if none does."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    ev = mesh.element_vertices()
    out = np.full(len(x), -1, dtype=np.int64)
    for start in range(0, len(x), 4096):
        sl = slice(start, start + 4096)
        r, s = _to_reference(ev[None, :, :, :], x[sl, None], y[sl, None])
        inside = (r >= -1 - tol) & (s >= -1 - tol) & (r + s <= tol)
        hit = inside.any(axis=1)
        out[sl] = np.where(hit, inside.argmax(axis=1), -1)
    return out


def _to_reference(ev, x, y):
    # invert x = v0 + (1+r)/2 (v1 - v0) + (1+s)/2 (v2 - v0)
    v0, v1, v2 = ev[..., 0, :], ev[..., 1, :], ev[..., 2, :]
    a, b = v1 - v0, v2 - v0
    det = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dx, dy = x - v0[..., 0], y - v0[..., 1]
    r = 2 * (dx * b[..., 1] - dy * b[..., 0]) / det - 1
    s = 2 * (a[..., 0] * dy - a[..., 1] * dx) / det - 1
    return r, s


def evaluate_at(disc: Discretization, values, x, y, elements=None):
    """Evaluate nodal fields ``values`` (K, Np) at physical points."""
    shape = np.shape(x)
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if elements is None:
        elements = locate_points(disc.mesh, x, y)
    elements = np.asarray(elements).ravel()
    if np.any(elements < 0):
        raise ValueError("some evaluation points lie outside the mesh")
    ev = disc.mesh.element_vertices()[elements]
    r, s = _to_reference(ev, x, y)
    V = disc.ref.interp_matrix(np.column_stack([r, s]))
    return np.einsum("ij,ij->i", V, values[elements]).reshape(shape)


# {{{ manufactured solution

@dataclass(frozen=True)
class ManufacturedProblem:
    c2: WeightField
    omega: float
    p: Callable
    ux: Callable
    uy: Callable
    source: Callable

    def initial(self):
        return (lambda x, y: self.p(x, y, 0.0),
                lambda x, y: self.ux(x, y, 0.0),
                lambda x, y: self.uy(x, y, 0.0))

    def exact(self, x, y, t):
        return self.p(x, y, t)


def manufactured_problem(name: str = "smoothsine") -> ManufacturedProblem:
    """Standing mode p = cos(pi x/2) cos(pi y/2) cos(omega t) with omega = pi/sqrt(2).

    The velocity solves u_t = -grad p exactly, and f = p_t / c^2 + div u.
    """
    key = name.lower()
    if key in ("smoothsine", "heterogeneous"):
        c2 = smooth_sine()
    elif key in ("const", "homogeneous"):
        from .material import constant
        c2 = constant(1.0)
    else:
        raise ValueError(f"unknown manufactured problem {name!r}")
    k = 0.5 * np.pi
    om = np.pi / np.sqrt(2.0)

    def p(x, y, t):
        return np.cos(k * x) * np.cos(k * y) * np.cos(om * t)

    def ux(x, y, t):
        return k * np.sin(k * x) * np.cos(k * y) * np.sin(om * t) / om

    def uy(x, y, t):
        return k * np.cos(k * x) * np.sin(k * y) * np.sin(om * t) / om

    def source(x, y, t):
        ps = np.cos(k * x) * np.cos(k * y)
        pt = -om * ps * np.sin(om * t)
        divu = 2 * k * k * ps * np.sin(om * t) / om
        return pt / c2(x, y) + divu

    return ManufacturedProblem(c2, om, p, ux, uy, source)


# }}}


def dump_pressure(path, state: WaveState, N: int) -> None:
    """Header ``t K Np N`` then one line of nodal pressure values per element."""
    K, Np = state.P.shape
    lines = [f"{state.t:.17g} {K} {Np} {N}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in state.P]
    Path(path).write_text("\n".join(lines) + "\n")


def load_pressure(path):
    rows = Path(path).read_text().split("\n")
    t, K, Np, N = rows[0].split()
    P = np.array([[float(v) for v in line.split()] for line in rows[1:1 + int(K)]])
    return float(t), int(N), P
