"""Experiment drivers: projection, conservation, convergence and quadrature studies.

Every study returns a :class:`RateTable` whose rows are grouped (by N and,
where relevant, a field parameter) and ordered by decreasing h.  Tables can
be written to CSV with the configuration echoed as ``#`` comment lines.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .material import WeightField, builtin_field, parse_field
from .mesh import uniform_tri_mesh, map_to_physical
from .quadrature import triangle_quadrature
from .reference import MAX_ORDER, build_operators, orthonormal_basis_eval
from .solver import (SolverConfig, Discretization, evaluate_at, locate_points,
                     manufactured_problem, run, l2_error, dump_pressure, normalize_mode)
from .weighted import SingularMassMatrixError, WeightedOps, solve_projection_triple

EXPERIMENTS = ("projection", "projection-cone", "conservation", "conservation-regularity",
               "convergence-manufactured", "convergence-reference", "quadrature-sweep", "solve")

DOMAIN = (-1.0, 1.0, -1.0, 1.0)
CONE_PARAMETERS = (1e-1, 1e-2, 1e-3, 1e-4)
NA = "na"


class ConfigError(ValueError):
    pass


class HarnessIOError(OSError):
    pass


# {{{ rates

def estimate_rate(h: Sequence[float], err: Sequence[float]):
    """(least-squares slope, finest-interval slope) of log err against log h.

    Non-positive or non-finite errors make the rate undefined (NaN).
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(err, dtype=float)
    if len(h) != len(e):
        raise ValueError("h and error lists differ in length")
    if len(h) < 2:
        raise ValueError("a rate needs at least two points")
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        return math.nan, math.nan
    lh, le = np.log(h), np.log(e)
    lsq = float(np.polyfit(lh, le, 1)[0])
    last = float((le[-2] - le[-1]) / (lh[-2] - lh[-1]))
    return lsq, last


def format_sci(x) -> str:
    """Scientific notation with 6 significant digits, e.g. 1.23457e-5."""
    if isinstance(x, str):
        return x
    if x is None or not np.isfinite(x):
        return NA
    mant, exp = f"{float(x):.5e}".split("e")
    return f"{mant}e{int(exp)}"


# }}}


# {{{ tables

@dataclass
class Row:
    group: dict
    cells: int
    h: float
    values: dict


@dataclass
class RateTable:
    """Error rows grouped by ``group_keys``; one rate pair per group and column."""

    columns: list
    group_keys: list = field(default_factory=lambda: ["N"])
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    rate_columns: list | None = None

    def add(self, group: dict, cells: int, h: float, **values):
        self.rows.append(Row(dict(group), int(cells), float(h), values))

    def groups(self):
        seen = []
        for r in self.rows:
            key = tuple(r.group[k] for k in self.group_keys)
            if key not in seen:
                seen.append(key)
        return seen

    def select(self, **group):
        return [r for r in self.rows if all(r.group.get(k) == v for k, v in group.items())]

    def column(self, name, **group):
        return [r.values.get(name) for r in self.select(**group)]

    def h(self, **group):
        return [r.h for r in self.select(**group)]

    def rates(self, name, drop_coarse=0, **group):
        """(lsq, last) rates for one column; ``drop_coarse`` skips the coarsest meshes."""
        rows = self.select(**group)[drop_coarse:]
        if len(rows) < 2:
            return math.nan, math.nan
        vals = [r.values.get(name) for r in rows]
        if any(isinstance(v, str) or v is None for v in vals):
            return math.nan, math.nan
        return estimate_rate([r.h for r in rows], vals)

    def validate(self):
        for key in self.groups():
            rows = self.select(**dict(zip(self.group_keys, key)))
            hs = [r.h for r in rows]
            if any(b >= a for a, b in zip(hs, hs[1:])):
                raise ValueError(f"h must decrease within group {key}")
            for r in rows:
                for v in r.values.values():
                    if not isinstance(v, str) and v is not None and v < 0:
                        raise ValueError("errors must be non-negative")


def write_csv(table: RateTable, path, meta: dict | None = None) -> Path:
    """Write ``table`` with ``#`` comment lines echoing the configuration."""
    path = Path(path)
    meta = dict(table.meta if meta is None else meta)
    header = list(table.group_keys) + ["cells", "h"] + list(table.columns)
    rate_cols = table.rate_columns if table.rate_columns is not None else table.columns
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            for k, v in meta.items():
                fh.write(f"# {k} = {v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for key in table.groups():
                grp = dict(zip(table.group_keys, key))
                for r in table.select(**grp):
                    w.writerow([_fmt_key(r.group[k]) for k in table.group_keys]
                               + [r.cells, format_sci(r.h)]
                               + [format_sci(r.values.get(c, NA)) for c in table.columns])
                if len(table.select(**grp)) >= 2:
                    pairs = [table.rates(c, **grp) if c in rate_cols else (NA, NA)
                             for c in table.columns]
                    for label, i in (("rate-lsq", 0), ("rate-last", 1)):
                        w.writerow([_fmt_key(grp[k]) for k in table.group_keys] + [label, ""]
                                   + [_fmt_rate(p[i]) for p in pairs])
    except OSError as exc:
        raise HarnessIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _fmt_key(v):
    return format_sci(v) if isinstance(v, float) else str(v)


def _fmt_rate(r):
    if isinstance(r, str) or not np.isfinite(r):
        return NA
    return f"{r:.6f}"


def read_csv(path):
    """Parse a file written by :func:`write_csv` into (meta, header, rows)."""
    meta, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            meta[k.strip()] = v.strip()
        else:
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader, [])
    return meta, header, [row for row in reader]


# }}}


# {{{ configuration

@dataclass
class ExperimentConfig:
    experiment: str
    N: tuple | None = None
    meshes: tuple | None = None
    field: str | None = None
    quad_degree: tuple | None = None
    mode: str = "wadg"
    tfinal: float | None = None
    cfl: float = 0.5
    out: str | None = None
    a_values: tuple = CONE_PARAMETERS
    initial: str = "gaussian"
    pulse_width: float = 100.0
    reference_N: int = 6
    reference_cells: int = 32
    reference_cfl: float = 0.25
    threads: int | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.N is None:
            self.N = (4,) if self.experiment in ("quadrature-sweep", "solve") else (1, 2, 3, 4)
        self.N = tuple(int(n) for n in np.atleast_1d(self.N))
        if self.field is None:
            self.field = "layered" if self.experiment == "solve" else "smoothsine"
        if self.tfinal is None:
            self.tfinal = 0.5 if self.experiment == "solve" else 1.0
        if not self.N or any(not 1 <= n <= MAX_ORDER for n in self.N):
            raise ConfigError(f"N must lie in 1..{MAX_ORDER}, got {self.N}")
        if self.meshes is None:
            self.meshes = default_meshes(self.experiment)
        self.meshes = tuple(int(m) for m in np.atleast_1d(self.meshes))
        if not self.meshes or any(m < 1 for m in self.meshes):
            raise ConfigError("mesh sequence must be non-empty positive cells_per_side")
        if list(self.meshes) != sorted(set(self.meshes)):
            raise ConfigError("mesh sequence must be strictly increasing")
        if self.quad_degree is not None:
            self.quad_degree = tuple(int(q) for q in np.atleast_1d(self.quad_degree))
        try:
            self.mode = normalize_mode(self.mode)
            parse_field(self.field)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 < self.cfl <= 2:
            raise ConfigError(f"CFL must lie in (0, 2], got {self.cfl}")
        if self.tfinal < 0:
            raise ConfigError("tfinal must be non-negative")

    def describe(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(format_sci(x) if isinstance(x, float) else str(x) for x in v)
            out[f.name] = v
        return out


def default_meshes(experiment: str) -> tuple:
    # the projection-type studies run one refinement further than the solver studies
    if experiment in ("projection", "projection-cone", "conservation", "conservation-regularity"):
        return (4, 8, 16, 32)
    if experiment in ("quadrature-sweep", "solve"):
        return (16,)
    return (2, 4, 8, 16)


def parse_int_list(text) -> tuple:
    """``"1..4"`` -> (1, 2, 3, 4); ``"2,4,8"`` -> (2, 4, 8)."""
    text = str(text).strip()
    if ".." in text:
        lo, _, hi = text.partition("..")
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ConfigError(f"empty range {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(int(t) for t in text.split(",") if t.strip())


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise HarnessIOError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        k, _, v = line.partition("=")
        out[k.strip().replace("-", "_")] = v.strip()
    return out


_INT_LISTS = {"N", "n", "meshes", "mesh", "quad_degree"}
_FLOATS = {"tfinal", "cfl", "pulse_width", "reference_cfl"}
_INTS = {"reference_N", "reference_cells", "threads"}


def config_from_mapping(experiment: str, raw: dict) -> ExperimentConfig:
    kw = {}
    for k, v in raw.items():
        key = {"n": "N", "mesh": "meshes", "t_final": "tfinal"}.get(k, k)
        try:
            if key in _INT_LISTS:
                kw[key] = parse_int_list(v)
            elif key in _FLOATS:
                kw[key] = float(v)
            elif key in _INTS:
                kw[key] = int(v)
            elif key == "a_values":
                kw[key] = tuple(float(t) for t in str(v).split(","))
            elif key in {f.name for f in fields(ExperimentConfig)}:
                kw[key] = v
            else:
                raise ConfigError(f"unknown config key {k!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {k!r}: {v!r}") from None
    kw.pop("experiment", None)
    return ExperimentConfig(experiment, **kw)


def worker_count(cfg: ExperimentConfig | None = None) -> int:
    if cfg is not None and cfg.threads:
        return max(1, int(cfg.threads))
    env = os.environ.get("WADG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"WADG_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _pmap(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def mesh_h(cells: int) -> float:
    return (DOMAIN[1] - DOMAIN[0]) / cells


# }}}


# {{{ projection problems

def exp_xy(x, y):
    return np.exp(x + y)


@dataclass
class ProjectionResult:
    errors: tuple          # L2 errors of u_{w,1..3} against u / w
    conservation: tuple    # |sum_k moment differences| for u_{w,2}, u_{w,3}


def projection_errors(N: int, cells: int, u: Callable, c2: Callable, op_degree=None,
                      err_degree=None, rhs_degree=None) -> ProjectionResult:
    """Solve the three projection problems with weight w = 1/c^2 on a uniform mesh.

    Each u_{w,i} approximates u / w = u c^2.
    """
    op_degree = 2 * N + 1 if op_degree is None else op_degree
    err_degree = 2 * N + 2 if err_degree is None else err_degree
    rhs_degree = 2 * N + 10 if rhs_degree is None else rhs_degree
    ref = build_operators(N)
    mesh = uniform_tri_mesh(*DOMAIN, cells)
    rule = triangle_quadrature(op_degree)
    ops = WeightedOps(ref, rule, basis="modal")
    xq, yq = map_to_physical(mesh, rule.r, rule.s)
    wq = 1.0 / c2(xq, yq)

    rb = triangle_quadrature(min(rhs_degree, 30))
    xb, yb = map_to_physical(mesh, rb.r, rb.s)
    Vb = orthonormal_basis_eval(N, rb.points)
    b = mesh.J[:, None] * ((u(xb, yb) * rb.weights) @ Vb)

    tri = solve_projection_triple(ops, b, wq, mesh.J)

    re = triangle_quadrature(min(err_degree, 30))
    xe, ye = map_to_physical(mesh, re.r, re.s)
    Ve = orthonormal_basis_eval(N, re.points)
    target = u(xe, ye) * c2(xe, ye)
    errs = []
    for coeffs in (tri.u1, tri.u2, tri.u3):
        d = coeffs @ Ve.T - target
        errs.append(float(np.sqrt(np.sum(mesh.J * ((d * d) @ re.weights)))))

    # moments of w u_{w,i} against the constant
    Mw = ops.weighted_mass(wq, mesh.J, check=False)
    e = ops.e
    mom = [np.einsum("j,kji,ki->k", e, Mw, c) for c in (tri.u1, tri.u2, tri.u3)]
    cons = tuple(float(abs(np.sum(mom[0] - m))) for m in mom[1:])
    return ProjectionResult(tuple(errs), cons)


def _field_callable(spec) -> WeightField:
    return spec if isinstance(spec, WeightField) else parse_field(spec)


def run_projection_study(cfg: ExperimentConfig, u: Callable = exp_xy) -> RateTable:
    c2 = _field_callable(cfg.field)
    table = RateTable(columns=["err_uw1", "err_uw2", "err_uw3"], meta=cfg.describe())
    jobs = [(N, n) for N in cfg.N for n in cfg.meshes]
    deg = (lambda N: cfg.quad_degree[0]) if cfg.quad_degree else (lambda N: None)
    res = _pmap(lambda job: projection_errors(job[0], job[1], u, c2, op_degree=deg(job[0])),
                jobs, worker_count(cfg))
    for (N, n), r in zip(jobs, res):
        table.add({"N": N}, n, mesh_h(n), err_uw1=r.errors[0], err_uw2=r.errors[1],
                  err_uw3=r.errors[2])
    table.validate()
    return table


def run_projection_cone_study(cfg: ExperimentConfig, u: Callable = exp_xy) -> RateTable:
    """Cone weight 1 + sqrt(x^2 + y^2 + a) with doubled quadrature strength."""
    table = RateTable(columns=["err_uw1", "err_uw2", "err_uw3"], group_keys=["N", "a"],
                      meta=cfg.describe())
    jobs = [(N, a, n) for N in cfg.N for a in cfg.a_values for n in cfg.meshes]

    def one(job):
        N, a, n = job
        c2 = builtin_field("cone", {"a": a})
        return projection_errors(N, n, u, c2, op_degree=2 * (2 * N + 1),
                                 err_degree=2 * (2 * N + 2), rhs_degree=2 * (2 * N + 10))

    for (N, a, n), r in zip(jobs, _pmap(one, jobs, worker_count(cfg))):
        table.add({"N": N, "a": a}, n, mesh_h(n), err_uw1=r.errors[0], err_uw2=r.errors[1],
                  err_uw3=r.errors[2])
    table.validate()
    return table


def run_conservation_study(cfg: ExperimentConfig, u: Callable = exp_xy) -> RateTable:
    c2 = _field_callable(cfg.field)
    table = RateTable(columns=["cons_uw2", "cons_uw3"], rate_columns=["cons_uw2"],
                      meta=cfg.describe())
    jobs = [(N, n) for N in cfg.N for n in cfg.meshes]
    res = _pmap(lambda job: projection_errors(job[0], job[1], u, c2), jobs, worker_count(cfg))
    for (N, n), r in zip(jobs, res):
        table.add({"N": N}, n, mesh_h(n), cons_uw2=r.conservation[0], cons_uw3=r.conservation[1])
    table.validate()
    return table


def run_conservation_regularity_study(cfg: ExperimentConfig) -> RateTable:
    """Conservation errors as the cone loses regularity, in w or in u.

    ``case = weight``: u = exp(x + y), c^2 = cone.
    ``case = solution``: u = cone, c^2 = exp(x + y).
    Quadrature strength is doubled as for the cone projection study.
    """
    table = RateTable(columns=["cons_uw2", "cons_uw3"], rate_columns=["cons_uw2"],
                      group_keys=["case", "N", "a"], meta=cfg.describe())
    jobs = [(case, N, a, n) for case in ("weight", "solution") for N in cfg.N
            for a in cfg.a_values for n in cfg.meshes]

    def one(job):
        case, N, a, n = job
        cone = builtin_field("cone", {"a": a})
        expf = builtin_field("expxy")
        u, c2 = (exp_xy, cone) if case == "weight" else (cone, expf)
        return projection_errors(N, n, u, c2, op_degree=2 * (2 * N + 1),
                                 err_degree=2 * (2 * N + 2), rhs_degree=2 * (2 * N + 10))

    for (case, N, a, n), r in zip(jobs, _pmap(one, jobs, worker_count(cfg))):
        table.add({"case": case, "N": N, "a": a}, n, mesh_h(n),
                  cons_uw2=r.conservation[0], cons_uw3=r.conservation[1])
    table.validate()
    return table


# }}}


# {{{ time-domain studies

def manufactured_error(N: int, cells: int, mode: str, quad_degree=None, cfl=0.5,
                       tfinal=1.0) -> float:
    prob = manufactured_problem("smoothsine")
    mesh = uniform_tri_mesh(*DOMAIN, cells)
    cfg = SolverConfig(N=N, mode=mode, cfl=cfl, tfinal=tfinal, source=prob.source,
                       quad_degree=default_solver_quadrature(N) if quad_degree is None
                       else quad_degree)
    state, _, disc = run(cfg, mesh, prob.c2, prob.initial(), record_energy=False)
    return l2_error(disc, state, prob.exact)


def default_solver_quadrature(N: int) -> int:
    return max(3 * N, 2 * N + 1)


def run_convergence_manufactured(cfg: ExperimentConfig) -> RateTable:
    table = RateTable(columns=["err_standard", "err_wadg"], meta=cfg.describe())
    jobs = [(N, n, m) for N in cfg.N for n in cfg.meshes for m in ("standard", "wadg")]
    q = (lambda N: cfg.quad_degree[0]) if cfg.quad_degree else default_solver_quadrature
    res = _pmap(lambda j: manufactured_error(j[0], j[1], j[2], q(j[0]), cfg.cfl, cfg.tfinal),
                jobs, worker_count(cfg))
    out = dict(zip(jobs, res))
    for N in cfg.N:
        for n in cfg.meshes:
            table.add({"N": N}, n, mesh_h(n), err_standard=out[(N, n, "standard")],
                      err_wadg=out[(N, n, "wadg")])
    table.validate()
    return table


def standing_mode(x, y):
    return np.cos(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y)


@dataclass
class ReferenceSolution:
    """A fine run sampled at volume quadrature points of its own mesh."""

    disc: Discretization
    state: object
    rule: object
    values: np.ndarray      # (K_fine, nq) pressure at quadrature points
    centroids: np.ndarray

    def error_of(self, disc: Discretization, state) -> float:
        """L2 distance between a coarser solution and the reference pressure.

        The coarse mesh must nest inside the reference mesh.
        """
        fine = self.disc.mesh
        el = locate_points(disc.mesh, self.centroids[:, 0], self.centroids[:, 1])
        if np.any(el < 0):
            raise ValueError("reference mesh does not cover the coarse mesh")
        xq, yq = map_to_physical(fine, self.rule.r, self.rule.s)
        elq = np.repeat(el[:, None], len(self.rule), axis=1)
        vals = evaluate_at(disc, state.P, xq, yq, elq)
        d = vals - self.values
        return float(np.sqrt(np.sum(fine.J * ((d * d) @ self.rule.weights))))


def compute_reference(N=6, cells=32, cfl=0.25, tfinal=1.0, c2=None,
                      p0: Callable = standing_mode) -> ReferenceSolution:
    c2 = builtin_field("smoothsine") if c2 is None else c2
    mesh = uniform_tri_mesh(*DOMAIN, cells)
    cfg = SolverConfig(N=N, mode="wadg", cfl=cfl, tfinal=tfinal,
                       quad_degree=default_solver_quadrature(N))
    state, _, disc = run(cfg, mesh, c2, (p0,), record_energy=False)
    rule = triangle_quadrature(2 * N + 2)
    values = state.P @ disc.ref.interp_matrix(rule.points).T
    centroids = mesh.element_vertices().mean(axis=1)
    return ReferenceSolution(disc, state, rule, values, centroids)


def run_convergence_reference(cfg: ExperimentConfig, reference: ReferenceSolution | None = None
                              ) -> RateTable:
    if max(cfg.meshes) > cfg.reference_cells:
        raise ConfigError("reference mesh is coarser than the finest test mesh")
    if any(cfg.reference_cells % n for n in cfg.meshes):
        raise ConfigError("test meshes must nest inside the reference mesh")
    if reference is None:
        reference = compute_reference(cfg.reference_N, cfg.reference_cells, cfg.reference_cfl,
                                      cfg.tfinal)
    c2 = reference.disc.c2
    table = RateTable(columns=["err_standard", "err_wadg"], meta=cfg.describe())
    jobs = [(N, n, m) for N in cfg.N for n in cfg.meshes for m in ("standard", "wadg")]
    q = (lambda N: cfg.quad_degree[0]) if cfg.quad_degree else default_solver_quadrature

    def one(job):
        N, n, mode = job
        mesh = uniform_tri_mesh(*DOMAIN, n)
        sc = SolverConfig(N=N, mode=mode, cfl=cfg.cfl, tfinal=cfg.tfinal, quad_degree=q(N))
        state, _, disc = run(sc, mesh, c2, (standing_mode,), record_energy=False)
        return reference.error_of(disc, state)

    out = dict(zip(jobs, _pmap(one, jobs, worker_count(cfg))))
    for N in cfg.N:
        for n in cfg.meshes:
            table.add({"N": N}, n, mesh_h(n), err_standard=out[(N, n, "standard")],
                      err_wadg=out[(N, n, "wadg")])
    table.validate()
    return table


SINGULAR = "singular"


def run_quadrature_sweep(cfg: ExperimentConfig) -> RateTable:
    """Manufactured-solution errors at one (N, h) for a range of quadrature degrees.

    Degrees producing a numerically singular mass matrix are reported as
    ``singular`` rather than aborting the sweep.
    """
    N = cfg.N[0]
    cells = cfg.meshes[-1]
    degrees = cfg.quad_degree or tuple(range(2 * N - 1, 3 * N + 1))
    table = RateTable(columns=["err_standard", "err_wadg"], group_keys=["N", "quad_degree"],
                      meta=cfg.describe(), rate_columns=[])
    jobs = [(q, m) for q in degrees for m in ("standard", "wadg")]

    def one(job):
        q, mode = job
        try:
            return manufactured_error(N, cells, mode, quad_degree=q, cfl=cfg.cfl,
                                      tfinal=cfg.tfinal)
        except SingularMassMatrixError:
            return SINGULAR

    out = dict(zip(jobs, _pmap(one, jobs, worker_count(cfg))))
    for q in degrees:
        table.add({"N": N, "quad_degree": q}, cells, mesh_h(cells),
                  err_standard=out[(q, "standard")], err_wadg=out[(q, "wadg")])
    return table


def gaussian_pulse(width=100.0, center=(0.0, 0.25)):
    def p0(x, y):
        return np.exp(-width * ((x - center[0]) ** 2 + (y - center[1]) ** 2))
    return p0


def run_solve(cfg: ExperimentConfig, dump_dir=None) -> RateTable:
    """Pulse in a heterogeneous medium; records the energy history per mode.

    Default medium is the layered field with an interface at y = 0.
    """
    c2 = _field_callable(cfg.field)
    N, cells = cfg.N[0], cfg.meshes[-1]
    mesh = uniform_tri_mesh(*DOMAIN, cells)
    if cfg.initial == "gaussian":
        p0 = gaussian_pulse(cfg.pulse_width)
    elif cfg.initial == "standing":
        p0 = standing_mode
    else:
        raise ConfigError(f"unknown initial condition {cfg.initial!r}")
    modes = ("standard", "wadg") if cfg.mode != "wadg-cons" else ("standard", "wadg-cons")
    table = RateTable(columns=["energy_initial", "energy_final", "max_increase"],
                      group_keys=["mode"], meta=cfg.describe(), rate_columns=[])
    if dump_dir is not None:
        Path(dump_dir).mkdir(parents=True, exist_ok=True)
        mesh.dump(Path(dump_dir) / "mesh.txt")
    for mode in modes:
        sc = SolverConfig(N=N, mode=mode, cfl=cfg.cfl, tfinal=cfg.tfinal,
                          quad_degree=default_solver_quadrature(N))
        state, trace, _ = run(sc, mesh, c2, (p0,))
        v = np.asarray(trace.values)
        inc = float(max(0.0, np.max(np.diff(v) / v[:-1]))) if len(v) > 1 else 0.0
        table.add({"mode": mode}, cells, mesh_h(cells), energy_initial=v[0],
                  energy_final=v[-1], max_increase=inc)
        if dump_dir is not None:
            dump_pressure(Path(dump_dir) / f"pressure_{mode}.txt", state, N)
    return table


# }}}


STUDIES = {
    "projection": run_projection_study,
    "projection-cone": run_projection_cone_study,
    "conservation": run_conservation_study,
    "conservation-regularity": run_conservation_regularity_study,
    "convergence-manufactured": run_convergence_manufactured,
    "convergence-reference": run_convergence_reference,
    "quadrature-sweep": run_quadrature_sweep,
    "solve": run_solve,
}


def run_experiment(cfg: ExperimentConfig) -> RateTable:
    return STUDIES[cfg.experiment](cfg)
