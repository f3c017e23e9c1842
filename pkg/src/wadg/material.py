"""Scalar coefficient fields (wavespeed c^2 or projection weights) and their sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Mesh2D, map_to_physical
from .quadrature import QuadratureRule2D
from .reference import ReferenceElement


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class WeightField:
    """A positive scalar field f(x, y) with bounds 0 < fmin <= f <= fmax.

    ``interfaces`` lists horizontal lines y = const across which the field
    jumps; meshes must align element faces with them.
    """

    kind: str
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bounds: tuple[float, float]
    params: dict = field(default_factory=dict)
    interfaces: tuple[float, ...] = ()

    def __call__(self, x, y):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def is_constant(self) -> bool:
        return self.kind == "const"

    def describe(self) -> str:
        if not self.params:
            return self.kind
        args = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind}:{args}"


def _sampled_bounds(f, domain=(-1.0, 1.0, -1.0, 1.0), n=201, margin=0.01):
    x = np.linspace(domain[0], domain[1], n)
    y = np.linspace(domain[2], domain[3], n)
    X, Y = np.meshgrid(x, y)
    v = f(X, Y)
    lo, hi = float(v.min()), float(v.max())
    return lo * (1 - margin), hi * (1 + margin)


def constant(value: float) -> WeightField:
    if not value > 0:
        raise ValueError("constant field value must be positive")
    return WeightField("const", lambda x, y: np.full(np.broadcast(x, y).shape, float(value)),
                       (float(value), float(value)), {"v": float(value)})


def smooth_sine() -> WeightField:
    return WeightField("smoothsine",
                       lambda x, y: 1.0 + 0.5 * np.sin(np.pi * x) * np.sin(np.pi * y),
                       (0.5, 1.5))


def regularized_cone(a: float) -> WeightField:
    if a < 0:
        raise ValueError("cone regularization a must be >= 0")

    def f(x, y):
        return 1.0 + np.sqrt(x * x + y * y + a)

    return WeightField("cone", f, _sampled_bounds(f), {"a": float(a)})


def layered_sine() -> WeightField:
    def f(x, y):
        bump = 0.5 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
        return np.where(y > 0, 2.0, 1.0) + bump

    return WeightField("layered", f, (0.5, 2.5), interfaces=(0.0,))


def exp_xy() -> WeightField:
    return WeightField("expxy", lambda x, y: np.exp(x + y), (np.exp(-2.0), np.exp(2.0)))


def custom(evaluator, bounds=None, domain=(-1.0, 1.0, -1.0, 1.0)) -> WeightField:
    if bounds is None:
        bounds = _sampled_bounds(evaluator, domain)
    return WeightField("custom", evaluator, tuple(bounds))


_BUILTINS = {
    "const": lambda p: constant(p.get("v", 1.0)),
    "constant": lambda p: constant(p.get("v", 1.0)),
    "smoothsine": lambda p: smooth_sine(),
    "cone": lambda p: regularized_cone(p.get("a", 0.0)),
    "layered": lambda p: layered_sine(),
    "expxy": lambda p: exp_xy(),
}


def builtin_field(name: str, params: dict | None = None) -> WeightField:
    key = name.lower().replace("_", "")
    if key not in _BUILTINS:
        raise ValueError(f"unknown field {name!r}; choose from {sorted(_BUILTINS)}")
    return _BUILTINS[key](dict(params or {}))


def parse_field(spec: str) -> WeightField:
    """Parse ``name`` or ``name:key=value,...`` (e.g. ``cone:a=1e-3``)."""
    name, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            k, _, v = item.partition("=")
            if not v:
                raise ValueError(f"bad field parameter {item!r} in {spec!r}")
            params[k.strip()] = float(v)
    return builtin_field(name.strip(), params)


@dataclass(frozen=True)
class SampledWeights:
    """Field values per element at quadrature points and at interpolation nodes."""

    rule: QuadratureRule2D
    at_quad: np.ndarray        # (K, nq)
    inv_at_quad: np.ndarray
    at_nodes: np.ndarray       # (K, Np)
    inv_at_nodes: np.ndarray
    bounds: tuple[float, float]


def check_alignment(f: WeightField, mesh: Mesh2D) -> None:
    """Fail if any element straddles one of the field's interfaces."""
    ey = mesh.element_vertices()[:, :, 1]
    for y0 in f.interfaces:
        tol = 1e-12 * max(1.0, abs(y0))
        above = np.any(ey > y0 + tol, axis=1)
        below = np.any(ey < y0 - tol, axis=1)
        bad = np.flatnonzero(above & below)
        if len(bad):
            raise ValueError(f"element {bad[0]} straddles the interface y = {y0:g}")


def sample(f: WeightField, mesh: Mesh2D, ref: ReferenceElement,
           rule: QuadratureRule2D) -> SampledWeights:
    check_alignment(f, mesh)
    xq, yq = map_to_physical(mesh, rule.r, rule.s)
    xn, yn = map_to_physical(mesh, ref.r, ref.s)
    if f.interfaces:
        # nodes on an interface take the value from their own element's side
        cx = xn.mean(axis=1, keepdims=True)
        cy = yn.mean(axis=1, keepdims=True)
        xn = xn + 1e-9 * (cx - xn)
        yn = yn + 1e-9 * (cy - yn)
    vq = f(xq, yq)
    vn = f(xn, yn)
    for name, v in (("quadrature", vq), ("nodal", vn)):
        bad = ~np.isfinite(v) | (v <= 0)
        if bad.any():
            k = int(np.argwhere(bad)[0, 0])
            raise EvaluationError(f"field {f.kind} is non-finite or non-positive at "
                                  f"{name} points of element {k}")
    return SampledWeights(rule=rule, at_quad=vq, inv_at_quad=1.0 / vq,
                          at_nodes=vn, inv_at_nodes=1.0 / vn, bounds=f.bounds)
