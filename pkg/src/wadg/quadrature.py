"""Quadrature on [-1, 1] and on the bi-unit reference triangle.

The triangle rules are collapsed-coordinate (Duffy) tensor products of a
Gauss-Legendre rule in the collapsed direction and a Gauss-Jacobi(1, 0) rule
in the other, so they exist for any degree and have strictly positive
weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy.special import roots_jacobi

MAX_GAUSS_POINTS = 32
MAX_TRIANGLE_DEGREE = 30


@dataclass(frozen=True)
class QuadratureRule1D:
    points: np.ndarray
    weights: np.ndarray
    exactness: int


@dataclass(frozen=True)
class QuadratureRule2D:
    """Rule on {r, s >= -1, r + s <= 0}; ``points`` has shape (nq, 2)."""

    points: np.ndarray
    weights: np.ndarray
    exactness: int

    @property
    def r(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def s(self) -> np.ndarray:
        return self.points[:, 1]

    def __len__(self) -> int:
        return len(self.weights)


def _legendre_with_derivative(n, x):
    p0 = np.ones_like(x)
    p1 = x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    # Newton on P_n from Chebyshev-like initial guesses
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_with_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dp = _legendre_with_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def gauss_1d(npoints: int) -> QuadratureRule1D:
    """Gauss-Legendre rule with ``npoints`` nodes, exact to degree 2n-1."""
    if not 1 <= npoints <= MAX_GAUSS_POINTS:
        raise ValueError(f"npoints must be in 1..{MAX_GAUSS_POINTS}, got {npoints}")
    if npoints == 1:
        x, w = np.zeros(1), np.full(1, 2.0)
    else:
        x, w = _gauss_legendre(npoints)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule1D(x, w, 2 * npoints - 1)


@lru_cache(maxsize=None)
def _collapsed_rule(degree):
    n = (degree + 2) // 2
    a, wa = gauss_1d(n).points, gauss_1d(n).weights
    # weight (1 - b) absorbs the Duffy Jacobian (1 - b) / 2
    b, wb = roots_jacobi(n, 1.0, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    r = 0.5 * (1.0 + A) * (1.0 - B) - 1.0
    s = B
    w = 0.5 * np.outer(wa, wb)
    pts = np.column_stack([r.ravel(), s.ravel()])
    w = w.ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def triangle_quadrature(degree: int) -> QuadratureRule2D:
    """Positive-weight rule on the reference triangle exact for total degree ``degree``."""
    if not 1 <= degree <= MAX_TRIANGLE_DEGREE:
        raise ValueError(
            f"triangle quadrature degree must be in 1..{MAX_TRIANGLE_DEGREE}, got {degree}")
    pts, w = _collapsed_rule(degree)
    return QuadratureRule2D(pts, w, degree)


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of r**a * s**b over the bi-unit triangle.

    Shifting to x = (1+r)/2, y = (1+s)/2 on the unit triangle and expanding
    binomially gives sums of Beta-function terms x**i y**j -> i! j! / (i+j+2)!.
    """
    total = Fraction(0)
    for i in range(a + 1):
        for j in range(b + 1):
            coeff = comb(a, i) * comb(b, j) * (-1) ** (a - i + b - j) * 2 ** (i + j)
            total += Fraction(coeff * factorial(i) * factorial(j), factorial(i + j + 2))
    # dr ds = 4 dx dy
    return float(4 * total)


def certify_exactness(rule: QuadratureRule2D, degree: int | None = None) -> float:
    """Largest error over all monomials r**a s**b with a + b <= degree."""
    if degree is None:
        degree = rule.exactness
    r, s = rule.r, rule.s
    worst = 0.0
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = monomial_integral(a, b)
            approx = float(np.dot(rule.weights, r**a * s**b))
            worst = max(worst, abs(approx - exact) / max(1.0, abs(exact)))
    return worst
