import numpy as np
import pytest

from wadg.material import (EvaluationError, builtin_field, check_alignment, constant, custom,
                           parse_field, sample)
from wadg.mesh import map_to_physical, uniform_tri_mesh
from wadg.quadrature import triangle_quadrature
from wadg.reference import build_operators


def test_point_values():
    assert builtin_field("smoothsine")(0.0, 0.0) == 1.0
    assert builtin_field("cone", {"a": 0.0})(0.0, 0.0) == 1.0
    assert builtin_field("layered")(0.25, 0.5) == pytest.approx(2.0, abs=1e-15)
    assert builtin_field("smoothsine").bounds == (0.5, 1.5)
    assert constant(2.5).bounds == (2.5, 2.5)


def test_parse_and_errors():
    f = parse_field("cone:a=1e-3")
    assert f.params == {"a": 1e-3}
    assert parse_field("const:v=4")(0.3, 0.1) == 4.0
    for bad in ("nope", "cone:a", "cone:a=-1"):
        with pytest.raises(ValueError):
            parse_field(bad)
    with pytest.raises(ValueError):
        constant(0.0)


def test_sample_constant():
    m = uniform_tri_mesh(-1, 1, -1, 1, 2)
    ref = build_operators(2)
    s = sample(constant(4.0), m, ref, triangle_quadrature(5))
    assert np.all(s.at_quad == 4.0) and np.all(s.at_nodes == 4.0)
    assert s.bounds == (4.0, 4.0)


def test_sample_within_bounds():
    m = uniform_tri_mesh(-1, 1, -1, 1, 2)
    ref = build_operators(3)
    for name in ("smoothsine", "layered", "expxy", "cone"):
        f = builtin_field(name)
        s = sample(f, m, ref, triangle_quadrature(7))
        lo, hi = f.bounds
        assert s.at_quad.min() >= lo - 1e-12 and s.at_quad.max() <= hi + 1e-12
        np.testing.assert_allclose(s.at_quad * s.inv_at_quad, 1.0, atol=1e-14)


def test_element_means_against_monte_carlo():
    m = uniform_tri_mesh(-1, 1, -1, 1, 2)
    ref = build_operators(2)
    rule = triangle_quadrature(16)
    f = builtin_field("smoothsine")
    s = sample(f, m, ref, rule)
    means = s.at_quad @ rule.weights / 2
    rng = np.random.default_rng(11)
    u, v = rng.random((2, 10**6))
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    x, y = map_to_physical(m, 2 * u - 1, 2 * v - 1)
    mc = f(x, y).mean(axis=1)
    np.testing.assert_allclose(means, mc, atol=1e-3)


def test_refining_quadrature_stable():
    m = uniform_tri_mesh(-1, 1, -1, 1, 3)
    ref = build_operators(3)
    f = builtin_field("smoothsine")
    ints = []
    for d in (16, 24):
        rule = triangle_quadrature(d)
        ints.append(sample(f, m, ref, rule).at_quad @ rule.weights * m.J)
    assert np.abs(ints[0] - ints[1]).max() < 1e-10


def test_interface_alignment():
    f = builtin_field("layered")
    check_alignment(f, uniform_tri_mesh(-1, 1, -1, 1, 4))
    with pytest.raises(ValueError):
        check_alignment(f, uniform_tri_mesh(-1, 1, -1, 1, 3))


def test_nodes_on_interface_take_own_side():
    m = uniform_tri_mesh(-1, 1, -1, 1, 2)
    ref = build_operators(2)
    s = sample(builtin_field("layered"), m, ref, triangle_quadrature(4))
    below = m.element_vertices()[:, :, 1].max(axis=1) <= 0
    assert np.all(s.at_nodes[below] < 1.6) and np.all(s.at_nodes[~below] > 1.4)


def test_nonfinite_field_names_element():
    m = uniform_tri_mesh(-1, 1, -1, 1, 2)
    ref = build_operators(1)
    bad = custom(lambda x, y: np.where(x > 0.5, np.nan, 1.0), bounds=(1, 1))
    with pytest.raises(EvaluationError, match="element"):
        sample(bad, m, ref, triangle_quadrature(3))
