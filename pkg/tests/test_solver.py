import numpy as np
import pytest

from wadg.material import builtin_field, constant
from wadg.mesh import uniform_tri_mesh
from wadg.solver import (BlowUpError, Discretization, SolverConfig, WaveState, compute_rhs,
                         dump_pressure, energy, energy_dissipation, evaluate_at,
                         interpolate_state, l2_error, load_pressure, locate_points,
                         manufactured_problem, normalize_mode, run, step_rk)

MODES = ["standard", "wadg", "wadg-cons"]


def _random_state(disc, seed):
    rng = np.random.default_rng(seed)
    shape = (disc.K, disc.Np)
    return WaveState(*(rng.standard_normal(shape) for _ in range(3)))


def _disc(N=3, cells=2, mode="wadg", flux="upwind", field="smoothsine", **kw):
    mesh = uniform_tri_mesh(-1, 1, -1, 1, cells)
    return Discretization(mesh, builtin_field(field), SolverConfig(N, mode=mode, flux=flux, **kw))


def _dE_along_rhs(state, disc, eps=1e-3):
    # E is quadratic, so the central difference is exact up to rounding
    d = compute_rhs(state, disc)
    shift = lambda s: WaveState(*(a + s * eps * b for a, b in zip(state.fields(), d)))
    return (energy(shift(1), disc) - energy(shift(-1), disc)) / (2 * eps)


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("flux", ["upwind", "central"])
def test_energy_identity(mode, flux):
    disc = _disc(mode=mode, flux=flux)
    state = _random_state(disc, 1)
    lhs = _dE_along_rhs(state, disc)
    rhs = energy_dissipation(state, disc)
    scale = energy(state, disc)
    assert abs(lhs - rhs) < 1e-10 * scale
    if flux == "central":
        assert abs(lhs) < 1e-10 * scale
    else:
        assert rhs < 0


@pytest.mark.parametrize("mode", MODES)
def test_energy_is_positive_definite(mode):
    disc = _disc(mode=mode)
    for seed in range(3):
        assert energy(_random_state(disc, seed), disc) > 0


def test_zero_state_stays_zero():
    disc = _disc(mode="wadg-cons")
    s = WaveState.zeros(disc.K, disc.Np)
    out = step_rk(s, disc.timestep(), disc)
    assert all(np.all(a == 0) for a in out.fields())


def test_local_conservation_of_corrected_scheme():
    # e^T M_w dP agrees with the exact weighted mass on each element
    states = {}
    for mode in MODES:
        disc = _disc(mode=mode)
        e = np.tile(disc.ops.e, (disc.K, 1))
        Mw = disc.ops.weighted_mass(disc.wq, disc.mesh.J)
        dP = compute_rhs(_random_state(disc, 9), disc)[0]
        states[mode] = np.einsum("ki,kij,kj->k", e, Mw, dP)
    np.testing.assert_allclose(states["wadg-cons"], states["standard"], atol=1e-11)
    assert np.abs(states["wadg"] - states["standard"]).max() > 1e-8


def test_constant_wavespeed_modes_agree_every_step():
    mesh = uniform_tri_mesh(-1, 1, -1, 1, 4)
    prob = manufactured_problem("const")
    discs = [Discretization(mesh, constant(1.0), SolverConfig(3, mode=m)) for m in MODES]
    states = [interpolate_state(d, *prob.initial()) for d in discs]
    dt = discs[0].timestep()
    for _ in range(20):
        states = [step_rk(s, dt, d) for s, d in zip(states, discs)]
        for s in states[1:]:
            assert np.abs(s.P - states[0].P).max() < 1e-11
            assert np.abs(s.Ux - states[0].Ux).max() < 1e-11


def test_upwind_energy_decays_in_time():
    mesh = uniform_tri_mesh(-1, 1, -1, 1, 4)
    cfg = SolverConfig(3, mode="wadg", tfinal=0.3)
    p0 = lambda x, y: np.exp(-20 * (x**2 + (y - 0.2) ** 2))
    _, trace, _ = run(cfg, mesh, builtin_field("layered"), (p0,))
    assert trace.is_non_increasing()
    assert trace.values[-1] < trace.values[0]


def test_time_integration_fourth_order():
    # fix the mesh, refine dt; compare against a much finer step
    disc = _disc(N=3, cells=2, mode="wadg", flux="central")
    prob = manufactured_problem("const")
    s0 = interpolate_state(disc, *prob.initial())
    T = 0.4

    def advance(n):
        s = s0
        for _ in range(n):
            s = step_rk(s, T / n, disc)
        return s.P

    ref = advance(160)
    errs = [np.abs(advance(n) - ref).max() for n in (10, 20)]
    assert 3.5 < np.log2(errs[0] / errs[1]) < 4.6


def test_final_partial_step_hits_tfinal():
    mesh = uniform_tri_mesh(-1, 1, -1, 1, 2)
    cfg = SolverConfig(2, tfinal=0.1)
    times = []
    state, trace, disc = run(cfg, mesh, constant(1.0), (lambda x, y: x * 0,), dt=0.03,
                             callback=lambda i, s: times.append(s.t))
    np.testing.assert_allclose(times, [0.03, 0.06, 0.09, 0.1], atol=1e-15)
    assert state.t == 0.1 and len(trace.values) == 5


def test_manufactured_solution_satisfies_pde():
    prob = manufactured_problem("smoothsine")
    rng = np.random.default_rng(0)
    x, y, t = rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50), rng.uniform(0, 1, 50)
    h = 1e-5
    d = lambda f, dx=0, dy=0, dt=0: (f(x + dx, y + dy, t + dt) - f(x - dx, y - dy, t - dt)) / (2 * h)
    pt = d(prob.p, dt=h)
    divu = d(prob.ux, dx=h) + d(prob.uy, dy=h)
    np.testing.assert_allclose(pt / prob.c2(x, y) + divu, prob.source(x, y, t), atol=1e-8)
    np.testing.assert_allclose(d(prob.ux, dt=h), -d(prob.p, dx=h), atol=1e-8)
    np.testing.assert_allclose(d(prob.uy, dt=h), -d(prob.p, dy=h), atol=1e-8)
    # pressure vanishes on the walls
    edge = np.linspace(-1, 1, 7)
    assert np.abs(prob.p(np.ones(7), edge, 0.3)).max() < 1e-15


def test_manufactured_error_small():
    prob = manufactured_problem("smoothsine")
    mesh = uniform_tri_mesh(-1, 1, -1, 1, 4)
    cfg = SolverConfig(3, mode="wadg", tfinal=0.5, source=prob.source, quad_degree=9)
    state, _, disc = run(cfg, mesh, prob.c2, prob.initial(), record_energy=False)
    assert l2_error(disc, state, prob.exact) < 1e-3


def test_blow_up_detected():
    disc = _disc(N=1)
    s = _random_state(disc, 0)
    s.P[0, 0] = np.inf
    with pytest.raises(BlowUpError), np.errstate(invalid="ignore"):
        step_rk(s, 1e-3, disc)


def test_point_location_and_evaluation():
    disc = _disc(N=3, cells=3)
    f = lambda x, y: x**2 - x * y + 3 * y**3
    P = f(disc.geo.x, disc.geo.y)
    rng = np.random.default_rng(2)
    x, y = rng.uniform(-1, 1, (2, 200))
    assert np.all(locate_points(disc.mesh, x, y) >= 0)
    np.testing.assert_allclose(evaluate_at(disc, P, x, y), f(x, y), atol=1e-12)
    assert locate_points(disc.mesh, [2.0], [0.0])[0] == -1
    with pytest.raises(ValueError):
        evaluate_at(disc, P, [2.0], [0.0])


def test_dump_roundtrip(tmp_path):
    disc = _disc(N=2)
    s = _random_state(disc, 4)
    s.t = 0.25
    path = tmp_path / "p.txt"
    dump_pressure(path, s, 2)
    assert path.read_text().splitlines()[0] == f"0.25 {disc.K} {disc.Np} 2"
    t, N, P = load_pressure(path)
    assert (t, N) == (0.25, 2)
    np.testing.assert_array_equal(P, s.P)


def test_config_validation():
    assert normalize_mode("WADG") == "wadg"
    for bad in (dict(mode="spectral"), dict(flux="lax"), dict(cfl=0.0), dict(tfinal=-1)):
        with pytest.raises(ValueError):
            SolverConfig(2, **bad)
    assert SolverConfig(3).quad_degree == 7
