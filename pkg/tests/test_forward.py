import math

import mpmath as mp
import numpy as np
import pytest
import scipy.linalg  # noqa: F401  (warning class used in a filter)
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from elasticsurf import forward as F
from elasticsurf import kernels as K
from elasticsurf import verify as V

from conftest import MEDIUM, PARAMS, Solved

Z_STAR = np.array([0.3, -0.2])
P_STAR = np.array([1.0, 0.5])


def manufactured(points):
    return K.gamma(MEDIUM, points, Z_STAR) @ P_STAR


# ---------------------------------------------------------------- surfaces

X = np.linspace(-7.0, 7.0, 301)


def test_example_profiles_match_formulas():
    pi = math.pi
    e1 = 0.5 + 0.03 * np.sin(2.5 * pi * (X - 1)) + 0.12 * np.sin(0.4 * pi * (X - 1))
    e2 = (0.5 + 0.1 * np.exp(-25 * (0.15 * X - 0.5) ** 2)
          + 0.2 * np.exp(-49 * (0.15 * X + 0.6) ** 2) - 0.25 * np.exp(-4 * X ** 2))
    e3 = 0.5 + 0.1 * np.sin(pi * X) + 0.1 * np.sin(0.5 * pi * X)
    assert np.allclose(F.example1().f(X), e1, atol=1e-14)
    assert np.allclose(F.example2().f(X), e2, atol=1e-14)
    assert np.allclose(F.example3().f(X), e3, atol=1e-14)


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
def test_profile_derivatives(name):
    s = F.get_surface(name)
    h = 1e-5
    fd = (s.f(X + h) - s.f(X - h)) / (2 * h)
    assert np.max(np.abs(fd - s.f_prime(X))) < 1e-8


def test_unknown_surface():
    with pytest.raises(ValueError):
        F.get_surface("nope")


def test_surface_bounds():
    lo, hi, slope = F.example3().bounds(30.0)
    t = np.linspace(-30.0, 30.0, 600001)
    f = F.example3().f(t)
    assert abs(lo - f.min()) < 1e-6 and abs(hi - f.max()) < 1e-6
    assert 0.3 <= lo and hi <= 0.7 and slope <= 0.15 * math.pi + 1e-12


# ---------------------------------------------------------------- configuration

def test_geometry_points():
    g = F.MeasurementGeometry(2.0, 20.0, 100)
    pts = g.points()
    assert pts.shape == (201, 2)
    assert pts[0, 0] == -20.0 and abs(pts[-1, 0] - 20.0) < 1e-12 and g.spacing == 0.2
    assert np.all(pts[:, 1] == 2.0)
    with pytest.raises(ValueError):
        F.MeasurementGeometry(2.0, 0.0, 10)
    with pytest.raises(ValueError):
        F.MeasurementGeometry(2.0, 1.0, 0)


def test_default_halfwidth():
    assert F.default_halfwidth(20.0) == 40.0
    for a in (1.0, 5.0, 20.0, 60.0):
        af = F.default_halfwidth(a)
        assert af >= a + max(10.0, a / 2)
        assert af * (1 - 2 * 0.2) >= 1.2 * a - 1e-12


@pytest.mark.parametrize("kw", [dict(eta=-1.0), dict(eta=1.0, node_count=8),
                                dict(eta=1.0, taper_fraction=0.5),
                                dict(eta=1.0, halfwidth=0.0)])
def test_bie_config_validation(kw):
    with pytest.raises(ValueError):
        F.BIEConfig(**kw)


def test_bie_default_eta():
    cfg = F.BIEConfig.default(MEDIUM, F.MeasurementGeometry(2.0, 20.0, 100))
    assert cfg.eta == 15.0 and cfg.halfwidth == 40.0 and cfg.taper_free_halfwidth == 24.0


# ---------------------------------------------------------------- mesh

def test_flat_mesh():
    mesh = F.build_mesh(F.flat(0.0), F.BIEConfig(1.0, 101, 10.0))
    assert np.all(mesh.normals == np.array([0.0, 1.0]))
    assert np.all(mesh.jacobians == 1.0)
    assert abs(mesh.spacing - 20.0 / 100) < 1e-14


def test_example3_mesh_at_origin():
    mesh = F.build_mesh(F.example3(), F.BIEConfig(1.0, 1001, 10.0))
    i = 500
    assert mesh.s[i] == 0.0
    assert np.allclose(mesh.points[i], [0.0, 0.5], atol=1e-15)
    n = np.array([-0.15 * math.pi, 1.0])
    assert np.allclose(mesh.normals[i], n / np.hypot(*n), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(16, 600), st.floats(1.0, 50.0),
       st.one_of(st.just(0.0), st.floats(1e-3, 0.45), st.floats(0.0, 1e-200)))
def test_mesh_invariants(n, a_f, frac):
    mesh = F.build_mesh(F.example1(), F.BIEConfig(1.0, n, a_f, frac))
    assert mesh.size == n
    assert np.allclose(np.hypot(mesh.normals[:, 0], mesh.normals[:, 1]), 1.0, atol=1e-14)
    assert np.all(mesh.normals[:, 1] > 0) and np.all(mesh.jacobians >= 1.0)
    assert np.all((mesh.taper >= 0) & (mesh.taper <= 1))
    inner = np.abs(mesh.s) <= a_f * (1 - 2 * frac)
    assert np.all(mesh.taper[inner] == 1.0)
    if frac >= 1e-3:
        assert mesh.taper[0] < 1e-15 and mesh.taper[-1] < 1e-15


def test_cosine_taper_monotone():
    s = np.linspace(0, 10, 1001)
    t = F.cosine_taper(s, 10.0, 0.2)
    assert np.all(np.diff(t) <= 0)
    assert np.all(t[s <= 6.0] == 1.0)


# ---------------------------------------------------------------- quadrature

@pytest.mark.parametrize("shift", [0.0, 0.3])
def test_kress_weights_exact_on_trig(shift):
    count = 32
    r = F.kress_weights(count, shift)
    t = 2 * math.pi * np.arange(count) / count
    s = 2 * math.pi * shift / count
    for m in range(0, 15):
        approx = np.dot(r, np.cos(m * t))
        exact = 0.0 if m == 0 else -2 * math.pi / m * math.cos(m * s)
        assert abs(approx - exact) < 1e-12


@pytest.mark.parametrize("shift", [0.0, 0.37, -0.6])
def test_windowed_log_rule(shift):
    h = 0.05
    offsets, omega, chi = F.log_window_weights(h, shift=shift)
    g = lambda u: np.cos(3 * u + 0.2) * np.exp(-0.1 * u * u)
    approx = np.dot(omega, g((offsets - shift) * h))

    def integrand(u):
        v = abs(float(u)) / h
        if v >= F.WINDOW_CUTOFF_CELLS:
            return 0.0
        w = float(F.log_window(np.array([v]))[0])
        return mp.log(abs(u)) * w * mp.cos(3 * u + 0.2) * mp.exp(-0.1 * u * u)

    edge = F.WINDOW_CUTOFF_CELLS * h
    flat = F.WINDOW_FLAT_CELLS * h
    exact = float(mp.quad(integrand, [-edge, -flat, 0, flat, edge]))
    assert abs(approx - exact) < 1e-10


def test_window_shape():
    v = np.array([0.0, 8.0, 30.0, 60.0, 70.0])
    w = F.log_window(v)
    assert w[0] == 1.0 and w[1] == 1.0 and 0 < w[2] < 1 and w[3] == 0.0 and w[4] == 0.0


# ---------------------------------------------------------------- incident field

@settings(max_examples=50, deadline=None)
@given(st.tuples(st.floats(-3, 3), st.floats(1, 3)), st.tuples(st.floats(-3, 3), st.floats(1, 3)))
def test_incident_symmetry(x, y):
    x, y = np.array(x), np.array(y)
    if np.hypot(*(x - y)) < 1e-3:
        return
    for j in (1, 2):
        assert np.array_equal(F.incident_field(MEDIUM, y, j, x), K.gamma(MEDIUM, x, y)[:, j - 1])
        for l in (1, 2):
            a = F.incident_field(MEDIUM, y, j, x)[l - 1]
            b = F.incident_field(MEDIUM, x, l, y)[j - 1]
            assert abs(a - b) <= 1e-14 * max(1.0, abs(a))
    with pytest.raises(ValueError):
        F.incident_field(MEDIUM, y, 3, x)


def test_incident_stress_is_pi1_column():
    x, y, n = np.array([1.0, 2.0]), np.array([-0.5, 2.0]), np.array([0.0, 1.0])
    assert np.array_equal(F.incident_stress(MEDIUM, PARAMS, y, 2, x, n),
                          K.pi1(MEDIUM, PARAMS, x, y, n)[:, 1])


def test_incident_decay_along_line():
    y = np.array([0.0, 2.0])
    lam = MEDIUM.shear_wavelength
    t = np.linspace(5 * lam, 200 * lam, 4000)
    x = np.stack([t, np.full_like(t, 2.0)], axis=-1)
    u = np.abs(F.incident_field(MEDIUM, y, 1, x)[:, 0]) * np.sqrt(t)
    assert u[2000:].max() <= 2.0 * u[:2000].max()


# ---------------------------------------------------------------- system and solve

def test_system_shape_and_finite(small_solved):
    n = small_solved.mesh.size
    assert small_solved.matrix.shape == (2 * n, 2 * n)
    assert np.all(np.isfinite(small_solved.matrix))


def test_assembly_independent_of_threads(small_solved):
    m2 = F.assemble_system(small_solved.mesh, MEDIUM, PARAMS, small_solved.bie.eta, threads=3)
    assert np.array_equal(m2, small_solved.matrix)


def test_zero_rhs_gives_zero_density(small_solved):
    d = small_solved.density(np.zeros((small_solved.mesh.size, 2)))
    assert np.all(d.values == 0)
    x = np.array([[0.0, 2.0]])
    assert np.all(F.evaluate_scattered(d, small_solved.mesh, MEDIUM, PARAMS,
                                       small_solved.bie.eta, x) == 0)


def test_solve_densities_multi_rhs(small_solved):
    mesh = small_solved.mesh
    rng = np.random.default_rng(0)
    rhs = [rng.standard_normal(2 * mesh.size) + 1j * rng.standard_normal(2 * mesh.size)
           for _ in range(3)]
    sols = F.solve_densities(small_solved.matrix, rhs)
    for b, d in zip(rhs, sols):
        r = small_solved.matrix @ d.values.reshape(-1) - b
        assert np.linalg.norm(r) <= 1e-11 * np.linalg.norm(b)
        assert len(d) == mesh.size


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_singular_matrix_rejected():
    with pytest.raises(F.SolverError):
        F.FactoredSystem(np.ones((4, 4), dtype=complex))


def test_manufactured_solution_small(small_solved, small_geometry):
    d = small_solved.density(manufactured(small_solved.mesh.points))
    x = small_geometry.points()
    u = F.evaluate_scattered(d, small_solved.mesh, MEDIUM, PARAMS, small_solved.bie.eta, x)
    ex = manufactured(x)
    assert np.abs(u - ex).max() <= 1e-4 * np.abs(ex).max()
    s = F.evaluate_scattered_stress(d, small_solved.mesh, MEDIUM, PARAMS,
                                    small_solved.bie.eta, x)
    exs = K.pi1(MEDIUM, PARAMS, x, Z_STAR, (0.0, 1.0)) @ P_STAR
    assert np.abs(s - exs).max() <= 1e-4 * np.abs(exs).max()


def test_stress_step_insensitive(small_solved, small_geometry):
    d = small_solved.density(manufactured(small_solved.mesh.points))
    x = small_geometry.points()[::5]
    step = F.FD_STEP_FACTOR / MEDIUM.k_s
    args = (d, small_solved.mesh, MEDIUM, PARAMS, small_solved.bie.eta, x)
    a = F.evaluate_scattered_stress(*args, step=step)
    b = F.evaluate_scattered_stress(*args, step=step / 2)
    assert np.abs(a - b).max() <= 1e-8 * np.abs(a).max()


def test_boundary_condition_manufactured(small_solved):
    d = small_solved.density(manufactured(small_solved.mesh.points))
    rep = V.check_boundary_condition(small_solved.mesh, d, MEDIUM, PARAMS,
                                     small_solved.bie.eta, manufactured, tolerance=1e-4)
    assert rep.passed, rep.line()


def test_boundary_condition_point_source(small_solved):
    y = np.array([0.5, 2.0])
    data = V.point_source_data(MEDIUM, y, 1)
    d = small_solved.density(data(small_solved.mesh.points))
    rep = V.check_boundary_condition(small_solved.mesh, d, MEDIUM, PARAMS,
                                     small_solved.bie.eta, data, tolerance=1e-3)
    assert rep.passed, rep.line()


def test_boundary_condition_zero(small_solved):
    d = small_solved.density(np.zeros((small_solved.mesh.size, 2)))
    rep = V.check_boundary_condition(small_solved.mesh, d, MEDIUM, PARAMS,
                                     small_solved.bie.eta, None, tolerance=0.0)
    assert rep.abs_error == 0.0 and rep.passed


def test_evaluation_too_close(small_solved):
    with pytest.raises(F.NearSurfaceError):
        F.evaluation_matrix(small_solved.mesh, MEDIUM, PARAMS, 15.0, np.array([[0.0, 0.5]]))
    with pytest.raises(F.NearSurfaceError):
        F.evaluation_matrix(small_solved.mesh, MEDIUM, PARAMS, 15.0, np.array([[0.0, 0.0]]))


# ---------------------------------------------------------------- datasets

def test_dataset_shape(small_dataset, small_geometry):
    m = small_geometry.count
    assert small_dataset.us.shape == (m, m, 2, 2) and small_dataset.pus.shape == (m, m, 2, 2)
    assert np.all(np.isfinite(small_dataset.us))


def test_dataset_matches_single_solve(small_dataset, small_solved, small_geometry):
    pts = small_geometry.points()
    k, j = 7, 2
    d = small_solved.density(V.point_source_data(MEDIUM, pts[k], j)(small_solved.mesh.points))
    u = F.evaluate_scattered(d, small_solved.mesh, MEDIUM, PARAMS, small_solved.bie.eta, pts)
    assert np.abs(u - small_dataset.us[k, :, j - 1]).max() <= 1e-12 * np.abs(u).max()


def test_dataset_reciprocity(small_dataset):
    us = small_dataset.us
    # us[k, i, j, l] = u^s(x_i; y_k, e_j) . e_l
    diff = np.abs(us - us.transpose(1, 0, 3, 2)).max()
    assert diff <= 1e-3 * np.abs(us).max()


def test_flat_mirror_symmetry():
    geo = F.MeasurementGeometry(2.0, 3.0, 6)
    bie = F.BIEConfig.default(MEDIUM, geo, node_count=401)
    ds = F.generate_dataset(F.flat(0.5), geo, MEDIUM, PARAMS, bie)
    flip = np.array([-1.0, 1.0])
    sign = flip[None, None, :, None] * flip[None, None, None, :]
    mirrored = ds.us[::-1, ::-1] * sign
    assert np.abs(mirrored - ds.us).max() <= 1e-10 * np.abs(ds.us).max()


def test_dataset_preconditions(small_geometry):
    bie = F.BIEConfig.default(MEDIUM, small_geometry, node_count=64)
    with pytest.raises(ValueError):
        F.generate_dataset(F.flat(2.5), small_geometry, MEDIUM, PARAMS, bie)
    narrow = replace(bie, halfwidth=5.0)
    with pytest.raises(ValueError):
        F.generate_dataset(F.example3(), small_geometry, MEDIUM, PARAMS, narrow)
    with pytest.raises(F.NearSurfaceError):
        F.check_source_standoff(F.flat(1.99), [[0.0, 2.0]], MEDIUM, 10.0)


def _random_dataset(m, seed=0):
    rng = np.random.default_rng(seed)
    shape = (m, m, 2, 2)
    us = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    pus = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    geo = F.MeasurementGeometry(2.0, 1.0, (m - 1) // 2)
    return F.CauchyDataSet(MEDIUM, PARAMS, geo, "random", us, pus)


def test_noise_zero_and_determinism():
    ds = _random_dataset(9)
    z = F.add_noise(ds, 0.0, 1)
    assert np.array_equal(z.us, ds.us) and np.array_equal(z.pus, ds.pus)
    a, b = F.add_noise(ds, 0.3, 5), F.add_noise(ds, 0.3, 5)
    assert np.array_equal(a.us, b.us) and np.array_equal(a.pus, b.pus)
    assert a.noise_delta == 0.3 and a.noise_seed == 5
    with pytest.raises(ValueError):
        F.add_noise(ds, -0.1, 0)


def test_noise_statistics():
    ds = _random_dataset(113)
    delta = 0.2
    noisy = F.add_noise(ds, delta, 11)
    for name in ("us", "pus"):
        clean = getattr(ds, name)
        scale = np.abs(clean).max(axis=(1, 3), keepdims=True)
        z = (getattr(noisy, name) - clean) / scale
        assert z.size * 2 >= 1e5
        for channel in (z.real, z.imag):
            assert abs(channel.std() / delta - 1.0) < 0.03


def test_dataset_validation():
    ds = _random_dataset(5)
    with pytest.raises(ValueError):
        F.CauchyDataSet(MEDIUM, PARAMS, ds.geometry, "x", ds.us[:, :3], ds.pus)
    bad = ds.us.copy()
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        F.CauchyDataSet(MEDIUM, PARAMS, ds.geometry, "x", bad, ds.pus)


@pytest.mark.slow
def test_reciprocity_check_full_solver():
    geo = F.MeasurementGeometry(2.0, 20.0, 100)
    bie = F.BIEConfig.default(MEDIUM, geo, node_count=2048)
    rep = V.check_reciprocity(F.example3(), MEDIUM, PARAMS, bie, (1.0, 2.0), (-2.0, 1.5),
                              (1.0, 0.0), (0.0, 1.0))
    assert rep.passed, rep.line()
