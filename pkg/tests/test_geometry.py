"""Model geometry: curvature, brackets, Laplacian, quadrature."""

import numpy as np
import pytest

from btquant import (
    InvalidModulus,
    ModelKind,
    NonFiniteIntegrand,
    UnderResolved,
    UnknownSelector,
    build_quadrature,
    constant_observable,
    derivative_selfcheck,
    integrate,
    laplacian,
    make_model,
    poisson_bracket,
    sample_chart_points,
    standard_observable,
)

CURVATURE_TOL = 1e-6
ORACLE_TOL = 1e-6
QUAD_TOL = 1e-12
POINT_COUNT = 100


def _mixed_log_derivative(model, z, step=2e-3):
    """d_z d_zbar log(weight) by a Richardson-refined five-point stencil."""

    def lap(h):
        s = (np.log(model.metric_weight(z + h))
             + np.log(model.metric_weight(z - h))
             + np.log(model.metric_weight(z + 1j * h))
             + np.log(model.metric_weight(z - 1j * h))
             - 4.0 * np.log(model.metric_weight(z)))
        return s / h ** 2

    coarse, fine = lap(step), lap(0.5 * step)
    return 0.25 * (4.0 * fine - coarse) / 3.0


def test_curvature_matches_metric(sphere, torus, rng):
    # the line-bundle weight must reproduce the Kahler density:
    # -d_z d_zbar log(weight) = g at every chart point
    for model in (sphere, torus):
        pts = sample_chart_points(model, POINT_COUNT, rng,
                                  u_max=0.9 if model.kind is ModelKind.SPHERE else 1.0)
        g = model.kahler_density(pts)
        fd = -_mixed_log_derivative(model, pts)
        rel = np.max(np.abs(fd - g) / np.abs(g))
        assert rel < CURVATURE_TOL


def test_derivative_oracles_selfconsistent(sphere, torus, rng):
    for model, names in [
        (sphere, ["x1", "x2", "x3"]),
        (torus, ["f_{1,0}", "f_{0,1}", "re f_{2,1}", "im f_{1,-1}"]),
    ]:
        pts = sample_chart_points(model, 25, rng,
                                  u_max=0.8 if model.kind is ModelKind.SPHERE else 1.0)
        for name in names:
            obs = standard_observable(model, name)
            assert derivative_selfcheck(obs, pts, tol=ORACLE_TOL)


def test_product_observables_keep_valid_derivatives(sphere, rng):
    x1 = standard_observable(sphere, "x1")
    x3 = standard_observable(sphere, "x3")
    prod = x1 * x3
    combo = 2.0 * x1 - x3
    pts = sample_chart_points(sphere, 25, rng, u_max=0.8)
    assert derivative_selfcheck(prod, pts, tol=ORACLE_TOL)
    assert derivative_selfcheck(combo, pts, tol=ORACLE_TOL)
    assert np.allclose(prod.eval(pts), x1.eval(pts) * x3.eval(pts), atol=1e-14)
    assert np.allclose(combo.eval(pts), 2 * x1.eval(pts) - x3.eval(pts), atol=1e-14)


def test_sphere_bracket_closed_forms(sphere, rng):
    x = [standard_observable(sphere, n) for n in ("x1", "x2", "x3")]
    pts = sample_chart_points(sphere, 40, rng, u_max=0.9)
    # cyclic structure constants: {x_i, x_j} = 2 x_k
    for i, j, k in [(2, 0, 1), (0, 1, 2), (1, 2, 0)]:
        br = poisson_bracket(sphere, x[i], x[j])
        dev = np.max(np.abs(br.eval(pts) - 2.0 * np.asarray(x[k].eval(pts))))
        assert dev < 1e-12


def test_torus_bracket_closed_form(torus, rng):
    f10 = standard_observable(torus, "f_{1,0}")
    f01 = standard_observable(torus, "f_{0,1}")
    f11 = standard_observable(torus, "f_{1,1}")
    pts = sample_chart_points(torus, 40, rng)
    br = poisson_bracket(torus, f10, f01)
    dev = np.max(np.abs(br.eval(pts) + 2.0 * np.pi * np.asarray(f11.eval(pts))))
    assert dev < 1e-12


def test_bracket_antisymmetry_and_leibniz(sphere, rng):
    x1 = standard_observable(sphere, "x1")
    x2 = standard_observable(sphere, "x2")
    x3 = standard_observable(sphere, "x3")
    pts = sample_chart_points(sphere, 30, rng, u_max=0.85)
    ab = poisson_bracket(sphere, x1, x3).eval(pts)
    ba = poisson_bracket(sphere, x3, x1).eval(pts)
    assert np.max(np.abs(np.asarray(ab) + np.asarray(ba))) < 1e-11
    # {f, g h} = g {f, h} + {f, g} h; bracket factors carry finite-difference
    # oracles so the tolerance sits above the stencil error
    lhs = poisson_bracket(sphere, x1, x2 * x3).eval(pts)
    rhs = (np.asarray(x2.eval(pts)) * np.asarray(poisson_bracket(sphere, x1, x3).eval(pts))
           + np.asarray(poisson_bracket(sphere, x1, x2).eval(pts)) * np.asarray(x3.eval(pts)))
    assert np.max(np.abs(np.asarray(lhs) - rhs)) < 5e-7


def test_laplacian_closed_forms(sphere, torus, rng):
    pts_s = sample_chart_points(sphere, 30, rng, u_max=0.9)
    for name in ("x1", "x2", "x3"):
        obs = standard_observable(sphere, name)
        lap = laplacian(sphere, obs)
        dev = np.max(np.abs(np.asarray(lap.eval(pts_s))
                            + 2.0 * np.asarray(obs.eval(pts_s))))
        assert dev < 1e-12
    pts_t = sample_chart_points(torus, 30, rng)
    for k, l in [(1, 0), (0, 1), (2, 1)]:
        obs = standard_observable(torus, ("fourier", k, l))
        lap = laplacian(torus, obs)
        dev = np.max(np.abs(np.asarray(lap.eval(pts_t))
                            + np.pi * (k * k + l * l) * np.asarray(obs.eval(pts_t))))
        assert dev < 1e-11


def test_laplacian_symmetric_in_quadrature(sphere, torus):
    for model, f_name, g_name, res in [
        (sphere, "x1", "x3", 40),
        (torus, "re f_{1,0}", "im f_{0,1}", 24),
    ]:
        rule = build_quadrature(model, res)
        f = standard_observable(model, f_name)
        g = standard_observable(model, g_name)
        lf = laplacian(model, f)
        lg = laplacian(model, g)
        left = integrate(rule, lambda z: np.asarray(lf.eval(z)) * np.asarray(g.eval(z)))
        right = integrate(rule, lambda z: np.asarray(f.eval(z)) * np.asarray(lg.eval(z)))
        assert abs(left - right) < 1e-8


def test_quadrature_volume_and_moments(sphere, torus):
    rule_s = build_quadrature(sphere, 48)
    assert abs(integrate(rule_s, lambda z: np.ones_like(z)) - sphere.volume) < QUAD_TOL
    for name in ("x1", "x2", "x3"):
        obs = standard_observable(sphere, name)
        assert abs(integrate(rule_s, obs)) < QUAD_TOL
    x3 = standard_observable(sphere, "x3")
    x3sq = x3 * x3
    # Beta-integral oracle: the second moment of the height coordinate
    assert abs(integrate(rule_s, x3sq) - 2.0 * np.pi / 3.0) < QUAD_TOL

    rule_t = build_quadrature(torus, 24)
    assert abs(integrate(rule_t, lambda z: np.ones_like(z)) - torus.volume) < QUAD_TOL
    for k, l in [(1, 0), (0, 1), (2, -1)]:
        obs = standard_observable(torus, ("fourier", k, l))
        assert abs(integrate(rule_t, obs)) < QUAD_TOL


def test_quadrature_refinement_stability(sphere):
    coarse = build_quadrature(sphere, 32)
    fine = build_quadrature(sphere, 40)
    f = standard_observable(sphere, "x3")
    fsq = f * f
    assert abs(integrate(coarse, fsq) - integrate(fine, fsq)) < 1e-12


def test_quadrature_guards(sphere):
    with pytest.raises(UnderResolved):
        build_quadrature(sphere, 4)
    rule = build_quadrature(sphere, 16)
    with pytest.raises(NonFiniteIntegrand):
        integrate(rule, lambda z: np.full(z.shape, np.nan))


def test_model_construction_guards():
    with pytest.raises(InvalidModulus):
        make_model(ModelKind.TORUS, tau=0.5)
    with pytest.raises(InvalidModulus):
        make_model(ModelKind.TORUS, tau=1.0 - 2j)
    model = make_model(ModelKind.TORUS, tau=0.25 + 1.5j)
    assert model.tau == 0.25 + 1.5j


def test_observable_parsing(sphere, torus):
    with pytest.raises(UnknownSelector):
        standard_observable(sphere, "x9")
    with pytest.raises(UnknownSelector):
        standard_observable(torus, "f_{a,b}")
    c = constant_observable(sphere, 2.5)
    assert np.allclose(c.eval(np.array([0.3 + 0.1j])), 2.5)
    re_part = standard_observable(torus, "re f_{1,0}")
    full = standard_observable(torus, "f_{1,0}")
    flip = standard_observable(torus, "f_{-1,0}")
    pts = np.array([0.3 + 0.4j, 0.1 + 0.9j])
    lhs = np.asarray(re_part.eval(pts))
    rhs = 0.5 * (np.asarray(full.eval(pts)) + np.asarray(flip.eval(pts)))
    assert np.max(np.abs(lhs - rhs)) < 1e-14


def test_chart_sampler_deterministic(sphere):
    a = sample_chart_points(sphere, 10, np.random.default_rng(5), u_max=0.7)
    b = sample_chart_points(sphere, 10, np.random.default_rng(5), u_max=0.7)
    assert np.array_equal(a, b)
    t = (a * a.conj()).real
    assert np.all(t / (1.0 + t) <= 0.7)
