"""Coherent states, kernels, symbols, and the pullback metric."""

import numpy as np
import pytest

from btquant import (
    KernelZero,
    adjointness_check,
    berezin_transform,
    bergman_kernel,
    coherent_vector,
    contravariant_reconstruct,
    embedding_point,
    epsilon,
    epsilon_field,
    inner_product,
    kernel_diagonal,
    kernel_pair_product,
    pullback_fs_density,
    sample_chart_points,
    standard_observable,
    toeplitz,
    trace,
    trace_via_symbol,
    two_point_symbol,
    twisted_product,
)
from btquant.asymptotics import LevelSweep, fit_inverse_powers, level_frame

EPS_CONST_TOL = 1e-10
ROUTE_TOL = 1e-10
GROWTH_TOL = 1e-6
TWO_PI = 2.0 * np.pi


def test_reproducing_property(sphere, torus, rng):
    # <e_x, s> computed through the quadrature recovers the weighted value
    # s(x) for arbitrary coefficient vectors
    for model, m in [(sphere, 6), (torus, 4)]:
        frame, rule = level_frame(model, m)
        pts = sample_chart_points(model, 20, rng, u_max=0.9)
        coeffs = rng.standard_normal(frame.dim) + 1j * rng.standard_normal(frame.dim)
        for z in pts:
            ex = coherent_vector(frame, z)
            direct = complex(coeffs @ frame.weighted_on_eval(np.array([z]))[:, 0])
            via_product = inner_product(frame, rule, ex.coeffs, coeffs)
            assert abs(via_product - direct) < 1e-8


def test_epsilon_constant_on_sphere(sphere, rng):
    for m in (1, 4, 16):
        frame, rule = level_frame(sphere, m)
        field = epsilon_field(frame, rule)
        target = (m + 1) / TWO_PI
        for z in sample_chart_points(sphere, 12, rng, u_max=0.95):
            assert abs(field(z) - target) < EPS_CONST_TOL
            assert abs(kernel_diagonal(frame, z) * TWO_PI / (m + 1) - 1.0) < 1e-12


def test_epsilon_integrates_to_dimension(sphere, torus):
    for model, m in [(sphere, 8), (torus, 6)]:
        frame, rule = level_frame(model, m)
        son = frame.node_eval(rule)
        u = np.sum((son.conj() * son).real, axis=0)
        total = float(np.sum(rule.weights_array * u))
        assert abs(total - frame.dim) < 1e-10


def test_torus_epsilon_torsion_shifts(torus, rng):
    # the kernel diagonal is invariant under the order-m lattice shifts
    for m in (2, 3, 5):
        frame, rule = level_frame(torus, m)
        for z in sample_chart_points(torus, 6, rng):
            e0 = epsilon(frame, rule, z)
            for shift in (1.0 / m, 1j / m, (1.0 + 1j) / m):
                assert abs(epsilon(frame, rule, z + shift) - e0) < 1e-10 * e0


def test_kernel_diagonal_growth_constant(torus):
    # u_m / m approaches 1/vol; the deviation decays faster than any power
    z0 = 0.31 + 0.27j
    levels = (8, 12, 16, 24)
    vals = []
    for m in levels:
        frame, rule = level_frame(torus, m)
        vals.append(kernel_diagonal(frame, z0) / m)
    fit = fit_inverse_powers(LevelSweep(torus, levels, "u/m", tuple(vals)), 1)
    assert abs(fit.coefficients[0].real - 1.0 / TWO_PI) < GROWTH_TOL


def test_height_symbol_closed_form(sphere, rng):
    m = 8
    frame, rule = level_frame(sphere, m)
    x3 = standard_observable(sphere, "x3")
    for z in sample_chart_points(sphere, 20, rng, u_max=0.9):
        got = berezin_transform(frame, rule, x3, z)
        want = m / (m + 2) * complex(x3.eval(z))
        assert abs(got - want) < 1e-12


def test_berezin_transform_routes_agree(sphere, torus, rng):
    for model, m, name in [(sphere, 6, "x1"), (torus, 4, "re f_{1,0}")]:
        frame, rule = level_frame(model, m)
        f = standard_observable(model, name)
        for z in sample_chart_points(model, 8, rng, u_max=0.8):
            sym = berezin_transform(frame, rule, f, z, method="symbol")
            integ = berezin_transform(frame, rule, f, z, method="integral")
            assert abs(sym - integ) < ROUTE_TOL


def test_twisted_product_routes_agree(sphere, torus, rng):
    for model, m, names in [
        (sphere, 5, ("x3", "x1")),
        (torus, 4, ("re f_{1,0}", "im f_{0,1}")),
    ]:
        frame, rule = level_frame(model, m)
        f = standard_observable(model, names[0])
        g = standard_observable(model, names[1])
        for z in sample_chart_points(model, 6, rng, u_max=0.8):
            a = twisted_product(frame, rule, f, g, z, method="matrix")
            b = twisted_product(frame, rule, f, g, z, method="integral")
            assert abs(a - b) < 1e-8


def test_two_point_symbol_overlap_floor(sphere):
    frame, rule = level_frame(sphere, 24)
    t = toeplitz(frame, rule, standard_observable(sphere, "x3"))
    near = two_point_symbol(t, 0.1, 0.11)
    assert np.isfinite(near.real) and np.isfinite(near.imag)
    with pytest.raises(KernelZero):
        two_point_symbol(t, 0.0, 1e3)


def test_kernel_symmetry(sphere, rng):
    frame, _ = level_frame(sphere, 7)
    pts = sample_chart_points(sphere, 5, rng, u_max=0.9)
    for x in pts:
        for y in pts:
            bxy = bergman_kernel(frame, x, y)
            byx = bergman_kernel(frame, y, x)
            assert abs(bxy - np.conj(byx)) < 1e-12
            assert abs(kernel_pair_product(frame, x, y) - abs(bxy) ** 2) < 1e-12


def test_contravariant_matches_toeplitz(sphere, torus):
    for model, levels, name in [
        (sphere, (4, 12), "x3"),
        (torus, (3, 8), "re f_{1,0}"),
    ]:
        f = standard_observable(model, name)
        for m in levels:
            frame, rule = level_frame(model, m)
            direct = toeplitz(frame, rule, f)
            recon = contravariant_reconstruct(frame, rule, f)
            assert np.max(np.abs(direct.entries - recon.entries)) < ROUTE_TOL


def test_trace_via_symbol_matches_trace(sphere):
    frame, rule = level_frame(sphere, 8)
    a = toeplitz(frame, rule, standard_observable(sphere, "x1")) @ toeplitz(
        frame, rule, standard_observable(sphere, "x2")
    )
    assert abs(trace_via_symbol(a, rule) - trace(a)) < 1e-10


def test_adjointness_identity(sphere):
    frame, rule = level_frame(sphere, 6)
    t3 = toeplitz(frame, rule, standard_observable(sphere, "x3"))
    t12 = toeplitz(frame, rule, standard_observable(sphere, "x1")) @ toeplitz(
        frame, rule, standard_observable(sphere, "x2")
    )
    for a in (t3, t12):
        for name in ("x1", "x3"):
            f = standard_observable(sphere, name)
            assert adjointness_check(a, f, rule) < 1e-10


def test_pullback_recovers_scaled_metric(sphere, rng):
    for m in (2, 6):
        frame, _ = level_frame(sphere, m)
        pts = sample_chart_points(sphere, 10, rng, u_max=0.8)
        dens = pullback_fs_density(frame, pts)
        target = m * sphere.kahler_density(pts).real
        assert np.max(np.abs(dens / target - 1.0)) < 1e-6
        scalar = pullback_fs_density(frame, complex(pts[0]))
        assert abs(scalar - dens[0]) < 1e-12


def test_coherent_vector_structure(sphere, rng):
    m = 5
    frame, _ = level_frame(sphere, m)
    at_origin = coherent_vector(frame, 0.0)
    mags = np.abs(at_origin.coeffs)
    # only the bottom section survives at the chart origin
    assert np.max(mags[1:]) < 1e-13 * mags[0]
    for z in sample_chart_points(sphere, 8, rng, u_max=0.9):
        ex = coherent_vector(frame, z)
        assert abs(ex.norm_squared() - kernel_diagonal(frame, z)) < 1e-12
        emb = embedding_point(frame, z)
        assert abs(np.linalg.norm(emb) - 1.0) < 1e-12
