import json
import math
import os
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsm.kernels import phi_matrix, psi_matrix
from hsm.quadrature import (
    ConvergenceError,
    adaptive_integrate,
    ball_self_energy,
    box_grid,
    build_ball_grid,
    build_halfspace_grid,
    build_spherical_grid,
    gauss_legendre,
    pairwise_sum,
    periodic_integrate,
    periodic_rule,
    quadratic_form_singular,
    worker_count,
)
from hsm.special import KernelParams, psi_prefactor

BASELINES = json.load(open(os.path.join(os.path.dirname(__file__), "fixtures", "baselines.json")))
P32 = KernelParams(3, 2.0)
LEADING = (psi_prefactor(3, 2.0), 1.0)


def phi_k(P, Q, skip):
    return phi_matrix(P32, P, Q, skip)


def psi_k(P, Q, skip):
    return psi_matrix(P32, P, Q, skip)


def gaussian_values(grid, center=(0.0, 0.0, 1.0), sigma=0.15):
    d = grid.nodes - np.asarray(center)
    return np.exp(-np.sum(d * d, axis=1) / (2 * sigma**2))


BASE_BOX = ([-0.9, -0.9, 0.1], [0.9, 0.9, 1.9])


class TestSums:
    def test_pairwise_sum(self):
        assert pairwise_sum([]) == 0.0
        assert pairwise_sum([1.0, 2.0, 3.0]) == 6.0
        v = np.full(10**5, 0.1)
        assert pairwise_sum(v) == pytest.approx(1e4, rel=1e-14)

    def test_worker_count(self, monkeypatch):
        monkeypatch.delenv("HSM_WORKERS", raising=False)
        assert worker_count() == 1
        monkeypatch.setenv("HSM_WORKERS", "4")
        assert worker_count() == 4
        monkeypatch.setenv("HSM_WORKERS", "zero")
        assert worker_count() == 1


class TestOneDimensionalRules:
    def test_periodic_rule(self):
        r = periodic_rule(16)
        assert r.nodes[0] == -math.pi
        assert r.weights.sum() == pytest.approx(2 * math.pi)

    def test_periodic_bessel(self):
        i0 = sum(0.25**k / math.factorial(k) ** 2 for k in range(30))
        val = periodic_integrate(lambda p: np.exp(np.cos(p)))
        assert val == pytest.approx(2 * math.pi * i0, rel=1e-14)

    def test_periodic_error_squares_on_doubling(self):
        exact = 2 * math.pi * sum(0.25**k / math.factorial(k) ** 2 for k in range(30))
        errs = [abs(periodic_rule(N).integrate(np.exp(np.cos(periodic_rule(N).nodes))) - exact) for N in (2, 4, 8)]
        assert errs[1] <= errs[0] ** 2
        assert errs[2] <= errs[1] ** 2

    def test_periodic_trig_polynomial(self):
        # trapezoid is exact for cos^2 once N > 2
        assert periodic_integrate(lambda p: np.cos(p) ** 2) == pytest.approx(math.pi, rel=1e-15)

    def test_periodic_nonsmooth_raises(self):
        with pytest.raises(ConvergenceError) as exc:
            periodic_integrate(lambda p: np.sqrt(np.abs(np.sin(p))), max_nodes=256)
        assert exc.value.last_values is not None

    def test_periodic_bad_N(self):
        with pytest.raises(ValueError):
            periodic_integrate(np.cos, N=12)
        with pytest.raises(ValueError):
            periodic_integrate(np.cos, N=4)

    def test_gauss_legendre(self):
        r = gauss_legendre(5, 0.0, 2.0)
        # exact for degree 9
        assert r.integrate(r.nodes**9) == pytest.approx(2**10 / 10, rel=1e-14)

    @pytest.mark.parametrize("f,a,b,expected", [
        (lambda x: math.exp(-x), 0.0, math.inf, 1.0),
        (lambda x: x ** -0.5, 0.0, 1.0, 2.0),
        (lambda x: 1 / (1 + x * x), -math.inf, math.inf, math.pi),
    ])
    def test_adaptive(self, f, a, b, expected):
        val, err = adaptive_integrate(f, a, b, tol=1e-10)
        assert val == pytest.approx(expected, abs=1e-9)
        assert err <= 1e-10

    def test_adaptive_budget(self):
        with pytest.raises(ConvergenceError):
            adaptive_integrate(lambda x: math.sin(1 / x) / x, 1e-6, 1.0, tol=1e-14, max_evals=200)
        with pytest.raises(ValueError):
            adaptive_integrate(math.exp, 0, 1, tol=0)


class TestGrids:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_halfspace_volume_and_height(self, n):
        L, H = 2.0, 3.0
        g = build_halfspace_grid(n, L=L, H=H, m=8)
        assert g.size == 8**n
        assert g.measure() == pytest.approx((2 * L) ** (n - 1) * H, rel=1e-13)
        # midpoint rule is exact for integrands linear in each cell
        assert g.integrate(g.nodes[:, -1]) == pytest.approx((2 * L) ** (n - 1) * H**2 / 2, rel=1e-13)
        assert np.all(g.nodes[:, -1] > 0)

    def test_halfspace_grading(self):
        g = build_halfspace_grid(3, m=16, grading=2.0)
        ys = np.unique(g.nodes[:, -1])
        assert np.all(np.diff(np.diff(ys)) > 0)
        with pytest.raises(ValueError):
            build_halfspace_grid(3, m=4)
        with pytest.raises(ValueError):
            build_halfspace_grid(3, grading=0.5)
        with pytest.raises(ValueError):
            build_halfspace_grid(3, L=-1.0)

    def test_gaussian_integral_box(self):
        g = box_grid([-6.0] * 3, [6.0] * 3, 48, domain="free")
        val = g.integrate(np.exp(-np.sum(g.nodes**2, axis=1)))
        assert val == pytest.approx(math.pi**1.5, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_gaussian_integral_spherical(self, n):
        g = build_spherical_grid(np.zeros(n), 8.0, 32, 16, 16, domain="free")
        val = g.integrate(np.exp(-np.sum(g.nodes**2, axis=1)))
        assert val == pytest.approx(math.pi ** (n / 2), rel=1e-12)

    def test_spherical_volume_and_shell(self):
        g = build_spherical_grid([1.0, 2.0, 5.0], 2.0, 8, 8, 8, inner=1.0)
        assert g.measure() == pytest.approx(4 * math.pi / 3 * 7, rel=1e-13)
        assert g.covers([1.0, 2.0, 5.0], 2.0, inner=1.0)
        assert not g.covers([1.0, 2.0, 5.0], 2.0, inner=0.5)
        with pytest.raises(NotImplementedError):
            build_spherical_grid(np.zeros(4), 1.0)

    def test_ball_grid(self):
        g = build_ball_grid(3, m=8, radius=0.5)
        assert g.measure() == pytest.approx(4 * math.pi / 3 * 0.125, rel=1e-13)
        assert g.domain == "ball"
        with pytest.raises(ValueError):
            build_ball_grid(3, radius=1.0)

    def test_covers_box(self):
        g = box_grid([0.0, 0.0, 1.0], [2.0, 2.0, 3.0], 4)
        assert g.covers([1.0, 1.0, 2.0], 1.0)
        assert not g.covers([1.0, 1.0, 2.0], 1.01)

    def test_translated_and_rebuilt(self):
        g = build_halfspace_grid(3, L=1.0, H=2.0, m=8)
        t = g.translated([0.5, 0.0, 1.0])
        np.testing.assert_allclose(t.nodes, g.nodes + [0.5, 0.0, 1.0])
        r = t.rebuild(m=8)
        np.testing.assert_allclose(np.sort(r.nodes, axis=0), np.sort(t.nodes, axis=0), atol=1e-14)
        s = build_spherical_grid([0.0, 0.0, 3.0], 1.0, 6, 6, 6).translated([0.0, 0.0, 1.0])
        assert s.covers([0.0, 0.0, 4.0], 1.0)
        assert s.rebuild().covers([0.0, 0.0, 4.0], 1.0)


class TestSelfEnergy:
    def test_coulomb_ball(self):
        assert ball_self_energy(3, 1.0) == pytest.approx(32 * math.pi**2 / 15, rel=1e-11)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_order_zero_is_volume_squared(self, n):
        vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
        assert ball_self_energy(n, 0.0) == pytest.approx(vol**2, rel=1e-11)

    def test_range(self):
        with pytest.raises(ValueError):
            ball_self_energy(3, 3.0)
        with pytest.raises(ValueError):
            ball_self_energy(3, -0.5)


class TestSingularForm:
    def test_zero_function(self):
        g = box_grid(*BASE_BOX, 8)
        assert quadratic_form_singular(phi_k, np.zeros(g.size), g, LEADING) == 0.0

    def test_argument_checks(self):
        g = box_grid(*BASE_BOX, 8)
        with pytest.raises(ValueError):
            quadratic_form_singular(phi_k, np.ones(3), g, LEADING)
        with pytest.raises(ValueError):
            quadratic_form_singular(phi_k, np.ones(g.size), g, LEADING, method="magic")
        s = build_spherical_grid([0.0, 0.0, 2.0], 1.0, 4, 4, 4)
        with pytest.raises(ValueError):
            quadratic_form_singular(phi_k, np.ones(s.size), s, LEADING)

    @pytest.mark.parametrize("grading", [1.0, 1.5])
    def test_dense_matches_fft(self, grading):
        g = box_grid(*BASE_BOX, 12, grading=grading)
        rng = np.random.default_rng(3)
        f = rng.normal(size=g.size)
        dense = quadratic_form_singular(phi_k, f, g, LEADING, method="dense", block=100)
        fft = quadratic_form_singular(phi_k, f, g, LEADING, method="fft")
        assert fft == pytest.approx(dense, rel=1e-11)

    def test_uniform_ball_coulomb_energy(self):
        # (1/4pi) int_B int_B |p-q|^{-1} = 8 pi a^5 / 15 for the indicator of a ball
        g = box_grid([-1.0, -1.0, 1.0], [1.0, 1.0, 3.0], 48)
        d = g.nodes - np.array([0.0, 0.0, 2.0])
        f = (np.sum(d * d, axis=1) <= 1.0).astype(float)
        val = quadratic_form_singular(psi_k, f, g, LEADING)
        assert val == pytest.approx(8 * math.pi / 15, rel=1e-2)

    def test_positive_for_signed_functions(self):
        g = box_grid(*BASE_BOX, 10)
        rng = np.random.default_rng(9)
        for _ in range(5):
            f = rng.normal(size=g.size)
            assert quadratic_form_singular(phi_k, f, g, LEADING) > 0
            assert quadratic_form_singular(psi_k, f, g, LEADING) > 0

    def test_reordering_invariance(self):
        g = box_grid(*BASE_BOX, 10)
        f = gaussian_values(g, sigma=0.3)
        perm = np.random.default_rng(4).permutation(g.size)
        shuffled = replace(g, nodes=g.nodes[perm], weights=g.weights[perm], cells=g.cells[perm], spec={})
        a = quadratic_form_singular(phi_k, f, g, LEADING, method="dense")
        b = quadratic_form_singular(phi_k, f[perm], shuffled, LEADING)
        assert b == pytest.approx(a, rel=1e-12)

    def test_worker_count_invariance(self, monkeypatch):
        g = box_grid(*BASE_BOX, 12)
        f = gaussian_values(g, sigma=0.3)
        monkeypatch.setenv("HSM_WORKERS", "1")
        one = [quadratic_form_singular(phi_k, f, g, LEADING, method=m, block=200) for m in ("dense", "fft")]
        monkeypatch.setenv("HSM_WORKERS", "4")
        four = [quadratic_form_singular(phi_k, f, g, LEADING, method=m, block=200) for m in ("dense", "fft")]
        assert one == four

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 10.0))
    def test_quadratic_scaling(self, c):
        g = box_grid(*BASE_BOX, 8)
        f = gaussian_values(g, sigma=0.3)
        base = quadratic_form_singular(phi_k, f, g, LEADING)
        assert quadratic_form_singular(phi_k, c * f, g, LEADING) == pytest.approx(c * c * base, rel=1e-12)


class TestBaselines:
    @pytest.mark.parametrize("m", [16, 32])
    def test_phi_form_regression(self, m):
        g = box_grid(*BASE_BOX, m)
        val = quadratic_form_singular(phi_k, gaussian_values(g), g, LEADING)
        assert val == pytest.approx(BASELINES["phi_form_gaussian"]["values"][str(m)], rel=1e-12)

    def test_second_order_convergence(self):
        v = BASELINES["phi_form_gaussian"]["values"]
        ratio = (v["32"] - v["16"]) / (v["64"] - v["32"])
        # h^2 convergence gives a ratio of 4
        assert 3.0 < ratio < 5.0
        rich = BASELINES["phi_form_gaussian"]["richardson"]
        assert abs(v["64"] - rich) / rich < 2e-3
