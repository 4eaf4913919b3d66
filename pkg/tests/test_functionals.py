import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsm import functionals as fn
from hsm.quadrature import box_grid, build_spherical_grid
from hsm.special import KernelParams, sobolev_constant

BASELINES = json.load(open(os.path.join(os.path.dirname(__file__), "fixtures", "baselines.json")))


def points_in_support(f, count, seed, shrink=0.95):
    rng = np.random.default_rng(seed)
    s = f.support
    d = rng.normal(size=(count, f.n))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = rng.uniform(s.inner, shrink * s.radius, count) if s.inner else shrink * s.radius * rng.uniform(0, 1, count) ** (1 / f.n)
    return s.center + r[:, None] * d


def fd_gradient(f, P, h=1e-6):
    G = np.empty_like(P)
    for k in range(P.shape[1]):
        e = np.zeros(P.shape[1])
        e[k] = h
        G[:, k] = (f.value(P + e) - f.value(P - e)) / (2 * h)
    return G


def assert_gradient(f, seed=0, count=40):
    P = points_in_support(f, count, seed)
    exact = f.grad(P)
    approx = fd_gradient(f, P)
    scale = max(1.0, float(np.max(np.abs(exact))))
    np.testing.assert_allclose(exact, approx, atol=1e-6 * scale)


class TestTrialFunctions:
    def test_smooth_bump(self):
        f = fn.smooth_bump([0.0, 0.0, 2.0], 1.0, amplitude=2.0)
        assert f([0.0, 0.0, 2.0])[0] == pytest.approx(2 * math.exp(-1))
        assert f([0.0, 1.0, 2.0])[0] == 0.0
        assert f([0.0, 0.0, 3.5])[0] == 0.0
        with pytest.raises(ValueError):
            fn.smooth_bump([0.0, 0.0, 1.0], 1.0)

    def test_gaussian_bump(self):
        f = fn.gaussian_bump([0.0, 0.0, 3.0], 0.5, 2.0)
        assert f([0.0, 0.0, 3.0])[0] == 1.0
        # untouched inside R/2, zero beyond R
        assert f([0.0, 0.9, 3.0])[0] == pytest.approx(math.exp(-0.81 / 0.25))
        assert f([0.0, 2.0, 3.0])[0] == 0.0

    def test_bubble(self):
        f = fn.bubble_family(0.25, 2.0, 1.0)
        assert f([0.0, 0.0, 2.0])[0] == pytest.approx(2.0)
        assert f([0.0, 0.0, 3.1])[0] == 0.0
        with pytest.raises(ValueError):
            fn.bubble_family(0.0, 2.0, 1.0)
        with pytest.raises(ValueError):
            fn.bubble_family(0.1, 1.0, 1.0)

    @pytest.mark.parametrize("make", [
        lambda: fn.smooth_bump([0.2, -0.1, 2.0], 1.2, amplitude=1.5, sharpness=0.7),
        lambda: fn.smooth_bump([0.5, 1.5], 1.0),
        lambda: fn.gaussian_bump([0.0, 0.0, 3.0], 0.5, 2.5),
        lambda: fn.bubble_family(0.3, 4.0, 3.5),
        lambda: fn.bubble_family(0.3, 4.0, 3.5, n=4),
    ], ids=["bump3", "bump2", "gaussian", "bubble3", "bubble4"])
    def test_gradients(self, make):
        assert_gradient(make())

    def test_pullback_gradients(self):
        for i, g in enumerate(fn.ball_bumps(3, 3, seed=1)):
            assert_gradient(fn.halfspace_from_ball(g), seed=i)
            assert_gradient(fn.ball_from_hyperbolic(g), seed=i)
        for i, g in enumerate(fn.exterior_bumps(3, 3, seed=2)):
            assert_gradient(fn.kelvin_pullback(g), seed=i)

    def test_pullback_domains(self):
        h = fn.smooth_bump([0.0, 0.0, 2.0], 1.0)
        with pytest.raises(ValueError):
            fn.halfspace_from_ball(h)
        with pytest.raises(ValueError):
            fn.ball_from_hyperbolic(h)
        with pytest.raises(ValueError):
            fn.kelvin_pullback(h)

    def test_pullback_supports(self):
        # every point where the pullback is nonzero lies in its recorded support
        for g, pull in [(g, fn.halfspace_from_ball(g)) for g in fn.ball_bumps(3, 2, seed=5)] + \
                       [(g, fn.kelvin_pullback(g)) for g in fn.exterior_bumps(3, 2, seed=6)]:
            s = pull.support
            rng = np.random.default_rng(0)
            P = s.center + rng.uniform(-1.5, 1.5, (4000, 3)) * s.radius
            if pull.domain == "ball":
                P = P[np.linalg.norm(P, axis=1) < 1]
            else:
                P = P[P[:, -1] > 0]
            nz = pull.value(P) != 0
            assert np.all(np.linalg.norm(P[nz] - s.center, axis=1) <= s.radius * (1 + 1e-9))

    def test_corpora_are_seeded(self):
        a = fn.random_bumps(3, 4, seed=11)
        b = fn.random_bumps(3, 4, seed=11)
        c = fn.random_bumps(3, 4, seed=12)
        P = np.array([[0.1, 0.2, 2.0]])
        assert [f.value(P)[0] for f in a] == [f.value(P)[0] for f in b]
        assert [f.support.radius for f in a] != [f.support.radius for f in c]
        for f in a:
            assert f.support.center[-1] > f.support.radius
        for g in fn.ball_bumps(3, 10, seed=3, reach=0.8):
            assert np.linalg.norm(g.support.center) + g.support.radius <= 0.8 + 1e-12
        for g in fn.exterior_bumps(3, 10, seed=3):
            assert np.linalg.norm(g.support.center) - g.support.radius > 1


class TestHardyForm:
    def test_baseline(self):
        f = fn.gaussian_bump([0.0, 0.0, 3.0], 0.5, 2.9)
        g = fn.support_grid(f, 48)
        assert fn.hardy_form(f, 3, g) == pytest.approx(BASELINES["hardy_form_gaussian"]["value"], rel=1e-12)
        assert fn.lp_norm(f, 6, g) == pytest.approx(BASELINES["lp6_norm_gaussian"]["value"], rel=1e-12)

    def test_matches_substituted_form(self):
        for f in fn.random_bumps(3, 3, seed=4):
            g = fn.support_grid(f, 32)
            assert fn.hardy_form(f, 3, g) == pytest.approx(fn.hardy_form_substituted(f, 3, g), rel=1e-7)

    def test_positive(self):
        for f in fn.random_bumps(3, 4, seed=8):
            assert fn.hardy_form(f, 3, fn.support_grid(f, 24)) > 0

    def test_support_must_fit(self):
        f = fn.smooth_bump([0.0, 0.0, 3.0], 1.0)
        small = build_spherical_grid([0.0, 0.0, 3.0], 0.9, 8, 8, 8)
        with pytest.raises(ValueError):
            fn.hardy_form(f, 3, small)
        with pytest.raises(ValueError):
            fn.hardy_form(f, 4, fn.support_grid(f, 8))
        with pytest.raises(ValueError):
            fn.lp_norm(f, 6, small)

    def test_coarsen(self):
        f = fn.smooth_bump([0.0, 0.0, 3.0], 1.0)
        g = fn.support_grid(f, 24)
        assert fn.coarsen(g).spec["m_r"] == 18
        b = fn.support_grid(f, 16, "box")
        assert fn.coarsen(b, 0.5).size == 8**3


class TestNorms:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.floats(1.1, 8))
    def test_homogeneity(self, c, p):
        f = fn.smooth_bump([0.0, 0.0, 2.0], 1.0)
        g = fn.support_grid(f, 12)
        assert fn.lp_norm(f.times(c), p, g) == pytest.approx(abs(c) * fn.lp_norm(f, p, g), rel=1e-12)

    def test_bad_exponent(self):
        f = fn.smooth_bump([0.0, 0.0, 2.0], 1.0)
        with pytest.raises(ValueError):
            fn.lp_norm(f, 1.0, fn.support_grid(f, 8))


class TestRayleigh:
    def test_scale_invariance(self):
        f = fn.smooth_bump([0.3, 0.0, 3.0], 1.0, sharpness=0.8)
        q1 = fn.rayleigh_quotient(f, 3, fn.support_grid(f, 32)).quotient
        for lam in (0.5, 2.0, 7.0):
            fl = f.scaled(lam)
            q = fn.rayleigh_quotient(fl, 3, fn.support_grid(fl, 32)).quotient
            assert q == pytest.approx(q1, rel=1e-6)

    def test_above_sobolev_constant(self):
        S = sobolev_constant(3)
        for f in fn.random_bumps(3, 4, seed=21):
            r = fn.rayleigh_quotient(f, 3, fn.support_grid(f, 24))
            assert r.quotient > S + r.err_estimate
        # shrinking bubbles approach the constant from above
        qs = []
        for eps in (1 / 4, 1 / 16, 1 / 64):
            b = fn.bubble_family(eps, 4.0, 3.5)
            qs.append(fn.rayleigh_quotient(b, 3, fn.bubble_grid(b, 32)).quotient)
        assert qs[0] > qs[1] > qs[2] > S
        assert qs[2] < 1.03 * S

    def test_needs_n3(self):
        f = fn.smooth_bump([0.0, 2.0], 1.0)
        with pytest.raises(ValueError):
            fn.rayleigh_quotient(f, 2, fn.support_grid(f, 8))


class TestConformalChain:
    def test_ball_to_halfspace(self):
        for g in fn.ball_bumps(3, 3, seed=31):
            f = fn.halfspace_from_ball(g)
            B = fn.ball_form(g, 3, fn.support_grid(g, 32))
            H = fn.hardy_form(f, 3, fn.support_grid(f, 32))
            assert H == pytest.approx(B, rel=1e-4)
            assert fn.lp_norm(f, 6, fn.support_grid(f, 32)) == pytest.approx(
                fn.lp_norm(g, 6, fn.support_grid(g, 32)), rel=1e-6)

    def test_hyperbolic_to_ball(self):
        for k in fn.ball_bumps(3, 3, seed=32):
            grid = fn.support_grid(k, 24)
            form, mass = fn.hyperbolic_form(k, 3, grid)
            assert mass > 0
            assert form == pytest.approx(fn.ball_form(fn.ball_from_hyperbolic(k), 3, grid), rel=1e-8)

    def test_kelvin(self):
        for g in fn.exterior_bumps(3, 3, seed=33):
            gk = fn.kelvin_pullback(g)
            outer = fn.complement_form(g, 3, fn.support_grid(g, 32))
            inner = fn.ball_form(gk, 3, fn.support_grid(gk, 32))
            assert inner == pytest.approx(outer, rel=1e-5)

    def test_distance_weight_dominates(self):
        for g in fn.ball_bumps(3, 3, seed=34, reach=0.95):
            grid = fn.support_grid(g, 32)
            assert fn.theorem2_form(g, 3, grid) > fn.ball_form(g, 3, grid) > 0

    def test_domain_checks(self):
        h = fn.smooth_bump([0.0, 0.0, 2.0], 1.0)
        with pytest.raises(ValueError):
            fn.ball_form(h, 3, fn.support_grid(h, 8))
        g = fn.ball_bumps(3, 1, seed=0)[0]
        with pytest.raises(ValueError):
            fn.complement_form(g, 3, fn.support_grid(g, 8))


class TestHLSQuotient:
    prm = KernelParams(3, 2.0)

    def test_below_bound(self):
        bound = fn.hls_bound(self.prm)
        for f in fn.random_bumps(3, 2, seed=41):
            q = fn.hls_quotient(f, self.prm, fn.support_grid(f, 16, "box"))
            assert q.err_estimate > 0
            assert q.quotient + q.err_estimate < bound

    def test_psi_dominates_phi(self):
        f = fn.random_bumps(3, 1, seed=42)[0]
        g = fn.support_grid(f, 12, "box")
        qphi = fn.hls_quotient(f, self.prm, g).quotient
        qpsi = fn.hls_quotient(f, self.prm, g, kernel="psi").quotient
        assert 0 < qphi < qpsi

    def test_homogeneous_of_degree_zero(self):
        f = fn.random_bumps(3, 1, seed=43)[0]
        g = fn.support_grid(f, 12, "box")
        q1 = fn.hls_quotient(f, self.prm, g).quotient
        assert fn.hls_quotient(f.times(3.0), self.prm, g).quotient == pytest.approx(q1, rel=1e-12)

    def test_checks(self):
        f = fn.random_bumps(3, 1, seed=44)[0]
        g = fn.support_grid(f, 8, "box")
        with pytest.raises(ValueError):
            fn.hls_quotient(f, KernelParams(3, 3.0), g)
        with pytest.raises(ValueError):
            fn.hls_quotient(f, self.prm, g, kernel="gauss")
        with pytest.raises(ValueError):
            fn.hls_quotient(f, self.prm, box_grid([-0.1, -0.1, 1.0], [0.1, 0.1, 1.2], 4))


class TestHeatSemigroup:
    def setup_method(self):
        self.f = fn.random_bumps(2, 1, seed=51)[0]
        self.grid = fn.support_grid(self.f, 24, "box")
        self.v = self.f.value(self.grid.nodes)

    def test_contraction_and_positivity(self):
        n0 = self.grid.integrate(self.v**2)
        for t in (0.01, 0.1, 1.0):
            Gv = fn.heat_apply(self.v, t, self.grid)
            assert np.all(Gv >= 0)
            assert self.grid.integrate(Gv**2) <= n0

    def test_small_time_identity(self):
        # the kernel width sqrt(4t) must still span several cells
        grid = fn.support_grid(self.f, 64, "box")
        v = self.f.value(grid.nodes)
        errs = []
        for t in (0.02, 0.005, 0.00125):
            Gv = fn.heat_apply(v, t, grid)
            errs.append(math.sqrt(grid.integrate((Gv - v) ** 2) / grid.integrate(v * v)))
        # roughly linear in t
        assert errs[0] / errs[1] > 2.5
        assert errs[1] / errs[2] > 2.5
        assert errs[2] < 0.05

    def test_block_size_irrelevant(self):
        a = fn.heat_apply(self.v, 0.1, self.grid, block=7)
        b = fn.heat_apply(self.v, 0.1, self.grid)
        np.testing.assert_allclose(a, b, rtol=1e-13)

    def test_generator(self):
        seq = fn.generator_limit(self.f, [0.1, 0.05], self.grid)
        assert np.all(seq > 0)
        zero = fn.smooth_bump(self.f.support.center, self.f.support.radius, amplitude=0.0)
        np.testing.assert_array_equal(fn.generator_limit(zero, [0.1], self.grid), 0.0)
        with pytest.raises(ValueError):
            fn.generator_limit(self.f, [0.0], self.grid)
