"""Profile construction tests: tail fields, phase, profile evaluators."""

import numpy as np
import pytest
from scipy import integrate

from ws_scatter.grids import Grid
from ws_scatter.operators import gradient, lebesgue_norm
from ws_scatter.profiles import (
    build_asymptotic_state, build_profile_bundle, build_a1_tilde,
    gaussian_field, hermite_gaussian_field, support_radius,
    phase, g_tilde, u_a, a0, a1, a1_dot, a1_gradient, grad_u_a, dt_u_a,
)
from conftest import TEST_SIGMA, TEST_ALPHA


def rel_l2(a, b):
    return np.linalg.norm((a - b).ravel()) / np.linalg.norm(b.ravel())


# radial-integral oracle for the tail fields: for a radial source G the
# half-wave mean reduces to (sin(w tau)/w g)(x) = int r g(r) dr / (2x)
# over [|x-tau|, x+tau], and at x=0 to tau*g(tau)
def tail_oracle(x0, sigma, alpha, nu_max, companion=False):
    a2 = alpha ** 2

    def G(r, nu):
        return a2 * np.exp(-(r / nu) ** 2 / sigma ** 2)

    def f(nu):
        tau = nu - 1.0
        if companion:
            g0 = G(tau, nu)
            gp = -2.0 * tau / (nu * sigma) ** 2 * g0
            if x0 == 0.0:
                return nu ** -3 * (g0 + tau * gp)
            lo, hi = abs(x0 - tau), x0 + tau
            val = ((hi * G(hi, nu) + lo * G(lo, nu)) / 2.0
                   if tau > x0 else (hi * G(hi, nu) - lo * G(lo, nu)) / 2.0)
            return nu ** -3 * val / x0
        if x0 == 0.0:
            return -nu ** -3 * tau * G(tau, nu)
        val, _ = integrate.quad(lambda r: r * G(r, nu), abs(x0 - tau), x0 + tau)
        return -nu ** -3 * val / (2.0 * x0)

    out, _ = integrate.quad(f, 1.0, nu_max, limit=400)
    return out


class TestTailFields:
    def test_zero_source(self, small_state):
        st = build_asymptotic_state(
            small_state.grid, np.zeros(small_state.grid.shape, complex),
            small_state.wave_grid, small_state.a_plus, small_state.a_dot_plus)
        out = build_a1_tilde(st, nu_max=8.0, node_count=64)
        assert np.all(out == 0.0)

    def test_matches_radial_oracle(self, small_bundle):
        g = small_bundle.grid
        i0 = g.n // 2
        for j_off in (0, 3, 7):
            got = small_bundle.a1_tilde[i0 + j_off, i0, i0]
            want = tail_oracle(g.axis_coords[i0 + j_off], TEST_SIGMA,
                               TEST_ALPHA, small_bundle.nu_max)
            assert got == pytest.approx(want, rel=1e-5)

    def test_companion_matches_radial_oracle(self, small_bundle):
        g = small_bundle.grid
        i0 = g.n // 2
        got = small_bundle.a1_tilde_tilde[i0, i0, i0]
        want = tail_oracle(0.0, TEST_SIGMA, TEST_ALPHA,
                           small_bundle.nu_max, companion=True)
        assert got == pytest.approx(want, rel=1e-5)

    def test_l2_bounds_both_fields(self, small_bundle):
        # one-sided bounds |w^(m+1) A1t|_2 and |w^m A1tt|_2
        # <= (m+1/2)^-1 |w^m |w|^2|_2
        st = small_bundle.state
        w2 = np.abs(st.w_plus) ** 2
        pg = small_bundle.a1_pieces[0].grid
        slack = 1.0 + 1e-4
        for m in (0, 1):
            rhs = _omega_norm(st.grid, w2, m) / (m + 0.5)
            lhs_a1 = _omega_norm(pg, small_bundle.a1_tilde_on(pg), m + 1)
            lhs_tt = _omega_norm(pg, small_bundle.a1_tilde_tilde_on(pg), m)
            assert lhs_a1 <= rhs * slack
            assert lhs_tt <= rhs * slack

    def test_node_doubling_converged(self, small_state):
        coarse = build_profile_bundle(small_state, nu_max=16.0, node_count=96,
                                      near_n=96, octave_n=64)
        fine = build_profile_bundle(small_state, nu_max=16.0, node_count=192,
                                    near_n=96, octave_n=64)
        g = small_state.grid
        n_c = lebesgue_norm(g, coarse.a1_tilde, 2.0)
        n_f = lebesgue_norm(g, fine.a1_tilde, 2.0)
        assert abs(n_f - n_c) / n_f <= 1e-5

    def test_real_valued(self, small_bundle):
        assert np.isrealobj(small_bundle.a1_tilde)
        assert np.isrealobj(small_bundle.a1_tilde_tilde)

    def test_tail_bounds_reported(self, small_bundle):
        tb = small_bundle.tail_bounds
        assert tb["zero_mode"] > 0.0
        assert tb["nonzero_mode"] == pytest.approx(
            tb["zero_mode"] / small_bundle.nu_max)


def _omega_norm(grid, f, power):
    fh = np.fft.fftn(f)
    w2 = np.sum(grid.omega ** (2 * power) * np.abs(fh) ** 2)
    return float(np.sqrt(w2 / grid.n ** 3 * grid.cell_volume))


class TestPhase:
    def test_zero_at_one(self, small_bundle):
        assert np.all(phase(small_bundle, 1.0) == 0.0)

    def test_equals_tail_at_e(self, small_bundle):
        out = phase(small_bundle, np.e)
        assert rel_l2(out, small_bundle.a1_tilde) <= 1e-12

    def test_time_derivative(self, small_bundle):
        t, h = 10.0, 1e-3
        fd = (phase(small_bundle, t + h) - phase(small_bundle, t - h)) / (2 * h)
        assert rel_l2(fd, small_bundle.a1_tilde / t) <= 1e-6

    def test_additivity(self, small_bundle):
        s, t = 3.0, 5.0
        lhs = phase(small_bundle, s * t)
        rhs = phase(small_bundle, s) + phase(small_bundle, t)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))


class TestProfile:
    def test_zero_amplitude(self, small_state, small_bundle):
        st = build_asymptotic_state(
            small_state.grid, np.zeros(small_state.grid.shape, complex),
            small_state.wave_grid, small_state.a_plus, small_state.a_dot_plus)
        b = build_profile_bundle(st, nu_max=8.0, node_count=64,
                                 near_n=64, octave_n=48)
        out = u_a(b, 4.0, Grid(32, 64.0))
        assert np.all(out == 0.0)

    def test_l2_identity(self, small_bundle):
        t = 10.0
        out_grid = Grid(128, 2 * t * small_bundle.state.rho * 1.1)
        ua = u_a(small_bundle, t, out_grid)
        assert lebesgue_norm(out_grid, ua, 2.0) == pytest.approx(
            lebesgue_norm(small_bundle.grid, small_bundle.state.w_plus, 2.0),
            rel=1e-6)

    def test_l4_scaling(self, small_bundle):
        t = 16.0
        out_grid = Grid(160, 2 * t * small_bundle.state.rho * 1.05)
        ua = u_a(small_bundle, t, out_grid)
        got = lebesgue_norm(out_grid, ua, 4.0) * t ** 0.75
        want = lebesgue_norm(small_bundle.grid, small_bundle.state.w_plus, 4.0)
        assert got == pytest.approx(want, rel=1e-4)

    def test_sup_scaling(self, small_bundle):
        t = 8.0
        out_grid = Grid(96, 2 * t * small_bundle.state.rho * 1.1)
        ua = u_a(small_bundle, t, out_grid)
        got = lebesgue_norm(out_grid, ua, np.inf) * t ** 1.5
        want = lebesgue_norm(small_bundle.grid, small_bundle.state.w_plus,
                             np.inf)
        assert got == pytest.approx(want, rel=1e-6)


class TestWaveSide:
    def test_a0_is_free_flow(self, small_state):
        w = a0(small_state, 0.0)
        assert np.allclose(w.a, small_state.a_plus)
        assert np.allclose(w.a_dot, small_state.a_dot_plus)

    def test_tail_sup_scaling_spread(self, small_bundle):
        # t |A_1(t)|_inf over matched sample points is t-independent
        base = Grid(64, 24.0)
        vals = []
        for t in (4.0, 8.0, 16.0):
            scaled = Grid(base.n, t * base.length)
            vals.append(t * lebesgue_norm(
                scaled, a1(small_bundle, t, scaled), np.inf))
        spread = (max(vals) - min(vals)) / max(vals)
        assert spread <= 1e-4

    def test_tail_gradient_scaling(self, small_bundle):
        base = Grid(64, 24.0)
        vals = []
        for t in (4.0, 8.0):
            scaled = Grid(base.n, t * base.length)
            gxyz = a1_gradient(small_bundle, t, scaled)
            vals.append(t ** 2 * max(np.max(np.abs(c)) for c in gxyz))
        spread = (max(vals) - min(vals)) / max(vals)
        assert spread <= 1e-4

    def test_tail_time_derivative_fd(self, small_state, small_bundle):
        # the nu-truncated tail has an O(1/nu_max) moving-boundary term in
        # its time derivative; the companion field matches the difference
        # quotient up to that term, and the mismatch shrinks with nu_max
        t, h = 10.0, 1e-2
        out = Grid(48, 30.0)  # pullback points stay inside every panel
        fd = (a1(small_bundle, t + h, out) - a1(small_bundle, t - h, out)) / (2 * h)
        want = a1_dot(small_bundle, t, out)
        err_16 = rel_l2(fd, want)
        assert err_16 <= 0.15
        shorter = build_profile_bundle(small_state, nu_max=8.0, node_count=64,
                                       near_n=96, octave_n=64)
        fd8 = (a1(shorter, t + h, out) - a1(shorter, t - h, out)) / (2 * h)
        err_8 = rel_l2(fd8, a1_dot(shorter, t, out))
        assert err_16 < 0.6 * err_8

    def test_wave_profile_sup_decay(self, small_bundle):
        # shell amplitude settles onto its 1/t law at rate width/t, so the
        # window starts several widths out and ends before the cone wraps
        from ws_scatter.diagnostics import DecaySeries, fit_decay
        from ws_scatter.operators import WaveState, wave_propagate
        g = Grid(128, 110.0)
        data = WaveState(g, gaussian_field(g, 1.0, 2.2), np.zeros(g.shape), 0.0)
        ts = np.geomspace(12.0, 48.0, 10)
        vals = []
        for t in ts:
            total = wave_propagate(data, t).a + a1(small_bundle, t, g)
            vals.append(lebesgue_norm(g, total, np.inf))
        fit = fit_decay(DecaySeries(ts, np.asarray(vals), "wave profile sup"))
        assert fit.exponent == pytest.approx(-1.0, abs=0.15)


class TestProfileDerivatives:
    @pytest.fixture(scope="class")
    def check_grid(self, small_bundle):
        t = 8.0
        box = 2 * t * small_bundle.state.rho * 1.05
        return Grid(128, box)

    def test_gradient_matches_spectral(self, small_bundle, check_grid):
        t = 8.0
        ua = u_a(small_bundle, t, check_grid)
        spectral = gradient(check_grid, ua)
        closed = grad_u_a(small_bundle, t, check_grid)
        num = np.sqrt(sum(np.linalg.norm((closed[a] - spectral[a]).ravel()) ** 2
                          for a in range(3)))
        den = np.sqrt(sum(np.linalg.norm(spectral[a].ravel()) ** 2
                          for a in range(3)))
        assert num / den <= 1e-6

    def test_time_derivative_matches_fd(self, small_bundle, check_grid):
        t, h = 8.0, 8e-3
        fd = (u_a(small_bundle, t + h, check_grid)
              - u_a(small_bundle, t - h, check_grid)) / (2 * h)
        closed = dt_u_a(small_bundle, t, check_grid)
        assert rel_l2(closed, fd) <= 1e-5

    def test_zero_amplitude_derivatives(self, small_state):
        st = build_asymptotic_state(
            small_state.grid, np.zeros(small_state.grid.shape, complex),
            small_state.wave_grid, small_state.a_plus, small_state.a_dot_plus)
        b = build_profile_bundle(st, nu_max=8.0, node_count=64,
                                 near_n=64, octave_n=48)
        out = Grid(32, 48.0)
        assert np.all(dt_u_a(b, 4.0, out) == 0.0)
        assert all(np.all(c == 0.0) for c in grad_u_a(b, 4.0, out))


class TestFamiliesAndState:
    def test_gaussian_peak_and_width(self):
        g = Grid(32, 16.0)
        f = gaussian_field(g, 2.0, 1.5)
        assert f.max() == pytest.approx(2.0)
        i0 = g.n // 2
        x = g.axis_coords
        j = i0 + 4
        assert f[j, i0, i0] == pytest.approx(
            2.0 * np.exp(-x[j] ** 2 / (2 * 1.5 ** 2)))

    def test_hermite_is_odd(self):
        g = Grid(32, 16.0)
        f = hermite_gaussian_field(g, 1.0, 1.2, orders=(1, 0, 0))
        i0 = g.n // 2
        assert f[i0, i0, i0] == pytest.approx(0.0, abs=1e-14)
        assert f[i0 + 3, i0, i0] == pytest.approx(-f[i0 - 3, i0, i0], rel=1e-12)

    def test_support_radius(self):
        g = Grid(64, 32.0)
        f = gaussian_field(g, 1.0, 1.0)
        r = support_radius(g, f)
        assert 6.5 <= r <= 8.5  # exp(-r^2/2) crosses 1e-12 near r = 7.43

    def test_c4_cached(self, small_state):
        direct = lebesgue_norm(small_state.grid, small_state.w_plus, 4.0)
        assert small_state.c4 == pytest.approx(direct, rel=1e-12)

    def test_bad_nu_max_rejected(self, small_state):
        with pytest.raises(ValueError, match="nu_max"):
            build_profile_bundle(small_state, nu_max=2.0)
        with pytest.raises(ValueError, match="node_count"):
            build_profile_bundle(small_state, node_count=16)
