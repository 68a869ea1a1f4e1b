"""Pair coupling: schedule calibration, drifts, reweighting accumulators."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from fastdiffusion import (
    CoefficientSet,
    CouplingSchedule,
    PiecewiseConstant,
    StepConfig,
    ZeroHorizon,
    build_model,
    coupling_gain,
    dirichlet1d_model,
    f_diagnostic,
    from_spectral,
    girsanov_weight,
    make_pair_state,
    make_schedule,
    norm_h,
    norm_q,
    run_pair,
    step_pair,
    zeta,
)
from fastdiffusion.coupling import coupling_drift
from fastdiffusion.dynamics import PathRNG


def four_mode_model():
    return dirichlet1d_model(4, [1.0, 0.8, 0.6, 0.5])


def flat_schedule(eps, c, T=1.0, dist0=1.0):
    """Schedule with constant amplitude 1 and zero feedback, so beta = c."""
    return CouplingSchedule(
        epsilon=eps, c=c, T=T, dist0=dist0,
        amp=PiecewiseConstant.constant(1.0),
        gamma=PiecewiseConstant.constant(0.0),
    )


class TestMakeSchedule:
    def test_epsilon_values(self):
        m = four_mode_model()
        x = np.array([0.5, 0.0, 0.0, 0.0])
        y = np.zeros(4)
        s = make_schedule(m, CoefficientSet(r=0.5), 1.0, x, y)
        assert s.epsilon == pytest.approx((8.0 / 3.0) / (8.0 / 3.0 + 2.0), rel=1e-15)
        s4 = make_schedule(m, CoefficientSet(r=0.5, sigma=4.0), 1.0, x, y)
        assert s4.epsilon == pytest.approx(2.0 / 3.0, rel=1e-15)

    def test_epsilon_identity_exact(self):
        m = four_mode_model()
        x, y = np.array([1.0, 0, 0, 0.0]), np.zeros(4)
        for sigma in (8.0 / 3.0, 4.0, 16.0 / 3.0, 3.0, 2.5):
            r = 4.0 / sigma - 1.0 if sigma < 4.0 else 0.5
            s = make_schedule(m, CoefficientSet(r=r, sigma=sigma), 1.0, x, y)
            assert s.epsilon * (sigma + 2.0) == sigma

    def test_hand_normalizer(self):
        # constant delta = xi = 1, gamma = 0, sigma = 4, T = 1:
        # amp = (2/3)^{1/4}, c = dist0^{2/3} / ((2/3) (2/3)^{1/4})
        m = four_mode_model()
        x = np.array([0.5, -0.1, 0.0, 0.2])
        y = np.zeros(4)
        s = make_schedule(m, CoefficientSet(r=0.5, sigma=4.0), 1.0, x, y)
        dist0 = float(norm_h(m, x - y))
        want = dist0 ** (2.0 / 3.0) / ((2.0 / 3.0) * (2.0 / 3.0) ** 0.25)
        assert s.c == pytest.approx(want, rel=1e-13)

    def test_hypothesis_integral_equality(self):
        # The calibration makes the attraction integral exactly
        # dist0^eps / eps.
        m = four_mode_model()
        x = np.array([0.4, 0.1, -0.3, 0.0])
        y = np.array([-0.1, 0.0, 0.2, 0.1])
        gam = PiecewiseConstant([0.0, 0.5], [-0.5, 1.0])
        c = CoefficientSet(r=0.5, delta=2.0, gamma=gam, xi=0.7)
        s = make_schedule(m, c, 1.0, x, y)
        want = s.dist0**s.epsilon / s.epsilon
        assert s.hypothesis_integral() == pytest.approx(want, rel=1e-10)

    def test_equal_starts_degenerate(self):
        m = four_mode_model()
        x = np.array([0.3, 0.0, 0.1, 0.0])
        s = make_schedule(m, CoefficientSet(r=0.5), 1.0, x, x)
        assert s.c == 0.0
        assert s.beta(0.3) == 0.0

    def test_zero_horizon_rejected(self):
        m = four_mode_model()
        with pytest.raises(ZeroHorizon):
            make_schedule(m, CoefficientSet(r=0.5), 0.0, np.ones(4), np.zeros(4))

    def test_beta_matches_gain_times_c(self):
        # beta(t) = c * gain(t) with the published decay split:
        # gain carries exp(-(1-eps) Gamma) through the same amplitude.
        m = four_mode_model()
        c = CoefficientSet(r=0.5, delta=3.0, gamma=-0.4, xi=0.5)
        s = make_schedule(m, c, 1.0, np.array([1.0, 0, 0, 0.0]), np.zeros(4))
        # coupling_gain = (delta xi)^{1/sigma} exp(-full Gamma); beta folds in
        # the extra eps^{1/sigma} and decays only by (1-eps) Gamma.
        t = 0.7
        full = coupling_gain(c, t)
        expect = (
            s.c * s.epsilon ** (1.0 / c.sigma) * full
            * math.exp(s.epsilon * c.gamma.integral(t))
        )
        assert s.beta(t) == pytest.approx(expect, rel=1e-12)

    def test_beta_sq_exp_integral_quadrature(self):
        m = four_mode_model()
        gam = PiecewiseConstant([0.0, 0.4], [0.8, -0.6])
        c = CoefficientSet(r=0.5, delta=1.5, gamma=gam, xi=0.9)
        s = make_schedule(m, c, 1.3, np.array([0.7, 0, 0, 0.0]), np.zeros(4))

        def integrand(t):
            return s.beta(t) ** 2 * math.exp(-2 * s.epsilon * gam.integral(t))

        num, _ = quad(integrand, 0.0, 1.3, points=[0.4], limit=200)
        assert s.beta_sq_exp_integral() == pytest.approx(num, rel=1e-9)


class TestDrifts:
    def test_coupling_drift_hand_value(self):
        m = build_model([1.0], [[-1.0]], [1.0])
        s = flat_schedule(eps=2.0 / 3.0, c=1.0)
        x, y = np.array([2.0]), np.array([0.0])
        # |x - y|_H = 2, drift = 2 / 2^{2/3} = 2^{1/3}
        got = coupling_drift(m, s, x, y, 0.0)
        assert got[0] == pytest.approx(2.0 ** (1.0 / 3.0), rel=1e-13)

    def test_coupling_drift_zero_at_equal(self):
        m = four_mode_model()
        s = flat_schedule(eps=0.5, c=2.0)
        x = np.array([0.1, 0.2, 0.3, 0.4])
        assert np.all(coupling_drift(m, s, x, x, 0.0) == 0.0)

    def test_zeta_zero_at_equal(self):
        m = four_mode_model()
        s = flat_schedule(eps=0.5, c=2.0)
        x = np.array([0.1, 0.2, 0.3, 0.4])
        assert np.all(zeta(m, s, x, x, 0.0) == 0.0)

    @given(
        dx=arrays(np.float64, 4, elements=st.floats(-3.0, 3.0)),
    )
    @settings(max_examples=200)
    def test_zeta_norm_identity(self, dx):
        # componentwise |zeta|^2 equals beta^2 |d|_Q^2 / |d|_H^{2 eps}
        m = four_mode_model()
        s = flat_schedule(eps=4.0 / 7.0, c=1.7)
        y = np.zeros(4)
        if float(norm_h(m, dx)) < 1e-8:
            return
        z = zeta(m, s, dx, y, 0.0)
        lhs = float((z * z).sum())
        rhs = (
            s.beta(0.0) ** 2
            * float(norm_q(m, dx)) ** 2
            / float(norm_h(m, dx)) ** (2 * s.epsilon)
        )
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_zeta_scales_inversely_with_q(self):
        m1 = four_mode_model()
        m2 = dirichlet1d_model(4, [2.0, 1.6, 1.2, 1.0])  # q doubled
        s = flat_schedule(eps=0.5, c=1.0)
        x, y = np.array([0.5, -0.2, 0.1, 0.0]), np.zeros(4)
        z1 = zeta(m1, s, x, y, 0.0)
        z2 = zeta(m2, s, x, y, 0.0)
        assert np.allclose(z2, 0.5 * z1, rtol=1e-12)


class TestFDiagnostic:
    def test_zero_states(self):
        m = four_mode_model()
        c = CoefficientSet(r=0.5)
        assert f_diagnostic(m, c, np.zeros(4), np.zeros(4)) == 0.0

    def test_hand_value(self):
        m = build_model([0.5, 0.5], [[-2.0, 1.0], [1.0, -2.0]], [1.0, 2.0])
        c = CoefficientSet(r=0.5, sigma=4.0)
        # m[(|x| v |y|)^{3/2}] = 1 for x = (1,1), y = 0; f = 1^{1/3} = 1
        assert f_diagnostic(m, c, np.array([1.0, 1.0]), np.zeros(2)) == pytest.approx(1.0)

    @given(
        x=arrays(np.float64, 4, elements=st.floats(-5.0, 5.0)),
        y=arrays(np.float64, 4, elements=st.floats(-5.0, 5.0)),
        sigma=st.sampled_from([8.0 / 3.0, 3.0, 4.0]),
    )
    @settings(max_examples=200)
    def test_envelope_inequality(self, x, y, sigma):
        # f^{2/(sigma-2)} <= m(1 + |x|^{r+1} v |y|^{r+1}) whenever
        # sigma >= 4 / (1 + r)
        m = four_mode_model()
        c = CoefficientSet(r=0.5, sigma=sigma)
        f = f_diagnostic(m, c, x, y)
        lhs = f ** (2.0 / (sigma - 2.0))
        env = np.maximum(np.abs(x), np.abs(y)) ** 1.5
        rhs = float((m.space.weights * (1.0 + env)).sum())
        assert lhs <= rhs + 1e-12


class TestPairState:
    def test_equal_starts_already_coupled(self):
        m = four_mode_model()
        x = np.array([0.1, 0.2, 0.0, 0.0])
        st_ = make_pair_state(m, x, x)
        assert st_.coupled and st_.tau == 0.0

    def test_default_tolerance(self):
        m = four_mode_model()
        x, y = np.array([0.5, 0, 0, 0.0]), np.zeros(4)
        st_ = make_pair_state(m, x, y)
        assert st_.couple_tol == pytest.approx(1e-6 * float(norm_h(m, x - y)), rel=1e-12)

    def test_bad_tolerance_rejected(self):
        m = four_mode_model()
        with pytest.raises(ValueError):
            make_pair_state(m, np.ones(4), np.zeros(4), couple_tol=0.0)


class TestStepPair:
    def test_identical_starts_stay_identical(self):
        m = four_mode_model()
        c = CoefficientSet(r=0.5, gamma=-0.2)
        x = np.array([0.3, -0.1, 0.2, 0.0])
        sched = make_schedule(m, c, 1.0, x, x)
        state = make_pair_state(m, x, x)
        rng = PathRNG(0, 0, 4)
        cfg = StepConfig(dt=1e-3)
        for _ in range(50):
            step_pair(m, c, sched, cfg, state, rng)
        assert np.array_equal(state.x, state.y)
        assert state.log_stoch_int == 0.0
        assert state.zeta_sq_int == 0.0

    def test_forced_identity_after_coupling(self):
        m = four_mode_model()
        c = CoefficientSet(r=0.5)
        x = np.array([0.2, 0.0, 0.0, 0.0])
        y = np.array([0.19999, 0.0, 0.0, 0.0])
        sched = make_schedule(m, c, 1.0, x, y)
        state = make_pair_state(m, x, y, couple_tol=1.0)  # tol larger than gap
        rng = PathRNG(1, 0, 4)
        step_pair(m, c, sched, StepConfig(dt=1e-3), state, rng)
        assert state.coupled and state.tau == 0.0
        assert np.array_equal(state.x, state.y)

    def test_girsanov_weight_formula(self):
        m = four_mode_model()
        c = CoefficientSet(r=0.5)
        x, y = np.array([0.4, 0.1, 0.0, 0.0]), np.zeros(4)
        sched = make_schedule(m, c, 1.0, x, y)
        state = make_pair_state(m, x, y)
        rng = PathRNG(2, 0, 4)
        for _ in range(20):
            step_pair(m, c, sched, StepConfig(dt=1e-3), state, rng)
        want = math.exp(-state.log_stoch_int - 0.5 * state.zeta_sq_int)
        assert girsanov_weight(state) == pytest.approx(want, rel=1e-15)
        assert girsanov_weight(state) > 0.0

    def test_zeta_sq_accumulator_nondecreasing(self):
        m = four_mode_model()
        c = CoefficientSet(r=0.5)
        x, y = np.array([0.4, 0.1, 0.0, 0.0]), np.zeros(4)
        sched = make_schedule(m, c, 1.0, x, y)
        state = make_pair_state(m, x, y)
        rng = PathRNG(3, 0, 4)
        prev = 0.0
        for _ in range(100):
            step_pair(m, c, sched, StepConfig(dt=1e-3), state, rng)
            assert state.zeta_sq_int >= prev
            prev = state.zeta_sq_int


class TestContraction:
    def test_discrete_contraction_without_attraction(self):
        # beta = 0 and shared noise: exp(-2 gamma t) |X - Y|_H^2 cannot
        # increase along the discrete path (modulo a tiny step tolerance).
        m = four_mode_model()
        gamma = -0.5
        c = CoefficientSet(r=0.5, gamma=gamma)
        x = np.array([0.5, -0.2, 0.1, 0.3])
        y = np.array([-0.1, 0.1, 0.0, -0.2])
        sched = CouplingSchedule(
            epsilon=0.5, c=0.0, T=1.0, dist0=float(norm_h(m, x - y)),
            amp=PiecewiseConstant.constant(1.0),
            gamma=PiecewiseConstant.constant(gamma),
        )
        state = make_pair_state(m, x, y, couple_tol=1e-300)
        rng = PathRNG(5, 0, 4)
        dt = 1e-3
        prev = float(norm_h(m, x - y)) ** 2
        for k in range(300):
            step_pair(m, c, sched, StepConfig(dt=dt), state, rng)
            cur = math.exp(-2 * gamma * state.t) * float(norm_h(m, state.x - state.y)) ** 2
            assert cur <= prev * (1.0 + 1e-6)
            prev = cur

    def test_endpoint_contraction_bound(self):
        # |X_t - Y_t|_H^2 <= e^{2 gamma t} |x - y|_H^2 (1 + 1e-3)
        m = four_mode_model()
        gamma = -0.3
        c = CoefficientSet(r=0.5, gamma=gamma)
        x = np.array([0.5, -0.2, 0.1, 0.3])
        y = np.array([-0.1, 0.1, 0.0, -0.2])
        sched = CouplingSchedule(
            epsilon=0.5, c=0.0, T=1.0, dist0=float(norm_h(m, x - y)),
            amp=PiecewiseConstant.constant(1.0),
            gamma=PiecewiseConstant.constant(gamma),
        )
        state = make_pair_state(m, x, y, couple_tol=1e-300)
        rng = PathRNG(6, 0, 4)
        n_steps = 500
        for _ in range(n_steps):
            step_pair(m, c, sched, StepConfig(dt=1e-3), state, rng)
        lhs = float(norm_h(m, state.x - state.y)) ** 2
        rhs = math.exp(2 * gamma * state.t) * float(norm_h(m, x - y)) ** 2
        assert lhs <= rhs * (1.0 + 1e-3)


class TestRunPair:
    def test_record_count_and_columns(self):
        m = four_mode_model()
        c = CoefficientSet(r=0.5)
        x, y = np.array([0.4, 0.1, 0.0, 0.0]), np.zeros(4)
        sched = make_schedule(m, c, 0.1, x, y)
        cfg = StepConfig(dt=1e-3, rng_seed=4, path_index=0)
        state, recs = run_pair(m, c, sched, cfg, x, y, 100, record_every=1)
        assert len(recs) == 100
        state2, recs2 = run_pair(m, c, sched, cfg, x, y, 100, record_every=25)
        assert len(recs2) == 4
        assert np.array_equal(state.x, state2.x)

    def test_records_mirror_state(self):
        m = four_mode_model()
        c = CoefficientSet(r=0.5)
        x, y = np.array([0.4, 0.1, 0.0, 0.0]), np.zeros(4)
        sched = make_schedule(m, c, 0.05, x, y)
        cfg = StepConfig(dt=1e-3, rng_seed=4, path_index=3)
        state, recs = run_pair(m, c, sched, cfg, x, y, 50, record_every=1)
        t_last, dist_last, beta_last, _ = recs[-1]
        assert t_last == pytest.approx(state.t, rel=1e-12)
        assert dist_last == pytest.approx(float(norm_h(m, state.x - state.y)), rel=1e-12)
        assert beta_last == pytest.approx(sched.beta(sched.T), rel=1e-9)


class TestHolderChain:
    def test_pathwise_chain_with_safe_xi(self):
        # xi is set to half the empirical noise-domination constant, so the
        # continuous-time inequality has headroom and the discrete sums obey
        # the chained bound on every path.
        from fastdiffusion import check_noise_domination

        m = four_mode_model()
        probe = CoefficientSet(r=0.5)
        xi_hat = check_noise_domination(m, probe, n_samples=4000, seed=0).xi_estimate
        c = CoefficientSet(r=0.5, xi=0.5 * xi_hat)
        x = np.array([0.4, 0.1, -0.1, 0.0])
        y = np.array([-0.2, 0.05, 0.1, 0.0])
        T, dt = 0.25, 1e-3
        sched = make_schedule(m, c, T, x, y)
        target = (sched.c**c.sigma * sched.dist0 ** (2 * sched.epsilon)) ** (2.0 / c.sigma)
        for j in range(20):
            cfg = StepConfig(dt=dt, rng_seed=17, path_index=j)
            state, _ = run_pair(m, c, sched, cfg, x, y, int(T / dt))
            bound = state.f_int ** ((c.sigma - 2.0) / c.sigma) * target
            assert state.zeta_sq_int <= bound * (1.0 + 1e-6)
