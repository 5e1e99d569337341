import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_pair
from structacoustics.dynamics import (
    CFLError,
    EnergyLedger,
    InstabilityError,
    Integrator,
    State,
    dissipation_D,
    energy_identity_residual,
    simulate,
    solve_damping_scalar,
    step,
)
from structacoustics.geometry import build_geometry
from structacoustics.nonlinearity import DampingProfile, ModelParams, eval_f, eval_h

NO_DAMPING = DampingProfile(1.0, 1.0, 0.0)
FREE = ModelParams(damping_u=NO_DAMPING, damping_w=NO_DAMPING, source_scale_f=0.0, source_scale_h=0.0)


def state_from(geom, u, w, v=None, z=None):
    v = np.zeros_like(u) if v is None else v
    z = np.zeros_like(w) if z is None else z
    return State(0.0, geom.extend_u(u), geom.extend_u(v), geom.extend_w(w), geom.extend_w(z))


def quad_energy(geom, u, v, w, z):
    return 0.5 * (v @ (geom.weights_u * v) + z @ (geom.weights_w * z)
                  + u @ (geom.stiffness_u @ u) + w @ (geom.stiffness_w @ w))


class TestDampingSolve:
    def test_examples(self):
        assert solve_damping_scalar(3.0, 0.5, DampingProfile()) == pytest.approx(2.0)
        assert solve_damping_scalar(2.0, 1.0, DampingProfile(3.0, 3.0)) == pytest.approx(1.0, abs=1e-12)
        assert solve_damping_scalar(0.0, 0.7, DampingProfile(0.5, 2.0)) == 0.0

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            solve_damping_scalar(1.0, 0.0, DampingProfile())

    @given(st.floats(-50, 50), st.floats(1e-6, 10.0), st.floats(0.2, 5.0), st.floats(1.0, 5.0), st.floats(0.1, 5.0))
    def test_residual(self, a, lam, near, far, coeff):
        prof = DampingProfile(near, far, coeff)
        v = solve_damping_scalar(a, lam, prof)
        assert abs(v + lam * prof(v) - a) <= 1e-12 * (1 + abs(a))
        assert min(0.0, a) <= v <= max(0.0, a)


def linear_oracle_matrix(geom, cu, cw):
    """First-order generator of the linear semi-discrete system in (u, v, w, z)."""
    nu, nw = geom.n_u, geom.n_w
    E = np.zeros((nu, nw))
    E[geom.gamma_to_u, np.arange(nw)] = 1.0
    L = geom.lap.toarray()
    Bh = geom.bih.toarray()
    A = np.zeros((2 * nu + 2 * nw,) * 2)
    iu, iv = slice(0, nu), slice(nu, 2 * nu)
    iw, iz = slice(2 * nu, 2 * nu + nw), slice(2 * nu + nw, None)
    A[iu, iv] = np.eye(nu)
    A[iv, iu] = L
    A[iv, iv] = -cu * np.eye(nu)
    A[iv, iz] = geom.coupling * E
    A[iw, iz] = np.eye(nw)
    A[iz, iw] = -Bh
    A[iz, iv] = -E.T
    A[iz, iz] = -cw * np.eye(nw)
    return A


class TestStep:
    def test_zero_state_fixed_point(self, geom12, cubic_params):
        s = step(State.zeros(geom12), cubic_params, geom12, geom12.default_dt())
        assert not (s.u.any() or s.v.any() or s.w.any() or s.z.any())

    def test_cfl_rejected(self, geom12, linear_params):
        with pytest.raises(CFLError):
            step(State.zeros(geom12), linear_params, geom12, 2 * geom12.cfl_limit())

    def test_boundary_conditions_kept(self, geom12, cubic_params, rng):
        u, w = smooth_pair(geom12, rng)
        s = state_from(geom12, u, w)
        for _ in range(5):
            s = step(s, cubic_params, geom12, geom12.default_dt())
        assert not s.u[-1].any() and not s.u[:, 0].any() and not s.u[:, -1].any()
        assert s.w[0] == 0 and s.w[-1] == 0

    def test_linear_modal_oracle(self, rng):
        g = build_geometry("reduced-2D", 8)
        params = ModelParams(source_scale_f=0.0, source_scale_h=0.0)
        u, w = smooth_pair(g, rng)
        A = linear_oracle_matrix(g, 1.0, 1.0)
        T = 1.0
        y = sla.expm(A * T) @ np.concatenate([u, np.zeros_like(u), w, np.zeros_like(w)])
        nu, nw = g.n_u, g.n_w
        exact = quad_energy(g, y[:nu], y[nu:2 * nu], y[2 * nu:2 * nu + nw], y[2 * nu + nw:])
        errs = []
        for k in (1, 2, 4):
            N = int(np.ceil(T / g.default_dt())) * k
            _, led = simulate(state_from(g, u, w), params, g, T, dt=T / N, stride=N)
            errs.append(abs(led.E[-1] - exact) / exact)
        assert errs[0] < 1e-2
        assert 3.0 < errs[0] / errs[1] < 5.0
        assert 3.0 < errs[1] / errs[2] < 5.0

    def test_source_power_one_step(self, geom12, rng):
        # undamped with sources: E(dt) - E(0) matches the trapezoid of the source power to O(dt^3)
        params = ModelParams(p=3.0, q=3.0, damping_u=NO_DAMPING, damping_w=NO_DAMPING)
        u, w = smooth_pair(geom12, rng, amp=2.0)
        v, z = smooth_pair(geom12, np.random.default_rng(9), amp=3.0)
        s0 = state_from(geom12, u, w, v, z)

        def defect(dt):
            s1 = step(s0, params, geom12, dt)
            vec = [geom12.restrict_u(s1.u), geom12.restrict_u(s1.v), geom12.restrict_w(s1.w), geom12.restrict_w(s1.z)]

            def power(uu, vv, ww, zz):
                return (np.sum(geom12.weights_u * eval_f(uu, params) * vv)
                        + np.sum(geom12.weights_w * eval_h(ww, params) * zz))

            dE = quad_energy(geom12, *vec) - quad_energy(geom12, u, v, w, z)
            return abs(dE - 0.5 * dt * (power(u, v, w, z) + power(*vec)))

        dt = geom12.default_dt()
        d1, d2 = defect(dt), defect(dt / 2)
        # at least third order per step
        assert d1 / d2 > 6.0


class TestSimulate:
    def test_zero_data(self, geom12, cubic_params):
        _, led = simulate(State.zeros(geom12), cubic_params, geom12, 0.05)
        assert not any(led.calE) and not any(led.D) and not any(led.residual)

    def test_conservative_limit(self, geom12, rng):
        u, w = smooth_pair(geom12, rng)
        drift = []
        for k in (1, 2):
            N = int(np.ceil(1.0 / geom12.default_dt())) * k
            _, led = simulate(state_from(geom12, u, w), FREE, geom12, 1.0, dt=1.0 / N, stride=max(1, N // 50))
            E = np.asarray(led.E)
            drift.append(np.max(np.abs(E - E[0])) / E[0])
        assert drift[0] < 1e-3
        assert 3.0 < drift[0] / drift[1] < 5.0

    def test_residual_ratio_undamped_mode(self, geom12, rng):
        u, w = smooth_pair(geom12, rng)
        res = []
        for k in (1, 2):
            N = int(np.ceil(1.0 / geom12.default_dt())) * k
            _, led = simulate(state_from(geom12, u, w), FREE, geom12, 1.0, dt=1.0 / N, stride=max(1, N // 50))
            res.append(np.max(np.abs(led.residual)))
        assert 1.8 <= res[0] / res[1] <= 4.2

    def test_ledger_invariants(self, geom12, cubic_params, rng):
        u, w = smooth_pair(geom12, rng, amp=0.5)
        _, led = simulate(state_from(geom12, u, w), cubic_params, geom12, 1.0)
        D = np.asarray(led.D)
        calE = np.asarray(led.calE)
        assert D[0] == 0 and np.all(np.diff(D) >= 0)
        assert np.all(np.diff(led.t) > 0)
        assert np.all(np.diff(calE) <= 1e-3 * calE[0])
        assert np.max(np.abs(led.residual)) <= 1e-3
        assert energy_identity_residual(led, len(led) - 1) == led.residual[-1]

    def test_deterministic(self, geom12, cubic_params, rng):
        u, w = smooth_pair(geom12, rng, amp=0.5)
        _, a = simulate(state_from(geom12, u, w), cubic_params, geom12, 0.3)
        _, b = simulate(state_from(geom12, u, w), cubic_params, geom12, 0.3)
        assert a.calE == b.calE and a.D == b.D and a.E == b.E

    def test_snapshots(self, geom12, linear_params, rng):
        u, w = smooth_pair(geom12, rng)
        snaps, led = simulate(state_from(geom12, u, w), linear_params, geom12, 0.2, stride=50, snapshot_every=2)
        assert snaps[0].t == 0.0 and snaps[-1].t == pytest.approx(led.t[-1])
        assert len(snaps) > 2

    def test_blow_up_aborts(self, geom12, rng):
        params = ModelParams(p=3.0, q=3.0, damping_u=NO_DAMPING, damping_w=NO_DAMPING)
        u, w = smooth_pair(geom12, rng, amp=30.0)
        with pytest.raises(InstabilityError) as info:
            simulate(state_from(geom12, u, w), params, geom12, 5.0, stride=10)
        assert info.value.last_good_time >= 0.0
        assert info.value.ledger is not None


class TestDissipation:
    def test_zero(self, geom12):
        assert not dissipation_D([State.zeros(geom12, t) for t in (0, 1, 2)], ModelParams(), geom12).any()

    def test_linear_reduction(self, geom12):
        states = []
        for t in np.linspace(0, 1, 5):
            s = State.zeros(geom12, t)
            s.v = geom12.extend_u(np.full(geom12.n_u, 2.0))
            s.z = geom12.extend_w(np.full(geom12.n_w, 1.0))
            states.append(s)
        D = dissipation_D(states, ModelParams(), geom12)
        rate = 4.0 * geom12.weights_u.sum() + geom12.weights_w.sum()
        np.testing.assert_allclose(D, rate * np.linspace(0, 1, 5), rtol=1e-13)

    def test_matches_ledger(self, geom12, cubic_params, rng):
        u, w = smooth_pair(geom12, rng, amp=0.5)
        integ = Integrator(state_from(geom12, u, w), cubic_params, geom12)
        states = [integ.state()]
        for _ in range(40):
            integ.advance(1)
            states.append(integ.state())
        D = dissipation_D(states, cubic_params, geom12)
        assert D[-1] == pytest.approx(integ.D, rel=1e-10)


def test_residual_of_empty_trajectory():
    led = EnergyLedger()
    led.append(0.0, 0.0, 0.0, 0.0, 0.0)
    assert energy_identity_residual(led, 0) == 0.0
