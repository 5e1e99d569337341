import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from structacoustics.nonlinearity import (
    DampingProfile,
    ModelParams,
    ParameterError,
    eval_F,
    eval_f,
    eval_g,
    eval_H,
    eval_h,
    validate_params,
)

EPS = np.finfo(float).eps


def params_with(p=2.0, q=2.0, m=1.0, r=1.0, near_u=1.0, near_w=1.0):
    return ModelParams(p=p, q=q, damping_u=DampingProfile(near_u, m, 1.0),
                       damping_w=DampingProfile(near_w, r, 1.0))


class TestSources:
    def test_f_examples(self):
        assert eval_f(0.0, params_with()) == 0.0
        assert eval_f(3.0, params_with(p=2)) == 9.0
        assert eval_f(-2.0, params_with(p=3)) == -8.0

    def test_F_examples(self):
        assert eval_F(0.0, params_with()) == 0.0
        P2, P3 = params_with(p=2), params_with(p=3)
        assert eval_F(3.0, P2) == pytest.approx(9.0, rel=1e-15)
        assert 3.0 * eval_f(3.0, P2) == pytest.approx(3 * eval_F(3.0, P2), rel=1e-15)
        assert eval_F(2.0, P3) == pytest.approx(4.0, rel=1e-15)
        assert 2.0 * eval_f(2.0, P3) == pytest.approx(4 * eval_F(2.0, P3), rel=1e-15)

    def test_h_and_H_use_q(self):
        P = params_with(p=2, q=4)
        assert eval_h(2.0, P) == 16.0
        assert eval_H(1.0, P) == pytest.approx(0.2)

    @given(st.floats(-10, 10), st.floats(1.01, 5.0), st.floats(0.0, 3.0))
    def test_euler_identity(self, u, p, scale):
        P = ModelParams(p=p, source_scale_f=scale)
        lhs = u * eval_f(u, P)
        rhs = (p + 1) * eval_F(u, P)
        assert abs(lhs - rhs) <= 8 * EPS * max(abs(lhs), 1e-300)

    @given(st.floats(-10, 10), st.floats(1.01, 5.0))
    def test_growth_bound_is_tight(self, u, p):
        P = ModelParams(p=p)
        assert abs(eval_f(u, P)) == pytest.approx((p + 1) * P.M_f * abs(u) ** p, rel=1e-13, abs=1e-300)

    def test_vectorised(self):
        u = np.linspace(-2, 2, 7)
        np.testing.assert_allclose(eval_f(u, params_with(p=3)), u**3)


class TestDamping:
    def test_examples(self):
        assert eval_g(0.0, DampingProfile(3.0, 3.0)) == 0.0
        assert eval_g(0.5, DampingProfile(3.0, 3.0, 1.0)) == pytest.approx(0.125)
        assert eval_g(2.0, DampingProfile(3.0, 3.0, 1.0)) == pytest.approx(8.0)

    @given(st.floats(0.2, 4.0), st.floats(1.0, 5.0), st.floats(0.1, 5.0),
           st.floats(-10, 10), st.floats(-10, 10))
    def test_monotone_odd(self, near, far, coeff, s1, s2):
        prof = DampingProfile(near, far, coeff)
        lo, hi = min(s1, s2), max(s1, s2)
        assert prof(lo) <= prof(hi)
        assert prof(s1) * s1 >= 0.0
        assert prof(-s1) == -prof(s1)

    @given(st.floats(0.2, 4.0), st.floats(1.0, 5.0), st.floats(0.1, 5.0))
    def test_far_field_bounds(self, near, far, coeff):
        prof = DampingProfile(near, far, coeff)
        s = np.linspace(1.0, 10.0, 200)
        gs = eval_g(s, prof) * s
        assert np.all(prof.alpha * s ** (far + 1) <= gs * (1 + 1e-14))
        assert np.all(gs <= prof.beta * s ** (far + 1) * (1 + 1e-14))

    @given(st.floats(0.2, 4.0), st.floats(1.0, 5.0), st.floats(0.1, 5.0))
    def test_near_origin_bounds(self, near, far, coeff):
        prof = DampingProfile(near, far, coeff)
        c_lo, c_hi = prof.near_bounds
        s = np.linspace(-0.999, 0.999, 301)
        g = np.abs(eval_g(s, prof))
        assert np.all(c_lo * np.abs(s) ** near <= g * (1 + 1e-14) + 1e-300)
        assert np.all(g <= c_hi * np.abs(s) ** near * (1 + 1e-14) + 1e-300)

    @given(st.floats(0.2, 4.0), st.floats(1.0, 5.0), st.floats(0.1, 5.0))
    def test_continuous_at_one(self, near, far, coeff):
        prof = DampingProfile(near, far, coeff)
        left = prof(np.nextafter(1.0, 0.0))
        right = prof(1.0)
        assert abs(left - right) <= 16 * EPS * coeff * max(near, far)


class TestValidate:
    def test_gate_accepts(self):
        assert validate_params(params_with(p=3, m=3)).ok

    def test_gate_boundary_rejects(self):
        rep = validate_params(params_with(p=3, m=1))
        assert not rep.ok
        assert any("p(m+1)/m<6" in e for e in rep.errors)
        with pytest.raises(ParameterError, match=r"p\(m\+1\)/m<6"):
            rep.raise_if_invalid()

    def test_linear_case_clean(self):
        rep = validate_params(params_with(p=2, m=1, q=2, r=1))
        assert rep.ok and rep.warnings == []

    @pytest.mark.parametrize("p", [1.0, 0.5, 5.5])
    def test_p_range(self, p):
        assert not validate_params(params_with(p=p, m=5)).ok

    def test_p_five_only_for_existence(self):
        P = params_with(p=5, m=100)
        assert validate_params(P).ok
        assert not validate_params(P, for_decay=True).ok

    def test_q_must_exceed_one(self):
        assert not validate_params(params_with(q=1.0)).ok

    @pytest.mark.parametrize("prof", [DampingProfile(1.0, 1.0, 0.0), DampingProfile(0.0, 1.0, 1.0),
                                      DampingProfile(1.0, 0.5, 1.0), DampingProfile(np.nan, 1.0, 1.0)])
    def test_bad_damping(self, prof):
        assert not validate_params(ModelParams(damping_u=prof)).ok

    def test_negative_source_scale(self):
        assert not validate_params(ModelParams(source_scale_h=-1.0)).ok

    def test_uniqueness_warning_only(self):
        rep = validate_params(params_with(p=4, m=3))
        assert rep.ok
        assert any("uniqueness" in w for w in rep.warnings)

    def test_large_m_warning(self):
        rep = validate_params(params_with(p=2, m=6))
        assert rep.ok and any("m > 5" in w for w in rep.warnings)


class TestModelParams:
    def test_constants(self):
        P = ModelParams(p=3.0, q=2.0, source_scale_f=2.0)
        assert P.M_f == pytest.approx(0.5)
        assert P.M_h == pytest.approx(1 / 3)
        assert P.c == 3.0

    def test_round_trip(self):
        P = params_with(p=3, q=2.5, m=3, r=2, near_u=0.5)
        assert ModelParams.from_dict(P.to_dict()) == P
