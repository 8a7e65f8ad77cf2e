import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from expfunctional.activation import (
    ActivationError,
    Additive,
    BaseDomainError,
    ControlParams,
    DegenerateBaseError,
    Identity,
    Power,
    PowerLawParams,
    Reciprocal,
    Scheduled,
    SingularityError,
    Sqrt,
    conjugate_g,
    control_u,
    f2_derivative,
    f2_eval,
    make_spec,
    power_control,
    sign,
    validate,
)

bases = st.sampled_from([0.3, 0.5, 1.5, 2.0, 3.0])
surfaces = st.floats(min_value=0.01, max_value=4.0)
specs = st.sampled_from([Identity(), Sqrt(), Reciprocal(), Power(0.7), Power(-0.5), Power(2.0), Scheduled()])


class TestControlParams:
    def test_c2(self):
        p = validate(2.0)
        assert p.C1 == 1 / math.log(2)

    def test_unit_base(self):
        with pytest.raises(DegenerateBaseError):
            ControlParams(1.0)

    @pytest.mark.parametrize("C", [-2.0, 0.0, math.inf, math.nan])
    def test_invalid(self, C):
        with pytest.raises(BaseDomainError):
            ControlParams(C)

    def test_log_c(self):
        assert ControlParams(0.5).log_c == math.log(0.5)


class TestF2:
    def test_sqrt(self):
        assert f2_eval(Sqrt(), 4) == 2

    def test_power_is_even(self):
        assert f2_eval(Power(2), -3) == 9

    def test_additive_weighted_sum(self):
        spec = Additive(((1, Sqrt()), (2, Identity())))
        assert f2_eval(spec, 4) == 10

    def test_identity_derivative(self):
        assert f2_derivative(Identity(), -1) == -1

    def test_sqrt_derivative(self):
        assert f2_derivative(Sqrt(), 4) == 0.25

    def test_power_derivative_vs_difference(self):
        h = 1e-6
        fd = (f2_eval(Power(0.7), 1.3 + h) - f2_eval(Power(0.7), 1.3 - h)) / (2 * h)
        assert f2_derivative(Power(0.7), 1.3) == pytest.approx(fd, rel=1e-6)

    def test_derivative_at_origin(self):
        with pytest.raises(SingularityError):
            f2_derivative(Identity(), 0.0)

    def test_reciprocal_singular(self):
        with pytest.raises(SingularityError):
            f2_eval(Reciprocal(), 0.0)

    def test_zero_power_rejected(self):
        with pytest.raises(ActivationError):
            Power(0.0)

    def test_nested_additive_rejected(self):
        inner = Additive(((1, Identity()),))
        with pytest.raises(ActivationError):
            Additive(((1, inner),))

    @given(specs, surfaces)
    def test_evenness(self, spec, s):
        assert f2_eval(spec, -s) == f2_eval(spec, s)

    @given(specs, st.floats(min_value=0.05, max_value=3.0))
    def test_derivative_vs_difference(self, spec, s):
        if isinstance(spec, Scheduled):
            # the schedule has slope kinks at its knots
            assume(all(abs(s - k) > 1e-3 for k in spec.knots))
        h = 1e-6 * s
        fd = (spec.value(s + h) - spec.value(s - h)) / (2 * h)
        assert f2_derivative(spec, s) == pytest.approx(fd, rel=1e-5, abs=1e-8)
        assert f2_derivative(spec, -s) == -f2_derivative(spec, s)

    def test_unbounded_flags(self):
        assert Reciprocal().unbounded_at_origin()
        assert Power(-0.5).unbounded_at_origin()
        assert not Power(0.5).unbounded_at_origin()
        assert Additive(((1, Reciprocal()), (1, Identity()))).unbounded_at_origin()


class TestScheduled:
    def test_interpolates_alpha(self):
        sch = Scheduled()
        assert sch.alpha_of(0.1) == pytest.approx(0.7)
        assert sch.alpha_of(5.0) == 0.1

    def test_power_law_odd(self):
        sch = Scheduled()
        assert sch.power_law(-0.5) == -sch.power_law(0.5)
        assert sch.power_law(0.0) == 0

    @pytest.mark.parametrize("kwargs", [{"knots": (0, 1), "alphas": (0.5,)}, {"knots": (1, 0), "alphas": (0.5, 0.5)}, {"alphas": (0.9, 0.5, 1.5)}])
    def test_validation(self, kwargs):
        with pytest.raises(ActivationError):
            Scheduled(**kwargs)


class TestControl:
    def test_identity_c2(self):
        assert control_u(ControlParams(2), Identity(), 1.0) == -2

    def test_zero_surface(self):
        assert control_u(ControlParams(2), Reciprocal(), 0.0) == 0

    def test_sqrt_c2(self):
        assert control_u(ControlParams(2), Sqrt(), 4.0) == -4

    def test_clamp(self):
        assert control_u(ControlParams(2), Reciprocal(), 1e-3, u_max=1e6) == -1e6

    def test_unclamped_overflow_is_infinite(self):
        assert control_u(ControlParams(2), Reciprocal(), 1e-4, u_max=math.inf) == -math.inf

    @given(bases, specs, surfaces)
    def test_odd_and_opposes_surface(self, C, spec, s):
        p = ControlParams(C)
        u = control_u(p, spec, s)
        assert u < 0
        assert control_u(p, spec, -s) == -u

    @given(bases, specs, surfaces)
    def test_magnitude_is_power_of_base(self, C, spec, s):
        p = ControlParams(C)
        u = control_u(p, spec, s, u_max=math.inf)
        assert abs(u) == pytest.approx(C ** spec.value(s), rel=1e-14)

    @given(bases, st.floats(min_value=0.05, max_value=3.0), st.floats(min_value=0.05, max_value=3.0))
    def test_identity_magnitude_monotone(self, C, a, b):
        p = ControlParams(C)
        a, b = sorted((a, b))
        ua, ub = abs(control_u(p, Identity(), a)), abs(control_u(p, Identity(), b))
        assert (ua <= ub) if C > 1 else (ua >= ub)


class TestPowerControl:
    def test_sqrt(self):
        assert power_control(PowerLawParams(0.5), 0.25) == -0.5

    def test_relay(self):
        assert power_control(PowerLawParams(0.0), -7) == 1

    def test_linear(self):
        assert power_control(PowerLawParams(1.0), 2) == -2

    @pytest.mark.parametrize("alpha", [-0.1, 1.1])
    def test_alpha_range(self, alpha):
        with pytest.raises(ActivationError):
            PowerLawParams(alpha)


class TestConjugate:
    def test_unit(self):
        assert conjugate_g(ControlParams(2), 1) == 0

    def test_minus_two(self):
        assert conjugate_g(ControlParams(2), -2) == pytest.approx(-1, rel=1e-15)

    def test_zero(self):
        with pytest.raises(SingularityError):
            conjugate_g(ControlParams(2), 0)

    @given(bases, specs, surfaces)
    def test_inverts_activation(self, C, spec, s):
        # g(|U|) recovers f2 for the unclamped law
        p = ControlParams(C)
        u = control_u(p, spec, s, u_max=math.inf)
        if 0 < abs(u) < math.inf:
            assert conjugate_g(p, -u) == pytest.approx(spec.value(s), rel=1e-9, abs=1e-12)


class TestMakeSpec:
    def test_cases(self):
        assert make_spec("identity") == Identity()
        assert make_spec("power", alpha=0.3) == Power(0.3)
        assert make_spec("additive", weights=(1, 2)).weights == (1.0, 2.0)
        assert isinstance(make_spec("scheduled"), Scheduled)

    def test_power_requires_alpha(self):
        with pytest.raises(ActivationError):
            make_spec("power")

    def test_unknown(self):
        with pytest.raises(ActivationError):
            make_spec("cubic")

    def test_too_many_weights(self):
        with pytest.raises(ActivationError):
            make_spec("additive", weights=(1, 2, 3))


def test_sign_zero():
    assert sign(0.0) == 0 and sign(-0.0) == 0 and sign(3) == 1 and sign(-2) == -1
