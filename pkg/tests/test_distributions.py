"""Distribution-layer tests: closed forms against independent quadrature oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from driftbound import (
    ExponentialShift,
    InvalidParameter,
    MomentDoesNotExist,
    NonNegativeDrift,
    Normal,
    ParetoShift,
    TwoPoint,
    integrated_tail,
    mgf,
    mgf_truncated,
    moment_profile,
    spec_from_json,
    spec_to_json,
    tail,
    truncated_moments,
    validate_spec,
)

TP = TwoPoint(0.25, 1.0, 1.0)
PS = ParetoShift(3.0, 1.0, 2.0)
ES = ExponentialShift(1.0, 2.0)
NM = Normal(-1.0, 1.0)
ALL_SPECS = [TP, PS, ES, NM]


def pareto_density(spec):
    return lambda v: spec.r * spec.scale**spec.r * v ** (-spec.r - 1.0)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_validate_drift_values():
    assert validate_spec(TP) == pytest.approx(0.5, abs=0)
    assert validate_spec(PS) == pytest.approx(0.5, rel=1e-14)
    assert validate_spec(ES) == pytest.approx(1.0, rel=1e-14)
    assert validate_spec(NM) == pytest.approx(1.0, abs=0)


def test_validate_rejects_zero_mean():
    with pytest.raises(NonNegativeDrift):
        validate_spec(TwoPoint(0.5, 1.0, 1.0))
    with pytest.raises(NonNegativeDrift):
        validate_spec(ParetoShift(3.0, 1.0, 1.0))


@pytest.mark.parametrize(
    "bad",
    [
        lambda: TwoPoint(0.0, 1.0, 1.0),
        lambda: TwoPoint(1.0, 1.0, 1.0),
        lambda: TwoPoint(0.25, -1.0, 1.0),
        lambda: ParetoShift(1.0, 1.0, 5.0),
        lambda: ParetoShift(3.0, 0.0, 5.0),
        lambda: ExponentialShift(0.0, 1.0),
        lambda: Normal(-1.0, 0.0),
    ],
)
def test_parameter_range_rejected(bad):
    with pytest.raises(InvalidParameter):
        bad()


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def test_two_point_profile_t2():
    mp = moment_profile(TP, 2.0)
    assert mp.a == 0.5
    assert mp.a_t == 1.0
    assert mp.a_t_plus == 0.25
    assert mp.a_t_minus == 0.75
    assert mp.var == pytest.approx(0.75, rel=1e-15)


def test_normal_profile_t2():
    mp = moment_profile(NM, 2.0)
    assert mp.a == 1.0
    assert mp.a_t == pytest.approx(2.0, rel=1e-10)  # mu^2 + sigma^2
    assert mp.var == 1.0


def test_pareto_plus_moment_vs_quadrature():
    # independent oracle: direct quadrature of (u - 2)^2 against the density
    f = pareto_density(PS)
    expected, _ = integrate.quad(lambda v: (v - 2.0) ** 2 * f(v), 2.0, np.inf)
    assert expected == pytest.approx(0.5, rel=1e-9)
    assert moment_profile(PS, 2.0).a_t_plus == pytest.approx(expected, rel=1e-10)


def test_pareto_noninteger_moment_vs_quadrature():
    f = pareto_density(PS)
    t = 2.5
    plus, _ = integrate.quad(lambda v: (v - 2.0) ** t * f(v), 2.0, np.inf)
    minus, _ = integrate.quad(lambda v: (2.0 - v) ** t * f(v), 1.0, 2.0)
    mp = moment_profile(PS, t)
    assert mp.a_t_plus == pytest.approx(plus, rel=1e-9)
    assert mp.a_t_minus == pytest.approx(minus, rel=1e-9)
    assert mp.a_t == pytest.approx(plus + minus, rel=1e-9)


def test_exponential_moment_vs_quadrature():
    lam, c = ES.rate, ES.shift
    t = 2.5
    plus, _ = integrate.quad(
        lambda e: (e - c) ** t * lam * math.exp(-lam * e), c, np.inf
    )
    assert ES.plus_moment(t) == pytest.approx(plus, rel=1e-9)


def test_moment_identity_plus_minus():
    for spec in ALL_SPECS:
        for t in (1.5, 2.0):
            mp = moment_profile(spec, t)
            assert mp.a_t_plus + mp.a_t_minus == pytest.approx(mp.a_t, rel=1e-10)
            assert mp.a_t >= mp.a_t_plus >= 0
            assert mp.a_t >= mp.a_t_minus >= 0


def test_pareto_moment_existence():
    with pytest.raises(MomentDoesNotExist):
        moment_profile(PS, 3.0)
    with pytest.raises(MomentDoesNotExist):
        moment_profile(PS, 3.5)
    with pytest.raises(InvalidParameter):
        moment_profile(TP, 1.0)


def test_infinite_variance_flag():
    heavy = ParetoShift(1.5, 1.0, 4.0)
    assert moment_profile(heavy, 1.4).var is None
    assert not moment_profile(heavy, 1.4).var_is_finite
    assert moment_profile(PS, 2.0).var_is_finite


# ---------------------------------------------------------------------------
# truncated moments
# ---------------------------------------------------------------------------


def test_two_point_truncation_inert():
    tm = truncated_moments(TP, 10.0, 2.0)
    assert tm.mean_trunc == -0.5
    assert tm.a_t_trunc == 1.0
    assert tm.tail_y == 0.0
    assert tm.b2 == 1.0


def test_pareto_truncated_vs_quadrature():
    # oracle: X0 restricted to [1, 4] when |X| <= 2, plus the exact tail 4^-3
    f = pareto_density(PS)
    mean, _ = integrate.quad(lambda v: (v - 2.0) * f(v), 1.0, 4.0)
    tm = truncated_moments(PS, 2.0, 2.0)
    assert mean == pytest.approx(-0.5625, rel=1e-10)
    assert tm.mean_trunc == pytest.approx(mean, rel=1e-10)
    assert tm.tail_y == pytest.approx(1.0 / 64.0, rel=1e-14)
    sq, _ = integrate.quad(lambda v: (v - 2.0) ** 2 * f(v), 1.0, 4.0)
    assert tm.a_t_trunc == pytest.approx(sq, rel=1e-10)
    b2, _ = integrate.quad(lambda v: (v - 2.0) ** 2 * f(v), 1.0, 4.0)
    assert tm.b2 == pytest.approx(b2, rel=1e-10)  # X <= 2 is X0 <= 4 here


@pytest.mark.parametrize("spec", ALL_SPECS + [ParetoShift(1.5, 1.0, 4.0)])
def test_truncated_monotone_convergence(spec):
    # a_t_trunc nondecreasing and tail nonincreasing in y; mean error shrinking
    a = validate_spec(spec)
    t = 1.4 if isinstance(spec, ParetoShift) and spec.r <= 2 else 2.0
    prev = None
    errs = []
    for y in (10.0, 100.0, 1000.0):
        tm = truncated_moments(spec, y, t)
        if prev is not None:
            assert tm.a_t_trunc >= prev.a_t_trunc - 1e-12
            assert tm.tail_y <= prev.tail_y + 1e-15
        errs.append(abs(tm.mean_trunc + a))
        prev = tm
    assert errs[2] <= errs[1] <= errs[0] + 1e-15
    assert errs[2] <= max(0.2 * errs[0], 1e-12)
    if not (isinstance(spec, ParetoShift) and spec.r <= 2):
        # heavy tails converge like y^(t-r): 1e-2 covers r=3 at y=1e3
        assert prev.a_t_trunc == pytest.approx(moment_profile(spec, t).a_t, rel=1e-2)


def test_truncated_vectorized_matches_scalar():
    for spec in ALL_SPECS:
        ys = np.array([3.0, 7.0, 25.0])
        mean_v, sq_v = spec.trunc_mean_t2(ys)
        for i, y in enumerate(ys):
            tm = truncated_moments(spec, float(y), 2.0)
            assert mean_v[i] == pytest.approx(tm.mean_trunc, rel=1e-12, abs=1e-300)
            assert sq_v[i] == pytest.approx(tm.a_t_trunc, rel=1e-12)


def test_truncated_rejects_bad_level():
    with pytest.raises(InvalidParameter):
        truncated_moments(TP, 0.0, 2.0)
    with pytest.raises(InvalidParameter):
        truncated_moments(TP, -1.0, 2.0)


def test_exponential_b2_vs_quadrature():
    lam, c = ES.rate, ES.shift
    y = 3.0
    b2, _ = integrate.quad(
        lambda e: (e - c) ** 2 * lam * math.exp(-lam * e), 0.0, c + y
    )
    assert truncated_moments(ES, y, 2.0).b2 == pytest.approx(b2, rel=1e-10)


def test_normal_trunc_vs_quadrature():
    y = 2.5
    pdf = lambda v: math.exp(-0.5 * (v + 1.0) ** 2) / math.sqrt(2 * math.pi)
    mean, _ = integrate.quad(lambda v: v * pdf(v), -y, y)
    sq, _ = integrate.quad(lambda v: v * v * pdf(v), -y, y)
    tm = truncated_moments(NM, y, 2.0)
    assert tm.mean_trunc == pytest.approx(mean, rel=1e-10)
    assert tm.a_t_trunc == pytest.approx(sq, rel=1e-10)
    plus, _ = integrate.quad(lambda v: v ** 1.5 * pdf(v), 0.0, y)
    assert truncated_moments(NM, y, 1.5).a_t_plus_trunc == pytest.approx(plus, rel=1e-9)


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------


def test_tail_worked_values():
    assert tail(PS, 2.0) == pytest.approx(1.0 / 64.0, abs=0)
    assert tail(TP, 0.5) == 0.25
    assert tail(TP, -2.0) == 1.0
    assert tail(ES, 0.0) == pytest.approx(math.exp(-2.0), rel=1e-15)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_tail_nonincreasing(spec):
    vs = np.linspace(-5.0, 30.0, 301)
    ts = np.asarray(tail(spec, vs))
    assert np.all(np.diff(ts) <= 1e-15)
    assert np.all((ts >= 0) & (ts <= 1))


def test_integrated_tail_worked_values():
    pure = ParetoShift(3.0, 1.0, 0.0)  # support [1, inf); drift not needed here
    assert integrated_tail(pure, 2.0) == pytest.approx(0.125, rel=1e-15)
    assert integrated_tail(TP, 0.5) == pytest.approx(0.125, rel=1e-15)
    assert integrated_tail(TP, 1.0) == 0.0


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_integrated_tail_shape(spec):
    # nonincreasing, convex, right-derivative -tail(x) via finite differences
    xs = np.linspace(-3.0, 20.0, 47)
    g = np.asarray(integrated_tail(spec, xs))
    assert np.all(np.diff(g) <= 1e-12)
    h = 1e-5
    for x in (-1.0, 0.3, 2.1, 6.3):
        deriv = (integrated_tail(spec, x + h) - integrated_tail(spec, x)) / h
        assert deriv == pytest.approx(-float(tail(spec, x)), abs=1e-4)
    # convexity on a coarse triple
    for x in (0.0, 1.2, 4.0):
        mid = integrated_tail(spec, x + 0.5)
        assert 2 * mid <= integrated_tail(spec, x) + integrated_tail(spec, x + 1.0) + 1e-12


def test_integrated_tail_vs_quadrature():
    for spec in ALL_SPECS:
        for x in (0.5, 3.0):
            ref, _ = integrate.quad(lambda u: float(tail(spec, u)), x, np.inf)
            assert integrated_tail(spec, x) == pytest.approx(ref, rel=1e-8, abs=1e-12)


# ---------------------------------------------------------------------------
# truncated exponential moments
# ---------------------------------------------------------------------------


def test_mgf_truncated_two_point_exact():
    assert mgf_truncated(TP, math.log(3.0), 10.0) == pytest.approx(1.0, abs=1e-15)
    # frozen from an mpmath evaluation of 0.25 exp(h) + 0.75 exp(-h), h = log(6)/10
    assert mgf_truncated(TP, math.log(6.0) / 10.0, 10.0) == pytest.approx(
        0.926026901271282, rel=1e-12
    )


@pytest.mark.parametrize("spec", ALL_SPECS)
@pytest.mark.parametrize("y", [1.5, 5.0, 20.0])
def test_mgf_truncated_identity_at_zero(spec, y):
    assert mgf_truncated(spec, 0.0, y) + float(tail(spec, y)) == pytest.approx(
        1.0, abs=1e-12
    )


def test_mgf_truncated_vs_quadrature():
    h, y = 0.21, 6.0
    f = pareto_density(PS)
    ref, _ = integrate.quad(lambda v: math.exp(h * (v - 2.0)) * f(v), 1.0, 8.0)
    assert mgf_truncated(PS, h, y) == pytest.approx(ref, rel=1e-10)
    lam, c = ES.rate, ES.shift
    ref2, _ = integrate.quad(
        lambda e: math.exp(h * (e - c)) * lam * math.exp(-lam * e), 0.0, y + c
    )
    assert mgf_truncated(ES, h, y) == pytest.approx(ref2, rel=1e-10)
    pdf = lambda v: math.exp(-0.5 * (v + 1.0) ** 2) / math.sqrt(2 * math.pi)
    ref3, _ = integrate.quad(lambda v: math.exp(h * v) * pdf(v), -np.inf, y)
    assert mgf_truncated(NM, h, y) == pytest.approx(ref3, rel=1e-10)


def test_full_mgf():
    assert mgf(TP, math.log(3.0)) == pytest.approx(1.0, abs=1e-15)
    assert mgf(NM, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert mgf(PS, 0.5) == math.inf
    assert mgf(ES, 2.0) == math.inf  # at and beyond the rate pole


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_json_round_trip(spec):
    assert spec_from_json(spec_to_json(spec)) == spec


def test_json_errors():
    with pytest.raises(InvalidParameter):
        spec_from_json("not json")
    with pytest.raises(InvalidParameter):
        spec_from_json('{"family": "cauchy", "params": {}}')
    with pytest.raises(InvalidParameter):
        spec_from_json('{"family": "normal", "params": {"mu": -1.0}}')


def test_json_field_names():
    obj = spec_to_json(PS)
    assert '"family": "pareto_shift"' in obj
    for key in ('"r"', '"scale"', '"shift"'):
        assert key in obj


# ---------------------------------------------------------------------------
# property tests
# ---------------------------------------------------------------------------


@given(
    p=st.floats(0.01, 0.49),
    u=st.floats(0.1, 5.0),
    d=st.floats(0.1, 5.0),
    t=st.floats(1.1, 3.0),
)
@settings(max_examples=60, deadline=None)
def test_two_point_moment_identity_random(p, u, d, t):
    spec = TwoPoint(p, u, d)
    if spec.mean() >= 0:
        return
    mp = moment_profile(spec, t)
    assert mp.a_t_plus + mp.a_t_minus == pytest.approx(mp.a_t, rel=1e-12)


@given(
    p=st.floats(0.05, 0.45),
    h=st.floats(0.0, 1.0),
    y=st.floats(0.5, 30.0),
)
@settings(max_examples=60, deadline=None)
def test_two_point_mgf_pieces_random(p, h, y):
    spec = TwoPoint(p, 1.0, 1.0)
    total = mgf_truncated(spec, h, y)
    assert total >= 0
    if y >= 1.0:
        assert total == pytest.approx(mgf(spec, h), rel=1e-14)
