import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pruefer import (IntegratorConfig, PotentialSpec, Trajectory, fit_decay,
                     integrate, lower_envelope_check, max_eigenvalue_bound,
                     per_period_integral, verdict, weighted_sin_integral)
from pruefer.analysis import (EMBEDDED, INCONCLUSIVE, NOT_EIGENVALUE,
                              crossing_spacing, critical_wavenumber,
                              fit_decay_samples, per_period_integrals,
                              period_deviation_constant)

TWO_OVER_PI = 2 / math.pi


def _synthetic(x, logR, theta=None, k=1.0):
    theta = np.zeros_like(x) if theta is None else theta
    return Trajectory(PotentialSpec.zero(),
                      IntegratorConfig(k=k, x_end=float(x[-1])),
                      x, theta, logR, np.zeros_like(x),
                      q1=np.zeros_like(x), q2=np.zeros_like(x))


def test_bound_examples():
    assert max_eigenvalue_bound(0.0) == 0.0
    assert max_eigenvalue_bound(math.pi / 2) == pytest.approx(1.0, rel=1e-15)
    assert max_eigenvalue_bound(1.0) == pytest.approx(0.405285, abs=5e-7)
    assert critical_wavenumber(1.0) == pytest.approx(TWO_OVER_PI)


@given(a=st.floats(1e-3, 1e3))
def test_bound_scaling(a):
    assert max_eigenvalue_bound(2 * a) == 4 * max_eigenvalue_bound(a)
    assert max_eigenvalue_bound(a * 1.001) > max_eigenvalue_bound(a)


def test_fit_exact_linear():
    x = np.geomspace(1.0, 1e6, 500)
    fit = fit_decay_samples(x, -0.5 * np.log(x) + 3.0, (1.0, 1e6))
    assert fit.exponent == pytest.approx(0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(3.0, abs=1e-12)
    assert fit.residual_rms <= 1e-12


def test_fit_window_rules():
    x = np.geomspace(1.0, 1e6, 500)
    with pytest.raises(ValueError):
        fit_decay_samples(x, np.zeros_like(x), (0.5, 1e3))
    with pytest.raises(ValueError):
        fit_decay_samples(x, np.zeros_like(x), (10.0, 50.0))
    with pytest.raises(ValueError):
        fit_decay_samples(x[:20], np.zeros(20), (1.0, 10.0))


def test_fit_zero_potential(zero_long):
    assert abs(fit_decay(zero_long).exponent) <= 1e-9


def test_fit_feedback(feedback_long):
    fit = fit_decay(feedback_long)
    assert (fit.x_lo, fit.x_hi) == (1e3, 1e6)
    assert fit.exponent == pytest.approx(TWO_OVER_PI, abs=0.01)


def test_feedback_logR_at_end(feedback_long):
    # logR(x) = -p ln x + c + o(1); the constant c keeps the plain ratio
    # logR/ln x about c/ln(1e6) away from -p at x = 1e6.
    fit = fit_decay(feedback_long)
    ratio = feedback_long.logR[-1] / math.log(1e6)
    assert ratio == pytest.approx(-0.57747, abs=1e-4)
    assert ratio - fit.intercept / math.log(1e6) == pytest.approx(
        -TWO_OVER_PI, abs=0.01)


def test_weighted_integral_theta_zero():
    x = np.linspace(0.0, 100.0, 10001)
    assert weighted_sin_integral(_synthetic(x, np.zeros_like(x)),
                                 1.0, 100.0).value == 0.0


def test_weighted_integral_free_exact():
    tr = integrate(PotentialSpec.zero(),
                   IntegratorConfig(k=1.0, x_end=1e3, theta0=0.0))
    # |sin 2y| over whole quarter periods [m pi/2, (m+1) pi/2]
    from scipy.integrate import quad
    a, b = math.pi / 2, 200 * math.pi
    ref = sum(quad(lambda y: abs(math.sin(2 * y)) / (1 + y),
                   a + j * math.pi / 2, a + (j + 1) * math.pi / 2,
                   epsabs=1e-14)[0] for j in range(399))
    q = weighted_sin_integral(tr, a, b)
    assert q.value == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("name", ["zero_long", "feedback_long"])
def test_weighted_ratio_increases_toward_limit(name, request):
    tr = request.getfixturevalue(name)
    r = [weighted_sin_integral(tr, 1.0, x).value / math.log(x)
         for x in (1e4, 1e5, 1e6)]
    assert r[0] < r[1] < r[2] < TWO_OVER_PI
    # Increments per decade settle on (2/pi) ln 10.
    inc = (weighted_sin_integral(tr, 1e5, 1e6).value / math.log(10.0))
    assert inc == pytest.approx(TWO_OVER_PI, abs=0.002)


def test_logR_identity(feedback_long):
    tr = feedback_long
    a, k = 1.0, 0.5
    for lo, hi in ((10.0, 1e3), (1e3, 1e6), (1.0, 1e6)):
        i, j = np.searchsorted(tr.x, [lo, hi])
        assert tr.x[i] == lo and tr.x[j] == hi
        w = weighted_sin_integral(tr, lo, hi).value
        assert tr.logR[j] - tr.logR[i] == pytest.approx(-a / (2 * k) * w,
                                                        abs=1e-9)


@pytest.mark.parametrize("k,expected", [(1.0, 1.0), (2.0, 0.5)])
def test_per_period_free(k, expected):
    tr = integrate(PotentialSpec.zero(), IntegratorConfig(k=k, x_end=100.0))
    for i in (1, 5, 50):
        assert per_period_integral(tr, i).value == pytest.approx(expected,
                                                                 abs=1e-9)


def test_per_period_feedback(feedback_long):
    tr = feedback_long
    idx, vals = per_period_integrals(tr, x0=3.0)
    assert np.all(np.diff(idx) == 1)
    dc = period_deviation_constant(tr, 10, 1000)
    assert math.isfinite(dc.C) and dc.C < 10
    assert dc.decaying


def test_crossing_spacing_feedback(feedback_long):
    st_ = crossing_spacing(feedback_long, 10, 1000)
    assert st_.bound < 10 * 1.0 / 0.5
    assert abs(st_.trend) < 0.1
    full = crossing_spacing(feedback_long, 10)
    assert full.bound < 20


def test_crossing_spacing_coulomb():
    tr = integrate(PotentialSpec.coulomb_sign(1.0, -1),
                   IntegratorConfig(k=1.0, x_end=1e5))
    st_ = crossing_spacing(tr, 10)
    assert st_.bound < 10.0
    assert abs(st_.trend) < 0.1


def test_crossing_count_bound(feedback_long):
    from pruefer import detect_crossings
    cr = detect_crossings(feedback_long, x0=3.0)
    xs = np.geomspace(100.0, 1e6, 200)
    n = np.array([cr.count_upto(x) for x in xs])
    assert np.all(n <= (2 * 0.5 / math.pi + 0.05) * xs)


def test_envelope_feedback(feedback_long):
    env = lower_envelope_check(feedback_long, 1.0, 0.5)
    assert env.bounded and env.spread <= 1.0
    assert abs(env.trend) < 0.01


def test_envelope_zero(zero_long):
    env = lower_envelope_check(zero_long, 0.0, 1.0)
    assert env.g_min == env.g_max == 0.0 or env.spread <= 1e-12


def test_envelope_coulomb_report_only():
    tr = integrate(PotentialSpec.coulomb_sign(1.0, 1),
                   IntegratorConfig(k=0.8, x_end=1e5))
    env = lower_envelope_check(tr, 1.0, 0.8)
    assert math.isfinite(env.g_min) and math.isfinite(env.g_max)
    assert len(env.decade_spreads) == 3


def test_verdict_feedback_embedded(feedback_long):
    v = verdict(feedback_long, 1.0, 0.5)
    assert v.verdict == EMBEDDED
    assert v.fitted_exponent == pytest.approx(TWO_OVER_PI, abs=0.01)
    assert v.margin > 1
    d = v.to_json()
    assert list(d) == ["a", "k", "lambda", "threshold", "predicted_exponent",
                       "fitted_exponent", "fit_window", "fit_residual",
                       "tail_l2", "verdict", "margin"]
    json.dumps(d)


@pytest.mark.slow
def test_verdict_feedback_above_threshold():
    tr = integrate(PotentialSpec.feedback_sign(1.0),
                   IntegratorConfig(k=0.7, x_end=1e6))
    v = verdict(tr, 1.0, 0.7)
    assert v.verdict == NOT_EIGENVALUE
    assert v.fitted_exponent == pytest.approx(1 / (0.7 * math.pi), abs=0.01)


def test_verdict_zero(zero_long):
    v = verdict(zero_long, 0.0, 1.0)
    assert v.verdict == NOT_EIGENVALUE
    assert abs(v.fitted_exponent) < 1e-9


def test_verdict_at_threshold_inconclusive():
    k = critical_wavenumber(1.0)
    tr = integrate(PotentialSpec.feedback_sign(1.0),
                   IntegratorConfig(k=k, x_end=1e5))
    assert verdict(tr, 1.0, k).verdict == INCONCLUSIVE


def test_verdict_contradicting_bound_inconclusive():
    x = np.concatenate([np.linspace(0, 1, 50, endpoint=False),
                        np.geomspace(1.0, 1e6, 1000)])
    tr = _synthetic(x, -0.7 * np.log1p(x), k=0.8)
    v = verdict(tr, 1.0, 0.8)
    assert v.verdict == INCONCLUSIVE
    assert "exceeds" in v.diagnostic
