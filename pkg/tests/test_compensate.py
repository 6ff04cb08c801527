import math

import numpy as np
import pytest
from scipy.optimize import brentq

from fonbw.compensate import (
    compensate,
    compensate_cbw,
    compensate_fonbw,
    compensate_zhu,
    evaluate_cascade,
    relative_rms,
)
from fonbw.errors import DivergenceError, InvalidArgument
from fonbw.fixtures import COMPENSATION_FONBW, FIG1_CBW, TABLE1_FONBW, TABLE1_ZHU
from fonbw.fracdiff import gl_weights
from fonbw.identify import rms_error
from fonbw.models import CbwAuxParams, CbwParams, FonbwParams, NbwParams, PolynomialGain, ZhuParams
from fonbw.signals import TimeSeries, gen_multifreq, gen_sine_offset

# short enough that the TABLE1_ZHU exp(t/tau) gain stays inside double range
ZERO = TimeSeries(0.0, 1e-4, np.zeros(100), "um")


def sgnpow(x, n):
    return math.copysign(abs(x) ** n, x)


def _delayed_inverse_oracle(Hd, p):
    """Straight transcription of the delayed loop with a bracketing root finder."""
    m, dt = len(Hd), Hd.dt
    w1 = gl_weights(p.lambda1, m).weights
    w2 = gl_weights(p.lambda2, m).weights
    c = dt ** (-p.lambda2)
    k1, rest = p.poly.coeffs[0], p.poly.coeffs[1:]
    g_rest = lambda x: sum(ci * x ** (i + 2) for i, ci in enumerate(rest))  # noqa: E731
    u = np.zeros(m)
    drive = np.zeros(m)
    hb = np.zeros(m)
    u[0] = Hd.values[0] / k1
    for k in range(1, m):
        drive[k] = u[k - 1]
        v = dt ** (-p.lambda1) * sum(w1[j] * drive[k - j] for j in range(k + 1))
        S = c * sum(w2[i] * hb[k - i] for i in range(1, k + 1))

        def f(x):
            return c * x + S - p.rho * (v - p.sigma * abs(v) * sgnpow(x, p.n) + (p.sigma - 1) * v * abs(x) ** p.n)

        hb[k] = brentq(f, -50.0, 50.0, xtol=1e-15, rtol=1e-15)
        u[k] = (Hd.values[k] - p.k_h * hb[k] - g_rest(u[k - 1])) / k1
    return u


def test_fonbw_compensator_matches_loop_oracle():
    Hd = gen_sine_offset(5, 5, 0.04, 1e-4, unit="um")
    for p in (COMPENSATION_FONBW, FonbwParams(PolynomialGain((0.2, 1e-3)), -1.5, 2e-3, 0.8, 1.7, 0.9, 0.7)):
        u = compensate_fonbw(Hd, p).values
        np.testing.assert_allclose(u, _delayed_inverse_oracle(Hd, p), rtol=1e-10, atol=1e-12)


def test_fonbw_compensator_trivial_cases():
    assert np.all(compensate_fonbw(ZERO, TABLE1_FONBW).values == 0)
    Hd = gen_multifreq(1.0, 1e-3)
    p = FonbwParams(PolynomialGain((0.25,)), 0.0, 1e-3, 0.5, 1.0, 0.9, 0.6)
    np.testing.assert_array_equal(compensate_fonbw(Hd, p).values, Hd.values / 0.25)
    with pytest.raises(InvalidArgument):
        PolynomialGain((0.0, 1.0))
    with pytest.raises(InvalidArgument):
        compensate_fonbw(Hd, p, iterations=11)


def test_matched_cascade_tracks_and_improves_with_dt():
    errs = []
    for dt in (1e-4, 5e-5):
        Hd = gen_sine_offset(5, 5, 0.6, dt, unit="um")
        rep = evaluate_cascade("FONBW", "FONBW", COMPENSATION_FONBW, COMPENSATION_FONBW, Hd)
        assert relative_rms(rep, Hd) <= 0.01
        errs.append(rep.rms_tracking_error)
    assert errs[0] / errs[1] >= 1.5
    Hd = gen_multifreq(1.0, 1e-4)
    assert relative_rms(evaluate_cascade("FONBW", "FONBW", COMPENSATION_FONBW, COMPENSATION_FONBW, Hd), Hd) <= 0.02


def test_table1_set_destabilizes_delayed_loop():
    # loop gain |k_h*rho*lambda1*dt**(lambda2-lambda1)/k_u1| is about 2.5 at dt = 1e-4
    with pytest.raises(DivergenceError):
        compensate_fonbw(gen_sine_offset(5, 5, 0.2, 1e-4), TABLE1_FONBW)


def test_fixed_point_refinement_on_contractive_loop():
    p = FonbwParams(PolynomialGain((0.1811, -1.4e-4)), -0.5, 1e-3, 0.5, 1.0, 0.9557, 0.6220)
    Hd = gen_sine_offset(5, 5, 0.4, 1e-4, unit="um")
    plain = evaluate_cascade("FONBW", "FONBW", p, p, Hd).rms_tracking_error
    refined = evaluate_cascade("FONBW", "FONBW", p, p, Hd, iterations=10).rms_tracking_error
    assert refined < 0.1 * plain


def test_cbw_compensator():
    assert np.all(compensate_cbw(ZERO, FIG1_CBW).values == 0)
    Hd = gen_multifreq(1.0, 1e-3)
    no_hyst = CbwAuxParams(k_a=0.2, k_b=0.0, D=1.0, A=0.7, beta=0.6, gamma=0.5, n=1.0)
    np.testing.assert_array_equal(compensate_cbw(Hd, no_hyst).values, Hd.values / 0.2)
    with pytest.raises(InvalidArgument):
        compensate_cbw(Hd, CbwAuxParams(k_a=0.0, k_b=1.0, D=1.0, A=0.7, beta=0.6, gamma=0.5, n=1.0))
    # matched plant with a stable delayed loop (k_b*A/k_a well below one half)
    p = CbwAuxParams(k_a=1.0, k_b=0.2, D=1.0, A=0.7, beta=0.6, gamma=0.5, n=1.0)
    Hd = gen_sine_offset(1, 2, 1.0, 1e-4)
    rep = evaluate_cascade("CBW", "CBW", p, p, Hd)
    assert relative_rms(rep, Hd) < 1e-3
    alpha_form = CbwParams(alpha=0.9, k=1.0, D=1.0, A=0.7, beta=0.6, gamma=0.5, n=1.0)
    np.testing.assert_array_equal(compensate_cbw(Hd, alpha_form).values, compensate_cbw(Hd, CbwAuxParams.from_cbw(alpha_form)).values)


def test_zhu_compensator():
    assert np.all(compensate_zhu(ZERO, TABLE1_ZHU).values == 0)
    p = ZhuParams(m0=0.0, c0=0.0, k0=1.0, k1=2.0, tau=0.5, A=0.0, beta=0.0, gamma=0.0, delta=0.0, n=1.0)
    Hd = gen_sine_offset(1, 1, 1.0, 1e-3)
    expected = p.tau * np.exp(Hd.times / p.tau) * Hd.values / p.k1
    np.testing.assert_allclose(compensate_zhu(Hd, p).values, expected, rtol=1e-13)
    with pytest.raises(InvalidArgument):
        compensate_zhu(Hd, ZhuParams(**{**p.to_dict(), "k1": 0.0}))
    with pytest.raises(InvalidArgument):
        ZhuParams(**{**p.to_dict(), "tau": -1.0})


def test_table1_zhu_inverse_overflows():
    # tau = 2e-5 s makes the exp(t/tau) gain leave double range within milliseconds
    with pytest.raises(DivergenceError):
        compensate_zhu(gen_sine_offset(5, 5, 0.2, 1e-4), TABLE1_ZHU)


def test_zhu_cascade_finite_for_slow_forcing_decay():
    p = ZhuParams(m0=1e-3, c0=1.0, k0=100.0, k1=50.0, tau=2.0, A=0.5, beta=0.3, gamma=0.1, delta=0.05, n=1.0)
    Hd = gen_sine_offset(5, 5, 1.0, 1e-4, unit="um")
    rep = evaluate_cascade("ZHU", "ZHU", p, p, Hd)
    assert np.all(np.isfinite(rep.u_cmd.values)) and np.all(np.isfinite(rep.H_achieved.values))
    assert np.max(np.abs(rep.H_achieved.values)) < 10 * Hd.value_range


def test_perfect_inverse_cascade():
    Hd = gen_multifreq(1.0, 1e-4)
    comp = FonbwParams(PolynomialGain((0.37,)), 0.0, 1.0, 0.5, 1.0, 1.0, 1.0)
    plant = NbwParams(k_u=0.37, k_h=0.0, rho=1.0, sigma=0.5, n=1.0)
    rep = evaluate_cascade("FONBW", "NBW", comp, plant, Hd)
    assert rep.rms_tracking_error <= 1e-12 * Hd.value_range


def test_zero_reference_gives_zero_everything():
    plant = COMPENSATION_FONBW
    cbw = CbwAuxParams(k_a=0.18, k_b=0.1, D=1.0, A=0.7, beta=0.6, gamma=0.5, n=1.0)
    for kind, params in (("FONBW", COMPENSATION_FONBW), ("CBW", cbw), ("ZHU", TABLE1_ZHU)):
        rep = evaluate_cascade(kind, "FONBW", params, plant, ZERO)
        assert np.all(rep.u_cmd.values == 0) and np.all(rep.H_achieved.values == 0)
        assert rep.rms_tracking_error == 0 and rep.rms_input == 0


def test_report_fields():
    Hd = gen_sine_offset(5, 5, 0.2, 1e-4, unit="um")
    rep = evaluate_cascade("FONBW", "FONBW", COMPENSATION_FONBW, COMPENSATION_FONBW, Hd)
    assert rep.rms_input == rms_error(rep.u_cmd, rep.u_cmd.with_values(np.zeros(len(Hd))))
    assert rep.u_cmd.same_grid(Hd) and rep.H_achieved.same_grid(Hd)
    assert rep.to_dict() == {"rms_tracking_error": rep.rms_tracking_error, "rms_input": rep.rms_input}
    with pytest.raises(InvalidArgument):
        compensate("PI", Hd, COMPENSATION_FONBW)



def test_asymmetric_plant_favours_polynomial_inverse():
    # ANBW plant; the CBW compensator carries the exact symmetric part
    # (A = rho, beta = sigma*rho, gamma = (1 - sigma)*rho, h0 = D = 1) but no polynomial
    poly = PolynomialGain((0.18, -5e-4))  # delayed quadratic term keeps loop gain ~0.3
    nbw = NbwParams(k_u=0.18, k_h=-2.0, rho=1e-3, sigma=0.6, n=1.0)
    frac = FonbwParams(poly, nbw.k_h, nbw.rho, nbw.sigma, nbw.n, 1.0, 1.0)
    cbw = CbwAuxParams(k_a=0.18, k_b=-2.0, D=1.0, A=1e-3, beta=0.6e-3, gamma=0.4e-3, n=1.0)
    Hd = gen_sine_offset(5, 5, 0.6, 1e-4, unit="um")
    fonbw_err = evaluate_cascade("FONBW", "ANBW", frac, (poly, nbw), Hd).rms_tracking_error
    cbw_err = evaluate_cascade("CBW", "ANBW", cbw, (poly, nbw), Hd).rms_tracking_error
    assert fonbw_err < 0.01 * Hd.value_range
    assert fonbw_err < cbw_err
