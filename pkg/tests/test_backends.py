"""Compiled and pure-Python kernels must agree to rounding."""
import numpy as np
import pytest

from fonbw import _backend
from fonbw.compensate import compensate_cbw, compensate_fonbw, compensate_zhu
from fonbw.errors import DivergenceError, SolverError
from fonbw.fixtures import COMPENSATION_FONBW, FIG1_CBW, TABLE1_FONBW, TABLE1_ZHU
from fonbw.fracdiff import gl_derivative
from fonbw.models import CbwAuxParams, FonbwParams, PolynomialGain, ZhuParams, simulate_cbw, simulate_fonbw, simulate_zhu
from fonbw.signals import gen_sine_offset, gen_sweep_eq19

try:
    _backend.get("cython")
except ImportError:  # pragma: no cover
    pytest.skip("compiled kernels not built", allow_module_level=True)


def both(monkeypatch, fn):
    out = []
    for name in ("cython", "python"):
        monkeypatch.setattr(_backend, "kernels", _backend.get(name))
        out.append(fn())
    return out


def test_gl_filter(monkeypatch):
    f = gen_sweep_eq19(0.5, 1e-3)
    for mem in (None, 37):
        a, b = both(monkeypatch, lambda: gl_derivative(f, 0.63, memory=mem).values)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-9)


def test_bw_rk4(monkeypatch):
    u = gen_sine_offset(1.0, 2.0, 1.0, 1e-3)
    a, b = both(monkeypatch, lambda: simulate_cbw(FIG1_CBW, u).values)
    np.testing.assert_array_equal(a, b)


def test_fonbw_hbar(monkeypatch):
    u = gen_sweep_eq19(0.3, 1e-3)
    p = FonbwParams(PolynomialGain((0.18, 1e-4)), -2.0, 5e-3, 0.7, 1.6, 0.9, 0.6)
    for params in (TABLE1_FONBW, p):
        a, b = both(monkeypatch, lambda: simulate_fonbw(params, u, memory=150).values)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12 * np.ptp(a))


def test_zhu_rk4(monkeypatch):
    u = gen_sine_offset(1.0, 5.0, 0.2, 1e-4)
    a, b = both(monkeypatch, lambda: simulate_zhu(TABLE1_ZHU, u).values)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_compensators(monkeypatch):
    Hd = gen_sine_offset(5, 5, 0.05, 1e-4)
    a, b = both(monkeypatch, lambda: compensate_fonbw(Hd, COMPENSATION_FONBW, iterations=2).values)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    cbw = CbwAuxParams(k_a=1.0, k_b=0.2, D=1.0, A=0.7, beta=0.6, gamma=0.5, n=1.5)
    a, b = both(monkeypatch, lambda: compensate_cbw(Hd, cbw).values)
    np.testing.assert_array_equal(a, b)
    zhu = ZhuParams(m0=1e-3, c0=1.0, k0=100.0, k1=50.0, tau=2.0, A=0.5, beta=0.3, gamma=0.1, delta=0.05, n=1.0)
    a, b = both(monkeypatch, lambda: compensate_zhu(Hd, zhu).values)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_failures_agree(monkeypatch):
    Hd = gen_sine_offset(5, 5, 0.2, 1e-4)
    for name in ("cython", "python"):
        monkeypatch.setattr(_backend, "kernels", _backend.get(name))
        with pytest.raises(DivergenceError):
            compensate_zhu(Hd, TABLE1_ZHU)
        with pytest.raises(SolverError):
            _backend.kernels.solve_hbar(1.0, 3.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1)
