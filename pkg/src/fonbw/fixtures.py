"""Reference parameter sets.

``TABLE1_*`` are identified values for a real stack actuator, stored exactly as
published (no unit conversion). ``FIG1_CBW`` and ``FIG2_POLY`` are the
illustrative sets used to show rate independence and asymmetry.
"""
from .models import CbwAuxParams, CbwParams, FonbwParams, PolynomialGain, ZhuParams

FIG1_CBW = CbwParams(alpha=0.1, k=1.0, D=1.0, A=0.7, beta=0.6, gamma=0.5, n=1.0)

FIG2_POLY = PolynomialGain((0.1, 0.1, 0.01))

TABLE1_FONBW = FonbwParams(
    poly=PolynomialGain((0.1811, -1.4037e-4, -7.7154e-8)),
    k_h=-3.2719e4,
    rho=6.4808e-7,
    sigma=1.3039e5,
    n=2.0006,
    lambda1=0.9557,
    lambda2=0.6220,
)

TABLE1_CBW = CbwAuxParams(
    k_a=0.1547, k_b=-3.6660e5, D=0.5552, A=6.1987e-7, beta=0.0364, gamma=0.0272, n=1.0003
)

TABLE1_ZHU = ZhuParams(
    m0=0.1026,
    c0=2.5820e2,
    k0=1.5567e5,
    k1=4.3915e-7,
    tau=2.0408e-5,
    A=-0.0068,
    beta=0.0457,
    gamma=-0.0255,
    delta=-0.0024,
    n=1.0483,
    x0=0.0,
)

FONBW_THETA_NAMES = ("k_u1", "k_u2", "k_u3", "k_h", "rho", "sigma", "n", "lambda1", "lambda2")
CBW_THETA_NAMES = ("k_a", "k_b", "D", "A", "beta", "gamma", "n")
ZHU_THETA_NAMES = ("m0", "c0", "k0", "k1", "x0", "tau", "A", "beta", "gamma", "delta", "n")

# TABLE1_FONBW orders and polynomial with a hysteresis gain small enough for the
# one-sample-delay inverse to stay stable down to dt = 5e-5 (the TABLE1_FONBW set
# itself drives that loop unstable; see compensate_fonbw).
COMPENSATION_FONBW = FonbwParams(
    poly=PolynomialGain((0.1811, -1.4037e-4, -7.7154e-8)),
    k_h=-2.0,
    rho=1.0e-3,
    sigma=0.5,
    n=1.0,
    lambda1=0.9557,
    lambda2=0.6220,
)

FIXTURES = {
    ("FONBW", "table1"): TABLE1_FONBW,
    ("FONBW", "compensation"): COMPENSATION_FONBW,
    ("CBW", "table1"): TABLE1_CBW,
    ("CBW", "fig1"): FIG1_CBW,
    ("ZHU", "table1"): TABLE1_ZHU,
}
