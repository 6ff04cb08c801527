import math

import numpy as np
import pytest

import fonbw.identify as ident
from fonbw.errors import InvalidArgument
from fonbw.fixtures import TABLE1_FONBW
from fonbw.identify import (
    PENALTY,
    DeConfig,
    IdentificationProblem,
    build_params,
    evaluate_candidate,
    identify,
    params_to_theta,
    rms_error,
    scaled_bounds,
)
from fonbw.models import NbwParams, simulate_fonbw, simulate_nbw
from fonbw.signals import TimeSeries, gen_sweep_eq19

NBW_TRUTH = NbwParams(k_u=0.18, k_h=-2.0, rho=1e-2, sigma=0.6, n=1.5)
NBW_NAMES = ("k_u", "k_h", "rho", "sigma", "n")


@pytest.fixture(scope="module")
def nbw_data():
    u = gen_sweep_eq19(10.0, 1e-3)
    return u, simulate_nbw(NBW_TRUTH, u)


@pytest.fixture(scope="module")
def nbw_problem(nbw_data):
    u, H = nbw_data
    return IdentificationProblem("NBW", u, H)


def nbw_bounds():
    return scaled_bounds(params_to_theta("NBW", NBW_TRUTH, NBW_NAMES), 0.5, 2.0, {4: (1.0, math.inf)})


# ---------------------------------------------------------------- objective


def test_rms_error_hand_cases():
    a = np.array([1.0, -2.0, 3.5])
    assert rms_error(a, a) == 0.0
    assert rms_error(a, a + 0.25) == 0.25
    assert rms_error(a, a - 0.25) == 0.25
    assert rms_error(np.array([3.0, 4.0]), np.zeros(2)) == math.sqrt(12.5)
    s = TimeSeries(0, 1, [3.0, 4.0])
    assert rms_error(s, s.with_values([0.0, 0.0])) == pytest.approx(3.5355, abs=1e-4)


def test_rms_error_rejects_mismatch():
    with pytest.raises(InvalidArgument):
        rms_error(np.zeros(3), np.zeros(4))
    with pytest.raises(InvalidArgument):
        rms_error(np.zeros(0), np.zeros(0))


def test_candidate_at_truth_is_exact(nbw_problem):
    theta = params_to_theta("NBW", NBW_TRUTH, NBW_NAMES)
    assert evaluate_candidate(nbw_problem, theta) == 0.0


def test_candidate_penalties_and_errors(nbw_problem):
    theta = params_to_theta("NBW", NBW_TRUTH, NBW_NAMES)
    worse = theta.copy()
    worse[0] *= 1.1
    assert evaluate_candidate(nbw_problem, worse) > 0.0
    diverging = np.array([0.18, -2.0, 5.0, -3.0, 2.0])
    assert evaluate_candidate(nbw_problem, diverging) == PENALTY
    invalid = theta.copy()
    invalid[4] = 0.5  # n < 1 is not a model
    assert evaluate_candidate(nbw_problem, invalid) == PENALTY
    with pytest.raises(InvalidArgument):
        evaluate_candidate(nbw_problem, theta[:3])


def test_fonbw_truth_objective_and_perturbation():
    u = gen_sweep_eq19(3.0, 1e-3)
    H = simulate_fonbw(TABLE1_FONBW, u)
    prob = IdentificationProblem("FONBW", u, H)
    theta = params_to_theta("FONBW", TABLE1_FONBW, prob.theta_names)
    assert prob.dim == 9
    assert evaluate_candidate(prob, theta) <= 1e-12 * H.value_range
    bumped = theta.copy()
    bumped[0] *= 1.1
    assert evaluate_candidate(prob, bumped) > evaluate_candidate(prob, theta)


# ---------------------------------------------------------------- problem plumbing


def test_problem_validation(nbw_data):
    u, H = nbw_data
    with pytest.raises(InvalidArgument):
        IdentificationProblem("PI", u, H)
    with pytest.raises(InvalidArgument):
        IdentificationProblem("NBW", u, TimeSeries(0.0, 2e-3, H.values))
    with pytest.raises(InvalidArgument):
        IdentificationProblem("NBW", u, H, ("k_u", "k_u"))
    assert IdentificationProblem("cbw", u, H).dim == 7
    assert IdentificationProblem("zhu", u, H).dim == 11


def test_build_params_variants():
    poly, nbw = build_params("ANBW", {"k_u2": 0.1, "k_u1": 0.2, "k_h": 1.0, "rho": 1.0, "sigma": 0.5, "n": 1.0})
    assert poly.coeffs == (0.2, 0.1) and nbw.k_u == 0.2
    with pytest.raises(InvalidArgument):
        build_params("FONBW", {"k_u1": 0.2, "k_u3": 0.1})
    d = {**TABLE1_FONBW.to_dict()}
    d.update({f"k_u{i + 1}": c for i, c in enumerate(d.pop("poly"))})
    assert build_params("FONBW", d) == TABLE1_FONBW


def test_scaled_bounds_keep_sign():
    b = scaled_bounds([2.0, -3.0, 0.9], 0.5, 2.0, {2: (0.0, 1.0)})
    assert b == ((1.0, 4.0), (-6.0, -1.5), (0.45, 1.0))


@pytest.mark.parametrize(
    "kw",
    [
        dict(population_size=3),
        dict(bounds=((1.0, 1.0),)),
        dict(bounds=((2.0, 1.0),)),
        dict(bounds=((0.0, math.inf),)),
        dict(cr_init=1.5),
        dict(max_generations=-1),
        dict(f_lo=0.0),
    ],
)
def test_de_config_invariants(kw):
    args = dict(population_size=10, max_generations=5, bounds=((0.0, 1.0),))
    args.update(kw)
    with pytest.raises(InvalidArgument):
        DeConfig(**args)


def test_bounds_dimension_checked(nbw_problem):
    with pytest.raises(InvalidArgument):
        identify(nbw_problem, DeConfig(8, 2, ((0.0, 1.0),) * 4))


# ---------------------------------------------------------------- optimizer


def _sphere_problem():
    # NBW model with k_h = 0 is linear in k_u; the others are inert
    u = TimeSeries(0.0, 1e-2, np.linspace(0, 1, 50))
    H = u.with_values(0.3 * u.values)
    return IdentificationProblem("NBW", u, H, ("k_u", "rho"), fixed={"k_h": 0.0, "sigma": 0.5, "n": 1.0})


def test_runs_exactly_max_generations_without_target(monkeypatch):
    prob = _sphere_problem()
    seen = []
    real = ident.evaluate_candidate

    def spy(problem, theta):
        seen.append(np.array(theta))
        return real(problem, theta)

    monkeypatch.setattr(ident, "evaluate_candidate", spy)
    cfg = DeConfig(6, 7, ((0.1, 1.0), (0.5, 2.0)), seed=3, target_objective=math.inf)
    r = identify(prob, cfg)
    assert r.generations == 7
    assert r.evaluations == 6 * 8 == len(seen)
    assert len(r.objective_trace) == 8
    assert all(b <= a for a, b in zip(r.objective_trace, r.objective_trace[1:]))
    pts = np.array(seen)
    assert np.all(pts >= [0.1, 0.5]) and np.all(pts <= [1.0, 2.0])


def test_target_stops_early():
    prob = _sphere_problem()
    r = identify(prob, DeConfig(10, 200, ((0.1, 1.0), (0.5, 2.0)), seed=1, target_objective=1e-3))
    assert r.generations < 200
    assert r.best_objective <= 1e-3
    assert r.best_params_dict()["k_u"] == pytest.approx(0.3, rel=1e-2)


def test_same_seed_bitwise_identical_and_parallel_invariant():
    prob = _sphere_problem()
    cfg = DeConfig(8, 15, ((0.1, 1.0), (0.5, 2.0)), seed=42)
    a = identify(prob, cfg)
    b = identify(prob, cfg)
    c = identify(prob, DeConfig(8, 15, ((0.1, 1.0), (0.5, 2.0)), seed=42, workers=2))
    for other in (b, c):
        assert a.best_theta.tobytes() == other.best_theta.tobytes()
        assert a.objective_trace == other.objective_trace
    d = identify(prob, DeConfig(8, 15, ((0.1, 1.0), (0.5, 2.0)), seed=43))
    assert a.best_theta.tobytes() != d.best_theta.tobytes()


def test_report_document():
    r = identify(_sphere_problem(), DeConfig(5, 2, ((0.1, 1.0), (0.5, 2.0)), seed=9))
    doc = r.to_dict()
    assert set(doc["best_parameters"]) == {"k_u", "rho"}
    assert doc["seed"] == 9 and doc["config"]["population_size"] == 5
    assert doc["config"]["bounds"] == [[0.1, 1.0], [0.5, 2.0]]


def test_nbw_recovery_within_one_percent(nbw_problem, nbw_data):
    _, H = nbw_data
    target = 0.01 * H.value_range
    r = identify(nbw_problem, DeConfig(50, 300, nbw_bounds(), seed=7, target_objective=target))
    assert r.best_objective <= target
    fitted = simulate_nbw(nbw_problem.params(r.best_theta), nbw_data[0])
    assert rms_error(H, fitted) == r.best_objective
