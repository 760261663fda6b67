import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import fsolve

from nhdicke.integrate import rk4
from nhdicke.linalg import Polynomial, poly_roots
from nhdicke.nonlinear import (
    DEFAULT_PSI0,
    NonlinearParams,
    classify_roots,
    evolve_nonlinear,
    gain_for_frequency,
    hamiltonian,
    nep5_parameters,
    nep5_solutions,
    perturbation_response,
    quintic_coefficients,
    saturation_gain,
    stability_of,
    steady_map,
    steady_residuals,
    steady_solutions,
    steady_vector,
    zero_solution,
)

# a generic point with one stable and one unstable finite-amplitude steady state
GENERIC = NonlinearParams(0.05, 1.8, 1.0, 0.55, 1.9, 0.76, alpha=3.1, beta=0.83)


@pytest.fixture(scope="module")
def nep():
    return nep5_parameters()


def test_saturation_gain_examples():
    assert saturation_gain(5, 2, 0.0) == 3
    assert abs(saturation_gain(5, 2, 1e8) + 2) < 1e-12
    assert abs(saturation_gain(5, 2, np.sqrt(1.5))) < 1e-15
    with pytest.raises(ValueError):
        saturation_gain(5, 2, -1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        NonlinearParams(0, 0, 0.0, 1, 1, 1)
    assert GENERIC.is_physical and not GENERIC.with_(t=-1.0).is_physical


def test_odd_quintic_without_onsite_terms():
    c = quintic_coefficients(NonlinearParams(0, 0, 1.0, 0.7, 0.0, 0.9)).coefficients
    assert c[0] == 0 and c[2] == 0 and c[4] == 0
    assert c[5] == -1


def _det_oracle_roots(p):
    """Real (omega, G) pairs solving det(H(G) - omega) = 0 by brute-force seeding."""
    def f(x):
        d = np.linalg.det(hamiltonian(p, x[1]) - x[0] * np.eye(3))
        return [d.real, d.imag]

    found = []
    for w0 in np.linspace(-6, 6, 49):
        for g0 in np.linspace(-4, 4, 9):
            x, info, ier, _ = fsolve(f, [w0, g0], full_output=True, xtol=1e-13)
            if ier == 1 and np.max(np.abs(f(x))) < 1e-10 and not any(abs(x[0] - y) < 1e-6 for y in found):
                found.append(x[0])
    return np.sort(found)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_quintic_roots_match_joint_steady_equations(seed):
    rng = np.random.default_rng(seed)
    p = NonlinearParams(*rng.uniform(-1.5, 1.5, 2), 1.0, *rng.uniform(0.3, 1.5, 3))
    real, _ = classify_roots(poly_roots(quintic_coefficients(p)))
    oracle = _det_oracle_roots(p)
    assert len(real) == len(oracle)
    np.testing.assert_allclose(np.sort(real), oracle, atol=1e-7)


@given(seed=st.integers(0, 10 ** 6))
def test_elimination_identity(seed):
    rng = np.random.default_rng(seed)
    p = NonlinearParams(*rng.uniform(-2, 2, 2), 1.0, *rng.uniform(0.2, 2, 3))
    real, pairs = classify_roots(poly_roots(quintic_coefficients(p)))
    for a, b in pairs:
        assert abs(a - np.conj(b)) < 1e-7
    for w in real:
        g = gain_for_frequency(p, w)
        if not np.isfinite(g) or abs(g) > 1e6:
            continue
        re, im = steady_residuals(p, w, g)
        scale = 1 + abs(w) ** 3 + abs(g) * (1 + abs(w))
        assert abs(re) < 1e-8 * scale and abs(im) < 1e-8 * scale


def test_nep5_coefficients(nep):
    c = quintic_coefficients(nep).coefficients
    target = Polynomial.from_roots([1.0] * 5, leading=-1.0).coefficients
    assert np.max(np.abs(c - target)) < 1e-8
    assert nep.is_physical
    r = poly_roots(quintic_coefficients(nep))
    assert np.max(np.abs(r - 1)) < 1e-2


def test_nep5_solutions_are_unique_and_scale():
    sols = nep5_solutions()
    assert len(sols) == 1
    # omega_s = 0 asks for all lower coefficients to vanish
    zero = nep5_solutions(omega_s=0.0)
    for s in zero:
        assert np.max(np.abs(quintic_coefficients(s).coefficients[:5])) < 1e-8


def test_perturbation_response(nep):
    eps = np.logspace(-8, -3, 26)
    resp = perturbation_response(nep, eps, 1.0)
    assert abs(resp.slope - 0.2) < 0.03
    assert np.all(resp.n_real == 1)
    for r in resp.roots:
        _, pairs = classify_roots(r)
        assert len(pairs) == 2
    # continuity: branches collapse to omega_s as epsilon shrinks
    spread = np.max(np.abs(resp.roots - 1.0), axis=1)
    assert np.all(np.diff(spread) > 0)
    at_zero = perturbation_response(nep, [0.0], 1.0)
    assert np.max(np.abs(at_zero.roots - 1)) < 1e-2


def test_saturation_at_nep5(nep):
    run = evolve_nonlinear(nep.with_(alpha=5.0, beta=2.0), DEFAULT_PSI0)
    assert not run.diverged
    assert run.gain_spread < 1e-3
    assert run.steady_amplitude > 0.1


@pytest.mark.parametrize("ab", [(2.0, 5.0), (5.0, 5.0), (0.0, 1.0)])
def test_loss_dominated_runs_decay(nep, ab):
    run = evolve_nonlinear(nep.with_(alpha=ab[0], beta=ab[1]), DEFAULT_PSI0)
    assert np.max(np.abs(run.states[-1])) < 1e-6


def test_zero_state_is_a_fixed_point(nep):
    run = evolve_nonlinear(nep.with_(alpha=3.0, beta=3.0), np.zeros(3), T=10.0)
    assert np.all(run.states == 0)


def test_evolution_matches_stable_steady_state():
    sols = steady_solutions(GENERIC)
    stable = [s for s in sols if s.stable]
    assert len(stable) == 1
    run = evolve_nonlinear(GENERIC, DEFAULT_PSI0)
    s = stable[0]
    assert abs(run.steady_amplitude - s.amplitude) / s.amplitude < 1e-3
    assert abs(run.steady_gain - s.gain) < 1e-3
    assert abs(s.gain - saturation_gain(GENERIC.alpha, GENERIC.beta, s.amplitude)) < 1e-12


def test_unstable_root_is_left_by_the_flow():
    unstable = [s for s in steady_solutions(GENERIC) if not s.stable]
    assert unstable and unstable[0].exponent > 0.1
    s = unstable[0]
    phi = steady_vector(GENERIC, s)
    tr = rk4(hamiltonian(GENERIC, 0.0), phi * (1 + 1e-6), 0.01, 40.0,
             alpha=GENERIC.alpha, beta=GENERIC.beta, saturable=True)
    dev = np.abs(np.abs(tr.states[:, 0]) - s.amplitude)
    assert dev[0] < 1e-5 and dev[-1] > 1e-2
    # the steady vector is a fixed point of the rotating-frame flow
    tr = rk4(hamiltonian(GENERIC, 0.0), phi, 0.001, 0.1, alpha=GENERIC.alpha, beta=GENERIC.beta, saturable=True)
    np.testing.assert_allclose(tr.final, phi * np.exp(-1j * s.omega_s * 0.1), atol=1e-9)


def test_pure_loss_zero_solution_is_stable(nep):
    ok, exponent = stability_of(zero_solution(nep.with_(alpha=0.0, beta=1.0)), nep.with_(alpha=0.0, beta=1.0))
    assert ok and exponent < 0


def test_steady_map_regions(nep):
    m = steady_map(nep, [0.0, 5.0], [2.0, 6.0], T=100.0)
    assert m.amplitude.shape == (2, 2)
    assert np.all(m.amplitude[0] < 1e-6)  # alpha = 0
    assert m.amplitude[1, 1] < 1e-6  # beta > alpha
    assert m.amplitude[1, 0] > 0.1 and not m.diverged.any()
    with pytest.raises(ValueError):
        steady_map(nep, [np.nan], [1.0])
