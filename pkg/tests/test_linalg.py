import numpy as np
import pytest
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nhdicke.linalg import (
    ConvergenceError,
    Polynomial,
    TrackingError,
    as_matrix,
    eig_full,
    eigvals,
    geometric_multiplicity,
    hessenberg,
    match_step,
    null_space,
    poly_roots,
    schur,
    sort_order,
    track_bands,
)


def random_complex(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        as_matrix(np.ones((2, 3)))
    with pytest.raises(ValueError):
        as_matrix(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_diagonal_matrix():
    es = eig_full(np.diag([1.0, 2j, -3.0]))
    np.testing.assert_allclose(es.values, [-3.0, 2j, 1.0], atol=1e-14)
    np.testing.assert_allclose(np.abs(es.right), np.eye(3)[:, [2, 1, 0]], atol=1e-14)
    assert not es.is_defective


def test_symmetric_tridiagonal():
    s = 1 / np.sqrt(2)
    es = eig_full([[0, s, 0], [s, 0, s], [0, s, 0]])
    np.testing.assert_allclose(es.values, [-1, 0, 1], atol=1e-13)


def test_jordan_block_is_defective():
    m = np.array([[0.0, 1.0], [0.0, 0.0]])
    es = eig_full(m)
    np.testing.assert_allclose(es.values, [0, 0], atol=1e-12)
    assert es.is_defective
    assert geometric_multiplicity(m, 0.0) == 1


def test_hessenberg_and_schur_factorisations(rng):
    a = random_complex(rng, 7)
    h, q = hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0)
    np.testing.assert_allclose(q @ h @ q.conj().T, a, atol=1e-12)
    t, z = schur(a)
    assert np.allclose(np.tril(t, -1), 0)
    np.testing.assert_allclose(z @ t @ z.conj().T, a, atol=1e-12)
    np.testing.assert_allclose(z.conj().T @ z, np.eye(7), atol=1e-12)


def test_schur_budget_is_enforced(rng):
    with pytest.raises(ConvergenceError):
        schur(random_complex(rng, 20), max_sweeps=0)


@pytest.mark.parametrize("n", [3, 8, 40, 120])
def test_eigenvalues_match_lapack(rng, n):
    a = random_complex(rng, n)
    ours = np.sort_complex(eigvals(a))
    ref = np.sort_complex(scipy.linalg.eigvals(a))
    np.testing.assert_allclose(ours, ref, atol=1e-9 * np.linalg.norm(a))


@pytest.mark.parametrize("n", [3, 5, 8, 60])
def test_residuals_and_normalisation(rng, n):
    a = random_complex(rng, n)
    es = eig_full(a)
    norm = np.linalg.norm(a, 2)
    for i in range(n):
        assert np.linalg.norm(a @ es.right[:, i] - es.values[i] * es.right[:, i]) <= 1e-10 * norm
        u = es.left[i] / np.linalg.norm(es.left[i])
        assert np.linalg.norm(u @ a - es.values[i] * u) <= 1e-10 * norm
    np.testing.assert_allclose(np.linalg.norm(es.right, axis=0), 1.0, atol=1e-13)
    np.testing.assert_allclose(es.left @ es.right, np.eye(n), atol=1e-9)
    assert es.left_method == "inverse"


@given(n=st.integers(3, 8), seed=st.integers(0, 2 ** 32 - 1))
def test_reconstruction_property(n, seed):
    a = random_complex(np.random.default_rng(seed), n)
    es = eig_full(a)
    rel = np.linalg.norm(es.reconstruct() - a) / np.linalg.norm(a)
    assert rel < 1e-8


@given(n=st.integers(2, 8), seed=st.integers(0, 2 ** 32 - 1))
def test_hermitian_property(n, seed):
    g = random_complex(np.random.default_rng(seed), n)
    h = g + g.conj().T
    es = eig_full(h)
    assert np.max(np.abs(es.values.imag)) < 1e-10
    np.testing.assert_allclose(es.left, es.right.conj().T, atol=1e-8)


def test_left_vectors_near_exceptional_point_use_adjoint():
    m = np.array([[0.0, 1.0], [1e-20, 0.0]], dtype=complex)
    es = eig_full(m)
    assert es.left_method == "adjoint"
    for i in range(2):
        u = es.left[i] / np.linalg.norm(es.left[i])
        assert np.linalg.norm(u @ m - es.values[i] * u) < 1e-9


def test_sort_order_breaks_ties_by_imaginary_part():
    v = np.array([1 + 1j, 1 - 1j, -2 + 0j])
    np.testing.assert_array_equal(sort_order(v), [2, 1, 0])


def test_null_space_examples():
    assert len(null_space(np.zeros((2, 2)))) == 2
    basis = null_space(np.diag([0.0, 1.0]))
    assert len(basis) == 1
    np.testing.assert_allclose(np.abs(basis[0]), [1, 0], atol=1e-14)
    assert null_space(np.eye(3)) == []


def test_polynomial_basics():
    with pytest.raises(ValueError):
        Polynomial([0.0, 0.0])
    p = Polynomial([-1.0, 0.0, 1.0, 0.0])
    assert p.degree == 2 and p.is_real
    assert p(2.0) == 3.0 and p.derivative(2.0) == 4.0
    np.testing.assert_allclose(poly_roots(p), [-1, 1], atol=1e-14)


def test_quintic_with_fivefold_root():
    p = Polynomial.from_roots([1.0] * 5, leading=-1.0)
    np.testing.assert_allclose(p.coefficients, [1, -5, 10, -10, 5, -1])
    r = poly_roots(p)
    assert np.max(np.abs(r - 1)) < 1e-2  # multiplicity 5 splits by eps**(1/5)
    assert np.max(np.abs(p(r))) < 1e-9


def test_growth_cubic_at_zero_detuning():
    # Y^3 + Y = 0 for delta = gamma = 0, kappa = 1
    r = poly_roots([0.0, 1.0, 0.0, 1.0])
    np.testing.assert_allclose(np.sort_complex(r), [-1j, 0, 1j], atol=1e-14)
    assert np.max(np.abs(Polynomial([0.0, 1.0, 0.0, 1.0])(r))) < 1e-9


def test_zero_roots_are_stripped():
    r = poly_roots([0.0, 0.0, -4.0, 0.0, 1.0])
    np.testing.assert_allclose(np.sort_complex(r), [-2, 0, 0, 2], atol=1e-13)


@given(roots=arrays(complex, st.integers(1, 6),
                    elements=st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)))
def test_roots_of_constructed_polynomial(roots):
    # keep roots separated so the comparison is well conditioned
    d = np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots))
    if d.min() < 0.1:
        return
    found = poly_roots(Polynomial.from_roots(roots))
    cost = np.abs(found[:, None] - roots[None, :])
    r, c = linear_sum_assignment(cost)
    assert len(found) == len(roots)
    assert cost[r, c].max() < 1e-9


def test_tracking_constant_sweep():
    es = eig_full(np.diag([1.0, 2.0, 3.0]))
    tr = track_bands([es] * 5)
    np.testing.assert_allclose(tr.values, np.tile([1.0, 2.0, 3.0], (5, 1)))
    assert tr.flagged == []


def test_tracking_follows_crossing_levels():
    s = np.linspace(-1, 1, 41)
    sweep = [eig_full(np.diag([x + 0.3j, -x - 0.3j])) for x in s]
    tr = track_bands(sweep)
    # the state starting at -1 + 0.3i keeps its imaginary part through the crossing
    np.testing.assert_allclose(tr.values[:, 0].imag, 0.3, atol=1e-14)
    np.testing.assert_allclose(tr.values[:, 0].real, s, atol=1e-14)
    sorted_first = np.array([es.values[0] for es in sweep])
    assert np.any(np.abs(sorted_first.imag + 0.3) < 1e-12)


def test_tracking_ambiguity():
    a = eig_full(np.diag([0.0, 1.0]))
    b = eig_full(np.diag([0.5, 0.5 + 1e-3]))
    with pytest.raises(TrackingError):
        track_bands([a, b])
    tr = track_bands([a, b], strict=False)
    assert tr.flagged == [1]


def test_match_step_flags_ambiguous():
    perm, ok = match_step(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    assert list(perm) == [1, 0] and ok
    _, ok = match_step(np.array([0.0, 1.0]), np.array([0.5, 0.51]))
    assert not ok
