import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quadfeas.core import (
    DimensionError,
    HermitianMatrix,
    aligned_delta,
    as_vector,
    equiv_distance,
    equiv_distance_sq_fast,
    hermitian_inner,
    optimal_phase,
    outer_difference,
    symmetric_outer,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def complex_pairs(draw, max_n=5):
    n = draw(st.integers(1, max_n))
    parts = [draw(arrays(np.float64, n, elements=finite)) for _ in range(4)]
    return parts[0] + 1j * parts[1], parts[2] + 1j * parts[3]


e1 = np.array([1, 0], dtype=complex)
e2 = np.array([0, 1], dtype=complex)


# -- vectors and Hermitian storage ----------------------------------------------


def test_as_vector_rejects_bad_input():
    with pytest.raises(ValueError):
        as_vector([])
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vector([[1, 2]])
    with pytest.raises(DimensionError):
        as_vector([1, 2], n=3)


def test_as_vector_is_immutable():
    v = as_vector([1, 2j])
    with pytest.raises(ValueError):
        v[0] = 3


def test_hermitian_round_trip(cvec):
    a = cvec(16).reshape(4, 4)
    a = a + a.conj().T
    h = HermitianMatrix.from_full(a)
    assert h.upper.size == 10
    full = h.full()
    assert np.array_equal(full, full.conj().T)
    np.testing.assert_allclose(full, a, atol=1e-15)
    assert HermitianMatrix.from_full(full) == h


def test_hermitian_storage_order_is_row_major():
    h = HermitianMatrix(3, [1, 2, 3, 4, 5, 6])
    expected = np.array([[1, 2, 3], [2, 4, 5], [3, 5, 6]], dtype=complex)
    assert np.array_equal(h.full(), expected)


def test_hermitian_rejects_complex_diagonal():
    with pytest.raises(ValueError, match="non-real diagonal"):
        HermitianMatrix(2, [1 + 1j, 0, 1])


def test_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        HermitianMatrix.from_full(np.array([[0, 1], [2, 0]]))
    with pytest.raises(DimensionError):
        HermitianMatrix(2, [1, 2])


# -- inner product and outer products -------------------------------------------


def test_hermitian_inner_identity():
    assert hermitian_inner(np.eye(2), np.eye(2)) == 2.0
    assert hermitian_inner(np.diag([3.0, -1.0]), np.zeros((2, 2))) == 0.0


def test_hermitian_inner_against_double_loop():
    a = np.array([[1, 1j], [-1j, 2]])
    m = np.array([[0, 1], [1, 0]], dtype=complex)
    oracle = sum(np.conj(a[i, j]) * m[i, j] for i in range(2) for j in range(2))
    assert hermitian_inner(a, m) == pytest.approx(oracle.real, abs=1e-15)
    assert abs(oracle.imag) < 1e-15


def test_hermitian_inner_dimension_mismatch():
    with pytest.raises(DimensionError):
        hermitian_inner(np.eye(2), np.eye(3))


def test_outer_difference_basis():
    assert np.array_equal(outer_difference(e1, e2), np.diag([1.0, -1.0]))
    assert not np.any(outer_difference(e1 + 2j * e2, e1 + 2j * e2))


def test_outer_difference_random(cvec):
    x, y = cvec(3), cvec(3)
    d = outer_difference(x, y)
    oracle = np.array([[x[i] * np.conj(x[j]) - y[i] * np.conj(y[j]) for j in range(3)] for i in range(3)])
    np.testing.assert_allclose(d, oracle, atol=1e-14)
    assert np.allclose(d, d.conj().T)
    with pytest.raises(DimensionError):
        outer_difference(x, cvec(2))


def test_symmetric_outer(cvec):
    assert np.array_equal(symmetric_outer(e1, e1), 2 * np.outer(e1, e1))
    assert not np.any(symmetric_outer(np.zeros(2), e2))
    # with u = x - w, v = x + w and |w| on the orbit of z: [[u, v]] = 2 (x x^H - z z^H)
    x, z = cvec(4), cvec(4)
    w = np.exp(1j * optimal_phase(x, z)) * z
    np.testing.assert_allclose(symmetric_outer(x - w, x + w), 2 * outer_difference(x, z), atol=1e-12)


# -- distance ----------------------------------------------------------------------


def test_distance_examples(cvec):
    x = cvec(3)
    assert equiv_distance(x, x) == 0.0
    assert equiv_distance(x, np.exp(0.9j) * x) == pytest.approx(0.0, abs=1e-14)
    assert equiv_distance(e1, e2) == pytest.approx(np.sqrt(2), rel=1e-15)


def test_fast_path_needs_coefficient_two(rng):
    """The closed form agrees with the direct sum only with coefficient 2."""
    worst2 = 0.0
    worst1 = np.inf
    for _ in range(10_000):
        n = rng.integers(1, 7)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        direct = equiv_distance(x, y) ** 2
        fast = equiv_distance_sq_fast(x, y)
        # relative to the natural scale; d^2 itself can cancel to ~0 when n = 1
        scale = np.linalg.norm(x) ** 4 + np.linalg.norm(y) ** 4
        worst2 = max(worst2, abs(direct - fast) / scale)
        one = scale - abs(np.vdot(y, x)) ** 2
        worst1 = min(worst1, abs(direct - one) / scale)
    assert worst2 <= 1e-10
    # the coefficient-1 variant is off by |<x, y>|^2, never negligibly
    assert worst1 > 1e-8


@settings(max_examples=200, deadline=None)
@given(complex_pairs(), st.floats(0, 2 * np.pi))
def test_distance_phase_invariance(pair, theta):
    x, y = pair
    assert equiv_distance(x, np.exp(1j * theta) * y) == pytest.approx(equiv_distance(x, y), rel=1e-12, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(complex_pairs())
def test_distance_symmetric_and_nonnegative(pair):
    x, y = pair
    assert equiv_distance(x, y) >= 0
    assert equiv_distance(x, y) == equiv_distance(y, x)


@settings(max_examples=200, deadline=None)
@given(complex_pairs())
def test_norm_identity(pair):
    x, _ = pair
    xx = np.outer(x, x.conj())
    nx4 = np.linalg.norm(x) ** 4
    assert abs(np.sum(np.abs(xx) ** 2) - nx4) <= 1e-10 * max(nx4, 1e-2)


# -- phase alignment -----------------------------------------------------------------


def test_optimal_phase_examples(cvec):
    x = cvec(3)
    assert optimal_phase(x, x) == pytest.approx(0.0, abs=1e-12)
    assert optimal_phase(x, -x) == pytest.approx(np.pi, abs=1e-12)
    assert np.allclose(aligned_delta(x, -x).delta, 0, atol=1e-14)
    assert np.allclose(aligned_delta(x, x).delta, 0)
    np.testing.assert_allclose(aligned_delta(2 * x, x).delta, x, atol=1e-14)
    assert aligned_delta(2 * x, x).phase == pytest.approx(0.0, abs=1e-12)


def test_optimal_phase_orthogonal_tie_is_zero():
    assert optimal_phase(e1, e2) == 0.0


def test_optimal_phase_range(cvec):
    for _ in range(200):
        phi = optimal_phase(cvec(3), cvec(3))
        assert 0.0 <= phi < 2 * np.pi


def test_optimal_phase_grid_search(cvec):
    x, z = cvec(4), cvec(4)
    theta = np.linspace(0, 2 * np.pi, 10**6, endpoint=False)
    # ||x - e^{it} z||^2 = |x|^2 + |z|^2 - 2 Re(e^{-it} <x, z>)
    ip = np.vdot(z, x)
    obj = np.vdot(x, x).real + np.vdot(z, z).real - 2 * np.real(np.exp(-1j * theta) * ip)
    best = obj.min()
    phi = optimal_phase(x, z)
    at_phi = np.linalg.norm(x - np.exp(1j * phi) * z) ** 2
    assert at_phi <= best + 1e-5


def test_aligned_delta_beats_random_phases(cvec):
    x, z = cvec(5), cvec(5)
    al = aligned_delta(x, z)
    for t in np.random.default_rng(1).uniform(0, 2 * np.pi, 100):
        assert np.linalg.norm(al.delta) <= np.linalg.norm(x - np.exp(1j * t) * z) + 1e-14


@settings(max_examples=300, deadline=None)
@given(complex_pairs())
def test_alignment_identities(pair):
    x, z = pair
    al = aligned_delta(x, z)
    w = np.exp(1j * al.phase) * z
    d = al.delta
    scale = max(1.0, np.linalg.norm(x) ** 2, np.linalg.norm(z) ** 2)
    # Im<Delta, x + w> vanishes
    assert abs(np.vdot(x + w, d).imag) <= 1e-10 * scale
    # split identity x x^H - w w^H + D D^H = x D^H + D x^H
    lhs = np.outer(x, x.conj()) - np.outer(w, w.conj()) + np.outer(d, d.conj())
    rhs = np.outer(x, d.conj()) + np.outer(d, x.conj())
    assert np.abs(lhs - rhs).max() <= 1e-10 * scale
    # alignment bound: (1/2)||D D^H||^2 <= ||x x^H - z z^H||^2
    assert 0.5 * np.linalg.norm(d) ** 4 <= equiv_distance(x, z) ** 2 + 1e-10 * scale**2
