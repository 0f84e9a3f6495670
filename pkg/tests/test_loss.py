import numpy as np
import pytest

from quadfeas._rng import complex_normal, derive_rng
from quadfeas.core import DimensionError
from quadfeas.loss import (
    GRAD_CONST,
    LossProblem,
    directional_derivative,
    fd_directional,
    fd_gradient,
    fd_second_difference,
    gradient_norm,
    hessian_matrix,
    hessian_min_eig,
    hessian_quadratic_form,
    loss,
    real_hessian,
    wirtinger_gradient,
)
from quadfeas.measurement import MeasurementVector, ensemble_from_matrices, forward_map

from conftest import make_problem


def _off_orbit_point(rng, n):
    # random norm in [0.5, 2] keeps first derivatives away from zero
    x = complex_normal(rng, n)
    return x / np.linalg.norm(x) * rng.uniform(0.5, 2.0)


def test_loss_examples():
    p, z = make_problem(4, 12, 1)
    assert loss(p, z) == pytest.approx(0.0, abs=1e-28)
    assert loss(p, np.exp(1.3j) * z) == pytest.approx(0.0, abs=1e-26)
    c = p.observations.values
    assert loss(p, np.zeros(4)) == pytest.approx(np.mean(c**2), rel=1e-15)
    with pytest.raises(DimensionError):
        loss(p, np.ones(3))


def test_problem_size_mismatch():
    p, _ = make_problem(2, 5, 0)
    with pytest.raises(DimensionError):
        LossProblem(p.ensemble, MeasurementVector(np.zeros(4)))


def test_gradient_zeros():
    p, z = make_problem(4, 12, 2)
    assert np.linalg.norm(wirtinger_gradient(p, z).g_x) <= 1e-14
    assert not np.any(wirtinger_gradient(p, np.zeros(4)).g_x)
    for theta in np.linspace(0, 2 * np.pi, 7):
        assert np.linalg.norm(wirtinger_gradient(p, np.exp(1j * theta) * z).g_x) <= 1e-10


def test_gradient_constant_is_two():
    """d/dt f(x + t D) = 2 Re <g, D> holds with GRAD_CONST = 2 and fails with 1."""
    p, _ = make_problem(4, 12, 3)
    rng = np.random.default_rng(0)
    x, d = _off_orbit_point(rng, 4), complex_normal(rng, 4)
    fd = fd_directional(p, x, d)
    assert GRAD_CONST == 2.0
    assert directional_derivative(p, x, d) == pytest.approx(fd, rel=1e-6)
    assert directional_derivative(p, x, d) / 2 != pytest.approx(fd, rel=1e-2)


def test_fd_gradient_matches_real_gradient():
    p, _ = make_problem(3, 10, 4)
    x = _off_orbit_point(np.random.default_rng(1), 3)
    g = wirtinger_gradient(p, x)
    np.testing.assert_allclose(fd_gradient(p, x), g.real_gradient, rtol=1e-6, atol=1e-8)
    assert gradient_norm(p, x) == pytest.approx(np.linalg.norm(fd_gradient(p, x)), rel=1e-6)


def test_fd_gradient_is_second_order():
    p, _ = make_problem(3, 10, 5)
    x = _off_orbit_point(np.random.default_rng(2), 3)
    exact = wirtinger_gradient(p, x).real_gradient
    e1 = np.linalg.norm(fd_gradient(p, x, h=1e-2) - exact)
    e2 = np.linalg.norm(fd_gradient(p, x, h=5e-3) - exact)
    assert 3.0 <= e1 / e2 <= 5.0


def test_fd_gradient_constant_function():
    ens = ensemble_from_matrices([np.diag([1.0, 2.0])])
    x = np.array([0.3 + 0.1j, -0.2j])
    p = LossProblem(ens, forward_map(ens, x))
    assert np.linalg.norm(fd_gradient(p, x)) <= 1e-9


def test_gradient_pairing_identity():
    """2 Re <g, D> = (2/m) sum <A_i, x x^H - z z^H> <A_i, x D^H + D x^H>."""
    p, z = make_problem(5, 20, 6)
    rng = np.random.default_rng(3)
    x, d = complex_normal(rng, 5), complex_normal(rng, 5)
    a = p.ensemble.matrices
    r = np.einsum("kij,ji->k", a, np.outer(x, x.conj()) - np.outer(z, z.conj())).real
    s = np.einsum("kij,ji->k", a, np.outer(x, d.conj()) + np.outer(d, x.conj())).real
    assert directional_derivative(p, x, d) == pytest.approx(2.0 / p.m * np.sum(r * s), rel=1e-9)


def test_quadratic_form_examples():
    p, _ = make_problem(4, 12, 7)
    rng = np.random.default_rng(4)
    x, d = complex_normal(rng, 4), complex_normal(rng, 4)
    assert hessian_quadratic_form(p, x, np.zeros(4)) == 0.0
    q = hessian_quadratic_form(p, x, d)
    assert hessian_quadratic_form(p, x, -2.5 * d) == pytest.approx(6.25 * q, rel=1e-12)
    assert q == pytest.approx(fd_second_difference(p, x, d), rel=1e-4)


def test_scalar_case_against_closed_form():
    """n = 1: f(x) = (a |x|^2 - c)^2, Hessian in (Re x, Im x) known in closed form."""
    a, c = 1.7, 0.4
    ens = ensemble_from_matrices([np.array([[a]])])
    p = LossProblem(ens, MeasurementVector([c]))
    x = 0.6 - 0.3j
    u, v = x.real, x.imag
    s = a * (u * u + v * v) - c
    # d^2/du^2 (a(u^2+v^2) - c)^2 = 8 a^2 u^2 + 4 a s, mixed term 8 a^2 u v
    hr = np.array([[8 * a * a * u * u + 4 * a * s, 8 * a * a * u * v], [8 * a * a * u * v, 8 * a * a * v * v + 4 * a * s]])
    np.testing.assert_allclose(real_hessian(p, [x]), hr, rtol=1e-12)
    for d in (1.0, 1j, 0.3 - 0.8j):
        vec = np.array([d.real, d.imag]) if isinstance(d, complex) else np.array([d, 0.0])
        assert hessian_quadratic_form(p, [x], [d]) == pytest.approx(vec @ hr @ vec, rel=1e-12)


def test_hessian_matrix_consistency():
    p, _ = make_problem(4, 15, 8)
    rng = np.random.default_rng(5)
    x = complex_normal(rng, 4)
    h = hessian_matrix(p, x)
    assert np.abs(h - h.conj().T).max() <= 1e-10
    for _ in range(20):
        d = complex_normal(rng, 4)
        v = np.concatenate([d, d.conj()])
        assert np.vdot(v, h @ v).real == pytest.approx(hessian_quadratic_form(p, x, d), rel=1e-8)
    v0 = np.zeros(8)
    assert np.vdot(v0, h @ v0) == 0


def test_min_eig_against_rayleigh_oracle():
    p, _ = make_problem(3, 12, 9)
    rng = np.random.default_rng(6)
    x = 0.2 * complex_normal(rng, 3)  # near the origin: an indefinite Hessian
    lam = hessian_min_eig(p, x)
    assert lam == pytest.approx(np.linalg.eigvalsh(real_hessian(p, x))[0] / 2, rel=1e-10)
    ds = complex_normal(rng, (10_000, 3))
    ray = min(hessian_quadratic_form(p, x, d) / (2 * np.vdot(d, d).real) for d in ds)
    assert ray >= lam - 1e-12
    assert ray == pytest.approx(lam, rel=0.1)


def test_derivative_oracles_over_50_instances():
    rng = derive_rng(77, 0)
    for t in range(50):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 31))
        p, _ = make_problem(n, m, 500 + t)
        x, d = _off_orbit_point(rng, n), complex_normal(rng, n)
        assert directional_derivative(p, x, d) == pytest.approx(fd_directional(p, x, d), rel=1e-5)
        assert hessian_quadratic_form(p, x, d) == pytest.approx(fd_second_difference(p, x, d), rel=1e-4)


def test_values_are_real():
    p, _ = make_problem(3, 8, 10)
    x = complex_normal(np.random.default_rng(7), 3)
    for v in (loss(p, x), hessian_quadratic_form(p, x, x), directional_derivative(p, x, x)):
        assert isinstance(v, float)


def test_fd_rejects_bad_step():
    p, z = make_problem(2, 3, 0)
    for fn in (lambda: fd_gradient(p, z, h=0), lambda: fd_second_difference(p, z, z, h=-1.0)):
        with pytest.raises(ValueError):
            fn()
