"""The l2 loss of the quadratic feasibility problem and its derivatives.

For an ensemble ``{A_i}`` and observations ``c``,

    f(x) = (1/m) sum_i (x^H A_i x - c_i)^2 .

Derivative conventions (all checked against finite differences in tests):

* ``g_x = df/d(conj x) = (2/m) sum_i r_i A_i x`` with residual
  ``r_i = x^H A_i x - c_i``. The directional derivative along ``Delta`` is
  ``2 Re <g_x, Delta>`` and the steepest-descent direction in the real
  coordinates ``(Re x, Im x)`` is ``-2 g_x``.
* ``Q(x)[Delta] = d^2/dt^2 f(x + t Delta) at t = 0
  = (1/m) sum_i 8 Re(Delta^H A_i x)^2 + 4 r_i Delta^H A_i Delta``.
* The complex Hessian ``H = [[P, S], [conj S, conj P]]`` with
  ``P = (2/m) sum (A_i x)(A_i x)^H + r_i A_i`` and
  ``S = (2/m) sum (A_i x)(A_i x)^T`` satisfies
  ``[Delta; conj Delta]^H H [Delta; conj Delta] = Q(x)[Delta]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError, as_vector
from .measurement import MeasurementEnsemble, MeasurementVector, quadratic_forms

__all__ = [
    "GRAD_CONST",
    "LossProblem",
    "WirtingerGradient",
    "loss",
    "residuals",
    "wirtinger_gradient",
    "gradient_norm",
    "directional_derivative",
    "hessian_quadratic_form",
    "hessian_matrix",
    "real_hessian",
    "hessian_min_eig",
    "fd_gradient",
    "fd_directional",
    "fd_second_difference",
]

# overall factor in g_x = (GRAD_CONST/m) sum r_i A_i x, fixed by d|w|^2 = 2 Re(conj(w) dw)
GRAD_CONST = 2.0


@dataclass(frozen=True)
class LossProblem:
    ensemble: MeasurementEnsemble
    observations: MeasurementVector

    def __post_init__(self):
        if self.ensemble.m != self.observations.m:
            raise DimensionError(
                f"{self.ensemble.m} matrices but {self.observations.m} observations"
            )

    @property
    def n(self) -> int:
        return self.ensemble.n

    @property
    def m(self) -> int:
        return self.ensemble.m

    def vector(self, x) -> np.ndarray:
        x = as_vector(x)
        if x.size != self.n:
            raise DimensionError(f"vector has length {x.size}, problem has n={self.n}")
        return x


@dataclass(frozen=True)
class WirtingerGradient:
    g_x: np.ndarray

    @property
    def g_xbar(self) -> np.ndarray:
        return self.g_x.conj()

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.g_x, self.g_x.conj()])

    @property
    def real_gradient(self) -> np.ndarray:
        """Gradient w.r.t. (Re x, Im x) packed as a complex vector."""
        return 2.0 * self.g_x


def residuals(p: LossProblem, x) -> np.ndarray:
    x = p.vector(x)
    return quadratic_forms(p.ensemble.matrices, x) - p.observations.values


def loss(p: LossProblem, x) -> float:
    r = residuals(p, x)
    return float(np.mean(r * r))


def _grad(p: LossProblem, x: np.ndarray):
    ax = p.ensemble.matrices @ x
    r = (ax @ x.conj()).real - p.observations.values
    return (GRAD_CONST / p.m) * (r @ ax), r, ax


def wirtinger_gradient(p: LossProblem, x) -> WirtingerGradient:
    x = p.vector(x)
    g, _, _ = _grad(p, x)
    return WirtingerGradient(g)


def gradient_norm(p: LossProblem, x) -> float:
    """Euclidean norm of the gradient in the 2n real coordinates, ``2 ||g_x||``."""
    return float(2.0 * np.linalg.norm(wirtinger_gradient(p, x).g_x))


def directional_derivative(p: LossProblem, x, delta) -> float:
    """``d/dt f(x + t delta)`` at ``t = 0``."""
    delta = p.vector(delta)
    return float(2.0 * np.vdot(delta, wirtinger_gradient(p, x).g_x).real)


def hessian_quadratic_form(p: LossProblem, x, delta) -> float:
    x = p.vector(x)
    delta = p.vector(delta)
    mats = p.ensemble.matrices
    ax = mats @ x
    r = (ax @ x.conj()).real - p.observations.values
    s = ax @ delta.conj()  # Delta^H A_i x
    b = ((mats @ delta) @ delta.conj()).real  # Delta^H A_i Delta
    return float(np.mean(8.0 * s.real**2 + 4.0 * r * b))


def hessian_matrix(p: LossProblem, x) -> np.ndarray:
    """The ``2n x 2n`` complex Hessian in the variables ``(x, conj x)``.

    Meant for small ``n`` (diagnostics only); cost is O(m n^2).
    """
    x = p.vector(x)
    mats = p.ensemble.matrices
    ax = mats @ x
    r = (ax @ x.conj()).real - p.observations.values
    scale = GRAD_CONST / p.m
    P = scale * (np.einsum("ki,kj->ij", ax, ax.conj()) + np.tensordot(r, mats, axes=1))
    S = scale * np.einsum("ki,kj->ij", ax, ax)
    H = np.block([[P, S], [S.conj(), P.conj()]])
    return 0.5 * (H + H.conj().T)


def real_hessian(p: LossProblem, x) -> np.ndarray:
    """Hessian of ``f`` in the real coordinates ``(Re x, Im x)``."""
    n = p.n
    eye = np.eye(n)
    J = np.block([[eye, 1j * eye], [eye, -1j * eye]])
    Hr = (J.conj().T @ hessian_matrix(p, x) @ J).real
    return 0.5 * (Hr + Hr.T)


def hessian_min_eig(p: LossProblem, x) -> float:
    """``min over Delta of Q(x)[Delta] / ||[Delta; conj Delta]||^2``.

    Equals the smallest eigenvalue of :func:`hessian_matrix`, i.e. half the
    smallest eigenvalue of :func:`real_hessian`.
    """
    return float(np.linalg.eigvalsh(hessian_matrix(p, x))[0])


# -- finite-difference oracles (use only loss evaluations) ---------------------


def fd_gradient(p: LossProblem, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient in the real coordinates, packed complex.

    Entry j is ``df/d(Re x_j) + i df/d(Im x_j)``, which equals ``2 g_x``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x = p.vector(x)
    out = np.empty(p.n, dtype=np.complex128)
    for j in range(p.n):
        e = np.zeros(p.n, dtype=np.complex128)
        e[j] = h
        d_re = (loss(p, x + e) - loss(p, x - e)) / (2 * h)
        e[j] = 1j * h
        d_im = (loss(p, x + e) - loss(p, x - e)) / (2 * h)
        out[j] = d_re + 1j * d_im
    return out


def fd_directional(p: LossProblem, x, delta, h: float = 1e-6) -> float:
    if not h > 0:
        raise ValueError("h must be positive")
    x = p.vector(x)
    delta = p.vector(delta)
    return (loss(p, x + h * delta) - loss(p, x - h * delta)) / (2 * h)


def fd_second_difference(p: LossProblem, x, delta, h: float = 1e-4) -> float:
    if not h > 0:
        raise ValueError("h must be positive")
    x = p.vector(x)
    delta = p.vector(delta)
    return (loss(p, x + h * delta) - 2 * loss(p, x) + loss(p, x - h * delta)) / (h * h)
