"""Complex vectors, Hermitian matrices and the phase-invariant metric.

Vectors are plain 1-D ``complex128`` numpy arrays. Hermitian matrices are kept
as full ``(n, n)`` arrays for arithmetic; :class:`HermitianMatrix` is the
packed (upper-triangle) form used for storage and exchange.

Inner products follow ``<u, v> = sum_i u_i conj(v_i)`` for vectors and
``<A, M> = trace(A^H M)`` for matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "HermitianMatrix",
    "AlignedDifference",
    "as_vector",
    "as_hermitian",
    "hermitian_inner",
    "outer_difference",
    "symmetric_outer",
    "equiv_distance",
    "equiv_distance_sq_fast",
    "optimal_phase",
    "aligned_delta",
]


class DimensionError(ValueError):
    """Operands have incompatible dimensions."""


def as_vector(x, n: int | None = None) -> np.ndarray:
    """Return `x` as a read-only 1-D complex128 array.

    Raises
    ------
    ValueError
        If `x` is empty, not 1-D, or contains NaN/Inf.
    DimensionError
        If `n` is given and ``len(x) != n``.
    """
    arr = np.array(x, dtype=np.complex128, copy=True)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    if n is not None and arr.size != n:
        raise DimensionError(f"expected length {n}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    arr.flags.writeable = False
    return arr


def _pair(x, y):
    x = as_vector(x)
    y = as_vector(y)
    if x.size != y.size:
        raise DimensionError(f"dimension mismatch: {x.size} vs {y.size}")
    return x, y


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Hermitian matrix stored by its upper triangle.

    ``upper`` holds the ``n(n+1)/2`` entries on and above the diagonal in
    row-major order (the order of ``numpy.triu_indices(n)``). The lower
    triangle is the conjugate of the upper one, so :meth:`full` is exactly
    Hermitian by construction.
    """

    dim: int
    upper: np.ndarray

    def __post_init__(self):
        upper = np.array(self.upper, dtype=np.complex128, copy=True).ravel()
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if upper.size != self.dim * (self.dim + 1) // 2:
            raise DimensionError(
                f"expected {self.dim * (self.dim + 1) // 2} upper entries, got {upper.size}"
            )
        if not np.all(np.isfinite(upper)):
            raise ValueError("matrix has non-finite entries")
        iu = np.triu_indices(self.dim)
        if np.any(upper[iu[0] == iu[1]].imag != 0):
            raise ValueError("non-real diagonal")
        upper.flags.writeable = False
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_full(cls, a, atol: float = 1e-12) -> "HermitianMatrix":
        a = np.asarray(a, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
        if np.max(np.abs(a - a.conj().T), initial=0.0) > atol * scale:
            raise ValueError("matrix is not Hermitian")
        n = a.shape[0]
        upper = a[np.triu_indices(n)].copy()
        # diagonal of a numerically Hermitian matrix may carry roundoff imag parts
        diag = np.triu_indices(n)[0] == np.triu_indices(n)[1]
        upper[diag] = upper[diag].real
        return cls(n, upper)

    def full(self) -> np.ndarray:
        n = self.dim
        out = np.zeros((n, n), dtype=np.complex128)
        iu = np.triu_indices(n)
        out[iu] = self.upper
        out[(iu[1], iu[0])] = self.upper.conj()
        return out

    def __eq__(self, other):
        if not isinstance(other, HermitianMatrix):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.dim, self.upper.tobytes()))


def as_hermitian(a) -> np.ndarray:
    """Full-matrix view of a :class:`HermitianMatrix` or a square array."""
    if isinstance(a, HermitianMatrix):
        return a.full()
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def hermitian_inner(a, b) -> float:
    """Frobenius inner product ``trace(A^H M)`` of two Hermitian matrices.

    The result is real for Hermitian arguments; the imaginary roundoff of the
    raw sum is discarded.
    """
    a = as_hermitian(a)
    b = as_hermitian(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.vdot(a, b).real)


def outer_difference(x, y) -> np.ndarray:
    """The Hermitian matrix ``x x^H - y y^H``."""
    x, y = _pair(x, y)
    return np.outer(x, x.conj()) - np.outer(y, y.conj())


def symmetric_outer(u, v) -> np.ndarray:
    """The symmetric outer product ``[[u, v]] = u v^H + v u^H``."""
    u, v = _pair(u, v)
    uv = np.outer(u, v.conj())
    return uv + uv.conj().T


def equiv_distance(x, y) -> float:
    """Phase-invariant distance ``d(x, y) = ||x x^H - y y^H||_F``.

    Evaluated by the direct O(n^2) Frobenius sum.
    """
    diff = outer_difference(x, y)
    return float(np.sqrt(np.sum(diff.real**2 + diff.imag**2)))


def equiv_distance_sq_fast(x, y) -> float:
    """O(n) closed form ``||x||^4 + ||y||^4 - 2|<x, y>|^2`` of ``d(x, y)^2``.

    Loses relative accuracy through cancellation when ``x ~ y``; use
    :func:`equiv_distance` where that matters.
    """
    x, y = _pair(x, y)
    nx = np.vdot(x, x).real
    ny = np.vdot(y, y).real
    return float(max(nx * nx + ny * ny - 2.0 * abs(np.vdot(y, x)) ** 2, 0.0))


def optimal_phase(x, z) -> float:
    """Angle ``phi`` in ``[0, 2 pi)`` minimising ``||x - e^{i phi} z||_2``.

    The minimiser is ``arg <x, z>``. When ``<x, z> = 0`` every phase is
    optimal and 0 is returned.
    """
    x, z = _pair(x, z)
    ip = np.vdot(z, x)  # <x, z> = sum_i x_i conj(z_i)
    if ip == 0:
        return 0.0
    phi = float(np.angle(ip))
    if phi < 0:
        phi += 2.0 * np.pi
    # angle() can return exactly pi for negative reals; 2*pi wraps to 0
    return 0.0 if phi >= 2.0 * np.pi else phi


@dataclass(frozen=True)
class AlignedDifference:
    phase: float
    delta: np.ndarray


def aligned_delta(x, z) -> AlignedDifference:
    """``Delta = x - e^{i phi} z`` with ``phi`` from :func:`optimal_phase`."""
    x, z = _pair(x, z)
    phi = optimal_phase(x, z)
    delta = x - np.exp(1j * phi) * z
    delta.flags.writeable = False
    return AlignedDifference(phi, delta)
