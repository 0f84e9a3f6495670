"""Greedy delta-nets on the complex unit sphere and the covering sandwich.

For a Hermitian ``A`` the quantity ``|<A, x1 x1^H - x2 x2^H>|`` is
``|q(x1) - q(x2)|`` with ``q(x) = x^H A x``, so its supremum over a point set
is ``max q - min q`` over that set. Over the whole sphere it equals
``lambda_max(A) - lambda_min(A)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .._rng import derive_rng, unit_sphere
from ..core import as_hermitian

__all__ = ["CoveringError", "DeltaNet", "CoveringReport", "build_net", "covering_net_check", "spread"]

MAX_DIM = 3
POOL_SIZE = 10**5
PROBE_SIZE = 10**6


class CoveringError(RuntimeError):
    """The net cannot be built or certified within the candidate budget."""


@dataclass(frozen=True)
class DeltaNet:
    n: int
    delta: float
    points: np.ndarray = field(repr=False)
    covering_radius: float  # max probe-to-net distance
    pool_size: int
    probe_size: int

    @property
    def size(self) -> int:
        return self.points.shape[0]


def _real(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag], axis=-1)


def _greedy(pool: np.ndarray, chosen: list, mind: np.ndarray, stop: float) -> float:
    """Farthest-point insertion on unit vectors until ``max(mind) <= stop``."""
    # on the sphere ||a - b||^2 = 2 - 2 a.b
    while True:
        i = int(np.argmax(mind))
        if mind[i] <= stop:
            return float(mind[i])
        chosen.append(i)
        d = np.sqrt(np.maximum(2.0 - 2.0 * (pool @ pool[i]), 0.0))
        np.minimum(mind, d, out=mind)


@functools.lru_cache(maxsize=16)
def build_net(n: int, delta: float, seed: int = 0, pool_size: int = POOL_SIZE, probe_size: int = PROBE_SIZE) -> DeltaNet:
    """Greedy delta-net of the unit sphere in C^n, certified on random probes.

    Farthest-point insertion runs over a pool of random sphere points until
    the pool is covered at a working radius; the covering radius of the
    resulting net is then measured on an independent probe set. While the
    probes show a radius above `delta`, the working radius is tightened and
    insertion continues.

    Raises
    ------
    CoveringError
        For ``n > 3`` or ``delta`` outside ``(0, 1/2)``, or when the pool is
        exhausted before the probes certify radius `delta`.
    """
    if not 1 <= n <= MAX_DIM:
        raise CoveringError(f"delta-nets are only built for n <= {MAX_DIM} (sphere of real dimension 2n-1)")
    if not 0 < delta < 0.5:
        raise CoveringError("delta must lie in (0, 1/2)")
    pool = _real(unit_sphere(derive_rng(seed, 40), n, pool_size))
    probes = _real(unit_sphere(derive_rng(seed, 41), n, probe_size))
    chosen = [0]
    mind = np.sqrt(np.maximum(2.0 - 2.0 * (pool @ pool[0]), 0.0))
    work = delta
    while True:
        reached = _greedy(pool, chosen, mind, work)
        radius = float(cKDTree(pool[chosen]).query(probes, k=1)[0].max())
        if radius <= delta:
            break
        if reached <= 0.0 or len(chosen) >= pool_size:
            raise CoveringError(f"candidate pool exhausted at covering radius {radius:.4g} > {delta}")
        work *= 0.9
    pts = pool[chosen]
    return DeltaNet(n, float(delta), pts[:, :n] + 1j * pts[:, n:], radius, pool_size, probe_size)


def spread(a, points: np.ndarray) -> float:
    """``sup |<A, x1 x1^H - x2 x2^H>|`` over pairs drawn from `points`."""
    q = np.einsum("pi,ij,pj->p", points.conj(), a, points).real
    return float(q.max() - q.min())


@dataclass
class CoveringReport:
    n: int
    delta: float
    net_size: int
    covering_radius: float
    sup_net: float
    sup_dense: float
    sup_exact: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "net_delta": self.delta,
            "net_size": self.net_size,
            "covering_radius": self.covering_radius,
            "sup_net": self.sup_net,
            "sup_dense": self.sup_dense,
            "sup_exact": self.sup_exact,
            "lower": (1 - 2 * self.delta) * self.sup_dense,
            "upper": (1 + 2 * self.delta) * self.sup_dense,
            "holds": self.holds,
        }


def covering_net_check(a, delta: float, samples: int = PROBE_SIZE, seed: int = 0) -> CoveringReport:
    """Check ``(1-2d) sup_dense <= sup_net <= (1+2d) sup_dense`` for one matrix.

    ``sup_dense`` is taken over `samples` random sphere points;
    ``sup_exact`` (the eigenvalue spread) is reported alongside.
    """
    a = as_hermitian(a)
    n = a.shape[0]
    net = build_net(n, float(delta), seed)
    dense = unit_sphere(derive_rng(seed, 42), n, samples)
    sup_net = spread(a, net.points)
    sup_dense = spread(a, dense)
    ev = np.linalg.eigvalsh(a)
    sup_exact = float(ev[-1] - ev[0])
    slack = 1e-12 * max(1.0, sup_exact)
    holds = (1 - 2 * delta) * sup_dense - slack <= sup_net <= (1 + 2 * delta) * sup_dense + slack
    return CoveringReport(n, float(delta), net.size, net.covering_radius, sup_net, sup_dense, sup_exact, bool(holds))
