"""Monte-Carlo estimates of stability constants and concentration.

The central statistic is the averaged, distance-normalised ratio

    V(x, y) = (1/m) sum_i <A_i, x x^H - y y^H>^2 / d(x, y)^2 ,

whose expectation is 1 for Hermitian Gaussian ensembles with unit variance.
Because ``<A_i, x x^H> = x^H A_i x``, the numerator is the mean squared
difference of the two observation vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._rng import derive_rng, derive_seed, unit_sphere
from ..core import DimensionError, as_vector
from ..measurement import MeasurementEnsemble, quadratic_forms, sample_ensemble

__all__ = [
    "DegenerateSampleError",
    "StabilityEstimate",
    "ConcentrationReport",
    "CrossTermReport",
    "ratio_v",
    "stability_estimate",
    "concentration_experiment",
    "concentration_trend",
    "count_inversions",
    "cross_term_statistic",
    "cross_term_experiment",
]

# pairs closer than this in d are skipped as degenerate
MIN_PAIR_DISTANCE = 1e-8
# alpha_hat at or below this is reported as "not injective"
INJECTIVITY_FLOOR = 1e-8


class DegenerateSampleError(RuntimeError):
    pass


def _batch_forms(mats: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """``x_p^H A_i x_p`` for a batch of vectors; shape (pairs, m)."""
    ax = np.einsum("kij,pj->pki", mats, xs)
    return np.einsum("pki,pi->pk", ax, xs.conj()).real


def _batch_distance_sq(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    # direct Frobenius sum of x x^H - y y^H for each pair
    diff = xs[:, :, None] * xs.conj()[:, None, :] - ys[:, :, None] * ys.conj()[:, None, :]
    return np.sum(diff.real**2 + diff.imag**2, axis=(1, 2))


def ratio_v(ens: MeasurementEnsemble, x, y) -> float:
    """The averaged ratio ``V(x, y)``; ``nan`` when ``d(x, y) = 0``."""
    x = as_vector(x, ens.n)
    y = as_vector(y, ens.n)
    diff = quadratic_forms(ens.matrices, x) - quadratic_forms(ens.matrices, y)
    d2 = _batch_distance_sq(x[None], y[None])[0]
    if d2 == 0:
        return float("nan")
    return float(np.mean(diff * diff) / d2)


@dataclass
class StabilityEstimate:
    """Empirical inner bounds on the constants of ``alpha d <= ||M(x)-M(y)|| <= beta d``.

    ``alpha_hat``/``beta_hat`` use the (1/m)-averaged statistic, so they
    concentrate near 1 for unit-variance Gaussian ensembles. Multiply by
    ``sqrt(m)`` (``unnormalized_scale``) for the raw sum-of-squares form.
    """

    alpha_hat: float
    beta_hat: float
    num_pairs: int
    mean_ratio: float
    n: int
    m: int
    skipped_pairs: int = 0
    ratio_samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def injective(self) -> bool:
        return self.alpha_hat > INJECTIVITY_FLOOR

    @property
    def unnormalized_scale(self) -> float:
        return float(np.sqrt(self.m))

    @property
    def condition_ratio(self) -> float:
        """``(beta_hat / alpha_hat)^2``: the ratio of the bounds on V."""
        return float(self.beta_hat**2 / self.alpha_hat**2) if self.alpha_hat > 0 else float("inf")

    @property
    def saddle_condition_met(self) -> bool:
        """Whether the two-sided bound on V is tighter than ``2 beta < 3 alpha``."""
        return self.condition_ratio < 1.5

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "beta_stability": self.beta_hat,
            "num_pairs": self.num_pairs,
            "skipped_pairs": self.skipped_pairs,
            "mean_ratio": self.mean_ratio,
            "n": self.n,
            "m": self.m,
            "injective": self.injective,
            "unnormalized_scale": self.unnormalized_scale,
            "condition_ratio": self.condition_ratio,
            "saddle_condition_met": self.saddle_condition_met,
        }


def stability_estimate(
    ens: MeasurementEnsemble, num_pairs: int, seed: int = 0, keep_samples: bool = False, chunk: int = 1024
) -> StabilityEstimate:
    """Sample unit pairs and take min/max of ``sqrt(V)``.

    Raises
    ------
    DegenerateSampleError
        If every sampled pair had ``d(x, y) <= 1e-8``.
    """
    if num_pairs < 1:
        raise ValueError("num_pairs must be >= 1")
    rng = derive_rng(seed, 10)
    ratios = []
    skipped = 0
    for start in range(0, num_pairs, chunk):
        k = min(chunk, num_pairs - start)
        xs = unit_sphere(rng, ens.n, k)
        ys = unit_sphere(rng, ens.n, k)
        d2 = _batch_distance_sq(xs, ys)
        ok = d2 > MIN_PAIR_DISTANCE**2
        skipped += int(np.count_nonzero(~ok))
        if not np.any(ok):
            continue
        diff = _batch_forms(ens.matrices, xs[ok]) - _batch_forms(ens.matrices, ys[ok])
        ratios.append(np.mean(diff * diff, axis=1) / d2[ok])
    if not ratios:
        raise DegenerateSampleError("every sampled pair was degenerate")
    v = np.concatenate(ratios)
    root = np.sqrt(v)
    return StabilityEstimate(
        alpha_hat=float(root.min()),
        beta_hat=float(root.max()),
        num_pairs=int(v.size),
        mean_ratio=float(v.mean()),
        n=ens.n,
        m=ens.m,
        skipped_pairs=skipped,
        ratio_samples=v if keep_samples else None,
    )


@dataclass
class ConcentrationReport:
    n: int
    m: int
    trials: int
    epsilon: float
    empirical_mean_ratio: float
    tail_fraction: float
    ratios: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "trials": self.trials,
            "epsilon": self.epsilon,
            "empirical_mean_ratio": self.empirical_mean_ratio,
            "tail_fraction": self.tail_fraction,
        }

    def csv_rows(self):
        return [{"trial": t, "ratio": float(r), "deviation": float(abs(r - 1))} for t, r in enumerate(self.ratios)]


def concentration_experiment(
    n: int, m: int, trials: int, epsilon: float, seed: int = 0, kind: str = "hermitian_gaussian", variance: float = 1.0
) -> ConcentrationReport:
    """Distribution of ``V(x, y)`` over fresh ensembles for one fixed unit pair.

    ``tail_fraction`` is the fraction of trials with ``|V - 1| >= epsilon``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = derive_rng(seed, 21)
    x = unit_sphere(rng, n)
    y = unit_sphere(rng, n)
    d2 = _batch_distance_sq(x[None], y[None])[0]
    ratios = np.empty(trials)
    for t in range(trials):
        ens = sample_ensemble(kind, n, m, variance, derive_seed(seed, 20, t))
        diff = quadratic_forms(ens.matrices, x) - quadratic_forms(ens.matrices, y)
        ratios[t] = np.mean(diff * diff) / (variance * d2)
    tail = float(np.mean(np.abs(ratios - 1.0) >= epsilon))
    return ConcentrationReport(n, m, trials, float(epsilon), float(ratios.mean()), tail, ratios)


def count_inversions(values) -> int:
    """Number of adjacent strict increases in a sequence."""
    v = np.asarray(values, dtype=float)
    return int(np.count_nonzero(np.diff(v) > 0))


def concentration_trend(n: int, ms, trials: int, epsilon: float, seeds) -> dict:
    """Tail fractions over an increasing m-grid, repeated for several seeds."""
    ms = [int(m) for m in ms]
    if not ms:
        raise ValueError("m-grid must be non-empty")
    table = {}
    total = 0
    for s in seeds:
        tails = [concentration_experiment(n, m, trials, epsilon, derive_seed(s, m)).tail_fraction for m in ms]
        table[int(s)] = tails
        total += count_inversions(tails)
    return {"n": n, "ms": ms, "trials": trials, "epsilon": epsilon, "tails": table, "inversions": total}


def cross_term_statistic(ens: MeasurementEnsemble, x, delta) -> float:
    """``(1/m) sum_i <A_i, D D^H><A_i, x x^H> - <A_i, D x^H><A_i, x D^H>`` for ``D = delta``."""
    x = as_vector(x)
    delta = as_vector(delta)
    if x.size != ens.n or delta.size != ens.n:
        raise DimensionError("vector length does not match the ensemble")
    ax = ens.matrices @ x
    qx = (ax @ x.conj()).real
    qd = quadratic_forms(ens.matrices, delta)
    # <A, D x^H> = x^H A D and <A, x D^H> = D^H A x are complex conjugates
    s = ax @ delta.conj()
    return float(np.mean(qd * qx - (s * s.conj()).real))


@dataclass
class CrossTermReport:
    n: int
    m: int
    trials: int
    normalized_mean: float
    normalized_std: float
    expected_normalized: float
    samples: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "trials": self.trials,
            "normalized_mean": self.normalized_mean,
            "normalized_std": self.normalized_std,
            "expected_normalized": self.expected_normalized,
            "centered_mean": self.normalized_mean - self.expected_normalized,
        }


def cross_term_experiment(n: int, m: int, trials: int, seed: int = 0, x=None, delta=None) -> CrossTermReport:
    """Distribution of the cross-term statistic over fresh Gaussian ensembles.

    `x` and `delta` default to independent random unit vectors, held fixed
    across trials. Values are normalised by ``||delta||^2 ||x||^2``.
    ``expected_normalized`` is the exact mean for unit-variance ensembles,
    ``(|<x, delta>|^2 - ||x||^2 ||delta||^2) / (||x||^2 ||delta||^2)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = derive_rng(seed, 31)
    x = unit_sphere(rng, n) if x is None else np.asarray(as_vector(x, n))
    delta = unit_sphere(rng, n) if delta is None else np.asarray(as_vector(delta, n))
    scale = float(np.vdot(x, x).real * np.vdot(delta, delta).real)
    vals = np.empty(trials)
    for t in range(trials):
        ens = sample_ensemble("hermitian_gaussian", n, m, 1.0, derive_seed(seed, 30, t))
        vals[t] = cross_term_statistic(ens, x, delta)
    if scale == 0:
        norm_vals = np.zeros(trials)
        expected = 0.0
    else:
        norm_vals = vals / scale
        expected = float((abs(np.vdot(delta, x)) ** 2 - scale) / scale)
    return CrossTermReport(n, m, trials, float(norm_vals.mean()), float(norm_vals.std()), expected, norm_vals)
