"""Strict-saddle certification and local-minimum checks.

A point ``x`` is certified by testing, in order,

1. ``||grad f(x)|| >= beta_thr``                                  -> large_gradient
2. ``Q(x)[Delta] <= -zeta * ||[Delta; conj Delta]||^2`` with
   ``Delta = x - e^{i phi} z`` the phase-aligned difference        -> negative_curvature
3. ``d(x, z) <= gamma``                                           -> near_minimum

and VIOLATION when none holds. The gradient norm is taken in the real
coordinates, ``||[Delta; conj Delta]||^2 = 2 ||Delta||^2``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .._rng import complex_normal, derive_rng, derive_seed, unit_sphere
from ..core import DimensionError, aligned_delta, as_vector, equiv_distance
from ..loss import LossProblem, gradient_norm, hessian_min_eig, hessian_quadratic_form
from ..measurement import MeasurementEnsemble, forward_map
from ..solver import SolverConfig, solve

__all__ = [
    "VERDICTS",
    "Thresholds",
    "SaddleCertificate",
    "ScanReport",
    "LocalMinReport",
    "saddle_certificate",
    "generate_points",
    "calibrate_thresholds",
    "landscape_scan",
    "random_rayleigh_min",
    "local_min_global_check",
]

VERDICTS = ("large_gradient", "negative_curvature", "near_minimum", "VIOLATION")
MIXED_SPLIT = (0.4, 0.4, 0.2)  # uniform ball / GD trajectory / near orbit


@dataclass(frozen=True)
class Thresholds:
    """``beta_thr`` (gradient), ``zeta`` (curvature), ``gamma`` (distance).

    ``grad_delta`` is the gradient scale used to size ``gamma`` and
    ``c0 = gamma / grad_delta``; both are recorded for reports only.
    """

    beta_thr: float
    zeta: float
    gamma: float
    grad_delta: float = float("nan")
    c0: float = float("nan")

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}


@dataclass
class SaddleCertificate:
    x: np.ndarray = field(repr=False)
    gradient_norm: float
    curvature_along_delta: float
    normalized_curvature: float
    distance_to_truth: float
    verdict: str
    thresholds: Thresholds
    regime: str = ""

    def to_dict(self) -> dict:
        return {
            "x": [[float(v.real), float(v.imag)] for v in self.x],
            "gradient_norm": self.gradient_norm,
            "curvature_along_delta": self.curvature_along_delta,
            "normalized_curvature": self.normalized_curvature,
            "distance_to_truth": self.distance_to_truth,
            "verdict": self.verdict,
            "regime": self.regime,
            "thresholds": self.thresholds.to_dict(),
        }


def _check_noiseless(p: LossProblem, z):
    z = as_vector(z)
    if z.size != p.n:
        raise DimensionError(f"ground truth has length {z.size}, problem has n={p.n}")
    return z


def saddle_certificate(p: LossProblem, z, x, thresholds: Thresholds, regime: str = "") -> SaddleCertificate:
    """Certify one point against the three strict-saddle alternatives.

    Always returns a certificate; VIOLATION is a verdict, not an error.
    """
    z = _check_noiseless(p, z)
    x = p.vector(x)
    gnorm = gradient_norm(p, x)
    delta = aligned_delta(x, z).delta
    curv = hessian_quadratic_form(p, x, delta)
    dd = 2.0 * float(np.vdot(delta, delta).real)
    ncurv = curv / dd if dd > 0 else 0.0
    dist = equiv_distance(x, z)
    if gnorm >= thresholds.beta_thr:
        verdict = "large_gradient"
    elif dd > 0 and curv <= -thresholds.zeta * dd:
        verdict = "negative_curvature"
    elif dist <= thresholds.gamma:
        verdict = "near_minimum"
    else:
        verdict = "VIOLATION"
    return SaddleCertificate(x, gnorm, curv, ncurv, dist, verdict, thresholds, regime)


# -- point generators ----------------------------------------------------------


def _uniform_ball(rng, n, count, radius):
    dirs = unit_sphere(rng, n, count)
    r = radius * rng.random(count) ** (1.0 / (2 * n))
    return dirs * r[:, None]


def _near_orbit(rng, z, count):
    nz = float(np.linalg.norm(z))
    theta = rng.uniform(0, 2 * np.pi, count)
    # perturbation sizes log-uniform in [1e-4, 0.3] * ||z||
    rho = nz * 10 ** rng.uniform(-4, math.log10(0.3), count)
    dirs = unit_sphere(rng, z.size, count)
    return np.exp(1j * theta)[:, None] * z[None, :] + rho[:, None] * dirs


def _trajectory(p, rng, count, seed, runs=None):
    """Snapshots of gradient-descent runs from random starts.

    Start scales are log-uniform in ``[1e-3, 2]``: runs that start near the
    saddle at the origin linger in the negative-curvature region before
    escaping. Iterates are recorded at geometrically spaced indices so early,
    middle and late stages are all represented.
    """
    if count == 0:
        return np.empty((0, p.n), dtype=np.complex128)
    runs = runs or max(1, math.ceil(count / 10))
    per_run = math.ceil(count / runs)
    keep = set(np.unique(np.geomspace(1, 2000, 4 * per_run).astype(int)).tolist()) | {0}
    pts = []
    for j in range(runs):
        snaps = []

        def cb(k, x, snaps=snaps):
            if k in keep:
                snaps.append(np.array(x))

        cfg = SolverConfig(max_iters=2000, seed=derive_seed(seed, 50, j), init_scale=float(10 ** rng.uniform(-3, math.log10(2.0))))
        solve(p, cfg, callback=cb)
        if len(snaps) > per_run:
            idx = np.sort(rng.choice(len(snaps), per_run, replace=False))
            snaps = [snaps[i] for i in idx]
        pts.extend(snaps)
    if len(pts) > count:
        idx = np.sort(rng.choice(len(pts), count, replace=False))
        pts = [pts[i] for i in idx]
    return np.array(pts).reshape(-1, p.n)


def generate_points(p: LossProblem, z, num_points: int, generator: str = "mixed", seed: int = 0, ball_radius: float | None = None):
    """Points for a landscape scan, with a regime label for each.

    ``generator`` is ``"mixed"`` (40% uniform ball / 40% GD trajectory / 20%
    near orbit), one of ``"uniform"``, ``"trajectory"``, ``"near_orbit"``, or
    ``"orbit"`` (points ``e^{i theta} z``). The ball radius defaults to
    ``||z||``.
    """
    z = np.asarray(_check_noiseless(p, z))
    rng = derive_rng(seed, 51)
    radius = float(np.linalg.norm(z)) if ball_radius is None else ball_radius
    if generator == "mixed":
        n_ball = int(round(MIXED_SPLIT[0] * num_points))
        n_traj = int(round(MIXED_SPLIT[1] * num_points))
        n_near = num_points - n_ball - n_traj
    elif generator in ("uniform", "trajectory", "near_orbit", "orbit"):
        n_ball = num_points if generator == "uniform" else 0
        n_traj = num_points if generator == "trajectory" else 0
        n_near = num_points if generator == "near_orbit" else 0
    else:
        raise ValueError(f"unknown point generator {generator!r}")
    if generator == "orbit":
        theta = rng.uniform(0, 2 * np.pi, num_points)
        return np.exp(1j * theta)[:, None] * z[None, :], ["orbit"] * num_points
    parts, labels = [], []
    if n_ball:
        parts.append(_uniform_ball(rng, p.n, n_ball, radius))
        labels += ["uniform"] * n_ball
    if n_traj:
        traj = _trajectory(p, rng, n_traj, seed)
        parts.append(traj)
        labels += ["trajectory"] * len(traj)
    if n_near:
        parts.append(_near_orbit(rng, z, n_near))
        labels += ["near_orbit"] * n_near
    return np.concatenate(parts).reshape(-1, p.n), labels


# -- calibration and scans ------------------------------------------------------


def calibrate_thresholds(
    p: LossProblem,
    z,
    num_points: int = 500,
    seed: int = 0,
    grad_quantile: float = 0.05,
    zeta_fraction: float = 0.5,
    gamma_margin: float = 1.25,
    beta_thr: float | None = None,
) -> Thresholds:
    """Pick ``(beta_thr, zeta, gamma)`` from a pilot set of mixed points.

    * ``beta_thr``: the `grad_quantile` quantile of gradient norms over the
      uniform-ball pilot points.
    * ``zeta``: `zeta_fraction` times the 5th percentile of
      ``|normalized curvature|`` over pilot points that have small gradient
      and negative curvature along the aligned difference.
    * ``gamma``: `gamma_margin` times the largest distance to the orbit
      among small-gradient pilot points whose curvature is above ``-zeta``.

    Passing `beta_thr` fixes the gradient threshold instead of taking the
    quantile; ``zeta`` and ``gamma`` are then calibrated against it. When no
    pilot point has small gradient and negative curvature, ``zeta`` falls
    back to ``1e-3``.

    Use a pilot problem independent of the one being scanned.
    """
    pts, labels = generate_points(p, z, num_points, "mixed", seed)
    labels = np.array(labels)
    probe = Thresholds(math.inf, math.inf, math.inf)
    certs = [saddle_certificate(p, z, x, probe) for x in pts]
    g = np.array([c.gradient_norm for c in certs])
    k = np.array([c.normalized_curvature for c in certs])
    d = np.array([c.distance_to_truth for c in certs])
    if beta_thr is None:
        beta_thr = float(np.quantile(g[labels == "uniform"], grad_quantile))
    small = g < beta_thr
    neg = small & (k < 0)
    zeta = zeta_fraction * float(np.quantile(-k[neg], 0.05)) if np.any(neg) else 1e-3
    zeta = float(zeta)
    flat = small & (k > -zeta)
    reach = float(d[flat].max()) if np.any(flat) else 0.0
    gamma = gamma_margin * reach
    return Thresholds(float(beta_thr), zeta, float(gamma), grad_delta=beta_thr, c0=gamma / beta_thr if beta_thr > 0 else math.nan)


@dataclass
class ScanReport:
    thresholds: Thresholds
    histogram: dict
    violations: list
    certificates: list = field(repr=False)

    @property
    def num_points(self) -> int:
        return len(self.certificates)

    def to_dict(self, include_points: bool = False) -> dict:
        doc = {
            "thresholds": self.thresholds.to_dict(),
            "num_points": self.num_points,
            "histogram": dict(self.histogram),
            "num_violations": len(self.violations),
            "violations": [c.to_dict() for c in self.violations],
        }
        if include_points:
            doc["certificates"] = [c.to_dict() for c in self.certificates]
        return doc

    def csv_rows(self):
        return [
            {
                "index": i,
                "regime": c.regime,
                "gradient_norm": c.gradient_norm,
                "normalized_curvature": c.normalized_curvature,
                "distance_to_truth": c.distance_to_truth,
                "verdict": c.verdict,
            }
            for i, c in enumerate(self.certificates)
        ]


def landscape_scan(
    p: LossProblem, z, num_points: int, thresholds: Thresholds, generator: str = "mixed", seed: int = 0
) -> ScanReport:
    pts, labels = generate_points(p, z, num_points, generator, seed)
    certs = [saddle_certificate(p, z, x, thresholds, lab) for x, lab in zip(pts, labels)]
    hist = Counter({v: 0 for v in VERDICTS})
    hist.update(c.verdict for c in certs)
    return ScanReport(thresholds, dict(hist), [c for c in certs if c.verdict == "VIOLATION"], certs)


def random_rayleigh_min(p: LossProblem, x, num_directions: int = 1000, seed: int = 0) -> float:
    """Smallest ``Q(x)[D] / ||[D; conj D]||^2`` over random unit directions."""
    x = p.vector(x)
    dirs = unit_sphere(derive_rng(seed, 60), p.n, num_directions)
    mats = p.ensemble.matrices
    ax = mats @ x
    r = (ax @ x.conj()).real - p.observations.values
    s = dirs.conj() @ ax.T  # (dirs, m): D^H A_i x
    ad = np.einsum("kij,pj->pki", mats, dirs)
    b = np.einsum("pki,pi->pk", ad, dirs.conj()).real
    q = np.mean(8.0 * s.real**2 + 4.0 * r[None, :] * b, axis=1)
    return float(q.min() / 2.0)


@dataclass
class LocalMinReport:
    trials: int
    converged: int
    successes: int
    counterexamples: list
    records: list = field(repr=False)
    zeta_tol: float = 0.0

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "converged": self.converged,
            "successes": self.successes,
            "zeta_tol": self.zeta_tol,
            "num_counterexamples": len(self.counterexamples),
            "counterexamples": self.counterexamples,
            "records": self.records,
        }


def _local_min_trial(ens, z, cfg, zeta_tol, directions, exact_max_n, trial_seed):
    p = LossProblem(ens, forward_map(ens, z))
    cfg = SolverConfig(**{**cfg.__dict__, "seed": trial_seed})
    res, trace = solve(p, cfg, z)
    rec = {
        "seed": trial_seed,
        "iterations": res.iterations,
        "converged": res.converged,
        "rel_error": res.rel_error,
        "success": res.success,
        "grad_norm": res.final_grad_norm,
        "rayleigh_min": None,
        "min_eig": None,
        "spurious": False,
    }
    if res.converged:
        rec["rayleigh_min"] = random_rayleigh_min(p, res.x_hat, directions, trial_seed)
        curv = rec["rayleigh_min"]
        if p.n <= exact_max_n:
            rec["min_eig"] = hessian_min_eig(p, res.x_hat)
            curv = min(curv, rec["min_eig"])
        rec["spurious"] = bool(curv >= -zeta_tol and res.rel_error >= cfg.success_tol)
    return rec


def local_min_global_check(
    ens: MeasurementEnsemble,
    z,
    num_trials: int,
    cfg: SolverConfig = SolverConfig(),
    zeta_tol: float = 1e-6,
    seed: int = 0,
    directions: int = 1000,
    exact_max_n: int = 32,
    jobs: int = 1,
) -> LocalMinReport:
    """Solve from many random starts and look for spurious local minima.

    A converged terminal point counts as a counterexample when its Hessian
    looks positive semidefinite (curvature ``>= -zeta_tol``) and yet
    ``rel_error >= cfg.success_tol``. Curvature is the random-direction
    Rayleigh minimum, or the exact smallest eigenvalue when ``n <=
    exact_max_n`` (the smaller of the two).
    """
    from .._parallel import ordered_map

    z = np.asarray(as_vector(z, ens.n))
    seeds = [derive_seed(seed, 70, t) for t in range(num_trials)]
    recs = ordered_map(
        _local_min_trial, [(ens, z, cfg, zeta_tol, directions, exact_max_n, s) for s in seeds], jobs
    )
    bad = [r for r in recs if r["spurious"]]
    return LocalMinReport(
        trials=num_trials,
        converged=sum(r["converged"] for r in recs),
        successes=sum(r["success"] for r in recs),
        counterexamples=bad,
        records=recs,
        zeta_tol=zeta_tol,
    )
