"""A quick invariant battery over every module, at fixed seeds.

Each check returns ``(ok, detail)``; :func:`run_battery` collects them in a
fixed order so the printed table is identical from run to run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import complex_normal, derive_rng, unit_sphere
from .core import HermitianMatrix, aligned_delta, equiv_distance, equiv_distance_sq_fast, outer_difference
from .landscape import (
    Thresholds,
    covering_net_check,
    landscape_scan,
    ratio_v,
    saddle_certificate,
    stability_estimate,
)
from .loss import (
    LossProblem,
    directional_derivative,
    fd_directional,
    fd_second_difference,
    hessian_matrix,
    hessian_quadratic_form,
)
from .measurement import (
    deserialize_ensemble,
    ensemble_from_matrices,
    forward_map,
    sample_hermitian_gaussian,
    sample_rank_one,
    serialize_ensemble,
)
from .solver import SolverConfig, solve

SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _problem(n, m, seed):
    ens = sample_hermitian_gaussian(n, m, seed=seed)
    z = unit_sphere(derive_rng(seed, 5), n)
    return LossProblem(ens, forward_map(ens, z)), z


def check_hermitian_storage():
    rng = derive_rng(SEED, 1)
    a = complex_normal(rng, (5, 5))
    a = a + a.conj().T
    h = HermitianMatrix.from_full(a)
    back = h.full()
    return bool(np.allclose(back, a, rtol=0, atol=1e-15) and np.array_equal(back, back.conj().T)), "upper-triangle round trip"


def check_distance_forms():
    rng = derive_rng(SEED, 2)
    worst = 0.0
    for _ in range(200):
        x, y = complex_normal(rng, 4), complex_normal(rng, 4)
        worst = max(worst, _rel(equiv_distance(x, y) ** 2, equiv_distance_sq_fast(x, y)))
    return worst < 1e-10, f"max rel gap {worst:.2e}"


def check_phase_alignment():
    rng = derive_rng(SEED, 3)
    grid = np.linspace(0, 2 * np.pi, 721)
    worst_gap, worst_im = 0.0, 0.0
    for _ in range(50):
        x, z = complex_normal(rng, 3), complex_normal(rng, 3)
        al = aligned_delta(x, z)
        best = min(np.linalg.norm(x - np.exp(1j * t) * z) for t in grid)
        worst_gap = max(worst_gap, np.linalg.norm(al.delta) - best)
        w = np.exp(1j * al.phase) * z
        worst_im = max(worst_im, abs(np.vdot(x + w, al.delta).imag))
    return worst_gap <= 1e-12 and worst_im <= 1e-10, f"grid gap {worst_gap:.1e}, imag {worst_im:.1e}"


def check_split_identity():
    rng = derive_rng(SEED, 4)
    worst = 0.0
    for _ in range(100):
        x, z = complex_normal(rng, 4), complex_normal(rng, 4)
        al = aligned_delta(x, z)
        d = al.delta
        lhs = outer_difference(x, z) + np.outer(d, d.conj())
        rhs = np.outer(x, d.conj()) + np.outer(d, x.conj())
        worst = max(worst, np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), 1e-300))
    return worst <= 1e-10, f"max entry gap {worst:.1e}"


def check_serialization():
    ens = sample_hermitian_gaussian(3, 7, seed=SEED)
    back = deserialize_ensemble(serialize_ensemble(ens))
    return back == ens, "ensemble JSON round trip"


def check_rank_one():
    ens = sample_rank_one(4, 30, seed=SEED)
    c = forward_map(ens, unit_sphere(derive_rng(SEED, 6), 4)).values
    return bool(ens.is_rank_one() and np.all(c >= 0)), "rank-one matrices give c >= 0"


def check_derivatives():
    rng = derive_rng(SEED, 7)
    worst1 = worst2 = worst3 = 0.0
    for t in range(10):
        p, _ = _problem(3, 12, SEED + t)
        x = complex_normal(rng, 3) * 1.3
        d = complex_normal(rng, 3)
        worst1 = max(worst1, _rel(directional_derivative(p, x, d), fd_directional(p, x, d)))
        q = hessian_quadratic_form(p, x, d)
        worst2 = max(worst2, _rel(q, fd_second_difference(p, x, d)))
        v = np.concatenate([d, d.conj()])
        worst3 = max(worst3, _rel(q, float(np.vdot(v, hessian_matrix(p, x) @ v).real)))
    ok = worst1 <= 1e-5 and worst2 <= 1e-4 and worst3 <= 1e-10
    return ok, f"grad {worst1:.1e}, fd2 {worst2:.1e}, matrix {worst3:.1e}"


def check_solver():
    p, z = _problem(4, 40, 7)
    res, trace = solve(p, SolverConfig(seed=7), z)
    f = trace.losses()
    steps = np.array([r.step for r in trace.records])
    g = np.array([r.grad_norm for r in trace.records])
    armijo = np.all(f[1:] <= f[:-1] - 1e-4 * steps[:-1] * g[:-1] ** 2 + 1e-12)
    ok = res.success and bool(armijo)
    return ok, f"rel_error {res.rel_error:.1e} after {res.iterations} iterations"


def check_phase_equivariance():
    p, z = _problem(4, 40, 8)
    cfg = SolverConfig(seed=3, max_iters=200)
    x0 = complex_normal(derive_rng(SEED, 8), 4, 0.25)
    _, t1 = solve(p, SolverConfig(**{**cfg.__dict__, "init": "given", "x0": x0}))
    _, t2 = solve(p, SolverConfig(**{**cfg.__dict__, "init": "given", "x0": np.exp(0.7j) * x0}))
    f1, f2 = t1.losses(), t2.losses()
    # relative 1e-10, with an absolute floor once the loss is at roundoff level
    ok = f1.size == f2.size and np.all(np.abs(f1 - f2) <= 1e-10 * np.abs(f1) + 1e-14 * f1[0])
    return bool(ok), f"{f1.size} matched loss values"


def check_ratio_invariance():
    ens = sample_hermitian_gaussian(4, 30, seed=SEED)
    rng = derive_rng(SEED, 9)
    x, y = complex_normal(rng, 4), complex_normal(rng, 4)
    c = 1.7 * np.exp(0.4j)
    gap = _rel(ratio_v(ens, x, y), ratio_v(ens, c * x, c * y))
    return gap <= 1e-10, f"rel gap {gap:.1e}"


def check_injectivity():
    est = stability_estimate(sample_hermitian_gaussian(4, 40, seed=SEED), 2000, SEED)
    ident = ensemble_from_matrices([np.eye(3)] * 10)
    deg = stability_estimate(ident, 200, SEED)
    ok = est.injective and est.alpha_hat <= est.beta_hat and not deg.injective
    return ok, f"alpha_hat {est.alpha_hat:.3f}, identity alpha_hat {deg.alpha_hat:.1e}"


def check_certification():
    p, z = _problem(4, 40, 9)
    vac = landscape_scan(p, z, 20, Thresholds(math.inf, math.inf, math.inf), "uniform", SEED)
    orbit = landscape_scan(p, z, 20, Thresholds(1e-3, 1.0, 1e-8), "orbit", SEED)
    far = saddle_certificate(p, z, 10 * unit_sphere(derive_rng(SEED, 10), 4), Thresholds(1.0, 1.0, 0.1))
    ok = (
        vac.histogram["near_minimum"] == 20
        and orbit.histogram["near_minimum"] == 20
        and far.verdict == "large_gradient"
    )
    return ok, "vacuous, orbit and far-point verdicts"


def check_covering():
    rep = covering_net_check(np.diag([1.0, -1.0]), 0.25, samples=20000, seed=SEED)
    ok = rep.holds and abs(rep.sup_exact - 2.0) < 1e-12
    return ok, f"net of {rep.net_size}, sup_net {rep.sup_net:.3f}"


CHECKS = [
    ("core.hermitian_storage", check_hermitian_storage),
    ("core.distance_closed_form", check_distance_forms),
    ("core.phase_alignment", check_phase_alignment),
    ("core.split_identity", check_split_identity),
    ("measurement.serialization", check_serialization),
    ("measurement.rank_one_nonnegative", check_rank_one),
    ("loss.derivative_oracles", check_derivatives),
    ("solver.golden_recovery", check_solver),
    ("solver.phase_equivariance", check_phase_equivariance),
    ("landscape.ratio_invariance", check_ratio_invariance),
    ("landscape.injectivity", check_injectivity),
    ("landscape.certification", check_certification),
    ("landscape.covering_sandwich", check_covering),
]


def check_fixture(data: bytes):
    ens = deserialize_ensemble(data)
    back = deserialize_ensemble(serialize_ensemble(ens))
    return back == ens, f"n={ens.n}, m={ens.m}"


def run_battery(fixture: bytes | None = None) -> list[CheckResult]:
    checks = list(CHECKS)
    if fixture is not None:
        checks.append(("measurement.fixture", lambda: check_fixture(fixture)))
    out = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed invariant, reported by name
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
