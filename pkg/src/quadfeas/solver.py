"""Gradient descent on the l2 loss from an arbitrary starting point."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import check_seed, complex_normal, derive_rng
from .core import as_vector, equiv_distance
from .loss import LossProblem

__all__ = [
    "SolverError",
    "PerturbConfig",
    "SolverConfig",
    "TraceRecord",
    "SolverTrace",
    "RecoveryResult",
    "solve",
    "recovery_error",
    "perturb_if_stalled",
    "initial_point",
]


class SolverError(RuntimeError):
    """The iteration produced a non-finite value or diverged."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class PerturbConfig:
    radius: float
    trigger_grad_tol: float
    cooldown: int = 50

    def __post_init__(self):
        if not self.radius > 0 or not self.trigger_grad_tol > 0 or self.cooldown < 0:
            raise ValueError("perturbation needs radius > 0, trigger > 0, cooldown >= 0")


@dataclass(frozen=True)
class SolverConfig:
    """Step policy, stopping rules and initialisation.

    ``step_policy`` is ``"backtracking"`` (Armijo, shrink factor ``shrink``,
    sufficient-decrease constant ``c_armijo``; each search starts from
    ``grow`` times the previous accepted step) or ``"fixed"`` (constant
    ``eta``). With backtracking and ``eta=None`` the first trial step is
    ``0.1 / ||grad f(x0)||``. ``grad_tol=None`` means
    ``1e-8 * (1 + f(x0))``.
    """

    step_policy: str = "backtracking"
    eta: float | None = None
    shrink: float = 0.5
    c_armijo: float = 1e-4
    grow: float = 2.0
    max_iters: int = 5000
    grad_tol: float | None = None
    success_tol: float = 1e-5
    perturb: PerturbConfig | None = None
    init: str = "random_gaussian"
    init_scale: float = 1.0
    x0: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.step_policy not in ("backtracking", "fixed"):
            raise ValueError(f"unknown step policy {self.step_policy!r}")
        if self.step_policy == "fixed" and not (self.eta is not None and self.eta > 0):
            raise ValueError("fixed step policy needs eta > 0")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0 < self.c_armijo < 1:
            raise ValueError("c_armijo must lie in (0, 1)")
        if not self.grow >= 1:
            raise ValueError("grow must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.init not in ("random_gaussian", "given"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "given" and self.x0 is None:
            raise ValueError("init='given' needs x0")
        check_seed(self.seed)


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    f: float
    grad_norm: float
    step: float


@dataclass
class SolverTrace:
    records: list = field(default_factory=list)
    x_final: np.ndarray | None = None
    converged: bool = False
    iterations: int = 0
    grad_tol: float = float("nan")
    perturbations: int = 0

    def losses(self) -> np.ndarray:
        return np.array([r.f for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "f", "grad_norm", "step"])
        for r in self.records:
            w.writerow([r.iter, repr(r.f), repr(r.grad_norm), repr(r.step)])
        return buf.getvalue()


@dataclass(frozen=True)
class RecoveryResult:
    x_hat: np.ndarray
    rel_error: float
    iterations: int
    converged: bool
    success: bool
    final_loss: float
    final_grad_norm: float


def recovery_error(x_hat, z) -> float:
    """``d(x_hat, z) / ||z||^2``; zero exactly on the orbit of `z`."""
    z = as_vector(z)
    nz2 = float(np.vdot(z, z).real)
    if nz2 == 0:
        raise ValueError("ground truth is zero; relative error undefined")
    return equiv_distance(x_hat, z) / nz2


def initial_point(n: int, cfg: SolverConfig) -> np.ndarray:
    if cfg.init == "given":
        return np.array(as_vector(cfg.x0, n))
    # per-component std 1/sqrt(2n): unit expected squared norm
    return cfg.init_scale * complex_normal(derive_rng(cfg.seed, 4), n, 1.0 / n)


def _ball(rng, n, radius):
    w = complex_normal(rng, n)
    w /= np.linalg.norm(w)
    return radius * rng.random() ** (1.0 / (2 * n)) * w


def perturb_if_stalled(x, grad_norm, iteration, last_perturb, cfg: PerturbConfig, rng):
    """Kick `x` uniformly inside a complex ball of radius ``cfg.radius``.

    Fires only when ``grad_norm < cfg.trigger_grad_tol`` and at least
    ``cfg.cooldown`` iterations have passed since `last_perturb`. Returns
    ``(x_new, fired)``.
    """
    if grad_norm >= cfg.trigger_grad_tol:
        return x, False
    if last_perturb is not None and iteration - last_perturb < cfg.cooldown:
        return x, False
    return x + _ball(rng, x.size, cfg.radius), True


def solve(p: LossProblem, cfg: SolverConfig = SolverConfig(), z=None, callback=None):
    """Minimise the loss by gradient descent.

    Iterates ``x <- x - eta_k * 2 g_x(x)`` until the real-coordinate gradient
    norm drops below ``grad_tol``, the iteration budget runs out, or no
    Armijo step can be found. ``callback(k, x)``, if given, sees every
    iterate including the starting point.

    Returns
    -------
    (RecoveryResult or None, SolverTrace)
        The result is None when no ground truth `z` is given.

    Raises
    ------
    SolverError
        On a non-finite loss, or when a fixed step drives the loss above ten
        times its initial value.
    """
    x = initial_point(p.n, cfg)
    prng = derive_rng(cfg.seed, 3)
    mats = p.ensemble.matrices
    c = p.observations.values
    m = p.m

    def evaluate(v):
        ax = mats @ v
        r = (ax @ v.conj()).real - c
        return float(np.mean(r * r)), ax, r

    f, ax, r = evaluate(x)
    g = (2.0 / m) * (r @ ax)
    grad = 2.0 * g
    gnorm = float(np.linalg.norm(grad))
    f0 = f
    grad_tol = cfg.grad_tol if cfg.grad_tol is not None else 1e-8 * (1.0 + f0)
    trace = SolverTrace(grad_tol=grad_tol)
    if not math.isfinite(f):
        raise SolverError("non-finite loss at the initial point", trace)

    if cfg.step_policy == "fixed":
        eta = cfg.eta
    elif cfg.eta is not None:
        eta = cfg.eta
    else:
        eta = 0.1 / gnorm if gnorm > 0 else 1.0

    converged = False
    last_perturb = None
    k = 0
    while True:
        if callback is not None:
            callback(k, x)
        if gnorm < grad_tol:
            converged = True
            trace.records.append(TraceRecord(k, f, gnorm, 0.0))
            break
        if k >= cfg.max_iters:
            trace.records.append(TraceRecord(k, f, gnorm, 0.0))
            break
        if cfg.perturb is not None:
            x_new, fired = perturb_if_stalled(x, gnorm, k, last_perturb, cfg.perturb, prng)
            if fired:
                last_perturb = k
                trace.perturbations += 1
                x = x_new
                f, ax, r = evaluate(x)
                grad = (4.0 / m) * (r @ ax)
                gnorm = float(np.linalg.norm(grad))

        if cfg.step_policy == "fixed":
            step = eta
            x_new = x - step * grad
            f_new, ax_new, r_new = evaluate(x_new)
            if not math.isfinite(f_new):
                trace.records.append(TraceRecord(k, f, gnorm, step))
                raise SolverError(f"non-finite loss at iteration {k + 1}", trace)
            if f0 > 0 and f_new > 10.0 * f0:
                trace.records.append(TraceRecord(k, f, gnorm, step))
                raise SolverError(f"loss grew above 10x its initial value at iteration {k + 1}", trace)
        else:
            step = eta * cfg.grow if k > 0 else eta
            g2 = gnorm * gnorm
            while True:
                x_new = x - step * grad
                f_new, ax_new, r_new = evaluate(x_new)
                if math.isfinite(f_new) and f_new <= f - cfg.c_armijo * step * g2:
                    break
                step *= cfg.shrink
                if step * gnorm < 1e-16 * (1.0 + float(np.linalg.norm(x))):
                    step = 0.0
                    break
            if step == 0.0:
                # no representable descent step left: stalled at machine precision
                trace.records.append(TraceRecord(k, f, gnorm, 0.0))
                break
            eta = step

        trace.records.append(TraceRecord(k, f, gnorm, step))
        x, f, ax, r = x_new, f_new, ax_new, r_new
        grad = (4.0 / m) * (r @ ax)
        gnorm = float(np.linalg.norm(grad))
        k += 1

    trace.x_final = x
    trace.converged = converged
    trace.iterations = k
    if z is None:
        return None, trace
    rel = recovery_error(x, z)
    result = RecoveryResult(
        x_hat=x,
        rel_error=rel,
        iterations=k,
        converged=converged,
        success=rel < cfg.success_tol,
        final_loss=f,
        final_grad_norm=gnorm,
    )
    return result, trace
