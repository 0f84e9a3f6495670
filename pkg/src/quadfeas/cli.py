"""Command-line experiment harness.

Subcommands: gen, solve, sweep, stability, landscape, concentration,
covering, verify. Every subcommand accepts ``--seed``, ``--jobs``,
``--out-dir`` and ``--config``; a JSON or YAML config file supplies defaults
for any flag (keys are the flag names with ``_`` for ``-``) and explicit
flags override it.

Exit codes: 0 success, 1 a checked claim failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from . import reports
from ._parallel import ordered_map
from ._rng import derive_rng, derive_seed, unit_sphere
from .landscape import (
    CoveringError,
    Thresholds,
    calibrate_thresholds,
    concentration_experiment,
    concentration_trend,
    count_inversions,
    covering_net_check,
    cross_term_experiment,
    landscape_scan,
    local_min_global_check,
    stability_estimate,
)
from .landscape.covering import MAX_DIM
from .loss import LossProblem
from .measurement import (
    FormatError,
    add_noise,
    deserialize_ensemble,
    deserialize_observations,
    deserialize_vector,
    forward_map,
    sample_ensemble,
    serialize_ensemble,
    serialize_observations,
    serialize_vector,
)
from .solver import SolverConfig, SolverError, solve

EXIT_OK, EXIT_CLAIM, EXIT_USAGE = 0, 1, 2

# flags that do not change any output and are left out of the config echo
_NOT_ECHOED = {"command", "func", "config", "out_dir", "jobs"}


class UsageError(Exception):
    pass


def _kind(value: str) -> str:
    v = value.replace("-", "_")
    if v not in ("hermitian_gaussian", "rank_one"):
        raise argparse.ArgumentTypeError(f"unknown ensemble kind {value!r}")
    return v


def _int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(args, name: str, data: bytes) -> str:
    path = Path(args.out_dir) / name
    try:
        digest = reports.write_bytes(path, data)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None
    print(f"wrote {path}  sha256={digest}")
    return digest


def _report(args, body: dict) -> bytes:
    doc = reports.provenance(_echo(args), args.seed)
    doc.update(body)
    return reports.dumps(doc)


def _instance(args):
    """Ensemble and (optional) truth from files, or fresh ones from n, m."""
    if args.ensemble:
        ens = deserialize_ensemble(_read(args.ensemble))
        z = deserialize_vector(_read(args.truth)) if getattr(args, "truth", None) else None
        if z is not None and z.size != ens.n:
            raise UsageError(f"truth has length {z.size}, ensemble has n={ens.n}")
        return ens, z
    if args.n is None or args.m is None:
        raise UsageError("give --ensemble, or --n and --m for a fresh instance")
    ens = sample_ensemble(args.kind, args.n, args.m, 1.0, args.seed)
    return ens, unit_sphere(derive_rng(args.seed, 5), args.n)


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.n < 1 or args.m < 1:
        raise UsageError("--n and --m must be >= 1")
    if args.noise < 0 or not args.variance > 0:
        raise UsageError("--noise must be >= 0 and --variance > 0")
    ens = sample_ensemble(args.kind, args.n, args.m, args.variance, args.seed)
    z = args.scale * unit_sphere(derive_rng(args.seed, 5), args.n)
    c = forward_map(ens, z)
    if args.noise > 0:
        c = add_noise(c, args.noise, derive_seed(args.seed, 6))
    extra = {"build": reports.build_id(), "config": reports.jsonable(_echo(args))}
    _write(args, f"{args.prefix}_ensemble.json", serialize_ensemble(ens, extra))
    _write(args, f"{args.prefix}_truth.json", serialize_vector(z, extra))
    _write(args, f"{args.prefix}_observations.json", serialize_observations(c, extra))
    return EXIT_OK


def _solver_config(args, seed) -> SolverConfig:
    x0 = None
    if args.init == "given":
        if not args.x0:
            raise UsageError("--init given needs --x0 FILE")
        x0 = deserialize_vector(_read(args.x0))
    try:
        return SolverConfig(
            step_policy=args.step_policy,
            eta=args.eta,
            max_iters=args.max_iters,
            grad_tol=args.grad_tol,
            success_tol=args.success_tol,
            init=args.init,
            init_scale=args.init_scale,
            x0=x0,
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_solve(args) -> int:
    ens = deserialize_ensemble(_read(args.ensemble))
    obs = deserialize_observations(_read(args.observations))
    z = deserialize_vector(_read(args.truth)) if args.truth else None
    try:
        p = LossProblem(ens, obs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = _solver_config(args, args.seed)
    try:
        res, trace = solve(p, cfg, z)
    except SolverError as exc:
        if exc.trace is not None:
            _write(args, f"{args.prefix}_trace.csv", exc.trace.to_csv().encode())
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_CLAIM
    body = {
        "x_hat": trace.x_final,
        "iterations": trace.iterations,
        "converged": trace.converged,
        "grad_tol": trace.grad_tol,
        "final_loss": float(trace.records[-1].f),
        "final_grad_norm": float(trace.records[-1].grad_norm),
    }
    if res is not None:
        body.update({"rel_error": res.rel_error, "success": res.success})
    _write(args, f"{args.prefix}_result.json", _report(args, body))
    _write(args, f"{args.prefix}_trace.csv", trace.to_csv().encode())
    ok = res.success if res is not None else trace.converged
    status = f"rel_error={res.rel_error:.3e} success={res.success}" if res is not None else ""
    print(f"iterations={trace.iterations} converged={trace.converged} {status}".rstrip())
    return EXIT_OK if ok else EXIT_CLAIM


def _sweep_trial(n, m, kind, cfg_kwargs, seed, t):
    ens = sample_ensemble(kind, n, m, 1.0, derive_seed(seed, 200, m, t))
    z = unit_sphere(derive_rng(seed, 201, m, t), n)
    cfg = SolverConfig(**cfg_kwargs, seed=derive_seed(seed, 202, m, t))
    res, _ = solve(LossProblem(ens, forward_map(ens, z)), cfg, z)
    return res.success, res.iterations


def cmd_sweep(args) -> int:
    ms = args.ms or [f * args.n for f in args.m_factors]
    if not ms:
        raise UsageError("the m-grid is empty")
    fields = ["n", "m", "trials", "success_rate", "median_iters"]
    if args.trials <= 0:
        _write(args, f"{args.prefix}.csv", reports.csv_bytes([], fields))
        print("no trials", file=sys.stderr)
        return EXIT_USAGE
    cfg_kwargs = {"max_iters": args.max_iters, "success_tol": args.success_tol}
    rows = []
    for m in ms:
        out = ordered_map(
            _sweep_trial, [(args.n, m, args.kind, cfg_kwargs, args.seed, t) for t in range(args.trials)], args.jobs
        )
        succ = [s for s, _ in out]
        iters = [k for _, k in out]
        rows.append(
            {
                "n": args.n,
                "m": m,
                "trials": args.trials,
                "success_rate": float(np.mean(succ)),
                "median_iters": float(np.median(iters)),
            }
        )
    rates = [r["success_rate"] for r in rows]
    summary = {
        "ms": ms,
        "success_rates": rates,
        # a decrease in success rate as m grows counts against the trend
        "inversions": count_inversions([-r for r in rates]),
        "gain_last_over_first": rates[-1] - rates[0],
    }
    _write(args, f"{args.prefix}.csv", reports.csv_bytes(rows, fields))
    _write(args, f"{args.prefix}_summary.json", _report(args, {"rows": rows, "trend": summary}))
    for r in rows:
        print(f"n={r['n']} m={r['m']} success_rate={r['success_rate']:.3f} median_iters={r['median_iters']:g}")
    print(f"trend: inversions={summary['inversions']} gain={summary['gain_last_over_first']:+.3f}")
    return EXIT_OK


def cmd_stability(args) -> int:
    ens, _ = _instance(args)
    if args.pairs < 1:
        raise UsageError("--pairs must be >= 1")
    est = stability_estimate(ens, args.pairs, args.seed)
    _write(args, f"{args.prefix}.json", _report(args, est.to_dict()))
    print(
        f"alpha_hat={est.alpha_hat:.6g} beta_hat={est.beta_hat:.6g} "
        f"condition_ratio={est.condition_ratio:.4g} injective={est.injective}"
    )
    if not est.injective:
        print("ensemble is not injective on the sampled pairs", file=sys.stderr)
        return EXIT_CLAIM
    return EXIT_OK


def cmd_landscape(args) -> int:
    ens, z = _instance(args)
    if z is None:
        raise UsageError("landscape needs --truth with --ensemble")
    p = LossProblem(ens, forward_map(ens, z))
    given = [args.beta_thr, args.zeta, args.gamma]
    if all(v is not None for v in given):
        th = Thresholds(args.beta_thr, args.zeta, args.gamma)
    elif any(v is not None for v in given) and args.beta_thr is None:
        raise UsageError("give all of --beta-thr, --zeta, --gamma, or only --beta-thr")
    else:
        # calibrate on an independent pilot instance of the same shape
        pseed = derive_seed(args.seed, 300)
        pens = sample_ensemble("hermitian_gaussian", ens.n, ens.m, 1.0, pseed)
        pz = float(np.linalg.norm(z)) * unit_sphere(derive_rng(pseed, 5), ens.n)
        th = calibrate_thresholds(
            LossProblem(pens, forward_map(pens, pz)), pz, args.pilot_points, pseed, beta_thr=args.beta_thr
        )
    scan = landscape_scan(p, z, args.points, th, args.generator, args.seed)
    body = {"scan": scan.to_dict()}
    failed = len(scan.violations) > 0
    if args.local_min_trials > 0:
        zeta_tol = args.zeta_tol if args.zeta_tol is not None else 1e-6
        lm = local_min_global_check(
            ens, z, args.local_min_trials, SolverConfig(max_iters=args.max_iters), zeta_tol, args.seed, jobs=args.jobs
        )
        body["local_min"] = lm.to_dict()
        failed = failed or bool(lm.counterexamples)
        print(f"local-min trials={lm.trials} converged={lm.converged} counterexamples={len(lm.counterexamples)}")
    fields = ["index", "regime", "gradient_norm", "normalized_curvature", "distance_to_truth", "verdict"]
    _write(args, f"{args.prefix}.json", _report(args, body))
    _write(args, f"{args.prefix}.csv", reports.csv_bytes(scan.csv_rows(), fields))
    print("thresholds: " + " ".join(f"{k}={v:.4g}" for k, v in th.to_dict().items() if v is not None))
    print("verdicts: " + " ".join(f"{k}={v}" for k, v in scan.histogram.items()))
    return EXIT_CLAIM if failed else EXIT_OK


def cmd_concentration(args) -> int:
    if not args.epsilon > 0:
        raise UsageError("--epsilon must be positive")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.xi is not None and not 0 < args.xi < 1:
        raise UsageError("--xi must lie in (0, 1)")
    rep = concentration_experiment(args.n, args.m, args.trials, args.epsilon, args.seed)
    body = {"report": rep.to_dict()}
    failed = args.xi is not None and rep.tail_fraction > args.xi
    if args.ms:
        trend = concentration_trend(args.n, args.ms, args.trials, args.epsilon, range(args.seed, args.seed + args.trend_seeds))
        body["trend"] = trend
        print(f"trend over m={trend['ms']}: inversions={trend['inversions']}")
    if args.cross_term:
        ct = cross_term_experiment(args.n, args.m, args.trials, args.seed)
        body["cross_term"] = ct.to_dict()
        print(f"cross-term normalized mean={ct.normalized_mean:.4f} (exact expectation {ct.expected_normalized:.4f})")
    _write(args, f"{args.prefix}.json", _report(args, body))
    _write(args, f"{args.prefix}.csv", reports.csv_bytes(rep.csv_rows(), ["trial", "ratio", "deviation"]))
    print(f"mean_ratio={rep.empirical_mean_ratio:.4f} tail_fraction={rep.tail_fraction:.4f}")
    return EXIT_CLAIM if failed else EXIT_OK


def cmd_covering(args) -> int:
    if not 0 < args.delta < 0.5:
        raise UsageError("--delta must lie in (0, 1/2)")
    if args.ensemble:
        ens = deserialize_ensemble(_read(args.ensemble))
        n = ens.n
    else:
        n = args.n
        if args.matrices < 1:
            raise UsageError("--matrices must be >= 1")
    if not 1 <= n <= MAX_DIM:
        raise UsageError(f"covering checks are limited to n <= {MAX_DIM}")
    if not args.ensemble:
        ens = sample_ensemble("hermitian_gaussian", n, args.matrices, 1.0, args.seed)
    mats = list(ens.matrices)
    try:
        reps = [covering_net_check(a, args.delta, args.samples, args.seed) for a in mats]
    except CoveringError as exc:
        print(f"net construction failed: {exc}", file=sys.stderr)
        return EXIT_CLAIM
    rows = [{"index": i, **r.to_dict()} for i, r in enumerate(reps)]
    fields = ["index", "n", "net_delta", "net_size", "covering_radius", "sup_net", "sup_dense", "sup_exact", "lower", "upper", "holds"]
    _write(args, f"{args.prefix}.json", _report(args, {"checks": rows, "all_hold": all(r.holds for r in reps)}))
    _write(args, f"{args.prefix}.csv", reports.csv_bytes(rows, fields))
    broken = [r["index"] for r in rows if not r["holds"]]
    print(f"matrices={len(reps)} net_size={reps[0].net_size} broken={len(broken)}")
    return EXIT_CLAIM if broken else EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_battery

    fixture = _read(args.fixture) if args.fixture else None
    results = run_battery(fixture)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.ok else 'FAIL'}  {r.detail}")
    failed = [r.name for r in results if not r.ok]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CLAIM
    print(f"all {len(results)} invariants hold")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_solver_flags(sp):
    sp.add_argument("--max-iters", type=int, default=5000)
    sp.add_argument("--step-policy", choices=["backtracking", "fixed"], default="backtracking")
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--grad-tol", type=float, default=None)
    sp.add_argument("--success-tol", type=float, default=1e-5)
    sp.add_argument("--init", choices=["random_gaussian", "given"], default="random_gaussian")
    sp.add_argument("--init-scale", type=float, default=1.0)
    sp.add_argument("--x0", help="initial point file for --init given")


def _add_instance_flags(sp, kind=True):
    sp.add_argument("--ensemble", help="ensemble file; otherwise a fresh one is drawn")
    sp.add_argument("--truth", help="ground-truth file")
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    if kind:
        sp.add_argument("--kind", type=_kind, default="hermitian_gaussian")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1, help="worker processes for trial batteries")
    common.add_argument("--out-dir", default=".")
    common.add_argument("--config", help="JSON or YAML file of flag defaults")

    parser = argparse.ArgumentParser(prog="quadfeas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", parents=[common], help="write an ensemble, ground truth and observations")
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--kind", type=_kind, default="hermitian_gaussian")
    sp.add_argument("--variance", type=float, default=1.0)
    sp.add_argument("--noise", type=float, default=0.0, help="noise standard deviation per observation")
    sp.add_argument("--scale", type=float, default=1.0, help="norm of the ground truth")
    sp.add_argument("--prefix", default="instance")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("solve", parents=[common], help="recover x by gradient descent")
    sp.add_argument("--ensemble")
    sp.add_argument("--observations")
    sp.add_argument("--truth")
    sp.add_argument("--prefix", default="solve")
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", parents=[common], help="success rate over an m-grid")
    sp.add_argument("--n", type=int, default=16)
    sp.add_argument("--ms", type=_int_list, default=None, help="comma-separated m values")
    sp.add_argument("--m-factors", type=_int_list, default=[2, 4, 6, 8, 10], help="m = factor * n when --ms is absent")
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--kind", type=_kind, default="hermitian_gaussian")
    sp.add_argument("--max-iters", type=int, default=5000)
    sp.add_argument("--success-tol", type=float, default=1e-5)
    sp.add_argument("--prefix", default="sweep")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("stability", parents=[common], help="estimate the stability constants")
    _add_instance_flags(sp)
    sp.add_argument("--pairs", type=int, default=10000)
    sp.add_argument("--prefix", default="stability")
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("landscape", parents=[common], help="strict-saddle scan and local-minimum check")
    _add_instance_flags(sp)
    sp.add_argument("--points", type=int, default=1000)
    sp.add_argument("--generator", choices=["mixed", "uniform", "trajectory", "near_orbit", "orbit"], default="mixed")
    sp.add_argument("--pilot-points", type=int, default=500)
    sp.add_argument("--beta-thr", type=float)
    sp.add_argument("--zeta", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--local-min-trials", type=int, default=0)
    sp.add_argument("--zeta-tol", type=float)
    sp.add_argument("--max-iters", type=int, default=5000)
    sp.add_argument("--prefix", default="landscape")
    sp.set_defaults(func=cmd_landscape)

    sp = sub.add_parser("concentration", parents=[common], help="distribution of the averaged ratio")
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--m", type=int, default=500)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.add_argument("--xi", type=float, help="failure budget: exit 1 if the tail fraction exceeds it")
    sp.add_argument("--ms", type=_int_list, default=None, help="m-grid for the tail-fraction trend")
    sp.add_argument("--trend-seeds", type=int, default=10)
    sp.add_argument("--cross-term", action="store_true", help="also report the cross-term statistic")
    sp.add_argument("--prefix", default="concentration")
    sp.set_defaults(func=cmd_concentration)

    sp = sub.add_parser("covering", parents=[common], help="delta-net sandwich check")
    sp.add_argument("--ensemble", help="check these matrices instead of random ones")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--delta", type=float, default=0.25)
    sp.add_argument("--matrices", type=int, default=20)
    sp.add_argument("--samples", type=int, default=10**6)
    sp.add_argument("--prefix", default="covering")
    sp.set_defaults(func=cmd_covering)

    sp = sub.add_parser("verify", parents=[common], help="run the invariant battery")
    sp.add_argument("--fixture", help="ensemble file to validate alongside the battery")
    sp.set_defaults(func=cmd_verify)
    return parser


def _load_config(path) -> dict:
    try:
        doc = yaml.safe_load(_read(path).decode("utf-8"))
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a mapping of flag names to values")
    return {str(k).replace("-", "_"): v for k, v in doc.items()}


REQUIRED = {"gen": ("n", "m"), "solve": ("ensemble", "observations")}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _load_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(actions) - {"config"})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        cfg.pop("config", None)
        for k, v in cfg.items():
            t = actions[k].type
            if t is not None and v is not None and not isinstance(v, list):
                try:
                    cfg[k] = t(v)
                except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"config key {k!r}: {exc}") from None
        # config values become defaults, so flags on the command line still win
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    for dest in REQUIRED.get(args.command, ()):
        if getattr(args, dest) is None:
            raise UsageError(f"missing required option --{dest.replace('_', '-')}")
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"error: bad input file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
