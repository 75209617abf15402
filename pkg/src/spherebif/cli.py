"""Command-line front end: ``spherebif {solve,bifurcate,simulate,product,inequality}``.

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import Spacing, SweepSpec, sweep
from .energy import VMFMixture, Verdict, classify_uniform, energy_of, entropy_inequality_residual, path_energy_derivatives
from .equilibrium import Kind, ModelParams, find_eta, solve_equilibria
from .particle_sim import Scheme, SimConfig, make_rng, run, run_product, uniform_on_sphere
from .product_spheres import GRAMMAR, EnumerationCapError, enumerate_equilibria, global_minimizer, parse_product_spec

THREADS_ENV = "SPHEREBIF_THREADS"
INEQUALITY_SLACK = 1e-8


class RuntimeFailure(Exception):
    """Maps to exit code 1."""


def fmt(x):
    """17 significant digits; round-trips through float() exactly."""
    if x is None:
        return ""
    return format(float(x), ".17g")


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write_output(path, text, args, argv, started):
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise RuntimeFailure(f"cannot write {path}: {exc}") from exc
    _write_manifest(path, args, argv, started)


def _write_manifest(path, args, argv, started):
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command_line": list(argv),
        "config": config,
        "seed": config.get("seed"),
        "tool_version": __version__,
        "wall_time_seconds": round(time.perf_counter() - started, 6),
        "outputs": {path.name: {"sha256": digest}},
    }
    side = path.with_name(path.name + ".manifest.json")
    try:
        side.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    except OSError as exc:
        raise RuntimeFailure(f"cannot write {side}: {exc}") from exc


def _require(parser, args, *names):
    for name in names:
        if getattr(args, name) is None:
            parser.error(f"--{name.replace('_', '-')} is required")


# --- solve -----------------------------------------------------------------


def cmd_solve(args, parser, argv, started):
    _require(parser, args, "d", "kappa")
    if args.d < 1 or not args.kappa > 0:
        parser.error("need d >= 1 and kappa > 0")
    params = ModelParams(args.d, args.kappa)
    sols = solve_equilibria(params)
    rows = []
    for sol in sols:
        energy = energy_of(sol, params).value
        if sol.kind is Kind.UNIFORM:
            verdict = classify_uniform(params).verdict
        else:
            second = path_energy_derivatives(sol.eta, params)[1]
            verdict = Verdict.STABLE if second > 0 else Verdict.UNSTABLE
        rows.append([sol.kind.value, sol.eta, sol.com_norm, energy, verdict.value])
    best = min(range(len(rows)), key=lambda i: rows[i][3])
    for i, row in enumerate(rows):
        row.append(i == best)

    header = ["kind", "eta", "com_norm", "energy", "stability", "global_minimizer"]
    if args.json:
        payload = {
            "d": params.d,
            "kappa": params.kappa,
            "threshold": params.d + 1,
            "equilibria": [dict(zip(header, r)) for r in rows],
        }
        text = json.dumps(payload, indent=2) + "\n"
    elif args.csv:
        text = _csv_text(header, [[r[0], fmt(r[1]), fmt(r[2]), fmt(r[3]), r[4], str(r[5]).lower()] for r in rows])
    else:
        lines = [f"d={params.d} kappa={fmt(params.kappa)} threshold={params.d + 1}"]
        for r in rows:
            mark = "  <- global minimizer" if r[5] else ""
            lines.append(
                f"{r[0]:<10} eta={fmt(r[1])} com_norm={fmt(r[2])} energy={fmt(r[3])} stability={r[4]}{mark}"
            )
        text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write_output(args.out, text, args, argv, started)
    return 0


# --- bifurcate -------------------------------------------------------------

BIFURCATION_HEADER = ["kappa", "com_norm_uniform", "com_norm_localized", "eta", "energy_gap", "uniform_stability"]


def cmd_bifurcate(args, parser, argv, started):
    _require(parser, args, "d", "kappa_min", "kappa_max", "points", "out")
    try:
        spec = SweepSpec(args.d, args.kappa_min, args.kappa_max, args.points, Spacing(args.spacing))
    except ValueError as exc:
        parser.error(str(exc))
    curve = sweep(spec)
    rows = [
        [fmt(s.kappa), fmt(s.com_norm_uniform), fmt(s.com_norm_localized), fmt(s.eta), fmt(s.energy_gap), s.uniform_stability.value]
        for s in curve.samples
    ]
    _write_output(args.out, _csv_text(BIFURCATION_HEADER, rows), args, argv, started)
    n_loc = sum(s.com_norm_localized is not None for s in curve.samples)
    print(f"wrote {len(rows)} samples ({n_loc} on the localized branch) to {args.out}")
    return 0


# --- simulate --------------------------------------------------------------


def cmd_simulate(args, parser, argv, started):
    _require(parser, args, "d", "kappa")
    if args.d < 1 or args.kappa < 0:
        parser.error("need d >= 1 and kappa >= 0")
    try:
        cfg = SimConfig(args.particles, args.dt, args.t_end, args.burn_in, args.seed, Scheme(args.scheme))
        cfg.check_stability(args.kappa)
    except ValueError as exc:
        parser.error(str(exc))

    if args.product:
        try:
            spec = parse_product_spec(args.product, args.kappa)
        except ValueError as exc:
            parser.error(str(exc))
        results = run_product(spec, cfg, threads=args.threads)
        lines = []
        for (d, j), st in results:
            eta = find_eta(ModelParams(d, args.kappa))
            pred = 0.0 if eta is None else eta / args.kappa
            lines.append(f"S{d}[{j}] mean_com_norm={fmt(st.mean_com_norm)} +- {fmt(st.stderr)} prediction={fmt(pred)}")
        sys.stdout.write("\n".join(lines) + "\n")
        if args.out:
            header = ["t"] + [f"S{d}[{j}]" for (d, j), _ in results]
            times = results[0][1].times
            cols = [st.com_norm_series for _, st in results]
            rows = [[fmt(t)] + [fmt(c[k]) for c in cols] for k, t in enumerate(times)]
            _write_output(args.out, _csv_text(header, rows), args, argv, started)
        return 0

    params = ModelParams(args.d, args.kappa)
    stats = run(params, cfg)
    eta = find_eta(params) if args.kappa > 0 else None
    prediction = 0.0 if eta is None else eta / args.kappa
    print(f"mean_com_norm={fmt(stats.mean_com_norm)} +- {fmt(stats.stderr)}")
    print(f"prediction={fmt(prediction)}")
    if args.out:
        rows = [[fmt(t), fmt(c)] for t, c in zip(stats.times, stats.com_norm_series)]
        _write_output(args.out, _csv_text(["t", "com_norm"], rows), args, argv, started)
    return 0


# --- product ---------------------------------------------------------------


def cmd_product(args, parser, argv, started):
    _require(parser, args, "kappa")
    try:
        spec = parse_product_spec(args.spec, args.kappa)
    except ValueError as exc:
        parser.error(str(exc))
    lines = [f"space={spec.label()} kappa={fmt(spec.kappa)} thresholds={','.join(str(d + 1) for d in spec.dims)}"]
    if args.enumerate:
        try:
            eqs = enumerate_equilibria(spec)
        except EnumerationCapError as exc:
            raise RuntimeFailure(str(exc)) from exc
        eqs.sort(key=lambda e: (e.total_energy, e.localized_counts))
        for e in eqs:
            tag = "  <- global minimizer" if e is eqs[0] else ""
            lines.append(
                f"{e.short_label()} multiplicity={e.multiplicity} energy={fmt(e.total_energy)} "
                f"stable={str(e.stable).lower()}{tag}"
            )
    else:
        e = global_minimizer(spec)
        lines.append(f"global_minimizer={e.short_label()} energy={fmt(e.total_energy)}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write_output(args.out, text, args, argv, started)
    return 0


# --- inequality ------------------------------------------------------------


def random_mixture(rng, d, max_concentration, max_components=4):
    k = int(rng.integers(1, max_components + 1))
    weights = rng.dirichlet(np.ones(k))
    weights /= weights.sum()
    conc = rng.uniform(0.0, max_concentration, size=k)
    dirs = uniform_on_sphere(rng, k, d)
    return VMFMixture(weights, conc, dirs)


def cmd_inequality(args, parser, argv, started):
    _require(parser, args, "d")
    if args.d < 1 or args.trials < 1 or args.max_concentration < 0:
        parser.error("need d >= 1, trials >= 1, max-concentration >= 0")
    rng = make_rng(args.seed)
    mixtures = [random_mixture(rng, args.d, args.max_concentration) for _ in range(args.trials)]
    try:
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                residuals = list(pool.map(entropy_inequality_residual, mixtures))
        else:
            residuals = [entropy_inequality_residual(m) for m in mixtures]
    except ArithmeticError as exc:
        raise RuntimeFailure(f"quadrature failure: {exc}") from exc
    worst = min(residuals)
    ok = worst >= -INEQUALITY_SLACK
    text = (
        f"d={args.d} trials={args.trials} seed={args.seed} kappa={args.d + 1}\n"
        f"min_residual={fmt(worst)} max_residual={fmt(max(residuals))}\n"
        f"{'PASS' if ok else 'FAIL'}\n"
    )
    sys.stdout.write(text)
    if args.out:
        rows = [[i, fmt(r)] for i, r in enumerate(residuals)]
        _write_output(args.out, _csv_text(["trial", "residual"], rows), args, argv, started)
    return 0 if ok else 1


# --- parser ----------------------------------------------------------------


def _default_threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment; keys use option names."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="spherebif", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; command-line flags take precedence")
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help=f"worker threads (default from ${THREADS_ENV}, else 1)")
    common.add_argument("--out", help="write the result to this path plus a .manifest.json sidecar")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="list the equilibria for (d, kappa)")
    p.add_argument("--d", type=int)
    p.add_argument("--kappa", type=float)
    fmt_group = p.add_mutually_exclusive_group()
    fmt_group.add_argument("--json", action="store_true")
    fmt_group.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bifurcate", parents=[common], help="sweep kappa and write the bifurcation CSV")
    p.add_argument("--d", type=int)
    p.add_argument("--kappa-min", type=float)
    p.add_argument("--kappa-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--spacing", choices=[s.value for s in Spacing], default=Spacing.LINEAR.value)
    p.set_defaults(func=cmd_bifurcate)

    p = sub.add_parser("simulate", parents=[common], help="run the interacting particle system")
    p.add_argument("--d", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--particles", "--N", type=int, default=2000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=30.0)
    p.add_argument("--burn-in", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.PROJECT_RENORMALIZE.value)
    p.add_argument("--product", help="simulate every block of a product space, e.g. S1^2xS2")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("product", parents=[common], help="equilibria on a product of spheres")
    p.add_argument("spec", help=GRAMMAR)
    p.add_argument("--kappa", type=float)
    p.add_argument("--enumerate", action="store_true", help="list every equilibrium class")
    p.set_defaults(func=cmd_product)

    p = sub.add_parser("inequality", parents=[common], help="test the entropy inequality on random vMF mixtures")
    p.add_argument("--d", type=int)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-concentration", type=float, default=8.0)
    p.set_defaults(func=cmd_inequality)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        values = read_config(known.config)
    except (OSError, ValueError) as exc:
        parser.error(f"bad config file: {exc}")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        dests = {a.dest: a for a in sp._actions}
        updates = {}
        for key, value in values.items():
            action = dests.get(key)
            if action is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                updates[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    updates[key] = action.type(value) if action.type else value
                except ValueError:
                    parser.error(f"bad config value {key} = {value!r}")
        sp.set_defaults(**updates)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    try:
        return args.func(args, subparser, argv, started)
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
