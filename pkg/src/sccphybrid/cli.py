"""Command-line driver.

Exit codes: 0 success, 1 syntax error, 2 semantic error, 64 usage error
(bad flags, unreadable files, invalid configuration), 70 simulation failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import output
from .config import ConfigError, PartitionSpec, RunSpec, build_setup, load_config
from .dynamic import CounterDrift, ZeroTotalPriority
from .engine import SimulationError, simulate, simulate_ensemble
from .lang import EvalError, SccpSyntaxError, SemanticError, load_program
from .rts import format_rts, prepare
from .tdsha import InconsistentKappa, approximability, edge_label, format_tdsha

EXIT_OK, EXIT_SYNTAX, EXIT_SEMANTIC, EXIT_USAGE, EXIT_SOFTWARE = 0, 1, 2, 64, 70

log = logging.getLogger("sccphybrid")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _sim_flags(p):
    p.add_argument("--config", help="flat TOML run configuration; flags override it")
    p.add_argument("--t-end", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--dt-out", type=float, help="output sampling interval")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--max-step", type=float)
    p.add_argument("--event-tol", type=float)
    p.add_argument("--max-instant-events", type=int)
    p.add_argument("--kappa", help="bottom, top, or comp=bits,... (initial kappa when dynamic)")
    p.add_argument("--dynamic", action="store_true", help="dynamic partitioning")
    p.add_argument("--policy", choices=("population", "rate", "fixed"))
    p.add_argument("--K", type=float)
    p.add_argument("--Lambda", type=float)
    p.add_argument("--dt", type=float, help="time scale of the rate policy")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--value", type=float, help="switching value of the fixed policy")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sccphybrid", description="Hybrid simulation of sCCP models.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="parse and validate a model")
    p.add_argument("model")

    p = sub.add_parser("compile", help="dump the RTS and/or the compiled automaton")
    p.add_argument("model")
    p.add_argument("--dump-rts", action="store_true")
    p.add_argument("--dump-tdsha", action="store_true")
    p.add_argument("--kappa")

    p = sub.add_parser("simulate", help="one trajectory")
    p.add_argument("model")
    _sim_flags(p)

    p = sub.add_parser("ensemble", help="mean and variance over independent runs")
    p.add_argument("model")
    _sim_flags(p)
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("compare", help="run several partitioning variants on one seed schedule")
    p.add_argument("model")
    _sim_flags(p)
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--variants", nargs="+", required=True,
                   help="bottom | top | kappa:<comp=bits,...> | dynamic:<policy>[:K=10,epsilon=1e-3,...]")
    return ap


# ---------------------------------------------------------------------------


def _read_program(path):
    try:
        return load_program(path)
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from exc


def _run_spec(args) -> RunSpec:
    if args.config:
        try:
            spec = load_config(args.config, validate=False)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    else:
        spec = RunSpec()
    part = spec.partition
    if args.dynamic:
        part.mode = "dynamic"
    for name in ("policy", "K", "Lambda", "dt", "epsilon", "value"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(part, name, v)
    if args.kappa:
        spec.kappa_text = args.kappa
    if args.out:
        spec.out = args.out
    part.validate()
    return spec


def _sim_config(spec, args, **extra):
    return spec.sim_config(t_end=args.t_end, seed=args.seed, dt_out=args.dt_out, rtol=args.rtol,
                           atol=args.atol, max_step=args.max_step, event_tol=args.event_tol,
                           max_instant_events=args.max_instant_events, **extra)


def _outdir(spec) -> Path:
    d = Path(spec.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_check(args) -> int:
    prog = _read_program(args.model)
    ext = prepare(prog)
    n_ok = n_all = 0
    print(f"{args.model}: ok, {len(ext.rts)} component(s), store {', '.join(prog.store_vars) or '-'}")
    for r in ext.rts:
        for e in r.edges:
            ok, reason = approximability(e, ext.params)
            n_all += 1
            n_ok += ok
            verdict = "approximable" if ok else f"not approximable ({reason})"
            print(f"  {edge_label(r.component, e.id)}  {e.exit} -> {e.enter}  {verdict}")
    print(f"{n_ok}/{n_all} edges continuously approximable")
    return EXIT_OK


def cmd_compile(args) -> int:
    ext = prepare(_read_program(args.model))
    if args.dump_rts:
        sys.stdout.write("".join(format_rts(r) for r in ext.rts))
    if args.dump_tdsha or not args.dump_rts:
        T = build_setup(ext, PartitionSpec(), args.kappa)
        if args.dump_tdsha:
            sys.stdout.write(format_tdsha(T))
        else:
            print(f"modes={len(T.modes)} continuous={len(T.tc)} "
                  f"instantaneous={len(T.td)} stochastic={len(T.ts)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _run_spec(args)
    ext = prepare(_read_program(args.model))
    setup = build_setup(ext, spec.partition, spec.kappa_string())
    cfg = _sim_config(spec, args)
    tr = simulate(setup, cfg)
    out = _outdir(spec)
    output.write_trajectory(tr, out / "trajectory.csv")
    output.write_events(tr, out / "events.csv")
    log.info("%d events, written to %s", len(tr.events), out)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    spec = _run_spec(args)
    ext = prepare(_read_program(args.model))
    setup = build_setup(ext, spec.partition, spec.kappa_string())
    cfg = _sim_config(spec, args, runs=args.runs, workers=args.workers)
    res = simulate_ensemble(setup, cfg)
    output.write_ensemble(res, _outdir(spec) / "ensemble.csv")
    return EXIT_OK


def parse_variant(text: str, base: PartitionSpec):
    """Variant string -> (PartitionSpec, kappa spec)."""
    kind, _, rest = text.partition(":")
    if kind in ("bottom", "top") and not rest:
        return PartitionSpec(), kind
    if kind == "kappa" and rest:
        return PartitionSpec(), rest
    if kind == "dynamic":
        policy, _, params = rest.partition(":")
        part = PartitionSpec(mode="dynamic", policy=policy or base.policy, K=base.K, Lambda=base.Lambda,
                             dt=base.dt, epsilon=base.epsilon, value=base.value)
        for item in filter(None, params.split(",")):
            name, _, value = item.partition("=")
            if name not in ("K", "Lambda", "dt", "epsilon", "value"):
                raise ConfigError(f"variant {text!r}: unknown parameter {name!r}")
            try:
                setattr(part, name, float(value))
            except ValueError:
                raise ConfigError(f"variant {text!r}: {name} must be a number") from None
        part.validate()
        return part, None
    raise ConfigError(f"cannot parse variant {text!r}")


def cmd_compare(args) -> int:
    spec = _run_spec(args)
    ext = prepare(_read_program(args.model))
    cfg = _sim_config(spec, args, runs=args.runs, workers=args.workers)
    variants = [(v, *parse_variant(v, spec.partition)) for v in args.variants]
    out = _outdir(spec)
    store = [ext.variables.index(v) for v in ext.store_vars]
    rows, means, logs = [], [], []
    for i, (name, part, kappa) in enumerate(variants):
        setup = build_setup(ext, part, kappa if kappa is not None else spec.kappa_string())
        t0 = time.perf_counter()
        if cfg.runs == 1:
            tr = simulate(setup, cfg)
            mean, counts = tr.values, tr.event_counts
            logs.append(output.write_events(tr))
            output.write_trajectory(tr, out / f"variant{i}_trajectory.csv")
        else:
            res = simulate_ensemble(setup, cfg)
            mean, counts = res.mean, res.event_counts
            logs.append(None)
            output.write_ensemble(res, out / f"variant{i}_ensemble.csv")
        wall = time.perf_counter() - t0
        means.append(mean[:, store])
        rows.append((name, wall, counts))
    kinds = ("stochastic", "instantaneous", "switch")
    header = ["variant", "runs", "wall_s", *kinds, "max_dev_vs_first", "same_events_as_first"]
    table = []
    for i, (name, wall, counts) in enumerate(rows):
        dev = float(np.max(np.abs(means[i] - means[0]))) if means[i].size else 0.0
        same = "-" if logs[i] is None else ("yes" if logs[i] == logs[0] else "no")
        table.append([name, str(cfg.runs), f"{wall:.3f}", *(str(counts.get(k, 0)) for k in kinds),
                      output.fmt(dev), same])
    output._write(out / "compare.csv", header, table)
    pair_rows = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            d = float(np.max(np.abs(means[i] - means[j]))) if means[i].size else 0.0
            pair_rows.append([rows[i][0], rows[j][0], output.fmt(d)])
    output._write(out / "compare_pairs.csv", ["variant_a", "variant_b", "max_abs_mean_dev"], pair_rows)
    widths = [max(len(r[c]) for r in [header] + table) for c in range(len(header))]
    for r in [header] + table:
        print("  ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip())
    return EXIT_OK


COMMANDS = {"check": cmd_check, "compile": cmd_compile, "simulate": cmd_simulate,
            "ensemble": cmd_ensemble, "compare": cmd_compare}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"sccphybrid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    model = getattr(args, "model", "")
    try:
        return COMMANDS[args.command](args)
    except SccpSyntaxError as exc:
        for d in exc.diagnostics:
            print(f"{model}:{d}", file=sys.stderr)
        return EXIT_SYNTAX
    except SemanticError as exc:
        for d in exc.diagnostics:
            print(f"{model}:{d}", file=sys.stderr)
        return EXIT_SEMANTIC
    except (UsageError, ConfigError, InconsistentKappa) as exc:
        print(f"sccphybrid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationError, ZeroTotalPriority, CounterDrift, EvalError) as exc:
        print(f"sccphybrid: simulation failed: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
