"""Command line front end.

Exit codes: 0 ok, 2 model or schema error, 3 causality violation,
4 deadlock, 5 runtime error.
"""

import argparse
import os
import sys

from .casestudy import build_scaled_model
from .cosim import run_cosimulation
from .errors import CosimError
from .modelio import format_stats, parse_model, read_stats, write_model, write_traces
from .scheduler import validate
from .simtime import parse_duration


def _duration(text):
    try:
        return parse_duration(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def cmd_validate(args, out):
    doc = parse_model(args.model)
    code = 0
    for c in doc.clusters:
        v = validate(c)
        out.write(v.text)
        code = max(code, v.exit_code)
    return code


def cmd_schedule(args, out):
    doc = parse_model(args.model)
    clusters = [doc.cluster(args.cluster)] if args.cluster else list(doc.clusters)
    code = 0
    for c in clusters:
        v = validate(c)
        if v.schedule is None:
            out.write(v.text)
            code = max(code, v.exit_code)
            continue
        s = v.schedule
        out.write(f"# cluster {c.name}\n")
        out.write(f"hyperperiod_ps {s.hyperperiod}\n")
        out.write("activations " + " ".join(f"{m}={n}" for m, n in s.activations.items()) + "\n")
        out.write("order " + " ".join(str(a) for a in s.order) + "\n")
        for sig, n in s.initial_tokens.items():
            out.write(f"initial_tokens {sig} {n}\n")
        for i, a in enumerate(s.converter_accesses):
            out.write(f"access {i} {a.port} {a.direction} {a.activation} {a.sample} {a.time}\n")
    return code


def cmd_simulate(args, out):
    doc = parse_model(args.model)
    seed = doc.seed if args.seed is None else args.seed
    until = doc.until if args.until is None else args.until
    traces = run_cosimulation(doc, seed=seed, until=until)
    files = write_traces(traces, args.trace_dir, seed=seed, until=until)
    out.write(f"wrote {len(files)} files to {args.trace_dir}\n")
    if args.plot:
        from .plotting import render_figures
        figs = render_figures(args.trace_dir)
        out.write(f"wrote {len(figs)} figures to {os.path.join(args.trace_dir, 'figures')}\n")
    return 0


def cmd_scale(args, out):
    doc = build_scaled_model(args.sensors, args.cpus, seed=args.seed)
    write_model(doc, args.out)
    out.write(f"wrote {args.out}: {doc.platform.target_count} targets, "
              f"{doc.platform.initiator_count} initiators\n")
    return 0


def cmd_stats(args, out):
    if os.path.isdir(args.path):
        out.write(format_stats(read_stats(args.path)))
        return 0
    # a model file: structural counts only
    doc = parse_model(args.path)
    p = doc.platform
    out.write(f"initiators {p.initiator_count}\n")
    out.write(f"targets {p.target_count}\n")
    out.write(f"clusters {len(doc.clusters)}\n")
    out.write(f"tasks {len(p.tasks)}\n")
    return 0


def cmd_plot(args, out):
    from .plotting import render_figures
    for path in render_figures(args.trace_dir):
        out.write(path + "\n")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="tdfcosim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="infer, schedule and check causality of every cluster")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("schedule", help="print the static schedule")
    p.add_argument("model")
    p.add_argument("--cluster")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="co-simulate and write traces")
    p.add_argument("model")
    p.add_argument("--seed", type=int)
    p.add_argument("--until", type=_duration, help="e.g. 100ms, 2.5us, 40000ps")
    p.add_argument("--trace-dir", required=True)
    p.add_argument("--plot", action="store_true", help="also render PNG figures")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scale", help="emit a scaled case-study model")
    p.add_argument("--sensors", type=_positive, required=True)
    p.add_argument("--cpus", type=_positive, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("stats", help="summarize a trace directory or a model file")
    p.add_argument("path")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plot", help="render figures for an existing trace directory")
    p.add_argument("trace_dir")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except CosimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
