"""``fairmatch`` command line.

Exit codes: 0 pass, 1 a fairness or optimality property failed, 2 usage or
capability problem, 3 input/output problem (unreadable or malformed files).
"""
from __future__ import annotations

import argparse
import contextlib
import json
import statistics
import sys
import time
from fractions import Fraction
from typing import Sequence

from .core import (
    CapabilityError,
    FairMatchError,
    ShapeError,
    UsageError,
    load_instance,
    oracle_to_json,
    parse_rational,
    save_instance,
)
from .engines import ENGINES, EDGE_POLICIES, POLICIES, EngineConfig, EngineInvariantError
from .fixtures import NAMES, load_fixture
from .gen import DYNAMICS, KINDS, GeneratorSpec, generate
from .oracle import theorem4_reproduce, theorem5_reproduce, verify_trace
from .trace import (
    ENGINE_MODES,
    MODES,
    Trace,
    TraceFormatError,
    TraceHeader,
    TraceRecord,
    dump_trace,
    load_trace,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (UsageError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _rational_list(text: str) -> list[Fraction]:
    return [_rational(part) for part in text.split(",") if part.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _open_out(path: str | None):
    return contextlib.nullcontext(sys.stdout) if path in (None, "-") else open(path, "w")


def _load(path: str):
    if path.startswith("fixture:"):
        return load_fixture(path.split(":", 1)[1])
    try:
        return load_instance(path)
    except (CapabilityError, ShapeError):
        raise
    except UsageError as exc:
        # a file that parses as JSON but does not describe an instance
        raise TraceFormatError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    spec = GeneratorSpec(args.kind, args.n, args.m, args.p, args.seed, args.dynamics, args.k,
                         args.a, args.horizon)
    oracle = generate(spec)
    if args.out in (None, "-"):
        json.dump(oracle_to_json(oracle), sys.stdout)
        sys.stdout.write("\n")
    else:
        save_instance(oracle, args.out)
    return EXIT_OK


def cmd_fixture(args: argparse.Namespace) -> int:
    oracle = load_fixture(args.name)
    if args.out in (None, "-"):
        json.dump(oracle_to_json(oracle), sys.stdout)
        sys.stdout.write("\n")
    else:
        save_instance(oracle, args.out)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    oracle = _load(args.instance)
    mode = ENGINE_MODES[args.engine]
    if args.mode is not None and args.mode != mode:
        raise ShapeError(f"{args.engine} runs in {mode} mode, not {args.mode}")
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    config = EngineConfig(args.policy, args.edge_policy, args.a)
    engine = ENGINES[args.engine](oracle, config)
    header = TraceHeader(args.engine, mode, oracle.n, oracle.m,
                         args.a if args.a is not None else oracle.a)
    ok = True
    with _open_out(args.out) as fh:
        dump_trace(Trace(header), fh)
        for _ in range(args.steps):
            try:
                report = engine.step()
            except EngineInvariantError as exc:
                print(f"engine invariant broken: {exc}", file=sys.stderr)
                return EXIT_FAIL
            ok &= report.ok
            fh.write(json.dumps(TraceRecord.from_report(report).to_json(), sort_keys=True) + "\n")
    if not ok:
        print("some step reported a failed verdict", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args: argparse.Namespace) -> int:
    oracle = _load(args.instance)
    trace = load_trace(args.trace)
    mode = args.mode or trace.header.mode
    report = verify_trace(oracle, trace, mode, args.a_sweep or ())
    print(report)
    if report.failure is not None and report.failure.state is not None and args.dump:
        print(json.dumps(report.failure.state, indent=1))
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_counterexample(args: argparse.Namespace) -> int:
    if args.which == "thm4":
        if args.no_maxweight:
            raise UsageError("--no-maxweight applies to thm5 only")
        rep4 = theorem4_reproduce()
        print("\n".join(rep4.lines()))
        return EXIT_OK if rep4.ok else EXIT_FAIL
    rep5 = theorem5_reproduce(include_relaxed=True)
    if args.no_maxweight:
        relaxed = rep5.relaxed
        assert relaxed is not None
        print("\n".join(l for l in rep5.lines() if l.startswith(("any-perfect", "  witness"))))
        return EXIT_OK if relaxed.exists else EXIT_FAIL
    print("\n".join(l for l in rep5.lines() if not l.startswith(("any-perfect", "  witness"))))
    ok = not rep5.constrained.exists and not rep5.claim_failures and rep5.max_weight == Fraction(3, 2)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args: argparse.Namespace) -> int:
    rows = []
    ok = True
    for n in args.n:
        times: list[float] = []
        worst = 0
        for seed in range(args.seeds):
            spec = GeneratorSpec("symmetric-binary", n, n, args.p, seed, args.dynamics, args.k,
                                 args.a, horizon=min(args.steps, 50) or 1)
            engine = ENGINES["sym-bin"](generate(spec))
            for _ in range(args.steps):
                start = time.perf_counter()
                report = engine.step()
                times.append(time.perf_counter() - start)
                worst = max(worst, report.iterations)
        bound = 2 * n * n
        ok &= worst <= bound
        mean = statistics.fmean(times) if times else 0.0
        rows.append((n, args.seeds * args.steps, mean * 1e3, worst, bound))
    print(f"{'n':>4} {'steps':>7} {'mean ms/step':>13} {'max swaps':>10} {'2n^2':>6}")
    for n, steps, ms, worst, bound in rows:
        flag = "" if worst <= bound else "  BOUND EXCEEDED"
        print(f"{n:>4} {steps:>7} {ms:>13.3f} {worst:>10} {bound:>6}{flag}")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairmatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded instance file")
    g.add_argument("--kind", choices=KINDS, default="symmetric-binary")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--p", type=float, default=0.5, help="like density")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dynamics", choices=DYNAMICS, default="static")
    g.add_argument("--k", type=int, default=1, help="like pairs flipped per step (flip-k)")
    g.add_argument("--a", type=_rational, default=Fraction(0), help="dislike value p/q")
    g.add_argument("--horizon", type=int, default=50, help="scripted timesteps (dynamic kinds)")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fixture", help="export a bundled example instance")
    f.add_argument("name", choices=NAMES)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fixture)

    r = sub.add_parser("run", help="run an engine and write a trace")
    r.add_argument("instance", help="instance file, or fixture:NAME")
    r.add_argument("--engine", choices=sorted(ENGINES), required=True)
    r.add_argument("--steps", type=int, default=10)
    r.add_argument("--policy", choices=POLICIES, default="lex")
    r.add_argument("--edge-policy", choices=EDGE_POLICIES, default="round-robin")
    r.add_argument("--a", type=_rational, help="report envy bounds as if dislikes were worth a")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="re-check a trace from scratch")
    v.add_argument("instance", help="instance file, or fixture:NAME")
    v.add_argument("trace")
    v.add_argument("--mode", choices=MODES)
    v.add_argument("--a-sweep", type=_rational_list,
                   help="also check (1 - a)-boundedness for these comma-separated a values")
    v.add_argument("--dump", action="store_true", help="print the state at the first failure")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("counterexample", help="reproduce an impossibility instance")
    c.add_argument("which", choices=("thm4", "thm5"))
    c.add_argument("--no-maxweight", action="store_true",
                   help="thm5: allow any perfect matching and print a witness")
    c.set_defaults(func=cmd_counterexample)

    b = sub.add_parser("bench", help="time the symmetric binary engine")
    b.add_argument("--n", type=_int_list, default=[2, 4, 8], help="comma-separated sizes")
    b.add_argument("--steps", type=int, default=100)
    b.add_argument("--seeds", type=int, default=3)
    b.add_argument("--p", type=float, default=0.5)
    b.add_argument("--dynamics", choices=DYNAMICS, default="redraw")
    b.add_argument("--k", type=int, default=1)
    b.add_argument("--a", type=_rational, default=Fraction(0))
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "m", 1) is None:
        args.m = args.n
    try:
        return args.func(args)
    except (TraceFormatError, json.JSONDecodeError) as exc:
        print(f"error: malformed input: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CapabilityError, ShapeError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FairMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
