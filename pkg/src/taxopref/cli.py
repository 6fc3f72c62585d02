"""Command-line interface.

Exit status: 0 success, 1 oracle mismatch, 2 bad input, 3 resource limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import rewrite as rw
from .bench import (
    BenchConfig,
    aggregate,
    gen_conflicting,
    gen_contextual,
    gen_dataset,
    load_bench_config,
    run_benchmark,
    write_rows,
)
from .errors import CapacityExceeded, DomainTooLarge, InputError
from .evaluate import best, naive_best
from .formula import format_formula, parse_formula
from .io import load_schema, read_relation, write_relation
from .oracle import DEFAULT_CAP, check_equivalence
from .taxonomy import dump_taxonomy, gen_random, gen_regular, gen_scale_free

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


class _Output:
    """Writes to ``--out`` when given, else standard output."""

    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path and self.path != "-":
            self.fh = open(self.path, "w", encoding="utf-8", newline="")
            return self.fh
        return sys.stdout

    def __exit__(self, *exc):
        if self.fh:
            self.fh.close()


def _read_formula(arg: str, schema):
    if os.path.isfile(arg):
        with open(arg, encoding="utf-8") as fh:
            text = fh.read()
        try:
            return parse_formula(text, schema)
        except InputError as e:
            raise InputError(str(e), source=arg) from None
    return parse_formula(arg, schema)


def _warn(msg: str):
    print(f"warning: {msg}", file=sys.stderr)


# ---- subcommands ---------------------------------------------------------------

def cmd_rewrite(args) -> int:
    schema = load_schema(args.schema)
    f = _read_formula(args.formula, schema)
    seq = rw.canonicalize(args.seq)
    g = rw.apply_sequence(f, seq)
    with _Output(args.out) as out:
        out.write(f"# sequence {seq.word or 'ε'} canonical {seq}\n")
        out.write(format_formula(g, ids=True))
    return EXIT_OK


def cmd_best(args) -> int:
    schema = load_schema(args.schema)
    f = _read_formula(args.formula, schema)
    rel = read_relation(args.data, schema)
    seq = rw.canonicalize(args.seq)
    g = rw.apply_sequence(f, seq)
    if seq.transitive:
        res = best(g, rel, heuristic=args.heuristic, keep_irrelevant=args.keep_irrelevant)
    else:
        _warn(f"sequence {seq} does not end in T; Best is computed by the pairwise scan")
        res = naive_best(g, rel, keep_irrelevant=args.keep_irrelevant)
    stats = {
        "sequence": str(seq),
        "method": res.method,
        "input": len(rel),
        "relevant_count": res.relevant_count,
        "best": len(res),
        "comparisons": res.comparisons,
        "elapsed_ms": round(res.elapsed * 1000, 3),
    }
    with _Output(args.out) as out:
        if res.indices or args.stats is not None:
            write_relation(rel, out, res.indices)
        if args.stats == "-":
            for k, v in stats.items():
                out.write(f"# {k}: {v}\n")
    if args.stats not in (None, "-"):
        with open(args.stats, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(stats) + "\n")
    return EXIT_OK


def cmd_check(args) -> int:
    schema = load_schema(args.schema)
    f = _read_formula(args.formula, schema)
    words = [args.seq] if args.seq is not None else list(rw.CANONICAL)
    ok = True
    reports = []
    for w in words:
        rep = check_equivalence(f, w, schema, cap=args.max_domain,
                                rewrite=lambda g, word: rw.apply_word(g, word))
        reports.append(rep)
        ok &= rep.ok
        print(rep.text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for rep in reports:
                fh.write(rep.jsonl() + "\n")
    print("all stages match" if ok else "MISMATCH between formula and oracle pipelines")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_gen_tax(args) -> int:
    if args.kind == "regular":
        tax = gen_regular(int(args.fanout), args.depth, args.seed)
    elif args.kind == "random":
        tax = gen_random(args.fanout, args.depth, args.seed)
    else:
        tax = gen_scale_free(args.nodes, args.exponent, args.seed)
    with _Output(args.out) as out:
        dump_taxonomy(tax, out)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    schema = load_schema(args.schema)
    rel = gen_dataset(schema, args.n, args.seed)
    with _Output(args.out) as out:
        write_relation(rel, out)
    return EXIT_OK


def cmd_gen_prefs(args) -> int:
    schema = load_schema(args.schema)
    pairs = max(1, (args.clauses + 1) // 2)
    if args.kind == "contextual":
        f = gen_contextual(schema, args.attrs or len(schema), args.seed, pairs=pairs)
    else:
        f = gen_conflicting(schema, pairs, args.seed)
    with _Output(args.out) as out:
        out.write(format_formula(f))
    return EXIT_OK


def cmd_bench(args) -> int:
    overrides = {
        "kind": args.kind, "fanout": args.fanout, "depth": args.depth, "attrs": args.attrs,
        "n": args.n, "clauses": args.clauses, "pref_kind": args.pref_kind, "runs": args.runs,
        "seed": args.seed,
    }
    if args.seq:
        overrides["sequences"] = tuple(rw.canonicalize(s).canonical for s in args.seq.split(","))
    if args.config:
        cfg = load_bench_config(args.config, **overrides)
    else:
        cfg = BenchConfig(**{k: v for k, v in overrides.items() if v is not None})
    rows = run_benchmark(cfg)
    with _Output(args.out) as out:
        write_rows(rows, out)
    summary = aggregate(rows, good_only=False)
    for seq, cell in summary.items():
        print(f"# {seq or 'ε'}: runs={cell['runs']} rewrite_ms median={cell['rewrite_ms_median']:.3f} "
              f"best_ms median plain={cell['best_ms_plain_median']:.3f} heuristic={cell['best_ms_heuristic_median']:.3f} "
              f"|Best| median={cell['best_card_median']:g}", file=sys.stderr)
    return EXIT_OK


# ---- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="taxopref", description="Preference queries over taxonomies.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formula=True, seq=True):
        sp.add_argument("--schema", required=True, help="schema file with 'attribute = taxonomy.csv' lines")
        if formula:
            sp.add_argument("--formula", required=True, help="formula file or inline formula text")
        if seq:
            sp.add_argument("--seq", default="", help="operator sequence over T and S (default: empty)")
        sp.add_argument("--out", help="output file (default: standard output)")

    sp = sub.add_parser("rewrite", help="print the rewritten formula")
    common(sp)
    sp.set_defaults(func=cmd_rewrite)

    sp = sub.add_parser("best", help="print the Best tuples of a dataset as CSV")
    common(sp)
    sp.add_argument("--data", required=True, help="dataset CSV with a header row")
    sp.add_argument("--heuristic", action=argparse.BooleanOptionalAction, default=True,
                    help="presort by height index (default: on)")
    sp.add_argument("--keep-irrelevant", action="store_true",
                    help="also return tuples that match no clause side")
    sp.add_argument("--stats", nargs="?", const="-", default=None, metavar="JSONL",
                    help="append statistics as '#' lines, or as a JSON line to the given file")
    sp.set_defaults(func=cmd_best)

    sp = sub.add_parser("check", help="compare formula rewriting with the brute-force oracle")
    common(sp, seq=False)
    sp.add_argument("--seq", default=None, help="sequence to check (default: all eight representatives)")
    sp.add_argument("--max-domain", type=int, default=DEFAULT_CAP, help="largest domain to enumerate")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("gen-tax", help="generate a synthetic taxonomy")
    sp.add_argument("--kind", choices=["regular", "random", "scalefree"], default="regular")
    sp.add_argument("--fanout", type=float, default=5)
    sp.add_argument("--depth", type=int, default=6)
    sp.add_argument("--exponent", type=float, default=2.7)
    sp.add_argument("--nodes", type=int, default=15000, help="target size for scale-free taxonomies")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen_tax)

    sp = sub.add_parser("gen-data", help="generate a uniform random dataset")
    sp.add_argument("--schema", required=True)
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("gen-prefs", help="generate conflicting or contextual preferences")
    sp.add_argument("--schema", required=True)
    sp.add_argument("--kind", choices=["conflicting", "contextual"], default="conflicting")
    sp.add_argument("--clauses", type=int, default=2, help="number of input clauses (two per conflicting pair)")
    sp.add_argument("--attrs", type=int, default=None, help="attributes used by contextual preferences")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen_prefs)

    sp = sub.add_parser("bench", help="run timed experiments and write a CSV table")
    sp.add_argument("--config", help="file with 'field = value' lines")
    sp.add_argument("--kind", choices=["regular", "random", "scalefree"])
    sp.add_argument("--fanout", type=float)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--attrs", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--clauses", type=int)
    sp.add_argument("--pref-kind", choices=["conflicting", "contextual"])
    sp.add_argument("--seq", help="comma-separated sequences, e.g. 'e,T,TST,STST'")
    sp.add_argument("--runs", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainTooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except CapacityExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
