"""Synthetic workloads and the timing harness."""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import asdict, dataclass, fields
from typing import Iterable, TextIO

import numpy as np

from .errors import EmptyRequest, InsufficientAttributes, InsufficientRoots, MalformedLine
from .evaluate import CompiledFormula, best
from .formula import Clause, Formula, Predicate, Relation, Schema, Statement, make_clause
from .rewrite import apply_sequence, canonicalize, clear_cache
from .taxonomy import Taxonomy, gen_random, gen_regular, gen_scale_free

COLUMNS = [
    "seed", "taxonomy_kind", "fanout", "depth", "attrs", "clauses", "n", "sequence",
    "rewrite_ms", "best_ms_plain", "best_ms_heuristic", "best_card", "relevant", "good_run",
]
GOOD_RUN_SEQUENCES = ("TST", "STST")


# ---- data and preference generators ----------------------------------------------

def gen_dataset(schema: Schema, n: int, seed: int = 0) -> Relation:
    """``n`` tuples with each value drawn uniformly from its whole taxonomy."""
    rng = np.random.default_rng(seed)
    cols = []
    for tax in schema.taxonomies:
        vals = np.array(tax.values, dtype=object)
        cols.append(vals[rng.integers(0, len(vals), size=n)] if n else vals[:0])
    rows = list(zip(*cols)) if n else []
    return Relation(schema, [tuple(r) for r in rows])


def _as_schema(tax_or_schema) -> Schema:
    if isinstance(tax_or_schema, Schema):
        return tax_or_schema
    return Schema([(tax_or_schema.name or "A1", tax_or_schema)])


def _conflict_values(tax: Taxonomy, rng) -> tuple[str, str, str]:
    roots = tax.roots()
    with_children = [r for r in roots if tax.children(r)]
    if len(roots) < 2 or not with_children:
        raise InsufficientRoots(
            f"taxonomy {tax.name!r} needs two maximal values, one of them with descendants")
    v2 = with_children[rng.integers(len(with_children))]
    others = [r for r in roots if r != v2]
    v1 = others[rng.integers(len(others))]
    below = [v for v in tax.down_values(v2) if v != v2]
    v2p = below[rng.integers(len(below))]
    return v1, v2, v2p


def gen_conflicting(tax_or_schema, pairs: int, seed: int = 0, attr: int = 0) -> Formula:
    """``pairs`` statement pairs ``v1 > v2`` and ``v2' > v1`` with ``v2'`` strictly below ``v2``."""
    if pairs < 1:
        raise EmptyRequest("at least one pair of preferences is required")
    schema = _as_schema(tax_or_schema)
    tax = schema.taxonomies[attr]
    rng = np.random.default_rng(seed)
    stmts = []
    for _ in range(pairs):
        v1, v2, v2p = _conflict_values(tax, rng)
        k = len(stmts)
        stmts.append(Statement(f"P{k + 1}", (Clause((Predicate(attr, v1),), (Predicate(attr, v2),)),)))
        stmts.append(Statement(f"P{k + 2}", (Clause((Predicate(attr, v2p),), (Predicate(attr, v1),)),)))
    return Formula(schema, tuple(stmts))


def gen_contextual(schema: Schema, d: int, seed: int = 0, pairs: int = 1) -> Formula:
    """Conflicting pairs on the first attribute, each sharing a context on attributes 2..d.

    Context values are drawn among the maximal values of the other taxonomies
    and the same context appears on both sides of both statements of a pair.
    """
    if d < 1 or len(schema) < d:
        raise InsufficientAttributes(f"need {d} attributes, schema has {len(schema)}")
    if pairs < 1:
        raise EmptyRequest("at least one pair of preferences is required")
    rng = np.random.default_rng(seed)
    tax = schema.taxonomies[0]
    stmts = []
    for _ in range(pairs):
        v1, v2, v2p = _conflict_values(tax, rng)
        ctx = []
        for a in range(1, d):
            roots = schema.taxonomies[a].roots()
            ctx.append(Predicate(a, roots[rng.integers(len(roots))]))
        k = len(stmts)
        c1 = make_clause(schema, [Predicate(0, v1), *ctx], [Predicate(0, v2), *ctx])
        c2 = make_clause(schema, [Predicate(0, v2p), *ctx], [Predicate(0, v1), *ctx])
        stmts.append(Statement(f"P{k + 1}", (c1,)))
        stmts.append(Statement(f"P{k + 2}", (c2,)))
    return Formula(schema, tuple(stmts))


# ---- configuration ---------------------------------------------------------------

@dataclass
class BenchConfig:
    kind: str = "regular"            # regular | random | scalefree
    fanout: float = 5
    depth: int = 6
    exponent: float = 2.7
    target_nodes: int = 15000
    attrs: int = 1
    n: int = 10_000
    clauses: int = 2
    pref_kind: str = "conflicting"   # conflicting | contextual
    sequences: tuple = ("", "T", "TST", "STST")
    runs: int = 100
    seed: int = 0
    threshold: float = 0.02
    warmup: bool = True

    def seeds(self) -> list[int]:
        return [self.seed + k for k in range(self.runs)]


def _coerce(field_type, text: str):
    if field_type in ("int", int):
        return int(text)
    if field_type in ("float", float):
        return float(text)
    if field_type in ("bool", bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if field_type in ("tuple", tuple):
        return tuple(canonicalize(s).canonical for s in text.split(","))
    return text.strip()


def load_bench_config(path: str, **overrides) -> BenchConfig:
    """Read ``key = value`` lines naming BenchConfig fields."""
    types = {f.name: f.type for f in fields(BenchConfig)}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep or key not in types:
                raise MalformedLine(f"unknown or malformed setting {line!r}", source=path, line=lineno)
            values[key] = _coerce(types[key], val)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return BenchConfig(**values)


# ---- experiment ---------------------------------------------------------------

def build_taxonomy(cfg: BenchConfig, seed: int) -> Taxonomy:
    if cfg.kind == "regular":
        return gen_regular(int(cfg.fanout), cfg.depth, seed)
    if cfg.kind == "random":
        return gen_random(cfg.fanout, cfg.depth, seed)
    if cfg.kind == "scalefree":
        return gen_scale_free(cfg.target_nodes, cfg.exponent, seed)
    raise ValueError(f"unknown taxonomy kind {cfg.kind!r}")


def build_instance(cfg: BenchConfig, seed: int):
    """Schema, data and formula for one run."""
    taxes = [build_taxonomy(cfg, seed * 1000 + a) for a in range(cfg.attrs)]
    schema = Schema([(f"A{a + 1}", t) for a, t in enumerate(taxes)])
    rel = gen_dataset(schema, cfg.n, seed)
    pairs = max(1, (cfg.clauses + 1) // 2)
    if cfg.pref_kind == "contextual" and cfg.attrs > 1:
        f = gen_contextual(schema, cfg.attrs, seed, pairs=pairs)
    else:
        f = gen_conflicting(schema, pairs, seed)
    return schema, rel, f


def _ms(seconds: float) -> float:
    return round(seconds * 1000.0, 3)


def run_single(cfg: BenchConfig, seed: int) -> list[dict]:
    schema, rel, f = build_instance(cfg, seed)
    wanted = [canonicalize(s).canonical for s in cfg.sequences]
    needed = list(dict.fromkeys(wanted + list(GOOD_RUN_SEQUENCES)))
    results = {}
    for seq in needed:
        clear_cache()
        t0 = time.perf_counter()
        g = apply_sequence(f, seq)
        rewrite_s = time.perf_counter() - t0
        cf = CompiledFormula(g, rel.rows)
        plain = best(g, rel, heuristic=False, compiled=cf)
        heur = best(g, rel, heuristic=True, compiled=cf)
        results[seq] = (rewrite_s, plain, heur, len(g))
    good = any(len(results[s][2]) < cfg.threshold * cfg.n for s in GOOD_RUN_SEQUENCES)
    rows = []
    for seq in wanted:
        rewrite_s, plain, heur, n_stmts = results[seq]
        rows.append({
            "seed": seed,
            "taxonomy_kind": cfg.kind,
            "fanout": cfg.fanout,
            "depth": cfg.depth,
            "attrs": cfg.attrs,
            "clauses": cfg.clauses,
            "n": cfg.n,
            "sequence": seq or "ε",
            "rewrite_ms": _ms(rewrite_s),
            "best_ms_plain": _ms(plain.elapsed),
            "best_ms_heuristic": _ms(heur.elapsed),
            "best_card": len(heur),
            "relevant": heur.relevant_count,
            "good_run": good,
            # not written to CSV, handy for checks
            "_statements": n_stmts,
            "_agree": plain.indices == heur.indices,
            "_comparisons_plain": plain.comparisons,
            "_comparisons_heuristic": heur.comparisons,
        })
    return rows


def run_benchmark(cfg: BenchConfig, progress=None) -> list[dict]:
    """All runs of a configuration; a failing run is recorded and the rest continue."""
    if cfg.warmup and cfg.runs:
        try:
            run_single(cfg, cfg.seed)
        except Exception:
            pass
    rows = []
    for seed in cfg.seeds():
        try:
            rows.extend(run_single(cfg, seed))
        except Exception as e:  # noqa: BLE001 - recorded, not fatal
            rows.append({"seed": seed, "taxonomy_kind": cfg.kind, "error": f"{type(e).__name__}: {e}"})
        if progress:
            progress(seed)
    return rows


def write_rows(rows: Iterable[dict], out: TextIO) -> None:
    w = csv.DictWriter(out, fieldnames=COLUMNS + ["error"], extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)


def aggregate(rows: Iterable[dict], good_only: bool = False) -> dict[str, dict[str, float]]:
    """Mean and median of the numeric columns per sequence."""
    groups: dict[str, list[dict]] = {}
    for r in rows:
        if "error" in r or (good_only and not r["good_run"]):
            continue
        groups.setdefault(r["sequence"], []).append(r)
    out = {}
    for seq, rs in groups.items():
        cell = {"runs": len(rs)}
        for col in ("rewrite_ms", "best_ms_plain", "best_ms_heuristic", "best_card", "relevant"):
            vals = [float(r[col]) for r in rs]
            cell[f"{col}_mean"] = statistics.fmean(vals)
            cell[f"{col}_median"] = statistics.median(vals)
        out[seq] = cell
    return out


def config_dict(cfg: BenchConfig) -> dict:
    return asdict(cfg)
