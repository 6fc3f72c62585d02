"""Brute-force extensional semantics over an enumerated domain.

Every statement is materialised as a dense boolean matrix over the domain
(rows: better tuple, columns: worse tuple).  The operators are replayed with
plain set algebra on those matrices, independently of the box reasoning used by
the formula layer, and the two pipelines are compared stage by stage.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainTooLarge
from .formula import Formula, Relation, Schema, Statement
from .rewrite import apply_word, canonicalize

DEFAULT_CAP = 250_000


def domain_size(schema: Schema) -> int:
    n = 1
    for t in schema.taxonomies:
        n *= len(t)
    return n


def enumerate_domain(schema: Schema, cap: int = DEFAULT_CAP) -> list[tuple[str, ...]]:
    """All tuples over the schema in lexicographic order of taxonomy value lists."""
    n = domain_size(schema)
    if n > cap:
        raise DomainTooLarge(f"domain has {n} tuples, above the cap of {cap}")
    return list(itertools.product(*(t.values for t in schema.taxonomies)))


class Domain:
    """An ordered list of tuples with per-attribute order tables for fast matching."""

    def __init__(self, schema: Schema, tuples):
        self.schema = schema
        self.tuples = [tuple(t) for t in tuples]
        self.codes = []
        self.leq = []
        for a, tax in enumerate(schema.taxonomies):
            vals = tax.values
            pos = {v: i for i, v in enumerate(vals)}
            self.codes.append(np.array([pos[t[a]] for t in self.tuples], dtype=np.int64))
            m = len(vals)
            table = np.zeros((m, m), dtype=bool)
            for i, v in enumerate(vals):
                for j, w in enumerate(vals):
                    table[i, j] = tax.leq(v, w)
            self.leq.append((table, pos))

    @classmethod
    def full(cls, schema: Schema, cap: int = DEFAULT_CAP) -> "Domain":
        return cls(schema, enumerate_domain(schema, cap))

    @classmethod
    def of_relation(cls, rel: Relation) -> "Domain":
        return cls(rel.schema, rel.rows)

    def __len__(self):
        return len(self.tuples)

    def side_vector(self, preds) -> np.ndarray:
        vec = np.ones(len(self.tuples), dtype=bool)
        for p in preds:
            table, pos = self.leq[p.attr]
            hit = table[self.codes[p.attr], pos[p.value]]
            vec &= ~hit if p.negated else hit
        return vec


def extension(p: Statement, dom: Domain) -> np.ndarray:
    """All pairs ``(i, j)`` of domain tuples with ``p(dom[i], dom[j])``."""
    n = len(dom)
    out = np.zeros((n, n), dtype=bool)
    for c in p.clauses:
        b = dom.side_vector(c.better)
        if not b.any():
            continue
        w = dom.side_vector(c.worse)
        out |= np.outer(b, w)
    return out


def _distinct_rows(m: np.ndarray):
    """Distinct rows of a boolean matrix and, for each row, the index of its class."""
    packed = np.packbits(m, axis=1)
    first: dict[bytes, int] = {}
    inverse = np.empty(m.shape[0], dtype=np.int64)
    reps = []
    for i, row in enumerate(packed):
        key = row.tobytes()
        k = first.get(key)
        if k is None:
            k = first[key] = len(reps)
            reps.append(i)
        inverse[i] = k
    return m[reps], inverse


def compose(e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
    """Relational composition, computed on the distinct rows of e1 and columns of e2."""
    mid = e1.any(axis=0) & e2.any(axis=1)
    n = e1.shape[0]
    if not mid.any():
        return np.zeros((n, n), dtype=bool)
    ua, ia = _distinct_rows(e1[:, mid])
    ubt, ib = _distinct_rows(e2[mid, :].T)
    small = (ua.astype(np.float32) @ ubt.T.astype(np.float32)) > 0
    return small[ia][:, ib]


def pack(e: np.ndarray) -> np.ndarray:
    return np.packbits(e, axis=1)


def contained(e1: np.ndarray, e2: np.ndarray) -> bool:
    """Subset test; works on boolean or bit-packed matrices alike."""
    return not np.bitwise_and(e1, np.invert(e2)).any()


@dataclass
class ExtensionRelation:
    """Per-statement extensions over one domain."""

    domain: Domain
    ids: list[str]
    exts: list[np.ndarray]

    @classmethod
    def of_formula(cls, f: Formula, dom: Domain) -> "ExtensionRelation":
        return cls(dom, [s.id for s in f.statements], [extension(s, dom) for s in f.statements])

    def union(self) -> np.ndarray:
        n = len(self.domain)
        out = np.zeros((n, n), dtype=bool)
        for e in self.exts:
            out |= e
        return out

    def pairs(self, k: int) -> set[tuple[int, int]]:
        return set(zip(*map(list, np.nonzero(self.exts[k]))))


def oracle_simplify(rel: ExtensionRelation) -> ExtensionRelation:
    ids, exts = [], []
    for sid, e in zip(rel.ids, rel.exts):
        if e.any():
            ids.append(sid)
            exts.append(e)
    n = len(exts)
    packed = [pack(e) for e in exts]
    keep = []
    for i in range(n):
        drop = False
        for j in range(n):
            if i == j or not contained(packed[i], packed[j]):
                continue
            if j < i or not contained(packed[j], packed[i]):
                drop = True
                break
        if not drop:
            keep.append(i)
    return ExtensionRelation(rel.domain, [ids[i] for i in keep], [exts[i] for i in keep])


def oracle_T(rel: ExtensionRelation) -> ExtensionRelation:
    """Accumulate compositions with the original statements until nothing new appears."""
    orig = list(zip(rel.ids, rel.exts))
    acc = list(orig)
    acc_packed = [pack(e) for e in rel.exts]
    seen = set()
    progress = True
    while progress:
        progress = False
        for iid, ei in list(acc):
            for jid, ej in orig:
                if (iid, jid) in seen:
                    continue
                seen.add((iid, jid))
                c = compose(ei, ej)
                if not c.any():
                    continue
                cp = pack(c)
                if any(contained(cp, ek) for ek in acc_packed):
                    continue
                acc.append((f"{iid}*{jid}", c))
                acc_packed.append(cp)
                progress = True
    return oracle_simplify(ExtensionRelation(rel.domain, [a for a, _ in acc], [e for _, e in acc]))


def oracle_S(rel: ExtensionRelation) -> ExtensionRelation:
    """Subtract reversed extensions of strictly more specific statements, in rounds."""
    ids, exts = list(rel.ids), list(rel.exts)
    while True:
        n = len(exts)
        fwd = [pack(e) for e in exts]
        rev = [pack(e.T) for e in exts]
        impl = []
        for i in range(n):
            impl.append([
                j for j in range(n)
                if j != i and contained(rev[j], fwd[i]) and not contained(fwd[i], rev[j])
            ])
        if not any(impl):
            break
        new_ids, new_exts = [], []
        for i in range(n):
            e = exts[i]
            sid = ids[i]
            for j in impl[i]:
                e = e & ~exts[j].T
                sid = f"{sid}!{ids[j]}"
            if e.any():
                new_ids.append(sid)
                new_exts.append(e)
        ids, exts = new_ids, new_exts
    return oracle_simplify(ExtensionRelation(rel.domain, ids, exts))


ORACLE_OPS = {"T": oracle_T, "S": oracle_S}


def oracle_word(rel: ExtensionRelation, word: str) -> ExtensionRelation:
    for op in word:
        rel = ORACLE_OPS[op](rel)
    return rel


# ---- best, directly from the definition ---------------------------------------

def strict_matrix(weak: np.ndarray) -> np.ndarray:
    return weak & ~weak.T


def oracle_best(weak: np.ndarray, members=None) -> list[int]:
    """Indices not strictly dominated by another member (all rows by default)."""
    strict = strict_matrix(weak)
    idx = np.arange(weak.shape[0]) if members is None else np.asarray(list(members), dtype=np.int64)
    if idx.size == 0:
        return []
    sub = strict[np.ix_(idx, idx)]
    dominated = sub.any(axis=0)
    return [int(i) for i in idx[~dominated]]


def is_transitive(rel: np.ndarray) -> bool:
    r = rel.astype(np.float32)
    two = (r @ r) > 0
    return contained(two, rel)


def warshall(rel: np.ndarray) -> np.ndarray:
    """Transitive closure by repeated squaring."""
    cur = rel.copy()
    while True:
        nxt = cur | ((cur.astype(np.float32) @ cur.astype(np.float32)) > 0)
        if (nxt == cur).all():
            return cur
        cur = nxt


# ---- cross-validation ---------------------------------------------------------

@dataclass
class StageReport:
    stage: str
    match: bool
    statements_match: bool
    formula_pairs: int
    oracle_pairs: int
    mismatches: list = field(default_factory=list)

    def as_dict(self):
        return {
            "stage": self.stage or "ε",
            "match": self.match,
            "statements_match": self.statements_match,
            "formula_pairs": self.formula_pairs,
            "oracle_pairs": self.oracle_pairs,
            "mismatches": self.mismatches,
        }


@dataclass
class EquivalenceReport:
    sequence: str
    canonical: str
    domain_size: int
    stages: list[StageReport]

    @property
    def ok(self) -> bool:
        return all(s.match for s in self.stages)

    def text(self) -> str:
        lines = [f"sequence {self.sequence or 'ε'} (canonical {self.canonical or 'ε'}), |D| = {self.domain_size}"]
        for s in self.stages:
            status = "match" if s.match else "MISMATCH"
            lines.append(f"  stage {s.stage or 'ε':<5} {status}: formula {s.formula_pairs} pairs, oracle {s.oracle_pairs} pairs")
            for a, b in s.mismatches:
                lines.append(f"    differs on ({a}) vs ({b})")
        return "\n".join(lines)

    def jsonl(self) -> str:
        return "\n".join(json.dumps({"sequence": self.canonical or "ε", **s.as_dict()}) for s in self.stages)


def check_equivalence(f: Formula, seq, schema: Schema | None = None, cap: int = DEFAULT_CAP,
                      dom: Domain | None = None, rewrite=apply_word) -> EquivalenceReport:
    """Run the formula and oracle pipelines side by side over the full domain."""
    schema = schema or f.schema
    s = canonicalize(seq) if isinstance(seq, str) else seq
    dom = dom or Domain.full(schema, cap)
    orc = ExtensionRelation.of_formula(f, dom)
    stages = []
    words = [""] + [s.canonical[: k + 1] for k in range(len(s.canonical))]
    for w in words:
        if w:
            orc = ORACLE_OPS[w[-1]](orc)
        fw = rewrite(f, w)
        fext = ExtensionRelation.of_formula(fw, dom)
        fu, ou = fext.union(), orc.union()
        diff = np.argwhere(fu != ou)
        mism = [(",".join(dom.tuples[i]), ",".join(dom.tuples[j])) for i, j in diff[:10]]
        same_stmts = len(fext.exts) == len(orc.exts) and all((a == b).all() for a, b in zip(fext.exts, orc.exts))
        stages.append(StageReport(w, not len(diff), same_stmts, int(fu.sum()), int(ou.sum()), mism))
    return EquivalenceReport(s.word, s.canonical, len(dom), stages)
