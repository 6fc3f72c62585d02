"""Preference formulas: syntax, parsing, printing and exact reasoning.

Semantically, one side of a clause constrains each attribute to a set of
values: the intersection of the down-sets of its positive predicates minus the
down-sets of its negated ones.  A clause is therefore a box (one value set per
attribute for the better tuple, one per attribute for the worse tuple), and a
statement is a finite union of boxes.  All reasoning below is exact box
arithmetic on integer bitsets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import (
    AmbiguousBareValue,
    CapacityExceeded,
    FormulaSyntaxError,
    UnknownValue,
    UnsatisfiableClause,
)
from .taxonomy import Taxonomy

MAX_CLAUSES = 4096
UNIVERSAL = "*"


# ---- schema and data ------------------------------------------------------

class Schema:
    """Ordered attribute names, each bound to a taxonomy."""

    def __init__(self, bindings: Iterable[tuple[str, Taxonomy]]):
        bindings = list(bindings)
        names = [a for a, _ in bindings]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be distinct")
        if not names:
            raise ValueError("a schema needs at least one attribute")
        self.attributes: tuple[str, ...] = tuple(names)
        self.taxonomies: tuple[Taxonomy, ...] = tuple(t for _, t in bindings)
        self._pos = {a: i for i, a in enumerate(names)}
        self._full = tuple(t.full_mask for t in self.taxonomies)
        self._side_cache: dict = {}

    def __len__(self):
        return len(self.attributes)

    def __repr__(self):
        return "Schema(" + ", ".join(f"{a}:{t.name or len(t)}" for a, t in zip(self.attributes, self.taxonomies)) + ")"

    def attr_index(self, name: str) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise UnknownValue(f"unknown attribute {name!r}") from None

    def taxonomy(self, attr) -> Taxonomy:
        return self.taxonomies[attr if isinstance(attr, int) else self.attr_index(attr)]

    def resolve_bare(self, value: str) -> int:
        hits = [i for i, t in enumerate(self.taxonomies) if value in t]
        if not hits:
            raise UnknownValue(f"value {value!r} belongs to no attribute taxonomy")
        if len(hits) > 1:
            names = ", ".join(self.attributes[i] for i in hits)
            raise AmbiguousBareValue(f"value {value!r} occurs in several taxonomies ({names}); write Attr<={value}")
        return hits[0]

    @property
    def full(self) -> tuple[int, ...]:
        return self._full

    def side_sets(self, side: tuple) -> tuple[int, ...]:
        """Per-attribute value bitsets admitted by a conjunction of predicates."""
        hit = self._side_cache.get(side)
        if hit is not None:
            return hit
        sets = list(self._full)
        for p in side:
            d = self.taxonomies[p.attr].down(p.value)
            if p.negated:
                sets[p.attr] &= ~d
            else:
                sets[p.attr] &= d
        out = tuple(sets)
        if len(self._side_cache) > 200_000:
            self._side_cache.clear()
        self._side_cache[side] = out
        return out

    def rect(self, clause: "Clause") -> tuple[int, ...]:
        return self.side_sets(clause.better) + self.side_sets(clause.worse)

    def check_tuple(self, values: Sequence[str]) -> tuple[str, ...]:
        if len(values) != len(self.attributes):
            raise ValueError(f"expected {len(self.attributes)} values, got {len(values)}")
        for v, t, a in zip(values, self.taxonomies, self.attributes):
            if v not in t:
                raise UnknownValue(f"value {v!r} is not in the taxonomy of {a}")
        return tuple(values)


@dataclass
class Relation:
    """A bag of tuples over a schema; tuples are value tuples in schema order."""

    schema: Schema
    rows: list[tuple[str, ...]] = field(default_factory=list)
    labels: list[str] | None = None

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def subset(self, indices: Iterable[int]) -> "Relation":
        idx = list(indices)
        labels = [self.labels[i] for i in idx] if self.labels else None
        return Relation(self.schema, [self.rows[i] for i in idx], labels)


# ---- syntax tree ------------------------------------------------------------

class Predicate(NamedTuple):
    attr: int
    value: str
    negated: bool = False

    def flipped(self) -> "Predicate":
        return Predicate(self.attr, self.value, not self.negated)


class Clause(NamedTuple):
    better: tuple[Predicate, ...]
    worse: tuple[Predicate, ...]

    def reversed(self) -> "Clause":
        return Clause(self.worse, self.better)


@dataclass(frozen=True)
class Statement:
    id: str
    clauses: tuple[Clause, ...]

    def __len__(self):
        return len(self.clauses)

    def reversed(self) -> "Statement":
        return Statement(self.id, tuple(c.reversed() for c in self.clauses))


@dataclass(frozen=True)
class Formula:
    schema: Schema = field(compare=False)
    statements: tuple[Statement, ...]

    def __len__(self):
        return len(self.statements)

    def __iter__(self):
        return iter(self.statements)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.statements]

    def statement(self, sid: str) -> Statement:
        for s in self.statements:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def clauses(self) -> list[Clause]:
        return [c for s in self.statements for c in s.clauses]

    def key(self) -> tuple:
        return tuple((s.id, s.clauses) for s in self.statements)

    def replace(self, statements: Iterable[Statement]) -> "Formula":
        return Formula(self.schema, tuple(statements))


def sort_side(schema: Schema, preds: Iterable[Predicate]) -> tuple[Predicate, ...]:
    uniq = set(preds)
    return tuple(sorted(uniq, key=lambda p: (p.attr, p.negated, schema.taxonomies[p.attr].index(p.value))))


def make_clause(schema: Schema, better: Iterable[Predicate], worse: Iterable[Predicate]) -> Clause:
    return Clause(sort_side(schema, better), sort_side(schema, worse))


# ---- exact semantics ----------------------------------------------------------

def side_satisfiable(side: tuple, schema: Schema) -> bool:
    return all(schema.side_sets(side))


def clause_satisfiable(c: Clause, schema: Schema) -> bool:
    """True iff some pair of tuples satisfies both sides of ``c``."""
    return all(schema.side_sets(c.better)) and all(schema.side_sets(c.worse))


def _box_inside(a, b) -> bool:
    return all(x & ~y == 0 for x, y in zip(a, b))


def _box_meets(a, b) -> bool:
    return all(x & y for x, y in zip(a, b))


def _covered(rect, others) -> bool:
    """Is box ``rect`` contained in the union of ``others``?

    Splits ``rect`` against the first overlapping box into the overlap and up
    to one slab per coordinate lying outside it, then recurses on the slabs.
    """
    for k, q in enumerate(others):
        if not _box_meets(rect, q):
            continue
        if _box_inside(rect, q):
            return True
        rest = others[k + 1:]
        cur = list(rect)
        for i, (a, b) in enumerate(zip(rect, q)):
            outside = a & ~b
            if outside:
                piece = cur.copy()
                piece[i] = outside
                if not _covered(tuple(piece), rest):
                    return False
                cur[i] = a & b
        return True
    return False


def boxes_covered(boxes, others) -> bool:
    others = [q for q in others if all(q)]
    return all(_covered(tuple(b), others) for b in boxes if all(b))


def clause_implies(c1: Clause, c2: Clause, schema: Schema) -> bool:
    r1 = schema.rect(c1)
    if not all(r1):
        return True
    return _box_inside(r1, schema.rect(c2))


def statement_boxes(p: Statement, schema: Schema, reverse: bool = False) -> list[tuple[int, ...]]:
    d = len(schema)
    out = []
    for c in p.clauses:
        r = schema.rect(c)
        if reverse:
            r = r[d:] + r[:d]
        out.append(r)
    return out


def statement_implies(p: Statement, q: Statement, schema: Schema) -> bool:
    """``p(x,y)`` entails ``q(x,y)`` for every pair of domain tuples."""
    return boxes_covered(statement_boxes(p, schema), statement_boxes(q, schema))


def statement_implies_reversed(pi: Statement, pj: Statement, schema: Schema) -> bool:
    """``pi(x,y)`` entails ``pj(y,x)`` for every pair of domain tuples."""
    return boxes_covered(statement_boxes(pi, schema), statement_boxes(pj, schema, reverse=True))


def statement_empty(p: Statement, schema: Schema) -> bool:
    return not any(clause_satisfiable(c, schema) for c in p.clauses)


# ---- normalisation ----------------------------------------------------------

def normalize_side(side: Iterable[Predicate], schema: Schema) -> tuple[Predicate, ...] | None:
    """Equivalent side with redundant predicates dropped; ``None`` if unsatisfiable."""
    by_attr: dict[int, tuple[list[str], list[str]]] = {}
    for p in side:
        pos, neg = by_attr.setdefault(p.attr, ([], []))
        (neg if p.negated else pos).append(p.value)
    out: list[Predicate] = []
    for a in sorted(by_attr):
        tax = schema.taxonomies[a]
        pos, neg = by_attr[a]
        pos = sorted(set(pos), key=tax.index)
        neg = sorted(set(neg), key=tax.index)
        kept = list(pos)
        for v in pos:
            others = [w for w in kept if w != v]
            if not others:
                continue
            inter = tax.full_mask
            for w in others:
                inter &= tax.down(w)
            if inter & ~tax.down(v) == 0:
                kept.remove(v)
        base = tax.full_mask
        for w in kept:
            base &= tax.down(w)
        negk = list(neg)
        for w in neg:
            rest = base
            for u in negk:
                if u != w:
                    rest &= ~tax.down(u)
            if rest & tax.down(w) == 0:
                negk.remove(w)
        final = base
        for u in negk:
            final &= ~tax.down(u)
        if not final:
            return None
        out.extend(Predicate(a, v, False) for v in kept)
        out.extend(Predicate(a, v, True) for v in negk)
    return tuple(out)


def normalize_clause(c: Clause, schema: Schema) -> Clause | None:
    b = normalize_side(c.better, schema)
    if b is None:
        return None
    w = normalize_side(c.worse, schema)
    if w is None:
        return None
    return Clause(b, w)


def prune_clauses(clauses: Iterable[Clause], schema: Schema) -> tuple[Clause, ...]:
    """Drop unsatisfiable, duplicate and sibling-subsumed clauses (first wins on ties)."""
    uniq: list[Clause] = []
    seen = set()
    for c in clauses:
        if c in seen:
            continue
        seen.add(c)
        if clause_satisfiable(c, schema):
            uniq.append(c)
    rects = [schema.rect(c) for c in uniq]
    keep = []
    for i, ri in enumerate(rects):
        dominated = False
        for j, rj in enumerate(rects):
            if i == j or not _box_inside(ri, rj):
                continue
            if not _box_inside(rj, ri) or j < i:
                dominated = True
                break
        if not dominated:
            keep.append(uniq[i])
    return tuple(keep)


def _check_cap(n: int, cap: int, what: str):
    if n > cap:
        raise CapacityExceeded(f"{what} needs more than {cap} clauses")


def conjoin_negation(p: Statement, q: Statement, schema: Schema, new_id: str | None = None,
                     cap: int = MAX_CLAUSES) -> Statement:
    """Clauses for ``p(x,y) and not q(y,x)``; may come back with no clauses."""
    current = list(p.clauses)
    for rq in q.reversed().clauses:
        rq_rect = schema.rect(rq)
        if not all(rq_rect):
            continue
        nxt: list[Clause] = []
        for c in current:
            rc = schema.rect(c)
            if not _box_meets(rc, rq_rect):
                nxt.append(c)
                continue
            if _box_inside(rc, rq_rect):
                continue
            for k, pred in enumerate(rq.better + rq.worse):
                if k < len(rq.better):
                    cand = Clause(c.better + (pred.flipped(),), c.worse)
                else:
                    cand = Clause(c.better, c.worse + (pred.flipped(),))
                cand = normalize_clause(cand, schema)
                if cand is not None:
                    nxt.append(cand)
        current = list(prune_clauses(nxt, schema))
        _check_cap(len(current), cap, f"negating {q.id} in {p.id}")
        if not current:
            break
    return Statement(new_id if new_id is not None else f"{p.id}!{q.id}", tuple(current))


def simplify(f: Formula) -> Formula:
    """Drop contradictory and sibling-subsumed clauses, then redundant statements.

    A statement is dropped when another one strictly contains it, or when an
    earlier one has exactly the same meaning.
    """
    schema = f.schema
    stmts = []
    for s in f.statements:
        cl = prune_clauses(s.clauses, schema)
        if cl:
            stmts.append(Statement(s.id, cl))
    n = len(stmts)
    boxes = [statement_boxes(s, schema) for s in stmts]
    implies = {}

    def imp(i, j):
        key = (i, j)
        if key not in implies:
            implies[key] = boxes_covered(boxes[i], boxes[j])
        return implies[key]

    keep = []
    for i in range(n):
        drop = False
        for j in range(n):
            if i != j and imp(i, j) and (j < i or not imp(j, i)):
                drop = True
                break
        if not drop:
            keep.append(stmts[i])
    return f.replace(keep)


# ---- tuple level --------------------------------------------------------------

def matches_side(t: Sequence[str] | dict, c: Clause, side: str, schema: Schema) -> bool:
    """Does tuple ``t`` satisfy every predicate on the given side of ``c``?"""
    if isinstance(t, dict):
        t = tuple(t[a] for a in schema.attributes)
    preds = c.better if side == "better" else c.worse
    for p in preds:
        if schema.taxonomies[p.attr].leq(t[p.attr], p.value) == p.negated:
            return False
    return True


def clause_holds(c: Clause, t1, t2, schema: Schema) -> bool:
    return matches_side(t1, c, "better", schema) and matches_side(t2, c, "worse", schema)


def statement_holds(s: Statement, t1, t2, schema: Schema) -> bool:
    return any(clause_holds(c, t1, t2, schema) for c in s.clauses)


# ---- parsing and printing -------------------------------------------------------

_TOKEN = re.compile(r"\s*(<=|[;|>&!]|[^\s;|>&!<]+(?:\s+[^\s;|>&!<]+)*)")


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise FormulaSyntaxError(f"unexpected character {rest[0]!r} at offset {pos}")
        out.append((m.group(1), m.start(1)))
        pos = m.end()
        if not text[pos:].strip():
            break
    return out


class _Parser:
    def __init__(self, text: str, schema: Schema):
        self.schema = schema
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def take(self, expected=None):
        if self.i >= len(self.toks):
            raise FormulaSyntaxError(f"unexpected end of formula, expected {expected or 'more input'}")
        tok, off = self.toks[self.i]
        if expected is not None and tok != expected:
            raise FormulaSyntaxError(f"expected {expected!r} at offset {off}, found {tok!r}")
        self.i += 1
        return tok

    def ident(self):
        if self.peek() is None:
            raise FormulaSyntaxError("unexpected end of formula, expected an identifier")
        tok = self.take()
        if tok in {"<=", ";", "|", ">", "&", "!"}:
            raise FormulaSyntaxError(f"expected an identifier, found {tok!r}")
        return tok

    def formula(self):
        stmts = [self.statement()]
        while self.peek() == ";":
            self.take(";")
            stmts.append(self.statement())
        if self.peek() is not None:
            raise FormulaSyntaxError(f"unexpected {self.peek()!r} after statement")
        return stmts

    def statement(self):
        cl = [self.clause()]
        while self.peek() == "|":
            self.take("|")
            cl.append(self.clause())
        return cl

    def clause(self):
        b = self.conj()
        self.take(">")
        w = self.conj()
        return make_clause(self.schema, b, w)

    def conj(self):
        if self.peek() == UNIVERSAL:
            self.take()
            return []
        preds = [self.pred()]
        while self.peek() == "&":
            self.take("&")
            preds.append(self.pred())
        return preds

    def pred(self):
        neg = False
        if self.peek() == "!":
            self.take("!")
            neg = True
        first = self.ident()
        if self.peek() == "<=":
            self.take("<=")
            value = self.ident()
            a = self.schema.attr_index(first)
            if value not in self.schema.taxonomies[a]:
                raise UnknownValue(f"value {value!r} is not in the taxonomy of {first}")
        else:
            value = first
            a = self.schema.resolve_bare(value)
        return Predicate(a, value, neg)


def parse_formula(text: str, schema: Schema) -> Formula:
    """Parse the textual formula syntax.

    Statements are separated by ``;`` or by line breaks, clauses by ``|`` and
    predicates by ``&``.  ``Attr<=value`` names the attribute explicitly, a bare
    value is resolved against the schema, ``!`` negates and ``*`` stands for
    an unconstrained side.  Lines starting with ``#`` are ignored.
    """
    lines = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        lines.append(line.rstrip(";").rstrip())
    if not lines:
        raise FormulaSyntaxError("formula is empty")
    parser = _Parser(" ; ".join(lines), schema)
    raw_statements = parser.formula()
    stmts = []
    for k, clauses in enumerate(raw_statements, 1):
        for c in clauses:
            if not clause_satisfiable(c, schema):
                raise UnsatisfiableClause(f"statement {k} has a contradictory clause: {format_clause(c, schema)}")
        uniq = tuple(dict.fromkeys(clauses))
        stmts.append(Statement(f"P{k}", uniq))
    return Formula(schema, tuple(stmts))


def format_predicate(p: Predicate, schema: Schema) -> str:
    return ("!" if p.negated else "") + f"{schema.attributes[p.attr]}<={p.value}"


def format_side(side: tuple, schema: Schema) -> str:
    return " & ".join(format_predicate(p, schema) for p in side) if side else UNIVERSAL


def format_clause(c: Clause, schema: Schema) -> str:
    return f"{format_side(c.better, schema)} > {format_side(c.worse, schema)}"


def format_statement(s: Statement, schema: Schema) -> str:
    return " | ".join(format_clause(c, schema) for c in s.clauses)


def format_formula(f: Formula, ids: bool = False) -> str:
    lines = []
    for s in f.statements:
        if ids:
            lines.append(f"# {s.id}")
        lines.append(format_statement(s, f.schema))
    return "\n".join(lines) + ("\n" if lines else "")
