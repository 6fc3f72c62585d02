"""The T and S rewriting operators and operator-sequence algebra."""

from __future__ import annotations

import re
from collections import OrderedDict
from dataclasses import dataclass

from .errors import InvalidCharacter
from .formula import (
    MAX_CLAUSES,
    Clause,
    Formula,
    Statement,
    _check_cap,
    boxes_covered,
    clause_satisfiable,
    conjoin_negation,
    normalize_side,
    prune_clauses,
    simplify,
    statement_boxes,
    statement_implies_reversed,
)

CANONICAL = ("", "T", "S", "TS", "ST", "TST", "STS", "STST")


def _wrap(sid: str, op: str) -> str:
    other = "!" if op == "*" else "*"
    return f"({sid})" if other in sid else sid


def compose_statements(pi: Statement, pj: Statement, schema, cap: int = MAX_CLAUSES) -> Statement:
    """Statement holding for (x, y) whenever ``pi(x, z)`` and ``pj(z, y)`` for some z."""
    out = []
    for cm in pi.clauses:
        for cq in pj.clauses:
            if clause_satisfiable(Clause(cm.worse + cq.better, ()), schema):
                b = normalize_side(cm.better, schema)
                w = normalize_side(cq.worse, schema)
                if b is not None and w is not None:
                    out.append(Clause(b, w))
    clauses = prune_clauses(out, schema)
    _check_cap(len(clauses), cap, f"composing {pi.id} with {pj.id}")
    return Statement(f"{_wrap(pi.id, '*')}*{_wrap(pj.id, '*')}", clauses)


def apply_T(f: Formula, cap: int = MAX_CLAUSES) -> Formula:
    """Close ``f`` under composition, then simplify.

    Each round composes every accumulated statement with every statement of
    the input.  A composed statement is kept only if no single accumulated
    statement already entails it; the loop stops when a round keeps nothing.
    """
    schema = f.schema
    original = list(f.statements)
    acc = list(original)
    acc_boxes = [statement_boxes(s, schema) for s in acc]
    seen_pairs = set()
    progress = True
    while progress:
        progress = False
        snapshot = list(acc)
        for pi in snapshot:
            for pj in original:
                if (pi.id, pj.id) in seen_pairs:
                    continue
                seen_pairs.add((pi.id, pj.id))
                cand = compose_statements(pi, pj, schema, cap)
                if not cand.clauses:
                    continue
                cb = statement_boxes(cand, schema)
                if any(boxes_covered(cb, ob) for ob in acc_boxes):
                    continue
                acc.append(cand)
                acc_boxes.append(cb)
                progress = True
    return simplify(f.replace(acc))


def specificity_sets(stmts, schema) -> list[list[int]]:
    """For each statement, the indices of statements whose reversal it strictly contains."""
    n = len(stmts)
    rev = {}

    def implies_rev(i, j):
        if (i, j) not in rev:
            rev[(i, j)] = statement_implies_reversed(stmts[i], stmts[j], schema)
        return rev[(i, j)]

    out = []
    for i in range(n):
        out.append([j for j in range(n) if j != i and implies_rev(j, i) and not implies_rev(i, j)])
    return out


def apply_S(f: Formula, cap: int = MAX_CLAUSES) -> Formula:
    """Remove from each statement the reversed pairs of more specific statements.

    Rounds work on a snapshot: every rewrite of a round is computed against the
    statements as they were when the round began.
    """
    schema = f.schema
    acc = list(f.statements)
    while True:
        impl = specificity_sets(acc, schema)
        if not any(impl):
            break
        nxt = []
        for i, s in enumerate(acc):
            if not impl[i]:
                nxt.append(s)
                continue
            cur = s
            for j in impl[i]:
                cur = conjoin_negation(cur, acc[j], schema, new_id=f"{_wrap(cur.id, '!')}!{_wrap(acc[j].id, '!')}", cap=cap)
                if not cur.clauses:
                    break
            if cur.clauses:
                nxt.append(cur)
        acc = nxt
    return simplify(f.replace(acc))


@dataclass(frozen=True)
class OperatorSequence:
    word: str
    canonical: str

    def __str__(self):
        return self.canonical or "ε"

    @property
    def transitive(self) -> bool:
        return self.canonical.endswith("T")


_EPS = {"", "ε", "e", "eps", "epsilon"}


def canonicalize(word: str) -> OperatorSequence:
    """Reduce a word over {T, S} to one of the eight representatives."""
    raw = word.strip()
    w = "" if raw in _EPS else raw.upper()
    bad = set(w) - {"T", "S"}
    if bad:
        raise InvalidCharacter(f"operator sequence {word!r} contains {''.join(sorted(bad))!r}; use only T and S")
    cur = w
    while True:
        nxt = re.sub(r"(T)T+|(S)S+", lambda m: m.group(1) or m.group(2), cur)
        nxt = nxt.replace("TSTS", "TS")
        if nxt == cur:
            break
        cur = nxt
    assert cur in CANONICAL, cur
    return OperatorSequence(word, cur)


class _Memo:
    def __init__(self, size=512):
        self.size = size
        self.data: OrderedDict = OrderedDict()

    def get(self, key):
        if key in self.data:
            self.data.move_to_end(key)
            return self.data[key]
        return None

    def put(self, key, value):
        self.data[key] = value
        if len(self.data) > self.size:
            self.data.popitem(last=False)


_memo = _Memo()
OPERATORS = {"T": apply_T, "S": apply_S}


def apply_operator(f: Formula, op: str, cap: int = MAX_CLAUSES) -> Formula:
    key = (id(f.schema), op, cap, f.key())
    hit = _memo.get(key)
    if hit is not None and hit.schema is f.schema:
        return hit
    out = OPERATORS[op](f, cap)
    _memo.put(key, out)
    return out


def apply_word(f: Formula, word: str, cap: int = MAX_CLAUSES) -> Formula:
    """Apply the letters of ``word`` literally, without canonicalising."""
    for op in word:
        f = apply_operator(f, op, cap)
    return f


def apply_sequence(f: Formula, seq, cap: int = MAX_CLAUSES) -> Formula:
    if not isinstance(seq, OperatorSequence):
        seq = canonicalize(seq)
    return apply_word(f, seq.canonical, cap)


def clear_cache():
    _memo.data.clear()
