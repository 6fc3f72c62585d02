"""Preference evaluation over t-relations and computation of the Best set."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .formula import Formula, Relation, Schema
from .rewrite import apply_sequence, canonicalize

INF = math.inf


def _membership(tax, value: str) -> np.ndarray:
    """Boolean vector over the taxonomy's values: is each one below ``value``?"""
    out = np.zeros(len(tax), dtype=bool)
    bits = tax.down(value)
    i = tax.index(value)
    if tax.functional:
        size = bits.bit_length() - i
        out[i:i + size] = True
    else:
        out[[tax.index(v) for v in tax.decode(bits)]] = True
    return out


class CompiledFormula:
    """Per-tuple bitmasks recording which clause sides each tuple satisfies.

    Bit ``k`` of ``better[t]`` (``worse[t]``) is set when tuple ``t`` satisfies
    the better (worse) side of the ``k``-th clause of the formula.  Then
    ``t1`` is weakly preferred to ``t2`` iff ``better[t1] & worse[t2]`` is
    nonzero.
    """

    def __init__(self, f: Formula, rows: Sequence[Sequence[str]]):
        self.formula = f
        schema = f.schema
        n = len(rows)
        self.n = n
        clauses = f.clauses()
        self.n_clauses = len(clauses)
        codes = []
        for a, tax in enumerate(schema.taxonomies):
            codes.append(np.fromiter((tax.index(r[a]) for r in rows), dtype=np.int64, count=n))
        member_cache: dict = {}

        def side_vec(side):
            vec = np.ones(n, dtype=bool)
            for p in side:
                key = (p.attr, p.value)
                m = member_cache.get(key)
                if m is None:
                    m = member_cache[key] = _membership(schema.taxonomies[p.attr], p.value)
                hit = m[codes[p.attr]]
                vec &= ~hit if p.negated else hit
            return vec

        bmat = np.zeros((self.n_clauses, n), dtype=bool)
        wmat = np.zeros((self.n_clauses, n), dtype=bool)
        heights = np.full(self.n_clauses, INF)
        for k, c in enumerate(clauses):
            bmat[k] = side_vec(c.better)
            wmat[k] = side_vec(c.worse)
            pos = [schema.taxonomies[p.attr].height(p.value) for p in c.better if not p.negated]
            if pos:
                heights[k] = min(pos)
        self.better_matrix = bmat
        self.worse_matrix = wmat
        self.clause_heights = heights
        self.better = _to_ints(bmat)
        self.worse = _to_ints(wmat)
        self.better_words = _to_words(bmat)
        self.worse_words = _to_words(wmat)

    def weak(self, i: int, j: int) -> bool:
        return bool(self.better[i] & self.worse[j])

    def strict(self, i: int, j: int) -> bool:
        return bool(self.better[i] & self.worse[j]) and not (self.better[j] & self.worse[i])

    def relevant_mask(self) -> np.ndarray:
        if self.n_clauses == 0:
            return np.zeros(self.n, dtype=bool)
        return self.better_matrix.any(axis=0) | self.worse_matrix.any(axis=0)

    def height_indices(self) -> np.ndarray:
        hi = np.full(self.n, INF)
        for k in range(self.n_clauses):
            h = self.clause_heights[k]
            if h < INF:
                row = self.better_matrix[k]
                hi[row] = np.minimum(hi[row], h)
        return hi


def _to_ints(mat: np.ndarray) -> list[int]:
    """Columns of a (clauses x tuples) boolean matrix as Python int bitmasks."""
    k, n = mat.shape
    if k == 0:
        return [0] * n
    packed = np.packbits(mat.T, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def _to_words(mat: np.ndarray) -> np.ndarray:
    """Columns of a (clauses x tuples) boolean matrix as rows of uint64 words."""
    k, n = mat.shape
    nw = max(1, (k + 63) // 64)
    padded = np.zeros((nw * 64, n), dtype=bool)
    padded[:k] = mat
    packed = np.packbits(padded.T, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view(np.uint64).reshape(n, nw)


def _row(schema: Schema, t) -> tuple:
    if isinstance(t, dict):
        return tuple(t[a] for a in schema.attributes)
    return tuple(t)


def weak_pref(f: Formula, t1, t2) -> bool:
    c = CompiledFormula(f, [_row(f.schema, t1), _row(f.schema, t2)])
    return c.weak(0, 1)


def strict_pref(f: Formula, t1, t2) -> bool:
    c = CompiledFormula(f, [_row(f.schema, t1), _row(f.schema, t2)])
    return c.strict(0, 1)


def relevant(f: Formula, t) -> bool:
    return bool(CompiledFormula(f, [_row(f.schema, t)]).relevant_mask()[0])


def height_index(f: Formula, t) -> float:
    """Least height of a positive better-side value among matched clauses; inf if none."""
    return float(CompiledFormula(f, [_row(f.schema, t)]).height_indices()[0])


@dataclass
class BestResult:
    indices: list[int]
    tuples: list[tuple]
    relevant_count: int
    comparisons: int
    elapsed: float
    method: str = "bnl"
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.indices)


VECTOR_WINDOW = 48
NAIVE_BLOCK = 1024


def _bnl(cf: CompiledFormula, order) -> tuple[list[int], int]:
    """Block-nested-loops window scan; returns the final window and the comparison count.

    Small windows are scanned tuple by tuple with early exit.  Once the window
    grows past ``VECTOR_WINDOW`` members the same test runs as one array
    operation, and the comparison count is still that of the sequential scan.
    """
    better, worse = cf.better, cf.worse
    bw, ww = cf.better_words, cf.worse_words
    window: list[int] = []
    win_b = win_w = None
    comparisons = 0
    for t in order:
        if len(window) < VECTOR_WINDOW:
            bt, wt = better[t], worse[t]
            dominated = False
            beaten = []
            for pos, w in enumerate(window):
                comparisons += 1
                w_over_t = better[w] & wt
                t_over_w = bt & worse[w]
                if w_over_t and not t_over_w:
                    dominated = True
                    break
                if t_over_w and not w_over_t:
                    beaten.append(pos)
            if dominated:
                continue
            for pos in reversed(beaten):
                del window[pos]
            window.append(t)
            win_b = win_w = None
            continue
        if win_b is None:
            idx = np.asarray(window, dtype=np.int64)
            win_b, win_w = bw[idx], ww[idx]
        w_over_t = (win_b & ww[t]).any(axis=1)
        t_over_w = (bw[t] & win_w).any(axis=1)
        dom = w_over_t & ~t_over_w
        if dom.any():
            comparisons += int(dom.argmax()) + 1
            continue
        comparisons += len(window)
        beaten = t_over_w & ~w_over_t
        if beaten.any():
            keep = ~beaten
            window = [w for w, k in zip(window, keep.tolist()) if k]
            win_b, win_w = win_b[keep], win_w[keep]
        window.append(t)
        win_b = np.concatenate([win_b, bw[t:t + 1]])
        win_w = np.concatenate([win_w, ww[t:t + 1]])
    return window, comparisons


def best(f: Formula, r: Relation, heuristic: bool = True, keep_irrelevant: bool = False,
         compiled: CompiledFormula | None = None) -> BestResult:
    """Best tuples of ``r`` by block-nested-loops.

    Irrelevant tuples (matching no clause side) are skipped unless
    ``keep_irrelevant`` is set, in which case they are all part of the answer.
    With ``heuristic`` the relevant tuples are scanned by increasing height
    index, ties kept in input order.  The result lists tuples in input order.
    """
    start = time.perf_counter()
    cf = compiled or CompiledFormula(f, r.rows)
    rel_mask = cf.relevant_mask()
    candidates = np.nonzero(rel_mask)[0]
    if heuristic and candidates.size:
        hi = cf.height_indices()[candidates]
        candidates = candidates[np.argsort(hi, kind="stable")]
    window, comparisons = _bnl(cf, candidates.tolist())
    chosen = set(window)
    if keep_irrelevant:
        chosen.update(np.nonzero(~rel_mask)[0].tolist())
    idx = sorted(chosen)
    elapsed = time.perf_counter() - start
    return BestResult(idx, [r.rows[i] for i in idx], int(rel_mask.sum()), comparisons, elapsed,
                      method="bnl+hi" if heuristic else "bnl")


def naive_best(f: Formula, r: Relation, keep_irrelevant: bool = False,
               compiled: CompiledFormula | None = None) -> BestResult:
    """Best tuples by checking every pair, straight from the definition."""
    start = time.perf_counter()
    cf = compiled or CompiledFormula(f, r.rows)
    rel_mask = cf.relevant_mask()
    members = np.arange(cf.n) if keep_irrelevant else np.nonzero(rel_mask)[0]
    b = cf.better_matrix[:, members].T.astype(np.float32)
    w = cf.worse_matrix[:, members].T.astype(np.float32)
    dominated = np.zeros(members.size, dtype=bool)
    for lo in range(0, members.size, NAIVE_BLOCK):
        hi = lo + NAIVE_BLOCK
        over = (b[lo:hi] @ w.T) > 0
        under = (w[lo:hi] @ b.T) > 0
        dominated |= (over & ~under).any(axis=0)
    idx = [int(i) for i in members[~dominated]]
    elapsed = time.perf_counter() - start
    m = members.size
    return BestResult(idx, [r.rows[i] for i in idx], int(rel_mask.sum()), m * (m - 1), elapsed, method="naive")


def best_for_sequence(f: Formula, seq, r: Relation, heuristic: bool = True,
                      keep_irrelevant: bool = False, naive: bool | None = None) -> BestResult:
    """Rewrite ``f`` by ``seq`` and evaluate Best.

    Sequences that do not end in T may give an order-dependent window, so by
    default they are evaluated with the pairwise scan.
    """
    s = canonicalize(seq) if isinstance(seq, str) else seq
    g = apply_sequence(f, s)
    if naive is None:
        naive = not s.transitive
    if naive:
        return naive_best(g, r, keep_irrelevant=keep_irrelevant)
    return best(g, r, heuristic=heuristic, keep_irrelevant=keep_irrelevant)


def diff_best(f: Formula, seq_a, seq_b, r: Relation, keep_irrelevant: bool = False) -> tuple[set, set]:
    """Indices in Best under ``seq_a`` but not ``seq_b``, and vice versa."""
    a = set(best_for_sequence(f, seq_a, r, keep_irrelevant=keep_irrelevant).indices)
    b = set(best_for_sequence(f, seq_b, r, keep_irrelevant=keep_irrelevant).indices)
    return a - b, b - a
