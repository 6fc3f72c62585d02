import numpy as np
import pytest
from _instances import random_instance
from hypothesis import given, settings
from hypothesis import strategies as st

from taxopref.errors import DomainTooLarge
from taxopref.fixtures import time_formula, time_schema, wine_formula, wine_relation, wine_schema
from taxopref.formula import Clause, Predicate, Statement, format_statement, parse_formula
from taxopref.oracle import (
    Domain,
    ExtensionRelation,
    check_equivalence,
    compose,
    domain_size,
    enumerate_domain,
    extension,
    oracle_S,
    oracle_T,
    oracle_word,
    warshall,
)
from taxopref.rewrite import CANONICAL, apply_sequence, apply_word

seeds = st.integers(0, 10**6)


def test_domain_cap():
    assert domain_size(wine_schema()) == len(enumerate_domain(wine_schema()))
    with pytest.raises(DomainTooLarge):
        enumerate_domain(wine_schema(), cap=10)


def test_restricted_extensions():
    rel = wine_relation()
    dom = Domain.of_relation(rel)
    rels = ExtensionRelation.of_formula(wine_formula(), dom)
    labels = rel.labels
    assert rels.pairs(2) == set()
    assert {(labels[i], labels[j]) for i, j in rels.pairs(3)} == {("e", "f")}


def test_contradictory_statement_is_empty():
    ws = wine_schema()
    w = ws.attr_index("Wine")
    s = Statement("x", (Clause((Predicate(w, "white"), Predicate(w, "red")), ()),))
    assert not extension(s, Domain.full(ws)).any()


def test_compose_matches_definition():
    rng = np.random.default_rng(0)
    a = rng.random((12, 12)) < 0.2
    b = rng.random((12, 12)) < 0.2
    want = np.zeros_like(a)
    for i in range(12):
        for k in range(12):
            want[i, k] = any(a[i, j] and b[j, k] for j in range(12))
    assert np.array_equal(compose(a, b), want)


def test_oracle_T_time_summer_over_jul():
    ts = time_schema()
    dom = Domain.full(ts)
    f = time_formula()
    rel = ExtensionRelation.of_formula(f, dom)
    composed = compose(rel.exts[0], rel.exts[2])
    assert np.array_equal(composed, extension(parse_formula("summer > jul", ts).statements[0], dom))


def test_oracle_T_wines_uses_common_winery():
    ws = wine_schema()
    dom = Domain.full(ws)
    rel = ExtensionRelation.of_formula(wine_formula(), dom)
    assert compose(rel.exts[2], rel.exts[3]).any()
    out = oracle_T(rel)
    p6 = extension(parse_formula("Siena > Langhe & young", ws).statements[0], dom)
    assert any(np.array_equal(e, p6) for e in out.exts)


def test_oracle_S_wines():
    ws = wine_schema()
    dom = Domain.full(ws)
    out = oracle_S(ExtensionRelation.of_formula(wine_formula(), dom))
    p7 = extension(parse_formula("white > red & !Amarone", ws).statements[0], dom)
    assert any(np.array_equal(e, p7) for e in out.exts)


def test_oracle_S_unchanged():
    ws = wine_schema()
    dom = Domain.full(ws)
    for text in ("white > red\nSiena > Asti", "white > red\nred > white"):
        rel = ExtensionRelation.of_formula(parse_formula(text, ws), dom)
        out = oracle_S(rel)
        assert out.ids == rel.ids
        assert all(np.array_equal(a, b) for a, b in zip(out.exts, rel.exts))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_oracle_T_is_closure(seed):
    f = random_instance(seed)
    dom = Domain.full(f.schema)
    rel = ExtensionRelation.of_formula(f, dom)
    assert np.array_equal(oracle_T(rel).union(), warshall(rel.union()))


@pytest.mark.parametrize("word", CANONICAL)
def test_equivalence_time(word):
    rep = check_equivalence(time_formula(), word)
    assert rep.ok and all(s.statements_match for s in rep.stages)


@pytest.mark.slow
@pytest.mark.parametrize("word", CANONICAL)
def test_equivalence_wines(word):
    rep = check_equivalence(wine_formula(), word)
    assert rep.ok and all(s.statements_match for s in rep.stages)


def test_equivalence_epsilon_trivial():
    rep = check_equivalence(wine_formula(), "")
    assert rep.ok and len(rep.stages) == 1


def test_fault_injection_detected():
    def broken(f, word):
        g = apply_word(f, word)
        return g.replace(g.statements[:-1]) if word else g

    rep = check_equivalence(time_formula(), "T", rewrite=broken)
    assert not rep.ok
    assert rep.stages[-1].mismatches
    assert "MISMATCH" in rep.text()
    assert '"match": false' in rep.jsonl()


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_random_equivalence(seed):
    f = random_instance(seed)
    dom = Domain.full(f.schema)
    for w in CANONICAL:
        rep = check_equivalence(f, w, dom=dom)
        assert rep.ok, rep.text()
        assert all(s.statements_match for s in rep.stages)


def test_oracle_word_matches_sequence():
    f = time_formula()
    dom = Domain.full(f.schema)
    got = oracle_word(ExtensionRelation.of_formula(f, dom), "STST").union()
    want = ExtensionRelation.of_formula(apply_sequence(f, "STST"), dom).union()
    assert np.array_equal(got, want)
    printed = [format_statement(s, f.schema) for s in apply_sequence(f, "STST").statements]
    assert "Day<=jul21 > Day<=jul" in printed
