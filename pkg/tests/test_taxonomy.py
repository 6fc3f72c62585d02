import io
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taxopref.errors import CycleDetected, EmptyTaxonomy, MalformedLine, UnknownValue
from taxopref.fixtures import data_path
from taxopref.taxonomy import (
    Taxonomy,
    dumps_taxonomy,
    gen_random,
    gen_regular,
    gen_scale_free,
    load_taxonomy,
    loads_taxonomy,
    scale_free_distribution,
)


@pytest.fixture(scope="module")
def place():
    return load_taxonomy(data_path("place.csv"))


@pytest.fixture(scope="module")
def wine():
    return load_taxonomy(data_path("wine.csv"))


def test_place_reachability(place):
    assert place.leq("Laficaia", "Piedmont")
    assert place.leq("Laficaia", "Langhe")
    assert not place.leq("Cuneo", "Langhe")
    assert not place.leq("Piedmont", "Laficaia")
    for v in place.values:
        assert place.leq(v, v)


def test_common_descendant(place):
    assert place.common_descendant("Asti", "Langhe") == "Casorzo"
    assert place.common_descendant("Siena", "Asti") is None
    assert place.common_descendant("Siena", "Siena") is not None


def test_heights(wine):
    assert wine.height("Amarone") == 0
    assert wine.height("white") == 1
    assert gen_regular(3, 3).height(gen_regular(3, 3).roots()[0]) == 2


def test_height_is_min_over_children():
    t = loads_taxonomy("b,a\nc,a\nd,c\n")
    assert t.height("a") == 1
    assert t.height("c") == 1
    assert t.height("b") == 0


def test_singleton():
    t = loads_taxonomy("a,\n")
    assert t.values == ["a"]
    assert t.height("a") == 0
    assert t.roots() == ["a"] and t.leaves() == ["a"]


def test_cycle_rejected():
    with pytest.raises(CycleDetected):
        loads_taxonomy("a,b\nb,a\n")
    with pytest.raises(CycleDetected):
        Taxonomy([], [("a", "a")])


def test_malformed_and_empty():
    with pytest.raises(MalformedLine) as e:
        loads_taxonomy("a,b\na,b,c\n", name="x.csv")
    assert "x.csv:2" in str(e.value)
    with pytest.raises(MalformedLine):
        loads_taxonomy("a&b,c\n")
    with pytest.raises(EmptyTaxonomy):
        loads_taxonomy("# nothing\n\n")


def test_unknown_value(place):
    with pytest.raises(UnknownValue):
        place.leq("Atlantis", "Piedmont")


def test_comments_and_whitespace():
    t = loads_taxonomy("# header\n b , a \n\nc,a\n")
    assert sorted(t.values) == ["a", "b", "c"]
    assert t.leq("b", "a")


def test_dag_reachability():
    t = loads_taxonomy("c,a\nc,b\nd,c\ne,b\n")
    assert not t.functional
    assert t.leq("d", "a") and t.leq("d", "b")
    assert t.common_descendant("a", "b") in {"c", "d"}
    assert set(t.down_values("b")) == {"b", "c", "d", "e"}


def test_round_trip(place):
    again = loads_taxonomy(dumps_taxonomy(place))
    assert sorted(again.values) == sorted(place.values)
    for a in place.values:
        for b in place.values:
            assert again.leq(a, b) == place.leq(a, b)


@st.composite
def dags(draw):
    n = draw(st.integers(1, 14))
    edges = []
    for k in range(1, n):
        for p in draw(st.sets(st.integers(0, k - 1), max_size=2)):
            edges.append((f"v{k}", f"v{p}"))
    return Taxonomy([f"v{k}" for k in range(n)], edges)


def _closure(t):
    vals = t.values
    reach = {v: {v} for v in vals}
    changed = True
    while changed:
        changed = False
        for c, p in t.edges:
            new = reach[p] | reach[c]
            if new != reach[p]:
                reach[p] = new
                changed = True
    return reach


@settings(max_examples=150, deadline=None)
@given(dags())
def test_leq_matches_closure(t):
    reach = _closure(t)
    for a in t.values:
        for b in t.values:
            assert t.leq(a, b) == (a in reach[b])
    for a in t.values:
        for b in t.values:
            cd = t.common_descendant(a, b)
            common = reach[a] & reach[b]
            assert (cd is None) == (not common)
            if cd is not None:
                assert cd in common


@settings(max_examples=100, deadline=None)
@given(dags())
def test_heights_property(t):
    for v in t.values:
        kids = t.children(v)
        if not kids:
            assert t.height(v) == 0
        else:
            assert t.height(v) == 1 + min(t.height(c) for c in kids)


def test_regular_sizes():
    assert len(gen_regular(2, 2)) == 6
    assert len(gen_regular(5, 6)) == 19530
    one = gen_regular(4, 1, seed=3)
    assert len(one) == 4 and all(one.height(v) == 0 for v in one.values)
    assert gen_regular(5, 6, seed=1).depth() == 6


def test_regular_is_deterministic():
    assert dumps_taxonomy(gen_regular(3, 3, 7)) == dumps_taxonomy(gen_regular(3, 3, 7))


def test_random_envelope():
    sizes = [len(gen_random(5, 6, s)) for s in range(100)]
    assert 5000 <= min(sizes) and max(sizes) <= 60000
    roots_only = gen_random(5, 1, 0)
    assert all(not roots_only.children(v) for v in roots_only.values)


def test_random_root_fanout_mean():
    fan = []
    for s in range(10000):
        t = gen_random(5, 2, s)
        fan.extend(len(t.children(r)) for r in t.roots())
    assert abs(statistics.fmean(fan) - 5) / 5 < 0.05


def test_scale_free_distribution_mean():
    p = scale_free_distribution(2.7)
    assert abs(p.sum() - 1) < 1e-9
    assert 1.0 < float((np.arange(len(p)) * p).sum()) < 1.5


def test_scale_free_single_root():
    t = gen_scale_free(1, 2.7, 0)
    assert len(t) == 1


@pytest.mark.slow
def test_scale_free_depth():
    depths = [gen_scale_free(15000, 2.7, s).depth() for s in range(20)]
    assert 20 <= statistics.median(depths) <= 80


@pytest.mark.slow
def test_scale_free_slope():
    t = gen_scale_free(100_000, 2.7, 0)
    counts = np.bincount(t.fanouts())
    k = np.nonzero(counts >= 5)[0]
    k = k[k >= 1]
    slope = np.polyfit(np.log(k), np.log(counts[k]), 1)[0]
    assert -3.1 <= slope <= -2.3


def test_load_from_stream():
    t = load_taxonomy(io.StringIO("x,y\n"), name="s")
    assert t.leq("x", "y")
