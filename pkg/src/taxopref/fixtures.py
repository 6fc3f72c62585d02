"""Bundled example data: the wine list and the calendar taxonomy."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .formula import Formula, Relation, parse_formula
from .io import load_schema, read_relation

WINE_LABELS = "abcdef"
CYCLE_LABELS = ["g", "h", "ℓ", "m"]


def data_path(name: str) -> str:
    return str(resources.files("taxopref").joinpath("data", name))


@lru_cache(maxsize=None)
def wine_schema():
    return load_schema(data_path("wines.schema"))


@lru_cache(maxsize=None)
def time_schema():
    return load_schema(data_path("time.schema"))


def wine_relation() -> Relation:
    rel = read_relation(data_path("wines.csv"), wine_schema())
    rel.labels = list(WINE_LABELS)
    return rel


def cycle_relation() -> Relation:
    rel = read_relation(data_path("cycle.csv"), wine_schema())
    rel.labels = list(CYCLE_LABELS)
    return rel


def _read(name):
    with open(data_path(name), encoding="utf-8") as fh:
        return fh.read()


def wine_formula() -> Formula:
    return parse_formula(_read("wines.prefs"), wine_schema())


def cycle_formula() -> Formula:
    return parse_formula(_read("cycle.prefs"), wine_schema())


def time_formula() -> Formula:
    return parse_formula(_read("time.prefs"), time_schema())
